//! Hyperplane rounding with single-flip local search. Each round samples
//! cuts from the current matrix, then pulls the matrix toward the best cut
//! found so far before sampling again.

use nalgebra::{Cholesky, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::instance::{CutSolution, MaxCutProblem};
use crate::linalg::{min_eigenvalue, Matrix};

#[derive(Debug, Clone)]
pub struct RoundingConfig {
    pub hyperplanes_per_round: usize,
    pub rounds: usize,
    /// Weight of the relaxation matrix when blending with the best cut.
    pub alpha: f64,
    pub seed: u64,
}

impl Default for RoundingConfig {
    fn default() -> Self {
        Self { hyperplanes_per_round: 20, rounds: 10, alpha: 0.5, seed: 0 }
    }
}

/// Rows `v_i` of a factor with `X = V V'`, after shifting an indefinite
/// `X` back into the cone and rescaling to unit diagonal.
pub fn gram_factor(x: &Matrix) -> Matrix {
    let n = x.nrows();
    let mut y = x.clone();
    let lam = min_eigenvalue(&y);
    if lam < 0.0 {
        y += Matrix::identity(n, n) * (lam.abs() + 1e-9);
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    y[(i, j)] /= (y[(i, i)] * y[(j, j)]).sqrt();
                }
            }
        }
        for i in 0..n {
            y[(i, i)] = 1.0;
        }
    }
    if let Some(chol) = Cholesky::new(y.clone()) {
        return chol.l();
    }
    let eig = SymmetricEigen::new(y);
    let mut v = eig.eigenvectors;
    for (k, &l) in eig.eigenvalues.iter().enumerate() {
        let s = l.max(0.0).sqrt();
        v.column_mut(k).scale_mut(s);
    }
    v
}

fn round_with_factor(v: &Matrix, r: &[f64]) -> Vec<i8> {
    (0..v.nrows())
        .map(|i| {
            let d: f64 = v.row(i).iter().zip(r).map(|(a, b)| a * b).sum();
            if d >= 0.0 {
                1
            } else {
                -1
            }
        })
        .collect()
}

/// `x_i = sign(v_i' r)` with `sign(0) = +1`.
pub fn gw_sample(x: &Matrix, r: &[f64]) -> Vec<i8> {
    round_with_factor(&gram_factor(x), r)
}

/// Repeats the best improving single flip until none is left.
pub fn one_opt(x: &[i8], problem: &MaxCutProblem) -> Vec<i8> {
    let m = problem.matrix();
    let n = x.len();
    let mut x = x.to_vec();
    let mut s: Vec<f64> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i).map(|j| m[(i, j)] * x[j] as f64).sum())
        .collect();
    let tol = if problem.integral() { 0.5 } else { 1e-12 * (1.0 + problem.max_abs()) };
    loop {
        let (best, gain) = (0..n)
            .map(|i| (i, -4.0 * x[i] as f64 * s[i]))
            .fold((usize::MAX, 0.0), |acc, (i, g)| if g > acc.1 { (i, g) } else { acc });
        if best == usize::MAX || gain <= tol {
            return x;
        }
        let old = x[best] as f64;
        x[best] = -x[best];
        for j in 0..n {
            if j != best {
                s[j] -= 2.0 * old * m[(j, best)];
            }
        }
    }
}

fn normalized(mut x: Vec<i8>) -> Vec<i8> {
    if x.first() == Some(&-1) {
        x.iter_mut().for_each(|v| *v = -*v);
    }
    x
}

/// Best cut found by blended hyperplane rounding; the returned vector has
/// `x[0] = +1`.
pub fn run_heuristic(x_agg: &Matrix, problem: &MaxCutProblem, config: &RoundingConfig) -> CutSolution {
    let n = problem.size();
    if n == 0 {
        return problem.solution(Vec::new());
    }
    let mut factor = gram_factor(x_agg);
    if config.rounds == 0 || config.hyperplanes_per_round == 0 {
        let r = vec![1.0; n];
        return problem.solution(normalized(one_opt(&round_with_factor(&factor, &r), problem)));
    }
    let alpha = config.alpha.clamp(0.0, 1.0);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut best: Option<CutSolution> = None;
    for _ in 0..config.rounds {
        let mut improved = false;
        for _ in 0..config.hyperplanes_per_round {
            let r: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let cut = problem.solution(one_opt(&round_with_factor(&factor, &r), problem));
            if best.as_ref().is_none_or(|b| cut.value > b.value) {
                best = Some(cut);
                improved = true;
            }
        }
        if !improved {
            break;
        }
        let xb = &best.as_ref().expect("at least one sample").x;
        let mut blend = x_agg * alpha;
        for i in 0..n {
            for j in 0..n {
                blend[(i, j)] += (1.0 - alpha) * (xb[i] * xb[j]) as f64;
            }
        }
        factor = gram_factor(&blend);
    }
    let best = best.expect("at least one sample");
    problem.solution(normalized(best.x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{brute_force_maxcut, maxcut_from_graph};
    use proptest::prelude::*;

    fn k3() -> MaxCutProblem {
        maxcut_from_graph(&(Matrix::from_element(3, 3, 1.0) - Matrix::identity(3, 3))).unwrap()
    }

    fn random_graph(n: usize, weights: &[i32]) -> MaxCutProblem {
        let mut w = Matrix::zeros(n, n);
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                w[(i, j)] = weights[k % weights.len()] as f64;
                w[(j, i)] = w[(i, j)];
                k += 1;
            }
        }
        maxcut_from_graph(&w).unwrap()
    }

    #[test]
    fn rank_one_recovers_the_cut() {
        let x = [1.0, -1.0, -1.0, 1.0];
        let xx = Matrix::from_fn(4, 4, |i, j| x[i] * x[j]);
        for r in [[0.3, -1.0, 2.0, 0.1], [-0.7, 0.2, 0.2, -0.4]] {
            let s = gw_sample(&xx, &r);
            let same = s.iter().zip(&x).all(|(a, b)| *a as f64 == *b);
            let flipped = s.iter().zip(&x).all(|(a, b)| *a as f64 == -*b);
            assert!(same || flipped);
        }
    }

    #[test]
    fn identity_reads_signs_of_direction() {
        assert_eq!(gw_sample(&Matrix::identity(3, 3), &[0.5, -2.0, 0.0]), vec![1, -1, 1]);
    }

    #[test]
    fn k3_sampling_reaches_optimum() {
        let x = (Matrix::identity(3, 3) * 3.0 - Matrix::from_element(3, 3, 1.0)) / 2.0;
        let p = k3();
        let v = gram_factor(&x);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let best = (0..200)
            .map(|_| {
                let r: Vec<f64> = (0..3).map(|_| StandardNormal.sample(&mut rng)).collect();
                p.objective(&round_with_factor(&v, &r))
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(best, 2.0);
        assert_eq!(run_heuristic(&x, &p, &RoundingConfig::default()).value, 2.0);
    }

    #[test]
    fn one_opt_examples() {
        let p = k3();
        assert_eq!(one_opt(&[1, 1, -1], &p), vec![1, 1, -1]);
        let edge = maxcut_from_graph(&Matrix::from_row_slice(2, 2, &[0., 5., 5., 0.])).unwrap();
        let x = one_opt(&[1, 1], &edge);
        assert_eq!(edge.objective(&x), 5.0);
    }

    #[test]
    fn degenerate_config_samples_once() {
        let p = k3();
        let cfg = RoundingConfig { rounds: 0, ..Default::default() };
        let sol = run_heuristic(&Matrix::identity(3, 3), &p, &cfg);
        assert_eq!(sol.value, 2.0);
        assert_eq!(sol.x[0], 1);
    }

    #[test]
    fn optimal_rank_one_in_first_round() {
        let w: Vec<i32> = vec![3, -1, 4, 1, -5, 9, 2, -6, 5, 3];
        let p = random_graph(5, &w);
        let opt = brute_force_maxcut(&p).unwrap();
        let xx = Matrix::from_fn(5, 5, |i, j| (opt.x[i] * opt.x[j]) as f64);
        let cfg = RoundingConfig { rounds: 1, ..Default::default() };
        assert_eq!(run_heuristic(&xx, &p, &cfg).value, opt.value);
    }

    proptest! {
        #[test]
        fn one_opt_never_worsens(
            weights in proptest::collection::vec(-10i32..=10, 66),
            signs in proptest::collection::vec(any::<bool>(), 12),
        ) {
            let p = random_graph(12, &weights);
            let x: Vec<i8> = signs.iter().map(|&b| if b { 1 } else { -1 }).collect();
            let y = one_opt(&x, &p);
            prop_assert!(p.objective(&y) >= p.objective(&x));
            for i in 0..12 {
                let mut z = y.clone();
                z[i] = -z[i];
                prop_assert!(p.objective(&z) <= p.objective(&y));
            }
        }

        #[test]
        fn heuristic_is_a_valid_lower_bound(
            weights in proptest::collection::vec(-10i32..=10, 45),
            seed in 0u64..1000,
        ) {
            let p = random_graph(10, &weights);
            let cfg = RoundingConfig { seed, ..Default::default() };
            let sol = run_heuristic(&Matrix::identity(10, 10), &p, &cfg);
            prop_assert_eq!(sol.value, p.objective(&sol.x));
            prop_assert!(sol.value <= brute_force_maxcut(&p).unwrap().value);
        }
    }
}
