//! Exact penalty reformulation of a linearly constrained BQP as Max-Cut on
//! `n + 1` vertices.
//!
//! In ±1 variables the BQP reads `min f(x) = x'Fx + c'x` subject to
//! `Ax = b`. With `u >= max` of `f` over the feasible set and `l <= min` of
//! `f` over all of `{-1,1}^n`, the choice `sigma = u - l + eps` makes
//!
//! ```text
//!   h(x) = f(x) + sigma |Ax - b|^2
//! ```
//!
//! agree with `f` on feasible points and exceed `rho = u` on infeasible
//! ones whenever `|Ax - b|^2 >= 1` there, which holds for integral data.

use crate::bundle::{compute_upper_bound, BoundParams};
use crate::error::{SdpError, SolveError};
use crate::instance::{bqp_to_pm1, pm1_to_binary, BinarySolution, BqpInstance, BqpOutcome, CutSolution, MaxCutProblem, PlusMinusForm};
use crate::linalg::{null_space, Matrix};
use crate::sdp::{solve_diag_sdp, solve_on_face, SdpOptions};

/// Tolerance of the outward rounding applied to certified bounds.
const ROUNDING_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyParams {
    pub rho: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub l_tilde: f64,
    pub u_tilde: f64,
}

#[derive(Debug, Clone)]
pub struct PenaltyReformulation {
    /// `(n+1) x (n+1)` matrix with `x̄'Qx̄ = f(x) + sigma |Ax - b|^2` for
    /// `x̄ = (1, x)`; the constant of the ±1 form is kept apart.
    pub q: Matrix,
    pub params: PenaltyParams,
    pub pm: PlusMinusForm,
    /// The relaxation defining `u_tilde` has no feasible point, which
    /// certifies that the BQP is infeasible.
    pub relaxation_empty: bool,
}

/// `[[0, c'/2], [c/2, F]]` in ±1 data.
pub fn homogenized_objective(pm: &PlusMinusForm) -> Matrix {
    let n = pm.f.nrows();
    let mut q = Matrix::zeros(n + 1, n + 1);
    q.view_mut((1, 1), (n, n)).copy_from(&pm.f);
    for i in 0..n {
        q[(0, i + 1)] = pm.c[i] / 2.0;
        q[(i + 1, 0)] = pm.c[i] / 2.0;
    }
    q
}

fn crude_bound(pm: &PlusMinusForm) -> f64 {
    pm.c.iter().map(|v| v.abs()).sum::<f64>() + pm.f.iter().map(|v| v.abs()).sum::<f64>()
}

/// Upper bound on `f(x) + constant` over feasible points, from the SDP
/// relaxation with `[b, -A] Y = 0`. Returns `+inf` when that relaxation is
/// empty. Integral data rounds the bound up to an integer.
pub fn compute_u_tilde(pm: &PlusMinusForm, opts: &SdpOptions) -> f64 {
    let n = pm.f.nrows();
    let q0 = homogenized_objective(pm);
    let m = pm.a.nrows();
    let raw = if m == 0 {
        match solve_diag_sdp(&q0, &[], opts) {
            Ok(sol) => sol.dual_bound,
            Err(e) => fallback_upper(pm, e),
        }
    } else {
        // rows (b_k, -A_k) must lie in the kernel of Y
        let mut r = Matrix::zeros(m, n + 1);
        for k in 0..m {
            r[(k, 0)] = pm.b[k];
            for i in 0..n {
                r[(k, i + 1)] = -pm.a[(k, i)];
            }
        }
        let p = r.transpose() * &r;
        let emptiness = match solve_diag_sdp(&(-&p), &[], opts) {
            Ok(sol) => sol.dual_bound,
            Err(SdpError::NotConverged { dual_bound, .. }) => dual_bound,
            Err(_) => 0.0,
        };
        let scale = 1.0 + p.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if emptiness < -1e-6 * scale {
            return f64::INFINITY;
        }
        let basis = null_space(&r, 1e-10);
        if basis.ncols() == 0 {
            return f64::INFINITY;
        }
        let reduced = basis.transpose() * &q0 * &basis;
        match solve_on_face(&reduced, &basis, opts) {
            Ok(sol) => sol.dual_bound,
            Err(e) => fallback_upper(pm, e),
        }
    };
    let u = raw + pm.constant;
    if pm.integral {
        (u - ROUNDING_SLACK).ceil()
    } else {
        u
    }
}

fn fallback_upper(pm: &PlusMinusForm, e: SdpError) -> f64 {
    let crude = crude_bound(pm);
    log::warn!("upper relaxation failed ({e}); using crude bound");
    match e {
        SdpError::NotConverged { dual_bound, .. } if dual_bound.is_finite() => dual_bound.min(crude),
        _ => crude,
    }
}

/// Lower bound on `f(x) + constant` over all of `{-1,1}^n`, from the
/// relaxation strengthened by triangle and pentagonal inequalities.
pub fn compute_l_tilde(pm: &PlusMinusForm, params: &BoundParams) -> f64 {
    let q0 = homogenized_objective(pm);
    let problem = MaxCutProblem::new_unchecked(-q0, 0.0, false);
    let bp = BoundParams { max_order: params.max_order.min(5), prune_target: None, ..params.clone() };
    let mut ub = compute_upper_bound(&problem, &bp).ub;
    if !ub.is_finite() {
        ub = crude_bound(pm);
    }
    let l = pm.constant - ub.min(crude_bound(pm));
    if pm.integral {
        (l + ROUNDING_SLACK).floor()
    } else {
        l
    }
}

/// `Q` for a given `sigma`.
pub fn penalty_matrix(pm: &PlusMinusForm, sigma: f64) -> Matrix {
    let n = pm.f.nrows();
    let at = pm.a.transpose();
    let lin = &pm.c - (&at * &pm.b) * (2.0 * sigma);
    let mut q = Matrix::zeros(n + 1, n + 1);
    q[(0, 0)] = sigma * pm.b.dot(&pm.b);
    q.view_mut((1, 1), (n, n)).copy_from(&(&pm.f + (&at * &pm.a) * sigma));
    for i in 0..n {
        q[(0, i + 1)] = lin[i] / 2.0;
        q[(i + 1, 0)] = lin[i] / 2.0;
    }
    q
}

#[derive(Debug, Clone, Default)]
pub struct PenaltyOptions {
    /// Overrides the default slack (1 for integral data).
    pub epsilon: Option<f64>,
    pub bound: BoundParams,
    pub sdp: SdpOptions,
}

pub fn build_penalty(inst: &BqpInstance, opts: &PenaltyOptions) -> Result<PenaltyReformulation, SolveError> {
    if let Some(e) = opts.epsilon {
        if !(e > 0.0) {
            return Err(SolveError::Config(format!("epsilon must be positive, got {e}")));
        }
    }
    if !inst.integral() {
        log::warn!("non-integral data: feasibility and optimality verdicts rely on tolerances");
    }
    let pm = bqp_to_pm1(inst);
    let u_tilde = compute_u_tilde(&pm, &opts.sdp);
    let relaxation_empty = u_tilde.is_infinite();
    let l_tilde = compute_l_tilde(&pm, &opts.bound);
    let spread = if relaxation_empty { 0.0 } else { (u_tilde - l_tilde).max(0.0) };
    let epsilon = opts.epsilon.unwrap_or(if pm.integral { 1.0 } else { 1e-3 * (spread + 1.0) });
    let sigma = spread + epsilon;
    let q = penalty_matrix(&pm, sigma);
    let params = PenaltyParams { rho: u_tilde, sigma, epsilon, l_tilde, u_tilde };
    Ok(PenaltyReformulation { q, params, pm, relaxation_empty })
}

/// `maximize x̄'(-Q)x̄ - constant`; its optimum is `-h*`.
pub fn penalty_to_maxcut(reform: &PenaltyReformulation) -> MaxCutProblem {
    MaxCutProblem::new_unchecked(-&reform.q, -reform.pm.constant, reform.pm.integral)
}

/// Reads a Max-Cut optimum of [`penalty_to_maxcut`] back as a BQP verdict.
pub fn interpret(cut: &CutSolution, reform: &PenaltyReformulation, inst: &BqpInstance) -> Result<BqpOutcome, SolveError> {
    let h = -cut.value;
    let tol = if reform.pm.integral { 0.5 } else { 1e-6 };
    if reform.relaxation_empty || h > reform.params.rho + tol {
        return Ok(BqpOutcome::Infeasible);
    }
    if cut.x.len() != inst.n() + 1 {
        return Err(SolveError::Inconsistent(format!("cut has {} entries for n = {}", cut.x.len(), inst.n())));
    }
    let flip = cut.x[0];
    let x: Vec<i8> = cut.x[1..].iter().map(|&v| v * flip).collect();
    let z = pm1_to_binary(&x);
    if !inst.is_feasible(&z) {
        return Err(SolveError::Inconsistent(format!(
            "penalty optimum {h} <= rho {} but Az != b",
            reform.params.rho
        )));
    }
    let value = inst.objective(&z);
    Ok(BqpOutcome::Optimal(BinarySolution { z, value, feasible: true }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{binary_to_pm1, brute_force_bqp, brute_force_maxcut};
    use crate::linalg::Vector;

    fn inst(f: &[f64], c: &[f64], a: &[f64], b: &[f64]) -> BqpInstance {
        let n = c.len();
        let m = b.len();
        BqpInstance::new(
            Matrix::from_row_slice(n, n, f),
            Vector::from_row_slice(c),
            Matrix::from_row_slice(m, n, a),
            Vector::from_row_slice(b),
        )
        .unwrap()
    }

    fn pm_n1() -> PlusMinusForm {
        PlusMinusForm {
            f: Matrix::zeros(1, 1),
            c: Vector::from_element(1, 1.0),
            a: Matrix::from_element(1, 1, 1.0),
            b: Vector::from_element(1, 1.0),
            constant: 0.0,
            integral: true,
        }
    }

    fn reform_with_sigma(pm: PlusMinusForm, sigma: f64, rho: f64) -> PenaltyReformulation {
        let q = penalty_matrix(&pm, sigma);
        let params = PenaltyParams { rho, sigma, epsilon: 1.0, l_tilde: rho - sigma + 1.0, u_tilde: rho };
        PenaltyReformulation { q, params, pm, relaxation_empty: false }
    }

    #[test]
    fn one_variable_penalty_matrix() {
        let pm = pm_n1();
        let q = penalty_matrix(&pm, 3.0);
        assert_eq!(q, Matrix::from_row_slice(2, 2, &[3.0, -2.5, -2.5, 3.0]));
        let h = |x: f64| {
            let v = [1.0, x];
            (0..2).map(|i| (0..2).map(|j| v[i] * q[(i, j)] * v[j]).sum::<f64>()).sum::<f64>()
        };
        assert_eq!(h(1.0), 1.0);
        assert_eq!(h(-1.0), 11.0);
        let r = reform_with_sigma(pm, 3.0, 1.0);
        let mc = penalty_to_maxcut(&r);
        let best = brute_force_maxcut(&mc).unwrap();
        assert_eq!(best.value, -1.0);
        let z_inst = inst(&[0.0], &[2.0], &[1.0], &[1.0]);
        assert_eq!(bqp_to_pm1(&z_inst).c, pm_n1().c);
        match interpret(&best, &r, &z_inst).unwrap() {
            BqpOutcome::Optimal(s) => assert_eq!(s.z, vec![1]),
            BqpOutcome::Infeasible => panic!("expected feasible"),
        }
    }

    #[test]
    fn penalty_matrix_special_cases() {
        let mut pm = pm_n1();
        pm.a = Matrix::zeros(0, 1);
        pm.b = Vector::zeros(0);
        let q = penalty_matrix(&pm, 7.0);
        assert_eq!(q, Matrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        let mut pm = pm_n1();
        pm.b = Vector::zeros(1);
        let q = penalty_matrix(&pm, 2.0);
        assert_eq!(q[(0, 0)], 0.0);
        assert_eq!(q[(0, 1)], 0.5);
    }

    #[test]
    fn zero_and_identity_q() {
        let zero = MaxCutProblem::new(Matrix::zeros(3, 3), 0.0, true).unwrap();
        assert_eq!(brute_force_maxcut(&zero).unwrap().value, 0.0);
        let id = MaxCutProblem::new(-Matrix::identity(4, 4), 0.0, true).unwrap();
        assert_eq!(brute_force_maxcut(&id).unwrap().value, -4.0);
    }

    #[test]
    fn penalty_identity_on_all_points() {
        let i = inst(
            &[0., 3., -2., 3., 1., 0., -2., 0., 4.],
            &[1., -5., 2.],
            &[1., 1., 0., 0., 1., 1.],
            &[1., 1.],
        );
        let pm = bqp_to_pm1(&i);
        let q = penalty_matrix(&pm, 4.5);
        for mask in 0..8u32 {
            let x: Vec<i8> = (0..3).map(|k| if mask >> k & 1 == 1 { 1 } else { -1 }).collect();
            let xb: Vec<f64> = std::iter::once(1.0).chain(x.iter().map(|&v| v as f64)).collect();
            let lhs: f64 = (0..4).map(|a| (0..4).map(|b| xb[a] * q[(a, b)] * xb[b]).sum::<f64>()).sum();
            let rhs = pm.objective(&x) + 4.5 * pm.violation(&x);
            assert!((lhs - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn u_tilde_examples() {
        let opts = SdpOptions::default();
        let small = inst(&[0., 0., 0., 0.], &[-1., -1.], &[1., 1.], &[1.]);
        let u = compute_u_tilde(&bqp_to_pm1(&small), &opts);
        assert!(u >= -1.0);
        let free = inst(&[0., 2., 2., -3.], &[1., -1.], &[], &[]);
        let best_max = (0..4u8)
            .map(|m| free.objective(&[m & 1, m >> 1 & 1]))
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(compute_u_tilde(&bqp_to_pm1(&free), &opts) >= best_max);
        let empty = inst(&[0., 0., 0., 0.], &[0., 0.], &[1., 1.], &[3.]);
        assert!(compute_u_tilde(&bqp_to_pm1(&empty), &opts).is_infinite());
    }

    #[test]
    fn l_tilde_examples() {
        let params = BoundParams::default();
        let zero = inst(&[0., 0., 0., 0.], &[0., 0.], &[], &[]);
        assert_eq!(compute_l_tilde(&bqp_to_pm1(&zero), &params), 0.0);
        let mut pm = pm_n1();
        pm.a = Matrix::zeros(0, 1);
        pm.b = Vector::zeros(0);
        assert_eq!(compute_l_tilde(&pm, &params), -1.0);
    }

    #[test]
    fn small_pipeline_matches_oracle() {
        let cases = [
            inst(&[0., 0., 0., 0.], &[-1., -1.], &[1., 1.], &[1.]),
            inst(&[0., 0., 0., 0.], &[0., 0.], &[1., 1.], &[3.]),
            inst(&[0., 3., -2., 3., 1., 0., -2., 0., 4.], &[1., -5., 2.], &[], &[]),
            inst(&[0., 3., -2., 3., 1., 0., -2., 0., 4.], &[1., -5., 2.], &[1., 1., 1.], &[2.]),
        ];
        for i in &cases {
            let r = build_penalty(i, &PenaltyOptions::default()).unwrap();
            let expected = brute_force_bqp(i).unwrap();
            if r.relaxation_empty {
                assert_eq!(expected, BqpOutcome::Infeasible);
                continue;
            }
            let mc = penalty_to_maxcut(&r);
            let best = brute_force_maxcut(&mc).unwrap();
            let got = interpret(&best, &r, i).unwrap();
            assert_eq!(got.value(), expected.value());
            if let BqpOutcome::Optimal(s) = got {
                assert_eq!(binary_to_pm1(&s.z).len(), i.n());
            }
        }
    }
}
