//! Hypermetric cutting planes `<bb', X> >= 1` with `b` in {-1,0,1}^n and a
//! support of 3, 5 or 7 entries.
//!
//! Triangles are separated by full enumeration. Pentagonal and heptagonal
//! inequalities are found heuristically: for a fixed sign pattern `h` the
//! search for a placement `p` minimizing `<hh', X(p,p)>` is a quadratic
//! assignment problem, attacked here with simulated annealing.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::InstanceError;
use crate::linalg::Matrix;

/// Smallest violation for a cut to be admitted.
pub const VIOLATION_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct HypermetricCut {
    support: Vec<usize>,
    signs: Vec<i8>,
    /// `1 - <bb', X>` at the matrix the cut was separated from.
    pub violation: f64,
}

pub type CutKey = (Vec<usize>, Vec<i8>);

impl HypermetricCut {
    /// Builds a cut from `(index, sign)` pairs. The support is sorted and
    /// the signs flipped so the first one is `+1`.
    pub fn new(mut entries: Vec<(usize, i8)>) -> Result<Self, InstanceError> {
        let k = entries.len();
        if !matches!(k, 3 | 5 | 7) {
            return Err(InstanceError::OutOfRange(format!("support size {k}")));
        }
        if entries.iter().any(|&(_, s)| s != 1 && s != -1) {
            return Err(InstanceError::OutOfRange("signs must be +-1".into()));
        }
        entries.sort_unstable_by_key(|&(i, _)| i);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(InstanceError::OutOfRange("repeated support index".into()));
        }
        let flip = entries[0].1;
        let support = entries.iter().map(|&(i, _)| i).collect();
        let signs = entries.iter().map(|&(_, s)| s * flip).collect();
        Ok(Self { support, signs, violation: 0.0 })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn signs(&self) -> &[i8] {
        &self.signs
    }

    pub fn order(&self) -> usize {
        self.support.len()
    }

    pub fn key(&self) -> CutKey {
        (self.support.clone(), self.signs.clone())
    }

    /// `<bb', X>`.
    pub fn lhs(&self, x: &Matrix) -> f64 {
        let mut v = 0.0;
        for (a, &i) in self.support.iter().enumerate() {
            for (b, &j) in self.support.iter().enumerate() {
                v += (self.signs[a] * self.signs[b]) as f64 * x[(i, j)];
            }
        }
        v
    }

    pub fn violation_at(&self, x: &Matrix) -> f64 {
        1.0 - self.lhs(x)
    }

    /// Row of the normalized operator in `A(X) <= 1` form:
    /// `-(2/(k-1)) sum_{a<b} s_a s_b X_ab`, which equals
    /// `(k - <bb',X>)/(k-1)` on unit-diagonal matrices.
    pub fn apply(&self, x: &Matrix) -> f64 {
        let k = self.order();
        let mut s = 0.0;
        for a in 0..k {
            for b in (a + 1)..k {
                s += (self.signs[a] * self.signs[b]) as f64 * x[(self.support[a], self.support[b])];
            }
        }
        -2.0 * s / (k as f64 - 1.0)
    }

    /// `m += gamma * B` where `<B, X> = apply(X)`.
    pub fn add_adjoint(&self, m: &mut Matrix, gamma: f64) {
        let k = self.order();
        let w = -gamma / (k as f64 - 1.0);
        for a in 0..k {
            for b in (a + 1)..k {
                let v = w * (self.signs[a] * self.signs[b]) as f64;
                let (i, j) = (self.support[a], self.support[b]);
                m[(i, j)] += v;
                m[(j, i)] += v;
            }
        }
    }

    /// Checks `(b'x)^2 >= 1` for every sign assignment of the support.
    pub fn is_valid_exhaustive(&self) -> bool {
        let k = self.order();
        (0u32..(1 << k)).all(|mask| {
            let s: i32 = (0..k)
                .map(|a| {
                    let x = if mask >> a & 1 == 1 { 1 } else { -1 };
                    self.signs[a] as i32 * x
                })
                .sum();
            s * s >= 1
        })
    }
}

/// Result of a full triangle scan.
#[derive(Debug, Clone)]
pub struct TriangleScan {
    pub cuts: Vec<HypermetricCut>,
    /// Largest violation `1 - <bb', X>` over all triangles (may be negative).
    pub max_violation: f64,
}

const TRIANGLE_PATTERNS: [[i8; 3]; 4] = [[1, 1, 1], [1, 1, -1], [1, -1, 1], [1, -1, -1]];

/// Enumerates all `4 C(n,3)` triangle inequalities and returns up to
/// `limit` violated ones, most violated first.
pub fn separate_triangles(x: &Matrix, limit: usize) -> TriangleScan {
    let n = x.nrows();
    let mut found: Vec<(f64, [usize; 3], [i8; 3])> = Vec::new();
    let mut max_violation = f64::NEG_INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let (xij, xik, xjk) = (x[(i, j)], x[(i, k)], x[(j, k)]);
                let diag = x[(i, i)] + x[(j, j)] + x[(k, k)];
                for s in TRIANGLE_PATTERNS {
                    let off = (s[0] * s[1]) as f64 * xij + (s[0] * s[2]) as f64 * xik + (s[1] * s[2]) as f64 * xjk;
                    let v = 1.0 - (diag + 2.0 * off);
                    max_violation = max_violation.max(v);
                    if v > VIOLATION_THRESHOLD {
                        found.push((v, [i, j, k], s));
                    }
                }
            }
        }
    }
    found.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| (a.1, a.2).cmp(&(b.1, b.2))));
    found.truncate(limit);
    let cuts = found
        .into_iter()
        .map(|(v, idx, s)| HypermetricCut { support: idx.to_vec(), signs: s.to_vec(), violation: v })
        .collect();
    TriangleScan { cuts, max_violation }
}

#[derive(Debug, Clone)]
pub struct AnnealingParams {
    pub restarts: usize,
    /// Proposals per restart are `moves_per_vertex * n`.
    pub moves_per_vertex: usize,
    pub cooling: f64,
    /// Random placements sampled to set the initial temperature.
    pub temperature_samples: usize,
    pub seed: u64,
}

impl Default for AnnealingParams {
    fn default() -> Self {
        Self { restarts: 5, moves_per_vertex: 60, cooling: 0.95, temperature_samples: 100, seed: 0 }
    }
}

/// Sign patterns searched for a given order: all-plus, then one, two, ...
/// leading minus signs (patterns with more minuses are equivalent up to a
/// global flip).
pub fn sign_patterns(order: usize) -> Vec<Vec<i8>> {
    (0..=(order / 2)).map(|minus| (0..order).map(|a| if a < minus { -1 } else { 1 }).collect()).collect()
}

/// Heuristic separation of pentagonal (`order = 5`) or heptagonal
/// (`order = 7`) inequalities. Returns up to `count` distinct violated
/// cuts, most violated first.
pub fn separate_kgonal(x: &Matrix, order: usize, count: usize, params: &AnnealingParams) -> Vec<HypermetricCut> {
    let n = x.nrows();
    if count == 0 || n < order || !matches!(order, 5 | 7) {
        return Vec::new();
    }
    let mut found: BTreeMap<CutKey, f64> = BTreeMap::new();
    for (pi, pattern) in sign_patterns(order).iter().enumerate() {
        let seed = params.seed ^ ((order as u64) << 32) ^ (pi as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        anneal_pattern(x, pattern, params, &mut rng, &mut found);
    }
    let mut list: Vec<(CutKey, f64)> = found.into_iter().collect();
    list.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    list.truncate(count);
    list.into_iter()
        .map(|((support, signs), violation)| HypermetricCut { support, signs, violation })
        .collect()
}

fn placement_cost(x: &Matrix, pattern: &[i8], p: &[usize]) -> f64 {
    let mut v = 0.0;
    for (a, &i) in p.iter().enumerate() {
        for (b, &j) in p.iter().enumerate() {
            v += (pattern[a] * pattern[b]) as f64 * x[(i, j)];
        }
    }
    v
}

fn random_placement(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    rand::seq::index::sample(rng, n, k).into_vec()
}

fn record(found: &mut BTreeMap<CutKey, f64>, pattern: &[i8], p: &[usize], cost: f64) {
    let violation = 1.0 - cost;
    if violation <= VIOLATION_THRESHOLD {
        return;
    }
    let entries = p.iter().cloned().zip(pattern.iter().cloned()).collect();
    if let Ok(cut) = HypermetricCut::new(entries) {
        let slot = found.entry(cut.key()).or_insert(violation);
        *slot = slot.max(violation);
    }
}

fn anneal_pattern(
    x: &Matrix,
    pattern: &[i8],
    params: &AnnealingParams,
    rng: &mut ChaCha8Rng,
    found: &mut BTreeMap<CutKey, f64>,
) {
    let n = x.nrows();
    let k = pattern.len();
    let samples: Vec<f64> = (0..params.temperature_samples.max(2))
        .map(|_| placement_cost(x, pattern, &random_placement(n, k, rng)))
        .collect();
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (samples.len() as f64 - 1.0);
    let t0 = var.sqrt().max(1e-3);
    let moves = params.moves_per_vertex * n;

    for _ in 0..params.restarts {
        let mut p = random_placement(n, k, rng);
        let mut used = vec![false; n];
        for &i in &p {
            used[i] = true;
        }
        let mut cost = placement_cost(x, pattern, &p);
        record(found, pattern, &p, cost);
        if n == k {
            continue;
        }
        let mut temp = t0;
        for step in 0..moves {
            let a = rng.random_range(0..k);
            let u = loop {
                let u = rng.random_range(0..n);
                if !used[u] {
                    break u;
                }
            };
            let old = p[a];
            let mut cross = 0.0;
            for (b, &j) in p.iter().enumerate() {
                if b != a {
                    cross += pattern[b] as f64 * (x[(u, j)] - x[(old, j)]);
                }
            }
            let delta = 2.0 * pattern[a] as f64 * cross + x[(u, u)] - x[(old, old)];
            if delta < 0.0 || rng.random::<f64>() < (-delta / temp).exp() {
                p[a] = u;
                used[old] = false;
                used[u] = true;
                cost += delta;
                record(found, pattern, &p, cost);
            }
            if (step + 1) % n == 0 {
                temp *= params.cooling;
            }
        }
    }
}

/// Removes cuts whose multiplier fell below `threshold`; order is kept.
pub fn purge(
    cuts: Vec<HypermetricCut>,
    gamma: Vec<f64>,
    threshold: f64,
) -> Result<(Vec<HypermetricCut>, Vec<f64>), InstanceError> {
    if cuts.len() != gamma.len() {
        return Err(InstanceError::Dimension(format!("{} cuts but {} multipliers", cuts.len(), gamma.len())));
    }
    Ok(cuts.into_iter().zip(gamma).filter(|(_, g)| *g >= threshold).unzip())
}
