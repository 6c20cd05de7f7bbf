//! Cutting-plane bound for `max x'Mx + offset` over the elliptope
//! intersected with hypermetric inequalities `A(X) <= e`.
//!
//! The cuts are dualized: for `gamma >= 0`
//!
//! ```text
//!   f(gamma) = e'gamma + max { <M - A'(gamma), X> : diag(X) = e, X psd }
//! ```
//!
//! is an upper bound, and `e - A(X_gamma)` is a subgradient. `f` is
//! minimized with a proximal bundle method whose master problem is solved
//! in its dual form over the unit simplex.

use std::collections::HashSet;

use crate::error::SdpError;
use crate::instance::MaxCutProblem;
use crate::linalg::{project_simplex, Matrix};
use crate::sdp::{solve_diag_sdp, SdpOptions};
use crate::separation::{separate_kgonal, separate_triangles, AnnealingParams, CutKey, HypermetricCut};

#[derive(Debug, Clone)]
pub struct DualEval {
    pub gamma: Vec<f64>,
    /// `e'gamma + <M - A'(gamma), X_gamma>`.
    pub f_value: f64,
    /// Certified upper bound on `f(gamma)`, and hence on the relaxation.
    pub certified: f64,
    pub x: Matrix,
    pub subgrad: Vec<f64>,
}

/// Evaluates the dual function at `gamma` with one interior-point solve.
/// Values exclude the problem offset.
pub fn eval_dual(c: &Matrix, cuts: &[HypermetricCut], gamma: &[f64], opts: &SdpOptions) -> Result<DualEval, SdpError> {
    if cuts.len() != gamma.len() {
        return Err(SdpError::Input(format!("{} cuts but {} multipliers", cuts.len(), gamma.len())));
    }
    if gamma.iter().any(|g| !(*g >= 0.0)) {
        return Err(SdpError::Input("multipliers must be nonnegative".into()));
    }
    let mut cost = c.clone();
    for (cut, &g) in cuts.iter().zip(gamma) {
        if g != 0.0 {
            cut.add_adjoint(&mut cost, -g);
        }
    }
    let sum: f64 = gamma.iter().sum();
    let sol = solve_diag_sdp(&cost, &[], opts).map_err(|e| match e {
        SdpError::NotConverged { iterations, dual_bound } => {
            SdpError::NotConverged { iterations, dual_bound: dual_bound + sum }
        }
        other => other,
    })?;
    let subgrad = cuts.iter().map(|cut| 1.0 - cut.apply(&sol.x)).collect();
    Ok(DualEval {
        gamma: gamma.to_vec(),
        f_value: sum + sol.value,
        certified: sum + sol.dual_bound,
        x: sol.x,
        subgrad,
    })
}

#[derive(Debug, Clone)]
pub struct BoundParams {
    pub sdp: SdpOptions,
    /// Maximum number of separation rounds.
    pub rounds: usize,
    /// Stop when a round improves the bound by less than this times `|bound|`.
    pub min_progress: f64,
    /// Triangle cuts added per round are `triangles_per_vertex * n`.
    pub triangles_per_vertex: usize,
    pub pentagons: usize,
    pub heptagons: usize,
    /// Largest cut order separated (3, 5 or 7).
    pub max_order: usize,
    /// Pentagons are searched once the largest normalized triangle
    /// violation falls below this value.
    pub triangle_threshold: f64,
    /// Heptagons are searched once the largest normalized pentagonal
    /// violation falls below this value.
    pub pentagon_threshold: f64,
    pub first_iterations: usize,
    pub iteration_step: usize,
    pub max_iterations: usize,
    pub bundle_cap: usize,
    pub serious_ratio: f64,
    pub purge_threshold: f64,
    /// The node is prunable once the bound drops to this value.
    pub prune_target: Option<f64>,
    pub annealing: AnnealingParams,
}

impl Default for BoundParams {
    fn default() -> Self {
        Self {
            sdp: SdpOptions::default(),
            rounds: 20,
            min_progress: 1e-3,
            triangles_per_vertex: 10,
            pentagons: 300,
            heptagons: 200,
            max_order: 7,
            triangle_threshold: 0.2,
            pentagon_threshold: 0.4,
            first_iterations: 3,
            iteration_step: 2,
            max_iterations: 15,
            bundle_cap: 30,
            serious_ratio: 0.1,
            purge_threshold: 1e-5,
            prune_target: None,
            annealing: AnnealingParams::default(),
        }
    }
}

/// Bound from the basic relaxation alone.
#[derive(Debug, Clone)]
pub struct BasicBound {
    /// Certified bound including the offset.
    pub ub: f64,
    /// Primal value `<M, X> + offset`.
    pub value: f64,
    pub x: Matrix,
}

impl BasicBound {
    pub fn x_frac(&self) -> Vec<f64> {
        self.x.row(0).iter().cloned().collect()
    }
}

#[derive(Debug, Clone)]
pub struct BoundResult {
    /// Certified bound including the offset.
    pub ub: f64,
    pub basic_bound: f64,
    pub x_agg: Matrix,
    /// Row of `x_agg` belonging to the anchor vertex 0.
    pub x_frac: Vec<f64>,
    /// The loop ended because of the prune target, either reached or
    /// forecast to be out of reach.
    pub stopped_early: bool,
    /// Bound after the basic solve and after each round; nonincreasing.
    pub round_bounds: Vec<f64>,
    pub cuts: Vec<HypermetricCut>,
    pub gamma: Vec<f64>,
}

/// Solves the basic relaxation. Solver failures degrade to the best
/// certified bound available.
pub fn basic_bound(problem: &MaxCutProblem, opts: &SdpOptions) -> BasicBound {
    let n = problem.size();
    let off = problem.offset();
    match solve_diag_sdp(problem.matrix(), &[], opts) {
        Ok(sol) => BasicBound { ub: off + sol.dual_bound, value: off + sol.value, x: sol.x },
        Err(e) => {
            log::warn!("basic relaxation: {e}");
            let crude = problem.matrix().iter().map(|v| v.abs()).sum::<f64>();
            let ub = match e {
                SdpError::NotConverged { dual_bound, .. } => dual_bound.min(crude),
                _ => crude,
            };
            let x = Matrix::identity(n, n);
            BasicBound { ub: off + ub, value: off + problem.matrix().trace(), x }
        }
    }
}

#[derive(Debug, Clone)]
struct Member {
    x: Matrix,
    cx: f64,
    /// `A(X)` for the current cut list.
    a: Vec<f64>,
}

impl Member {
    fn new(c: &Matrix, x: Matrix, cuts: &[HypermetricCut]) -> Self {
        let cx = crate::linalg::inner(c, &x);
        let a = cuts.iter().map(|cut| cut.apply(&x)).collect();
        Self { x, cx, a }
    }

    fn model(&self, gamma: &[f64]) -> f64 {
        self.cx + self.a.iter().zip(gamma).map(|(a, g)| g * (1.0 - a)).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Serious,
    Null,
    /// The model predicts no further decrease.
    Converged,
    Failed,
}

/// State of the bundle method at one node. Values exclude the offset.
#[derive(Debug, Clone)]
pub struct BoundState {
    pub cuts: Vec<HypermetricCut>,
    pub gamma_hat: Vec<f64>,
    members: Vec<Member>,
    pub lambda: Vec<f64>,
    pub t: f64,
    /// `f` at the prox center, from the primal matrix.
    pub f_hat: f64,
    /// Smallest certified value of `f` seen.
    pub best_certified: f64,
    x_center: Matrix,
    serious_streak: usize,
    null_streak: usize,
    pub failures: usize,
}

impl BoundState {
    pub fn new(c: &Matrix, x: Matrix, f_value: f64, certified: f64) -> Self {
        let member = Member::new(c, x.clone(), &[]);
        Self {
            cuts: Vec::new(),
            gamma_hat: Vec::new(),
            members: vec![member],
            lambda: vec![1.0],
            t: 1.0,
            f_hat: f_value,
            best_certified: certified,
            x_center: x,
            serious_streak: 0,
            null_streak: 0,
            failures: 0,
        }
    }

    pub fn bundle_len(&self) -> usize {
        self.members.len()
    }

    /// `sum lambda_i X_i` over the bundle.
    pub fn aggregate(&self) -> Matrix {
        let n = self.x_center.nrows();
        let mut agg = Matrix::zeros(n, n);
        for (m, &l) in self.members.iter().zip(&self.lambda) {
            if l > 0.0 {
                agg += &m.x * l;
            }
        }
        agg
    }

    pub fn center_matrix(&self) -> &Matrix {
        &self.x_center
    }

    fn refresh_members(&mut self) {
        for m in &mut self.members {
            m.a = self.cuts.iter().map(|cut| cut.apply(&m.x)).collect();
        }
    }

    /// Appends cuts with zero multipliers; `f` at the center is unchanged.
    pub fn add_cuts(&mut self, cuts: Vec<HypermetricCut>) {
        self.gamma_hat.extend(std::iter::repeat(0.0).take(cuts.len()));
        self.cuts.extend(cuts);
        self.refresh_members();
    }

    /// Drops cuts whose center multiplier is below `threshold`. If any of
    /// them carried a positive multiplier the center is re-evaluated.
    pub fn purge(&mut self, c: &Matrix, threshold: f64, opts: &SdpOptions) {
        let keep: Vec<bool> = self.gamma_hat.iter().map(|&g| g >= threshold).collect();
        if keep.iter().all(|&k| k) {
            return;
        }
        let moved = self.gamma_hat.iter().zip(&keep).any(|(&g, &k)| !k && g > 0.0);
        let cuts = std::mem::take(&mut self.cuts);
        let gamma = std::mem::take(&mut self.gamma_hat);
        let (cuts, gamma): (Vec<_>, Vec<_>) = cuts.into_iter().zip(gamma).zip(&keep).filter(|(_, &k)| k).map(|(p, _)| p).unzip();
        self.cuts = cuts;
        self.gamma_hat = gamma;
        self.refresh_members();
        if moved {
            match eval_dual(c, &self.cuts, &self.gamma_hat, opts) {
                Ok(ev) => {
                    self.best_certified = self.best_certified.min(ev.certified);
                    self.f_hat = ev.f_value;
                    self.x_center = ev.x.clone();
                    self.push_member(c, ev.x, usize::MAX);
                }
                Err(e) => {
                    log::debug!("re-evaluation after purge failed: {e}");
                    if let SdpError::NotConverged { dual_bound, .. } = e {
                        self.best_certified = self.best_certified.min(dual_bound);
                    }
                    self.failures += 1;
                }
            }
        }
    }

    fn push_member(&mut self, c: &Matrix, x: Matrix, cap: usize) {
        self.members.push(Member::new(c, x, &self.cuts));
        self.lambda.push(0.0);
        if self.members.len() <= cap {
            return;
        }
        let last = self.members.len() - 1;
        let members = std::mem::take(&mut self.members);
        let lambda = std::mem::take(&mut self.lambda);
        (self.members, self.lambda) = members
            .into_iter()
            .zip(lambda)
            .enumerate()
            .filter(|(i, (_, l))| *i == last || *l > 1e-10)
            .map(|(_, p)| p)
            .unzip();
        if self.members.len() > cap {
            // fold everything except the newest member into its aggregate
            let newest = self.members.pop().expect("bundle is nonempty");
            let newest_l = self.lambda.pop().unwrap_or(0.0);
            let total: f64 = self.lambda.iter().sum();
            let n = newest.x.nrows();
            let mut x = Matrix::zeros(n, n);
            let k = self.members.len() as f64;
            for (m, &l) in self.members.iter().zip(&self.lambda) {
                let w = if total > 0.0 { l / total } else { 1.0 / k };
                x += &m.x * w;
            }
            self.members = vec![Member::new(c, x, &self.cuts), newest];
            self.lambda = vec![total, newest_l];
        }
    }

    /// One proximal bundle iteration.
    pub fn step(&mut self, c: &Matrix, params: &BoundParams) -> StepKind {
        if self.cuts.is_empty() {
            return StepKind::Converged;
        }
        let Some((lambda, gamma)) = self.solve_master() else {
            self.t = (self.t * 0.5).max(1e-4);
            self.failures += 1;
            return StepKind::Failed;
        };
        self.lambda = lambda;
        let model = self.members.iter().map(|m| m.model(&gamma)).fold(f64::NEG_INFINITY, f64::max);
        let predicted = self.f_hat - model;
        if predicted <= 1e-9 * (1.0 + self.f_hat.abs()) {
            return StepKind::Converged;
        }
        let ev = match eval_dual(c, &self.cuts, &gamma, &params.sdp) {
            Ok(ev) => ev,
            Err(e) => {
                log::debug!("dual evaluation failed: {e}");
                if let SdpError::NotConverged { dual_bound, .. } = e {
                    self.best_certified = self.best_certified.min(dual_bound);
                }
                self.t = (self.t * 0.5).max(1e-4);
                self.failures += 1;
                return StepKind::Failed;
            }
        };
        self.best_certified = self.best_certified.min(ev.certified);
        let kind = if self.f_hat - ev.f_value >= params.serious_ratio * predicted {
            self.gamma_hat = gamma;
            self.f_hat = ev.f_value;
            self.x_center = ev.x.clone();
            self.null_streak = 0;
            self.serious_streak += 1;
            if self.serious_streak >= 2 {
                self.t = (self.t * 2.0).min(1e4);
                self.serious_streak = 0;
            }
            StepKind::Serious
        } else {
            self.serious_streak = 0;
            self.null_streak += 1;
            if self.null_streak >= 5 {
                self.t = (self.t * 0.5).max(1e-4);
                self.null_streak = 0;
            }
            StepKind::Null
        };
        self.push_member(c, ev.x, params.bundle_cap);
        kind
    }

    /// Maximizes the concave dual of the master problem
    ///
    /// ```text
    ///   phi(l) = min_{g >= 0} sum_i l_i (cx_i + g'(e - a_i)) + |g - g_hat|^2 / 2t
    /// ```
    ///
    /// over the simplex by accelerated projected gradient. The inner
    /// minimizer is `max(0, g_hat - t G l)`.
    fn solve_master(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        let k = self.members.len();
        let p = self.cuts.len();
        let t = self.t;
        let g: Vec<Vec<f64>> = self.members.iter().map(|m| m.a.iter().map(|a| 1.0 - a).collect()).collect();
        let cx: Vec<f64> = self.members.iter().map(|m| m.cx).collect();
        let norm2: f64 = g.iter().flatten().map(|v| v * v).sum();
        let gamma_of = |l: &[f64]| -> Vec<f64> {
            (0..p)
                .map(|r| {
                    let s: f64 = (0..k).map(|i| l[i] * g[i][r]).sum();
                    (self.gamma_hat[r] - t * s).max(0.0)
                })
                .collect()
        };
        let primal = |gam: &[f64]| -> f64 {
            let model = (0..k)
                .map(|i| cx[i] + g[i].iter().zip(gam).map(|(a, b)| a * b).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            let prox: f64 = gam.iter().zip(&self.gamma_hat).map(|(a, b)| (a - b).powi(2)).sum();
            model + prox / (2.0 * t)
        };
        let dual = |l: &[f64], gam: &[f64]| -> f64 {
            let lin: f64 = (0..k).map(|i| l[i] * (cx[i] + g[i].iter().zip(gam).map(|(a, b)| a * b).sum::<f64>())).sum();
            let prox: f64 = gam.iter().zip(&self.gamma_hat).map(|(a, b)| (a - b).powi(2)).sum();
            lin + prox / (2.0 * t)
        };

        let mut lambda = self.lambda.clone();
        lambda.resize(k, 0.0);
        project_simplex(&mut lambda);
        if norm2 == 0.0 {
            let best = (0..k).max_by(|&a, &b| cx[a].total_cmp(&cx[b]))?;
            let mut l = vec![0.0; k];
            l[best] = 1.0;
            return Some((l, self.gamma_hat.clone()));
        }
        let step = 1.0 / (t * norm2);
        let mut y = lambda.clone();
        let mut theta = 1.0_f64;
        let mut best_gamma = gamma_of(&lambda);
        let mut best_primal = primal(&best_gamma);
        let mut best_lambda = lambda.clone();
        for _ in 0..500 {
            let gam_y = gamma_of(&y);
            let mut next: Vec<f64> = (0..k)
                .map(|i| y[i] + step * (cx[i] + g[i].iter().zip(&gam_y).map(|(a, b)| a * b).sum::<f64>()))
                .collect();
            project_simplex(&mut next);
            if next.iter().any(|v| !v.is_finite()) {
                return None;
            }
            let theta_next = 0.5 * (1.0 + (1.0 + 4.0 * theta * theta).sqrt());
            let mom = (theta - 1.0) / theta_next;
            y = (0..k).map(|i| next[i] + mom * (next[i] - lambda[i])).collect();
            lambda = next;
            theta = theta_next;

            let gam = gamma_of(&lambda);
            let pv = primal(&gam);
            let dv = dual(&lambda, &gam);
            if pv < best_primal {
                best_primal = pv;
                best_gamma = gam;
                best_lambda = lambda.clone();
            }
            if best_primal - dv <= 1e-10 * (1.0 + best_primal.abs()) {
                break;
            }
        }
        Some((best_lambda, best_gamma))
    }
}

fn forecast_slope(bounds: &[f64]) -> Option<f64> {
    let n = bounds.len();
    if n < 3 {
        return None;
    }
    // least-squares slope through three equally spaced points
    Some((bounds[n - 1] - bounds[n - 3]) / 2.0)
}

/// Runs the cutting-plane loop starting from a solved basic relaxation.
pub fn strengthen(problem: &MaxCutProblem, basic: &BasicBound, params: &BoundParams) -> BoundResult {
    let c = problem.matrix();
    let off = problem.offset();
    let n = problem.size();
    let mut result = BoundResult {
        ub: basic.ub,
        basic_bound: basic.ub,
        x_agg: basic.x.clone(),
        x_frac: basic.x_frac(),
        stopped_early: false,
        round_bounds: vec![basic.ub],
        cuts: Vec::new(),
        gamma: Vec::new(),
    };
    if let Some(target) = params.prune_target {
        if basic.ub <= target {
            result.stopped_early = true;
            return result;
        }
    }
    if n < 3 || params.rounds == 0 {
        return result;
    }

    let mut state = BoundState::new(c, basic.x.clone(), basic.value - off, basic.ub - off);
    let mut keys: HashSet<CutKey> = HashSet::new();
    let mut best = basic.ub;
    for round in 0..params.rounds {
        let x_sep = state.aggregate();
        let mut fresh = Vec::new();
        let scan = separate_triangles(&x_sep, params.triangles_per_vertex * n);
        fresh.extend(scan.cuts);
        if params.max_order >= 5 && scan.max_violation / 2.0 < params.triangle_threshold {
            let mut sa = params.annealing.clone();
            sa.seed = sa.seed.wrapping_add(round as u64);
            let pent = separate_kgonal(&x_sep, 5, params.pentagons, &sa);
            let r_pent = pent.first().map_or(0.0, |c| c.violation / 4.0);
            fresh.extend(pent);
            if params.max_order >= 7 && r_pent < params.pentagon_threshold {
                fresh.extend(separate_kgonal(&x_sep, 7, params.heptagons, &sa));
            }
        }
        fresh.retain(|cut| keys.insert(cut.key()));
        if fresh.is_empty() && state.cuts.is_empty() {
            break;
        }
        state.add_cuts(fresh);

        let iterations = (params.first_iterations + params.iteration_step * round).min(params.max_iterations);
        let mut moved = false;
        for _ in 0..iterations {
            match state.step(c, params) {
                StepKind::Converged => break,
                StepKind::Serious => moved = true,
                _ => {}
            }
            if state.failures >= 5 {
                break;
            }
        }
        let before: HashSet<CutKey> = state.cuts.iter().map(|c| c.key()).collect();
        state.purge(c, params.purge_threshold, &params.sdp);
        for cut in &state.cuts {
            debug_assert!(before.contains(&cut.key()));
        }
        keys = state.cuts.iter().map(|c| c.key()).collect();

        let previous = best;
        best = best.min(off + state.best_certified);
        result.round_bounds.push(best);
        if state.failures >= 5 {
            log::warn!("bundle aborted after repeated solver failures");
            break;
        }
        if let Some(target) = params.prune_target {
            if best <= target {
                result.stopped_early = true;
                break;
            }
            if let Some(slope) = forecast_slope(&result.round_bounds) {
                let remaining = (params.rounds - round - 1) as f64;
                if best + slope * remaining > target {
                    result.stopped_early = true;
                    break;
                }
            }
        }
        // a round of null steps only refined the model; it says nothing
        // about whether the cuts still pay off
        if moved && previous - best < params.min_progress * best.abs().max(1.0) {
            // stalled above the target: a flat forecast cannot reach it
            result.stopped_early = params.prune_target.is_some();
            break;
        }
    }
    result.ub = best;
    if !state.cuts.is_empty() {
        result.x_agg = state.aggregate();
        result.x_frac = result.x_agg.row(0).iter().cloned().collect();
    }
    result.cuts = state.cuts;
    result.gamma = state.gamma_hat;
    result
}

/// Basic relaxation followed by the cutting-plane loop.
pub fn compute_upper_bound(problem: &MaxCutProblem, params: &BoundParams) -> BoundResult {
    let basic = basic_bound(problem, &params.sdp);
    strengthen(problem, &basic, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{brute_force_maxcut, maxcut_from_graph};

    fn graph(n: usize, edges: &[(usize, usize, f64)]) -> MaxCutProblem {
        let mut w = Matrix::zeros(n, n);
        for &(i, j, v) in edges {
            w[(i, j)] = v;
            w[(j, i)] = v;
        }
        maxcut_from_graph(&w).unwrap()
    }

    fn k3() -> MaxCutProblem {
        graph(3, &[(0, 1, 1.), (0, 2, 1.), (1, 2, 1.)])
    }

    fn c5() -> MaxCutProblem {
        graph(5, &[(0, 1, 1.), (1, 2, 1.), (2, 3, 1.), (3, 4, 1.), (4, 0, 1.)])
    }

    #[test]
    fn dual_at_zero_is_basic_value() {
        let p = k3();
        let ev = eval_dual(p.matrix(), &[], &[], &SdpOptions::default()).unwrap();
        assert!((ev.f_value - 2.25).abs() < 1e-6);
        assert!(ev.certified >= 2.25 - 1e-9);
    }

    #[test]
    fn dual_with_triangle_multiplier_bounds_k3() {
        let p = k3();
        let cut = HypermetricCut::new(vec![(0, 1), (1, 1), (2, 1)]).unwrap();
        for g in [0.0, 0.25, 0.5, 1.0, 3.0] {
            let ev = eval_dual(p.matrix(), &[cut.clone()], &[g], &SdpOptions::default()).unwrap();
            assert!(ev.certified >= 2.0 - 1e-7, "gamma {g}: {}", ev.certified);
            let direct = g + crate::linalg::inner(p.matrix(), &ev.x) - g * cut.apply(&ev.x);
            assert!((direct - ev.f_value).abs() < 1e-7);
        }
        assert!(eval_dual(p.matrix(), &[cut], &[-1.0], &SdpOptions::default()).is_err());
    }

    #[test]
    fn k3_strengthened_bound() {
        let res = compute_upper_bound(&k3(), &BoundParams::default());
        assert!((res.basic_bound - 2.25).abs() < 1e-5);
        assert!((res.ub - 2.0).abs() < 1e-3, "{}", res.ub);
        assert!(res.ub >= 2.0 - 1e-9);
    }

    #[test]
    fn k3_bundle_descends() {
        let p = k3();
        let basic = basic_bound(&p, &SdpOptions::default());
        let c = p.matrix();
        let mut state = BoundState::new(c, basic.x.clone(), basic.value, basic.ub);
        state.add_cuts(vec![HypermetricCut::new(vec![(0, 1), (1, 1), (2, 1)]).unwrap()]);
        let params = BoundParams::default();
        let mut last = state.f_hat;
        for _ in 0..30 {
            let kind = state.step(c, &params);
            if kind == StepKind::Serious {
                assert!(state.f_hat <= last + 1e-12);
                last = state.f_hat;
            }
            if kind == StepKind::Converged {
                break;
            }
        }
        assert!((state.best_certified - 2.0).abs() < 1e-3, "{}", state.best_certified);
    }

    #[test]
    fn c5_with_triangles() {
        let params = BoundParams { max_order: 3, ..Default::default() };
        let res = compute_upper_bound(&c5(), &params);
        assert!((res.basic_bound - (25.0 + 5.0 * 5f64.sqrt()) / 8.0).abs() < 1e-5);
        assert!(res.ub <= 4.0 + 1e-2, "{}", res.ub);
        assert!(res.ub >= 4.0 - 1e-9);
    }

    #[test]
    fn empty_cut_list_keeps_basic_value() {
        let p = graph(4, &[]);
        let res = compute_upper_bound(&p, &BoundParams::default());
        assert!(res.ub.abs() < 1e-6);
        assert!(res.cuts.is_empty());
        let mut state = BoundState::new(p.matrix(), Matrix::identity(4, 4), 0.0, 0.0);
        assert_eq!(state.step(p.matrix(), &BoundParams::default()), StepKind::Converged);
    }

    #[test]
    fn prune_target_stops_early() {
        let p = c5();
        let reached = BoundParams { prune_target: Some(10.0), ..Default::default() };
        let res = compute_upper_bound(&p, &reached);
        assert!(res.stopped_early);
        assert_eq!(res.round_bounds.len(), 1);
        let unreachable = BoundParams { prune_target: Some(5.0 * p.max_abs()), ..Default::default() };
        let res = compute_upper_bound(&p, &unreachable);
        assert!(res.stopped_early);
        assert!(res.round_bounds.len() <= 3);
    }

    #[test]
    fn bounds_are_valid_and_monotone() {
        let mut seed = 11u64;
        for n in [6, 8, 10] {
            let mut w = Matrix::zeros(n, n);
            for i in 0..n {
                for j in (i + 1)..n {
                    seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    let v = ((seed >> 33) % 21) as f64 - 10.0;
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            let p = maxcut_from_graph(&w).unwrap();
            let opt = brute_force_maxcut(&p).unwrap().value;
            let res = compute_upper_bound(&p, &BoundParams::default());
            assert!(res.ub >= opt - 1e-6, "n={n}: {} < {opt}", res.ub);
            assert!(res.ub <= res.basic_bound + 1e-8);
            for w in res.round_bounds.windows(2) {
                assert!(w[1] <= w[0] + 1e-8);
            }
            let again = eval_dual(p.matrix(), &res.cuts, &res.gamma, &SdpOptions::default()).unwrap();
            assert!(again.certified + p.offset() >= opt - 1e-6);
            let diag_err = (0..n).map(|i| (res.x_agg[(i, i)] - 1.0).abs()).fold(0.0, f64::max);
            assert!(diag_err < 1e-7);
        }
    }
}
