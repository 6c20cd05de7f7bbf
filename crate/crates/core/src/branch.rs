//! Best-first branch-and-bound for `MaxCutProblem`.
//!
//! Vertex 0 is the anchor and always sits at `+1`. A node fixes further
//! vertices to `±1`; fixing `v` to `s` identifies it with the anchor, so
//! its interactions move onto the anchor row and its self-interactions
//! into the offset.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use crate::bundle::{basic_bound, strengthen, BoundParams};
use crate::error::SolveError;
use crate::heuristic::{run_heuristic, RoundingConfig};
use crate::instance::{CutSolution, MaxCutProblem};
use crate::linalg::Matrix;
use crate::sdp::SdpOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchRule {
    /// Branch on the vertex whose fractional value is closest to 0.
    #[default]
    DifficultFirst,
    /// Branch on the vertex whose fractional value is furthest from 0.
    EasyFirst,
}

/// Index into `x_frac` chosen by the rule; ties go to the smallest index.
pub fn select_branch_var(x_frac: &[f64], rule: BranchRule) -> Result<usize, SolveError> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in x_frac.iter().map(|v| v.abs()).enumerate() {
        let better = match (best, rule) {
            (None, _) => true,
            (Some((_, b)), BranchRule::DifficultFirst) => v < b,
            (Some((_, b)), BranchRule::EasyFirst) => v > b,
        };
        if better {
            best = Some((i, v));
        }
    }
    best.map(|(i, _)| i).ok_or(SolveError::NoFreeVariable)
}

/// Node ids are unique per engine: the sequential engine uses rank 0, the
/// parallel one the rank of the creating worker.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct NodeId {
    pub rank: u32,
    pub seq: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BBNode {
    /// Fixed vertices of the root problem, sorted by index; the anchor is
    /// implicit.
    pub fixed: Vec<(usize, i8)>,
    pub sub: MaxCutProblem,
    /// Root index of each subproblem vertex; `vars[0] = 0`.
    pub vars: Vec<usize>,
    pub ub: f64,
    pub depth: u32,
    pub id: NodeId,
}

impl BBNode {
    pub fn root(problem: &MaxCutProblem) -> Self {
        Self {
            fixed: Vec::new(),
            sub: problem.clone(),
            vars: (0..problem.size()).collect(),
            ub: f64::INFINITY,
            depth: 0,
            id: NodeId::default(),
        }
    }

    /// Rebuilds a node from its fixed set by folding the fixes into the
    /// root problem in index order.
    pub fn from_fixed(
        root: &MaxCutProblem,
        mut fixed: Vec<(usize, i8)>,
        ub: f64,
        depth: u32,
        id: NodeId,
    ) -> Result<Self, SolveError> {
        let n = root.size();
        fixed.sort_unstable_by_key(|&(i, _)| i);
        let mut sign = vec![0i8; n];
        for &(i, s) in &fixed {
            if i == 0 || i >= n || (s != 1 && s != -1) || sign[i] != 0 {
                return Err(SolveError::Inconsistent(format!("bad fix ({i}, {s}) for size {n}")));
            }
            sign[i] = s;
        }
        let m = root.matrix();
        let vars: Vec<usize> = (0..n).filter(|&i| sign[i] == 0).collect();
        let k = vars.len();
        let mut sub = Matrix::from_fn(k, k, |a, b| m[(vars[a], vars[b])]);
        let mut offset = root.offset();
        for &(v, s) in &fixed {
            let s = s as f64;
            for (b, &j) in vars.iter().enumerate().skip(1) {
                sub[(0, b)] += s * m[(v, j)];
                sub[(b, 0)] += s * m[(v, j)];
            }
            offset += m[(v, v)] + 2.0 * s * m[(0, v)];
            for &(w, t) in &fixed {
                if w != v {
                    offset += s * t as f64 * m[(v, w)];
                }
            }
        }
        let sub = MaxCutProblem::new_unchecked(sub, offset, root.integral());
        Ok(Self { fixed, sub, vars, ub, depth, id })
    }

    /// Full-length vector for a subproblem point `y` (normalized so the
    /// anchor is `+1`).
    pub fn lift(&self, y: &[i8], n: usize) -> Vec<i8> {
        let flip = if y.first() == Some(&-1) { -1 } else { 1 };
        let mut x = vec![1i8; n];
        for (k, &v) in self.vars.iter().enumerate() {
            x[v] = y[k] * flip;
        }
        for &(v, s) in &self.fixed {
            x[v] = s;
        }
        x
    }
}

/// Children fixing root vertex `var` to `+1` and `-1`.
pub fn make_children(
    root: &MaxCutProblem,
    node: &BBNode,
    var: usize,
    ub: f64,
    ids: (NodeId, NodeId),
) -> Result<(BBNode, BBNode), SolveError> {
    if var == 0 || !node.vars.contains(&var) {
        return Err(SolveError::Inconsistent(format!("vertex {var} is not free")));
    }
    let child = |s: i8, id| {
        let mut fixed = node.fixed.clone();
        fixed.push((var, s));
        BBNode::from_fixed(root, fixed, ub, node.depth + 1, id)
    };
    Ok((child(1, ids.0)?, child(-1, ids.1)?))
}

#[derive(Debug, Clone)]
pub struct SolveParams {
    pub branching: BranchRule,
    pub bound: BoundParams,
    pub root_sdp_tol: f64,
    pub node_sdp_tol: f64,
    pub rounding: RoundingConfig,
    /// Skip the cutting-plane loop at nodes whose basic bound is far from
    /// the incumbent.
    pub use_diff: bool,
    /// Pruning margin for problems without integral objective.
    pub tol: f64,
    pub time_limit: Option<Duration>,
    pub max_nodes: Option<usize>,
    pub seed: u64,
    pub trace: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        Self {
            branching: BranchRule::default(),
            bound: BoundParams::default(),
            root_sdp_tol: 1e-7,
            node_sdp_tol: 1e-6,
            rounding: RoundingConfig::default(),
            use_diff: true,
            tol: 1e-6,
            time_limit: None,
            max_nodes: None,
            seed: 0,
            trace: false,
        }
    }
}

impl SolveParams {
    /// A node is pruned once `ub <= lb + prune_margin`.
    pub fn prune_margin(&self, integral: bool) -> f64 {
        if integral {
            1.0 - 1e-6
        } else {
            self.tol
        }
    }

    fn probe_slack(&self, integral: bool) -> f64 {
        if integral {
            1.0
        } else {
            self.tol
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeAction {
    Pruned,
    Branched,
    /// At most one free vertex; solved by enumeration.
    Leaf,
    /// Popped after the incumbent had already reached its stored bound.
    Discarded,
}

impl NodeAction {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeAction::Pruned => "pruned",
            NodeAction::Branched => "branched",
            NodeAction::Leaf => "leaf",
            NodeAction::Discarded => "discarded",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub basic_bound: f64,
    pub full_bound: Option<f64>,
    pub ub: f64,
    /// Best cut found at the node, in root coordinates.
    pub best: Option<CutSolution>,
    /// Root index to branch on when the node survives.
    pub branch_var: Option<usize>,
    pub action: NodeAction,
    pub round_bounds: Vec<f64>,
    /// Values of every cut produced by the heuristic at this node.
    pub heuristic_values: Vec<f64>,
}

/// Node processing shared by the sequential and parallel engines.
#[derive(Debug, Clone)]
pub struct NodeEvaluator<'a> {
    pub root: &'a MaxCutProblem,
    pub params: &'a SolveParams,
}

fn node_seed(seed: u64, id: NodeId) -> u64 {
    let mut z = seed ^ ((id.rank as u64) << 32 | id.seq as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl<'a> NodeEvaluator<'a> {
    pub fn new(root: &'a MaxCutProblem, params: &'a SolveParams) -> Self {
        Self { root, params }
    }

    pub fn margin(&self) -> f64 {
        self.params.prune_margin(self.root.integral())
    }

    fn exact(&self, node: &BBNode) -> Evaluation {
        let sub = &node.sub;
        let best = match sub.size() {
            0 => CutSolution { x: node.lift(&[], self.root.size()), value: sub.offset() },
            1 => {
                let x = node.lift(&[1], self.root.size());
                self.root.solution(x)
            }
            _ => {
                let a = self.root.solution(node.lift(&[1, 1], self.root.size()));
                let b = self.root.solution(node.lift(&[1, -1], self.root.size()));
                if b.value > a.value {
                    b
                } else {
                    a
                }
            }
        };
        Evaluation {
            basic_bound: best.value,
            full_bound: None,
            ub: best.value,
            heuristic_values: vec![best.value],
            best: Some(best),
            branch_var: None,
            action: NodeAction::Leaf,
            round_bounds: Vec::new(),
        }
    }

    fn heuristic(&self, node: &BBNode, x: &Matrix, salt: u64) -> CutSolution {
        let cfg = RoundingConfig { seed: node_seed(self.params.seed, node.id) ^ salt, ..self.params.rounding.clone() };
        let y = run_heuristic(x, &node.sub, &cfg);
        self.root.solution(node.lift(&y.x, self.root.size()))
    }

    /// Bounds the node against incumbent `lb`. `diff` is the root gap
    /// between basic and strengthened bounds; `None` forces the full bound.
    pub fn evaluate(&self, node: &BBNode, lb: f64, diff: Option<f64>) -> Evaluation {
        if node.sub.size() <= 2 {
            return self.exact(node);
        }
        let margin = self.margin();
        let tol = if node.depth == 0 { self.params.root_sdp_tol } else { self.params.node_sdp_tol };
        let sdp = SdpOptions::with_tol(tol);
        let basic = basic_bound(&node.sub, &sdp);
        let mut heuristic_values = Vec::new();
        let first = self.heuristic(node, &basic.x, 0);
        heuristic_values.push(first.value);
        let mut best = first;
        let mut lb = lb.max(best.value);
        let mut eval = Evaluation {
            basic_bound: basic.ub,
            full_bound: None,
            ub: basic.ub,
            best: None,
            branch_var: None,
            action: NodeAction::Pruned,
            round_bounds: vec![basic.ub],
            heuristic_values: Vec::new(),
        };
        let mut x_frac = basic.x_frac();
        if basic.ub > lb + margin {
            let probe = match diff {
                Some(d) if self.params.use_diff => basic.ub <= lb + d + self.params.probe_slack(node.sub.integral()),
                _ => true,
            };
            if probe {
                let bp = BoundParams { sdp, prune_target: Some(lb + margin), ..self.params.bound.clone() };
                let full = strengthen(&node.sub, &basic, &bp);
                let second = self.heuristic(node, &full.x_agg, 1);
                heuristic_values.push(second.value);
                if second.value > best.value {
                    best = second;
                }
                lb = lb.max(best.value);
                eval.full_bound = Some(full.ub);
                eval.ub = full.ub;
                eval.round_bounds = full.round_bounds;
                x_frac = full.x_frac;
            }
        }
        if eval.ub > lb + margin {
            let pos = select_branch_var(&x_frac[1..], self.params.branching).expect("size above 2") + 1;
            eval.branch_var = Some(node.vars[pos]);
            eval.action = NodeAction::Branched;
        }
        eval.best = Some(best);
        eval.heuristic_values = heuristic_values;
        eval
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    /// Time or node limit reached; `global_ub` bounds the optimum.
    Unproven,
}

#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub id: NodeId,
    pub depth: u32,
    /// Bound the node carried in the queue.
    pub stored_ub: f64,
    pub basic_bound: Option<f64>,
    pub full_bound: Option<f64>,
    pub lb: f64,
    pub action: NodeAction,
    pub round_bounds: Vec<f64>,
    pub heuristic_values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub opt_value: f64,
    pub x: Vec<i8>,
    pub nodes: usize,
    pub wall_seconds: f64,
    pub root_seconds: f64,
    /// Strengthened bound at the root.
    pub root_bound: f64,
    pub root_basic_bound: f64,
    /// Incumbent after processing the root.
    pub root_lb: f64,
    pub root_gap_percent: f64,
    pub diff: f64,
    pub status: SolveStatus,
    pub global_ub: f64,
    pub trace: Vec<TraceRecord>,
}

/// `(root_bound - lb) / |lb| * 100`.
pub fn gap_percent(root_bound: f64, lb: f64) -> f64 {
    let gap = (root_bound - lb).max(0.0);
    if gap == 0.0 {
        0.0
    } else {
        gap / lb.abs() * 100.0
    }
}

pub fn trace_csv(trace: &[TraceRecord]) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.16e}"));
    let mut out = String::from("id,depth,basic_bound,full_bound,lb,action\n");
    for r in trace {
        let _ = writeln!(
            out,
            "{}:{},{},{},{},{:.16e},{}",
            r.id.rank,
            r.id.seq,
            r.depth,
            opt(r.basic_bound),
            opt(r.full_bound),
            r.lb,
            r.action.as_str()
        );
    }
    out
}

/// Heap entry: worst (largest) bound first, then oldest id.
pub(crate) struct Queued(pub BBNode);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Queued {}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.ub.total_cmp(&other.0.ub).then_with(|| other.0.id.cmp(&self.0.id))
    }
}

/// Outcome of the root node, shared with the parallel coordinator.
#[derive(Debug, Clone)]
pub struct RootOutcome {
    pub eval: Evaluation,
    pub best: CutSolution,
    pub diff: f64,
    pub seconds: f64,
}

pub fn process_root(evaluator: &NodeEvaluator, node: &BBNode) -> RootOutcome {
    let start = Instant::now();
    let eval = evaluator.evaluate(node, f64::NEG_INFINITY, None);
    let best = eval.best.clone().expect("evaluation yields a cut");
    let diff = eval.full_bound.map_or(0.0, |f| (eval.basic_bound - f).max(0.0));
    RootOutcome { eval, best, diff, seconds: start.elapsed().as_secs_f64() }
}

/// Sequential best-first branch-and-bound.
pub fn solve(problem: &MaxCutProblem, params: &SolveParams) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let evaluator = NodeEvaluator::new(problem, params);
    let margin = evaluator.margin();
    let root = BBNode::root(problem);
    let root_out = process_root(&evaluator, &root);
    let mut best = root_out.best.clone();
    let mut trace = Vec::new();
    let record = |trace: &mut Vec<TraceRecord>, node: &BBNode, eval: Option<&Evaluation>, lb: f64| {
        if params.trace {
            trace.push(TraceRecord {
                id: node.id,
                depth: node.depth,
                stored_ub: node.ub,
                basic_bound: eval.map(|e| e.basic_bound),
                full_bound: eval.and_then(|e| e.full_bound),
                lb,
                action: eval.map_or(NodeAction::Discarded, |e| e.action),
                round_bounds: eval.map_or_else(Vec::new, |e| e.round_bounds.clone()),
                heuristic_values: eval.map_or_else(Vec::new, |e| e.heuristic_values.clone()),
            });
        }
    };
    record(&mut trace, &root, Some(&root_out.eval), best.value);

    let root_bound = root_out.eval.ub;
    let mut seq: u32 = 0;
    let mut nodes = 1usize;
    let mut heap = BinaryHeap::new();
    if let Some(var) = root_out.eval.branch_var {
        let ids = (NodeId { rank: 0, seq: seq + 1 }, NodeId { rank: 0, seq: seq + 2 });
        seq += 2;
        let (a, b) = make_children(problem, &root, var, root_bound, ids)?;
        heap.push(Queued(a));
        heap.push(Queued(b));
        nodes += 2;
    }
    let mut status = SolveStatus::Optimal;
    while let Some(Queued(node)) = heap.pop() {
        let over_time = params.time_limit.is_some_and(|t| start.elapsed() >= t);
        let over_nodes = params.max_nodes.is_some_and(|m| nodes >= m);
        if over_time || over_nodes {
            heap.push(Queued(node));
            status = SolveStatus::Unproven;
            break;
        }
        if node.ub <= best.value + margin {
            record(&mut trace, &node, None, best.value);
            continue;
        }
        let eval = evaluator.evaluate(&node, best.value, Some(root_out.diff));
        if let Some(cut) = &eval.best {
            if cut.value > best.value {
                best = cut.clone();
            }
        }
        record(&mut trace, &node, Some(&eval), best.value);
        if let Some(var) = eval.branch_var {
            if eval.ub > best.value + margin {
                let ids = (NodeId { rank: 0, seq: seq + 1 }, NodeId { rank: 0, seq: seq + 2 });
                seq += 2;
                let ub = eval.ub.min(node.ub);
                let (a, b) = make_children(problem, &node, var, ub, ids)?;
                heap.push(Queued(a));
                heap.push(Queued(b));
                nodes += 2;
            }
        }
    }
    let global_ub = match status {
        SolveStatus::Optimal => best.value,
        SolveStatus::Unproven => heap.iter().map(|q| q.0.ub).fold(best.value, f64::max),
    };
    Ok(SolveResult {
        opt_value: best.value,
        x: best.x,
        nodes,
        wall_seconds: start.elapsed().as_secs_f64(),
        root_seconds: root_out.seconds,
        root_bound,
        root_basic_bound: root_out.eval.basic_bound,
        root_lb: root_out.best.value,
        root_gap_percent: gap_percent(root_bound, root_out.best.value),
        diff: root_out.diff,
        status,
        global_ub,
        trace,
    })
}
