//! Coordinator-worker branch-and-bound. Rank 0 processes the root and
//! keeps the incumbent; workers each run a local best-first search and
//! hand surplus nodes to idle peers.

pub mod model;
pub mod protocol;
pub mod transport;
pub mod wire;

use std::sync::Mutex;
use std::time::{Duration, Instant};

use crate::branch::{
    gap_percent, make_children, process_root, BBNode, NodeEvaluator, NodeId, SolveParams, SolveResult, SolveStatus,
};
use crate::error::SolveError;
use crate::instance::MaxCutProblem;

pub use protocol::{CoordinatorCore, NodeOracle, NodeResult, WorkerCore, WorkerState, WorkerStats, COORDINATOR};
pub use transport::{channel_mesh, ChannelEndpoint, Duplex, Endpoint, StreamEndpoint};
pub use wire::{Message, NodeRecord};

#[cfg(unix)]
pub use transport::unix_mesh;

const POLL: Duration = Duration::from_millis(20);

/// Node processing with the same evaluator as the sequential engine.
#[derive(Debug, Clone)]
pub struct SearchOracle {
    params: SolveParams,
    problem: Option<MaxCutProblem>,
    diff: f64,
}

impl SearchOracle {
    pub fn new(params: SolveParams) -> Self {
        Self { params, problem: None, diff: 0.0 }
    }
}

impl NodeOracle for SearchOracle {
    fn init(&mut self, problem: MaxCutProblem, diff: f64) {
        self.problem = Some(problem);
        self.diff = diff;
    }

    fn process(&mut self, node: &NodeRecord, lb: f64) -> Result<NodeResult, SolveError> {
        let problem = self.problem.as_ref().ok_or_else(|| SolveError::Inconsistent("node before init".into()))?;
        let node = node.to_node(problem)?;
        let eval = NodeEvaluator::new(problem, &self.params).evaluate(&node, lb, Some(self.diff));
        Ok(NodeResult { best: eval.best, ub: eval.ub, branch_var: eval.branch_var })
    }

    fn margin(&self) -> f64 {
        self.params.prune_margin(self.problem.as_ref().is_some_and(|p| p.integral()))
    }
}

fn deliver<E: Endpoint>(ep: &E, out: protocol::Outbox) -> Result<(), SolveError> {
    for (to, msg) in out {
        ep.send(to, &msg)?;
    }
    Ok(())
}

/// Runs a worker until the finish message arrives.
pub fn run_worker<E: Endpoint, O: NodeOracle>(ep: &E, core: &mut WorkerCore<O>) -> Result<(), SolveError> {
    loop {
        match core.state {
            WorkerState::Done => return Ok(()),
            WorkerState::Ready => {
                while let Some((from, msg)) = ep.try_recv()? {
                    let out = core.handle(from, msg)?;
                    deliver(ep, out)?;
                }
                if core.state == WorkerState::Ready {
                    let out = core.step()?;
                    deliver(ep, out)?;
                }
            }
            _ => {
                let (from, msg) = ep.recv()?;
                let out = core.handle(from, msg)?;
                deliver(ep, out)?;
            }
        }
    }
}

fn broadcast_finish<E: Endpoint>(ep: &E, workers: usize) {
    for r in 1..=workers {
        let _ = ep.send(r, &Message::Finish);
    }
}

/// Processes the root on rank 0 and serves workers until every one is
/// idle, the time limit passes, or `failed` reports a worker error.
pub fn run_coordinator<E: Endpoint>(
    problem: &MaxCutProblem,
    params: &SolveParams,
    ep: &E,
    workers: usize,
    failed: &dyn Fn() -> Option<SolveError>,
) -> Result<SolveResult, SolveError> {
    let start = Instant::now();
    let evaluator = NodeEvaluator::new(problem, params);
    let root = BBNode::root(problem);
    let root_out = process_root(&evaluator, &root);
    let root_bound = root_out.eval.ub;
    let mut children = Vec::new();
    if let Some(var) = root_out.eval.branch_var {
        let ids = (NodeId { rank: 0, seq: 1 }, NodeId { rank: 0, seq: 2 });
        match make_children(problem, &root, var, root_bound, ids) {
            Ok((a, b)) => children = vec![NodeRecord::from_node(&a), NodeRecord::from_node(&b)],
            Err(e) => {
                broadcast_finish(ep, workers);
                return Err(e);
            }
        }
    }
    let mut core = CoordinatorCore::new(workers, &root_out.best, 1 + children.len());
    let mut status = SolveStatus::Optimal;
    let served = (|| -> Result<(), SolveError> {
        deliver(ep, core.start(problem, root_out.diff, children))?;
        while !core.finished {
            if let Some(e) = failed() {
                return Err(e);
            }
            let over_time = params.time_limit.is_some_and(|t| start.elapsed() >= t);
            let over_nodes = params.max_nodes.is_some_and(|m| core.nodes >= m);
            if over_time || over_nodes {
                status = SolveStatus::Unproven;
                return Ok(());
            }
            if let Some((from, msg)) = ep.recv_timeout(POLL)? {
                let out = core.handle(from, msg)?;
                deliver(ep, out)?;
            }
        }
        Ok(())
    })();
    if !core.finished {
        broadcast_finish(ep, workers);
    }
    served?;
    let global_ub = match status {
        SolveStatus::Optimal => core.best_lb,
        SolveStatus::Unproven => root_bound.max(core.best_lb),
    };
    Ok(SolveResult {
        opt_value: core.best_lb,
        x: core.best_solution,
        nodes: core.nodes,
        wall_seconds: start.elapsed().as_secs_f64(),
        root_seconds: root_out.seconds,
        root_bound,
        root_basic_bound: root_out.eval.basic_bound,
        root_lb: root_out.best.value,
        root_gap_percent: gap_percent(root_bound, root_out.best.value),
        diff: root_out.diff,
        status,
        global_ub,
        trace: Vec::new(),
    })
}

#[derive(Debug, Clone)]
pub struct ParallelOutcome {
    pub result: SolveResult,
    /// Indexed by rank minus one.
    pub workers: Vec<WorkerStats>,
}

/// Runs coordinator and workers on threads over the given endpoints;
/// `endpoints[0]` is the coordinator.
pub fn solve_over<E: Endpoint + Send>(
    problem: &MaxCutProblem,
    params: &SolveParams,
    endpoints: Vec<E>,
) -> Result<ParallelOutcome, SolveError> {
    let workers = endpoints.len().saturating_sub(1);
    if workers == 0 {
        return Err(SolveError::Config("at least one worker is required".into()));
    }
    let failure: Mutex<Option<SolveError>> = Mutex::new(None);
    let mut it = endpoints.into_iter();
    let coord_ep = it.next().expect("nonempty");
    std::thread::scope(|scope| {
        let handles: Vec<_> = it
            .map(|ep| {
                let failure = &failure;
                let oracle = SearchOracle::new(params.clone());
                scope.spawn(move || {
                    let mut core = WorkerCore::new(ep.rank(), oracle);
                    if let Err(e) = run_worker(&ep, &mut core) {
                        log::error!("worker {} failed: {e}", ep.rank());
                        failure.lock().expect("failure lock").get_or_insert(e);
                    }
                    core.stats
                })
            })
            .collect();
        let failed = || failure.lock().expect("failure lock").take();
        let result = run_coordinator(problem, params, &coord_ep, workers, &failed);
        let stats = handles.into_iter().map(|h| h.join().expect("worker thread panicked")).collect();
        if let Some(e) = failure.lock().expect("failure lock").take() {
            return Err(e);
        }
        Ok(ParallelOutcome { result: result?, workers: stats })
    })
}

/// Parallel solve over in-process channels with `workers` worker threads.
pub fn solve_parallel(
    problem: &MaxCutProblem,
    params: &SolveParams,
    workers: usize,
) -> Result<ParallelOutcome, SolveError> {
    if workers == 0 {
        return Err(SolveError::Config("at least one worker is required".into()));
    }
    solve_over(problem, params, channel_mesh(workers + 1))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branch::solve;
    use crate::instance::{brute_force_maxcut, maxcut_from_graph};
    use crate::linalg::Matrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(n: usize, seed: u64) -> MaxCutProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = Matrix::zeros(n, n);
        for i in 0..n {
            for j in (i + 1)..n {
                if rng.random_bool(0.6) {
                    w[(i, j)] = rng.random_range(-5..=10) as f64;
                    w[(j, i)] = w[(i, j)];
                }
            }
        }
        maxcut_from_graph(&w).unwrap()
    }

    #[test]
    fn parallel_matches_sequential_and_oracle() {
        let params = SolveParams::default();
        for seed in 0..3 {
            let p = random_graph(12, seed);
            let exact = brute_force_maxcut(&p).unwrap().value;
            let seq = solve(&p, &params).unwrap();
            for workers in [1, 3] {
                let par = solve_parallel(&p, &params, workers).unwrap();
                assert_eq!(par.result.status, SolveStatus::Optimal);
                assert!((par.result.opt_value - exact).abs() < 1e-6, "{} vs {exact}", par.result.opt_value);
                assert!((p.objective(&par.result.x) - exact).abs() < 1e-6);
                assert_eq!(par.result.root_bound, seq.root_bound);
                let balance: i64 = par.workers.iter().map(|s| s.balance()).sum();
                assert_eq!(balance, 0);
                assert!(par.workers.iter().all(|s| s.abandoned == 0));
                let created: usize = par.workers.iter().map(|s| s.created).sum();
                let root_children = if par.result.nodes > 1 { 2 } else { 0 };
                assert_eq!(par.result.nodes, 1 + root_children + created);
            }
        }
    }

    #[cfg(unix)]
    #[test]
    fn parallel_over_unix_sockets() {
        let p = random_graph(10, 42);
        let exact = brute_force_maxcut(&p).unwrap().value;
        let out = solve_over(&p, &SolveParams::default(), unix_mesh(3).unwrap()).unwrap();
        assert!((out.result.opt_value - exact).abs() < 1e-6);
    }

    #[test]
    fn zero_workers_is_a_config_error() {
        let p = random_graph(4, 1);
        assert!(matches!(solve_parallel(&p, &SolveParams::default(), 0), Err(SolveError::Config(_))));
        assert!(matches!(solve_over(&p, &SolveParams::default(), channel_mesh(1)), Err(SolveError::Config(_))));
    }

    #[test]
    fn time_limit_reports_unproven() {
        let p = random_graph(30, 5);
        let params = SolveParams { time_limit: Some(Duration::ZERO), ..SolveParams::default() };
        let out = solve_parallel(&p, &params, 2).unwrap();
        if out.result.nodes > 1 {
            assert_eq!(out.result.status, SolveStatus::Unproven);
            assert!(out.result.global_ub >= out.result.opt_value);
        }
    }
}
