//! Coordinator and worker as event-driven state machines. They consume
//! messages and return the messages to send, so the same logic runs over
//! real transports and under the exhaustive scheduler in the tests.

use std::collections::BinaryHeap;
use std::hash::{Hash, Hasher};

use crate::branch::NodeId;
use crate::error::{ProtocolError, SolveError};
use crate::instance::{CutSolution, MaxCutProblem};

use super::wire::{Message, NodeRecord};

pub const COORDINATOR: usize = 0;

pub type Outbox = Vec<(usize, Message)>;

fn unexpected(msg: &Message, state: impl std::fmt::Debug) -> ProtocolError {
    ProtocolError::Unexpected { got: msg.name().into(), state: format!("{state:?}") }
}

/// Coordinator bookkeeping: which workers are busy, the incumbent, and the
/// node count.
#[derive(Debug, Clone)]
pub struct CoordinatorCore {
    busy: Vec<bool>,
    pub best_lb: f64,
    pub best_solution: Vec<i8>,
    pub nodes: usize,
    pub finished: bool,
}

impl CoordinatorCore {
    /// `nodes` counts what the coordinator created before distributing.
    pub fn new(workers: usize, best: &CutSolution, nodes: usize) -> Self {
        Self { busy: vec![false; workers], best_lb: best.value, best_solution: best.x.clone(), nodes, finished: false }
    }

    pub fn workers(&self) -> usize {
        self.busy.len()
    }

    pub fn busy(&self, rank: usize) -> bool {
        self.busy[rank - 1]
    }

    fn broadcast(&self, msg: &Message) -> Outbox {
        (1..=self.workers()).map(|r| (r, msg.clone())).collect()
    }

    fn finish(&mut self) -> Outbox {
        self.finished = true;
        self.broadcast(&Message::Finish)
    }

    /// Broadcasts the problem and hands the root's children to workers in
    /// rank order. Without children the run ends at once.
    pub fn start(&mut self, problem: &MaxCutProblem, diff: f64, children: Vec<NodeRecord>) -> Outbox {
        if children.is_empty() {
            return self.finish();
        }
        let mut out = self.broadcast(&Message::Init { problem: problem.clone(), lb: self.best_lb, diff });
        for (k, child) in children.into_iter().enumerate() {
            let rank = 1 + k % self.workers();
            self.busy[rank - 1] = true;
            out.push((rank, Message::Subproblem(child)));
        }
        out
    }

    fn check_rank(&self, from: usize, rank: u32) -> Result<(), ProtocolError> {
        if rank as usize != from || from == COORDINATOR || from > self.workers() {
            return Err(ProtocolError::Malformed(format!("rank {rank} sent by {from}")));
        }
        Ok(())
    }

    pub fn handle(&mut self, from: usize, msg: Message) -> Result<Outbox, ProtocolError> {
        if self.finished {
            return Ok(Vec::new());
        }
        match msg {
            Message::Idle { rank } => {
                self.check_rank(from, rank)?;
                self.busy[from - 1] = false;
                if self.busy.iter().all(|b| !b) {
                    return Ok(self.finish());
                }
                Ok(Vec::new())
            }
            Message::NewValue { lb, solution } => {
                if lb > self.best_lb {
                    self.best_lb = lb;
                    self.best_solution = solution;
                }
                Ok(vec![(from, Message::NewValue { lb: self.best_lb, solution: self.best_solution.clone() })])
            }
            Message::SendWorkers { rank, count } => {
                self.check_rank(from, rank)?;
                self.nodes += 2;
                let mut ranks = Vec::new();
                for r in 1..=self.workers() {
                    if ranks.len() >= count as usize {
                        break;
                    }
                    if r != from && !self.busy[r - 1] {
                        self.busy[r - 1] = true;
                        ranks.push(r as u32);
                    }
                }
                Ok(vec![(from, Message::WorkerList { ranks, lb: self.best_lb })])
            }
            other => Err(unexpected(&other, "coordinator")),
        }
    }

    pub fn fingerprint<H: Hasher>(&self, h: &mut H) {
        self.busy.hash(h);
        self.best_lb.to_bits().hash(h);
        self.best_solution.hash(h);
        self.nodes.hash(h);
        self.finished.hash(h);
    }
}

/// What processing a node produced.
#[derive(Debug, Clone)]
pub struct NodeResult {
    /// Best cut found, in root coordinates.
    pub best: Option<CutSolution>,
    pub ub: f64,
    /// Root index to branch on.
    pub branch_var: Option<usize>,
}

/// Node processing as seen by a worker.
pub trait NodeOracle {
    fn init(&mut self, problem: MaxCutProblem, diff: f64);
    fn process(&mut self, node: &NodeRecord, lb: f64) -> Result<NodeResult, SolveError>;
    fn margin(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum WorkerState {
    AwaitInit,
    /// Queue empty; waiting for a subproblem or the finish message.
    Idle,
    /// Has queued nodes to process.
    Ready,
    AwaitValue,
    AwaitList,
    Done,
}

/// Per-worker counters for the work-conservation audit.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct WorkerStats {
    pub received: usize,
    pub created: usize,
    pub shipped: usize,
    pub processed: usize,
    /// Left in the queue when the finish message arrived.
    pub abandoned: usize,
}

impl WorkerStats {
    /// `received + created - shipped - processed - abandoned`; zero when no
    /// node was lost.
    pub fn balance(&self) -> i64 {
        self.received as i64 + self.created as i64 - self.shipped as i64 - self.processed as i64 - self.abandoned as i64
    }
}

#[derive(Debug, Clone)]
struct Queued(NodeRecord);

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.ub.total_cmp(&other.0.ub).then_with(|| other.0.id.cmp(&self.0.id))
    }
}

#[derive(Debug, Clone)]
pub struct WorkerCore<O> {
    pub rank: usize,
    pub state: WorkerState,
    queue: BinaryHeap<Queued>,
    pub lb: f64,
    seq: u32,
    /// Children were created by the node that triggered the pending
    /// new-value exchange.
    branched: bool,
    pub stats: WorkerStats,
    pub oracle: O,
}

impl<O: NodeOracle> WorkerCore<O> {
    pub fn new(rank: usize, oracle: O) -> Self {
        Self {
            rank,
            state: WorkerState::AwaitInit,
            queue: BinaryHeap::new(),
            lb: f64::NEG_INFINITY,
            seq: 0,
            branched: false,
            stats: WorkerStats::default(),
            oracle,
        }
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    fn next_id(&mut self) -> NodeId {
        self.seq += 1;
        NodeId { rank: self.rank as u32, seq: self.seq }
    }

    fn after_node(&mut self) -> Outbox {
        if self.branched {
            self.branched = false;
            self.state = WorkerState::AwaitList;
            let count = self.queue.len().saturating_sub(1) as u32;
            return vec![(COORDINATOR, Message::SendWorkers { rank: self.rank as u32, count })];
        }
        self.settle()
    }

    fn settle(&mut self) -> Outbox {
        if self.queue.is_empty() {
            self.state = WorkerState::Idle;
            vec![(COORDINATOR, Message::Idle { rank: self.rank as u32 })]
        } else {
            self.state = WorkerState::Ready;
            Vec::new()
        }
    }

    /// Processes the worst-bound queued node. Only valid in `Ready`.
    pub fn step(&mut self) -> Result<Outbox, SolveError> {
        if self.state != WorkerState::Ready {
            return Err(SolveError::Inconsistent(format!("step in state {:?}", self.state)));
        }
        let Some(Queued(node)) = self.queue.pop() else {
            return Ok(self.settle());
        };
        self.stats.processed += 1;
        let margin = self.oracle.margin();
        if node.ub <= self.lb + margin {
            return Ok(self.settle());
        }
        let res = self.oracle.process(&node, self.lb)?;
        let mut out = Vec::new();
        let mut improved = false;
        if let Some(best) = res.best {
            if best.value > self.lb {
                self.lb = best.value;
                improved = true;
                out.push((COORDINATOR, Message::NewValue { lb: best.value, solution: best.x }));
            }
        }
        if let Some(var) = res.branch_var {
            if res.ub > self.lb + margin {
                let ub = res.ub.min(node.ub);
                for s in [1i8, -1] {
                    let mut fixed = node.fixed.clone();
                    fixed.push((var as u32, s));
                    let id = self.next_id();
                    self.queue.push(Queued(NodeRecord { fixed, ub, depth: node.depth + 1, id }));
                }
                self.stats.created += 2;
                self.branched = true;
            }
        }
        if improved {
            self.state = WorkerState::AwaitValue;
            return Ok(out);
        }
        Ok(self.after_node())
    }

    pub fn handle(&mut self, from: usize, msg: Message) -> Result<Outbox, SolveError> {
        use WorkerState::*;
        match (self.state, msg) {
            (Done, _) => Ok(Vec::new()),
            (_, Message::Finish) => {
                self.stats.abandoned += self.queue.len();
                self.queue.clear();
                self.state = Done;
                Ok(Vec::new())
            }
            (AwaitInit, Message::Init { problem, lb, diff }) => {
                if from != COORDINATOR {
                    return Err(ProtocolError::Malformed(format!("init from {from}")).into());
                }
                self.oracle.init(problem, diff);
                self.lb = self.lb.max(lb);
                self.state = if self.queue.is_empty() { Idle } else { Ready };
                Ok(Vec::new())
            }
            (state, Message::Subproblem(rec)) => {
                self.stats.received += 1;
                self.queue.push(Queued(rec));
                if state == Idle {
                    self.state = Ready;
                }
                Ok(Vec::new())
            }
            (AwaitValue, Message::NewValue { lb, .. }) => {
                self.lb = self.lb.max(lb);
                Ok(self.after_node())
            }
            (AwaitList, Message::WorkerList { ranks, lb }) => {
                self.lb = self.lb.max(lb);
                let mut out = Vec::new();
                for r in ranks {
                    let Some(Queued(node)) = self.queue.pop() else {
                        return Err(ProtocolError::Malformed(format!("no node left for rank {r}")).into());
                    };
                    self.stats.shipped += 1;
                    out.push((r as usize, Message::Subproblem(node)));
                }
                out.extend(self.settle());
                Ok(out)
            }
            (state, msg) => Err(unexpected(&msg, state).into()),
        }
    }

    pub fn fingerprint<H: Hasher>(&self, h: &mut H) {
        self.state.hash(h);
        let mut q: Vec<_> = self.queue.iter().map(|q| (q.0.id, q.0.fixed.clone(), q.0.ub.to_bits())).collect();
        q.sort();
        q.hash(h);
        self.lb.to_bits().hash(h);
        self.seq.hash(h);
        self.branched.hash(h);
        self.stats.hash(h);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::parallel::model::SyntheticTree;

    #[test]
    fn coordinator_keeps_the_best_value() {
        let best = CutSolution { x: vec![1, 1], value: 0.0 };
        let mut c = CoordinatorCore::new(2, &best, 1);
        let r1 = c.handle(1, Message::NewValue { lb: 5.0, solution: vec![1, -1] }).unwrap();
        let r2 = c.handle(2, Message::NewValue { lb: 7.0, solution: vec![1, 1] }).unwrap();
        let r3 = c.handle(1, Message::NewValue { lb: 5.0, solution: vec![1, -1] }).unwrap();
        assert_eq!(r1[0].1, Message::NewValue { lb: 5.0, solution: vec![1, -1] });
        assert_eq!(r2[0].1, Message::NewValue { lb: 7.0, solution: vec![1, 1] });
        assert_eq!(r3[0].1, Message::NewValue { lb: 7.0, solution: vec![1, 1] });
        assert_eq!(c.best_lb, 7.0);
    }

    #[test]
    fn worker_edge_cases() {
        let oracle = SyntheticTree::new(vec![0.0; 8]);
        let mut w = WorkerCore::new(1, oracle.clone());
        assert!(w.handle(0, Message::Finish).unwrap().is_empty());
        assert_eq!(w.state, WorkerState::Done);

        let mut w = WorkerCore::new(1, oracle);
        let problem = MaxCutProblem::new(Matrix::zeros(4, 4), 0.0, true).unwrap();
        w.handle(0, Message::Init { problem, lb: -1.0, diff: 0.0 }).unwrap();
        let rec = NodeRecord { fixed: vec![(1, 1)], ub: 10.0, depth: 1, id: NodeId::default() };
        w.handle(0, Message::Subproblem(rec)).unwrap();
        let out = w.step().unwrap();
        assert!(matches!(out[0].1, Message::NewValue { .. }));
        w.handle(0, Message::NewValue { lb: 0.0, solution: vec![] }).unwrap();
        assert_eq!(w.state, WorkerState::AwaitList);
        let out = w.handle(0, Message::WorkerList { ranks: vec![], lb: 0.0 }).unwrap();
        assert!(out.is_empty());
        assert_eq!(w.queue_len(), 2);
        assert_eq!(w.state, WorkerState::Ready);
        assert!(w.handle(0, Message::Idle { rank: 1 }).is_err());
    }

    #[test]
    fn finish_without_children() {
        let best = CutSolution { x: vec![1], value: 2.0 };
        let mut c = CoordinatorCore::new(2, &best, 1);
        let problem = MaxCutProblem::new(Matrix::zeros(1, 1), 0.0, true).unwrap();
        let out = c.start(&problem, 0.0, vec![]);
        assert!(c.finished);
        assert_eq!(out.len(), 2);
        assert!(out.iter().all(|(_, m)| *m == Message::Finish));
    }
}
