//! Exhaustive exploration of protocol interleavings. Messages travel over
//! one FIFO queue per ordered pair of ranks; every pending delivery and
//! every node step of a ready worker is a possible next move.

use std::collections::hash_map::DefaultHasher;
use std::collections::{HashSet, VecDeque};
use std::hash::{Hash, Hasher};

use crate::branch::NodeId;
use crate::error::SolveError;
use crate::instance::{CutSolution, MaxCutProblem};
use crate::linalg::Matrix;

use super::protocol::{CoordinatorCore, NodeOracle, NodeResult, Outbox, WorkerCore, WorkerState, COORDINATOR};
use super::wire::{encode, Message, NodeRecord};

/// Complete binary tree over vertices `1..=depth` with fixed leaf values.
/// A node's bound is its best leaf plus one half, its cut the first leaf
/// below it.
#[derive(Debug, Clone)]
pub struct SyntheticTree {
    pub depth: usize,
    pub leaves: Vec<f64>,
}

impl SyntheticTree {
    pub fn new(leaves: Vec<f64>) -> Self {
        let depth = leaves.len().trailing_zeros() as usize;
        assert_eq!(1 << depth, leaves.len(), "leaf count must be a power of two");
        Self { depth, leaves }
    }

    pub fn optimum(&self) -> f64 {
        self.leaves.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    fn signs(&self, leaf: usize) -> Vec<i8> {
        (0..self.depth).map(|k| if leaf >> k & 1 == 1 { -1 } else { 1 }).collect()
    }

    fn below(&self, node: &NodeRecord) -> Vec<usize> {
        (0..self.leaves.len())
            .filter(|&leaf| {
                let s = self.signs(leaf);
                node.fixed.iter().all(|&(v, sg)| s[v as usize - 1] == sg)
            })
            .collect()
    }
}

impl NodeOracle for SyntheticTree {
    fn init(&mut self, _: MaxCutProblem, _: f64) {}

    fn process(&mut self, node: &NodeRecord, _: f64) -> Result<NodeResult, SolveError> {
        let leaves = self.below(node);
        let first = *leaves.first().ok_or_else(|| SolveError::Inconsistent("empty subtree".into()))?;
        let mut x = vec![1];
        x.extend(self.signs(first));
        let best = Some(CutSolution { x, value: self.leaves[first] });
        if node.fixed.len() == self.depth {
            return Ok(NodeResult { best, ub: self.leaves[first], branch_var: None });
        }
        let top = leaves.iter().map(|&l| self.leaves[l]).fold(f64::NEG_INFINITY, f64::max);
        Ok(NodeResult { best, ub: top + 0.5, branch_var: Some(node.fixed.len() + 1) })
    }

    fn margin(&self) -> f64 {
        1e-6
    }
}

#[derive(Clone)]
struct World {
    coord: CoordinatorCore,
    workers: Vec<WorkerCore<SyntheticTree>>,
    links: Vec<VecDeque<Message>>,
    size: usize,
}

impl World {
    fn start(tree: &SyntheticTree, n_workers: usize) -> Result<Self, SolveError> {
        let root = NodeRecord { fixed: vec![], ub: f64::INFINITY, depth: 0, id: NodeId::default() };
        let res = tree.clone().process(&root, f64::NEG_INFINITY)?;
        let best = res.best.expect("synthetic nodes carry a cut");
        let children: Vec<NodeRecord> = if res.branch_var.is_some() {
            [1i8, -1]
                .iter()
                .enumerate()
                .map(|(k, &s)| NodeRecord {
                    fixed: vec![(1, s)],
                    ub: res.ub,
                    depth: 1,
                    id: NodeId { rank: 0, seq: k as u32 + 1 },
                })
                .collect()
        } else {
            Vec::new()
        };
        let mut coord = CoordinatorCore::new(n_workers, &best, 1 + children.len());
        let problem = MaxCutProblem::new(Matrix::zeros(tree.depth + 1, tree.depth + 1), 0.0, true)?;
        let size = n_workers + 1;
        let mut world = Self {
            coord: coord.clone(),
            workers: (1..=n_workers).map(|r| WorkerCore::new(r, tree.clone())).collect(),
            links: vec![VecDeque::new(); size * size],
            size,
        };
        let out = coord.start(&problem, 0.0, children);
        world.coord = coord;
        world.post(COORDINATOR, out);
        Ok(world)
    }

    fn post(&mut self, from: usize, out: Outbox) {
        for (to, msg) in out {
            self.links[from * self.size + to].push_back(msg);
        }
    }

    fn key(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.coord.fingerprint(&mut h);
        for w in &self.workers {
            w.fingerprint(&mut h);
        }
        for l in &self.links {
            l.len().hash(&mut h);
            for m in l {
                encode(m).hash(&mut h);
            }
        }
        h.finish()
    }

    /// `(from, to)` deliveries, and `(r, r)` for a node step on worker `r`.
    fn moves(&self) -> Vec<(usize, usize)> {
        let mut m = Vec::new();
        for from in 0..self.size {
            for to in 0..self.size {
                if !self.links[from * self.size + to].is_empty() {
                    m.push((from, to));
                }
            }
        }
        for (k, w) in self.workers.iter().enumerate() {
            if w.state == WorkerState::Ready {
                m.push((k + 1, k + 1));
            }
        }
        m
    }

    fn apply(&mut self, (from, to): (usize, usize)) -> Result<(), SolveError> {
        if from == to {
            let out = self.workers[from - 1].step()?;
            self.post(from, out);
            return Ok(());
        }
        let msg = self.links[from * self.size + to].pop_front().expect("move has a pending message");
        let out = if to == COORDINATOR {
            self.coord.handle(from, msg)?
        } else {
            self.workers[to - 1].handle(from, msg)?
        };
        self.post(to, out);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Exploration {
    pub states: usize,
    pub terminal_states: usize,
}

/// Visits every reachable state and checks each terminal one: the
/// coordinator finished, all workers done, the optimum found, and no node
/// lost. Also checks that the incumbent never decreases along a move.
pub fn explore(tree: &SyntheticTree, workers: usize) -> Result<Exploration, String> {
    let start = World::start(tree, workers).map_err(|e| e.to_string())?;
    let optimum = tree.optimum();
    let mut seen = HashSet::new();
    let mut stack = vec![start];
    let mut terminal_states = 0;
    while let Some(world) = stack.pop() {
        if !seen.insert(world.key()) {
            continue;
        }
        let moves = world.moves();
        if moves.is_empty() {
            terminal_states += 1;
            if !world.coord.finished {
                return Err("deadlock: coordinator still waiting".into());
            }
            if let Some(w) = world.workers.iter().find(|w| w.state != WorkerState::Done) {
                return Err(format!("deadlock: worker {} in {:?}", w.rank, w.state));
            }
            if world.coord.best_lb != optimum {
                return Err(format!("finished with {} instead of {optimum}", world.coord.best_lb));
            }
            let balance: i64 = world.workers.iter().map(|w| w.stats.balance()).sum();
            let abandoned: usize = world.workers.iter().map(|w| w.stats.abandoned).sum();
            if balance != 0 || abandoned != 0 {
                return Err(format!("lost nodes: balance {balance}, abandoned {abandoned}"));
            }
            continue;
        }
        for mv in moves {
            let mut next = world.clone();
            next.apply(mv).map_err(|e| format!("move {mv:?}: {e}"))?;
            if next.coord.best_lb < world.coord.best_lb {
                return Err("incumbent decreased".into());
            }
            stack.push(next);
        }
    }
    Ok(Exploration { states: seen.len(), terminal_states })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_workers_depth_three() {
        let tree = SyntheticTree::new(vec![1.0, 4.0, 2.0, 7.0, 3.0, 5.0, 6.0, 0.0]);
        let e = explore(&tree, 3).unwrap();
        assert!(e.states > 100, "{e:?}");
        assert!(e.terminal_states >= 1);
    }

    #[test]
    fn flat_and_skewed_trees() {
        explore(&SyntheticTree::new(vec![2.0; 8]), 2).unwrap();
        let skewed = SyntheticTree::new(vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 9.0]);
        explore(&skewed, 1).unwrap();
        explore(&skewed, 3).unwrap();
        explore(&SyntheticTree::new(vec![3.0]), 2).unwrap();
    }
}
