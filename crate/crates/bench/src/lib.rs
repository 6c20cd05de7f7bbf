//! Desk-scale experiments: generated instance families, per-group
//! min/max/avg tables of nodes, time and initial gap, and speedup tables
//! for several worker counts.

use std::collections::BTreeMap;
use std::time::Instant;

use bqp_core::branch::SolveParams;
use bqp_core::error::SolveError;
use bqp_core::instance::{BqpInstance, MaxCutProblem};
use bqp_core::io::{encode_dks, gen_random_bqp, gen_random_graph, BqpGenParams};
use bqp_core::linalg::Vector;
use bqp_core::penalty::PenaltyOptions;
use bqp_core::pipeline::{solve_bqp, solve_maxcut, Engine};
use clap::ValueEnum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Family {
    /// Edge density 0.5, integer weights in [-10, 10].
    MaxcutRandom,
    /// F in [-10, 10] at density 0.5, A in [0, 1], b in [0, n/4], two rows.
    BqpRandom,
    /// Unit-weight graph of density 0.5, k = n/2.
    DksRandom,
    /// F in [-10, 10], A in [-5, 5], three rows with a right-hand side
    /// met by a random point, so every instance is feasible.
    PenaltyRandom,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::MaxcutRandom => "maxcut-random",
            Family::BqpRandom => "bqp-random",
            Family::DksRandom => "dks-random",
            Family::PenaltyRandom => "penalty-random",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Instance {
    MaxCut(MaxCutProblem),
    Bqp(BqpInstance),
}

pub fn generate(family: Family, n: usize, seed: u64) -> Instance {
    match family {
        Family::MaxcutRandom => {
            let w = gen_random_graph(n, 0.5, (-10, 10), seed);
            Instance::MaxCut(bqp_core::instance::maxcut_from_graph(&w).expect("generated graph is valid"))
        }
        Family::BqpRandom => Instance::Bqp(gen_random_bqp(&BqpGenParams {
            n,
            density_f: 0.5,
            range_f: (-10, 10),
            range_a: (0, 1),
            range_b: (0, (n / 4) as i64),
            m: 2,
            seed,
        })),
        Family::DksRandom => {
            let w = gen_random_graph(n, 0.5, (1, 1), seed);
            Instance::Bqp(encode_dks(&w, n / 2).expect("k within range"))
        }
        Family::PenaltyRandom => {
            let base = gen_random_bqp(&BqpGenParams {
                n,
                density_f: 0.5,
                range_f: (-10, 10),
                range_a: (-5, 5),
                range_b: (0, 0),
                m: 3,
                seed,
            });
            let z = Vector::from_iterator(n, (0..n).map(|i| ((seed >> (i % 64)) & 1) as f64));
            let b = base.a() * z;
            Instance::Bqp(BqpInstance::new(base.f().clone(), base.c().clone(), base.a().clone(), b).expect("valid"))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    pub workers: usize,
    /// `None` for infeasible instances.
    pub value: Option<f64>,
    pub nodes: usize,
    pub wall_seconds: f64,
    pub root_seconds: f64,
    pub root_gap_percent: f64,
}

fn engine(workers: usize) -> Engine {
    if workers > 1 {
        Engine::Parallel { workers }
    } else {
        Engine::Sequential
    }
}

/// Solves once; `wall_seconds` covers the whole pipeline.
pub fn run_once(inst: &Instance, workers: usize, seed: u64) -> Result<RunRecordParts, SolveError> {
    let params = SolveParams { seed, ..SolveParams::default() };
    let start = Instant::now();
    let parts = match inst {
        Instance::MaxCut(p) => {
            let r = solve_maxcut(p, &params, engine(workers))?.result;
            RunRecordParts {
                value: Some(r.opt_value),
                nodes: r.nodes,
                root_seconds: r.root_seconds,
                root_gap_percent: r.root_gap_percent,
                wall_seconds: 0.0,
            }
        }
        Instance::Bqp(b) => {
            let report = solve_bqp(b, &PenaltyOptions::default(), &params, engine(workers))?;
            let value = report.outcome.as_ref().and_then(|o| o.value());
            match &report.search {
                Some(s) => RunRecordParts {
                    value,
                    nodes: s.result.nodes,
                    root_seconds: s.result.root_seconds,
                    root_gap_percent: s.result.root_gap_percent,
                    wall_seconds: 0.0,
                },
                None => RunRecordParts { value, nodes: 0, root_seconds: 0.0, root_gap_percent: 0.0, wall_seconds: 0.0 },
            }
        }
    };
    Ok(RunRecordParts { wall_seconds: start.elapsed().as_secs_f64(), ..parts })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecordParts {
    pub value: Option<f64>,
    pub nodes: usize,
    pub wall_seconds: f64,
    pub root_seconds: f64,
    pub root_gap_percent: f64,
}

#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub family: Family,
    pub sizes: Vec<usize>,
    pub seeds: Vec<u64>,
    pub workers: Vec<usize>,
    /// Discarded runs before each timed one.
    pub warmup: usize,
}

impl SuiteConfig {
    pub fn new(family: Family, sizes: Vec<usize>, seeds: Vec<u64>, workers: Vec<usize>) -> Self {
        Self { family, sizes, seeds, workers, warmup: 1 }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Suite {
    pub records: Vec<RunRecord>,
}

pub fn run_suite(cfg: &SuiteConfig) -> Result<Suite, SolveError> {
    let mut records = Vec::new();
    for &n in &cfg.sizes {
        for &seed in &cfg.seeds {
            let inst = generate(cfg.family, n, seed);
            for &workers in &cfg.workers {
                for _ in 0..cfg.warmup {
                    run_once(&inst, workers, seed)?;
                }
                let p = run_once(&inst, workers, seed)?;
                records.push(RunRecord {
                    family: cfg.family,
                    n,
                    seed,
                    workers,
                    value: p.value,
                    nodes: p.nodes,
                    wall_seconds: p.wall_seconds,
                    root_seconds: p.root_seconds,
                    root_gap_percent: p.root_gap_percent,
                });
            }
        }
    }
    Ok(Suite { records })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub avg: f64,
}

impl Stats {
    pub fn of(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        let v: Vec<f64> = values.into_iter().collect();
        if v.is_empty() {
            return None;
        }
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        Some(Self { min, max, avg: v.iter().sum::<f64>() / v.len() as f64 })
    }
}

/// `1 / (s + (1 - s) / n)`.
pub fn amdahl_bound(serial_fraction: f64, workers: usize) -> f64 {
    let s = serial_fraction.clamp(0.0, 1.0);
    1.0 / (s + (1.0 - s) / workers as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub n: usize,
    pub workers: usize,
    pub avg_seconds: f64,
    /// `time(1) / time(workers)`.
    pub speedup: f64,
    pub amdahl: f64,
}

fn number(v: f64) -> String {
    format!("{v:.6}")
}

impl Suite {
    fn groups(&self) -> BTreeMap<(usize, usize), Vec<&RunRecord>> {
        let mut g: BTreeMap<_, Vec<_>> = BTreeMap::new();
        for r in &self.records {
            g.entry((r.n, r.workers)).or_default().push(r);
        }
        g
    }

    pub fn raw_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["family", "n", "seed", "workers", "value", "nodes", "wall_seconds", "root_seconds", "root_gap_percent"])
            .expect("in-memory write");
        for r in &self.records {
            w.write_record([
                r.family.name().to_string(),
                r.n.to_string(),
                r.seed.to_string(),
                r.workers.to_string(),
                r.value.map_or_else(|| "infeasible".to_string(), |v| v.to_string()),
                r.nodes.to_string(),
                number(r.wall_seconds),
                number(r.root_seconds),
                number(r.root_gap_percent),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// One row per `(n, workers)` group with min/max/avg of nodes, time and
    /// initial gap.
    pub fn summary_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["n".to_string(), "workers".into(), "count".into()];
        for col in ["nodes", "seconds", "gap_percent"] {
            for s in ["min", "max", "avg"] {
                header.push(format!("{col}_{s}"));
            }
        }
        w.write_record(&header).expect("in-memory write");
        for ((n, workers), rs) in self.groups() {
            let mut row = vec![n.to_string(), workers.to_string(), rs.len().to_string()];
            let cols: [&dyn Fn(&RunRecord) -> f64; 3] =
                [&|r| r.nodes as f64, &|r| r.wall_seconds, &|r| r.root_gap_percent];
            for f in cols {
                let s = Stats::of(rs.iter().map(|r| f(r))).expect("nonempty group");
                row.extend([number(s.min), number(s.max), number(s.avg)]);
            }
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }

    /// Speedups relative to the single-worker group of the same size. The
    /// serial fraction is the single-worker root time over total time.
    pub fn scaling(&self) -> Vec<ScalingRow> {
        let groups = self.groups();
        let mut rows = Vec::new();
        for (&(n, workers), rs) in &groups {
            let Some(base) = groups.get(&(n, 1)) else { continue };
            let t1 = base.iter().map(|r| r.wall_seconds).sum::<f64>() / base.len() as f64;
            let root = base.iter().map(|r| r.root_seconds).sum::<f64>() / base.len() as f64;
            let s = if t1 > 0.0 { root / t1 } else { 1.0 };
            let tw = rs.iter().map(|r| r.wall_seconds).sum::<f64>() / rs.len() as f64;
            let speedup = if workers == 1 { 1.0 } else { t1 / tw };
            rows.push(ScalingRow { n, workers, avg_seconds: tw, speedup, amdahl: amdahl_bound(s, workers) });
        }
        rows
    }

    pub fn scaling_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["n", "workers", "avg_seconds", "SU", "UB"]).expect("in-memory write");
        for r in self.scaling() {
            w.write_record([r.n.to_string(), r.workers.to_string(), number(r.avg_seconds), number(r.speedup), number(r.amdahl)])
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
    }
}
