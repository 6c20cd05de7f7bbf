//! Argument handling and report rendering for `bqpsolve`.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Duration;

use bqp_core::branch::{trace_csv, BranchRule, SolveParams, SolveResult, SolveStatus};
use bqp_core::error::{ParseError, SolveError};
use bqp_core::instance::{BqpOutcome, MaxCutProblem};
use bqp_core::io::{encode_dks, format_number, parse_bqp, parse_graph, parse_maxcut};
use bqp_core::penalty::PenaltyOptions;
use bqp_core::pipeline::{solve_bqp, solve_maxcut, Engine};
use clap::{Parser, ValueEnum};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Maxcut,
    Bqp,
    Dks,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Branching {
    DifficultFirst,
    EasyFirst,
}

#[derive(Debug, Clone, Parser)]
#[command(name = "bqpsolve", version, about = "Exact Max-Cut and constrained binary quadratic solver")]
pub struct Cli {
    #[arg(long, value_enum)]
    pub mode: Mode,
    /// Edge list for maxcut and dks, sparse BQP file for bqp.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "difficult-first")]
    pub branching: Branching,
    /// 1 runs the sequential engine.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pruning margin for non-integral objectives.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Penalty slack override.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Writes a per-node CSV trace.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// JSON report path; stdout when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Subgraph size for dks.
    #[arg(long)]
    pub k: Option<usize>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Parse { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Solve(#[from] SolveError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solve(SolveError::Inconsistent(_) | SolveError::Protocol(_) | SolveError::NoFreeVariable) => 3,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Timeout,
}

impl Status {
    pub fn as_str(self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Timeout => "unproven-timeout",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Optimal | Status::Infeasible => 0,
            Status::Timeout => 2,
        }
    }
}

/// Everything the JSON and text reports contain. Bounds are expressed in
/// the sense of the reported objective: upper bounds for maxcut and dks,
/// a lower bound for the bqp minimum.
#[derive(Debug, Clone)]
pub struct Report {
    pub mode: Mode,
    pub status: Status,
    pub value: Option<f64>,
    pub solution: Vec<i8>,
    pub nodes: usize,
    pub wall_seconds: f64,
    pub root_bound: Option<f64>,
    pub root_gap_percent: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    pub u_tilde: Option<f64>,
    pub l_tilde: Option<f64>,
    pub epsilon: Option<f64>,
    /// Non-integral BQP data: verdicts rest on numerical tolerances.
    pub approximate: bool,
    pub workers: usize,
    pub seed: u64,
}

fn number(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format_number(v),
        _ => "null".into(),
    }
}

impl Report {
    pub fn to_json(&self) -> String {
        let mode = match self.mode {
            Mode::Maxcut => "maxcut",
            Mode::Bqp => "bqp",
            Mode::Dks => "dks",
        };
        let solution: Vec<String> = self.solution.iter().map(|v| v.to_string()).collect();
        let mut out = String::from("{\n");
        let _ = writeln!(out, "  \"mode\": \"{mode}\",");
        let _ = writeln!(out, "  \"status\": \"{}\",", self.status.as_str());
        let _ = writeln!(out, "  \"value\": {},", number(self.value));
        let _ = writeln!(out, "  \"solution\": [{}],", solution.join(", "));
        let _ = writeln!(out, "  \"nodes\": {},", self.nodes);
        let _ = writeln!(out, "  \"wall_seconds\": {:.16e},", self.wall_seconds);
        let _ = writeln!(out, "  \"root_bound\": {},", number(self.root_bound));
        let _ = writeln!(out, "  \"root_gap_percent\": {},", number(self.root_gap_percent));
        let _ = writeln!(out, "  \"sigma\": {},", number(self.sigma));
        let _ = writeln!(out, "  \"rho\": {},", number(self.rho));
        let _ = writeln!(out, "  \"u_tilde\": {},", number(self.u_tilde));
        let _ = writeln!(out, "  \"l_tilde\": {},", number(self.l_tilde));
        let _ = writeln!(out, "  \"epsilon\": {},", number(self.epsilon));
        let _ = writeln!(out, "  \"exactness\": \"{}\",", if self.approximate { "approximate" } else { "exact" });
        let _ = writeln!(out, "  \"workers\": {},", self.workers);
        let _ = writeln!(out, "  \"seed\": {}", self.seed);
        out.push_str("}\n");
        out
    }

    pub fn to_text(&self) -> String {
        let show = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v}"));
        let mut out = String::new();
        let _ = writeln!(out, "status          {}", self.status.as_str());
        let _ = writeln!(out, "value           {}", show(self.value));
        let _ = writeln!(out, "nodes           {}", self.nodes);
        let _ = writeln!(out, "time            {:.3} s", self.wall_seconds);
        let _ = writeln!(out, "root bound      {}", show(self.root_bound));
        let _ = writeln!(out, "root gap        {} %", show(self.root_gap_percent));
        if self.sigma.is_some() {
            let _ = writeln!(out, "sigma           {}", show(self.sigma));
            let _ = writeln!(out, "rho             {}", show(self.rho));
        }
        if self.approximate {
            let _ = writeln!(out, "note            approximate exactness (non-integral data)");
        }
        let sol: String = self.solution.iter().map(|v| if *v > 0 { '1' } else { '0' }).collect();
        let _ = writeln!(out, "solution        {sol}");
        out
    }
}

fn read(path: &PathBuf) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Io { path: path.clone(), source })
}

fn parse<T>(path: &PathBuf, r: Result<T, ParseError>) -> Result<T, CliError> {
    r.map_err(|source| CliError::Parse { path: path.clone(), source })
}

pub fn solve_params(cli: &Cli) -> Result<SolveParams, CliError> {
    if cli.workers == 0 {
        return Err(CliError::Usage("--workers must be at least 1".into()));
    }
    if !(cli.tol > 0.0) {
        return Err(CliError::Usage("--tol must be positive".into()));
    }
    let time_limit = match cli.time_limit {
        Some(t) if t.is_finite() && t >= 0.0 => Some(Duration::from_secs_f64(t)),
        Some(t) => return Err(CliError::Usage(format!("invalid --time-limit {t}"))),
        None => None,
    };
    let branching = match cli.branching {
        Branching::DifficultFirst => BranchRule::DifficultFirst,
        Branching::EasyFirst => BranchRule::EasyFirst,
    };
    let mut params = SolveParams { branching, tol: cli.tol, time_limit, seed: cli.seed, trace: cli.trace.is_some(), ..SolveParams::default() };
    params.bound.annealing.seed = cli.seed;
    Ok(params)
}

fn engine(workers: usize) -> Engine {
    if workers > 1 {
        Engine::Parallel { workers }
    } else {
        Engine::Sequential
    }
}

/// Solver output plus the per-node trace when one was requested.
pub struct RunOutput {
    pub report: Report,
    pub trace: Option<String>,
}

fn search_fields(r: &SolveResult) -> (Status, usize, f64) {
    let status = if r.status == SolveStatus::Unproven { Status::Timeout } else { Status::Optimal };
    (status, r.nodes, r.wall_seconds)
}

pub fn run(cli: &Cli) -> Result<RunOutput, CliError> {
    let params = solve_params(cli)?;
    let engine = engine(cli.workers);
    let text = read(&cli.input)?;
    if cli.k.is_some() && cli.mode != Mode::Dks {
        return Err(CliError::Usage("--k applies to dks mode only".into()));
    }
    let base = Report {
        mode: cli.mode,
        status: Status::Optimal,
        value: None,
        solution: Vec::new(),
        nodes: 0,
        wall_seconds: 0.0,
        root_bound: None,
        root_gap_percent: None,
        sigma: None,
        rho: None,
        u_tilde: None,
        l_tilde: None,
        epsilon: None,
        approximate: false,
        workers: cli.workers,
        seed: cli.seed,
    };
    if cli.mode == Mode::Maxcut {
        let problem: MaxCutProblem = parse(&cli.input, parse_maxcut(&text))?;
        let out = solve_maxcut(&problem, &params, engine)?;
        let r = &out.result;
        let (status, nodes, wall_seconds) = search_fields(r);
        let report = Report {
            status,
            value: Some(r.opt_value),
            solution: r.x.clone(),
            nodes,
            wall_seconds,
            root_bound: Some(r.root_bound),
            root_gap_percent: Some(r.root_gap_percent),
            ..base
        };
        let trace = cli.trace.as_ref().map(|_| trace_csv(&r.trace));
        return Ok(RunOutput { report, trace });
    }

    let start = std::time::Instant::now();
    let inst = match cli.mode {
        Mode::Dks => {
            let k = cli.k.ok_or_else(|| CliError::Usage("dks mode needs --k".into()))?;
            let w = parse(&cli.input, parse_graph(&text))?;
            encode_dks(&w, k).map_err(|e| CliError::Parse { path: cli.input.clone(), source: e.into() })?
        }
        _ => parse(&cli.input, parse_bqp(&text))?,
    };
    let penalty = PenaltyOptions { epsilon: cli.epsilon, ..PenaltyOptions::default() };
    let out = solve_bqp(&inst, &penalty, &params, engine)?;
    // dks is reported as the subgraph weight, the negated BQP minimum.
    let sign = if cli.mode == Mode::Dks { -1.0 } else { 1.0 };
    let pp = &out.penalty;
    let mut report = Report {
        sigma: Some(pp.sigma),
        rho: Some(pp.rho),
        u_tilde: Some(pp.u_tilde),
        l_tilde: Some(pp.l_tilde),
        epsilon: Some(pp.epsilon),
        approximate: !inst.integral(),
        ..base
    };
    if let Some(search) = &out.search {
        let r = &search.result;
        let (status, nodes, _) = search_fields(r);
        report.status = status;
        report.nodes = nodes;
        // The Max-Cut bound is an upper bound on minus the BQP minimum.
        report.root_bound = Some(-sign * r.root_bound);
        report.root_gap_percent = Some(r.root_gap_percent);
    }
    let as_i8 = |z: &[u8]| z.iter().map(|&v| v as i8).collect::<Vec<_>>();
    match (&out.outcome, &out.incumbent) {
        (Some(BqpOutcome::Optimal(sol)), _) => {
            report.value = Some(sign * sol.value);
            report.solution = as_i8(&sol.z);
        }
        (Some(BqpOutcome::Infeasible), _) => report.status = Status::Infeasible,
        (None, Some(sol)) => {
            report.value = Some(sign * sol.value);
            report.solution = as_i8(&sol.z);
        }
        (None, None) => {}
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    let trace = cli.trace.as_ref().map(|_| out.search.as_ref().map_or_else(|| trace_csv(&[]), |s| trace_csv(&s.result.trace)));
    Ok(RunOutput { report, trace })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> Report {
        Report {
            mode: Mode::Bqp,
            status: Status::Infeasible,
            value: None,
            solution: vec![],
            nodes: 3,
            wall_seconds: 0.5,
            root_bound: Some(-2.5),
            root_gap_percent: Some(f64::NAN),
            sigma: Some(3.0),
            rho: Some(f64::INFINITY),
            u_tilde: None,
            l_tilde: Some(-4.0),
            epsilon: Some(1.0),
            approximate: false,
            workers: 1,
            seed: 0,
        }
    }

    #[test]
    fn json_uses_null_for_missing_and_non_finite() {
        let json = report().to_json();
        assert!(json.contains("\"value\": null,"));
        assert!(json.contains("\"rho\": null,"));
        assert!(json.contains("\"root_gap_percent\": null,"));
        assert!(json.contains("\"root_bound\": -2.5000000000000000e0,"));
        assert!(json.contains("\"sigma\": 3,"));
        assert!(json.contains("\"status\": \"infeasible\","));
        assert!(json.contains("\"l_tilde\": -4,"));
        assert!(json.contains("\"exactness\": \"exact\","));
    }

    #[test]
    fn status_exit_codes() {
        assert_eq!(Status::Optimal.exit_code(), 0);
        assert_eq!(Status::Infeasible.exit_code(), 0);
        assert_eq!(Status::Timeout.exit_code(), 2);
        assert_eq!(CliError::Usage("x".into()).exit_code(), 1);
        assert_eq!(CliError::Solve(SolveError::Inconsistent("x".into())).exit_code(), 3);
    }

    #[test]
    fn rejects_bad_flags() {
        let cli = Cli::try_parse_from(["bqpsolve", "--mode", "maxcut", "--input", "x", "--workers", "0"]).unwrap();
        assert!(matches!(solve_params(&cli), Err(CliError::Usage(_))));
        let cli = Cli::try_parse_from(["bqpsolve", "--mode", "maxcut", "--input", "x", "--time-limit=-1"]).unwrap();
        assert!(solve_params(&cli).is_err());
        assert!(Cli::try_parse_from(["bqpsolve", "--mode", "knapsack", "--input", "x"]).is_err());
    }
}
