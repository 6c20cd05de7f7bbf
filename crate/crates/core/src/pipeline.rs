//! End-to-end solves: Max-Cut directly, BQP through the penalty
//! reformulation.

use crate::branch::{solve, SolveParams, SolveResult, SolveStatus};
use crate::error::SolveError;
use crate::instance::{pm1_to_binary, BinarySolution, BqpInstance, BqpOutcome, MaxCutProblem};
use crate::parallel::{solve_parallel, WorkerStats};
use crate::penalty::{build_penalty, interpret, penalty_to_maxcut, PenaltyOptions, PenaltyParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    #[default]
    Sequential,
    Parallel { workers: usize },
}

#[derive(Debug, Clone)]
pub struct MaxCutReport {
    pub result: SolveResult,
    /// Empty for the sequential engine.
    pub workers: Vec<WorkerStats>,
}

pub fn solve_maxcut(problem: &MaxCutProblem, params: &SolveParams, engine: Engine) -> Result<MaxCutReport, SolveError> {
    match engine {
        Engine::Sequential => Ok(MaxCutReport { result: solve(problem, params)?, workers: Vec::new() }),
        Engine::Parallel { workers } => {
            let out = solve_parallel(problem, params, workers)?;
            Ok(MaxCutReport { result: out.result, workers: out.workers })
        }
    }
}

#[derive(Debug, Clone)]
pub struct BqpReport {
    /// `None` when a limit stopped the search before optimality was proven.
    pub outcome: Option<BqpOutcome>,
    /// Best feasible point known when the search stopped early.
    pub incumbent: Option<BinarySolution>,
    pub penalty: PenaltyParams,
    /// Absent when the relaxation is already empty.
    pub search: Option<MaxCutReport>,
}

pub fn solve_bqp(
    inst: &BqpInstance,
    penalty: &PenaltyOptions,
    params: &SolveParams,
    engine: Engine,
) -> Result<BqpReport, SolveError> {
    if let Engine::Parallel { workers: 0 } = engine {
        return Err(SolveError::Config("at least one worker is required".into()));
    }
    let reform = build_penalty(inst, penalty)?;
    if reform.relaxation_empty {
        return Ok(BqpReport { outcome: Some(BqpOutcome::Infeasible), incumbent: None, penalty: reform.params, search: None });
    }
    let problem = penalty_to_maxcut(&reform);
    let report = solve_maxcut(&problem, params, engine)?;
    let cut = problem.solution(report.result.x.clone());
    let (outcome, incumbent) = match report.result.status {
        SolveStatus::Optimal => (Some(interpret(&cut, &reform, inst)?), None),
        SolveStatus::Unproven => {
            let flip = cut.x[0];
            let x: Vec<i8> = cut.x[1..].iter().map(|&v| v * flip).collect();
            let z = pm1_to_binary(&x);
            let incumbent = inst.is_feasible(&z).then(|| BinarySolution { value: inst.objective(&z), z, feasible: true });
            (None, incumbent)
        }
    };
    Ok(BqpReport { outcome, incumbent, penalty: reform.params, search: Some(report) })
}
