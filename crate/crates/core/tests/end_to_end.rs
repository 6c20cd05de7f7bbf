use bqp_core::branch::{SolveParams, SolveStatus};
use bqp_core::instance::{brute_force_bqp, brute_force_maxcut, BqpOutcome};
use bqp_core::io::{gen_random_bqp, gen_random_graph, parse_bqp, parse_maxcut, write_bqp, write_graph, BqpGenParams};
use bqp_core::penalty::PenaltyOptions;
use bqp_core::pipeline::{solve_bqp, solve_maxcut, Engine};

fn value(o: &BqpOutcome) -> Option<f64> {
    match o {
        BqpOutcome::Optimal(s) => Some(s.value),
        BqpOutcome::Infeasible => None,
    }
}

#[test]
fn bqp_files_solve_to_the_enumerated_optimum() {
    let params = SolveParams::default();
    for seed in 0..6 {
        let gen = BqpGenParams {
            n: 9,
            density_f: 0.6,
            range_f: (-6, 6),
            range_a: (0, 2),
            range_b: (1, 5),
            m: 2,
            seed,
        };
        let inst = parse_bqp(&write_bqp(&gen_random_bqp(&gen))).unwrap();
        let expected = value(&brute_force_bqp(&inst).unwrap());
        for engine in [Engine::Sequential, Engine::Parallel { workers: 2 }] {
            let report = solve_bqp(&inst, &PenaltyOptions::default(), &params, engine).unwrap();
            let outcome = report.outcome.expect("no limits set");
            assert_eq!(value(&outcome), expected, "seed {seed} {engine:?}");
            if let BqpOutcome::Optimal(s) = outcome {
                assert!(s.feasible);
                assert_eq!(inst.objective(&s.z), s.value);
            }
        }
    }
}

#[test]
fn graph_files_solve_to_the_enumerated_optimum() {
    let params = SolveParams::default();
    for seed in 0..4 {
        let p = parse_maxcut(&write_graph(&gen_random_graph(14, 0.5, (-4, 9), seed))).unwrap();
        let exact = brute_force_maxcut(&p).unwrap().value;
        for engine in [Engine::Sequential, Engine::Parallel { workers: 3 }] {
            let r = solve_maxcut(&p, &params, engine).unwrap().result;
            assert_eq!(r.status, SolveStatus::Optimal);
            assert_eq!(r.opt_value, exact, "seed {seed} {engine:?}");
            assert!(r.root_bound >= exact - 1e-6);
        }
    }
}
