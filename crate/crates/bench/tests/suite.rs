use bqp_bench::{run_suite, Family, Stats, SuiteConfig};
use bqp_core::instance::{brute_force_bqp, brute_force_maxcut, BqpOutcome};

#[test]
fn maxcut_table_structure() {
    let cfg = SuiteConfig { warmup: 0, ..SuiteConfig::new(Family::MaxcutRandom, vec![10], (0..4).collect(), vec![1]) };
    let suite = run_suite(&cfg).unwrap();
    assert_eq!(suite.records.len(), 4);
    for r in &suite.records {
        assert!(r.nodes >= 1);
        assert!(r.root_gap_percent >= 0.0);
        let bqp_bench::Instance::MaxCut(p) = bqp_bench::generate(Family::MaxcutRandom, 10, r.seed) else { panic!() };
        assert_eq!(r.value, Some(brute_force_maxcut(&p).unwrap().value));
    }
    let summary = suite.summary_csv();
    let mut lines = summary.lines();
    assert!(lines.next().unwrap().starts_with("n,workers,count,nodes_min"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    let avg_nodes: f64 = row[5].parse().unwrap();
    let recomputed = Stats::of(suite.records.iter().map(|r| r.nodes as f64)).unwrap().avg;
    assert!((avg_nodes - recomputed).abs() < 1e-6);
    assert_eq!(suite.raw_csv().lines().count(), 5);
}

#[test]
fn scaling_rows() {
    let cfg = SuiteConfig::new(Family::MaxcutRandom, vec![9], vec![1, 2], vec![1, 2]);
    let suite = run_suite(&cfg).unwrap();
    let rows = suite.scaling();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0].workers, 1);
    assert_eq!(rows[0].speedup, 1.0);
    assert_eq!(rows[0].amdahl, 1.0);
    assert!(rows[1].amdahl >= 1.0 && rows[1].amdahl <= 2.0);
    assert!(suite.scaling_csv().starts_with("n,workers,avg_seconds,SU,UB"));
}

#[test]
fn bqp_families_match_enumeration() {
    for family in [Family::BqpRandom, Family::DksRandom, Family::PenaltyRandom] {
        let cfg = SuiteConfig { warmup: 0, ..SuiteConfig::new(family, vec![8], vec![0, 1], vec![1]) };
        let suite = run_suite(&cfg).unwrap();
        for r in &suite.records {
            let bqp_bench::Instance::Bqp(inst) = bqp_bench::generate(family, 8, r.seed) else { panic!() };
            let expected = match brute_force_bqp(&inst).unwrap() {
                BqpOutcome::Optimal(s) => Some(s.value),
                BqpOutcome::Infeasible => None,
            };
            assert_eq!(r.value, expected, "{} seed {}", family.name(), r.seed);
        }
    }
}
