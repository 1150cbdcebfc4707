use pogo::base::BaseKind;
use pogo::harness::{emit_csv, read_csv, run, sweep, ProblemKind, ProblemSpec, RunConfig, Termination};
use pogo::ortho::{LambdaPolicy, Method, OrthoStepConfig};
use pogo::problems::{gap_from_objective, Pca, Problem};
use pogo::FieldKind;

fn small(kind: ProblemKind, method: Method, eta: f64) -> RunConfig {
    let spec = match kind {
        ProblemKind::Chain => ProblemSpec::chain(5, 3),
        _ => ProblemSpec::new(kind, 5, 7),
    };
    let mut cfg = RunConfig::new(spec, OrthoStepConfig::new(method, eta));
    cfg.max_iters = 200;
    cfg.log_every = 20;
    cfg
}

#[test]
fn every_problem_and_method_descends() {
    for kind in [ProblemKind::Pca, ProblemKind::Procrustes, ProblemKind::UnitaryProcrustes, ProblemKind::Chain] {
        for method in [Method::Pogo, Method::Landing, Method::Slpg, Method::Rgd, Method::Unconstrained] {
            let mut cfg = small(kind, method, 0.005);
            if kind == ProblemKind::Procrustes || kind == ProblemKind::UnitaryProcrustes {
                cfg.problem.n = 5;
            }
            if method == Method::Unconstrained {
                cfg.step = cfg.step.with_base(BaseKind::adam());
            }
            let rep = run(&cfg).unwrap();
            assert!(rep.error.is_none(), "{kind} {method}: {:?}", rep.error);
            let (first, last) = (&rep.records[0], rep.last());
            assert!(last.loss < first.loss, "{kind} {method}: {} -> {}", first.loss, last.loss);
            if method.is_feasible() {
                assert!(rep.max_logged_distance() < 1e-3, "{kind} {method}");
            }
        }
    }
}

#[test]
fn csv_file_round_trip_of_a_real_run() {
    let mut cfg = small(ProblemKind::UnitaryProcrustes, Method::Pogo, 0.01);
    cfg.problem.n = 5;
    cfg.step = cfg.step.with_policy(LambdaPolicy::FindRoot);
    let rep = run(&cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.csv");
    emit_csv(&rep.records, &path).unwrap();
    assert_eq!(read_csv(&path).unwrap(), rep.records);
}

#[test]
fn gap_column_matches_the_problem_definition() {
    let cfg = small(ProblemKind::Pca, Method::Pogo, 0.05);
    let rep = run(&cfg).unwrap();
    let pca = Pca::<f64>::new(7, 5, cfg.seed).unwrap();
    let opt = pca.optimal_value().unwrap();
    for r in &rep.records {
        let expected = gap_from_objective(pca.objective_from_loss(r.loss), opt);
        assert!((r.gap.unwrap() - expected).abs() <= 1e-12 * (1.0 + expected), "{r:?}");
    }
}

#[test]
fn converging_runs_stop_early() {
    let mut cfg = small(ProblemKind::Procrustes, Method::Rgd, 0.02);
    cfg.problem.n = 5;
    cfg.max_iters = 20_000;
    cfg.gap_tol = 1e-4;
    let rep = run(&cfg).unwrap();
    assert_eq!(rep.termination, Termination::Converged);
    assert!(rep.last().gap.unwrap() <= 1e-4);
    assert!(rep.last().iter < 20_000);
}

#[test]
fn sweep_reports_each_rate() {
    let cfg = small(ProblemKind::Chain, Method::Pogo, 0.0);
    let out = sweep(&cfg, &[0.001, 0.01]);
    assert_eq!(out.iter().map(|(lr, _)| *lr).collect::<Vec<_>>(), vec![0.001, 0.01]);
    assert!(out.iter().all(|(_, r)| r.is_ok()));
}

#[test]
fn complex_field_on_real_problem_kinds() {
    let cfg = small(ProblemKind::Pca, Method::Pogo, 0.05);
    let mut c = cfg.clone();
    c.problem = c.problem.with_field(FieldKind::Complex128);
    let rep = run(&c).unwrap();
    assert!(rep.last().loss < rep.records[0].loss);
    assert!(rep.max_logged_distance() < 1e-6);
}
