use std::process::{Command, Output};

fn pogo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pogo")).args(args).output().expect("spawn pogo")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

#[test]
fn run_writes_csv_with_header_and_argv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("pca.csv");
    let out = pogo(&[
        "run", "--problem", "pca", "--p", "6", "--n", "10", "--method", "pogo", "--lr", "0.1", "--base", "sgd",
        "--momentum", "0.3", "--max-iters", "40", "--log-every", "10", "--seed", "3", "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# argv: "));
    assert_eq!(lines.next().unwrap(), "iter,time_s,loss,gap,max_distance,lambda_used,xi");
    let iters: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(iters, ["0", "10", "20", "30", "40"]);

    let records = pogo::harness::read_csv(&csv).unwrap();
    assert!(records.iter().all(|r| r.gap.is_some() && r.max_distance < 1e-4));
    // Distance contracts once the step size settles.
    assert!(records[4].max_distance < records[1].max_distance * 1e-2);
}

#[test]
fn run_to_stdout_is_deterministic_apart_from_timing() {
    let args = ["run", "--problem", "procrustes", "--p", "4", "--n", "4", "--lr", "0.01", "--max-iters", "15"];
    let strip = |o: Output| -> Vec<String> {
        String::from_utf8(o.stdout)
            .unwrap()
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(1);
                f.join(",")
            })
            .collect()
    };
    let a = strip(pogo(&args));
    let b = strip(pogo(&args));
    assert_eq!(a.len(), 17);
    assert_eq!(a, b);
}

#[test]
fn divergence_exits_with_numeric_failure_and_partial_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("boom.csv");
    let out = pogo(&[
        "run", "--problem", "pca", "--p", "5", "--n", "8", "--method", "slpg", "--lr", "1e9", "--max-iters", "100",
        "--out", csv.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().last().unwrap().starts_with("# error: numeric failure"));
    assert!(text.lines().filter(|l| !l.starts_with('#')).count() >= 2);
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(code(&pogo(&["run", "--problem", "pca", "--lr", "0.1", "--bogus"])), 1);
    assert_eq!(code(&pogo(&["run", "--problem", "pca"])), 1);
    assert_eq!(code(&pogo(&["run", "--problem", "pca", "--lr", "0.1", "--max-iters", "0"])), 1);
    assert_eq!(
        code(&pogo(&["run", "--problem", "unitary-procrustes", "--field", "real", "--lr", "0.1"])),
        1
    );
    assert_eq!(code(&pogo(&["frobnicate"])), 1);
    assert_eq!(code(&pogo(&["--help"])), 0);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let out = pogo(&[
        "run", "--problem", "pca", "--p", "3", "--n", "4", "--lr", "0.1", "--max-iters", "2", "--out",
        "/nonexistent-dir/x.csv",
    ]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent-dir/x.csv"));
}

#[test]
fn plots_are_written_next_to_prefix() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run");
    let out = pogo(&[
        "run", "--problem", "chain", "--p", "4", "--chain-len", "3", "--lr", "0.01", "--max-iters", "20",
        "--out", dir.path().join("c.csv").to_str().unwrap(), "--plot", prefix.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    for suffix in ["loss", "gap", "max_distance"] {
        let svg = std::fs::read_to_string(dir.path().join(format!("run_{suffix}.svg"))).unwrap();
        assert!(svg.contains("<svg") && svg.contains("<polyline"), "{suffix}");
    }
}

#[test]
fn unattainable_chain_has_no_gap_plot() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("u");
    let out = pogo(&[
        "run", "--problem", "chain", "--p", "3", "--chain-len", "2", "--chain-unattainable", "--lr", "0.01",
        "--max-iters", "10", "--out", dir.path().join("u.csv").to_str().unwrap(), "--plot", prefix.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("u_loss.svg").exists());
    assert!(!dir.path().join("u_gap.svg").exists());
}

#[test]
fn complex_field_runs_stay_feasible() {
    let out = pogo(&[
        "run", "--problem", "unitary-procrustes", "--p", "6", "--n", "6", "--lr", "0.01", "--lambda-policy", "root",
        "--max-iters", "300", "--log-every", "100",
    ]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let records = pogo::harness::parse_csv(&text).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.last().unwrap().max_distance < 1e-8);
}

#[test]
fn sweep_writes_one_csv_per_rate() {
    let dir = tempfile::tempdir().unwrap();
    let out = pogo(&[
        "sweep", "--problem", "procrustes", "--p", "5", "--n", "5", "--lr", "0.01,0.03", "--max-iters", "30",
        "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let n = std::fs::read_dir(dir.path()).unwrap().filter(|e| {
        e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv")
    }).count();
    assert_eq!(n, 2);
    let table = String::from_utf8(out.stdout).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn verify_passes() {
    let out = pogo(&["verify"]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(code(&out), 0, "{stdout}");
    assert!(stdout.contains("checks passed"));
}
