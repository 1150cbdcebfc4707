//! `pogo` — run orthogonality-constrained optimization benchmarks.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 numeric failure
//! during a run, 3 a `verify` property failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pogo::base::{BaseKind, DEFAULT_MOMENTUM};
use pogo::harness::{
    emit_csv_annotated, emit_plot, render_csv, run, PlateauConfig, PlotColumn, ProblemKind, ProblemSpec, RunConfig,
    RunReport, Termination, DEFAULT_GAP_TOL, DEFAULT_MAX_ITERS,
};
use pogo::ortho::{LambdaPolicy, Method, OrthoStepConfig, DEFAULT_LANDING_LAMBDA};
use pogo::{Error, FieldKind};

const EXIT_USAGE: u8 = 1;
const EXIT_NUMERIC: u8 = 2;
const EXIT_PROPERTY: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "pogo", version, about = "Orthogonality-constrained optimization benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one optimizer on one problem and write its convergence CSV.
    Run(RunArgs),
    /// Run the built-in invariant and property suite.
    Verify,
    /// Run the same configuration over several learning rates.
    Sweep(SweepArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ProblemArg {
    Pca,
    Procrustes,
    UnitaryProcrustes,
    Chain,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    Pogo,
    Landing,
    Slpg,
    Rgd,
    UnconstrainedAdam,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    Half,
    Root,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BaseArg {
    None,
    Sgd,
    Vadam,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FieldArg {
    Real,
    Complex,
}

/// Everything but the learning rate and output locations.
#[derive(Args, Debug, Clone)]
struct CommonArgs {
    #[arg(long, value_enum)]
    problem: ProblemArg,
    /// Rows of each parameter matrix [default depends on the problem].
    #[arg(long)]
    p: Option<usize>,
    /// Columns of each parameter matrix [default depends on the problem].
    #[arg(long)]
    n: Option<usize>,
    /// Number of factors in the chain problem.
    #[arg(long, default_value_t = 8)]
    chain_len: usize,
    /// Draw the chain target at random instead of planting an exact solution
    /// (no optimality gap is then available).
    #[arg(long)]
    chain_unattainable: bool,
    #[arg(long, value_enum, default_value = "pogo")]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "half")]
    lambda_policy: PolicyArg,
    /// Base optimizer applied to the Euclidean gradient before the step.
    #[arg(long, value_enum, default_value = "none")]
    base: BaseArg,
    #[arg(long, default_value_t = DEFAULT_MOMENTUM)]
    momentum: f64,
    #[arg(long, default_value_t = DEFAULT_LANDING_LAMBDA)]
    landing_lambda: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = DEFAULT_GAP_TOL)]
    gap_tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scalar field [default: complex for unitary-procrustes, real otherwise].
    #[arg(long, value_enum)]
    field: Option<FieldArg>,
    #[arg(long, default_value_t = 1)]
    log_every: usize,
    /// Halve the learning rate after this many logged records without a
    /// loss improvement.
    #[arg(long)]
    plateau_patience: Option<usize>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long)]
    lr: f64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write `<prefix>_loss.svg`, `<prefix>_max_distance.svg` and, when an
    /// optimum is known, `<prefix>_gap.svg`.
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Learning rates, comma separated or repeated.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    lr: Vec<f64>,
    /// Directory receiving one CSV per learning rate.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

impl CommonArgs {
    fn config(&self, lr: f64) -> Result<RunConfig, String> {
        let kind = match self.problem {
            ProblemArg::Pca => ProblemKind::Pca,
            ProblemArg::Procrustes => ProblemKind::Procrustes,
            ProblemArg::UnitaryProcrustes => ProblemKind::UnitaryProcrustes,
            ProblemArg::Chain => ProblemKind::Chain,
        };
        let (dp, dn) = match kind {
            ProblemKind::Pca => (150, 200),
            ProblemKind::Procrustes => (200, 200),
            ProblemKind::UnitaryProcrustes | ProblemKind::Chain => (64, 64),
        };
        let p = self.p.unwrap_or(dp);
        let n = self.n.unwrap_or(if kind == ProblemKind::Chain { p } else { dn });
        let mut spec = if kind == ProblemKind::Chain {
            if n != p {
                return Err(format!("chain factors are square; got --p {p} --n {n}"));
            }
            let mut s = ProblemSpec::chain(p, self.chain_len);
            s.attainable = !self.chain_unattainable;
            s
        } else {
            ProblemSpec::new(kind, p, n)
        };
        if let Some(f) = self.field {
            spec = spec.with_field(match f {
                FieldArg::Real => FieldKind::Real64,
                FieldArg::Complex => FieldKind::Complex128,
            });
        }

        let method = match self.method {
            MethodArg::Pogo => Method::Pogo,
            MethodArg::Landing => Method::Landing,
            MethodArg::Slpg => Method::Slpg,
            MethodArg::Rgd => Method::Rgd,
            MethodArg::UnconstrainedAdam => Method::Unconstrained,
        };
        // The unconstrained reference always uses Adam.
        let base = match (self.method, self.base) {
            (MethodArg::UnconstrainedAdam, BaseArg::None) => BaseKind::adam(),
            (MethodArg::UnconstrainedAdam, other) => {
                return Err(format!("unconstrained-adam fixes its base optimizer; drop --base {other:?}"))
            }
            (_, BaseArg::None) => BaseKind::Identity,
            (_, BaseArg::Sgd) => BaseKind::sgd(self.momentum),
            (_, BaseArg::Vadam) => BaseKind::vadam(),
        };
        let policy = match self.lambda_policy {
            PolicyArg::Half => LambdaPolicy::FixedHalf,
            PolicyArg::Root => LambdaPolicy::FindRoot,
        };
        let step = OrthoStepConfig::new(method, lr)
            .with_base(base)
            .with_policy(policy)
            .with_landing_lambda(self.landing_lambda);

        let mut cfg = RunConfig::new(spec, step);
        cfg.max_iters = self.max_iters;
        cfg.gap_tol = self.gap_tol;
        cfg.log_every = self.log_every;
        cfg.seed = self.seed;
        cfg.plateau = self.plateau_patience.map(|patience| PlateauConfig { patience });
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }
}

fn usage_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {msg}");
    ExitCode::from(EXIT_USAGE)
}

/// Exit status for an error raised outside the optimization loop.
fn error_exit(e: &Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(if e.is_numeric() { EXIT_NUMERIC } else { EXIT_USAGE })
}

fn argv_line(argv: &[OsString]) -> String {
    argv.iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join(" ")
}

fn write_outputs(rep: &RunReport, out: Option<&Path>, plot: Option<&Path>, argv: &str) -> Result<(), Error> {
    let trailer = rep.error_trailer();
    match out {
        Some(path) => emit_csv_annotated(&rep.records, path, Some(argv), trailer.as_deref())?,
        None => {
            let text = render_csv(&rep.records, Some(argv), trailer.as_deref());
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes()).map_err(|source| Error::Io {
                path: PathBuf::from("<stdout>"),
                source,
            })?;
        }
    }
    if let Some(prefix) = plot {
        if rep.records.len() < 2 {
            eprintln!("note: fewer than 2 records, skipping plots");
            return Ok(());
        }
        let mut columns = vec![PlotColumn::Loss, PlotColumn::MaxDistance];
        if rep.records.iter().any(|r| r.gap.is_some()) {
            columns.push(PlotColumn::Gap);
        }
        for column in columns {
            let mut name = prefix.as_os_str().to_owned();
            name.push(format!("_{}.svg", column.name()));
            emit_plot(&rep.records, Path::new(&name), column)?;
        }
    }
    Ok(())
}

fn summarize(rep: &RunReport) -> String {
    let last = rep.last();
    let gap = last.gap.map_or("NA".to_string(), |g| format!("{g:.3e}"));
    let status = match rep.termination {
        Termination::Converged => "converged",
        Termination::MaxIters => "max-iters",
        Termination::Failed => "failed",
    };
    format!(
        "{status}: iter {} loss {:.6e} gap {gap} max_distance {:.3e} time {:.3}s",
        last.iter, last.loss, last.max_distance, last.time_s
    )
}

fn cmd_run(args: RunArgs, argv: &str) -> ExitCode {
    let cfg = match args.common.config(args.lr) {
        Ok(c) => c,
        Err(e) => return usage_error(e),
    };
    let rep = match run(&cfg) {
        Ok(r) => r,
        Err(e) => return error_exit(&e),
    };
    if let Err(e) = write_outputs(&rep, args.out.as_deref(), args.plot.as_deref(), argv) {
        return error_exit(&e);
    }
    eprintln!("{}", summarize(&rep));
    match &rep.error {
        None => ExitCode::SUCCESS,
        Some(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { EXIT_NUMERIC } else { EXIT_USAGE })
        }
    }
}

fn cmd_verify() -> ExitCode {
    let report = pogo::verify::run_suite();
    for c in &report.checks {
        println!(
            "{} {:<32} {:>7.3}s  {}",
            if c.passed { "ok  " } else { "FAIL" },
            c.name,
            c.seconds,
            c.detail
        );
    }
    if report.all_passed() {
        println!("all {} checks passed", report.checks.len());
        ExitCode::SUCCESS
    } else {
        println!("{} of {} checks failed", report.failures().count(), report.checks.len());
        ExitCode::from(EXIT_PROPERTY)
    }
}

fn cmd_sweep(args: SweepArgs, argv: &str) -> ExitCode {
    let mut configs = Vec::with_capacity(args.lr.len());
    for &lr in &args.lr {
        match args.common.config(lr) {
            Ok(c) => configs.push(c),
            Err(e) => return usage_error(e),
        }
    }
    if let Err(source) = std::fs::create_dir_all(&args.out_dir) {
        return error_exit(&Error::Io {
            path: args.out_dir.clone(),
            source,
        });
    }
    println!(
        "{:>12}  {:<10} {:>8} {:>14} {:>12} {:>12} {:>9}",
        "lr", "status", "iters", "loss", "gap", "max_dist", "time_s"
    );
    let mut failures = 0;
    for cfg in &configs {
        let lr = cfg.step.eta;
        let rep = match run(cfg) {
            Ok(r) => r,
            Err(e) => return error_exit(&e),
        };
        let path = args
            .out_dir
            .join(format!("{}_{}_lr{lr:e}.csv", cfg.problem.kind, cfg.step.method));
        let cell_argv = format!("{argv} (cell lr={lr:e})");
        if let Err(e) = emit_csv_annotated(&rep.records, &path, Some(&cell_argv), rep.error_trailer().as_deref()) {
            return error_exit(&e);
        }
        let last = rep.last();
        let status = match rep.termination {
            Termination::Converged => "converged",
            Termination::MaxIters => "max-iters",
            Termination::Failed => {
                failures += 1;
                "failed"
            }
        };
        println!(
            "{:>12e}  {:<10} {:>8} {:>14.6e} {:>12} {:>12.3e} {:>9.3}",
            lr,
            status,
            last.iter,
            last.loss,
            last.gap.map_or("NA".into(), |g| format!("{g:.3e}")),
            rep.max_logged_distance(),
            last.time_s
        );
    }
    // Divergent cells are an expected outcome of a grid; only a sweep in
    // which nothing survives counts as a numeric failure.
    if failures == configs.len() {
        ExitCode::from(EXIT_NUMERIC)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let argv = argv_line(&argv);
    match cli.command {
        Command::Run(args) => cmd_run(args, &argv),
        Command::Verify => cmd_verify(),
        Command::Sweep(args) => cmd_sweep(args, &argv),
    }
}
