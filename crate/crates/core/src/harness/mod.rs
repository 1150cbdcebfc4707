//! Experiment loop: build a problem, run an optimizer with early stopping,
//! and record convergence metrics.

mod csv;
mod plot;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::ortho::{multi_step, IterateSet, OrthoStepConfig};
use crate::problems::{gap_from_objective, random_feasible_point, Chain, Pca, Problem, Procrustes};
use crate::scalar::{FieldKind, Scalar};
use crate::Complex64;

pub use self::csv::{emit_csv, emit_csv_annotated, parse_csv, read_csv, render_csv, CSV_HEADER};
pub use self::plot::{emit_plot, render_svg, PlotColumn};

pub const DEFAULT_MAX_ITERS: usize = 3000;
pub const DEFAULT_GAP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemKind {
    Pca,
    Procrustes,
    UnitaryProcrustes,
    Chain,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Pca => "pca",
            ProblemKind::Procrustes => "procrustes",
            ProblemKind::UnitaryProcrustes => "unitary-procrustes",
            ProblemKind::Chain => "chain",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "pca" => ProblemKind::Pca,
            "procrustes" => ProblemKind::Procrustes,
            "unitary-procrustes" => ProblemKind::UnitaryProcrustes,
            "chain" => ProblemKind::Chain,
            other => return Err(format!("unknown problem `{other}`")),
        })
    }
}

/// Which benchmark to build and how large.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub p: usize,
    pub n: usize,
    /// Number of factors; chain only.
    pub chain_len: usize,
    /// Plant `B = A·∏Qᵢ` so the chain optimum is known; chain only.
    pub attainable: bool,
    pub field: FieldKind,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, p: usize, n: usize) -> Self {
        let field = match kind {
            ProblemKind::UnitaryProcrustes => FieldKind::Complex128,
            _ => FieldKind::Real64,
        };
        Self {
            kind,
            p,
            n,
            chain_len: 1,
            attainable: true,
            field,
        }
    }

    pub fn chain(p: usize, len: usize) -> Self {
        Self {
            chain_len: len,
            ..Self::new(ProblemKind::Chain, p, p)
        }
    }

    pub fn with_field(mut self, field: FieldKind) -> Self {
        self.field = field;
        self
    }

    fn build<T: Scalar>(&self, seed: u64) -> Result<Box<dyn Problem<T>>> {
        Ok(match self.kind {
            ProblemKind::Pca => Box::new(Pca::<T>::new(self.n, self.p, seed)?),
            ProblemKind::Procrustes | ProblemKind::UnitaryProcrustes => {
                Box::new(Procrustes::<T>::new(self.p, self.n, seed)?)
            }
            ProblemKind::Chain => Box::new(Chain::<T>::new(self.p, self.chain_len, seed, self.attainable)?),
        })
    }
}

/// Halve the learning rate when the loss has not improved for `patience`
/// consecutive logged records.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauConfig {
    pub patience: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub step: OrthoStepConfig,
    pub max_iters: usize,
    pub gap_tol: f64,
    pub log_every: usize,
    pub seed: u64,
    pub plateau: Option<PlateauConfig>,
}

impl RunConfig {
    pub fn new(problem: ProblemSpec, step: OrthoStepConfig) -> Self {
        Self {
            problem,
            step,
            max_iters: DEFAULT_MAX_ITERS,
            gap_tol: DEFAULT_GAP_TOL,
            log_every: 1,
            seed: 0,
            plateau: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidConfig("max_iters must be at least 1".into()));
        }
        if !(self.gap_tol > 0.0) {
            return Err(Error::InvalidConfig(format!("gap_tol must be positive, got {}", self.gap_tol)));
        }
        if self.log_every == 0 {
            return Err(Error::InvalidConfig("log_every must be at least 1".into()));
        }
        if let Some(pl) = self.plateau {
            if pl.patience == 0 {
                return Err(Error::InvalidConfig("plateau patience must be at least 1".into()));
            }
        }
        if self.problem.kind == ProblemKind::UnitaryProcrustes && self.problem.field != FieldKind::Complex128 {
            return Err(Error::InvalidConfig("unitary-procrustes is complex-only".into()));
        }
        self.step.validate()
    }
}

/// One logged iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunRecord {
    pub iter: usize,
    pub time_s: f64,
    pub loss: f64,
    pub gap: Option<f64>,
    pub max_distance: f64,
    pub lambda_used: Option<f64>,
    pub xi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIters,
    Failed,
}

#[derive(Debug)]
pub struct RunReport {
    pub records: Vec<RunRecord>,
    pub termination: Termination,
    /// Set when `termination` is `Failed`.
    pub error: Option<Error>,
    /// Learning rate in effect at the end (differs from the configured one
    /// only under plateau halving).
    pub final_eta: f64,
}

impl RunReport {
    pub fn last(&self) -> &RunRecord {
        self.records.last().expect("a run always logs its initial state")
    }

    pub fn max_logged_distance(&self) -> f64 {
        self.records.iter().map(|r| r.max_distance).fold(0.0, f64::max)
    }

    /// Comment trailer describing a failed run, for the CSV.
    pub fn error_trailer(&self) -> Option<String> {
        self.error.as_ref().map(|e| {
            let kind = if e.is_numeric() { "numeric failure" } else { "failure" };
            format!("error: {kind}: {e}")
        })
    }
}

/// Runs `config` to completion. Configuration errors are returned as `Err`;
/// failures during optimization end the run early and are reported in the
/// returned [`RunReport`].
pub fn run(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    match config.problem.field {
        FieldKind::Real64 => run_typed::<f64>(config),
        FieldKind::Complex128 => run_typed::<Complex64>(config),
    }
}

/// Problem data and the starting point come from independent streams so
/// that changing the method never changes the instance.
fn init_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

fn run_typed<T: Scalar>(config: &RunConfig) -> Result<RunReport> {
    let problem = config.problem.build::<T>(config.seed)?;
    let init = random_feasible_point(problem.as_ref(), init_seed(config.seed))?;
    run_problem(problem.as_ref(), init, config)
}

/// The loop behind [`run`], for callers that bring their own problem and
/// starting point.
pub fn run_problem<T: Scalar>(problem: &dyn Problem<T>, init: Vec<Matrix<T>>, config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let mut step = config.step;
    let mut iterates = IterateSet::new(init, step.base)?;
    let optimum = problem.optimal_value();
    let gap_of = |loss: f64| optimum.map(|opt| gap_from_objective(problem.objective_from_loss(loss), opt));

    let (mut loss, mut grads) = problem.loss_and_grads(iterates.matrices());
    let mut records = vec![RunRecord {
        iter: 0,
        time_s: 0.0,
        loss,
        gap: gap_of(loss),
        max_distance: iterates.max_distance(),
        lambda_used: None,
        xi: None,
    }];
    if records[0].gap.is_some_and(|g| g <= config.gap_tol) {
        return Ok(RunReport {
            records,
            termination: Termination::Converged,
            error: None,
            final_eta: step.eta,
        });
    }

    let mut plateau = config.plateau.map(|pl| PlateauTracker::new(pl.patience, loss));
    let start = Instant::now();
    let mut termination = Termination::MaxIters;
    let mut error = None;
    let mut pending: Option<RunRecord> = None;

    for iter in 1..=config.max_iters {
        if let Err(e) = multi_step(&mut iterates, &grads, &step) {
            error = Some(e);
            termination = Termination::Failed;
            break;
        }
        let (l, g) = problem.loss_and_grads(iterates.matrices());
        let diags = iterates.diagnostics();
        let record = RunRecord {
            iter,
            time_s: start.elapsed().as_secs_f64(),
            loss: l,
            gap: gap_of(l),
            max_distance: iterates.max_distance(),
            lambda_used: diags.first().copied().flatten().and_then(|d| d.lambda),
            xi: Some(diags.iter().flatten().map(|d| d.xi).fold(0.0, f64::max)),
        };
        if !l.is_finite() || !record.max_distance.is_finite() {
            records.push(record);
            pending = None;
            error = Some(Error::NonFinite(format!("loss at iteration {iter}")));
            termination = Termination::Failed;
            break;
        }
        loss = l;
        grads = g;

        let converged = record.gap.is_some_and(|g| g <= config.gap_tol);
        if iter % config.log_every == 0 || converged || iter == config.max_iters {
            records.push(record);
            pending = None;
            if let Some(tracker) = plateau.as_mut() {
                if tracker.observe(loss) {
                    step.eta *= 0.5;
                }
            }
        } else {
            pending = Some(record);
        }
        if converged {
            termination = Termination::Converged;
            break;
        }
    }
    // A failure mid-interval still reports the last good state.
    if let Some(r) = pending {
        records.push(r);
    }

    Ok(RunReport {
        records,
        termination,
        error,
        final_eta: step.eta,
    })
}

/// Runs `base` once per learning rate, in order.
pub fn sweep(base: &RunConfig, lrs: &[f64]) -> Vec<(f64, Result<RunReport>)> {
    lrs.iter()
        .map(|&lr| {
            let mut cfg = base.clone();
            cfg.step.eta = lr;
            (lr, run(&cfg))
        })
        .collect()
}

#[derive(Debug)]
struct PlateauTracker {
    patience: usize,
    best: f64,
    stale: usize,
}

impl PlateauTracker {
    fn new(patience: usize, initial: f64) -> Self {
        Self {
            patience,
            best: initial,
            stale: 0,
        }
    }

    /// Returns `true` when the learning rate should be halved.
    fn observe(&mut self, loss: f64) -> bool {
        if loss < self.best {
            self.best = loss;
            self.stale = 0;
            return false;
        }
        self.stale += 1;
        if self.stale >= self.patience {
            self.stale = 0;
            return true;
        }
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::BaseKind;
    use crate::ortho::{LambdaPolicy, Method};

    fn small_pca() -> RunConfig {
        let mut cfg = RunConfig::new(
            ProblemSpec::new(ProblemKind::Pca, 3, 8),
            OrthoStepConfig::pogo(0.1).with_base(BaseKind::sgd(0.3)),
        );
        cfg.max_iters = 200;
        cfg
    }

    #[test]
    fn one_iteration_logs_initial_and_one_step() {
        let mut cfg = small_pca();
        cfg.max_iters = 1;
        let rep = run(&cfg).unwrap();
        assert_eq!(rep.records.len(), 2);
        assert_eq!(rep.records[0].iter, 0);
        assert_eq!(rep.records[1].iter, 1);
        assert_eq!(rep.termination, Termination::MaxIters);
        assert!(rep.records[0].lambda_used.is_none());
        assert_eq!(rep.records[1].lambda_used, Some(0.5));
    }

    #[test]
    fn zero_iterations_rejected() {
        let mut cfg = small_pca();
        cfg.max_iters = 0;
        assert!(matches!(run(&cfg), Err(Error::InvalidConfig(_))));
        let mut cfg = small_pca();
        cfg.gap_tol = 0.0;
        assert!(run(&cfg).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = small_pca();
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!((x.iter, x.loss, x.gap, x.max_distance), (y.iter, y.loss, y.gap, y.max_distance));
            assert_eq!((x.lambda_used, x.xi), (y.lambda_used, y.xi));
        }
    }

    #[test]
    fn small_pca_converges_and_stays_feasible() {
        let mut cfg = small_pca();
        cfg.max_iters = 5000;
        let rep = run(&cfg).unwrap();
        assert_eq!(rep.termination, Termination::Converged, "{:?}", rep.last());
        assert!(rep.last().gap.unwrap() <= 1e-6);
        // Trajectory bound in terms of the largest observed step scale.
        let xi = rep.records.iter().filter_map(|r| r.xi).fold(0.0, f64::max);
        assert!(xi < 1.0, "{xi}");
        assert!(rep.max_logged_distance() <= 10.0 * (0.75 + xi * xi / 4.0) * xi.powi(4));
        assert!(rep.last().max_distance <= 1e-12);
        let iters: Vec<_> = rep.records.iter().map(|r| r.iter).collect();
        assert!(iters.windows(2).all(|w| w[0] < w[1]));
        assert!(rep.records.windows(2).all(|w| w[0].time_s <= w[1].time_s));
    }

    #[test]
    fn log_every_keeps_final_record() {
        let mut cfg = small_pca();
        cfg.max_iters = 25;
        cfg.gap_tol = 1e-300;
        cfg.log_every = 10;
        let rep = run(&cfg).unwrap();
        let iters: Vec<_> = rep.records.iter().map(|r| r.iter).collect();
        assert_eq!(iters, vec![0, 10, 20, 25]);
    }

    #[test]
    fn divergence_is_reported_not_raised() {
        let mut cfg = small_pca();
        cfg.step = OrthoStepConfig::new(Method::Slpg, 1e9);
        let rep = run(&cfg).unwrap();
        assert_eq!(rep.termination, Termination::Failed);
        assert!(rep.error.as_ref().unwrap().is_numeric());
        assert!(rep.error_trailer().unwrap().starts_with("error: numeric failure"));
        assert!(!rep.records.is_empty());
    }

    #[test]
    fn chain_without_optimum_has_no_gap() {
        let mut spec = ProblemSpec::chain(4, 3);
        spec.attainable = false;
        let mut cfg = RunConfig::new(spec, OrthoStepConfig::pogo(0.01));
        cfg.max_iters = 5;
        let rep = run(&cfg).unwrap();
        assert!(rep.records.iter().all(|r| r.gap.is_none()));
        assert_eq!(rep.records.len(), 6);
    }

    #[test]
    fn unitary_procrustes_root_policy() {
        let mut cfg = RunConfig::new(
            ProblemSpec::new(ProblemKind::UnitaryProcrustes, 4, 6),
            OrthoStepConfig::pogo(0.001).with_policy(LambdaPolicy::FindRoot),
        );
        cfg.max_iters = 20;
        let rep = run(&cfg).unwrap();
        assert!(rep.max_logged_distance() < 1e-6, "{}", rep.max_logged_distance());
        assert!(rep.last().loss < rep.records[0].loss);
        let real = ProblemSpec::new(ProblemKind::UnitaryProcrustes, 4, 6).with_field(FieldKind::Real64);
        assert!(run(&RunConfig::new(real, OrthoStepConfig::pogo(0.05))).is_err());
    }

    #[test]
    fn sweep_runs_each_rate() {
        let mut cfg = small_pca();
        cfg.max_iters = 3;
        let out = sweep(&cfg, &[0.01, 0.02]);
        assert_eq!(out.len(), 2);
        assert_eq!(out[1].0, 0.02);
        let a = out[0].1.as_ref().unwrap();
        let b = out[1].1.as_ref().unwrap();
        assert_eq!(a.records[0].loss, b.records[0].loss);
        assert_ne!(a.last().loss, b.last().loss);
        assert!(sweep(&cfg, &[-1.0])[0].1.is_err());
    }

    #[test]
    fn plateau_halving() {
        let mut t = PlateauTracker::new(2, 1.0);
        assert!(!t.observe(0.5));
        assert!(!t.observe(0.6));
        assert!(t.observe(0.7));
        assert!(!t.observe(0.7));
    }
}
