//! Sequential stopping: grow chains on a checkpoint schedule until the
//! chosen PSRF drops to the cutoff `δ` after a minimum simulation effort.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::chains::{assemble, ChainSet};
use crate::error::{Error, Result};
use crate::ess::EssThreshold;
use crate::mcvar::{BatchConfig, BatchPolicy};
use crate::psrf::{psrf_lugsail, psrf_multivariate, PsrfReport, Reduction, StatisticKind};
use crate::samplers::{SamplerSpec, Simulation};

/// Checkpoint spacing, in per-chain iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `k, 2k, 3k, ...`
    FixedIncrement(usize),
    /// `n₀, ⌈n₀ r⌉, ⌈⌈n₀ r⌉ r⌉, ...`, always advancing by at least one.
    Geometric { start: usize, rate: f64 },
}

impl Schedule {
    pub fn first(&self) -> usize {
        match *self {
            Schedule::FixedIncrement(k) => k,
            Schedule::Geometric { start, .. } => start,
        }
    }

    pub fn next(&self, n: usize) -> usize {
        match *self {
            Schedule::FixedIncrement(k) => n.saturating_add(k),
            Schedule::Geometric { rate, .. } => {
                // Absorb rounding so that 50 · 1.1 gives 55, not 56.
                let target = n as f64 * rate;
                let next = if (target - target.round()).abs() < 1e-9 * target {
                    target.round()
                } else {
                    target.ceil()
                };
                (next as usize).max(n.saturating_add(1))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Schedule::FixedIncrement(k) if k < 2 => Err(Error::InvalidParameter(
                "fixed increment must be at least 2".into(),
            )),
            Schedule::Geometric { start, rate }
                if start < 2 || !(rate > 1.0) || !rate.is_finite() =>
            {
                Err(Error::InvalidParameter(format!(
                    "geometric schedule needs start >= 2 and rate > 1, got {start}, {rate}"
                )))
            }
            _ => Ok(()),
        }
    }
}

/// Which PSRF drives termination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// Univariate `R̂_L`; the chains must have one component.
    LugsailUni,
    /// `R̂^p_L` via determinants (equal to `R̂_L` when `p = 1`).
    LugsailMultiDet,
    /// Lugsail correction reduced by the largest generalized eigenvalue.
    LugsailMultiMaxEig,
    /// Between-chain `R̂`; determinant reduction when `p > 1`.
    Classic,
    /// Between-chain `R̂` reduced by the largest generalized eigenvalue.
    MultiMaxEig,
}

impl Statistic {
    pub fn kind(&self) -> StatisticKind {
        match self {
            Statistic::Classic | Statistic::MultiMaxEig => StatisticKind::Classic,
            _ => StatisticKind::Lugsail,
        }
    }

    pub fn reduction(&self) -> Reduction {
        match self {
            Statistic::LugsailMultiMaxEig | Statistic::MultiMaxEig => Reduction::MaxEigenvalue,
            _ => Reduction::Determinant,
        }
    }

    pub fn from_parts(kind: StatisticKind, reduction: Reduction) -> Self {
        match (kind, reduction) {
            (StatisticKind::Lugsail, Reduction::Determinant) => Statistic::LugsailMultiDet,
            (StatisticKind::Lugsail, Reduction::MaxEigenvalue) => Statistic::LugsailMultiMaxEig,
            (StatisticKind::Classic, Reduction::Determinant) => Statistic::Classic,
            (StatisticKind::Classic, Reduction::MaxEigenvalue) => Statistic::MultiMaxEig,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonitorPlan {
    pub threshold: EssThreshold,
    pub schedule: Schedule,
    /// Convergence is never declared below this many iterations per chain.
    pub min_effort: usize,
    /// Iterations per chain after which the run stops regardless.
    pub max_iterations: usize,
    pub statistic: Statistic,
    pub batch: BatchPolicy,
    /// Leading fraction of each chain excluded from evaluation.
    pub burnin_fraction: f64,
}

pub const DEFAULT_MAX_ITERATIONS: usize = 10_000_000;

impl MonitorPlan {
    /// Lugsail statistic, geometric growth by 10% from 50, minimum effort
    /// `⌈M⌉`, a cap of ten million iterations per chain and no burn-in.
    pub fn new(threshold: EssThreshold) -> Self {
        MonitorPlan {
            threshold,
            schedule: Schedule::Geometric {
                start: 50,
                rate: 1.1,
            },
            min_effort: (threshold.min_ess_ceil as usize).max(1),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            statistic: Statistic::LugsailMultiDet,
            batch: BatchPolicy::Sqrt,
            burnin_fraction: 0.0,
        }
    }

    pub fn with_schedule(mut self, schedule: Schedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_min_effort(mut self, min_effort: usize) -> Self {
        self.min_effort = min_effort;
        self
    }

    pub fn with_max_iterations(mut self, cap: usize) -> Self {
        self.max_iterations = cap;
        self
    }

    pub fn with_statistic(mut self, statistic: Statistic) -> Self {
        self.statistic = statistic;
        self
    }

    pub fn with_batch(mut self, batch: BatchPolicy) -> Self {
        self.batch = batch;
        self
    }

    pub fn with_burnin_fraction(mut self, fraction: f64) -> Self {
        self.burnin_fraction = fraction;
        self
    }

    pub fn delta(&self) -> f64 {
        self.threshold.delta
    }

    pub fn validate(&self) -> Result<()> {
        self.schedule.validate()?;
        if self.min_effort < 1 {
            return Err(Error::InvalidParameter(
                "minimum effort must be at least 1".into(),
            ));
        }
        if self.max_iterations < self.min_effort || self.max_iterations < self.schedule.first() {
            return Err(Error::InvalidParameter(format!(
                "cap {} is below the minimum effort {} or the first checkpoint {}",
                self.max_iterations,
                self.min_effort,
                self.schedule.first()
            )));
        }
        if !(0.0..1.0).contains(&self.burnin_fraction) {
            return Err(Error::InvalidParameter(format!(
                "burn-in fraction must lie in [0, 1), got {}",
                self.burnin_fraction
            )));
        }
        Ok(())
    }

    /// Iterations dropped from the front of each chain of length `n`.
    pub fn burnin(&self, n: usize) -> usize {
        (self.burnin_fraction * n as f64).floor() as usize
    }
}

/// One evaluation of a plan on fixed chains.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnosis {
    /// `None` when the statistic is undefined (zero or singular within-chain
    /// covariance, unrepairable correction); such chains never count as
    /// converged.
    pub report: Option<PsrfReport>,
    pub psrf: f64,
    pub ess: f64,
    /// Per-chain length the plan was evaluated at (before burn-in).
    pub n: usize,
    pub converged: bool,
}

/// Evaluates `plan` once on `cs`, without growing anything.
///
/// Converged means `psrf ≤ δ`, `n ≥ min_effort` and no PSD repair of the
/// lugsail estimate was needed.
pub fn diagnose_static(cs: &ChainSet, plan: &MonitorPlan) -> Result<Diagnosis> {
    plan.validate()?;
    let n = cs.n();
    let skip = plan.burnin(n);
    let evaluated;
    let cs_eval = if skip == 0 {
        cs
    } else {
        let chains: Vec<_> = (0..cs.m()).map(|i| cs.chain_matrix(i)).collect();
        evaluated = assemble(&chains, skip)?;
        &evaluated
    };
    let report = match evaluate(cs_eval, plan) {
        Ok(r) => Some(r),
        Err(e) if e.is_degenerate() => None,
        Err(e) => return Err(e),
    };
    let (psrf, ess, converged) = match &report {
        Some(r) => (
            r.value,
            r.implied_ess(),
            r.value <= plan.delta() && n >= plan.min_effort && !r.psd_repaired,
        ),
        None => (f64::NAN, f64::NAN, false),
    };
    Ok(Diagnosis {
        report,
        psrf,
        ess,
        n,
        converged,
    })
}

fn evaluate(cs: &ChainSet, plan: &MonitorPlan) -> Result<PsrfReport> {
    let kind = plan.statistic.kind();
    let bc = match kind {
        StatisticKind::Lugsail => Some(BatchConfig::resolve(plan.batch, cs.n())?),
        StatisticKind::Classic => None,
    };
    match plan.statistic {
        Statistic::LugsailUni => psrf_lugsail(cs, bc.as_ref().expect("lugsail")),
        s => psrf_multivariate(cs, kind, s.reduction(), bc.as_ref()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceEntry {
    pub n: usize,
    pub psrf: f64,
    pub ess: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ThresholdMet,
    CapHit,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::ThresholdMet => "threshold_met",
            Termination::CapHit => "cap_hit",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MonitorTrace {
    pub entries: Vec<TraceEntry>,
    pub chains: ChainSet,
    pub reason: Termination,
    pub acceptance_rates: Vec<f64>,
}

impl MonitorTrace {
    /// Iterations per chain at termination.
    pub fn termination_n(&self) -> usize {
        self.chains.n()
    }

    pub fn last(&self) -> &TraceEntry {
        self.entries
            .last()
            .expect("a trace has at least one checkpoint")
    }
}

/// Runs the sampler checkpoint by checkpoint until the plan is satisfied or
/// the cap is reached. Chains are extended in place, never regenerated.
pub fn run_monitor(spec: &SamplerSpec, plan: &MonitorPlan) -> Result<MonitorTrace> {
    plan.validate()?;
    let mut sim = Simulation::new(spec.clone())?;
    let mut entries = Vec::new();
    let mut n = plan.schedule.first().min(plan.max_iterations);
    loop {
        sim.extend_to(n);
        let cs = sim.chain_set()?;
        let d = diagnose_static(&cs, plan)?;
        entries.push(TraceEntry {
            n,
            psrf: d.psrf,
            ess: d.ess,
            converged: d.converged,
        });
        let reason = if d.converged {
            Some(Termination::ThresholdMet)
        } else if n >= plan.max_iterations {
            Some(Termination::CapHit)
        } else {
            None
        };
        if let Some(reason) = reason {
            return Ok(MonitorTrace {
                entries,
                chains: cs,
                reason,
                acceptance_rates: sim.acceptance_rates(),
            });
        }
        n = plan.schedule.next(n).min(plan.max_iterations);
    }
}

/// `n,psrf,ess,converged` with one row per checkpoint; `converged` is 0/1
/// so the file stays purely numeric.
pub fn format_trace_csv(entries: &[TraceEntry]) -> String {
    let mut out = String::from("n,psrf,ess,converged\n");
    for e in entries {
        let _ = writeln!(out, "{},{},{},{}", e.n, e.psrf, e.ess, e.converged as u8);
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, entries: &[TraceEntry]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_trace_csv(entries)).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
