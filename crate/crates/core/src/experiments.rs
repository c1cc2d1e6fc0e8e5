//! Built-in studies: sampler and monitor settings for the t₅, AR(1),
//! bimodal and logistic-regression examples, and replication drivers.

use std::fmt::{self, Write as _};
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ess::{delta_threshold, EssThreshold};
use crate::mcvar::{BatchConfig, BatchPolicy};
use crate::monitor::{run_monitor, MonitorPlan, Schedule, Statistic, Termination, TraceEntry};
use crate::psrf::{psrf_classic, psrf_lugsail};
use crate::samplers::{
    ar1_generate, derive_seed, LogisticModel, Mixture, SamplerSpec, Starts, Target,
};

pub const ALPHA: f64 = 0.05;
pub const EPSILON: f64 = 0.10;

pub const T5_PROPOSAL_VAR: f64 = 2.6 * 2.6;
pub const AR1_RHO: f64 = 0.95;
pub const AR1_NU: f64 = 1.0;
/// Laplace-scaled proposal factor `2.38² / p` for the 10-dimensional
/// logistic posterior.
pub const TITANIC_PROPOSAL_VAR: f64 = 2.38 * 2.38 / 10.0;
pub const TITANIC_PRIOR_VAR: f64 = 100.0;
/// Starts are spread over `±3` posterior standard deviations.
pub const TITANIC_START_SPREAD: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    T5,
    Ar1,
    Bimodal,
    Titanic,
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "t5" => Ok(Experiment::T5),
            "ar1" => Ok(Experiment::Ar1),
            "bimodal" => Ok(Experiment::Bimodal),
            "titanic" => Ok(Experiment::Titanic),
            other => Err(Error::InvalidParameter(format!(
                "unknown experiment {other:?} (expected t5, ar1, bimodal or titanic)"
            ))),
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::T5 => "t5",
            Experiment::Ar1 => "ar1",
            Experiment::Bimodal => "bimodal",
            Experiment::Titanic => "titanic",
        })
    }
}

/// One sampler/plan pairing of a study. The sampler seed is replaced per
/// replication.
#[derive(Debug, Clone)]
pub struct Configuration {
    pub label: String,
    pub spec: SamplerSpec,
    pub plan: MonitorPlan,
}

/// Threshold for a hand-picked cutoff. The implied minimum ESS for such
/// cutoffs is tiny, so no extra minimum effort is imposed.
fn ad_hoc(delta: f64, p: usize, m: usize) -> Result<(EssThreshold, usize)> {
    Ok((EssThreshold::from_delta(delta, ALPHA, p, m)?, 1))
}

fn principled(p: usize, m: usize) -> Result<(EssThreshold, usize)> {
    let th = delta_threshold(ALPHA, EPSILON, p, m)?;
    Ok((th, th.min_ess_ceil as usize))
}

pub fn t5_spec(seed: u64) -> SamplerSpec {
    SamplerSpec::new(
        Target::StudentT { df: 5.0 },
        T5_PROPOSAL_VAR,
        3,
        Starts::StudentT { df: 2, scale: 1.0 },
        seed,
    )
}

/// Three cutoffs (1.1, 1.01 and `δ_.1`) checked every 50 iterations.
pub fn t5_configurations() -> Result<Vec<Configuration>> {
    let m = 3;
    [
        ("delta_1.1", ad_hoc(1.1, 1, m)?),
        ("delta_1.01", ad_hoc(1.01, 1, m)?),
        ("delta_eps_0.10", principled(1, m)?),
    ]
    .into_iter()
    .map(|(label, (th, min_effort))| {
        Ok(Configuration {
            label: label.into(),
            spec: t5_spec(0),
            plan: MonitorPlan::new(th)
                .with_schedule(Schedule::FixedIncrement(50))
                .with_min_effort(min_effort)
                .with_max_iterations(1_000_000)
                .with_statistic(Statistic::LugsailUni),
        })
    })
    .collect()
}

pub fn ar1_spec(m: usize, seed: u64) -> SamplerSpec {
    SamplerSpec::new(
        Target::Ar1 {
            rho: AR1_RHO,
            nu: AR1_NU,
        },
        1.0,
        m,
        Starts::Stationary,
        seed,
    )
}

/// `R̂_L` against `R̂` at `δ_.10` with five chains, checked every 500
/// iterations.
pub fn ar1_configurations() -> Result<Vec<Configuration>> {
    let m = 5;
    let (th, min_effort) = principled(1, m)?;
    let plan = MonitorPlan::new(th)
        .with_schedule(Schedule::FixedIncrement(500))
        .with_min_effort(min_effort)
        .with_max_iterations(500_000);
    Ok(vec![
        Configuration {
            label: "lugsail".into(),
            spec: ar1_spec(m, 0),
            plan: plan.clone().with_statistic(Statistic::LugsailUni),
        },
        Configuration {
            label: "classic".into(),
            spec: ar1_spec(m, 0),
            plan: plan.with_statistic(Statistic::Classic),
        },
    ])
}

/// Mixture example with proposal variance `h`. The large-step runs start
/// overdispersed around the mixture mean; the small-step runs start inside
/// the first mode.
pub fn bimodal_spec(h: f64, seed: u64) -> SamplerSpec {
    let starts = if h >= 5.0 {
        Starts::Normal {
            mean: 5.0,
            var: 100.0,
        }
    } else {
        Starts::Normal {
            mean: 0.0,
            var: 2.0,
        }
    };
    SamplerSpec::new(
        Target::Bimodal(Mixture::bimodal_example()),
        h,
        5,
        starts,
        seed,
    )
}

pub fn bimodal_configurations() -> Result<Vec<Configuration>> {
    let (th, min_effort) = principled(1, 5)?;
    // Stuck small-step runs stop near 4k iterations; one that escapes to the
    // second mode is cut off well before the large-step runs' cap.
    [("h_10", 10.0, 1_000_000), ("h_1", 1.0, 20_000)]
        .into_iter()
        .map(|(label, h, cap)| {
            Ok(Configuration {
                label: label.into(),
                spec: bimodal_spec(h, 0),
                plan: MonitorPlan::new(th)
                    .with_schedule(Schedule::FixedIncrement(100))
                    .with_min_effort(min_effort)
                    .with_max_iterations(cap)
                    .with_statistic(Statistic::LugsailUni),
            })
        })
        .collect()
}

/// Random-walk sampler for the logistic posterior: proposal covariance is a
/// multiple of the Laplace covariance at the mode, starts are dispersed
/// around the mode.
pub fn titanic_spec(model: Arc<LogisticModel>, seed: u64) -> Result<SamplerSpec> {
    let (mode, cov) = model.posterior_mode()?;
    let sd = cov.diag().iter().map(|v| v.sqrt()).collect();
    Ok(SamplerSpec::new(
        Target::Logistic(model),
        TITANIC_PROPOSAL_VAR,
        5,
        Starts::Dispersed {
            center: mode,
            sd,
            spread: TITANIC_START_SPREAD,
        },
        seed,
    )
    .with_proposal_shape(cov))
}

/// `δ = 1.1` against `δ_.10` for the determinant-based `R̂^p_L`, growing the
/// chains by 10% per checkpoint.
pub fn titanic_configurations(model: Arc<LogisticModel>) -> Result<Vec<Configuration>> {
    let spec = titanic_spec(model, 0)?;
    let p = spec.dim();
    let m = spec.m;
    [
        ("delta_1.1", ad_hoc(1.1, p, m)?),
        ("delta_eps_0.10", principled(p, m)?),
    ]
    .into_iter()
    .map(|(label, (th, min_effort))| {
        Ok(Configuration {
            label: label.into(),
            spec: spec.clone(),
            plan: MonitorPlan::new(th)
                .with_min_effort(min_effort)
                .with_max_iterations(1_000_000)
                .with_statistic(Statistic::LugsailMultiDet),
        })
    })
    .collect()
}

/// Outcome of one monitored run.
#[derive(Debug, Clone, Serialize)]
pub struct Replication {
    pub rep: usize,
    pub seed: u64,
    pub termination_n: usize,
    /// Pooled sample mean at termination, per component.
    pub means: Vec<f64>,
    pub reason: Termination,
    pub final_psrf: f64,
    pub trace: Vec<TraceEntry>,
}

/// Runs `reps` independent monitored replications in parallel. Replication
/// `r` uses seed `derive_seed(seed, r)`.
pub fn replicate(config: &Configuration, reps: usize, seed: u64) -> Result<Vec<Replication>> {
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let rep_seed = derive_seed(seed, rep as u64);
            let spec = config.spec.clone().with_seed(rep_seed);
            let trace = run_monitor(&spec, &config.plan)?;
            Ok(Replication {
                rep,
                seed: rep_seed,
                termination_n: trace.termination_n(),
                means: trace.chains.pooled_mean(),
                reason: trace.reason,
                final_psrf: trace.last().psrf,
                trace: trace.entries,
            })
        })
        .collect()
}

/// Across-replication summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudySummary {
    pub replications: usize,
    pub termination_mean: f64,
    pub termination_median: f64,
    pub termination_var: f64,
    pub threshold_met: usize,
    pub mean_of_means: Vec<f64>,
    pub sd_of_means: Vec<f64>,
}

pub fn summarize_replications(reps: &[Replication]) -> Result<StudySummary> {
    if reps.len() < 2 {
        return Err(Error::InvalidParameter(
            "a summary needs at least two replications".into(),
        ));
    }
    let ns: Vec<f64> = reps.iter().map(|r| r.termination_n as f64).collect();
    let p = reps[0].means.len();
    let (mean_of_means, sd_of_means) = (0..p)
        .map(|k| {
            let xs: Vec<f64> = reps.iter().map(|r| r.means[k]).collect();
            (mean(&xs), sample_var(&xs).sqrt())
        })
        .unzip();
    Ok(StudySummary {
        replications: reps.len(),
        termination_mean: mean(&ns),
        termination_median: median(&ns),
        termination_var: sample_var(&ns),
        threshold_met: reps
            .iter()
            .filter(|r| r.reason == Termination::ThresholdMet)
            .count(),
        mean_of_means,
        sd_of_means,
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_var(xs: &[f64]) -> f64 {
    let mu = mean(xs);
    xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

pub fn median(xs: &[f64]) -> f64 {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// `rep,termination_n,mean_1..mean_p,converged_reason`, where the reason is
/// coded 1 for threshold met and 0 for cap hit so that every column is
/// numeric.
pub fn format_replications_csv(reps: &[Replication]) -> String {
    let p = reps.first().map_or(0, |r| r.means.len());
    let mut out = String::from("rep,termination_n");
    for k in 1..=p {
        let _ = write!(out, ",mean_{k}");
    }
    out.push_str(",converged_reason\n");
    for r in reps {
        let _ = write!(out, "{},{}", r.rep, r.termination_n);
        for v in &r.means {
            let _ = write!(out, ",{v}");
        }
        let _ = writeln!(out, ",{}", (r.reason == Termination::ThresholdMet) as u8);
    }
    out
}

/// Classic and lugsail PSRF on AR(1) chains of fixed length, one pair per
/// replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FixedLengthPair {
    pub classic: f64,
    pub lugsail: f64,
}

pub fn ar1_fixed_length_study(
    m: usize,
    n: usize,
    reps: usize,
    seed: u64,
    batch: BatchPolicy,
) -> Result<Vec<FixedLengthPair>> {
    let bc = BatchConfig::resolve(batch, n)?;
    (0..reps)
        .into_par_iter()
        .map(|rep| {
            let cs = ar1_generate(&ar1_spec(m, derive_seed(seed, rep as u64)), n)?;
            Ok(FixedLengthPair {
                classic: psrf_classic(&cs)?.value,
                lugsail: psrf_lugsail(&cs, &bc)?.value,
            })
        })
        .collect()
}
