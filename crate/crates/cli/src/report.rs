//! JSON shapes written to stdout. Bump `SCHEMA_VERSION` on any change to
//! field names or meanings.

use serde::Serialize;

use psrf_core::{BatchConfig, EssThreshold};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Serialize)]
pub struct BatchReport {
    pub policy: String,
    pub batch_size: usize,
    pub batches: usize,
    pub reduced_batch_size: usize,
}

impl From<&BatchConfig> for BatchReport {
    fn from(bc: &BatchConfig) -> Self {
        BatchReport {
            policy: bc.policy.to_string(),
            batch_size: bc.batch_size,
            batches: bc.batches,
            reduced_batch_size: bc.reduced_batch_size(),
        }
    }
}

#[derive(Serialize)]
pub struct ThresholdReport {
    pub schema_version: u32,
    pub alpha: f64,
    pub epsilon: f64,
    pub p: usize,
    pub m: usize,
    pub min_ess: f64,
    pub min_ess_ceil: u64,
    pub delta: f64,
}

impl From<&EssThreshold> for ThresholdReport {
    fn from(t: &EssThreshold) -> Self {
        ThresholdReport {
            schema_version: SCHEMA_VERSION,
            alpha: t.alpha,
            epsilon: t.epsilon,
            p: t.p,
            m: t.m,
            min_ess: t.min_ess,
            min_ess_ceil: t.min_ess_ceil,
            delta: t.delta,
        }
    }
}

#[derive(Serialize)]
pub struct DiagnoseReport {
    pub schema_version: u32,
    pub statistic: &'static str,
    pub reduction: &'static str,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub burnin: usize,
    /// Multivariate PSRF (the univariate one when `p = 1`).
    pub psrf: f64,
    pub component_psrfs: Vec<f64>,
    /// Lugsail determinant-based ESS.
    pub ess: f64,
    pub min_ess: f64,
    pub min_ess_ceil: u64,
    pub delta: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub min_effort: usize,
    pub converged: bool,
    pub batch: BatchReport,
    pub psd_repaired: bool,
    pub between_rank_deficient: bool,
}

#[derive(Serialize)]
pub struct EssReport {
    pub schema_version: u32,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub burnin: usize,
    pub ess: f64,
    pub min_ess: f64,
    pub min_ess_ceil: u64,
    pub enough: bool,
    pub batch: BatchReport,
}

#[derive(Serialize)]
pub struct SimulateReport {
    pub schema_version: u32,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    pub seed: u64,
    pub files: Vec<String>,
    pub acceptance_rates: Vec<f64>,
}

#[derive(Serialize)]
pub struct MonitorReport {
    pub schema_version: u32,
    pub reason: &'static str,
    pub termination_n: usize,
    pub checkpoints: usize,
    pub psrf: f64,
    pub ess: f64,
    pub delta: f64,
    pub min_effort: usize,
    pub means: Vec<f64>,
    pub acceptance_rates: Vec<f64>,
}

#[derive(Serialize)]
pub struct ConfigurationSummary {
    pub configuration: String,
    pub statistic: &'static str,
    pub delta: f64,
    pub min_effort: usize,
    pub replications: usize,
    pub threshold_met: usize,
    pub termination_mean: f64,
    pub termination_median: f64,
    pub termination_var: f64,
    pub mean_of_means: Vec<f64>,
    pub sd_of_means: Vec<f64>,
}

#[derive(Serialize)]
pub struct ReproduceReport {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub outdir: String,
    pub configurations: Vec<ConfigurationSummary>,
}
