//! Convergence diagnostics for multiple Markov chains: classic and lugsail
//! potential scale reduction factors, batch-means variance estimation,
//! effective sample size thresholds and a sequential stopping monitor,
//! together with the samplers used by the built-in studies.

// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chains;
pub mod error;
pub mod ess;
pub mod experiments;
pub mod linalg;
pub mod mcvar;
pub mod monitor;
pub mod psrf;
pub mod samplers;

pub use chains::{assemble, load_chain_csv, parse_chain_csv, ChainMatrix, ChainSet};
pub use error::{Error, Result};
pub use ess::{chi2_quantile, delta_threshold, ess_estimate, min_ess, EssThreshold};
pub use mcvar::{BatchConfig, BatchPolicy};
pub use monitor::{diagnose_static, run_monitor, MonitorPlan, MonitorTrace, Schedule, Statistic};
pub use psrf::{
    psrf_classic, psrf_lugsail, psrf_multivariate, PsrfReport, Reduction, StatisticKind,
};
