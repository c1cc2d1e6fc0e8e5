//! Potential scale reduction factors.
//!
//! Every statistic here has the form `sqrt(((n - 1) + r) / n)` where `r`
//! compares a Monte Carlo variance estimate `V` (between-chain `B` or lugsail
//! `T̂_L`) with the pooled within-chain covariance `S`:
//!
//! * univariate: `r = V / s²`
//! * determinant: `r = det(S⁻¹ V)^{1/p}` (geometric mean of the generalized
//!   eigenvalues)
//! * max-eigenvalue: `r = λ_max(S⁻¹ V)`
//!
//! The df-corrected and `(m+1)/m`-scaled variants found in some older
//! software are intentionally not provided.

use serde::Serialize;

use crate::chains::{summarize, ChainSet, ChainSummary};
use crate::error::{Error, Result};
use crate::linalg::{gen_eigenvalues, max_gen_eig, Cholesky, SymMatrix};
use crate::mcvar::{
    between_chain_from, replicated_lugsail, BatchConfig, LugsailParts, VarianceEstimate,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticKind {
    /// Between-chain variance `B`.
    Classic,
    /// Replicated lugsail batch means.
    Lugsail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Reduction {
    Determinant,
    MaxEigenvalue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "scope")]
pub enum Scope {
    Univariate { component: usize },
    MultivariateDet,
    MultivariateMaxEig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsrfReport {
    pub kind: StatisticKind,
    pub scope: Scope,
    pub value: f64,
    /// The variance-ratio term `r`.
    pub ratio: f64,
    pub m: usize,
    pub n: usize,
    pub p: usize,
    /// Pooled within-chain covariance `S` (`s²` for one component).
    pub within: SymMatrix,
    /// `B` or `T̂_L`, after PSD repair when that was needed.
    pub correction: SymMatrix,
    /// `Σ̂` or `Σ̂_L`.
    pub sigma: SymMatrix,
    pub batch: Option<BatchConfig>,
    pub lugsail_parts: Option<LugsailParts>,
    pub psd_repaired: bool,
    /// `B` has rank at most `m - 1`; set when that is below `p`.
    pub between_rank_deficient: bool,
    /// Univariate statistics of the same kind for each component (`p > 1`).
    pub component_values: Vec<f64>,
}

impl PsrfReport {
    /// ESS implied by the ratio term, `m n / r`.
    pub fn implied_ess(&self) -> f64 {
        (self.m * self.n) as f64 / self.ratio
    }
}

fn psrf_from_ratio(n: usize, ratio: f64) -> f64 {
    (((n - 1) as f64 + ratio) / n as f64).sqrt()
}

fn correction_estimate(
    cs: &ChainSet,
    summary: &ChainSummary,
    kind: StatisticKind,
    bc: &BatchConfig,
) -> Result<VarianceEstimate> {
    match kind {
        StatisticKind::Classic => between_chain_from(summary),
        StatisticKind::Lugsail => replicated_lugsail(cs, bc)?.repaired(),
    }
}

fn require_univariate(cs: &ChainSet) -> Result<()> {
    if cs.p() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            found: cs.p(),
        });
    }
    Ok(())
}

/// Classic univariate `R̂ = sqrt(σ̂² / s²)`; needs `m >= 2`.
pub fn psrf_classic(cs: &ChainSet) -> Result<PsrfReport> {
    require_univariate(cs)?;
    if cs.m() < 2 {
        return Err(Error::TooFewChains {
            what: "classic PSRF",
            needed: 2,
            found: cs.m(),
        });
    }
    univariate(cs, StatisticKind::Classic, None)
}

/// Lugsail univariate `R̂_L = sqrt(σ̂²_L / s²)`; works for a single chain.
pub fn psrf_lugsail(cs: &ChainSet, bc: &BatchConfig) -> Result<PsrfReport> {
    require_univariate(cs)?;
    univariate(cs, StatisticKind::Lugsail, Some(bc))
}

fn univariate(cs: &ChainSet, kind: StatisticKind, bc: Option<&BatchConfig>) -> Result<PsrfReport> {
    let summary = summarize(cs)?;
    let s2 = summary.pooled_cov.as_scalar().expect("univariate");
    if !(s2 > 0.0) {
        return Err(Error::DegenerateVariance);
    }
    let est = match bc {
        Some(bc) => correction_estimate(cs, &summary, kind, bc)?,
        None => between_chain_from(&summary)?,
    };
    let v = est.value.as_scalar().expect("univariate");
    let ratio = v / s2;
    let sigma = summary.pooled_cov.combine(
        (cs.n() - 1) as f64 / cs.n() as f64,
        &est.value,
        1.0 / cs.n() as f64,
    )?;
    Ok(PsrfReport {
        kind,
        scope: Scope::Univariate { component: 0 },
        value: psrf_from_ratio(cs.n(), ratio),
        ratio,
        m: cs.m(),
        n: cs.n(),
        p: 1,
        within: summary.pooled_cov,
        correction: est.value,
        sigma,
        batch: est.batch,
        lugsail_parts: est.lugsail_parts,
        psd_repaired: est.psd_repaired,
        between_rank_deficient: false,
        component_values: Vec::new(),
    })
}

/// Maximum-eigenvalue `R̂^p = sqrt((n-1)/n + λ_max(S⁻¹B)/n)`.
pub fn psrf_multivariate_classic(cs: &ChainSet) -> Result<PsrfReport> {
    psrf_multivariate(cs, StatisticKind::Classic, Reduction::MaxEigenvalue, None)
}

/// `R̂^p_L = sqrt((n-1)/n + det(S⁻¹T̂_L)^{1/p}/n)`.
///
/// With `p = 1` this is exactly [`psrf_lugsail`].
pub fn psrf_multivariate_lugsail(cs: &ChainSet, bc: &BatchConfig) -> Result<PsrfReport> {
    psrf_multivariate(cs, StatisticKind::Lugsail, Reduction::Determinant, Some(bc))
}

/// Any statistic/reduction pairing. `bc` is required for lugsail.
pub fn psrf_multivariate(
    cs: &ChainSet,
    kind: StatisticKind,
    reduction: Reduction,
    bc: Option<&BatchConfig>,
) -> Result<PsrfReport> {
    if kind == StatisticKind::Classic && cs.m() < 2 {
        return Err(Error::TooFewChains {
            what: "classic PSRF",
            needed: 2,
            found: cs.m(),
        });
    }
    let bc = match (kind, bc) {
        (StatisticKind::Lugsail, None) => {
            return Err(Error::InvalidParameter(
                "lugsail PSRF needs a batch configuration".into(),
            ))
        }
        (_, bc) => bc,
    };
    if cs.p() == 1 {
        return univariate(cs, kind, bc);
    }

    let summary = summarize(cs)?;
    let p = cs.p();
    let chol_s = Cholesky::factor(&summary.pooled_cov)?;
    let est = match bc {
        Some(bc) => correction_estimate(cs, &summary, kind, bc)?,
        None => between_chain_from(&summary)?,
    };
    let ratio = match (reduction, kind) {
        (Reduction::MaxEigenvalue, _) => max_gen_eig(&summary.pooled_cov, &est.value)?,
        (Reduction::Determinant, StatisticKind::Lugsail) => {
            let ld_t = Cholesky::factor(&est.value)?.log_det();
            ((ld_t - chol_s.log_det()) / p as f64).exp()
        }
        (Reduction::Determinant, StatisticKind::Classic) => {
            // B is often singular; use the generalized spectrum directly.
            let eig = gen_eigenvalues(&summary.pooled_cov, &est.value)?;
            let mean_log = eig.iter().map(|l| l.max(0.0).ln()).sum::<f64>() / p as f64;
            mean_log.exp()
        }
    };
    let n = cs.n();
    let sigma =
        summary
            .pooled_cov
            .combine((n - 1) as f64 / n as f64, &est.value, 1.0 / n as f64)?;

    let component_values = (0..p)
        .map(|k| {
            cs.component(k)
                .and_then(|c| univariate(&c, kind, bc))
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
        })
        .collect();

    Ok(PsrfReport {
        kind,
        scope: match reduction {
            Reduction::Determinant => Scope::MultivariateDet,
            Reduction::MaxEigenvalue => Scope::MultivariateMaxEig,
        },
        value: psrf_from_ratio(n, ratio),
        ratio,
        m: cs.m(),
        n,
        p,
        within: summary.pooled_cov,
        correction: est.value,
        sigma,
        batch: est.batch,
        lugsail_parts: est.lugsail_parts,
        psd_repaired: est.psd_repaired,
        between_rank_deficient: kind == StatisticKind::Classic && cs.m() <= p,
        component_values,
    })
}

/// Univariate statistics for every component of a chain set.
pub fn component_psrfs(
    cs: &ChainSet,
    kind: StatisticKind,
    bc: Option<&BatchConfig>,
) -> Result<Vec<PsrfReport>> {
    (0..cs.p())
        .map(|k| {
            let c = cs.component(k)?;
            let mut r = match kind {
                StatisticKind::Classic => psrf_classic(&c)?,
                StatisticKind::Lugsail => psrf_lugsail(
                    &c,
                    bc.ok_or_else(|| {
                        Error::InvalidParameter("lugsail PSRF needs a batch configuration".into())
                    })?,
                )?,
            };
            r.scope = Scope::Univariate { component: k };
            Ok(r)
        })
        .collect()
}
