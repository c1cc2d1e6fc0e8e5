//! Estimators of the Monte Carlo variance `n Var(X̄)` and of the target
//! variance built from them.
//!
//! Batch means use the first `a·b` iterations of each chain when `b` does
//! not divide `n`, but the grand mean and the within-chain covariance always
//! use all `n` iterations so that they agree with the reported means.
//! The lugsail estimator combines batch sizes `b` and `max(1, ⌊b/3⌋)`; each
//! batch count is `⌊n / size⌋`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::chains::{summarize, ChainSet, ChainSummary};
use crate::error::{Error, Result};
use crate::linalg::{repair_psd, SymMatrix};

/// Eigenvalues below this fraction of the trace are lifted by PSD repair.
pub const PSD_REPAIR_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchPolicy {
    /// `b = ⌊n^{1/2}⌋`
    #[default]
    Sqrt,
    /// `b = ⌊n^{1/3}⌋`
    CubeRoot,
    Explicit(usize),
}

impl FromStr for BatchPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "sqrt" => Ok(BatchPolicy::Sqrt),
            "cube" | "cuberoot" => Ok(BatchPolicy::CubeRoot),
            other => match other.parse::<usize>() {
                Ok(b) if b >= 1 => Ok(BatchPolicy::Explicit(b)),
                _ => Err(Error::InvalidParameter(format!(
                    "batch policy must be sqrt, cube or a positive integer, got {other:?}"
                ))),
            },
        }
    }
}

impl fmt::Display for BatchPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BatchPolicy::Sqrt => f.write_str("sqrt"),
            BatchPolicy::CubeRoot => f.write_str("cube"),
            BatchPolicy::Explicit(b) => write!(f, "{b}"),
        }
    }
}

/// Integer `⌊n^{1/k}⌋` without floating-point edge errors.
fn integer_root(n: usize, k: u32) -> usize {
    let mut r = (n as f64).powf(1.0 / k as f64).round() as usize;
    while r > 0 && r.pow(k) > n {
        r -= 1;
    }
    while (r + 1).pow(k) <= n {
        r += 1;
    }
    r.max(1)
}

/// A batch size resolved against a chain length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BatchConfig {
    pub policy: BatchPolicy,
    /// Batch size `b`.
    pub batch_size: usize,
    /// Batch count `a = ⌊n / b⌋`.
    pub batches: usize,
}

impl BatchConfig {
    pub fn resolve(policy: BatchPolicy, n: usize) -> Result<Self> {
        let b = match policy {
            BatchPolicy::Sqrt => integer_root(n, 2),
            BatchPolicy::CubeRoot => integer_root(n, 3),
            BatchPolicy::Explicit(b) => b,
        };
        Self::with_batch_size(policy, b, n)
    }

    fn with_batch_size(policy: BatchPolicy, b: usize, n: usize) -> Result<Self> {
        if b == 0 {
            return Err(Error::InvalidParameter(
                "batch size must be positive".into(),
            ));
        }
        let a = n / b;
        if a < 2 {
            return Err(Error::TooFewBatches {
                batch_size: b,
                batches: a,
                n,
            });
        }
        Ok(BatchConfig {
            policy,
            batch_size: b,
            batches: a,
        })
    }

    /// Batch size used by the lugsail correction term.
    pub fn reduced_batch_size(&self) -> usize {
        (self.batch_size / 3).max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateKind {
    BetweenChain,
    ReplicatedBatchMeans,
    Lugsail,
}

/// Both replicated batch-means terms behind a lugsail estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct LugsailParts {
    /// `τ̂²_b` at the full batch size.
    pub full: SymMatrix,
    /// `τ̂²` at batch size `max(1, ⌊b/3⌋)`.
    pub reduced: SymMatrix,
    pub reduced_batch_size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    pub kind: EstimateKind,
    /// `B` (already scaled by `n`), `τ̂²_b`/`T̂_b`, or `τ̂²_L`/`T̂_L`.
    pub value: SymMatrix,
    pub batch: Option<BatchConfig>,
    pub m: usize,
    pub n: usize,
    pub lugsail_parts: Option<LugsailParts>,
    pub psd_repaired: bool,
}

impl VarianceEstimate {
    /// Lifts a possibly indefinite estimate to positive definite.
    pub fn repaired(&self) -> Result<VarianceEstimate> {
        let (value, changed) = repair_psd(&self.value, PSD_REPAIR_FLOOR)?;
        Ok(VarianceEstimate {
            value,
            psd_repaired: self.psd_repaired || changed,
            ..self.clone()
        })
    }
}

/// Between-chain variance `B`, where `B/n` is the sample covariance of the
/// chain means.
pub fn between_chain(cs: &ChainSet) -> Result<VarianceEstimate> {
    between_chain_from(&summarize(cs)?)
}

pub fn between_chain_from(summary: &ChainSummary) -> Result<VarianceEstimate> {
    let (m, n, p) = (summary.m, summary.n, summary.p);
    if m < 2 {
        return Err(Error::TooFewChains {
            what: "between-chain variance",
            needed: 2,
            found: m,
        });
    }
    let mu = &summary.grand_mean;
    let mut b = SymMatrix::zeros(p);
    let mut dev = vec![0.0; p];
    for mean in &summary.chain_means {
        for k in 0..p {
            dev[k] = mean[k] - mu[k];
        }
        for r in 0..p {
            for c in 0..=r {
                b.add_at(r, c, dev[r] * dev[c]);
            }
        }
    }
    Ok(VarianceEstimate {
        kind: EstimateKind::BetweenChain,
        value: b.scaled(n as f64 / (m - 1) as f64),
        batch: None,
        m,
        n,
        lugsail_parts: None,
        psd_repaired: false,
    })
}

/// Replicated batch means `b/(am-1) Σ_i Σ_k (Ȳ_ik - μ̂)(Ȳ_ik - μ̂)ᵀ`.
pub fn replicated_batch_means(cs: &ChainSet, bc: &BatchConfig) -> Result<VarianceEstimate> {
    let mu = cs.pooled_mean();
    let value = rbm_matrix(cs, &mu, bc.batch_size)?;
    Ok(VarianceEstimate {
        kind: EstimateKind::ReplicatedBatchMeans,
        value,
        batch: Some(*bc),
        m: cs.m(),
        n: cs.n(),
        lugsail_parts: None,
        psd_repaired: false,
    })
}

fn rbm_matrix(cs: &ChainSet, mu: &[f64], b: usize) -> Result<SymMatrix> {
    let (m, n, p) = (cs.m(), cs.n(), cs.p());
    if b == 0 || b > n {
        return Err(Error::InvalidParameter(format!(
            "batch size {b} must lie in 1..={n}"
        )));
    }
    let a = n / b;
    if a * m < 2 {
        return Err(Error::TooFewBatches {
            batch_size: b,
            batches: a * m,
            n,
        });
    }
    let mut acc = SymMatrix::zeros(p);
    let mut dev = vec![0.0; p];
    for i in 0..m {
        let chain = cs.chain(i);
        for k in 0..a {
            dev.iter_mut().for_each(|d| *d = 0.0);
            for row in chain[k * b * p..(k + 1) * b * p].chunks_exact(p) {
                for (d, v) in dev.iter_mut().zip(row) {
                    *d += v;
                }
            }
            for (d, mu_k) in dev.iter_mut().zip(mu) {
                *d = *d / b as f64 - mu_k;
            }
            for r in 0..p {
                for c in 0..=r {
                    acc.add_at(r, c, dev[r] * dev[c]);
                }
            }
        }
    }
    Ok(acc.scaled(b as f64 / (a * m - 1) as f64))
}

/// Replicated lugsail batch means `2 τ̂²_b - τ̂²_{⌊b/3⌋}`.
///
/// The result can be indefinite; `psd_repaired` stays false until
/// [`VarianceEstimate::repaired`] is applied.
pub fn replicated_lugsail(cs: &ChainSet, bc: &BatchConfig) -> Result<VarianceEstimate> {
    let mu = cs.pooled_mean();
    let full = rbm_matrix(cs, &mu, bc.batch_size)?;
    let small = bc.reduced_batch_size();
    let reduced = rbm_matrix(cs, &mu, small)?;
    Ok(VarianceEstimate {
        kind: EstimateKind::Lugsail,
        value: full.combine(2.0, &reduced, -1.0)?,
        batch: Some(*bc),
        m: cs.m(),
        n: cs.n(),
        lugsail_parts: Some(LugsailParts {
            full,
            reduced,
            reduced_batch_size: small,
        }),
        psd_repaired: false,
    })
}

fn corrected(summary: &ChainSummary, est: &VarianceEstimate) -> Result<SymMatrix> {
    let n = summary.n as f64;
    if est.value.order() != summary.p {
        return Err(Error::DimensionMismatch {
            expected: summary.p,
            found: est.value.order(),
        });
    }
    summary
        .pooled_cov
        .combine((n - 1.0) / n, &est.value, 1.0 / n)
}

/// `Σ̂ = (n-1)/n · S + B/n`.
pub fn sigma_hat(summary: &ChainSummary, between: &VarianceEstimate) -> Result<SymMatrix> {
    if between.kind != EstimateKind::BetweenChain {
        return Err(Error::InvalidParameter(
            "sigma_hat needs a between-chain estimate".into(),
        ));
    }
    corrected(summary, between)
}

/// `Σ̂_L = (n-1)/n · S + T̂_L/n`.
pub fn sigma_hat_lugsail(summary: &ChainSummary, lug: &VarianceEstimate) -> Result<SymMatrix> {
    if lug.kind != EstimateKind::Lugsail {
        return Err(Error::InvalidParameter(
            "sigma_hat_lugsail needs a lugsail estimate".into(),
        ));
    }
    corrected(summary, lug)
}

/// Large-sample efficiency of `B` relative to the lugsail estimator,
/// `m a / (3 (m - 1))`.
pub fn relative_efficiency(m: usize, a: usize) -> Result<f64> {
    if m < 2 {
        return Err(Error::TooFewChains {
            what: "relative efficiency",
            needed: 2,
            found: m,
        });
    }
    if a < 1 {
        return Err(Error::InvalidParameter(
            "batch count must be positive".into(),
        ));
    }
    Ok((m * a) as f64 / (3 * (m - 1)) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni(chains: &[Vec<f64>]) -> ChainSet {
        ChainSet::from_columns(chains).unwrap()
    }

    fn scalar(e: &VarianceEstimate) -> f64 {
        e.value.as_scalar().unwrap()
    }

    #[test]
    fn batch_policies() {
        let bc = BatchConfig::resolve(BatchPolicy::Sqrt, 100).unwrap();
        assert_eq!((bc.batch_size, bc.batches), (10, 10));
        let bc = BatchConfig::resolve(BatchPolicy::Sqrt, 99).unwrap();
        assert_eq!((bc.batch_size, bc.batches), (9, 11));
        let bc = BatchConfig::resolve(BatchPolicy::CubeRoot, 1000).unwrap();
        assert_eq!(bc.batch_size, 10);
        let bc = BatchConfig::resolve(BatchPolicy::CubeRoot, 999).unwrap();
        assert_eq!(bc.batch_size, 9);
        assert_eq!(
            BatchConfig::resolve(BatchPolicy::Sqrt, 2).unwrap().batches,
            2
        );
        assert!(matches!(
            BatchConfig::resolve(BatchPolicy::Explicit(6), 10),
            Err(Error::TooFewBatches { .. })
        ));
        assert_eq!(
            "cube".parse::<BatchPolicy>().unwrap(),
            BatchPolicy::CubeRoot
        );
        assert_eq!(
            "12".parse::<BatchPolicy>().unwrap(),
            BatchPolicy::Explicit(12)
        );
        assert!("0".parse::<BatchPolicy>().is_err());
        assert!("fast".parse::<BatchPolicy>().is_err());
    }

    #[test]
    fn integer_roots_exact_at_perfect_powers() {
        for r in 1..200usize {
            assert_eq!(integer_root(r * r, 2), r);
            assert_eq!(integer_root(r * r - 1, 2), (r - 1).max(1));
            assert_eq!(integer_root(r * r * r, 3), r);
        }
    }

    #[test]
    fn between_chain_examples() {
        // Means 1 and 3, n = 4.
        let cs = uni(&[vec![1.0, 1.0, 0.0, 2.0], vec![3.0, 3.0, 2.0, 4.0]]);
        let b = between_chain(&cs).unwrap();
        assert_eq!(scalar(&b), 8.0);
        let cs = uni(&[vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert_eq!(scalar(&between_chain(&cs).unwrap()), 0.0);
        assert!(matches!(
            between_chain(&uni(&[vec![1.0, 2.0]])),
            Err(Error::TooFewChains { .. })
        ));
    }

    #[test]
    fn batch_means_examples() {
        let cs = uni(&[vec![1.0, 2.0, 3.0, 4.0]]);
        let bc = BatchConfig::resolve(BatchPolicy::Explicit(2), 4).unwrap();
        assert_eq!(scalar(&replicated_batch_means(&cs, &bc).unwrap()), 4.0);

        let cs = uni(&[vec![3.5; 20], vec![3.5; 20]]);
        for b in 1..=10 {
            let bc = BatchConfig::resolve(BatchPolicy::Explicit(b), 20).unwrap();
            assert_eq!(scalar(&replicated_batch_means(&cs, &bc).unwrap()), 0.0);
            assert_eq!(scalar(&replicated_lugsail(&cs, &bc).unwrap()), 0.0);
        }
    }

    #[test]
    fn lugsail_is_linear_combination_of_parts() {
        let chain: Vec<f64> = (0..30).map(|t| ((t * 7) % 11) as f64).collect();
        let cs = uni(&[chain]);
        let bc = BatchConfig::resolve(BatchPolicy::Explicit(6), 30).unwrap();
        let lug = replicated_lugsail(&cs, &bc).unwrap();
        let parts = lug.lugsail_parts.as_ref().unwrap();
        assert_eq!(parts.reduced_batch_size, 2);
        let full = replicated_batch_means(&cs, &bc).unwrap();
        assert_eq!(parts.full, full.value);
        let b2 = BatchConfig::resolve(BatchPolicy::Explicit(2), 30).unwrap();
        assert_eq!(
            parts.reduced,
            replicated_batch_means(&cs, &b2).unwrap().value
        );
        assert_eq!(
            scalar(&lug),
            2.0 * parts.full.as_scalar().unwrap() - parts.reduced.as_scalar().unwrap()
        );
    }

    #[test]
    fn lugsail_small_batch_degrades_to_one() {
        let cs = uni(&[vec![1.0, 4.0, 2.0, 8.0, 5.0, 7.0]]);
        let bc = BatchConfig::resolve(BatchPolicy::Explicit(2), 6).unwrap();
        let lug = replicated_lugsail(&cs, &bc).unwrap();
        assert_eq!(lug.lugsail_parts.unwrap().reduced_batch_size, 1);
    }

    #[test]
    fn sigma_hat_examples() {
        // s² = 1, B = 8, n = 4 → 3/4 + 2.
        let cs = uni(&[vec![1.0, 1.0, 0.0, 2.0], vec![3.0, 3.0, 2.0, 4.0]]);
        let s = summarize(&cs).unwrap();
        assert!((s.pooled_var().unwrap() - 2.0 / 3.0).abs() < 1e-15);
        let b = between_chain_from(&s).unwrap();
        let sig = sigma_hat(&s, &b).unwrap().as_scalar().unwrap();
        assert!((sig - (0.75 * 2.0 / 3.0 + 2.0)).abs() < 1e-15);

        let mut s1 = s.clone();
        s1.pooled_cov = SymMatrix::scalar(1.0);
        s1.n = 4;
        let mut b8 = b.clone();
        b8.value = SymMatrix::scalar(8.0);
        assert_eq!(sigma_hat(&s1, &b8).unwrap().as_scalar(), Some(2.75));

        let mut lug = b.clone();
        lug.kind = EstimateKind::Lugsail;
        lug.value = SymMatrix::scalar(4.0);
        s1.pooled_cov = SymMatrix::scalar(4.0);
        assert_eq!(sigma_hat_lugsail(&s1, &lug).unwrap().as_scalar(), Some(4.0));
        assert!(sigma_hat(&s1, &lug).is_err());
        assert!(sigma_hat_lugsail(&s1, &b8).is_err());
    }

    #[test]
    fn efficiency_examples() {
        assert_eq!(relative_efficiency(2, 3).unwrap(), 2.0);
        assert_eq!(relative_efficiency(3, 3).unwrap(), 1.5);
        assert_eq!(
            relative_efficiency(4, 10).unwrap() * 2.0,
            relative_efficiency(4, 20).unwrap()
        );
        assert!(relative_efficiency(1, 3).is_err());
    }
}
