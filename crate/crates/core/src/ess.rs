//! Effective sample size and the ESS-derived PSRF cutoff.
//!
//! For `m` chains of length `n`, `ÊSS = m n (det S / det T̂_L)^{1/p}`, which
//! makes the lugsail PSRF exactly `sqrt((n-1)/n + m/ÊSS)`. Requiring
//! `ÊSS >= M_{α,ε,p}` is therefore the same as requiring the PSRF to drop to
//! `δ = sqrt(1 + m/M)` (up to the vanishing `-1/n`).
//!
//! ESS here is for the identity map `g(x) = x`; for other functionals,
//! transform the chains first.

use std::f64::consts::{LN_2, PI};

use serde::Serialize;

use crate::chains::ChainSet;
use crate::error::{Error, Result};
use crate::mcvar::BatchConfig;
use crate::psrf::psrf_multivariate_lugsail;

const QUANTILE_MAX_ITER: usize = 200;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection.
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized lower incomplete gamma `P(a, x)`.
pub fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut k = a;
        for _ in 0..10_000 {
            k += 1.0;
            term *= x / k;
            sum += term;
            if term.abs() < sum.abs() * 1e-17 {
                break;
            }
        }
        (sum.ln() + log_prefactor).exp().min(1.0)
    } else {
        1.0 - gamma_q_continued_fraction(a, x, log_prefactor)
    }
}

/// Upper tail by Lentz's continued fraction; valid for `x >= a + 1`.
fn gamma_q_continued_fraction(a: f64, x: f64, log_prefactor: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (log_prefactor.exp() * h).clamp(0.0, 1.0)
}

/// χ² CDF with `df` degrees of freedom.
pub fn chi2_cdf(x: f64, df: f64) -> f64 {
    gamma_p(0.5 * df, 0.5 * x)
}

fn chi2_log_pdf(x: f64, df: f64) -> f64 {
    let a = 0.5 * df;
    (a - 1.0) * x.ln() - 0.5 * x - a * LN_2 - ln_gamma(a)
}

/// Standard normal quantile (Acklam's rational approximation, ~1e-9).
/// Only used to seed Newton iterations.
fn normal_quantile_seed(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e1,
        2.209460984245205e2,
        -2.759285104469687e2,
        1.383_577_518_672_69e2,
        -3.066479806614716e1,
        2.506628277459239,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e1,
        1.615858368580409e2,
        -1.556989798598866e2,
        6.680131188771972e1,
        -1.328068155288572e1,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-3,
        -3.223964580411365e-1,
        -2.400758277161838,
        -2.549732539343734,
        4.374664141464968,
        2.938163982698783,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-3,
        3.224671290700398e-1,
        2.445134137142996,
        3.754408661907416,
    ];
    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < 0.02425 {
        tail((-2.0 * p.ln()).sqrt())
    } else if p > 1.0 - 0.02425 {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    } else {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    }
}

/// Quantile of the χ² distribution.
///
/// Newton iteration on the regularized incomplete gamma, seeded by
/// Wilson–Hilferty and safeguarded by bisection.
pub fn chi2_quantile(prob: f64, df: u32) -> Result<f64> {
    if !(prob > 0.0 && prob < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "probability must lie in (0, 1), got {prob}"
        )));
    }
    if df == 0 {
        return Err(Error::InvalidParameter(
            "degrees of freedom must be positive".into(),
        ));
    }
    let k = df as f64;
    let z = normal_quantile_seed(prob);
    let h = 2.0 / (9.0 * k);
    let mut x = k * (1.0 - h + z * h.sqrt()).powi(3);
    if !(x > 0.0) {
        // Leading series term: P(a, x/2) ≈ (x/2)^a / Γ(a + 1).
        let a = 0.5 * k;
        x = 2.0 * ((prob.ln() + ln_gamma(a + 1.0)) / a).exp();
    }

    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    for _ in 0..QUANTILE_MAX_ITER {
        let f = chi2_cdf(x, k) - prob;
        if f == 0.0 {
            return Ok(x);
        }
        if f < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - f / chi2_log_pdf(x, k).exp();
        if !(next > lo && next < hi) {
            next = if hi.is_finite() {
                0.5 * (lo + hi)
            } else {
                2.0 * x
            };
        }
        let bracketed = hi.is_finite() && hi - lo <= 4.0 * f64::EPSILON * hi;
        if (next - x).abs() <= 1e-15 * x.max(1e-300) || bracketed {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence {
        residual: chi2_cdf(x, k) - prob,
    })
}

/// Minimum ESS `M_{α,ε,p} = 2^{2/p} π / (p Γ(p/2))^{2/p} · χ²_{1-α,p} / ε²`.
pub fn min_ess(alpha: f64, epsilon: f64, p: usize) -> Result<f64> {
    check_alpha_epsilon(alpha, epsilon)?;
    Ok(precision_constant(alpha, p)? / (epsilon * epsilon))
}

/// `M · ε²`, which depends only on `α` and `p`.
fn precision_constant(alpha: f64, p: usize) -> Result<f64> {
    if p == 0 {
        return Err(Error::InvalidParameter(
            "dimension must be at least 1".into(),
        ));
    }
    let pf = p as f64;
    let chi2 = chi2_quantile(1.0 - alpha, p as u32)?;
    let log_c = (2.0 / pf) * LN_2 + PI.ln() - (2.0 / pf) * (pf.ln() + ln_gamma(0.5 * pf));
    Ok(log_c.exp() * chi2)
}

fn check_alpha_epsilon(alpha: f64, epsilon: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    Ok(())
}

/// Termination target: minimum ESS and the PSRF cutoff it implies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EssThreshold {
    pub alpha: f64,
    pub epsilon: f64,
    pub p: usize,
    pub m: usize,
    /// `M_{α,ε,p}`.
    pub min_ess: f64,
    /// `⌈M⌉`.
    pub min_ess_ceil: u64,
    /// `sqrt(1 + m / M)`.
    pub delta: f64,
}

impl EssThreshold {
    /// Threshold for a hand-picked cutoff such as 1.1: `M = m / (δ² - 1)`,
    /// with `ε` backed out for the given `α` and `p`.
    pub fn from_delta(delta: f64, alpha: f64, p: usize, m: usize) -> Result<Self> {
        if !(delta > 1.0) || !delta.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "delta must exceed 1, got {delta}"
            )));
        }
        if m == 0 {
            return Err(Error::InvalidParameter("need at least one chain".into()));
        }
        let min_ess = m as f64 / (delta * delta - 1.0);
        let epsilon = (precision_constant(alpha, p)? / min_ess).sqrt();
        Ok(EssThreshold {
            alpha,
            epsilon,
            p,
            m,
            min_ess,
            min_ess_ceil: min_ess.ceil() as u64,
            delta,
        })
    }
}

/// Builds the `(M, δ)` pair for the given precision target.
pub fn delta_threshold(alpha: f64, epsilon: f64, p: usize, m: usize) -> Result<EssThreshold> {
    if m == 0 {
        return Err(Error::InvalidParameter("need at least one chain".into()));
    }
    let min_ess = min_ess(alpha, epsilon, p)?;
    Ok(EssThreshold {
        alpha,
        epsilon,
        p,
        m,
        min_ess,
        min_ess_ceil: min_ess.ceil() as u64,
        delta: (1.0 + m as f64 / min_ess).sqrt(),
    })
}

/// `ÊSS = m n exp((ln det S - ln det T̂_L) / p)`.
pub fn ess_estimate(cs: &ChainSet, bc: &BatchConfig) -> Result<f64> {
    Ok(psrf_multivariate_lugsail(cs, bc)?.implied_ess())
}
