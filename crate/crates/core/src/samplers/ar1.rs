use crate::error::{Error, Result};

/// Exact moments of a stationary AR(1) process `Y_t = ρ Y_{t-1} + ε_t`,
/// `ε_t ~ N(0, ν²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Truth {
    /// Stationary variance `ν² / (1 - ρ²)`.
    pub sigma2: f64,
    /// `n Var(Ȳ_n)`.
    pub tau2_n: f64,
    /// `σ² (1 + ρ) / (1 - ρ)`.
    pub tau2_inf: f64,
    /// `sqrt((n-1)/n + τ²_n / (n σ²))`.
    pub psrf_n: f64,
}

/// Closed-form quantities; `τ²_n` is summed term by term.
pub fn ar1_truth(rho: f64, nu: f64, n: usize) -> Result<Ar1Truth> {
    if !(rho.abs() < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "AR(1) needs |rho| < 1, got {rho}"
        )));
    }
    if !(nu > 0.0) || n == 0 {
        return Err(Error::InvalidParameter(
            "AR(1) needs nu > 0 and n >= 1".into(),
        ));
    }
    let sigma2 = nu * nu / (1.0 - rho * rho);
    let nf = n as f64;
    let mut acc = 0.0;
    let mut rho_k = 1.0;
    for k in 1..n {
        rho_k *= rho;
        acc += (nf - k as f64) / nf * rho_k;
    }
    let tau2_n = sigma2 + 2.0 * sigma2 * acc;
    let tau2_inf = sigma2 * (1.0 + rho) / (1.0 - rho);
    let psrf_n = ((nf - 1.0) / nf + tau2_n / (nf * sigma2)).sqrt();
    Ok(Ar1Truth {
        sigma2,
        tau2_n,
        tau2_inf,
        psrf_n,
    })
}

/// Smallest `n` whose exact PSRF is at or below `delta`, found by bisection
/// on the (eventually decreasing) true PSRF curve.
pub fn ar1_crossing(rho: f64, nu: f64, delta: f64) -> Result<usize> {
    if !(delta > 1.0) {
        return Err(Error::InvalidParameter("crossing needs delta > 1".into()));
    }
    let psrf = |n: usize| ar1_truth(rho, nu, n).map(|t| t.psrf_n);
    let mut hi = 2usize;
    while psrf(hi)? > delta {
        hi = hi
            .checked_mul(2)
            .ok_or_else(|| Error::InvalidParameter("true PSRF never reaches delta".into()))?;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if psrf(mid)? <= delta {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
