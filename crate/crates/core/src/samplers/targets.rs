use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SymMatrix};

/// Two-component normal mixture `w N(μ₁, λ₁²) + (1 - w) N(μ₂, λ₂²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mixture {
    pub weight: f64,
    pub mean1: f64,
    pub var1: f64,
    pub mean2: f64,
    pub var2: f64,
}

impl Mixture {
    /// The equal-weight `N(0, 2)` / `N(10, 0.5)` mixture.
    pub fn bimodal_example() -> Self {
        Mixture {
            weight: 0.5,
            mean1: 0.0,
            var1: 2.0,
            mean2: 10.0,
            var2: 0.5,
        }
    }

    pub fn mean(&self) -> f64 {
        self.weight * self.mean1 + (1.0 - self.weight) * self.mean2
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.weight * (self.var1 + self.mean1 * self.mean1)
            + (1.0 - self.weight) * (self.var2 + self.mean2 * self.mean2)
            - mu * mu
    }

    fn validate(&self) -> Result<()> {
        if !(self.weight > 0.0 && self.weight < 1.0) || !(self.var1 > 0.0 && self.var2 > 0.0) {
            return Err(Error::InvalidParameter(
                "mixture needs weight in (0, 1) and positive variances".into(),
            ));
        }
        Ok(())
    }
}

/// Bayesian logistic regression with an isotropic normal prior.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    /// Row-major `rows × cols` design matrix.
    design: Vec<f64>,
    response: Vec<f64>,
    cols: usize,
    prior_var: f64,
}

impl LogisticModel {
    pub fn new(design: Vec<f64>, cols: usize, response: Vec<f64>, prior_var: f64) -> Result<Self> {
        if cols == 0 || design.len() != response.len() * cols {
            return Err(Error::DimensionMismatch {
                expected: response.len() * cols,
                found: design.len(),
            });
        }
        if response.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::Data("responses must be 0 or 1".into()));
        }
        if !(prior_var > 0.0) {
            return Err(Error::InvalidParameter(
                "prior variance must be positive".into(),
            ));
        }
        Ok(LogisticModel {
            design,
            response,
            cols,
            prior_var,
        })
    }

    pub fn rows(&self) -> usize {
        self.response.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn prior_var(&self) -> f64 {
        self.prior_var
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.cols..(i + 1) * self.cols]
    }

    fn linear_predictor(&self, i: usize, beta: &[f64]) -> f64 {
        self.row(i).iter().zip(beta).map(|(x, b)| x * b).sum()
    }

    /// Unnormalized log posterior.
    pub fn log_posterior(&self, beta: &[f64]) -> f64 {
        let mut ll = 0.0;
        for i in 0..self.rows() {
            let eta = self.linear_predictor(i, beta);
            ll += self.response[i] * eta - log1p_exp(eta);
        }
        ll - beta.iter().map(|b| b * b).sum::<f64>() / (2.0 * self.prior_var)
    }

    /// Posterior mode by Newton–Raphson, with the inverse negative Hessian
    /// there (the Laplace covariance).
    pub fn posterior_mode(&self) -> Result<(Vec<f64>, SymMatrix)> {
        let p = self.cols;
        let mut beta = vec![0.0; p];
        for _ in 0..100 {
            let (grad, info) = self.gradient_and_information(&beta);
            let chol = Cholesky::factor(&info)?;
            let step = solve(&chol, &grad);
            let mut scale = 1.0;
            let current = self.log_posterior(&beta);
            // Step halving keeps the iteration monotone on badly scaled designs.
            let next = loop {
                let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
                if self.log_posterior(&cand) >= current || scale < 1e-8 {
                    break cand;
                }
                scale *= 0.5;
            };
            let moved = step.iter().map(|s| (scale * s).abs()).fold(0.0, f64::max);
            beta = next;
            if moved < 1e-10 {
                let (_, info) = self.gradient_and_information(&beta);
                return Ok((beta, inverse(&Cholesky::factor(&info)?)));
            }
        }
        Err(Error::Sampler(
            "Newton iteration for the posterior mode did not converge".into(),
        ))
    }

    fn gradient_and_information(&self, beta: &[f64]) -> (Vec<f64>, SymMatrix) {
        let p = self.cols;
        let mut grad: Vec<f64> = beta.iter().map(|b| -b / self.prior_var).collect();
        let mut info = SymMatrix::from_diag(&vec![1.0 / self.prior_var; p]);
        for i in 0..self.rows() {
            let x = self.row(i);
            let prob = logistic(self.linear_predictor(i, beta));
            let r = self.response[i] - prob;
            let w = prob * (1.0 - prob);
            for a in 0..p {
                grad[a] += r * x[a];
                for b in 0..=a {
                    info.add_at(a, b, w * x[a] * x[b]);
                }
            }
        }
        (grad, info)
    }
}

fn solve(chol: &Cholesky, rhs: &[f64]) -> Vec<f64> {
    let p = chol.order();
    let l = chol.lower();
    let mut y = rhs.to_vec();
    chol.forward_solve(&mut y);
    for i in (0..p).rev() {
        let mut s = y[i];
        for k in (i + 1)..p {
            s -= l[k * p + i] * y[k];
        }
        y[i] = s / l[i * p + i];
    }
    y
}

fn inverse(chol: &Cholesky) -> SymMatrix {
    let p = chol.order();
    let mut dense = vec![0.0; p * p];
    for j in 0..p {
        let mut e = vec![0.0; p];
        e[j] = 1.0;
        let col = solve(chol, &e);
        for i in 0..p {
            dense[i * p + j] = col[i];
        }
    }
    SymMatrix::from_dense(p, &dense).expect("square")
}

/// `ln(1 + e^x)` without overflow.
pub fn log1p_exp(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Target distributions of the built-in experiments.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Gaussian AR(1) `Y_t = ρ Y_{t-1} + ε_t`, `ε_t ~ N(0, ν²)`; sampled
    /// exactly, not by Metropolis–Hastings.
    Ar1 {
        rho: f64,
        nu: f64,
    },
    StudentT {
        df: f64,
    },
    Bimodal(Mixture),
    Logistic(Arc<LogisticModel>),
}

impl Target {
    pub fn dim(&self) -> usize {
        match self {
            Target::Logistic(model) => model.cols(),
            _ => 1,
        }
    }

    pub(crate) fn validate(&self) -> Result<()> {
        match self {
            Target::Ar1 { rho, nu } => {
                if !(rho.abs() < 1.0) || !(*nu > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "AR(1) needs |rho| < 1 and nu > 0, got rho={rho}, nu={nu}"
                    )));
                }
            }
            Target::StudentT { df } => {
                if !(*df > 0.0) {
                    return Err(Error::InvalidParameter("t target needs df > 0".into()));
                }
            }
            Target::Bimodal(mix) => mix.validate()?,
            Target::Logistic(_) => {}
        }
        Ok(())
    }
}

/// Log density up to an additive constant.
pub fn log_density(target: &Target, x: &[f64]) -> f64 {
    match target {
        Target::Ar1 { rho, nu } => {
            let s2 = nu * nu / (1.0 - rho * rho);
            -0.5 * x[0] * x[0] / s2
        }
        Target::StudentT { df } => -0.5 * (df + 1.0) * (x[0] * x[0] / df).ln_1p(),
        Target::Bimodal(mix) => {
            let comp = |w: f64, mu: f64, var: f64| {
                w.ln() - 0.5 * var.ln() - 0.5 * (x[0] - mu) * (x[0] - mu) / var
            };
            let a = comp(mix.weight, mix.mean1, mix.var1);
            let b = comp(1.0 - mix.weight, mix.mean2, mix.var2);
            let hi = a.max(b);
            hi + ((a - hi).exp() + (b - hi).exp()).ln()
        }
        Target::Logistic(model) => model.log_posterior(x),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{LN_2, PI};

    #[test]
    fn mixture_moments() {
        let mix = Mixture::bimodal_example();
        assert_eq!(mix.mean(), 5.0);
        assert!((mix.variance() - 26.25).abs() < 1e-12);
    }

    #[test]
    fn mixture_density_matches_closed_form() {
        let mix = Mixture::bimodal_example();
        let t = Target::Bimodal(mix);
        let dens = |x: f64| {
            let f =
                |mu: f64, v: f64| (-(x - mu) * (x - mu) / (2.0 * v)).exp() / (2.0 * PI * v).sqrt();
            0.5 * f(0.0, 2.0) + 0.5 * f(10.0, 0.5)
        };
        let shift = 0.5 * (2.0 * PI).ln();
        for x in [-3.0, 0.0, 4.0, 7.5, 10.0, 12.0] {
            assert!((log_density(&t, &[x]) - shift - dens(x).ln()).abs() < 1e-12);
        }
        // At the two modes the densities differ by the ratio of component sds.
        let gap = log_density(&t, &[10.0]) - log_density(&t, &[0.0]);
        assert!((gap - 0.5 * (2.0f64 / 0.5).ln()).abs() < 1e-6);
        assert!(gap.abs() <= LN_2 + 0.5 * 4f64.ln());
    }

    #[test]
    fn t_density_against_normal() {
        // Unnormalized: zero at the mode, normal limit as df grows.
        let t5 = Target::StudentT { df: 5.0 };
        assert_eq!(log_density(&t5, &[0.0]), 0.0);
        let x: f64 = 1.3;
        let expect = -3.0 * (x * x / 5.0).ln_1p();
        assert!((log_density(&t5, &[x]) - expect).abs() < 1e-15);
        let big = Target::StudentT { df: 1e8 };
        assert!((log_density(&big, &[x]) + 0.5 * x * x).abs() < 1e-6);
    }

    #[test]
    fn logistic_null_model() {
        let x = vec![1.0, 0.3, 1.0, -2.0, 1.0, 5.0];
        let model = LogisticModel::new(x, 2, vec![1.0, 0.0, 1.0], 100.0).unwrap();
        let t = Target::Logistic(Arc::new(model));
        assert!((log_density(&t, &[0.0, 0.0]) + 3.0 * LN_2).abs() < 1e-15);
    }

    #[test]
    fn log1p_exp_is_stable() {
        assert_eq!(log1p_exp(1000.0), 1000.0);
        assert!(log1p_exp(-1000.0) >= 0.0);
        assert!((log1p_exp(0.0) - LN_2).abs() < 1e-15);
    }

    #[test]
    fn newton_finds_mode() {
        // Intercept-only model: mode solves sum(y) - n σ(β) - β/σ² = 0.
        let n = 40;
        let y: Vec<f64> = (0..n).map(|i| if i % 4 == 0 { 1.0 } else { 0.0 }).collect();
        let model = LogisticModel::new(vec![1.0; n], 1, y, 1e6).unwrap();
        let (beta, cov) = model.posterior_mode().unwrap();
        assert!((beta[0] - (1.0f64 / 3.0).ln()).abs() < 1e-4);
        // Fisher information n p (1 - p) = 40 · 0.1875.
        assert!((cov.get(0, 0) - 1.0 / 7.5).abs() < 1e-4);
    }
}
