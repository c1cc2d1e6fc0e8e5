//! Seedable chain generators for the built-in experiments.
//!
//! Chain `i` of a run with seed `s` draws from its own stream `(s, i)`, so
//! the output does not depend on how chains are scheduled across threads.
//! The first stored sample of every chain is its starting value.

pub mod ar1;
pub mod rng;
pub mod targets;
pub mod titanic;

use rayon::prelude::*;

use crate::chains::ChainSet;
use crate::error::{Error, Result};
use crate::linalg::{Cholesky, SymMatrix};

pub use ar1::{ar1_crossing, ar1_truth, Ar1Truth};
pub use rng::{derive_seed, Rng};
pub use targets::{log_density, LogisticModel, Mixture, Target};

/// Where chains start.
#[derive(Debug, Clone, PartialEq)]
pub enum Starts {
    /// One start vector per chain.
    Fixed(Vec<Vec<f64>>),
    /// The stationary law; only meaningful for the AR(1) target.
    Stationary,
    /// `scale · t_df`, independently per component.
    StudentT { df: u32, scale: f64 },
    /// `N(mean, var)`, independently per component.
    Normal { mean: f64, var: f64 },
    /// `center_j + U(-spread, spread) · sd_j`.
    Dispersed {
        center: Vec<f64>,
        sd: Vec<f64>,
        spread: f64,
    },
}

/// Everything needed to generate a set of chains.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub target: Target,
    /// Random-walk proposal variance (Metropolis targets only). With a
    /// `proposal_shape` the proposal covariance is `proposal_var · shape`.
    pub proposal_var: f64,
    pub proposal_shape: Option<SymMatrix>,
    pub m: usize,
    pub starts: Starts,
    pub seed: u64,
}

impl SamplerSpec {
    pub fn new(target: Target, proposal_var: f64, m: usize, starts: Starts, seed: u64) -> Self {
        SamplerSpec {
            target,
            proposal_var,
            proposal_shape: None,
            m,
            starts,
            seed,
        }
    }

    pub fn with_proposal_shape(mut self, shape: SymMatrix) -> Self {
        self.proposal_shape = Some(shape);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn validate(&self) -> Result<()> {
        self.target.validate()?;
        if self.m == 0 {
            return Err(Error::InvalidParameter("need at least one chain".into()));
        }
        let p = self.dim();
        if !matches!(self.target, Target::Ar1 { .. }) {
            if !(self.proposal_var > 0.0 && self.proposal_var.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "proposal variance must be positive, got {}",
                    self.proposal_var
                )));
            }
            if let Some(shape) = &self.proposal_shape {
                if shape.order() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: shape.order(),
                    });
                }
            }
        }
        match &self.starts {
            Starts::Fixed(v) => {
                if v.len() != self.m {
                    return Err(Error::InvalidParameter(format!(
                        "{} start vectors for {} chains",
                        v.len(),
                        self.m
                    )));
                }
                if let Some(bad) = v.iter().find(|s| s.len() != p) {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: bad.len(),
                    });
                }
                if v.iter().flatten().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "start values must be finite".into(),
                    ));
                }
            }
            Starts::Stationary => {
                if !matches!(self.target, Target::Ar1 { .. }) {
                    return Err(Error::InvalidParameter(
                        "stationary starts are only available for AR(1)".into(),
                    ));
                }
            }
            Starts::StudentT { df, scale } => {
                if *df == 0 || !(*scale > 0.0) {
                    return Err(Error::InvalidParameter(
                        "t starts need df >= 1, scale > 0".into(),
                    ));
                }
            }
            Starts::Normal { var, .. } => {
                if !(*var > 0.0) {
                    return Err(Error::InvalidParameter("normal starts need var > 0".into()));
                }
            }
            Starts::Dispersed { center, sd, spread } => {
                if center.len() != p || sd.len() != p {
                    return Err(Error::DimensionMismatch {
                        expected: p,
                        found: center.len().max(sd.len()),
                    });
                }
                if !(*spread >= 0.0) {
                    return Err(Error::InvalidParameter(
                        "spread must be non-negative".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct ChainState {
    rng: Rng,
    current: Vec<f64>,
    log_f: f64,
    samples: Vec<f64>,
    accepted: u64,
    proposed: u64,
}

/// A set of chains that can be grown in place.
///
/// Extending from `n` to `n'` appends exactly the iterations a fresh run to
/// `n'` would have produced, so every checkpoint is a prefix of the next.
#[derive(Debug, Clone)]
pub struct Simulation {
    spec: SamplerSpec,
    /// Lower Cholesky factor of the proposal covariance, row-major.
    proposal_factor: Vec<f64>,
    chains: Vec<ChainState>,
    n: usize,
}

impl Simulation {
    pub fn new(spec: SamplerSpec) -> Result<Self> {
        spec.validate()?;
        let p = spec.dim();
        let proposal_factor = match &spec.proposal_shape {
            Some(shape) => {
                let chol = Cholesky::factor(&shape.scaled(spec.proposal_var))?;
                chol.lower().to_vec()
            }
            None => {
                let sd = spec.proposal_var.sqrt();
                let mut l = vec![0.0; p * p];
                (0..p).for_each(|j| l[j * p + j] = sd);
                l
            }
        };
        let chains = (0..spec.m)
            .map(|i| {
                let mut rng = Rng::new(spec.seed, i as u64);
                let current = draw_start(&spec, i, &mut rng);
                let log_f = log_density(&spec.target, &current);
                if !log_f.is_finite() && !matches!(spec.target, Target::Ar1 { .. }) {
                    return Err(Error::Sampler(format!(
                        "chain {i} starts where the target density is zero"
                    )));
                }
                Ok(ChainState {
                    rng,
                    current,
                    log_f,
                    samples: Vec::new(),
                    accepted: 0,
                    proposed: 0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Simulation {
            spec,
            proposal_factor,
            chains,
            n: 0,
        })
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    /// Iterations per chain generated so far.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Grows every chain to `n` iterations. Shrinking is a no-op.
    pub fn extend_to(&mut self, n: usize) {
        if n <= self.n {
            return;
        }
        let from = self.n;
        let spec = &self.spec;
        let factor = &self.proposal_factor;
        self.chains
            .par_iter_mut()
            .for_each(|chain| advance(spec, factor, chain, from, n));
        self.n = n;
    }

    pub fn chain_set(&self) -> Result<ChainSet> {
        let p = self.spec.dim();
        let mut data = Vec::with_capacity(self.spec.m * self.n * p);
        for c in &self.chains {
            data.extend_from_slice(&c.samples);
        }
        ChainSet::new(self.spec.m, self.n, p, data)
    }

    /// Fraction of accepted proposals per chain (1 for exact samplers).
    pub fn acceptance_rates(&self) -> Vec<f64> {
        self.chains
            .iter()
            .map(|c| {
                if c.proposed == 0 {
                    1.0
                } else {
                    c.accepted as f64 / c.proposed as f64
                }
            })
            .collect()
    }
}

fn draw_start(spec: &SamplerSpec, chain: usize, rng: &mut Rng) -> Vec<f64> {
    let p = spec.dim();
    match &spec.starts {
        Starts::Fixed(v) => v[chain].clone(),
        Starts::Stationary => match spec.target {
            Target::Ar1 { rho, nu } => vec![rng.normal() * nu / (1.0 - rho * rho).sqrt()],
            _ => unreachable!("validated"),
        },
        Starts::StudentT { df, scale } => (0..p).map(|_| scale * rng.student_t(*df)).collect(),
        Starts::Normal { mean, var } => (0..p).map(|_| mean + var.sqrt() * rng.normal()).collect(),
        Starts::Dispersed { center, sd, spread } => center
            .iter()
            .zip(sd)
            .map(|(c, s)| c + spread * (2.0 * rng.uniform() - 1.0) * s)
            .collect(),
    }
}

fn advance(spec: &SamplerSpec, factor: &[f64], chain: &mut ChainState, from: usize, to: usize) {
    let p = chain.current.len();
    chain.samples.reserve((to - from) * p);
    let mut t = from;
    if t == 0 {
        chain.samples.extend_from_slice(&chain.current);
        t = 1;
    }
    match spec.target {
        Target::Ar1 { rho, nu } => {
            let mut y = chain.current[0];
            for _ in t..to {
                y = rho * y + nu * chain.rng.normal();
                chain.samples.push(y);
            }
            chain.current[0] = y;
        }
        _ => {
            let mut z = vec![0.0; p];
            let mut cand = vec![0.0; p];
            for _ in t..to {
                z.iter_mut().for_each(|v| *v = chain.rng.normal());
                for (a, c) in cand.iter_mut().enumerate() {
                    let row = &factor[a * p..a * p + a + 1];
                    *c = chain.current[a] + row.iter().zip(&z).map(|(l, z)| l * z).sum::<f64>();
                }
                let log_f = log_density(&spec.target, &cand);
                let log_u = chain.rng.uniform_open().ln();
                chain.proposed += 1;
                if log_u < log_f - chain.log_f {
                    chain.current.copy_from_slice(&cand);
                    chain.log_f = log_f;
                    chain.accepted += 1;
                }
                chain.samples.extend_from_slice(&chain.current);
            }
        }
    }
}

fn require_ar1(spec: &SamplerSpec) -> Result<()> {
    match spec.target {
        Target::Ar1 { .. } => Ok(()),
        _ => Err(Error::InvalidParameter("expected an AR(1) target".into())),
    }
}

/// `m` exact AR(1) chains of length `n`.
pub fn ar1_generate(spec: &SamplerSpec, n: usize) -> Result<ChainSet> {
    require_ar1(spec)?;
    let mut sim = Simulation::new(spec.clone())?;
    sim.extend_to(n);
    sim.chain_set()
}

/// Random-walk Metropolis chains of length `n` and per-chain acceptance rates.
pub fn rwmh_generate(spec: &SamplerSpec, n: usize) -> Result<(ChainSet, Vec<f64>)> {
    if matches!(spec.target, Target::Ar1 { .. }) {
        return Err(Error::InvalidParameter(
            "AR(1) chains are sampled exactly; use ar1_generate".into(),
        ));
    }
    let mut sim = Simulation::new(spec.clone())?;
    sim.extend_to(n);
    Ok((sim.chain_set()?, sim.acceptance_rates()))
}
