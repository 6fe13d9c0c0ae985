//! Noisy trendy sinusoids: `x_t = sin(2πt/τ + ψ) + m·t/T + σ·n_t` for
//! `t = 1..=T`, with `n_t` i.i.d. standard normal.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// `ψ ~ U(0, 2π)`
    Uniform,
    /// `ψ` drawn uniformly from a finite set.
    Choices(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NtsParams {
    pub tau_choices: Vec<f64>,
    pub m_choices: Vec<f64>,
    pub sigma: f64,
    pub length: usize,
    pub n: usize,
    pub seed: u64,
    pub phase: Phase,
}

impl NtsParams {
    fn preset(tau: &[f64], m: &[f64], n: usize, seed: u64) -> Self {
        Self {
            tau_choices: tau.to_vec(),
            m_choices: m.to_vec(),
            sigma: 0.1,
            length: 100,
            n,
            seed,
            phase: Phase::Uniform,
        }
    }

    /// Fixed period 20 and trend 3, random phase.
    pub fn nts1(n: usize, seed: u64) -> Self {
        Self::preset(&[20.0], &[3.0], n, seed)
    }

    pub fn nts2(n: usize, seed: u64) -> Self {
        Self::preset(&[20.0, 30.0, 40.0], &[3.0], n, seed)
    }

    pub fn nts3(n: usize, seed: u64) -> Self {
        Self::preset(&[20.0], &[-3.0, 0.0, 3.0], n, seed)
    }

    pub fn nts4(n: usize, seed: u64) -> Self {
        Self::preset(&[20.0, 40.0], &[-3.0, 3.0], n, seed)
    }

    pub fn nts5(n: usize, seed: u64) -> Self {
        Self::preset(&[20.0, 30.0, 40.0], &[-3.0, 0.0, 3.0], n, seed)
    }

    /// Eight phases `πk/4`, trend 1, period 30.
    pub fn eight_phase(n: usize, seed: u64) -> Self {
        Self {
            m_choices: vec![1.0],
            tau_choices: vec![30.0],
            phase: Phase::Choices((0..8).map(|k| PI * k as f64 / 4.0).collect()),
            ..Self::preset(&[30.0], &[1.0], n, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.tau_choices.is_empty() || self.tau_choices.iter().any(|&t| !(t > 0.0)) {
            return Err(Error::Config("periods must be a non-empty set of positive values".into()));
        }
        if self.m_choices.is_empty() {
            return Err(Error::Config("trend set is empty".into()));
        }
        if !(self.sigma >= 0.0) {
            return Err(Error::Config(format!("noise scale must be non-negative, got {}", self.sigma)));
        }
        if self.length == 0 {
            return Err(Error::Config("series length must be at least 1".into()));
        }
        if let Phase::Choices(c) = &self.phase {
            if c.is_empty() {
                return Err(Error::Config("phase set is empty".into()));
            }
        }
        Ok(())
    }
}

/// One noiseless NTS value at 1-based time `t`.
pub fn nts_value(t: usize, length: usize, tau: f64, m: f64, psi: f64) -> f64 {
    let tf = t as f64;
    (2.0 * PI * tf / tau + psi).sin() + m * tf / length as f64
}

pub fn generate_nts(params: &NtsParams) -> Result<Dataset> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut values = Vec::with_capacity(params.n);
    for _ in 0..params.n {
        let psi = match &params.phase {
            Phase::Uniform => rng.random_range(0.0..2.0 * PI),
            Phase::Choices(c) => c[rng.random_range(0..c.len())],
        };
        let tau = params.tau_choices[rng.random_range(0..params.tau_choices.len())];
        let m = params.m_choices[rng.random_range(0..params.m_choices.len())];
        let row = (1..=params.length)
            .map(|t| {
                let noise: f64 = rng.sample(StandardNormal);
                nts_value(t, params.length, tau, m, psi) + params.sigma * noise
            })
            .collect();
        values.push(row);
    }
    Dataset::new(values, None)
}
