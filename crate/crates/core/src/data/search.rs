//! Latin-hypercube hyperparameter search over `(d, η, χ_max)`.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub d: (usize, usize),
    /// Searched uniformly in `ln η`.
    pub eta: (f64, f64),
    pub chi_max: (usize, usize),
    pub n_samples: usize,
    pub folds: usize,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            d: (5, 15),
            eta: (0.001, 0.5),
            chi_max: (20, 40),
            n_samples: 20,
            folds: 5,
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.d.0 == 0 || self.d.0 > self.d.1 {
            return Err(Error::Config(format!("bad d range {:?}", self.d)));
        }
        if !(self.eta.0 > 0.0 && self.eta.0 <= self.eta.1) {
            return Err(Error::Config(format!("bad eta range {:?}", self.eta)));
        }
        if self.chi_max.0 == 0 || self.chi_max.0 > self.chi_max.1 {
            return Err(Error::Config(format!("bad chi_max range {:?}", self.chi_max)));
        }
        if self.n_samples == 0 || self.folds == 0 {
            return Err(Error::Config("n_samples and folds must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialParams {
    pub d: usize,
    pub eta: f64,
    pub chi_max: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub id: usize,
    pub params: TrialParams,
    /// One entry per fold; `Err` holds the failure message.
    pub fold_objectives: Vec<std::result::Result<f64, String>>,
}

impl Trial {
    /// Mean over folds, or `None` if any fold failed.
    pub fn mean(&self) -> Option<f64> {
        let mut s = 0.0;
        for o in &self.fold_objectives {
            s += *o.as_ref().ok()?;
        }
        Some(s / self.fold_objectives.len() as f64)
    }
}

#[derive(Clone, Debug)]
pub struct SearchResult {
    pub best: TrialParams,
    pub best_objective: f64,
    pub trials: Vec<Trial>,
}

impl SearchResult {
    /// `trial_id,d,eta,chi_max,fold,objective` with `NaN` for failed folds.
    pub fn log_csv(&self) -> String {
        let mut s = String::from("trial_id,d,eta,chi_max,fold,objective\n");
        for t in &self.trials {
            for (f, o) in t.fold_objectives.iter().enumerate() {
                let v = o.as_ref().map_or(f64::NAN, |v| *v);
                let _ = writeln!(s, "{},{},{},{},{},{}", t.id, t.params.d, t.params.eta, t.params.chi_max, f, v);
            }
        }
        s
    }
}

/// `n` points in `[0, 1)^dims`, one per stratum `[k/n, (k+1)/n)` along every
/// dimension.
pub(crate) fn lhs_unit(n: usize, dims: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0; dims]; n];
    for j in 0..dims {
        let mut strata: Vec<usize> = (0..n).collect();
        strata.shuffle(rng);
        for (i, p) in pts.iter_mut().enumerate() {
            p[j] = (strata[i] as f64 + rng.random::<f64>()) / n as f64;
        }
    }
    pts
}

fn int_in(range: (usize, usize), u: f64) -> usize {
    let span = (range.1 - range.0 + 1) as f64;
    (range.0 + (u * span).floor() as usize).min(range.1)
}

/// Evaluates `objective(params, fold)` for every LHS sample and fold and
/// returns the configuration with the lowest mean. Trials whose objective
/// fails on some fold are logged and skipped.
pub fn lhs_search(
    space: &SearchSpace,
    seed: u64,
    mut objective: impl FnMut(&TrialParams, usize) -> Result<f64>,
) -> Result<SearchResult> {
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (space.eta.0.ln(), space.eta.1.ln());
    let mut trials = Vec::with_capacity(space.n_samples);
    for (id, u) in lhs_unit(space.n_samples, 3, &mut rng).into_iter().enumerate() {
        let params = TrialParams {
            d: int_in(space.d, u[0]),
            eta: (lo + u[1] * (hi - lo)).exp().clamp(space.eta.0, space.eta.1),
            chi_max: int_in(space.chi_max, u[2]),
        };
        let fold_objectives = (0..space.folds)
            .map(|f| match objective(&params, f) {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(format!("non-finite objective {v}")),
                Err(e) => Err(e.to_string()),
            })
            .collect();
        let trial = Trial {
            id,
            params,
            fold_objectives,
        };
        match trial.mean() {
            Some(m) => log::info!("trial {id}: {params:?} -> {m:.6}"),
            None => {
                let why = trial.fold_objectives.iter().find_map(|r| r.as_ref().err()).cloned().unwrap_or_default();
                log::warn!("trial {id}: {params:?} failed: {why}")
            }
        }
        trials.push(trial);
    }
    let (best, best_objective) = trials
        .iter()
        .filter_map(|t| t.mean().map(|m| (t.params, m)))
        .fold(None, |acc: Option<(TrialParams, f64)>, (p, m)| match acc {
            Some((_, bm)) if bm <= m => acc,
            _ => Some((p, m)),
        })
        .ok_or_else(|| Error::Empty("every search trial failed".into()))?;
    Ok(SearchResult {
        best,
        best_objective,
        trials,
    })
}
