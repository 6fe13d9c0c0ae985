//! Tuning objectives and cross-validated hyperparameter search.

use serde::{Deserialize, Serialize};

use super::{block_len, kfold, lhs_search, mae, mask_contiguous, nn1_impute, resample_folds, Dataset, SearchResult, SearchSpace, TrialParams};
use crate::bundle::ModelBundle;
use crate::classifier::evaluate_accuracy;
use crate::error::{Error, Result};
use crate::imputer::impute;
use crate::trainer::{fit, TrainConfig};

/// Missing fractions 5%, 15%, …, 95%.
pub fn missing_grid() -> Vec<f64> {
    (0..10).map(|k| (2 * k + 1) as f64 / 20.0).collect()
}

/// Mean MAE over `test` after masking one contiguous block of `pct` per
/// instance. Multi-class models condition on each instance's label.
pub fn imputation_mae(bundle: &ModelBundle, test: &Dataset, pct: f64, seed: u64) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("no instances to impute".into()));
    }
    let masked = mask_contiguous(test, pct, seed)?;
    let mut total = 0.0;
    for i in 0..masked.len() {
        let observed = masked.observed_mask(i);
        let class = if bundle.mps.n_labels() > 1 { masked.label(i) } else { None };
        let r = impute(bundle, &masked.masked_row(i), &observed, class).map_err(|e| e.at_instance(i))?;
        total += mae(&test.values[i], &r.series, &observed)?;
    }
    Ok(total / masked.len() as f64)
}

/// Same protocol with the 1-NN baseline drawing donors from `train`.
pub fn nn1_mae(train: &Dataset, test: &Dataset, pct: f64, seed: u64) -> Result<f64> {
    if test.is_empty() {
        return Err(Error::Empty("no instances to impute".into()));
    }
    let masked = mask_contiguous(test, pct, seed)?;
    let mut total = 0.0;
    for i in 0..masked.len() {
        let observed = masked.observed_mask(i);
        let r = nn1_impute(train, &masked.masked_row(i), &observed)?;
        total += mae(&test.values[i], &r, &observed)?;
    }
    Ok(total / masked.len() as f64)
}

/// Trains on `train` and returns the MAE on `validation` averaged over
/// `pcts`. Each fraction uses its own mask seed derived from `seed`.
/// Fractions whose block would be empty or cover a whole series are skipped.
pub fn imputation_objective(train: &Dataset, validation: &Dataset, config: &TrainConfig, pcts: &[f64], seed: u64) -> Result<f64> {
    let t = validation.series_len();
    let used: Vec<(usize, f64)> = pcts.iter().copied().enumerate().filter(|&(_, p)| (1..t).contains(&block_len(p, t))).collect();
    if used.is_empty() {
        return Err(Error::Config(format!("no missing fraction in {pcts:?} hides a sample of a length-{t} series")));
    }
    let (bundle, _) = fit(train, config)?;
    let mut sum = 0.0;
    for &(k, p) in &used {
        sum += imputation_mae(&bundle, validation, p, seed.wrapping_add(k as u64))?;
    }
    Ok(sum / used.len() as f64)
}

/// Validation error rate (`1 − accuracy`).
pub fn classification_objective(train: &Dataset, validation: &Dataset, config: &TrainConfig) -> Result<f64> {
    let (bundle, _) = fit(train, config)?;
    Ok(1.0 - evaluate_accuracy(&bundle, validation)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Imputation,
    Classification,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TuneOptions {
    pub space: SearchSpace,
    /// Settings other than `d`, `eta` and `chi_max`.
    pub base: TrainConfig,
    pub seed: u64,
    pub missing_grid: Vec<f64>,
    /// Caps the validation instances per fold.
    pub max_validation: Option<usize>,
}

impl Default for TuneOptions {
    fn default() -> Self {
        Self {
            space: SearchSpace::default(),
            base: TrainConfig::default(),
            seed: 0,
            missing_grid: missing_grid(),
            max_validation: None,
        }
    }
}

/// Applies trial parameters to a base configuration.
pub fn trial_config(base: &TrainConfig, p: &TrialParams) -> TrainConfig {
    TrainConfig {
        d: p.d,
        eta: p.eta,
        chi_max: p.chi_max,
        chi_init: base.chi_init.min(p.chi_max),
        ..base.clone()
    }
}

/// LHS search with k-fold cross-validation on `dataset`. Classification
/// folds are stratified.
pub fn tune(dataset: &Dataset, task: Task, opts: &TuneOptions) -> Result<SearchResult> {
    opts.space.validate()?;
    let folds = match task {
        Task::Imputation => kfold(dataset.len(), opts.space.folds, opts.seed)?,
        Task::Classification => {
            resample_folds(dataset, opts.space.folds, 1.0 / opts.space.folds as f64, true, opts.seed)?
        }
    };
    lhs_search(&opts.space, opts.seed, |params, f| {
        let split = &folds[f];
        let train = dataset.subset(&split.train);
        let n_val = opts.max_validation.map_or(split.test.len(), |m| m.min(split.test.len()));
        let validation = dataset.subset(&split.test[..n_val]);
        let config = trial_config(&opts.base, params);
        match task {
            Task::Imputation => imputation_objective(&train, &validation, &config, &opts.missing_grid, opts.seed),
            Task::Classification => classification_objective(&train, &validation, &config),
        }
    })
}
