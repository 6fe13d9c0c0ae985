//! Born-rule classification with a label-indexed model.
//!
//! Scores are the class densities `|f^l(x)|²` normalized to sum to one under a
//! uniform prior. The raw densities are unnormalized, so the scores are only
//! relative confidences; the predicted label is unaffected.

use crate::bundle::ModelBundle;
use crate::data::Dataset;
use crate::encoding::EncodedSeries;
use crate::error::{Error, Result};
use crate::mps::Mps;

#[derive(Clone, Debug, PartialEq)]
pub struct Prediction {
    /// 1-based.
    pub label: usize,
    pub scores: Vec<f64>,
}

/// Normalized scores and the argmax (lowest label on ties).
pub fn predict_encoded(mps: &Mps, enc: &EncodedSeries) -> Result<Prediction> {
    if mps.n_labels() < 2 {
        return Err(Error::Config("classification needs a model trained with at least two classes".into()));
    }
    let dens = mps.density(enc)?;
    let total: f64 = dens.iter().sum();
    let scores: Vec<f64> = if total > 0.0 && total.is_finite() {
        dens.iter().map(|p| p / total).collect()
    } else {
        vec![1.0 / dens.len() as f64; dens.len()]
    };
    let mut best = 0;
    for (l, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = l;
        }
    }
    Ok(Prediction { label: best + 1, scores })
}

pub fn predict(bundle: &ModelBundle, series: &[f64]) -> Result<Prediction> {
    if series.len() != bundle.series_len() {
        return Err(Error::Dimension(format!(
            "series of length {} for a model of length {}",
            series.len(),
            bundle.series_len()
        )));
    }
    let scaled = bundle.preprocessor.apply(series)?;
    let enc = bundle.feature_map.encode_series(&scaled)?;
    predict_encoded(&bundle.mps, &enc)
}

/// Fraction of correctly predicted test labels.
pub fn evaluate_accuracy(bundle: &ModelBundle, test: &Dataset) -> Result<f64> {
    let labels = test
        .labels
        .as_ref()
        .ok_or_else(|| Error::Domain("accuracy needs a labelled test set".into()))?;
    if test.is_empty() {
        return Err(Error::Domain("accuracy of an empty test set".into()));
    }
    let mut correct = 0usize;
    for (i, row) in test.values.iter().enumerate() {
        if predict(bundle, row).map_err(|e| e.at_instance(i))?.label == labels[i] {
            correct += 1;
        }
    }
    Ok(correct as f64 / test.len() as f64)
}
