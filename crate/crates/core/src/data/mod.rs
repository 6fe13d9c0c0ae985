//! Datasets, synthetic generators, the evaluation protocol and hyperparameter
//! search.
//!
//! CSV layout: one instance per row, an optional header, and an optional last
//! column named `label` holding 1-based class labels. Missing values are
//! written as `NaN` (empty cells are read as missing too).

mod baseline;
mod masking;
mod nts;
mod resample;
mod search;
pub mod tuning;

use std::io::{Read, Write};
use std::path::Path;

pub use baseline::nn1_impute;
pub use masking::{block_len, mae, mask_contiguous};
pub use nts::{generate_nts, NtsParams, Phase};
pub use resample::{kfold, resample_folds, Split};
pub use search::{lhs_search, SearchResult, SearchSpace, Trial, TrialParams};
pub use tuning::{imputation_mae, missing_grid, nn1_mae, trial_config, tune, Task, TuneOptions};

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    /// `N × T` amplitudes; `NaN` marks a missing value.
    pub values: Vec<Vec<f64>>,
    /// 1-based class labels.
    pub labels: Option<Vec<usize>>,
    /// `true` = observed.
    pub mask: Option<Vec<Vec<bool>>>,
}

impl Dataset {
    pub fn new(values: Vec<Vec<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        let ds = Self {
            values,
            labels,
            mask: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(first) = self.values.first() {
            let t = first.len();
            if t == 0 {
                return Err(Error::Dimension("series must have at least one sample".into()));
            }
            if let Some(i) = self.values.iter().position(|r| r.len() != t) {
                return Err(Error::Dimension(format!(
                    "row {i} has {} samples, expected {t}",
                    self.values[i].len()
                )));
            }
        }
        if let Some(labels) = &self.labels {
            if labels.len() != self.values.len() {
                return Err(Error::Dimension(format!("{} labels for {} rows", labels.len(), self.values.len())));
            }
            if let Some(i) = labels.iter().position(|&l| l == 0) {
                return Err(Error::Domain(format!("row {i}: labels are 1-based")));
            }
        }
        if let Some(mask) = &self.mask {
            if mask.len() != self.values.len() || mask.iter().zip(&self.values).any(|(m, v)| m.len() != v.len()) {
                return Err(Error::Dimension("mask shape differs from values".into()));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn series_len(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    /// Largest label, or 1 for unlabeled data.
    pub fn n_labels(&self) -> usize {
        self.labels.as_ref().and_then(|l| l.iter().copied().max()).unwrap_or(1)
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels.as_ref().map(|l| l[i])
    }

    pub fn is_observed(&self, i: usize, t: usize) -> bool {
        match &self.mask {
            Some(m) => m[i][t],
            None => !self.values[i][t].is_nan(),
        }
    }

    pub fn observed_mask(&self, i: usize) -> Vec<bool> {
        (0..self.values[i].len()).map(|t| self.is_observed(i, t)).collect()
    }

    /// Row `i` with every unobserved entry replaced by `NaN`.
    pub fn masked_row(&self, i: usize) -> Vec<f64> {
        self.values[i]
            .iter()
            .enumerate()
            .map(|(t, &v)| if self.is_observed(i, t) { v } else { f64::NAN })
            .collect()
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            values: indices.iter().map(|&i| self.values[i].clone()).collect(),
            labels: self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect()),
            mask: self.mask.as_ref().map(|m| indices.iter().map(|&i| m[i].clone()).collect()),
        }
    }

    /// Rows whose label is `label`.
    pub fn class_indices(&self, label: usize) -> Vec<usize> {
        match &self.labels {
            Some(l) => (0..l.len()).filter(|&i| l[i] == label).collect(),
            None => Vec::new(),
        }
    }

    pub fn from_csv_reader(reader: impl Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut has_label = false;
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if k == 0 && rec.iter().any(|f| !f.is_empty() && parse_cell(f).is_none()) {
                has_label = rec.iter().next_back().is_some_and(|f| f.eq_ignore_ascii_case("label"));
                continue;
            }
            let n = rec.len() - usize::from(has_label);
            let mut row = Vec::with_capacity(n);
            for (j, f) in rec.iter().take(n).enumerate() {
                row.push(parse_cell(f).ok_or_else(|| Error::Parse(format!("row {}, column {}: `{f}`", k + 1, j + 1)))?);
            }
            if has_label {
                let f = &rec[n];
                let l: usize = f
                    .parse()
                    .map_err(|_| Error::Parse(format!("row {}: label `{f}` is not a positive integer", k + 1)))?;
                labels.push(l);
            }
            rows.push(row);
        }
        let mut ds = Self::new(rows, has_label.then_some(labels))?;
        if ds.values.iter().flatten().any(|v| v.is_nan()) {
            ds.mask = Some(ds.values.iter().map(|r| r.iter().map(|v| !v.is_nan()).collect()).collect());
        }
        Ok(ds)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    /// Writes a header row `t1..tT[,label]`; unobserved entries become `NaN`.
    pub fn write_csv_to(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let t = self.series_len();
        let mut header: Vec<String> = (1..=t).map(|i| format!("t{i}")).collect();
        if self.labels.is_some() {
            header.push("label".into());
        }
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut rec: Vec<String> = self.masked_row(i).iter().map(|v| format_value(*v)).collect();
            if let Some(l) = self.label(i) {
                rec.push(l.to_string());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv_to(std::fs::File::create(path)?)
    }
}

fn parse_cell(f: &str) -> Option<f64> {
    if f.is_empty() || f.eq_ignore_ascii_case("nan") {
        return Some(f64::NAN);
    }
    f.parse::<f64>().ok()
}

/// Shortest representation that parses back to the same `f64`.
pub(crate) fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:?}")
    }
}
