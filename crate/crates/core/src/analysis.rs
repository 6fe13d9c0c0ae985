//! Single-site entanglement entropy of the learned distribution and how it
//! changes as the series is measured from left to right.

use std::fmt::Write as _;

use crate::bundle::ModelBundle;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::imputer::{ConditionedMps, Rdm};

/// Eigenvalues at or below this are left out of the entropy sum.
pub const EIGENVALUE_TOLERANCE: f64 = 1e-12;

/// Von Neumann entropy `-Σ λ ln λ` of an RDM, in nats.
pub fn see(rdm: &Rdm) -> Result<f64> {
    let s: f64 = rdm
        .eigenvalues()?
        .into_iter()
        .filter(|&l| l > EIGENVALUE_TOLERANCE)
        .map(|l| -l * l.ln())
        .sum();
    Ok(s.max(0.0))
}

/// Row `k`: entropy of every site after measuring the first `k` steps
/// (`None` for measured sites). `residual[k]` is the mean over unmeasured
/// sites.
#[derive(Clone, Debug, PartialEq)]
pub struct SeeProfile {
    pub matrix: Vec<Vec<Option<f64>>>,
    pub residual: Vec<f64>,
}

impl SeeProfile {
    /// `k,site,see` rows for unmeasured sites (sites are 1-based).
    pub fn heatmap_csv(&self) -> String {
        let mut s = String::from("k,site,see\n");
        for (k, row) in self.matrix.iter().enumerate() {
            for (t, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    let _ = writeln!(s, "{k},{},{v}", t + 1);
                }
            }
        }
        s
    }

    pub fn residual_csv(&self) -> String {
        let mut s = String::from("k,residual\n");
        for (k, r) in self.residual.iter().enumerate() {
            let _ = writeln!(s, "{k},{r}");
        }
        s
    }
}

/// Entropy profile of one series (data domain). Multi-class models need the
/// class to condition on.
pub fn conditional_see_profile(bundle: &ModelBundle, series: &[f64], class: Option<usize>) -> Result<SeeProfile> {
    let t_len = bundle.series_len();
    if series.len() != t_len {
        return Err(Error::Dimension(format!("series of length {} for a model of length {t_len}", series.len())));
    }
    let scaled = bundle.preprocessor.apply(series)?;
    let fm = &bundle.feature_map;
    let mut state = ConditionedMps::new(&bundle.mps, class)?;
    let mut matrix = Vec::with_capacity(t_len);
    let mut residual = Vec::with_capacity(t_len);
    for k in 0..t_len {
        let mut row = vec![None; t_len];
        let mut sum = 0.0;
        for t in k..t_len {
            let s = see(&state.single_site_rdm(t)?)?;
            row[t] = Some(s);
            sum += s;
        }
        matrix.push(row);
        residual.push(sum / (t_len - k) as f64);
        if k + 1 < t_len {
            state.project_site(fm, k, scaled[k])?;
        }
    }
    Ok(SeeProfile { matrix, residual })
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeanProfile {
    pub profile: SeeProfile,
    pub used: usize,
    /// Instances skipped because conditioning on them failed.
    pub skipped: usize,
}

/// Elementwise mean of the instance profiles. Labelled data on a
/// multi-class model conditions each instance on its own class.
pub fn dataset_mean_profile(bundle: &ModelBundle, dataset: &Dataset) -> Result<MeanProfile> {
    if dataset.is_empty() {
        return Err(Error::Empty("no instances to profile".into()));
    }
    let t_len = bundle.series_len();
    let mut sum = vec![vec![0.0; t_len]; t_len];
    let mut residual = vec![0.0; t_len];
    let (mut used, mut skipped) = (0, 0);
    for (i, row) in dataset.values.iter().enumerate() {
        let class = if bundle.mps.n_labels() > 1 { dataset.label(i) } else { None };
        match conditional_see_profile(bundle, row, class) {
            Ok(p) => {
                for (k, r) in p.matrix.iter().enumerate() {
                    for (t, v) in r.iter().enumerate() {
                        if let Some(v) = v {
                            sum[k][t] += v;
                        }
                    }
                    residual[k] += p.residual[k];
                }
                used += 1;
            }
            Err(e) if e.is_numeric() => {
                log::warn!("instance {i} skipped: {e}");
                skipped += 1;
            }
            Err(e) => return Err(e.at_instance(i)),
        }
    }
    if used == 0 {
        return Err(Error::Empty(format!("all {skipped} instances failed to condition")));
    }
    let n = used as f64;
    let matrix = sum
        .into_iter()
        .enumerate()
        .map(|(k, r)| r.into_iter().enumerate().map(|(t, v)| (t >= k).then_some(v / n)).collect())
        .collect();
    Ok(MeanProfile {
        profile: SeeProfile {
            matrix,
            residual: residual.into_iter().map(|r| r / n).collect(),
        },
        used,
        skipped,
    })
}
