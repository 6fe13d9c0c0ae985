//! Trajectory generation by sequential inverse-transform sampling.
//!
//! At each time step the conditional single-site density is inverted at a
//! uniform draw. Draws further than `α·WMAD` from the conditional median are
//! rejected and redrawn, which counters the broadening caused by the finite
//! basis; after `max_rejections` redraws the median itself is used.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::data::Dataset;
use crate::encoding::FeatureMap;
use crate::error::{Error, Result};
use crate::imputer::{ConditionedMps, Rdm};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Use `f64::INFINITY` to disable rejection.
    pub alpha: f64,
    pub max_rejections: usize,
    pub seed: u64,
    pub n_trajectories: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            alpha: 2.0,
            max_rejections: 100,
            seed: 0,
            n_trajectories: 1,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.max_rejections == 0 {
            return Err(Error::Config("max_rejections must be at least 1".into()));
        }
        Ok(())
    }
}

/// `x` with `F(x) = u` under the density of `rdm`.
pub fn inverse_cdf_sample(fm: &FeatureMap, rdm: &Rdm, u: f64) -> Result<f64> {
    rdm.density_table(fm)?.inverse_cdf(fm, u)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    /// Data-domain values.
    pub values: Vec<f64>,
    /// Encoding-domain values.
    pub encoded: Vec<f64>,
    /// Conditional median and WMAD at every sampled step (`None` for
    /// conditioned steps).
    pub bounds: Vec<Option<(f64, f64)>>,
    pub rejections: Vec<usize>,
    /// Steps where the rejection budget ran out and the median was used.
    pub fallbacks: Vec<bool>,
}

/// Samples one trajectory. `prefix` holds data-domain values fixing the first
/// `prefix.len()` steps; `index` selects an independent random stream.
pub fn sample_trajectory(
    bundle: &ModelBundle,
    config: &SamplerConfig,
    prefix: &[f64],
    class: Option<usize>,
    index: u64,
) -> Result<Trajectory> {
    config.validate()?;
    let t_len = bundle.series_len();
    if prefix.len() > t_len {
        return Err(Error::Dimension(format!("prefix of {} values for length {t_len}", prefix.len())));
    }
    let fm = &bundle.feature_map;
    let pre = &bundle.preprocessor;
    let (scaled, repair) = if prefix.is_empty() {
        (Vec::new(), crate::encoding::Repair::NONE)
    } else {
        if prefix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("conditioning values must be finite".into()));
        }
        pre.apply_with_repair(prefix)?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(index);

    let mut state = ConditionedMps::new(&bundle.mps, class)?;
    let mut traj = Trajectory {
        values: Vec::with_capacity(t_len),
        encoded: Vec::with_capacity(t_len),
        bounds: vec![None; t_len],
        rejections: vec![0; t_len],
        fallbacks: vec![false; t_len],
    };
    for (t, &y) in scaled.iter().enumerate() {
        state.project_site(fm, t, y)?;
        traj.encoded.push(y);
        traj.values.push(prefix[t]);
    }
    for t in scaled.len()..t_len {
        let table = state.single_site_rdm(t)?.density_table(fm)?;
        let m = table.median();
        let wm = table.weighted_median_abs_deviation(m);
        let bound = config.alpha * wm;
        let mut x = table.inverse_cdf(fm, rng.random::<f64>())?;
        // `!(… <= …)` keeps α = ∞, WMAD = 0 (a NaN bound) accepting
        while !((x - m).abs() <= bound) && bound.is_finite() {
            if traj.rejections[t] == config.max_rejections {
                x = m;
                traj.fallbacks[t] = true;
                break;
            }
            traj.rejections[t] += 1;
            x = table.inverse_cdf(fm, rng.random::<f64>())?;
        }
        state.project_site(fm, t, x)?;
        traj.bounds[t] = Some((m, wm));
        traj.encoded.push(x);
        traj.values.push(pre.invert_value(repair.undo(pre.target.0, x))?);
    }
    Ok(traj)
}

/// Rejection statistics of a batch of trajectories.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SamplingStats {
    /// Total rejections per time step.
    pub rejections_per_step: Vec<usize>,
    /// Median fallbacks per time step.
    pub fallbacks_per_step: Vec<usize>,
}

/// `n_trajectories` independent trajectories, trajectory `i` using random
/// stream `i` of the configured seed.
pub fn generate_dataset(bundle: &ModelBundle, config: &SamplerConfig, class: Option<usize>) -> Result<(Dataset, SamplingStats)> {
    let t_len = bundle.series_len();
    let mut stats = SamplingStats {
        rejections_per_step: vec![0; t_len],
        fallbacks_per_step: vec![0; t_len],
    };
    let mut values = Vec::with_capacity(config.n_trajectories);
    for i in 0..config.n_trajectories {
        let tr = sample_trajectory(bundle, config, &[], class, i as u64).map_err(|e| e.at_instance(i))?;
        for t in 0..t_len {
            stats.rejections_per_step[t] += tr.rejections[t];
            stats.fallbacks_per_step[t] += usize::from(tr.fallbacks[t]);
        }
        values.push(tr.values);
    }
    let labels = match (bundle.mps.n_labels(), class) {
        (l, Some(c)) if l > 1 => Some(vec![c; values.len()]),
        _ => None,
    };
    Ok((Dataset::new(values, labels)?, stats))
}
