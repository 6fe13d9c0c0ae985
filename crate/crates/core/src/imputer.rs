//! Conditioning a trained model on observed values and imputing the rest.
//!
//! [`ConditionedMps`] is a normalized chain over the still-unmeasured time
//! steps, kept in mixed-canonical form. Because the feature map is
//! orthonormal, tracing out a site is a plain contraction of its physical
//! index, so the single-site reduced density matrix at the orthogonality
//! center is just `ρ = Σ_{a,b} A[a,·,b] A[a,·,b]ᵀ`. Measuring a site contracts
//! `φ(x)` into it, divides by `√P(x)` and folds the resulting bond matrix into
//! a neighbour.

use crate::bundle::ModelBundle;
use crate::encoding::{DensityTable, FeatureMap};
use crate::error::{Error, Result};
use crate::mps::Mps;
use crate::tensor::{gemm, gemm_into, qr_orthogonalize, symmetric_eigenvalues, DenseTensor};

/// Projections with a density below this are treated as a model/data
/// conflict rather than round-off.
pub const PROBABILITY_FLOOR: f64 = 1e-14;

/// Single-site reduced density matrix (`d × d`, row-major).
#[derive(Clone, Debug, PartialEq)]
pub struct Rdm {
    d: usize,
    matrix: Vec<f64>,
}

impl Rdm {
    /// Checks symmetry, unit trace and positive semidefiniteness to `1e-10`.
    pub fn new(d: usize, matrix: Vec<f64>) -> Result<Self> {
        if matrix.len() != d * d {
            return Err(Error::Dimension(format!("RDM needs {} entries, got {}", d * d, matrix.len())));
        }
        for i in 0..d {
            for j in 0..i {
                if (matrix[i * d + j] - matrix[j * d + i]).abs() > 1e-10 {
                    return Err(Error::Domain("RDM is not symmetric".into()));
                }
            }
        }
        let trace: f64 = (0..d).map(|i| matrix[i * d + i]).sum();
        if (trace - 1.0).abs() > 1e-10 {
            return Err(Error::Domain(format!("RDM trace is {trace}")));
        }
        let rdm = Self { d, matrix };
        if rdm.eigenvalues()?.first().is_some_and(|&l| l < -1e-10) {
            return Err(Error::Domain("RDM is not positive semidefinite".into()));
        }
        Ok(rdm)
    }

    /// `φ(x)φ(x)ᵀ / ‖φ(x)‖²`.
    pub fn pure(phi: &[f64]) -> Result<Self> {
        let d = phi.len();
        let n2: f64 = phi.iter().map(|v| v * v).sum();
        Self::new(d, (0..d * d).map(|k| phi[k / d] * phi[k % d] / n2).collect())
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Eigenvalues in non-decreasing order.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        symmetric_eigenvalues(&self.matrix, self.d)
    }

    pub fn density_table(&self, fm: &FeatureMap) -> Result<DensityTable> {
        if fm.d() != self.d {
            return Err(Error::Dimension(format!("RDM has d={}, feature map d={}", self.d, fm.d())));
        }
        fm.density_table(&self.matrix)
    }
}

/// `F(x) = (1/Z) ∫_{-1}^{x} φᵀ ρ φ`.
pub fn conditional_cdf(fm: &FeatureMap, rdm: &Rdm, x: f64) -> Result<f64> {
    rdm.density_table(fm)?.cdf_at(fm, x)
}

/// Conditional median on the evaluation grid and the weighted median absolute
/// deviation around it.
pub fn median_estimate(fm: &FeatureMap, rdm: &Rdm) -> Result<(f64, f64)> {
    let table = rdm.density_table(fm)?;
    let m = table.median();
    Ok((m, table.weighted_median_abs_deviation(m)))
}

/// A normalized chain over the remaining (unmeasured) time steps.
#[derive(Clone, Debug)]
pub struct ConditionedMps {
    /// Rank-3 sites `(left, phys, right)`.
    sites: Vec<DenseTensor>,
    /// Original time index of every remaining site, increasing.
    times: Vec<usize>,
    center: usize,
    d: usize,
    log_probability: f64,
}

impl ConditionedMps {
    /// Starts from a trained chain. Multi-class chains must name the class
    /// (1-based) to condition on.
    pub fn new(mps: &Mps, class: Option<usize>) -> Result<Self> {
        let single = match (mps.n_labels(), class) {
            (1, None | Some(1)) => mps.clone(),
            (_, Some(c)) if c >= 1 => mps.class_slice(c - 1)?,
            (l, _) => {
                return Err(Error::Config(format!(
                    "a model with {l} classes needs a class (1..={l}) to condition on"
                )))
            }
        };
        let mut single = single;
        single.canonicalize(0)?;
        let sites = single
            .sites()
            .iter()
            .map(|s| {
                let sh = s.shape();
                s.clone().reshape(vec![sh[0], sh[1], sh[3]])
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            times: (0..sites.len()).collect(),
            sites,
            center: 0,
            d: mps.d(),
            log_probability: 0.0,
        })
    }

    pub fn remaining(&self) -> &[usize] {
        &self.times
    }

    pub fn is_fully_measured(&self) -> bool {
        self.sites.is_empty()
    }

    /// Sum of `ln P` over every projection so far.
    pub fn log_probability(&self) -> f64 {
        self.log_probability
    }

    pub fn d(&self) -> usize {
        self.d
    }

    fn position(&self, t: usize) -> Result<usize> {
        self.times
            .binary_search(&t)
            .map_err(|_| Error::Domain(format!("time step {t} is already measured or out of range")))
    }

    fn move_center(&mut self, to: usize) -> Result<()> {
        while self.center < to {
            let k = self.center;
            let sh = self.sites[k].shape().to_vec();
            let m = DenseTensor::matrix(sh[0] * sh[1], sh[2], self.sites[k].data().to_vec())?;
            let (q, r) = qr_orthogonalize(&m)?;
            let kk = q.shape()[1];
            self.sites[k] = q.reshape(vec![sh[0], sh[1], kk])?;
            let nsh = self.sites[k + 1].shape().to_vec();
            let data = gemm(r.data(), kk, nsh[0], self.sites[k + 1].data(), nsh[1] * nsh[2]);
            self.sites[k + 1] = DenseTensor::new(vec![kk, nsh[1], nsh[2]], data)?;
            self.center += 1;
        }
        while self.center > to {
            let k = self.center;
            let sh = self.sites[k].shape().to_vec();
            let m = DenseTensor::matrix(sh[0], sh[1] * sh[2], self.sites[k].data().to_vec())?.transpose()?;
            let (q, r) = qr_orthogonalize(&m)?;
            let kk = q.shape()[1];
            self.sites[k] = q.transpose()?.reshape(vec![kk, sh[1], sh[2]])?;
            let psh = self.sites[k - 1].shape().to_vec();
            let mut data = vec![0.0; psh[0] * psh[1] * kk];
            gemm_into(&mut data, self.sites[k - 1].data(), psh[0] * psh[1], psh[2], false, r.data(), kk, true);
            self.sites[k - 1] = DenseTensor::new(vec![psh[0], psh[1], kk], data)?;
            self.center -= 1;
        }
        Ok(())
    }

    /// Reduced density matrix of time step `t`, all other remaining sites
    /// traced out.
    pub fn single_site_rdm(&mut self, t: usize) -> Result<Rdm> {
        let k = self.position(t)?;
        self.move_center(k)?;
        let a = &self.sites[k];
        let sh = a.shape();
        let (l, d, r) = (sh[0], sh[1], sh[2]);
        // rows s, columns (a, b)
        let p = a.permute(&[1, 0, 2]);
        let mut rho = vec![0.0; d * d];
        gemm_into(&mut rho, p.data(), d, l * r, false, p.data(), d, true);
        let trace: f64 = (0..d).map(|i| rho[i * d + i]).sum();
        for i in 0..d {
            for j in 0..i {
                let v = 0.5 * (rho[i * d + j] + rho[j * d + i]) / trace;
                rho[i * d + j] = v;
                rho[j * d + i] = v;
            }
            rho[i * d + i] /= trace;
        }
        Rdm::new(d, rho)
    }

    /// Density `φ(x)ᵀ ρ_t φ(x)` of value `x` at time step `t`.
    pub fn marginal_density(&mut self, fm: &FeatureMap, t: usize, x: f64) -> Result<f64> {
        let rho = self.single_site_rdm(t)?;
        fm.quadratic_form(rho.matrix(), x)
    }

    /// Measures time step `t` at encoding-domain value `x`, returning the
    /// conditional density `P(x)` of that value.
    pub fn project_site(&mut self, fm: &FeatureMap, t: usize, x: f64) -> Result<f64> {
        let phi = fm.encode(x)?;
        self.project_encoded(t, &phi)
    }

    fn project_encoded(&mut self, t: usize, phi: &[f64]) -> Result<f64> {
        let k = self.position(t)?;
        self.move_center(k)?;
        let a = &self.sites[k];
        let sh = a.shape();
        let (l, d, r) = (sh[0], sh[1], sh[2]);
        if phi.len() != d {
            return Err(Error::Dimension(format!("feature vector has {} entries, site has {d}", phi.len())));
        }
        let mut m = vec![0.0; l * r];
        for ai in 0..l {
            for (s, &p) in phi.iter().enumerate() {
                let src = &a.data()[(ai * d + s) * r..(ai * d + s + 1) * r];
                for (o, v) in m[ai * r..(ai + 1) * r].iter_mut().zip(src) {
                    *o += p * v;
                }
            }
        }
        let prob: f64 = m.iter().map(|v| v * v).sum();
        if !(prob >= PROBABILITY_FLOOR) {
            return Err(Error::NearZeroProbability {
                site: t,
                probability: prob,
            });
        }
        let inv = 1.0 / prob.sqrt();
        m.iter_mut().for_each(|v| *v *= inv);
        self.sites.remove(k);
        self.times.remove(k);
        if k < self.sites.len() {
            let nsh = self.sites[k].shape().to_vec();
            let data = gemm(&m, l, r, self.sites[k].data(), nsh[1] * nsh[2]);
            self.sites[k] = DenseTensor::new(vec![l, nsh[1], nsh[2]], data)?;
            self.center = k;
        } else if k > 0 {
            let psh = self.sites[k - 1].shape().to_vec();
            let data = gemm(self.sites[k - 1].data(), psh[0] * psh[1], psh[2], &m, r);
            self.sites[k - 1] = DenseTensor::new(vec![psh[0], psh[1], r], data)?;
            self.center = k - 1;
        } else {
            self.center = 0;
        }
        self.log_probability += prob.ln();
        Ok(prob)
    }

    /// `⟨W̃|W̃⟩` of the remaining chain (1 for a fully measured chain).
    pub fn norm_squared(&self) -> f64 {
        if self.sites.is_empty() {
            return 1.0;
        }
        let mut env = vec![1.0];
        for s in &self.sites {
            let sh = s.shape();
            let (l, mid, r) = (sh[0], sh[1], sh[2]);
            let ea = gemm(&env, l, l, s.data(), mid * r);
            let mut next = vec![0.0; r * r];
            gemm_into(&mut next, &ea, r, l * mid, true, s.data(), r, false);
            env = next;
        }
        env[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImputationResult {
    /// Full series in the data domain; observed entries are returned as given.
    pub series: Vec<f64>,
    pub imputed_mask: Vec<bool>,
    /// WMAD half-width of every imputed entry, `None` elsewhere.
    pub uncertainty: Vec<Option<f64>>,
    /// `true` when `uncertainty` is in the encoding domain because the
    /// preprocessing is not affine.
    pub uncertainty_in_encoding_domain: bool,
    /// Imputed values in the encoding domain, `NaN` at observed entries.
    pub encoded_estimates: Vec<f64>,
    /// Sum of the log conditional densities of every projection.
    pub conditional_log_density: f64,
}

/// Imputes the entries of `series` where `observed` is `false`. Multi-class
/// models need `class`.
pub fn impute(bundle: &ModelBundle, series: &[f64], observed: &[bool], class: Option<usize>) -> Result<ImputationResult> {
    let t_len = bundle.series_len();
    if series.len() != t_len || observed.len() != t_len {
        return Err(Error::Dimension(format!(
            "series of length {} for a model of length {t_len}",
            series.len()
        )));
    }
    let n_obs = observed.iter().filter(|o| **o).count();
    if n_obs == 0 {
        return Err(Error::Unsupported("cannot impute a series with no observed values".into()));
    }
    if series.iter().zip(observed).any(|(v, &o)| o && !v.is_finite()) {
        return Err(Error::Numeric("observed values must be finite".into()));
    }
    if n_obs == t_len {
        return Ok(ImputationResult {
            series: series.to_vec(),
            imputed_mask: vec![false; t_len],
            uncertainty: vec![None; t_len],
            uncertainty_in_encoding_domain: false,
            encoded_estimates: vec![f64::NAN; t_len],
            conditional_log_density: 0.0,
        });
    }
    let fm = &bundle.feature_map;
    let pre = &bundle.preprocessor;
    let masked: Vec<f64> = series.iter().zip(observed).map(|(&v, &o)| if o { v } else { f64::NAN }).collect();
    let (scaled, repair) = pre.apply_with_repair(&masked)?;

    let mut state = ConditionedMps::new(&bundle.mps, class)?;
    for t in (0..t_len).filter(|&t| observed[t]) {
        state.project_site(fm, t, scaled[t])?;
    }
    let mut encoded = vec![f64::NAN; t_len];
    let mut wmad = vec![None; t_len];
    for t in (0..t_len).filter(|&t| !observed[t]) {
        let rho = state.single_site_rdm(t)?;
        let (x, w) = median_estimate(fm, &rho)?;
        state.project_site(fm, t, x)?;
        encoded[t] = x;
        wmad[t] = Some(w);
    }

    let a = pre.target.0;
    let affine = pre.affine_scale();
    let mut out = series.to_vec();
    let mut uncertainty = vec![None; t_len];
    for t in (0..t_len).filter(|&t| !observed[t]) {
        out[t] = pre.invert_value(repair.undo(a, encoded[t]))?;
        let w = wmad[t].expect("set for every missing entry");
        uncertainty[t] = Some(match affine {
            Some(k) => w / repair.scale * k,
            None => w,
        });
    }
    Ok(ImputationResult {
        series: out,
        imputed_mask: observed.iter().map(|o| !o).collect(),
        uncertainty,
        uncertainty_in_encoding_domain: affine.is_none(),
        encoded_estimates: encoded,
        conditional_log_density: state.log_probability(),
    })
}
