//! Two-site sweeping optimizer.
//!
//! Each sweep is a right-to-left pass followed by a left-to-right pass over
//! the bonds. At every bond the two sites are merged into a bond tensor
//! `B[a, s1, s2, l, b]`, the averaged negative log-likelihood is descended
//! with a normalized-gradient step, and `B` is split back by truncated SVD.
//! The label index travels with the orthogonality center, so environments
//! (contractions of every other site with each training instance) never
//! carry it and can be updated incrementally.

use std::fmt::Write as _;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::data::Dataset;
use crate::encoding::{EncodedSeries, FeatureMap, PreprocessKind, Preprocessor, DEFAULT_GRID_NODES};
use crate::error::{Error, Result};
use crate::mps::Mps;
use crate::tensor::{gemm, gemm_into, svd_truncate, DenseTensor, TruncationReport, DEFAULT_CUTOFF};

/// Floor applied to `|f|²` inside the logarithm when reporting sweep losses.
const LOSS_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub eta: f64,
    pub chi_max: usize,
    pub d: usize,
    pub n_sweeps: usize,
    pub chi_init: usize,
    pub cutoff: f64,
    pub seed: u64,
    /// Stop once a sweep improves the loss by less than this.
    pub loss_tolerance: Option<f64>,
    /// `None` picks min–max for unlabeled data and robust-sigmoid for
    /// multi-class data.
    pub preprocess: Option<PreprocessKind>,
    pub grid_nodes: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta: 0.05,
            chi_max: 20,
            d: 10,
            n_sweeps: 10,
            chi_init: 4,
            cutoff: DEFAULT_CUTOFF,
            seed: 0,
            loss_tolerance: None,
            preprocess: None,
            grid_nodes: DEFAULT_GRID_NODES,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::Config(format!("eta must be positive, got {}", self.eta)));
        }
        if self.chi_init == 0 || self.chi_max < self.chi_init {
            return Err(Error::Config(format!(
                "need chi_max >= chi_init >= 1, got chi_max={} chi_init={}",
                self.chi_max, self.chi_init
            )));
        }
        if self.d == 0 {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if !(self.cutoff >= 0.0) {
            return Err(Error::Config(format!("cutoff must be non-negative, got {}", self.cutoff)));
        }
        if let Some(tol) = self.loss_tolerance {
            if !(tol >= 0.0) {
                return Err(Error::Config(format!("loss_tolerance must be non-negative, got {tol}")));
            }
        }
        Ok(())
    }

    /// Parses a flat `key = value` file. Unspecified keys keep their defaults.
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Parse(format!("train config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("train config serializes")
    }

    pub fn preprocess_kind(&self, n_labels: usize) -> PreprocessKind {
        self.preprocess.unwrap_or(if n_labels > 1 {
            PreprocessKind::RobustSigmoid
        } else {
            PreprocessKind::MinMax
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    pub initial_loss: f64,
    pub loss_per_sweep: Vec<f64>,
    pub final_loss: f64,
    pub sweeps_run: usize,
    /// Bond updates skipped because of a zero overlap or gradient.
    pub skipped_updates: usize,
    /// Largest discarded weight of any truncation.
    pub max_discarded_weight: f64,
}

impl TrainReport {
    /// One `sweep,loss` row per completed sweep (1-based). The loss of the
    /// initial model is in `initial_loss`.
    pub fn loss_csv(&self) -> String {
        let mut s = String::from("sweep,loss\n");
        for (i, l) in self.loss_per_sweep.iter().enumerate() {
            let _ = writeln!(s, "{},{l}", i + 1);
        }
        s
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    LeftToRight,
    RightToLeft,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// A batch of encoded instances stored as one `N × T × d` array.
#[derive(Clone, Debug)]
pub(crate) struct Batch {
    n: usize,
    t: usize,
    d: usize,
    phi: Vec<f64>,
    /// 0-based labels.
    labels: Vec<usize>,
}

impl Batch {
    pub(crate) fn new(encoded: &[EncodedSeries], labels: &[usize], n_labels: usize) -> Result<Self> {
        if encoded.is_empty() {
            return Err(Error::Empty("training batch is empty".into()));
        }
        if labels.len() != encoded.len() {
            return Err(Error::Dimension(format!(
                "{} labels for {} instances",
                labels.len(),
                encoded.len()
            )));
        }
        let (t, d) = (encoded[0].len(), encoded[0].d());
        let mut phi = Vec::with_capacity(encoded.len() * t * d);
        for (i, e) in encoded.iter().enumerate() {
            if e.len() != t || e.d() != d {
                return Err(Error::Dimension(format!("instance {i} has shape {}×{}", e.len(), e.d())).at_instance(i));
            }
            phi.extend_from_slice(e.values());
        }
        let labels = labels
            .iter()
            .enumerate()
            .map(|(i, &l)| {
                if l == 0 || l > n_labels {
                    Err(Error::Domain(format!("label {l} outside 1..={n_labels}")).at_instance(i))
                } else {
                    Ok(l - 1)
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            n: encoded.len(),
            t,
            d,
            phi,
            labels,
        })
    }

    fn phi(&self, n: usize, t: usize) -> &[f64] {
        let off = (n * self.t + t) * self.d;
        &self.phi[off..off + self.d]
    }
}

/// `env ⊗ φ_t`: rows `n`, columns `(a, s)`.
fn outer_left(env: &[f64], chi: usize, batch: &Batch, t: usize) -> Vec<f64> {
    let d = batch.d;
    let mut x = vec![0.0; batch.n * chi * d];
    for n in 0..batch.n {
        let phi = batch.phi(n, t);
        let row = &mut x[n * chi * d..(n + 1) * chi * d];
        for a in 0..chi {
            let e = env[n * chi + a];
            for s in 0..d {
                row[a * d + s] = e * phi[s];
            }
        }
    }
    x
}

/// `φ_t ⊗ env`: rows `n`, columns `(s, b)`.
fn outer_right(env: &[f64], chi: usize, batch: &Batch, t: usize) -> Vec<f64> {
    let d = batch.d;
    let mut y = vec![0.0; batch.n * d * chi];
    for n in 0..batch.n {
        let phi = batch.phi(n, t);
        let row = &mut y[n * d * chi..(n + 1) * d * chi];
        for s in 0..d {
            for b in 0..chi {
                row[s * chi + b] = phi[s] * env[n * chi + b];
            }
        }
    }
    y
}

/// Extends a left environment over site `t`, selecting each instance's own
/// label if the site carries the label axis.
fn absorb_left(env: &[f64], batch: &Batch, t: usize, site: &DenseTensor) -> Vec<f64> {
    let sh = site.shape();
    let (l, d, lab, r) = (sh[0], sh[1], sh[2], sh[3]);
    let x = outer_left(env, l, batch, t);
    let z = gemm(&x, batch.n, l * d, site.data(), lab * r);
    if lab == 1 {
        return z;
    }
    let mut out = vec![0.0; batch.n * r];
    for n in 0..batch.n {
        let off = n * lab * r + batch.labels[n] * r;
        out[n * r..(n + 1) * r].copy_from_slice(&z[off..off + r]);
    }
    out
}

/// Extends a right environment over site `t` (which must not carry a label).
fn absorb_right(env: &[f64], batch: &Batch, t: usize, site: &DenseTensor) -> Vec<f64> {
    let sh = site.shape();
    let (l, d, r) = (sh[0], sh[1], sh[3]);
    debug_assert_eq!(sh[2], 1);
    let y = outer_right(env, r, batch, t);
    let mut out = vec![0.0; batch.n * l];
    gemm_into(&mut out, &y, batch.n, d * r, false, site.data(), l, true);
    out
}

/// Everything the loss at one bond depends on besides the bond tensor.
#[derive(Clone, Debug)]
pub struct BondEnvironment {
    n: usize,
    /// `χ_left · d`
    left_dim: usize,
    /// `d · χ_right`
    right_dim: usize,
    n_labels: usize,
    x: Vec<f64>,
    r: Vec<f64>,
    labels: Vec<usize>,
}

impl BondEnvironment {
    /// Builds the environment of bond `(bond, bond + 1)` from scratch. The
    /// label must sit on one of the two sites; labels are 1-based.
    pub fn from_mps(mps: &Mps, encoded: &[EncodedSeries], labels: &[usize], bond: usize) -> Result<Self> {
        if bond + 1 >= mps.len() {
            return Err(Error::Dimension(format!("bond {bond} outside chain of {} sites", mps.len())));
        }
        if mps.label_site() != bond && mps.label_site() != bond + 1 {
            return Err(Error::Config("the label must sit on one of the bond's sites".into()));
        }
        let batch = Batch::new(encoded, labels, mps.n_labels())?;
        let mut lenv = vec![1.0; batch.n];
        for t in 0..bond {
            lenv = absorb_left(&lenv, &batch, t, mps.site(t));
        }
        let mut renv = vec![1.0; batch.n];
        for t in (bond + 2..mps.len()).rev() {
            renv = absorb_right(&renv, &batch, t, mps.site(t));
        }
        let chi_l = mps.site(bond).shape()[0];
        let chi_r = mps.site(bond + 1).shape()[3];
        Ok(Self::assemble(&batch, &lenv, chi_l, &renv, chi_r, bond, mps.n_labels()))
    }

    fn assemble(batch: &Batch, lenv: &[f64], chi_l: usize, renv: &[f64], chi_r: usize, bond: usize, n_labels: usize) -> Self {
        Self {
            n: batch.n,
            left_dim: chi_l * batch.d,
            right_dim: batch.d * chi_r,
            n_labels,
            x: outer_left(lenv, chi_l, batch, bond),
            r: outer_right(renv, chi_r, batch, bond + 1),
            labels: batch.labels.clone(),
        }
    }

    fn check(&self, bond: &DenseTensor) -> Result<()> {
        let sh = bond.shape();
        if sh.len() != 5 || sh[0] * sh[1] != self.left_dim || sh[2] * sh[4] != self.right_dim || sh[3] != self.n_labels {
            return Err(Error::Dimension(format!("bond tensor shape {sh:?} does not fit its environment")));
        }
        Ok(())
    }

    /// `Z = X · B`, rows `n`, columns `(s2, l, b)`.
    fn project(&self, bond: &DenseTensor) -> Vec<f64> {
        gemm(&self.x, self.n, self.left_dim, bond.data(), self.right_dim * self.n_labels)
    }

    fn overlaps_from(&self, z: &[f64], chi_r: usize) -> Vec<f64> {
        let cols = self.right_dim * self.n_labels;
        let d = self.right_dim / chi_r;
        (0..self.n)
            .map(|n| {
                let zr = &z[n * cols..(n + 1) * cols];
                let rr = &self.r[n * self.right_dim..(n + 1) * self.right_dim];
                let l = self.labels[n];
                let mut f = 0.0;
                for s in 0..d {
                    let zs = &zr[(s * self.n_labels + l) * chi_r..(s * self.n_labels + l + 1) * chi_r];
                    let rs = &rr[s * chi_r..(s + 1) * chi_r];
                    f += zs.iter().zip(rs).map(|(a, b)| a * b).sum::<f64>();
                }
                f
            })
            .collect()
    }

    /// True-label overlaps `f_n` of every instance for the given bond tensor.
    pub fn overlaps(&self, bond: &DenseTensor) -> Result<Vec<f64>> {
        self.check(bond)?;
        Ok(self.overlaps_from(&self.project(bond), bond.shape()[4]))
    }
}

/// Mean negative log-likelihood `-(1/N) Σ log f_n²`.
fn mean_nll(f: &[f64]) -> Result<f64> {
    let mut s = 0.0;
    for (i, &v) in f.iter().enumerate() {
        let p = v * v;
        if !(p > 0.0) || !p.is_finite() {
            return Err(Error::InfiniteLoss { instance: i });
        }
        s -= p.ln();
    }
    Ok(s / f.len() as f64)
}

fn floored_nll(f: &[f64]) -> f64 {
    -f.iter().map(|v| (v * v).max(LOSS_FLOOR).ln()).sum::<f64>() / f.len() as f64
}

/// Loss at a bond as a function of the bond tensor alone.
pub fn bond_loss(bond: &DenseTensor, env: &BondEnvironment) -> Result<f64> {
    mean_nll(&env.overlaps(bond)?)
}

/// Gradient of the batch loss with respect to the bond tensor, together with
/// the overlaps it was computed from.
fn gradient_with_overlaps(bond: &DenseTensor, env: &BondEnvironment) -> Result<(DenseTensor, Vec<f64>)> {
    env.check(bond)?;
    let chi_r = bond.shape()[4];
    let d2 = bond.shape()[2];
    let lab = env.n_labels;
    let f = env.overlaps_from(&env.project(bond), chi_r);
    let cols = env.right_dim * lab;
    let mut c = vec![0.0; env.n * cols];
    let scale = -2.0 / env.n as f64;
    for n in 0..env.n {
        let fn_ = f[n];
        if fn_ == 0.0 || !fn_.is_finite() {
            return Err(Error::InfiniteLoss { instance: n });
        }
        let coef = scale / fn_;
        let l = env.labels[n];
        let rr = &env.r[n * env.right_dim..(n + 1) * env.right_dim];
        let row = &mut c[n * cols..(n + 1) * cols];
        for s in 0..d2 {
            let dst = &mut row[(s * lab + l) * chi_r..(s * lab + l + 1) * chi_r];
            for (o, v) in dst.iter_mut().zip(&rr[s * chi_r..(s + 1) * chi_r]) {
                *o = coef * v;
            }
        }
    }
    let mut g = vec![0.0; env.left_dim * cols];
    gemm_into(&mut g, &env.x, env.left_dim, env.n, true, &c, cols, false);
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("gradient overflowed".into()));
    }
    Ok((DenseTensor::new(bond.shape().to_vec(), g)?, f))
}

/// `∂L/∂B` for `L = -(1/N) Σ_n log f_n(B)²`.
pub fn bond_gradient(bond: &DenseTensor, env: &BondEnvironment) -> Result<DenseTensor> {
    gradient_with_overlaps(bond, env).map(|(g, _)| g)
}

/// `B' = B - η g/‖g‖`, then `B' / ‖B'‖`.
pub fn tsgo_update(bond: &DenseTensor, gradient: &DenseTensor, eta: f64) -> Result<DenseTensor> {
    if bond.shape() != gradient.shape() {
        return Err(Error::Dimension("gradient and bond tensor shapes differ".into()));
    }
    let gn = gradient.norm();
    if !(gn > 0.0) {
        return Err(Error::ZeroGradient);
    }
    let step = eta / gn;
    let data: Vec<f64> = bond.data().iter().zip(gradient.data()).map(|(b, g)| b - step * g).collect();
    let mut out = DenseTensor::new(bond.shape().to_vec(), data)?;
    let n = out.norm();
    if !(n > 0.0) || !n.is_finite() {
        return Err(Error::Numeric(format!("updated bond tensor has norm {n}")));
    }
    out.scale(1.0 / n);
    Ok(out)
}

/// Merges sites `i` and `i + 1` into `B[a, s1, s2, l, b]`.
pub fn merge_bond(mps: &Mps, i: usize) -> Result<DenseTensor> {
    let (left, right) = (mps.site(i), mps.site(i + 1));
    let (ls, rs) = (left.shape(), right.shape());
    let (a, d, c, b) = (ls[0], ls[1], ls[3], rs[3]);
    if ls[2] > 1 && rs[2] > 1 {
        return Err(Error::Dimension("both sites carry a label axis".into()));
    }
    if ls[2] == 1 {
        let lab = rs[2];
        let data = gemm(left.data(), a * d, c, right.data(), d * lab * b);
        DenseTensor::new(vec![a, d, d, lab, b], data)
    } else {
        let lab = ls[2];
        let data = gemm(left.data(), a * d * lab, c, right.data(), d * b);
        Ok(DenseTensor::new(vec![a, d, lab, d, b], data)?.permute(&[0, 1, 3, 2, 4]))
    }
}

/// Splits `B[a, s1, s2, l, b]` into two rank-4 sites by truncated SVD. The
/// singular values are absorbed toward the next bond of the sweep; the label
/// axis goes to `label_goes_with`.
pub fn split_bond(
    bond: &DenseTensor,
    chi_max: usize,
    cutoff: f64,
    direction: Direction,
    label_goes_with: Side,
) -> Result<(DenseTensor, DenseTensor, TruncationReport)> {
    let sh = bond.shape();
    if sh.len() != 5 {
        return Err(Error::Dimension(format!("bond tensor must have rank 5, got {}", sh.len())));
    }
    let (a, d1, d2, lab, b) = (sh[0], sh[1], sh[2], sh[3], sh[4]);
    let (m, rows, cols) = match label_goes_with {
        Side::Left => (bond.permute(&[0, 1, 3, 2, 4]), a * d1 * lab, d2 * b),
        Side::Right => (bond.clone(), a * d1, d2 * lab * b),
    };
    let svd = svd_truncate(&m.reshape(vec![rows, cols])?, chi_max, cutoff)?;
    let k = svd.report.kept;
    let mut u = svd.u.into_data();
    let v = svd.v;
    // vᵀ as k × cols
    let mut vt = v.transpose()?.into_data();
    match direction {
        Direction::RightToLeft => {
            for row in u.chunks_mut(k) {
                for (x, s) in row.iter_mut().zip(&svd.s) {
                    *x *= s;
                }
            }
        }
        Direction::LeftToRight => {
            for (row, s) in vt.chunks_mut(cols).zip(&svd.s) {
                for x in row {
                    *x *= s;
                }
            }
        }
    }
    let (left, right) = match label_goes_with {
        Side::Left => (
            DenseTensor::new(vec![a, d1, lab, k], u)?,
            DenseTensor::new(vec![k, d2, 1, b], vt)?,
        ),
        Side::Right => (
            DenseTensor::new(vec![a, d1, 1, k], u)?,
            DenseTensor::new(vec![k, d2, lab, b], vt)?,
        ),
    };
    Ok((left, right, svd.report))
}

/// Mean NLL over a labelled batch (labels 1-based; use 1 for single-class
/// models). Each instance contributes only its own class slice.
pub fn nll_loss(mps: &Mps, encoded: &[EncodedSeries], labels: &[usize]) -> Result<f64> {
    if encoded.is_empty() {
        return Err(Error::Empty("loss of an empty batch".into()));
    }
    if labels.len() != encoded.len() {
        return Err(Error::Dimension(format!("{} labels for {} instances", labels.len(), encoded.len())));
    }
    let mut f = Vec::with_capacity(encoded.len());
    for (i, (e, &l)) in encoded.iter().zip(labels).enumerate() {
        if l == 0 || l > mps.n_labels() {
            return Err(Error::Domain(format!("label {l} outside 1..={}", mps.n_labels())).at_instance(i));
        }
        f.push(mps.overlap(e)?[l - 1]);
    }
    mean_nll(&f)
}

struct Sweeper<'a> {
    mps: Mps,
    batch: &'a Batch,
    config: &'a TrainConfig,
    /// `lenv[i]`: sites `0..i` contracted, `N × χ_left(i)`.
    lenv: Vec<Vec<f64>>,
    /// `renv[i]`: sites `i+1..T` contracted, `N × χ_right(i)`.
    renv: Vec<Vec<f64>>,
    skipped: usize,
    max_discarded: f64,
}

impl<'a> Sweeper<'a> {
    fn new(mut mps: Mps, batch: &'a Batch, config: &'a TrainConfig) -> Result<Self> {
        let t = mps.len();
        if mps.label_site() != t - 1 {
            return Err(Error::Config("training expects the label on the rightmost site".into()));
        }
        if mps.ortho_center() != Some(t - 1) {
            mps.canonicalize(t - 1)?;
        }
        let mut lenv = vec![Vec::new(); t];
        lenv[0] = vec![1.0; batch.n];
        for i in 0..t - 1 {
            lenv[i + 1] = absorb_left(&lenv[i], batch, i, mps.site(i));
        }
        let mut renv = vec![Vec::new(); t];
        renv[t - 1] = vec![1.0; batch.n];
        Ok(Self {
            mps,
            batch,
            config,
            lenv,
            renv,
            skipped: 0,
            max_discarded: 0.0,
        })
    }

    fn update(&mut self, i: usize, direction: Direction) -> Result<()> {
        let bond = merge_bond(&self.mps, i)?;
        let chi_l = bond.shape()[0];
        let chi_r = bond.shape()[4];
        let env = BondEnvironment::assemble(
            self.batch,
            &self.lenv[i],
            chi_l,
            &self.renv[i + 1],
            chi_r,
            i,
            self.mps.n_labels(),
        );
        let updated = match gradient_with_overlaps(&bond, &env).and_then(|(g, _)| tsgo_update(&bond, &g, self.config.eta)) {
            Ok(b) => b,
            Err(e @ (Error::InfiniteLoss { .. } | Error::ZeroGradient | Error::Numeric(_))) => {
                debug!("bond {i}: update skipped ({e})");
                self.skipped += 1;
                bond
            }
            Err(e) => return Err(e),
        };
        let side = match direction {
            Direction::RightToLeft => Side::Left,
            Direction::LeftToRight => Side::Right,
        };
        let (mut left, mut right, report) = split_bond(&updated, self.config.chi_max, self.config.cutoff, direction, side)?;
        self.max_discarded = self.max_discarded.max(report.discarded_weight);
        // keep the chain at unit norm despite truncation
        let kept: f64 = report.spectrum.iter().map(|s| s * s).sum::<f64>().sqrt();
        if kept > 0.0 {
            match direction {
                Direction::RightToLeft => left.scale(1.0 / kept),
                Direction::LeftToRight => right.scale(1.0 / kept),
            }
        }
        self.mps.sites[i] = left;
        self.mps.sites[i + 1] = right;
        match direction {
            Direction::RightToLeft => {
                self.mps.label_site = i;
                self.mps.ortho_center = Some(i);
                self.renv[i] = absorb_right(&self.renv[i + 1], self.batch, i + 1, self.mps.site(i + 1));
            }
            Direction::LeftToRight => {
                self.mps.label_site = i + 1;
                self.mps.ortho_center = Some(i + 1);
                self.lenv[i + 1] = absorb_left(&self.lenv[i], self.batch, i, self.mps.site(i));
            }
        }
        Ok(())
    }

    fn sweep(&mut self) -> Result<()> {
        let t = self.mps.len();
        for i in (0..t - 1).rev() {
            self.update(i, Direction::RightToLeft)?;
        }
        for i in 0..t - 1 {
            self.update(i, Direction::LeftToRight)?;
        }
        Ok(())
    }

    fn loss(&self) -> f64 {
        batch_loss(&self.mps, self.batch)
    }
}

fn batch_overlaps(mps: &Mps, batch: &Batch) -> Vec<f64> {
    let mut env = vec![1.0; batch.n];
    for t in 0..mps.len() {
        env = absorb_left(&env, batch, t, mps.site(t));
    }
    env
}

fn batch_loss(mps: &Mps, batch: &Batch) -> f64 {
    floored_nll(&batch_overlaps(mps, batch))
}

/// Trains an MPS on already-encoded series. Labels are 1-based.
pub fn train_encoded(
    encoded: &[EncodedSeries],
    labels: &[usize],
    n_labels: usize,
    config: &TrainConfig,
) -> Result<(Mps, TrainReport)> {
    config.validate()?;
    let batch = Batch::new(encoded, labels, n_labels)?;
    if batch.d != config.d {
        return Err(Error::Dimension(format!("batch encoded with d={}, config has d={}", batch.d, config.d)));
    }
    let mps = Mps::random_init(batch.t, config.d, config.chi_init, n_labels, config.seed)?;
    train_from(mps, &batch, config)
}

fn train_from(mps: Mps, batch: &Batch, config: &TrainConfig) -> Result<(Mps, TrainReport)> {
    let mut sw = Sweeper::new(mps, batch, config)?;
    let initial_loss = sw.loss();
    info!("initial loss {initial_loss:.6}");
    let mut losses = Vec::with_capacity(config.n_sweeps);
    let mut prev = initial_loss;
    for k in 0..config.n_sweeps {
        sw.sweep()?;
        let loss = sw.loss();
        info!("sweep {}: loss {loss:.6}, max bond {}", k + 1, sw.mps.max_bond());
        losses.push(loss);
        if let Some(tol) = config.loss_tolerance {
            if prev - loss < tol {
                break;
            }
        }
        prev = loss;
    }
    let report = TrainReport {
        initial_loss,
        final_loss: losses.last().copied().unwrap_or(initial_loss),
        sweeps_run: losses.len(),
        loss_per_sweep: losses,
        skipped_updates: sw.skipped,
        max_discarded_weight: sw.max_discarded,
    };
    Ok((sw.mps, report))
}

/// Fits the preprocessor, encodes every instance and trains. Unlabeled data
/// gives a single-class model.
pub fn fit(dataset: &Dataset, config: &TrainConfig) -> Result<(ModelBundle, TrainReport)> {
    config.validate()?;
    if dataset.is_empty() {
        return Err(Error::Empty("training set is empty".into()));
    }
    if dataset.values.iter().flatten().any(|v| !v.is_finite()) {
        let i = dataset.values.iter().position(|r| r.iter().any(|v| !v.is_finite())).unwrap_or(0);
        return Err(Error::Numeric("training series contains a non-finite value".into()).at_instance(i));
    }
    let n_labels = dataset.n_labels();
    let labels = dataset.labels.clone().unwrap_or_else(|| vec![1; dataset.len()]);
    let kind = config.preprocess_kind(n_labels);
    let flat: Vec<f64> = dataset.values.iter().flatten().copied().collect();
    let preprocessor = Preprocessor::fit(&flat, kind, (-1.0, 1.0))?;
    let feature_map = FeatureMap::with_grid(config.d, config.grid_nodes)?;
    let encoded = dataset
        .values
        .iter()
        .enumerate()
        .map(|(i, row)| {
            preprocessor
                .apply(row)
                .and_then(|y| feature_map.encode_series(&y))
                .map_err(|e| e.at_instance(i))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mps, report) = train_encoded(&encoded, &labels, n_labels, config)?;
    let bundle = ModelBundle::new(mps, preprocessor, feature_map, config.clone())?;
    Ok((bundle, report))
}
