//! Amplitude pre-processing and the orthonormal Legendre feature map.
//!
//! Raw amplitudes are first mapped into the encoding domain `[-1, 1]` by a
//! [`Preprocessor`] fitted on training data only, then each amplitude `x` is
//! embedded as the vector `φ(x) = [b_1(x), …, b_d(x)]` of orthonormal Legendre
//! polynomials. Because the basis is orthonormal, `∫ φ(y) φ(y)ᵀ dy = I`, which
//! is what lets the imputer trace out sites by plain index contraction.
//!
//! A [`FeatureMap`] also owns the quadrature machinery used for every density
//! integral downstream: a composite Gauss–Legendre grid (512 nodes by default)
//! and exact cumulative integrals of `φ φᵀ` at each grid point, so CDFs of
//! single-site densities are exact polynomial integrals rather than Riemann
//! sums.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Scale factor applied to the interquartile range in the robust sigmoid.
pub const IQR_SCALE: f64 = 1.35;

/// Default number of quadrature nodes on `[-1, 1]`.
pub const DEFAULT_GRID_NODES: usize = 512;

const NODES_PER_PANEL: usize = 8;

/// Slack tolerated when checking that a value lies in `[-1, 1]`.
const DOMAIN_SLACK: f64 = 1e-12;

/// Orthonormal Legendre basis `√((2k+1)/2)·P_k(x)` for `k = 0..d`, evaluated
/// with the three-term recurrence.
pub fn legendre_basis(x: f64, d: usize) -> Result<Vec<f64>> {
    let x = check_domain(x)?;
    let mut out = vec![0.0; d];
    fill_legendre(x, &mut out);
    Ok(out)
}

fn check_domain(x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > 1.0 + DOMAIN_SLACK {
        return Err(Error::Domain(format!("{x} is outside the encoding domain [-1, 1]")));
    }
    Ok(x.clamp(-1.0, 1.0))
}

/// Writes the orthonormal basis at `x` into `out` (length `d`). `x` is not
/// checked.
pub(crate) fn fill_legendre(x: f64, out: &mut [f64]) {
    let d = out.len();
    if d == 0 {
        return;
    }
    let (mut p_prev, mut p) = (0.0, 1.0);
    for (k, slot) in out.iter_mut().enumerate() {
        if k > 0 {
            let kf = k as f64;
            let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
            p_prev = p;
            p = next;
        }
        *slot = ((2 * k + 1) as f64 / 2.0).sqrt() * p;
    }
}

/// Standard Legendre polynomial `P_n(x)` and its derivative.
fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p_prev, mut p) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 1..n {
        let kf = k as f64;
        let next = ((2.0 * kf + 1.0) * x * p - kf * p_prev) / (kf + 1.0);
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    let dp = if (x.abs() - 1.0).abs() < f64::EPSILON {
        // P'_n(±1) = (±1)^(n-1) n(n+1)/2
        x.signum().powi(n as i32 - 1) * nf * (nf + 1.0) / 2.0
    } else {
        nf * (x * p - p_prev) / (x * x - 1.0)
    };
    (p, dp)
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess, then Newton.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule: `[-1, 1]` split into equal panels, each
/// carrying an 8-point rule.
#[derive(Clone, Debug)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn composite(total_nodes: usize) -> Result<Self> {
        if total_nodes == 0 || !total_nodes.is_multiple_of(NODES_PER_PANEL) {
            return Err(Error::Config(format!(
                "quadrature grid size must be a positive multiple of {NODES_PER_PANEL}, got {total_nodes}"
            )));
        }
        let panels = total_nodes / NODES_PER_PANEL;
        let (gx, gw) = gauss_legendre(NODES_PER_PANEL);
        let h = 2.0 / panels as f64;
        let mut nodes = Vec::with_capacity(total_nodes);
        let mut weights = Vec::with_capacity(total_nodes);
        for p in 0..panels {
            let lo = -1.0 + h * p as f64;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push(lo + 0.5 * h * (x + 1.0));
                weights.push(0.5 * h * w);
            }
        }
        Ok(Self { nodes, weights })
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

/// Serializable description of a feature map.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMapSpec {
    pub d: usize,
    pub grid_nodes: usize,
}

/// Legendre feature map of physical dimension `d` plus its quadrature tables.
///
/// The evaluation grid is `[-1, nodes…, 1]`: the composite quadrature nodes
/// with both endpoints added, so that CDFs start at 0 and end at 1 on-grid.
#[derive(Clone, Debug)]
pub struct FeatureMap {
    d: usize,
    grid: QuadratureGrid,
    points: Vec<f64>,
    /// Quadrature weight carried by each evaluation point (0 at endpoints).
    point_weights: Vec<f64>,
    /// `φ(points[k])`, row-major `points.len() × d`.
    basis: Vec<f64>,
    /// `∫_{-1}^{points[k]} φ φᵀ`, row-major `points.len() × d × d`.
    cumulative: Vec<f64>,
    /// Rule exact for the polynomial integrands `b_i b_j` on sub-intervals.
    local_rule: (Vec<f64>, Vec<f64>),
}

impl FeatureMap {
    pub fn new(d: usize) -> Result<Self> {
        Self::with_grid(d, DEFAULT_GRID_NODES)
    }

    pub fn with_grid(d: usize, grid_nodes: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::Config("physical dimension d must be at least 1".into()));
        }
        let grid = QuadratureGrid::composite(grid_nodes)?;
        let mut points = Vec::with_capacity(grid.len() + 2);
        let mut point_weights = Vec::with_capacity(grid.len() + 2);
        points.push(-1.0);
        point_weights.push(0.0);
        points.extend_from_slice(grid.nodes());
        point_weights.extend_from_slice(grid.weights());
        points.push(1.0);
        point_weights.push(0.0);

        let mut basis = vec![0.0; points.len() * d];
        for (k, &x) in points.iter().enumerate() {
            fill_legendre(x, &mut basis[k * d..(k + 1) * d]);
        }

        let local_rule = gauss_legendre(d + 1);
        let dd = d * d;
        let mut cumulative = vec![0.0; points.len() * dd];
        let mut phi = vec![0.0; d];
        for k in 1..points.len() {
            let (lo, hi) = (points[k - 1], points[k]);
            let (prev, rest) = cumulative.split_at_mut(k * dd);
            let cur = &mut rest[..dd];
            cur.copy_from_slice(&prev[(k - 1) * dd..]);
            accumulate_outer(lo, hi, &local_rule, &mut phi, cur);
        }

        Ok(Self {
            d,
            grid,
            points,
            point_weights,
            basis,
            cumulative,
            local_rule,
        })
    }

    pub fn from_spec(spec: FeatureMapSpec) -> Result<Self> {
        Self::with_grid(spec.d, spec.grid_nodes)
    }

    pub fn spec(&self) -> FeatureMapSpec {
        FeatureMapSpec {
            d: self.d,
            grid_nodes: self.grid.len(),
        }
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    /// Evaluation grid: the quadrature nodes plus both endpoints.
    pub fn eval_points(&self) -> &[f64] {
        &self.points
    }

    pub fn encode(&self, x: f64) -> Result<Vec<f64>> {
        legendre_basis(x, self.d)
    }

    pub fn encode_series(&self, x: &[f64]) -> Result<EncodedSeries> {
        encode_series(x, self.d)
    }

    /// Gram matrix `∫ b_i b_j` under the composite quadrature, row-major.
    pub fn gram_matrix(&self) -> Vec<f64> {
        let d = self.d;
        let mut gram = vec![0.0; d * d];
        let mut phi = vec![0.0; d];
        for (&x, &w) in self.grid.nodes().iter().zip(self.grid.weights()) {
            fill_legendre(x, &mut phi);
            for i in 0..d {
                for j in 0..d {
                    gram[i * d + j] += w * phi[i] * phi[j];
                }
            }
        }
        gram
    }

    /// `φ(x)ᵀ ρ φ(x)` for a row-major `d × d` matrix `rho`.
    pub fn quadratic_form(&self, rho: &[f64], x: f64) -> Result<f64> {
        let phi = self.encode(x)?;
        Ok(quad(rho, &phi))
    }

    /// `∫_{-1}^{x} φᵀ ρ φ`, exact up to rounding.
    pub fn integral_to(&self, rho: &[f64], x: f64) -> Result<f64> {
        let x = check_domain(x)?;
        let d = self.d;
        let dd = d * d;
        // last evaluation point <= x
        let k = self.points.partition_point(|&p| p <= x).saturating_sub(1);
        let mut acc = self.cumulative[k * dd..(k + 1) * dd].to_vec();
        if x > self.points[k] {
            let mut phi = vec![0.0; d];
            accumulate_outer(self.points[k], x, &self.local_rule, &mut phi, &mut acc);
        }
        Ok(frobenius_dot(rho, &acc))
    }

    /// Tabulates the single-site density `φᵀ ρ φ` and its normalized CDF on the
    /// evaluation grid.
    pub fn density_table(&self, rho: &[f64]) -> Result<DensityTable> {
        let d = self.d;
        if rho.len() != d * d {
            return Err(Error::Dimension(format!(
                "density matrix has {} entries, expected {}",
                rho.len(),
                d * d
            )));
        }
        let dd = d * d;
        let n = self.points.len();
        let z = frobenius_dot(rho, &self.cumulative[(n - 1) * dd..]);
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::Numeric(format!("density normalization {z} is not positive")));
        }
        let mut pdf = Vec::with_capacity(n);
        let mut cdf = Vec::with_capacity(n);
        for k in 0..n {
            pdf.push(quad(rho, &self.basis[k * d..(k + 1) * d]).max(0.0) / z);
            cdf.push(frobenius_dot(rho, &self.cumulative[k * dd..(k + 1) * dd]) / z);
        }
        // enforce monotonicity against rounding
        cdf[0] = 0.0;
        for k in 1..n {
            cdf[k] = cdf[k].clamp(cdf[k - 1], 1.0);
        }
        cdf[n - 1] = 1.0;
        Ok(DensityTable {
            points: self.points.clone(),
            weights: self.point_weights.clone(),
            pdf,
            cdf,
            rho: rho.to_vec(),
            z,
        })
    }
}

fn accumulate_outer(lo: f64, hi: f64, rule: &(Vec<f64>, Vec<f64>), phi: &mut [f64], acc: &mut [f64]) {
    let d = phi.len();
    let half = 0.5 * (hi - lo);
    let mid = 0.5 * (hi + lo);
    for (&t, &w) in rule.0.iter().zip(&rule.1) {
        fill_legendre(mid + half * t, phi);
        let ww = w * half;
        for i in 0..d {
            let wi = ww * phi[i];
            for j in 0..d {
                acc[i * d + j] += wi * phi[j];
            }
        }
    }
}

fn quad(rho: &[f64], phi: &[f64]) -> f64 {
    let d = phi.len();
    let mut s = 0.0;
    for i in 0..d {
        let row = &rho[i * d..(i + 1) * d];
        s += phi[i] * row.iter().zip(phi).map(|(r, p)| r * p).sum::<f64>();
    }
    s
}

fn frobenius_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A single-site density tabulated on the evaluation grid. `pdf` and `cdf`
/// are normalized so the density integrates to one over `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct DensityTable {
    pub points: Vec<f64>,
    /// Quadrature weight of each point.
    pub weights: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    rho: Vec<f64>,
    z: f64,
}

impl DensityTable {
    /// Grid point minimizing `|F(x) - 1/2|`, ties toward the smaller `x`.
    pub fn median(&self) -> f64 {
        let mut best = 0;
        let mut best_gap = f64::INFINITY;
        for (k, &f) in self.cdf.iter().enumerate() {
            let gap = (f - 0.5).abs();
            if gap < best_gap {
                best_gap = gap;
                best = k;
            }
        }
        self.points[best]
    }

    /// Weighted median of `|x_k - center|` with weights `∝ pdf(x_k)` times the
    /// quadrature weight of `x_k`.
    pub fn weighted_median_abs_deviation(&self, center: f64) -> f64 {
        let mut pairs: Vec<(f64, f64)> = self
            .points
            .iter()
            .zip(self.pdf.iter().zip(&self.weights))
            .map(|(&x, (&p, &w))| ((x - center).abs(), p * w))
            .collect();
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        if !(total > 0.0) {
            return 0.0;
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut acc = 0.0;
        for (dev, w) in pairs {
            acc += w / total;
            if acc >= 0.5 {
                return dev;
            }
        }
        // unreachable up to rounding
        self.points.iter().map(|x| (x - center).abs()).fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for k in 0..self.points.len() {
            num += self.weights[k] * self.points[k] * self.pdf[k];
            den += self.weights[k] * self.pdf[k];
        }
        num / den
    }

    /// Grid point of largest density, ties toward the smaller `x`.
    pub fn mode(&self) -> f64 {
        let mut best = 0;
        for k in 1..self.pdf.len() {
            if self.pdf[k] > self.pdf[best] {
                best = k;
            }
        }
        self.points[best]
    }

    /// Exact CDF at an arbitrary point.
    pub fn cdf_at(&self, fm: &FeatureMap, x: f64) -> Result<f64> {
        Ok((fm.integral_to(&self.rho, x)? / self.z).clamp(0.0, 1.0))
    }

    pub fn pdf_at(&self, fm: &FeatureMap, x: f64) -> Result<f64> {
        Ok(fm.quadratic_form(&self.rho, x)?.max(0.0) / self.z)
    }

    /// `x` with `F(x) = u`: bracketed on the grid, linearly interpolated, then
    /// polished with safeguarded Newton steps on the exact CDF.
    pub fn inverse_cdf(&self, fm: &FeatureMap, u: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&u) {
            return Err(Error::Domain(format!("{u} is not a probability")));
        }
        let n = self.points.len();
        let k = self.cdf.partition_point(|&f| f < u);
        if k == 0 {
            return Ok(self.points[0]);
        }
        if k >= n {
            return Ok(self.points[n - 1]);
        }
        let (mut lo, mut hi) = (self.points[k - 1], self.points[k]);
        let (f_lo, f_hi) = (self.cdf[k - 1], self.cdf[k]);
        if f_hi == u {
            return Ok(hi);
        }
        let mut x = if f_hi > f_lo {
            lo + (hi - lo) * (u - f_lo) / (f_hi - f_lo)
        } else {
            lo
        };
        for _ in 0..50 {
            let f = self.cdf_at(fm, x)? - u;
            if f.abs() < 1e-13 {
                break;
            }
            if f > 0.0 {
                hi = x;
            } else {
                lo = x;
            }
            let p = self.pdf_at(fm, x)?;
            let newton = x - f / p;
            x = if p > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-15 {
                break;
            }
        }
        Ok(x)
    }
}

/// A series embedded as `T` rows of `φ(x_t)`.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSeries {
    d: usize,
    values: Vec<f64>,
    source: Vec<f64>,
}

impl EncodedSeries {
    pub fn len(&self) -> usize {
        self.source.len()
    }

    pub fn is_empty(&self) -> bool {
        self.source.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.d..(t + 1) * self.d]
    }

    /// Row-major `T × d` matrix of feature vectors.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> &[f64] {
        &self.source
    }
}

pub fn encode_series(x: &[f64], d: usize) -> Result<EncodedSeries> {
    let mut values = vec![0.0; x.len() * d];
    for (t, &v) in x.iter().enumerate() {
        let v = check_domain(v).map_err(|e| match e {
            Error::Domain(msg) => Error::Domain(format!("time step {t}: {msg}")),
            other => other,
        })?;
        fill_legendre(v, &mut values[t * d..(t + 1) * d]);
    }
    Ok(EncodedSeries {
        d,
        values,
        source: x.to_vec(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreprocessKind {
    MinMax,
    RobustSigmoid,
}

impl std::str::FromStr for PreprocessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min-max" | "minmax" => Ok(Self::MinMax),
            "robust-sigmoid" | "sigmoid" => Ok(Self::RobustSigmoid),
            other => Err(Error::Config(format!("unknown preprocessing kind `{other}`"))),
        }
    }
}

/// Fitted amplitude transform into `[a, b]`.
///
/// `lo`/`hi` are the extrema of the training matrix after the optional
/// sigmoid step, i.e. the inputs of the min–max rescale.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preprocessor {
    pub kind: PreprocessKind,
    pub target: (f64, f64),
    pub median: f64,
    pub iqr: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Per-series correction applied when a test series falls outside `[a, b]`:
/// `y_final = a + (y + shift - a) * scale`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Repair {
    pub shift: f64,
    pub scale: f64,
}

impl Repair {
    pub const NONE: Repair = Repair { shift: 0.0, scale: 1.0 };

    pub fn is_identity(&self) -> bool {
        self.shift == 0.0 && self.scale == 1.0
    }

    pub fn undo(&self, a: f64, y: f64) -> f64 {
        (y - a) / self.scale + a - self.shift
    }
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl Preprocessor {
    /// Fits the statistics on every entry of the training matrix (NaNs are
    /// ignored).
    pub fn fit(values: &[f64], kind: PreprocessKind, target: (f64, f64)) -> Result<Self> {
        let (a, b) = target;
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return Err(Error::Config(format!("invalid target range [{a}, {b}]")));
        }
        let mut v: Vec<f64> = values.iter().copied().filter(|x| !x.is_nan()).collect();
        if v.is_empty() {
            return Err(Error::DegenerateData("no training values".into()));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite training value".into()));
        }
        v.sort_by(f64::total_cmp);
        let median = quantile_sorted(&v, 0.5);
        let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
        let mut p = Self {
            kind,
            target,
            median,
            iqr,
            lo: 0.0,
            hi: 0.0,
        };
        let (lo, hi) = match kind {
            PreprocessKind::MinMax => (v[0], v[v.len() - 1]),
            PreprocessKind::RobustSigmoid => {
                if !(iqr > 0.0) {
                    return Err(Error::DegenerateData("interquartile range is zero".into()));
                }
                // sigmoid is monotone
                (p.sigmoid(v[0]), p.sigmoid(v[v.len() - 1]))
            }
        };
        if !(hi > lo) {
            return Err(Error::DegenerateData(format!(
                "training data has no spread (min = max = {lo})"
            )));
        }
        p.lo = lo;
        p.hi = hi;
        Ok(p)
    }

    pub fn sigmoid(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-(x - self.median) / (self.iqr / IQR_SCALE)).exp())
    }

    /// Maps one raw value with the training statistics, without repair.
    pub fn forward(&self, x: f64) -> f64 {
        let (a, b) = self.target;
        let y = match self.kind {
            PreprocessKind::MinMax => x,
            PreprocessKind::RobustSigmoid => self.sigmoid(x),
        };
        (b - a) * (y - self.lo) / (self.hi - self.lo) + a
    }

    /// Transforms a series into `[a, b]`, applying the shift/rescale repair
    /// when it leaves the range. NaNs (missing values) pass through and are
    /// ignored when computing the repair.
    pub fn apply_with_repair(&self, series: &[f64]) -> Result<(Vec<f64>, Repair)> {
        if series.iter().any(|x| x.is_infinite()) {
            return Err(Error::Numeric("non-finite value in series".into()));
        }
        let (a, b) = self.target;
        let mut out: Vec<f64> = series.iter().map(|&x| self.forward(x)).collect();
        let observed = || out.iter().copied().filter(|v| !v.is_nan());
        let min = observed().fold(f64::INFINITY, f64::min);
        if !min.is_finite() {
            return Ok((out, Repair::NONE));
        }
        let mut repair = Repair::NONE;
        if min < a {
            repair.shift = a - min;
        }
        let max = observed().fold(f64::NEG_INFINITY, f64::max) + repair.shift;
        if max > b {
            repair.scale = (b - a) / (max - a);
        }
        if !repair.is_identity() {
            for v in out.iter_mut().filter(|v| !v.is_nan()) {
                *v = (a + (*v + repair.shift - a) * repair.scale).clamp(a, b);
            }
            // pin the extremes exactly
            if repair.shift != 0.0 {
                if let Some(v) = out
                    .iter_mut()
                    .filter(|v| !v.is_nan())
                    .min_by(|x, y| x.total_cmp(y))
                {
                    *v = a;
                }
            }
            if repair.scale != 1.0 {
                if let Some(v) = out
                    .iter_mut()
                    .filter(|v| !v.is_nan())
                    .max_by(|x, y| x.total_cmp(y))
                {
                    *v = b;
                }
            }
        }
        Ok((out, repair))
    }

    pub fn apply(&self, series: &[f64]) -> Result<Vec<f64>> {
        if series.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite value in series".into()));
        }
        self.apply_with_repair(series).map(|(v, _)| v)
    }

    pub fn invert_value(&self, y: f64) -> Result<f64> {
        let (a, b) = self.target;
        let s = (y - a) * (self.hi - self.lo) / (b - a) + self.lo;
        match self.kind {
            PreprocessKind::MinMax => Ok(s),
            PreprocessKind::RobustSigmoid => {
                if !(s > 0.0 && s < 1.0) {
                    return Err(Error::Domain(format!(
                        "{y} maps to sigmoid saturation ({s}) and cannot be inverted"
                    )));
                }
                Ok(self.median + self.iqr / IQR_SCALE * (s / (1.0 - s)).ln())
            }
        }
    }

    /// Functional inverse of [`Preprocessor::forward`] (the repair step is not
    /// undone).
    pub fn invert(&self, series: &[f64]) -> Result<Vec<f64>> {
        series.iter().map(|&y| self.invert_value(y)).collect()
    }

    /// Factor converting a width in the encoding domain into the data domain,
    /// when the transform is affine.
    pub fn affine_scale(&self) -> Option<f64> {
        match self.kind {
            PreprocessKind::MinMax => Some((self.hi - self.lo) / (self.target.1 - self.target.0)),
            PreprocessKind::RobustSigmoid => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CentralStatistic {
    Mean,
    Median,
    Mode,
}

/// Distance between `x` and the chosen central statistic of the density
/// `(φ(y)ᵀ φ(x))²` normalized over `[-1, 1]`: the error introduced by
/// representing `x` with only `d` basis functions.
pub fn encoding_error(x: f64, d: usize, statistic: CentralStatistic) -> Result<f64> {
    let fm = FeatureMap::new(d)?;
    encoding_error_with(&fm, x, statistic)
}

pub fn encoding_error_with(fm: &FeatureMap, x: f64, statistic: CentralStatistic) -> Result<f64> {
    let phi = fm.encode(x)?;
    let d = fm.d();
    let norm2: f64 = phi.iter().map(|v| v * v).sum();
    let mut rho = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..d {
            rho[i * d + j] = phi[i] * phi[j] / norm2;
        }
    }
    let table = fm.density_table(&rho)?;
    let estimate = match statistic {
        CentralStatistic::Mean => table.mean(),
        CentralStatistic::Median => table.median(),
        CentralStatistic::Mode => table.mode(),
    };
    Ok((x - estimate).abs())
}
