//! The matrix-product-state container.
//!
//! Every site is stored as a rank-4 tensor `(left, phys, label, right)`. The
//! label axis has extent `L` on the site currently carrying the label index
//! and extent 1 everywhere else, so single-class models simply have `L = 1`.
//! Canonicalization treats `(phys, label)` as one combined index.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::encoding::EncodedSeries;
use crate::error::{Error, Result};
use crate::tensor::{gemm, qr_orthogonalize, DenseTensor};

#[derive(Clone, Debug, PartialEq)]
pub struct Mps {
    pub(crate) sites: Vec<DenseTensor>,
    pub(crate) d: usize,
    pub(crate) n_labels: usize,
    pub(crate) label_site: usize,
    pub(crate) ortho_center: Option<usize>,
}

impl Mps {
    /// Builds an MPS from rank-4 site tensors, checking that bonds chain up,
    /// that the outer bonds are 1 and that only `label_site` carries a label
    /// axis of extent `n_labels`.
    pub fn from_sites(sites: Vec<DenseTensor>, n_labels: usize, label_site: usize) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Dimension("an MPS needs at least one site".into()));
        }
        if n_labels == 0 {
            return Err(Error::Config("label count must be at least 1".into()));
        }
        if label_site >= sites.len() {
            return Err(Error::Dimension(format!(
                "label site {label_site} is outside a chain of {} sites",
                sites.len()
            )));
        }
        let d = sites[0].shape().get(1).copied().unwrap_or(0);
        for (t, s) in sites.iter().enumerate() {
            let sh = s.shape();
            if sh.len() != 4 {
                return Err(Error::Dimension(format!("site {t} has rank {}, expected 4", sh.len())));
            }
            if sh[1] != d {
                return Err(Error::Dimension(format!("site {t} has physical extent {}, expected {d}", sh[1])));
            }
            let want_label = if t == label_site { n_labels } else { 1 };
            if sh[2] != want_label {
                return Err(Error::Dimension(format!(
                    "site {t} has label extent {}, expected {want_label}",
                    sh[2]
                )));
            }
            if t > 0 && sites[t - 1].shape()[3] != sh[0] {
                return Err(Error::Dimension(format!("bond between sites {} and {t} does not match", t - 1)));
            }
        }
        if sites[0].shape()[0] != 1 || sites[sites.len() - 1].shape()[3] != 1 {
            return Err(Error::Dimension("outer bonds must have extent 1".into()));
        }
        Ok(Self {
            sites,
            d,
            n_labels,
            label_site,
            ortho_center: None,
        })
    }

    /// Random chain of i.i.d. standard-normal tensors with the label on the
    /// rightmost site, canonicalized there and normalized to 1.
    pub fn random_init(t: usize, d: usize, chi_init: usize, n_labels: usize, seed: u64) -> Result<Self> {
        if t < 2 {
            return Err(Error::Config(format!("series length must be at least 2, got {t}")));
        }
        if d == 0 || chi_init == 0 || n_labels == 0 {
            return Err(Error::Config("d, chi_init and the label count must be positive".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let bonds = initial_bonds(t, d, chi_init, n_labels);
        let sites = (0..t)
            .map(|i| {
                let lab = if i == t - 1 { n_labels } else { 1 };
                DenseTensor::from_fn(vec![bonds[i], d, lab, bonds[i + 1]], |_| StandardNormal.sample(&mut rng))
            })
            .collect();
        let mut mps = Self::from_sites(sites, n_labels, t - 1)?;
        mps.canonicalize(t - 1)?;
        Ok(mps)
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn label_site(&self) -> usize {
        self.label_site
    }

    pub fn ortho_center(&self) -> Option<usize> {
        self.ortho_center
    }

    pub fn sites(&self) -> &[DenseTensor] {
        &self.sites
    }

    pub fn site(&self, t: usize) -> &DenseTensor {
        &self.sites[t]
    }

    /// Bond extents `χ_0 … χ_T` (both ends are 1).
    pub fn bond_dims(&self) -> Vec<usize> {
        let mut b: Vec<usize> = self.sites.iter().map(|s| s.shape()[0]).collect();
        b.push(1);
        b
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Multiplies every site by `factor`; the chain is no longer normalized.
    pub fn scale_sites(&mut self, factor: f64) {
        for s in &mut self.sites {
            s.scale(factor);
        }
        self.ortho_center = None;
    }

    /// `⟨W|W⟩`, summed over the label index.
    pub fn norm_squared(&self) -> f64 {
        let mut env = vec![1.0];
        let mut chi = 1;
        for s in &self.sites {
            let sh = s.shape();
            let (l, mid, r) = (sh[0], sh[1] * sh[2], sh[3]);
            debug_assert_eq!(l, chi);
            // env (l×l) · A (l × mid·r) → (l × mid·r), then contract (l, mid) with A
            let ea = gemm(&env, l, l, s.data(), mid * r);
            let mut next = vec![0.0; r * r];
            crate::tensor::gemm_into(&mut next, &ea, r, l * mid, true, s.data(), r, false);
            env = next;
            chi = r;
        }
        env[0]
    }

    /// Brings the chain to mixed-canonical form with orthogonality center
    /// `center` and normalizes it to unit norm.
    pub fn canonicalize(&mut self, center: usize) -> Result<()> {
        if center >= self.len() {
            return Err(Error::Dimension(format!("center {center} outside chain of {}", self.len())));
        }
        for t in 0..center {
            self.left_orthogonalize(t)?;
        }
        for t in (center + 1..self.len()).rev() {
            self.right_orthogonalize(t)?;
        }
        let n = self.sites[center].norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::Numeric(format!("cannot normalize an MPS of norm {n}")));
        }
        self.sites[center].scale(1.0 / n);
        self.ortho_center = Some(center);
        Ok(())
    }

    /// QR of site `t` as `(l·d·L) × r`; `R` is pushed into site `t+1`.
    fn left_orthogonalize(&mut self, t: usize) -> Result<()> {
        let sh = self.sites[t].shape().to_vec();
        let rows = sh[0] * sh[1] * sh[2];
        let m = DenseTensor::matrix(rows, sh[3], self.sites[t].data().to_vec())?;
        let (q, r) = qr_orthogonalize(&m)?;
        let k = q.shape()[1];
        self.sites[t] = q.reshape(vec![sh[0], sh[1], sh[2], k])?;
        let next = &self.sites[t + 1];
        let nsh = next.shape().to_vec();
        let rest = nsh[1] * nsh[2] * nsh[3];
        let data = gemm(r.data(), k, nsh[0], next.data(), rest);
        self.sites[t + 1] = DenseTensor::new(vec![k, nsh[1], nsh[2], nsh[3]], data)?;
        Ok(())
    }

    /// LQ of site `t` as `l × (d·L·r)`; `L` is pushed into site `t-1`.
    fn right_orthogonalize(&mut self, t: usize) -> Result<()> {
        let sh = self.sites[t].shape().to_vec();
        let cols = sh[1] * sh[2] * sh[3];
        let m = DenseTensor::matrix(sh[0], cols, self.sites[t].data().to_vec())?.transpose()?;
        let (q, r) = qr_orthogonalize(&m)?;
        let k = q.shape()[1];
        self.sites[t] = q.transpose()?.reshape(vec![k, sh[1], sh[2], sh[3]])?;
        let prev = &self.sites[t - 1];
        let psh = prev.shape().to_vec();
        let rows = psh[0] * psh[1] * psh[2];
        // prev (rows × l) · Rᵀ (l × k)
        let mut data = vec![0.0; rows * k];
        crate::tensor::gemm_into(&mut data, prev.data(), rows, psh[3], false, r.data(), k, true);
        self.sites[t - 1] = DenseTensor::new(vec![psh[0], psh[1], psh[2], k], data)?;
        Ok(())
    }

    fn check_encoding(&self, enc: &EncodedSeries) -> Result<()> {
        if enc.len() != self.len() || enc.d() != self.d {
            return Err(Error::Dimension(format!(
                "encoded series is {}×{}, model expects {}×{}",
                enc.len(),
                enc.d(),
                self.len(),
                self.d
            )));
        }
        Ok(())
    }

    /// Contracts every physical index with its feature vector, leaving the
    /// label index: `f^l = W^l · Φ(x)`.
    pub fn overlap(&self, enc: &EncodedSeries) -> Result<Vec<f64>> {
        self.check_encoding(enc)?;
        // v has shape (labels_so_far, χ)
        let mut v = vec![1.0];
        let mut labs = 1;
        for (t, s) in self.sites.iter().enumerate() {
            let sh = s.shape();
            let (l, d, lab, r) = (sh[0], sh[1], sh[2], sh[3]);
            let phi = enc.row(t);
            // M[l, λ, r] = Σ_s A[l, s, λ, r] φ_s
            let mut m = vec![0.0; l * lab * r];
            let block = lab * r;
            for a in 0..l {
                let out = &mut m[a * block..(a + 1) * block];
                for (si, &p) in phi.iter().enumerate().take(d) {
                    let src = &s.data()[(a * d + si) * block..(a * d + si + 1) * block];
                    for (o, x) in out.iter_mut().zip(src) {
                        *o += p * x;
                    }
                }
            }
            // v'[(k, λ), r] = Σ_a v[k, a] M[a, (λ, r)]
            v = gemm(&v, labs, l, &m, block);
            labs *= lab;
        }
        Ok(v)
    }

    /// Unnormalized Born-rule densities `|f^l|²`, one per label.
    pub fn density(&self, enc: &EncodedSeries) -> Result<Vec<f64>> {
        Ok(self.overlap(enc)?.into_iter().map(|f| f * f).collect())
    }

    /// Full coefficient tensor of shape `[d; T]` followed by the label axis.
    /// Exponential in `T`; meant for small models.
    pub fn to_dense(&self) -> Result<DenseTensor> {
        let mut acc = DenseTensor::new(vec![1, 1], vec![1.0])?; // (free, χ)
        let mut labels_axis = 1;
        for s in &self.sites {
            let sh = s.shape();
            let (l, d, lab, r) = (sh[0], sh[1], sh[2], sh[3]);
            let free = acc.shape()[0];
            let data = gemm(acc.data(), free, l, s.data(), d * lab * r);
            // data is (free, d, lab, r) where free = (phys…, labels)
            let t = DenseTensor::new(vec![free / labels_axis, labels_axis, d, lab, r], data)?;
            // reorder to (phys…, d, labels, lab, r)
            let t = t.permute(&[0, 2, 1, 3, 4]);
            labels_axis *= lab;
            acc = t.reshape(vec![free * d * lab, r])?;
        }
        let mut shape = vec![self.d; self.len()];
        shape.push(labels_axis);
        acc.reshape(shape)
    }

    /// Single-class chain obtained by fixing the label index to `label`
    /// (0-based). Canonical form is kept when the label site is the center.
    pub fn class_slice(&self, label: usize) -> Result<Mps> {
        if label >= self.n_labels {
            return Err(Error::Domain(format!("label {} outside 1..={}", label + 1, self.n_labels)));
        }
        let mut sites = self.sites.clone();
        let s = &self.sites[self.label_site];
        let sh = s.shape();
        let (l, d, lab, r) = (sh[0], sh[1], sh[2], sh[3]);
        let mut data = Vec::with_capacity(l * d * r);
        for a in 0..l {
            for si in 0..d {
                let off = ((a * d + si) * lab + label) * r;
                data.extend_from_slice(&s.data()[off..off + r]);
            }
        }
        sites[self.label_site] = DenseTensor::new(vec![l, d, 1, r], data)?;
        let mut out = Mps::from_sites(sites, 1, self.label_site)?;
        out.ortho_center = self.ortho_center;
        Ok(out)
    }
}

fn initial_bonds(t: usize, d: usize, chi_init: usize, n_labels: usize) -> Vec<usize> {
    let pow = |base: usize, e: usize| -> usize {
        let mut v = 1usize;
        for _ in 0..e {
            v = v.saturating_mul(base);
            if v >= chi_init {
                break;
            }
        }
        v
    };
    (0..=t)
        .map(|i| {
            if i == 0 || i == t {
                1
            } else {
                chi_init.min(pow(d, i)).min(pow(d, t - i).saturating_mul(n_labels))
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::encode_series;
    use proptest::prelude::*;

    fn random_mps(t: usize, d: usize, chi: usize, labels: usize, seed: u64) -> Mps {
        Mps::random_init(t, d, chi, labels, seed).unwrap()
    }

    /// Dense coefficient by explicit matrix products for one index tuple.
    fn coefficient(mps: &Mps, idx: &[usize], label: usize) -> f64 {
        let mut row = vec![1.0];
        for (t, s) in mps.sites().iter().enumerate() {
            let sh = s.shape();
            let lab = if t == mps.label_site() { label } else { 0 };
            let mut next = vec![0.0; sh[3]];
            for (a, ra) in row.iter().enumerate() {
                for (b, nb) in next.iter_mut().enumerate() {
                    *nb += ra * s.get(&[a, idx[t], lab, b]);
                }
            }
            row = next;
        }
        row[0]
    }

    fn all_indices(t: usize, d: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..t {
            out = out
                .into_iter()
                .flat_map(|p| {
                    (0..d).map(move |s| {
                        let mut q = p.clone();
                        q.push(s);
                        q
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn deterministic_init() {
        assert_eq!(random_mps(5, 3, 4, 2, 7), random_mps(5, 3, 4, 2, 7));
        assert_ne!(random_mps(5, 3, 4, 2, 7), random_mps(5, 3, 4, 2, 8));
    }

    #[test]
    fn init_is_normalized() {
        let m = random_mps(6, 3, 4, 1, 1);
        assert!((m.norm_squared() - 1.0).abs() < 1e-10);
        let m = random_mps(6, 3, 4, 3, 1);
        assert!((m.norm_squared() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn init_shapes() {
        let m = random_mps(3, 2, 2, 1, 0);
        let shapes: Vec<(usize, usize, usize)> =
            m.sites().iter().map(|s| (s.shape()[0], s.shape()[1], s.shape()[3])).collect();
        assert_eq!(shapes, vec![(1, 2, 2), (2, 2, 2), (2, 2, 1)]);
        assert_eq!(m.label_site(), 2);
        assert_eq!(m.ortho_center(), Some(2));
    }

    #[test]
    fn transfer_matrices_are_identity() {
        let mut m = random_mps(6, 3, 5, 2, 3);
        m.canonicalize(3).unwrap();
        for (t, s) in m.sites().iter().enumerate() {
            let sh = s.shape();
            let (l, mid, r) = (sh[0], sh[1] * sh[2], sh[3]);
            if t < 3 {
                for b in 0..r {
                    for c in 0..r {
                        let mut v = 0.0;
                        for a in 0..l {
                            for x in 0..mid {
                                v += s.data()[(a * mid + x) * r + b] * s.data()[(a * mid + x) * r + c];
                            }
                        }
                        let e = if b == c { 1.0 } else { 0.0 };
                        assert!((v - e).abs() < 1e-10);
                    }
                }
            } else if t > 3 {
                for a in 0..l {
                    for c in 0..l {
                        let mut v = 0.0;
                        for x in 0..mid * r {
                            v += s.data()[a * mid * r + x] * s.data()[c * mid * r + x];
                        }
                        let e = if a == c { 1.0 } else { 0.0 };
                        assert!((v - e).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn single_site_overlap() {
        let a = DenseTensor::new(vec![1, 3, 1, 1], vec![0.5, -1.0, 2.0]).unwrap();
        let mps = Mps::from_sites(vec![a], 1, 0).unwrap();
        let enc = encode_series(&[0.2], 3).unwrap();
        let v = enc.row(0);
        let expected = 0.5 * v[0] - v[1] + 2.0 * v[2];
        assert!((mps.overlap(&enc).unwrap()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn overlap_matches_dense_reconstruction() {
        let m = random_mps(3, 3, 3, 2, 11);
        let x = [0.1, -0.7, 0.9];
        let enc = encode_series(&x, 3).unwrap();
        let f = m.overlap(&enc).unwrap();
        for (label, fl) in f.iter().enumerate() {
            let mut oracle = 0.0;
            for idx in all_indices(3, 3) {
                let w: f64 = (0..3).map(|t| enc.row(t)[idx[t]]).product();
                oracle += coefficient(&m, &idx, label) * w;
            }
            assert!((fl - oracle).abs() < 1e-12);
        }
        let dense = m.to_dense().unwrap();
        for idx in all_indices(3, 3) {
            for label in 0..2 {
                let mut full = idx.clone();
                full.push(label);
                assert!((dense.get(&full) - coefficient(&m, &idx, label)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn overlap_rejects_mismatch() {
        let m = random_mps(3, 2, 2, 1, 0);
        let enc = encode_series(&[0.0, 0.0], 2).unwrap();
        assert!(matches!(m.overlap(&enc), Err(Error::Dimension(_))));
        let enc = encode_series(&[0.0, 0.0, 0.0], 3).unwrap();
        assert!(matches!(m.overlap(&enc), Err(Error::Dimension(_))));
    }

    /// Tensor-product Gauss–Legendre quadrature of the density over [-1,1]^3.
    #[test]
    fn density_integrates_to_one() {
        let (nodes, weights) = crate::encoding::gauss_legendre(8);
        for d in 1..=4 {
            let m = random_mps(3, d, 4, 1, d as u64);
            let mut total = 0.0;
            for (i, &x0) in nodes.iter().enumerate() {
                for (j, &x1) in nodes.iter().enumerate() {
                    for (k, &x2) in nodes.iter().enumerate() {
                        let enc = encode_series(&[x0, x1, x2], d).unwrap();
                        total += weights[i] * weights[j] * weights[k] * m.density(&enc).unwrap()[0];
                    }
                }
            }
            assert!((total - 1.0).abs() < 1e-6, "d={d}: {total}");
        }
    }

    #[test]
    fn class_slice_matches_overlap_entry() {
        let m = random_mps(4, 2, 3, 3, 5);
        let enc = encode_series(&[0.3, -0.2, 0.8, 0.0], 2).unwrap();
        let f = m.overlap(&enc).unwrap();
        for l in 0..3 {
            let s = m.class_slice(l).unwrap();
            assert!((s.overlap(&enc).unwrap()[0] - f[l]).abs() < 1e-14);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn canonicalize_preserves_density(seed in 0u64..1000, center in 0usize..5, x in proptest::collection::vec(-1.0f64..1.0, 5)) {
            let m = random_mps(5, 3, 4, 2, seed);
            let enc = encode_series(&x, 3).unwrap();
            let before = m.density(&enc).unwrap();
            let mut c = m.clone();
            c.canonicalize(center).unwrap();
            prop_assert!((c.norm_squared() - 1.0).abs() < 1e-10);
            let after = c.density(&enc).unwrap();
            for (a, b) in before.iter().zip(&after) {
                prop_assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn overlap_is_linear_in_a_site(seed in 0u64..1000, site in 0usize..4, alpha in -3.0f64..3.0) {
            let m = random_mps(4, 2, 3, 1, seed);
            let enc = encode_series(&[0.1, 0.5, -0.4, 0.9], 2).unwrap();
            let mut s = m.clone();
            s.sites[site].scale(alpha);
            let f = m.overlap(&enc).unwrap()[0];
            let g = s.overlap(&enc).unwrap()[0];
            prop_assert!((g - alpha * f).abs() < 1e-12);
        }
    }
}
