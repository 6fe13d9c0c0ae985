use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// Length of the hidden block for a series of length `t`: `round(pct·t)`,
/// half rounding up.
pub fn block_len(pct_missing: f64, t: usize) -> usize {
    (pct_missing * t as f64 + 0.5).floor() as usize
}

/// Hides one contiguous block of `round(pct·T)` samples (half rounds up) per
/// instance, starting at a uniformly drawn offset. Values are kept; only the
/// mask changes.
pub fn mask_contiguous(dataset: &Dataset, pct_missing: f64, seed: u64) -> Result<Dataset> {
    if !(pct_missing > 0.0 && pct_missing <= 0.95) {
        return Err(Error::Domain(format!("missing fraction must lie in (0, 0.95], got {pct_missing}")));
    }
    let t = dataset.series_len();
    let block = block_len(pct_missing, t);
    if block >= t {
        return Err(Error::Domain(format!("a block of {block} missing samples leaves nothing observed (T={t})")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = (0..dataset.len())
        .map(|_| {
            let start = rng.random_range(0..=t - block);
            (0..t).map(|i| i < start || i >= start + block).collect()
        })
        .collect();
    Ok(Dataset {
        mask: Some(mask),
        ..dataset.clone()
    })
}

/// Mean absolute error over the entries where `observed` is `false`.
pub fn mae(actual: &[f64], imputed: &[f64], observed: &[bool]) -> Result<f64> {
    if actual.len() != imputed.len() || actual.len() != observed.len() {
        return Err(Error::Dimension("mae inputs differ in length".into()));
    }
    let (mut sum, mut n) = (0.0, 0usize);
    for ((a, b), &o) in actual.iter().zip(imputed).zip(observed) {
        if !o {
            sum += (a - b).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Domain("no missing entries to score".into()));
    }
    Ok(sum / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn zeros(n: usize, t: usize) -> Dataset {
        Dataset::new(vec![vec![0.0; t]; n], None).unwrap()
    }

    #[test]
    fn half_missing_is_one_block_of_fifty() {
        let m = mask_contiguous(&zeros(20, 100), 0.5, 3).unwrap();
        for row in m.mask.unwrap() {
            let missing: Vec<usize> = (0..100).filter(|&i| !row[i]).collect();
            assert_eq!(missing.len(), 50);
            assert_eq!(missing[49] - missing[0], 49);
        }
    }

    #[test]
    fn rounding_is_half_up() {
        let m = mask_contiguous(&zeros(1, 10), 0.25, 0).unwrap();
        assert_eq!(m.mask.unwrap()[0].iter().filter(|o| !**o).count(), 3);
    }

    #[test]
    fn same_seed_same_mask() {
        let d = zeros(5, 30);
        assert_eq!(mask_contiguous(&d, 0.3, 9).unwrap(), mask_contiguous(&d, 0.3, 9).unwrap());
    }

    #[test]
    fn full_block_is_rejected() {
        assert!(matches!(mask_contiguous(&zeros(1, 2), 0.95, 0), Err(Error::Domain(_))));
        assert!(matches!(mask_contiguous(&zeros(1, 20), 0.0, 0), Err(Error::Domain(_))));
    }

    #[test]
    fn start_positions_are_uniform() {
        let t = 20;
        let block = 5;
        let offsets = t - block + 1;
        let mut counts = vec![0usize; offsets];
        let m = mask_contiguous(&zeros(8000, t), 0.25, 11).unwrap();
        for row in m.mask.unwrap() {
            counts[row.iter().position(|o| !o).unwrap()] += 1;
        }
        let expected = 8000.0 / offsets as f64;
        let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new((offsets - 1) as f64).unwrap().cdf(stat);
        assert!(p > 0.01, "chi-square p = {p}");
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0], &[false, false]).unwrap(), 0.0);
        assert_eq!(mae(&[0.0, 0.0], &[1.0, -1.0], &[false, false]).unwrap(), 1.0);
        assert!(matches!(mae(&[0.0], &[1.0], &[true]), Err(Error::Domain(_))));
    }

    #[test]
    fn mae_matches_loop() {
        let a: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..50).map(|i| (i as f64 * 0.11).cos()).collect();
        let o: Vec<bool> = (0..50).map(|i| i % 3 == 0).collect();
        let mut s = 0.0;
        let mut n = 0.0;
        for i in 0..50 {
            if !o[i] {
                s += (a[i] - b[i]).abs();
                n += 1.0;
            }
        }
        assert!((mae(&a, &b, &o).unwrap() - s / n).abs() < 1e-14);
    }
}
