use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Dataset;
use crate::error::{Error, Result};

/// Index sets of one train/test split, each sorted ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

fn fold_rng(seed: u64, fold: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fold as u64);
    rng
}

/// `n_folds` independent random train/test resamples with `test_fraction` of
/// the instances (rounded) held out. With `stratified`, each class is split
/// in that proportion separately, so every class appears on both sides.
pub fn resample_folds(
    dataset: &Dataset,
    n_folds: usize,
    test_fraction: f64,
    stratified: bool,
    seed: u64,
) -> Result<Vec<Split>> {
    if n_folds == 0 {
        return Err(Error::Config("need at least one fold".into()));
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::Config(format!("test fraction must lie in (0, 1), got {test_fraction}")));
    }
    let groups: Vec<Vec<usize>> = if stratified {
        let labels = dataset
            .labels
            .as_ref()
            .ok_or_else(|| Error::Stratification("stratified resampling needs labels".into()))?;
        let n_labels = labels.iter().copied().max().unwrap_or(0);
        (1..=n_labels)
            .map(|l| (0..labels.len()).filter(|&i| labels[i] == l).collect::<Vec<_>>())
            .filter(|g| !g.is_empty())
            .collect()
    } else {
        vec![(0..dataset.len()).collect()]
    };
    let mut plan = Vec::with_capacity(groups.len());
    for g in &groups {
        let n_test = (test_fraction * g.len() as f64).round() as usize;
        if n_test == 0 || n_test == g.len() {
            return Err(Error::Stratification(format!(
                "a group of {} instances cannot be split with test fraction {test_fraction}",
                g.len()
            )));
        }
        plan.push(n_test);
    }
    Ok((0..n_folds)
        .map(|fold| {
            let mut rng = fold_rng(seed, fold);
            let mut split = Split {
                train: Vec::new(),
                test: Vec::new(),
            };
            for (g, &n_test) in groups.iter().zip(&plan) {
                let mut idx = g.clone();
                idx.shuffle(&mut rng);
                split.test.extend_from_slice(&idx[..n_test]);
                split.train.extend_from_slice(&idx[n_test..]);
            }
            split.train.sort_unstable();
            split.test.sort_unstable();
            split
        })
        .collect())
}

/// Seeded `k`-fold cross-validation over `n` instances.
pub fn kfold(n: usize, k: usize, seed: u64) -> Result<Vec<Split>> {
    if k < 2 || k > n {
        return Err(Error::Config(format!("cannot make {k} folds from {n} instances")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut fold_rng(seed, 0));
    Ok((0..k)
        .map(|f| {
            let (lo, hi) = (f * n / k, (f + 1) * n / k);
            let mut test = idx[lo..hi].to_vec();
            let mut train: Vec<usize> = idx[..lo].iter().chain(&idx[hi..]).copied().collect();
            test.sort_unstable();
            train.sort_unstable();
            Split { train, test }
        })
        .collect())
}
