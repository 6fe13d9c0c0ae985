//! Hot kernels: truncated SVD, one two-site bond update, and imputing one
//! series.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use tsmps::data::{generate_nts, NtsParams};
use tsmps::trainer::{bond_gradient, merge_bond, tsgo_update, BondEnvironment};
use tsmps::{encode_series, impute, svd_truncate, DenseTensor, FeatureMap, ModelBundle, Mps, PreprocessKind, Preprocessor, TrainConfig};

fn svd(c: &mut Criterion) {
    let m = DenseTensor::from_fn(vec![200, 200], |i| ((i[0] * 31 + i[1] * 17) as f64 * 0.013).sin());
    c.bench_function("svd_truncate 200x200 chi=40", |b| {
        b.iter(|| svd_truncate(black_box(&m), 40, 1e-12).unwrap())
    });
}

fn bond_update(c: &mut Criterion) {
    let (t, d) = (100, 10);
    let mps = Mps::random_init(t, d, 20, 1, 1).unwrap();
    let ds = generate_nts(&NtsParams::nts1(100, 2)).unwrap();
    let pre = Preprocessor::fit(&ds.values.concat(), PreprocessKind::MinMax, (-1.0, 1.0)).unwrap();
    let enc: Vec<_> = ds.values.iter().map(|r| encode_series(&pre.apply(r).unwrap(), d).unwrap()).collect();
    let labels = vec![1; enc.len()];
    let bond = merge_bond(&mps, t - 2).unwrap();
    let env = BondEnvironment::from_mps(&mps, &enc, &labels, t - 2).unwrap();
    c.bench_function("bond gradient + update, N=100 d=10 chi=20", |b| {
        b.iter(|| {
            let g = bond_gradient(black_box(&bond), &env).unwrap();
            tsgo_update(&bond, &g, 0.05).unwrap()
        })
    });
}

fn imputation(c: &mut Criterion) {
    let d = 10;
    let mps = Mps::random_init(100, d, 20, 1, 3).unwrap();
    let pre = Preprocessor::fit(&[-1.0, 1.0], PreprocessKind::MinMax, (-1.0, 1.0)).unwrap();
    let bundle = ModelBundle::new(mps, pre, FeatureMap::new(d).unwrap(), TrainConfig { d, ..Default::default() }).unwrap();
    let series: Vec<f64> = (0..100).map(|t| (t as f64 * 0.3).sin() * 0.8).collect();
    let observed: Vec<bool> = (0..100).map(|t| !(30..75).contains(&t)).collect();
    c.bench_function("impute T=100 d=10 chi=20, 45% missing", |b| {
        b.iter(|| impute(black_box(&bundle), &series, &observed, None).unwrap())
    });
}

criterion_group!(benches, svd, bond_update, imputation);
criterion_main!(benches);
