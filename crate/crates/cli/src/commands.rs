use std::fmt::Write as _;
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde_json::json;

use tsmps::data::{generate_nts, mae, trial_config, tune as lhs_tune, NtsParams, SearchSpace, Task, TuneOptions};
use tsmps::{
    conditional_see_profile, dataset_mean_profile, fit, impute as impute_series, predict, sample_trajectory, Dataset,
    ModelBundle, PreprocessKind, SamplerConfig, TrainConfig,
};

use crate::manifest::{sidecar, Recorder};
use crate::{
    AnalyzeArgs, ClassifyArgs, GenNtsArgs, ImputeArgs, NtsPreset, Preprocess, SampleArgs, TaskArg, TrainArgs,
    TrainOverrides, TuneArgs,
};

fn read_dataset(path: &Path) -> Result<Dataset> {
    Dataset::read_csv(path).with_context(|| format!("reading {}", path.display()))
}

fn load_model(path: &Path) -> Result<ModelBundle> {
    ModelBundle::load(path).with_context(|| format!("loading model {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Defaults, then the config file, then command-line flags.
fn resolve_config(o: &TrainOverrides) -> Result<TrainConfig> {
    let mut init_in_file = false;
    let mut c = match &o.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let table: toml::Table = text.parse().with_context(|| format!("parsing {}", p.display()))?;
            init_in_file = table.contains_key("chi_init");
            TrainConfig::from_toml_str(&text).with_context(|| format!("in {}", p.display()))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! set {
        ($field:ident, $flag:ident) => {
            if let Some(v) = o.$flag {
                c.$field = v;
            }
        };
    }
    set!(d, d);
    set!(eta, eta);
    set!(chi_max, chi_max);
    set!(n_sweeps, sweeps);
    set!(chi_init, chi_init);
    set!(cutoff, cutoff);
    set!(seed, seed);
    if o.loss_tolerance.is_some() {
        c.loss_tolerance = o.loss_tolerance;
    }
    if let Some(p) = o.preprocess {
        c.preprocess = Some(match p {
            Preprocess::MinMax => PreprocessKind::MinMax,
            Preprocess::RobustSigmoid => PreprocessKind::RobustSigmoid,
        });
    }
    set!(grid_nodes, grid_nodes);
    // An unset initial bond follows a smaller cap down.
    if o.chi_init.is_none() && !init_in_file {
        c.chi_init = c.chi_init.min(c.chi_max);
    }
    c.validate()?;
    Ok(c)
}

/// Class to condition on for row `i`: the row's label, else `fallback`.
/// Single-class models never take one.
fn class_for(bundle: &ModelBundle, ds: &Dataset, i: usize, fallback: Option<usize>) -> Result<Option<usize>> {
    if bundle.mps.n_labels() == 1 {
        return Ok(None);
    }
    match ds.label(i).or(fallback) {
        Some(c) => Ok(Some(c)),
        None => bail!("the model has {} classes; pass --class or label the data", bundle.mps.n_labels()),
    }
}

pub fn train(a: TrainArgs) -> Result<()> {
    let mut rec = Recorder::new("train");
    let config = resolve_config(&a.params)?;
    let mut ds = read_dataset(&a.data)?;
    rec.input(&a.data);
    if let Some(p) = &a.params.config {
        rec.input(p);
    }
    if a.ignore_labels {
        ds.labels = None;
    }
    let (bundle, report) = fit(&ds, &config)?;
    bundle.save(&a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let loss_path = a.loss_csv.clone().unwrap_or_else(|| sidecar(&a.out, ".loss.csv"));
    write_text(&loss_path, &report.loss_csv())?;
    rec.output(&a.out);
    rec.output(&loss_path);
    rec.manifest.config = serde_json::to_value(&config)?;
    rec.manifest.seeds = vec![config.seed];
    rec.manifest.results = json!({
        "instances": ds.len(),
        "length": ds.series_len(),
        "n_labels": bundle.mps.n_labels(),
        "initial_loss": report.initial_loss,
        "final_loss": report.final_loss,
        "sweeps_run": report.sweeps_run,
        "skipped_updates": report.skipped_updates,
        "max_discarded_weight": report.max_discarded_weight,
        "bond_dims": bundle.mps.bond_dims(),
    });
    rec.finish(a.manifest.as_deref())?;
    println!("trained {} sweeps, final loss {:.6}", report.sweeps_run, report.final_loss);
    Ok(())
}

pub fn impute(a: ImputeArgs) -> Result<()> {
    let mut rec = Recorder::new("impute");
    let bundle = load_model(&a.model)?;
    let ds = read_dataset(&a.data)?;
    rec.input(&a.model);
    rec.input(&a.data);
    let truth = match &a.truth {
        Some(p) => {
            rec.input(p);
            let t = read_dataset(p)?;
            if t.len() != ds.len() || t.series_len() != ds.series_len() {
                bail!("truth file shape differs from the data");
            }
            Some(t)
        }
        None => None,
    };
    let mut out = String::from("instance,t,value,imputed_flag,wmad\n");
    let (mut mae_sum, mut mae_n) = (0.0, 0usize);
    let mut encoding_domain = false;
    for i in 0..ds.len() {
        let observed = ds.observed_mask(i);
        let class = class_for(&bundle, &ds, i, a.class)?;
        let r = impute_series(&bundle, &ds.masked_row(i), &observed, class).with_context(|| format!("row {i}"))?;
        encoding_domain |= r.uncertainty_in_encoding_domain;
        for t in 0..r.series.len() {
            let w = r.uncertainty[t].map_or(String::new(), |w| format!("{w:?}"));
            let _ = writeln!(out, "{i},{},{:?},{},{w}", t + 1, r.series[t], u8::from(r.imputed_mask[t]));
        }
        if let Some(truth) = &truth {
            if observed.iter().any(|o| !o) {
                mae_sum += mae(&truth.values[i], &r.series, &observed)?;
                mae_n += 1;
            }
        }
    }
    write_text(&a.out, &out)?;
    rec.output(&a.out);
    let mean_mae = (mae_n > 0).then(|| mae_sum / mae_n as f64);
    rec.manifest.results = json!({
        "instances": ds.len(),
        "wmad_in_encoding_domain": encoding_domain,
        "mae": mean_mae,
    });
    rec.finish(a.manifest.as_deref())?;
    if let Some(m) = mean_mae {
        println!("MAE {m:.6} over {mae_n} instances with missing values");
    }
    Ok(())
}

pub fn classify(a: ClassifyArgs) -> Result<()> {
    let mut rec = Recorder::new("classify");
    let bundle = load_model(&a.model)?;
    let ds = read_dataset(&a.data)?;
    rec.input(&a.model);
    rec.input(&a.data);
    let l = bundle.mps.n_labels();
    let mut out = String::from("instance_id,predicted_label");
    for k in 1..=l {
        let _ = write!(out, ",score_{k}");
    }
    out.push('\n');
    let mut correct = 0usize;
    for (i, row) in ds.values.iter().enumerate() {
        let p = predict(&bundle, row).with_context(|| format!("row {i}"))?;
        let _ = write!(out, "{i},{}", p.label);
        for s in &p.scores {
            let _ = write!(out, ",{s:?}");
        }
        out.push('\n');
        if ds.label(i) == Some(p.label) {
            correct += 1;
        }
    }
    write_text(&a.out, &out)?;
    rec.output(&a.out);
    let accuracy = (ds.labels.is_some() && !ds.is_empty()).then(|| correct as f64 / ds.len() as f64);
    rec.manifest.results = json!({ "instances": ds.len(), "accuracy": accuracy });
    rec.finish(a.manifest.as_deref())?;
    if let Some(acc) = accuracy {
        println!("accuracy {acc:.4} ({correct}/{})", ds.len());
    }
    Ok(())
}

pub fn sample(a: SampleArgs) -> Result<()> {
    let mut rec = Recorder::new("sample");
    let bundle = load_model(&a.model)?;
    rec.input(&a.model);
    let config = SamplerConfig {
        alpha: a.alpha,
        max_rejections: a.max_rejections,
        seed: a.seed,
        n_trajectories: a.n,
    };
    config.validate()?;
    let prefix = match (&a.condition, a.prefix) {
        (Some(p), Some(k)) => {
            rec.input(p);
            let ds = read_dataset(p)?;
            let row = ds.values.get(a.instance).context("--instance is past the last row")?;
            if k > row.len() {
                bail!("--prefix {k} exceeds the series length {}", row.len());
            }
            row[..k].to_vec()
        }
        _ => Vec::new(),
    };
    let class = if bundle.mps.n_labels() > 1 {
        Some(a.class.context("the model has several classes; pass --class")?)
    } else {
        None
    };
    let t_len = bundle.series_len();
    let mut rejections = vec![0usize; t_len];
    let mut fallbacks = vec![0usize; t_len];
    let mut values = Vec::with_capacity(a.n);
    for i in 0..a.n {
        let tr = sample_trajectory(&bundle, &config, &prefix, class, i as u64).with_context(|| format!("trajectory {i}"))?;
        for t in 0..t_len {
            rejections[t] += tr.rejections[t];
            fallbacks[t] += usize::from(tr.fallbacks[t]);
        }
        values.push(tr.values);
    }
    let labels = class.map(|c| vec![c; values.len()]);
    Dataset::new(values, labels)?.write_csv(&a.out)?;
    let side = sidecar(&a.out, ".rejections.csv");
    let mut s = String::from("t,rejections,fallbacks\n");
    for t in 0..t_len {
        let _ = writeln!(s, "{},{},{}", t + 1, rejections[t], fallbacks[t]);
    }
    write_text(&side, &s)?;
    rec.output(&a.out);
    rec.output(&side);
    rec.manifest.config = serde_json::to_value(&config)?;
    rec.manifest.seeds = vec![a.seed];
    rec.manifest.results = json!({
        "prefix_len": prefix.len(),
        "class": class,
        "rejections_per_step": rejections,
        "fallbacks_per_step": fallbacks,
    });
    rec.finish(a.manifest.as_deref())?;
    Ok(())
}

pub fn analyze(a: AnalyzeArgs) -> Result<()> {
    let mut rec = Recorder::new("analyze");
    let bundle = load_model(&a.model)?;
    let ds = read_dataset(&a.data)?;
    rec.input(&a.model);
    rec.input(&a.data);
    let (profile, used, skipped) = match a.instance {
        Some(i) => {
            let row = ds.values.get(i).context("--instance is past the last row")?;
            let class = class_for(&bundle, &ds, i, a.class)?;
            (conditional_see_profile(&bundle, row, class)?, 1, 0)
        }
        None => {
            let mut ds = ds;
            if bundle.mps.n_labels() > 1 && ds.labels.is_none() {
                let c = a.class.context("the model has several classes; pass --class or label the data")?;
                ds.labels = Some(vec![c; ds.len()]);
            }
            let m = dataset_mean_profile(&bundle, &ds)?;
            (m.profile, m.used, m.skipped)
        }
    };
    let residual_path = a.residual.clone().unwrap_or_else(|| sidecar(&a.out, ".residual.csv"));
    write_text(&a.out, &profile.heatmap_csv())?;
    write_text(&residual_path, &profile.residual_csv())?;
    rec.output(&a.out);
    rec.output(&residual_path);
    rec.manifest.results = json!({ "instances_used": used, "instances_skipped": skipped });
    rec.finish(a.manifest.as_deref())?;
    if skipped > 0 {
        eprintln!("warning: {skipped} instances skipped after numeric failures");
    }
    Ok(())
}

pub fn tune(a: TuneArgs) -> Result<()> {
    let mut rec = Recorder::new("tune");
    let base = resolve_config(&a.params)?;
    let ds = read_dataset(&a.data)?;
    rec.input(&a.data);
    let opts = TuneOptions {
        space: SearchSpace {
            d: (a.d_range[0], a.d_range[1]),
            eta: (a.eta_range[0], a.eta_range[1]),
            chi_max: (a.chi_range[0], a.chi_range[1]),
            n_samples: a.samples,
            folds: a.folds,
        },
        base: base.clone(),
        seed: a.search_seed,
        max_validation: a.max_validation,
        ..Default::default()
    };
    let task = match a.task {
        TaskArg::Imputation => Task::Imputation,
        TaskArg::Classification => Task::Classification,
    };
    let result = lhs_tune(&ds, task, &opts)?;
    write_text(&a.out, &result.log_csv())?;
    let best = trial_config(&base, &result.best);
    let best_path = a.best_config.clone().unwrap_or_else(|| sidecar(&a.out, ".best.toml"));
    write_text(&best_path, &best.to_toml_string())?;
    rec.output(&a.out);
    rec.output(&best_path);
    rec.manifest.config = serde_json::to_value(&opts)?;
    rec.manifest.seeds = vec![a.search_seed, best.seed];
    rec.manifest.results = json!({
        "best": { "d": best.d, "eta": best.eta, "chi_max": best.chi_max },
        "best_objective": result.best_objective,
        "failed_trials": result.trials.iter().filter(|t| t.mean().is_none()).count(),
    });
    rec.finish(a.manifest.as_deref())?;
    println!(
        "best d={} eta={:.5} chi_max={} objective {:.6}",
        best.d, best.eta, best.chi_max, result.best_objective
    );
    Ok(())
}

pub fn gen_nts(a: GenNtsArgs) -> Result<()> {
    let mut rec = Recorder::new("gen-nts");
    let mut p = match a.preset {
        NtsPreset::Nts1 => NtsParams::nts1(a.n, a.seed),
        NtsPreset::Nts2 => NtsParams::nts2(a.n, a.seed),
        NtsPreset::Nts3 => NtsParams::nts3(a.n, a.seed),
        NtsPreset::Nts4 => NtsParams::nts4(a.n, a.seed),
        NtsPreset::Nts5 => NtsParams::nts5(a.n, a.seed),
        NtsPreset::Ood => NtsParams::eight_phase(a.n, a.seed),
    };
    if let Some(t) = a.length {
        p.length = t;
    }
    if let Some(s) = a.sigma {
        p.sigma = s;
    }
    generate_nts(&p)?.write_csv(&a.out)?;
    rec.output(&a.out);
    rec.manifest.config = serde_json::to_value(&p)?;
    rec.manifest.seeds = vec![a.seed];
    rec.finish(a.manifest.as_deref())?;
    Ok(())
}
