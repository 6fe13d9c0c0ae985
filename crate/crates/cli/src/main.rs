//! `tsmps`: train, impute, classify, sample and analyze time-series MPS
//! models from the command line.
//!
//! Exit codes: 0 success, 2 usage/configuration/input errors, 3 numeric or
//! runtime failures.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "tsmps", version, about = "Matrix-product-state models for univariate time series")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model to a CSV dataset.
    Train(TrainArgs),
    /// Fill NaN entries of each series with conditional medians.
    Impute(ImputeArgs),
    /// Predict class labels.
    Classify(ClassifyArgs),
    /// Draw trajectories from a model.
    Sample(SampleArgs),
    /// Conditional single-site entanglement entropy profiles.
    Analyze(AnalyzeArgs),
    /// Latin-hypercube hyperparameter search with cross-validation.
    Tune(TuneArgs),
    /// Generate a noisy trendy sinusoid dataset.
    GenNts(GenNtsArgs),
}

/// Training hyperparameters. Each flag overrides the config file, which
/// overrides the defaults.
#[derive(Args, Clone, Default)]
pub struct TrainOverrides {
    /// TOML file with `TrainConfig` keys (eta, chi_max, d, n_sweeps, ...).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub chi_max: Option<usize>,
    #[arg(long)]
    pub sweeps: Option<usize>,
    #[arg(long)]
    pub chi_init: Option<usize>,
    #[arg(long)]
    pub cutoff: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub loss_tolerance: Option<f64>,
    #[arg(long, value_enum)]
    pub preprocess: Option<Preprocess>,
    #[arg(long)]
    pub grid_nodes: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum Preprocess {
    MinMax,
    RobustSigmoid,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Training CSV (optional last column `label`).
    #[arg(long)]
    pub data: PathBuf,
    /// Model file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Loss history CSV (default `<out>.loss.csv`).
    #[arg(long)]
    pub loss_csv: Option<PathBuf>,
    /// Train a single density on labelled data.
    #[arg(long)]
    pub ignore_labels: bool,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[command(flatten)]
    pub params: TrainOverrides,
}

#[derive(Args)]
pub struct ImputeArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Series with NaN marking missing values.
    #[arg(long)]
    pub data: PathBuf,
    /// Long-format output: instance,t,value,imputed_flag,wmad.
    #[arg(long)]
    pub out: PathBuf,
    /// Complete series to score the imputations against.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Class to condition on for multi-class models when the data has no
    /// labels.
    #[arg(long)]
    pub class: Option<usize>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args)]
pub struct ClassifyArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// instance_id,predicted_label,score_1..score_L
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args)]
pub struct SampleArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// One trajectory per row.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Rejection width in WMADs; `inf` disables rejection.
    #[arg(long, default_value_t = 2.0)]
    pub alpha: f64,
    #[arg(long, default_value_t = 100)]
    pub max_rejections: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Class to sample from (multi-class models).
    #[arg(long)]
    pub class: Option<usize>,
    /// CSV holding the series whose prefix is conditioned on.
    #[arg(long, requires = "prefix")]
    pub condition: Option<PathBuf>,
    /// Row of `--condition` to use (0-based).
    #[arg(long, default_value_t = 0)]
    pub instance: usize,
    /// Number of leading values to condition on.
    #[arg(long, requires = "condition")]
    pub prefix: Option<usize>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Args)]
pub struct AnalyzeArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    /// Heat-map table `k,site,see`.
    #[arg(long)]
    pub out: PathBuf,
    /// `k,residual` table (default `<out>.residual.csv`).
    #[arg(long)]
    pub residual: Option<PathBuf>,
    /// Profile a single row (0-based) instead of the dataset mean.
    #[arg(long)]
    pub instance: Option<usize>,
    /// Class to condition on for multi-class models when the data has no
    /// labels.
    #[arg(long)]
    pub class: Option<usize>,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum TaskArg {
    Imputation,
    Classification,
}

#[derive(Args)]
pub struct TuneArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "imputation")]
    pub task: TaskArg,
    /// Trial log CSV: trial_id,d,eta,chi_max,fold,objective.
    #[arg(long)]
    pub out: PathBuf,
    /// Best configuration as TOML (default `<out>.best.toml`).
    #[arg(long)]
    pub best_config: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub samples: usize,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [5, 15])]
    pub d_range: Vec<usize>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [0.001, 0.5])]
    pub eta_range: Vec<f64>,
    #[arg(long, num_args = 2, value_names = ["MIN", "MAX"], default_values_t = [20, 40])]
    pub chi_range: Vec<usize>,
    /// Cap on validation instances per fold.
    #[arg(long)]
    pub max_validation: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub search_seed: u64,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Settings shared by all trials; `d`, `eta` and `chi_max` are searched.
    #[command(flatten)]
    pub params: TrainOverrides,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum NtsPreset {
    Nts1,
    Nts2,
    Nts3,
    Nts4,
    Nts5,
    /// Eight fixed phases, trend 1, period 30.
    Ood,
}

#[derive(Args)]
pub struct GenNtsArgs {
    #[arg(long, value_enum, default_value = "nts1")]
    pub preset: NtsPreset,
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub length: Option<usize>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match cli.command {
        Command::Train(a) => commands::train(a),
        Command::Impute(a) => commands::impute(a),
        Command::Classify(a) => commands::classify(a),
        Command::Sample(a) => commands::sample(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Tune(a) => commands::tune(a),
        Command::GenNts(a) => commands::gen_nts(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 3 when a numeric failure anywhere in the chain caused the error, else 2.
fn exit_code(e: &anyhow::Error) -> u8 {
    let numeric = e.chain().any(|c| c.downcast_ref::<tsmps::Error>().is_some_and(tsmps::Error::is_numeric));
    if numeric {
        3
    } else {
        2
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn numeric_errors_map_to_three() {
        let e: anyhow::Result<()> = Err(tsmps::Error::Numeric("overflow".into())).context("row 4");
        assert_eq!(exit_code(&e.unwrap_err()), 3);
        let e = anyhow::Error::from(tsmps::Error::InfiniteLoss { instance: 2 });
        assert_eq!(exit_code(&e), 3);
    }

    #[test]
    fn input_errors_map_to_two() {
        assert_eq!(exit_code(&anyhow::Error::from(tsmps::Error::Config("bad".into()))), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("no such file")), 2);
    }
}
