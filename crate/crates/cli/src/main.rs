//! `air`: train and probe group-regularized linear classifiers.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 solver divergence,
//! 1 anything else. Set `AIR_LOG_LEVEL` to `error`, `info`, or `debug`
//! for progress output on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use air_cli::artifacts::{self, prepare_out_dir, OutDir};
use air_cli::config::ExperimentConfig;
use air_cli::error::CliError;
use air_cli::harness;
use air_cli::model_io;
use air_core::data::{write_features, FeatureFormat};

#[derive(Parser)]
#[command(name = "air", version, about = "Group-regularized linear classifiers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Directory for output artifacts.
    #[arg(long, value_name = "DIR", default_value = "air-out")]
    out: PathBuf,
    /// Override the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the parallel kernels; 0 keeps the default.
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Args)]
struct WithModel {
    #[command(flatten)]
    common: Common,
    /// A model file written by `train`.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize the configured dataset as feature and label files.
    Generate(Common),
    /// Corrupt the dataset's labels and record which ones changed.
    Corrupt(Common),
    /// Train the configured solver and write the model plus diagnostics.
    Train(Common),
    /// Evaluate a trained model on the configured dataset.
    Eval(WithModel),
    /// Recompute per-example activation diagnostics for a trained model.
    Activations(WithModel),
    /// Train across a grid of noise levels or group fractions.
    Sweep(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Generate(c) | Command::Corrupt(c) | Command::Train(c) | Command::Sweep(c) => c,
            Command::Eval(m) | Command::Activations(m) => &m.common,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_logging() {
        eprintln!("air: {e}");
        return ExitCode::from(e.exit_code() as u8);
    }
    configure_threads(cli.command.common().threads);
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("air: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn init_logging() -> Result<(), CliError> {
    let level = match std::env::var("AIR_LOG_LEVEL") {
        Err(_) => log::LevelFilter::Error,
        Ok(raw) => match raw.to_ascii_lowercase().as_str() {
            "error" => log::LevelFilter::Error,
            "info" => log::LevelFilter::Info,
            "debug" => log::LevelFilter::Debug,
            other => {
                return Err(CliError::config(format!(
                    "AIR_LOG_LEVEL must be error, info, or debug, got {other:?}"
                )))
            }
        },
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();
    Ok(())
}

#[cfg(feature = "parallel")]
fn configure_threads(threads: usize) {
    if threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            log::warn!("thread pool already initialized: {e}");
        }
    }
}

#[cfg(not(feature = "parallel"))]
fn configure_threads(threads: usize) {
    if threads > 0 {
        log::warn!("built without the parallel feature; --threads has no effect");
    }
}

fn run(command: &Command) -> Result<(), CliError> {
    let common = command.common();
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let out = prepare_out_dir(&common.out)?;
    out.write_text(artifacts::RESOLVED_CONFIG, &cfg.to_toml())?;

    match command {
        Command::Generate(_) => generate(&cfg, &out),
        Command::Corrupt(_) => corrupt(&cfg, &out),
        Command::Train(_) => train(&cfg, &out),
        Command::Eval(m) => eval(&cfg, &m.model, &out),
        Command::Activations(m) => activations(&cfg, &m.model, &out),
        Command::Sweep(_) => sweep(&cfg, &out),
    }
}

fn generate(cfg: &ExperimentConfig, out: &OutDir) -> Result<(), CliError> {
    let prepared = harness::build_dataset(cfg, cfg.seed)?;
    // Materialize the split the trainer would see, so downstream file-based
    // runs reproduce it: train files always, test files when a split exists.
    write_features(
        &prepared.train,
        &out.file(artifacts::FEATURES_FILE),
        &out.file(artifacts::LABELS_FILE),
        FeatureFormat::Binary,
    )?;
    if let Some(test) = &prepared.test {
        write_features(
            test,
            &out.file("features_test.airf"),
            &out.file("labels_test.airl"),
            FeatureFormat::Binary,
        )?;
    }
    println!(
        "wrote {} ({} train / {} test examples, {} features, {} classes)",
        out.path().display(),
        prepared.train.num_examples(),
        prepared.test.as_ref().map_or(0, |t| t.num_examples()),
        prepared.train.feature_dim(),
        prepared.train.num_classes()
    );
    Ok(())
}

fn corrupt(cfg: &ExperimentConfig, out: &OutDir) -> Result<(), CliError> {
    let prepared = harness::build_dataset(cfg, cfg.seed)?;
    let train = &prepared.train;
    write_features(
        train,
        &out.file(artifacts::FEATURES_FILE),
        &out.file(artifacts::LABELS_FILE),
        FeatureFormat::Binary,
    )?;
    let mask = train
        .clean_mask()
        .ok_or_else(|| CliError::config("corrupt requires a [noise] section"))?;
    out.write_text(artifacts::CLEAN_MASK_FILE, &artifacts::clean_mask_csv(mask))?;
    if let Some(matrix) = harness::noise_matrix(&cfg.noise, train.num_classes())? {
        out.write_text(artifacts::CONFUSION_FILE, &matrix.to_tsv())?;
    }
    println!(
        "wrote {} ({} of {} training labels corrupted)",
        out.path().display(),
        prepared.corrupted,
        train.num_examples()
    );
    Ok(())
}

fn train(cfg: &ExperimentConfig, out: &OutDir) -> Result<(), CliError> {
    let prepared = harness::build_dataset(cfg, cfg.seed)?;
    let run = harness::run_training(cfg, &prepared, cfg.seed)?;
    model_io::save_model(&out.file(artifacts::MODEL_FILE), &run.weights)?;
    out.write_jsonl(artifacts::TRAIN_LOG, &run.steps)?;
    let summary = harness::summarize(
        cfg,
        &prepared,
        cfg.seed,
        &run.weights,
        &run.epochs,
        run.activation.as_ref(),
    )?;
    out.write_json(artifacts::METRICS_FILE, &summary)?;
    if let Some(report) = &run.activation {
        out.write_text(
            artifacts::EPOCH_ACTIVATIONS,
            &artifacts::epoch_activation_csv(report),
        )?;
        out.write_text(
            artifacts::RANK_ACTIVATIONS,
            &artifacts::rank_activation_csv(report),
        )?;
    }
    println!(
        "wrote {} (train acc {}, test acc {})",
        out.path().display(),
        artifacts::OptCell(summary.train.accuracy),
        artifacts::OptCell(summary.test.as_ref().and_then(|t| t.accuracy))
    );
    Ok(())
}

fn eval(cfg: &ExperimentConfig, model: &std::path::Path, out: &OutDir) -> Result<(), CliError> {
    let prepared = harness::build_dataset(cfg, cfg.seed)?;
    let weights = model_io::load_model(model)?;
    let summary = harness::summarize(cfg, &prepared, cfg.seed, &weights, &[], None)?;
    out.write_json(artifacts::METRICS_FILE, &summary)?;
    println!(
        "wrote {} (train acc {}, test acc {})",
        out.path().display(),
        artifacts::OptCell(summary.train.accuracy),
        artifacts::OptCell(summary.test.as_ref().and_then(|t| t.accuracy))
    );
    Ok(())
}

fn activations(
    cfg: &ExperimentConfig,
    model: &std::path::Path,
    out: &OutDir,
) -> Result<(), CliError> {
    let prepared = harness::build_dataset(cfg, cfg.seed)?;
    let weights = model_io::load_model(model)?;
    let report = harness::activation_snapshot(&prepared.train, &weights, cfg.weight_rule())?;
    out.write_text(
        artifacts::EPOCH_ACTIVATIONS,
        &artifacts::epoch_activation_csv(&report),
    )?;
    out.write_text(
        artifacts::RANK_ACTIVATIONS,
        &artifacts::rank_activation_csv(&report),
    )?;
    println!("wrote {}", out.path().display());
    Ok(())
}

fn sweep(cfg: &ExperimentConfig, out: &OutDir) -> Result<(), CliError> {
    let rows = harness::run_sweep(cfg)?;
    out.write_text(artifacts::SWEEP_FILE, &harness::sweep_csv(&rows))?;
    println!(
        "wrote {} ({} sweep cells)",
        out.path().display(),
        rows.len()
    );
    Ok(())
}
