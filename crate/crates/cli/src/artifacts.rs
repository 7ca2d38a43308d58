//! Artifact files written under the run's output directory.
//!
//! Every writer is deterministic: no timestamps, no map iteration, floats
//! printed with Rust's shortest round-trip formatting. Re-running a config
//! with the same seed reproduces each artifact byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use air_core::metrics::ActivationReport;
use serde::Serialize;

use crate::error::CliError;

pub const RESOLVED_CONFIG: &str = "resolved_config.toml";
pub const MODEL_FILE: &str = "model.airw";
pub const TRAIN_LOG: &str = "train_log.jsonl";
pub const METRICS_FILE: &str = "metrics.json";
pub const EPOCH_ACTIVATIONS: &str = "activations_epochs.csv";
pub const RANK_ACTIVATIONS: &str = "activations_rank.csv";
pub const SWEEP_FILE: &str = "sweep.csv";
pub const FEATURES_FILE: &str = "features.airf";
pub const LABELS_FILE: &str = "labels.airl";
pub const CLEAN_MASK_FILE: &str = "clean_mask.csv";
pub const CONFUSION_FILE: &str = "confusion.tsv";

/// Creates the output directory and hands back a path builder for it.
pub fn prepare_out_dir(out: &Path) -> Result<OutDir, CliError> {
    fs::create_dir_all(out)?;
    Ok(OutDir(out.to_path_buf()))
}

pub struct OutDir(PathBuf);

impl OutDir {
    pub fn file(&self, name: &str) -> PathBuf {
        self.0.join(name)
    }

    pub fn path(&self) -> &Path {
        &self.0
    }

    pub fn write_text(&self, name: &str, content: &str) -> Result<(), CliError> {
        fs::write(self.file(name), content)?;
        Ok(())
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::config(format!("cannot serialize {name}: {e}")))?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// One JSON object per line, e.g. per-step training records.
    pub fn write_jsonl<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), CliError> {
        let mut text = String::new();
        for row in rows {
            let line = serde_json::to_string(row)
                .map_err(|e| CliError::config(format!("cannot serialize {name}: {e}")))?;
            text.push_str(&line);
            text.push('\n');
        }
        self.write_text(name, &text)
    }
}

pub fn epoch_activation_csv(report: &ActivationReport) -> String {
    let mut csv = String::from("epoch,mean_clean,std_clean,mean_noisy,std_noisy,gap,auc\n");
    for row in &report.per_epoch {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            row.epoch,
            row.mean_clean,
            row.std_clean,
            row.mean_noisy,
            row.std_noisy,
            row.gap,
            OptCell(row.auc),
        );
    }
    csv
}

pub fn rank_activation_csv(report: &ActivationReport) -> String {
    let mut csv = String::from("rank,example,activation,clean\n");
    for (rank, row) in report.ranking.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            rank, row.example, row.activation, row.clean as u8
        );
    }
    csv
}

pub fn clean_mask_csv(mask: &[bool]) -> String {
    let mut csv = String::from("example,clean\n");
    for (i, &clean) in mask.iter().enumerate() {
        let _ = writeln!(csv, "{},{}", i, clean as u8);
    }
    csv
}

/// A float cell that renders `None` as an empty field.
pub struct OptCell(pub Option<f64>);

impl std::fmt::Display for OptCell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => Ok(()),
        }
    }
}
