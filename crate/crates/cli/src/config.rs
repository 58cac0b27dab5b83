//! Run configuration: TOML file sections doubling as command-line flags.
//!
//! Every field is optional so that layers can be stacked; a flag given on
//! the command line wins over the config file, which wins over defaults.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use kcnet::data::NormalizationMode;
use kcnet::eval::MetricKind;
use kcnet::{DoaConfig, EnsembleConfig, ModelConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

pub const DEFAULT_REPS: usize = 5;

/// Hidden width, or an inclusive `lo..hi` range for sweeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "WidthRepr", into = "WidthRepr")]
pub enum Width {
    Fixed(usize),
    Range(usize, usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WidthRepr {
    Int(usize),
    Text(String),
}

impl TryFrom<WidthRepr> for Width {
    type Error = String;

    fn try_from(r: WidthRepr) -> Result<Self, String> {
        match r {
            WidthRepr::Int(v) => Ok(Width::Fixed(v)),
            WidthRepr::Text(t) => t.parse(),
        }
    }
}

impl From<Width> for WidthRepr {
    fn from(w: Width) -> Self {
        match w {
            Width::Fixed(v) => WidthRepr::Int(v),
            r => WidthRepr::Text(r.to_string()),
        }
    }
}

impl FromStr for Width {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let num = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("bad width '{t}': {e}"));
        match s.split_once("..") {
            Some((lo, hi)) => {
                let (lo, hi) = (num(lo)?, num(hi.trim_start_matches('='))?);
                if lo > hi {
                    return Err(format!("empty width range {s}"));
                }
                Ok(Width::Range(lo, hi))
            }
            None => Ok(Width::Fixed(num(s)?)),
        }
    }
}

impl fmt::Display for Width {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Width::Fixed(v) => write!(f, "{v}"),
            Width::Range(lo, hi) => write!(f, "{lo}..{hi}"),
        }
    }
}

impl Width {
    pub fn fixed(self) -> CliResult<usize> {
        match self {
            Width::Fixed(v) => Ok(v),
            Width::Range(..) => Err(CliError::Usage(format!(
                "hidden width range {self} is only valid for bench"
            ))),
        }
    }

    /// Widths of a sweep, `lo, lo + step, ...` up to and including `hi`.
    pub fn sweep(self, step: usize) -> CliResult<Vec<usize>> {
        match self {
            Width::Fixed(v) => Ok(vec![v]),
            Width::Range(lo, hi) => {
                if step == 0 {
                    return Err(CliError::Usage("--step must be positive".into()));
                }
                Ok((lo..=hi).step_by(step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum NormArg {
    PerFeature,
    Global,
    Identity,
}

impl From<NormArg> for NormalizationMode {
    fn from(n: NormArg) -> Self {
        match n {
            NormArg::PerFeature => NormalizationMode::PerFeature,
            NormArg::Global => NormalizationMode::Global,
            NormArg::Identity => NormalizationMode::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    Accuracy,
    WeightedF1,
    Auto,
}

impl From<MetricArg> for MetricKind {
    fn from(m: MetricArg) -> Self {
        match m {
            MetricArg::Accuracy => MetricKind::Accuracy,
            MetricArg::WeightedF1 => MetricKind::WeightedF1,
            MetricArg::Auto => MetricKind::Auto,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
#[command(next_help_heading = "Data")]
pub struct DataSection {
    /// Directory holding the four standard MNIST-style IDX files.
    #[arg(long)]
    pub idx_dir: Option<PathBuf>,
    /// Training IDX images and labels.
    #[arg(long, num_args = 2, value_names = ["IMAGES", "LABELS"])]
    pub idx_train: Option<Vec<PathBuf>>,
    /// Test IDX images and labels.
    #[arg(long, num_args = 2, value_names = ["IMAGES", "LABELS"])]
    pub idx_test: Option<Vec<PathBuf>>,
    /// Transpose IDX images (EMNIST layout).
    #[arg(long)]
    pub transpose: Option<bool>,
    /// CSV file with a header row.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Optional separate CSV test file.
    #[arg(long)]
    pub csv_test: Option<PathBuf>,
    #[arg(long)]
    pub label_column: Option<String>,
    #[arg(long)]
    pub delimiter: Option<char>,
    /// Held-out share when no test set is given (stratified).
    #[arg(long)]
    pub test_fraction: Option<f64>,
    /// Input standardization [default: global for IDX, per-feature for CSV].
    #[arg(long, value_enum)]
    pub normalization: Option<NormArg>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
#[command(next_help_heading = "Model")]
pub struct ModelSection {
    /// Hidden units; `lo..hi` for bench sweeps.
    #[arg(long = "hidden")]
    pub hidden_dim: Option<Width>,
    #[arg(long)]
    pub fan_in: Option<usize>,
    /// Global inhibition strength.
    #[arg(long)]
    pub inhibition: Option<f64>,
    /// Ridge penalty (KCNet default 1; ELM default 0).
    #[arg(long = "lambda")]
    pub ridge_lambda: Option<f64>,
    #[arg(long)]
    pub block_size: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
#[command(next_help_heading = "Input search")]
pub struct DoaSection {
    #[arg(long = "epochs")]
    pub max_epochs: Option<usize>,
    #[arg(long = "lr")]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub stop_metric: Option<f64>,
    #[arg(long)]
    pub val_fraction: Option<f64>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricArg>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
#[command(next_help_heading = "Ensemble")]
pub struct EnsembleSection {
    #[arg(long)]
    pub submodels: Option<usize>,
    /// Hidden units per submodel; sets the total width to submodels × this.
    #[arg(long)]
    pub sub_hidden: Option<usize>,
    /// Run submodels one after another.
    #[arg(long)]
    pub sequential: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize, Args)]
#[serde(default, deny_unknown_fields)]
#[command(next_help_heading = "Run")]
pub struct RunSection {
    /// Base seed; replicate r uses seed + r.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replicates [default: 5].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Output directory [default: runs/<command>-<seed>].
    #[arg(long = "out")]
    pub out_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub precision: Option<Precision>,
}

macro_rules! overlay {
    ($hi:expr, $lo:expr, $($f:ident),+) => {
        Self { $($f: $hi.$f.or($lo.$f)),+ }
    };
}

impl DataSection {
    pub fn overlay(self, lo: Self) -> Self {
        overlay!(self, lo, idx_dir, idx_train, idx_test, transpose, csv, csv_test, label_column, delimiter, test_fraction, normalization)
    }
}

impl ModelSection {
    pub fn overlay(self, lo: Self) -> Self {
        overlay!(self, lo, hidden_dim, fan_in, inhibition, ridge_lambda, block_size)
    }
}

impl DoaSection {
    pub fn overlay(self, lo: Self) -> Self {
        overlay!(self, lo, max_epochs, learning_rate, stop_metric, val_fraction, metric)
    }
}

impl EnsembleSection {
    pub fn overlay(self, lo: Self) -> Self {
        overlay!(self, lo, submodels, sub_hidden, sequential)
    }
}

impl RunSection {
    pub fn overlay(self, lo: Self) -> Self {
        overlay!(self, lo, seed, reps, out_dir, precision)
    }
}

/// Full layered configuration; also the schema of the config file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub model: ModelSection,
    pub doa: DoaSection,
    pub ensemble: EnsembleSection,
    pub run: RunSection,
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(CliError::file(path))?;
        Self::from_toml(&text).map_err(|message| CliError::Config {
            path: path.to_path_buf(),
            message,
        })
    }

    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Fields set in `self` win; the rest come from `lower`.
    pub fn overlay(self, lower: Self) -> Self {
        Self {
            data: self.data.overlay(lower.data),
            model: self.model.overlay(lower.model),
            doa: self.doa.overlay(lower.doa),
            ensemble: self.ensemble.overlay(lower.ensemble),
            run: self.run.overlay(lower.run),
        }
    }

    /// Stacks command-line flags over an optional config file over defaults.
    pub fn layered(cli: Self, file: Option<&Path>) -> CliResult<Self> {
        let file = match file {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        Ok(cli.overlay(file).overlay(Self::defaults()))
    }

    /// Values used when neither flags nor file set a field.
    pub fn defaults() -> Self {
        let m = ModelConfig::default();
        let d = DoaConfig::default();
        let e = EnsembleConfig::default();
        Self {
            data: DataSection {
                transpose: Some(false),
                label_column: Some("label".into()),
                delimiter: Some(','),
                test_fraction: Some(0.1),
                ..DataSection::default()
            },
            model: ModelSection {
                hidden_dim: Some(Width::Fixed(m.hidden_dim)),
                fan_in: Some(m.fan_in),
                inhibition: Some(m.inhibition),
                ridge_lambda: None,
                block_size: Some(m.block_size),
            },
            doa: DoaSection {
                max_epochs: Some(d.max_epochs),
                learning_rate: Some(d.learning_rate),
                stop_metric: Some(d.stop_metric),
                val_fraction: Some(d.val_fraction),
                metric: Some(MetricArg::Auto),
            },
            ensemble: EnsembleSection {
                submodels: Some(e.submodels),
                sub_hidden: None,
                sequential: Some(false),
            },
            run: RunSection {
                seed: Some(0),
                reps: Some(DEFAULT_REPS),
                out_dir: None,
                precision: Some(Precision::F64),
            },
        }
    }

    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(0)
    }

    pub fn reps(&self) -> CliResult<usize> {
        match self.run.reps.unwrap_or(DEFAULT_REPS) {
            0 => Err(CliError::Usage("--reps must be at least 1".into())),
            r => Ok(r),
        }
    }

    pub fn normalization(&self) -> NormalizationMode {
        match self.data.normalization {
            Some(n) => n.into(),
            None if self.data.csv.is_some() => NormalizationMode::PerFeature,
            None => NormalizationMode::Global,
        }
    }

    /// Total hidden width, honoring an ensemble's per-submodel width.
    pub fn hidden_dim(&self) -> CliResult<usize> {
        if let (Some(m), Some(sub)) = (self.ensemble.submodels, self.ensemble.sub_hidden) {
            return Ok(m * sub);
        }
        self.model
            .hidden_dim
            .unwrap_or(Width::Fixed(ModelConfig::default().hidden_dim))
            .fixed()
    }

    /// KCNet configuration for `input_dim` inputs, `hidden` units and `seed`.
    pub fn model_config(&self, input_dim: usize, hidden: usize, seed: u64) -> ModelConfig {
        let d = ModelConfig::default();
        ModelConfig {
            input_dim,
            hidden_dim: hidden,
            fan_in: self.model.fan_in.unwrap_or(d.fan_in),
            inhibition: self.model.inhibition.unwrap_or(d.inhibition),
            ridge_lambda: self.model.ridge_lambda.unwrap_or(d.ridge_lambda),
            rng_seed: seed,
            block_size: self.model.block_size.unwrap_or(d.block_size),
            normalization: self.normalization(),
        }
    }

    pub fn elm_config(&self, input_dim: usize, hidden: usize, seed: u64) -> kcnet::ElmConfig {
        let d = kcnet::ElmConfig::default();
        kcnet::ElmConfig {
            input_dim,
            hidden_dim: hidden,
            rng_seed: seed,
            ridge_lambda: self.model.ridge_lambda.unwrap_or(d.ridge_lambda),
            block_size: self.model.block_size.unwrap_or(d.block_size),
            normalization: self.normalization(),
        }
    }

    pub fn doa_config(&self, seed: u64) -> DoaConfig {
        let d = DoaConfig::default();
        DoaConfig {
            max_epochs: self.doa.max_epochs.unwrap_or(d.max_epochs),
            learning_rate: self.doa.learning_rate.unwrap_or(d.learning_rate),
            stop_metric: self.doa.stop_metric.unwrap_or(d.stop_metric),
            val_fraction: self.doa.val_fraction.unwrap_or(d.val_fraction),
            rng_seed: seed,
            metric: self.doa.metric.map_or(d.metric, Into::into),
        }
    }

    pub fn ensemble_config(&self, seed: u64) -> EnsembleConfig {
        EnsembleConfig {
            submodels: self.ensemble.submodels.unwrap_or(EnsembleConfig::default().submodels),
            doa: self.doa_config(seed),
            parallel: !self.ensemble.sequential.unwrap_or(false),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn width_parsing() {
        assert_eq!("650".parse::<Width>().unwrap(), Width::Fixed(650));
        assert_eq!("500..6500".parse::<Width>().unwrap(), Width::Range(500, 6500));
        assert_eq!(Width::Range(500, 1500).sweep(500).unwrap(), vec![500, 1000, 1500]);
        assert!("9..3".parse::<Width>().is_err());
        assert!(Width::Range(1, 2).fixed().is_err());
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let file = RunConfig::from_toml("[model]\nhidden_dim = 300\nridge_lambda = 5.0\n[run]\nseed = 9\n").unwrap();
        let cli = RunConfig {
            model: ModelSection {
                ridge_lambda: Some(13.0),
                ..Default::default()
            },
            ..Default::default()
        };
        let merged = cli.overlay(file).overlay(RunConfig::defaults());
        assert_eq!(merged.model.ridge_lambda, Some(13.0));
        assert_eq!(merged.model.hidden_dim, Some(Width::Fixed(300)));
        assert_eq!(merged.seed(), 9);
        assert_eq!(merged.model.fan_in, Some(7));
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[model]\nhiden = 3\n").is_err());
    }

    #[test]
    fn snapshot_round_trips() {
        let mut c = RunConfig::defaults();
        c.model.hidden_dim = Some(Width::Range(500, 6500));
        c.data.normalization = Some(NormArg::PerFeature);
        assert_eq!(RunConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn normalization_default_follows_source() {
        let mut c = RunConfig::default();
        assert_eq!(c.normalization(), NormalizationMode::Global);
        c.data.csv = Some("x.csv".into());
        assert_eq!(c.normalization(), NormalizationMode::PerFeature);
    }

    #[test]
    fn ensemble_width() {
        let mut c = RunConfig::defaults();
        c.ensemble.submodels = Some(10);
        c.ensemble.sub_hidden = Some(650);
        assert_eq!(c.hidden_dim().unwrap(), 6500);
    }
}
