//! Discrete optimization of the binary projection through real-valued
//! preference scores and a straight-through gradient.

mod ensemble;
pub mod gradcheck;
mod gradient;
mod scores;

pub use ensemble::{run_ensemble_doa, submodel_seed, EnsembleConfig, EnsembleOutcome};
pub use gradient::grad_scores;
pub use scores::{init_scores, scores_to_weights, PreferenceMatrix, SCORE_MAX, SCORE_MIN};

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::data::{split, Dataset, SplitSpec};
use crate::error::{KcError, Result};
use crate::eval::MetricKind;
use crate::network::{KcNet, ModelConfig};
use crate::projection::{sample_projection, ProjectionMatrix};
use crate::rng::{derive_seed, stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DoaConfig {
    pub max_epochs: usize,
    pub learning_rate: f64,
    /// Stop once the validation score reaches this value.
    pub stop_metric: f64,
    /// Share of the data held out for validation in each epoch.
    pub val_fraction: f64,
    pub rng_seed: u64,
    pub metric: MetricKind,
}

impl Default for DoaConfig {
    fn default() -> Self {
        Self {
            max_epochs: 100,
            learning_rate: 0.01,
            stop_metric: 0.87,
            val_fraction: 1.0 / 6.0,
            rng_seed: 0,
            metric: MetricKind::Auto,
        }
    }
}

impl DoaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(KcError::InvalidConfig("max_epochs must be at least 1".into()));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(KcError::InvalidConfig(format!(
                "learning_rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return Err(KcError::InvalidConfig(format!(
                "val_fraction must lie in (0, 1), got {}",
                self.val_fraction
            )));
        }
        if self.stop_metric.is_nan() {
            return Err(KcError::InvalidConfig("stop_metric is NaN".into()));
        }
        Ok(())
    }
}

/// Seed of the train/validation split used in epoch `epoch`.
pub fn epoch_split_seed(doa_seed: u64, epoch: usize) -> u64 {
    derive_seed(derive_seed(doa_seed, stream::SPLIT), epoch as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub val_metric: f64,
    pub ridge_lambda: f64,
    /// Weights that changed in the update after this epoch.
    pub flipped: usize,
    /// Connections in the projection the epoch was evaluated with.
    pub connections: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct DoaHistory {
    pub epochs: Vec<EpochRecord>,
    pub stopped_early: bool,
}

impl DoaHistory {
    pub fn last_metric(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.val_metric)
    }
}

#[derive(Debug, Clone)]
pub struct DoaOutcome<T: Scalar> {
    /// Model fit on the final epoch's training split.
    pub model: KcNet<T>,
    pub history: DoaHistory,
}

/// Optimizes a freshly sampled projection for `model_config`.
pub fn run_doa<T: Scalar>(
    data: &Dataset<T>,
    model_config: &ModelConfig,
    doa: &DoaConfig,
) -> Result<DoaOutcome<T>> {
    model_config.validate()?;
    let projection = sample_projection(model_config)?;
    run_doa_from(data, model_config, doa, projection)
}

/// Optimizes a given starting projection. Each epoch refits the decoder on a
/// fresh split, scores the held-out part, and stops when the score reaches
/// `stop_metric` or the epoch budget runs out; otherwise the scores take one
/// gradient step and the projection is re-thresholded.
pub fn run_doa_from<T: Scalar>(
    data: &Dataset<T>,
    model_config: &ModelConfig,
    doa: &DoaConfig,
    projection: ProjectionMatrix,
) -> Result<DoaOutcome<T>> {
    doa.validate()?;
    let mut weights = projection;
    let mut scores = init_scores(&weights, model_config.rng_seed);
    let metric = doa.metric.resolve(data.n_classes());
    let mut history = DoaHistory::default();

    for epoch in 0..doa.max_epochs {
        let spec = SplitSpec::new(1.0 - doa.val_fraction, epoch_split_seed(doa.rng_seed, epoch));
        let (train, val) = split(data, &spec)?;
        let model = KcNet::fit_with_projection(&train, model_config, weights.clone())?;
        let pred = model.predict(val.features())?;
        let score = metric.score(&pred, val.labels(), data.n_classes())?;
        let connections = weights.nnz();
        let reached = score >= doa.stop_metric;
        debug!("doa epoch {epoch}: {} {score:.5}, {connections} connections", metric.name());

        if reached || epoch + 1 == doa.max_epochs {
            history.epochs.push(EpochRecord {
                epoch,
                val_metric: score,
                ridge_lambda: model_config.ridge_lambda,
                flipped: 0,
                connections,
            });
            history.stopped_early = reached;
            info!(
                "doa finished after {} epoch(s), validation {} {score:.5}",
                epoch + 1,
                metric.name()
            );
            return Ok(DoaOutcome { model, history });
        }

        let x_val = model.normalization.apply(val.features())?;
        let grad = grad_scores(
            x_val.view(),
            val.one_hot().view(),
            &weights,
            &model.output,
            model_config.inhibition,
        )?;
        scores.step(grad.view(), doa.learning_rate)?;
        let next = scores.to_weights();
        let flipped = weights.hamming(&next);
        history.epochs.push(EpochRecord {
            epoch,
            val_metric: score,
            ridge_lambda: model_config.ridge_lambda,
            flipped,
            connections,
        });
        weights = next;
    }
    unreachable!("loop returns on its final epoch")
}
