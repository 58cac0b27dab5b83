//! Classification metrics, phase timing and run reports.

mod metrics;
mod timing;

pub use metrics::{accuracy, mean_std, weighted_f1, ClassScores, ConfusionMatrix};
pub use timing::{Phase, PhaseTimer, PhaseTimings};

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Which score drives early stopping and model selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricKind {
    Accuracy,
    WeightedF1,
    /// Weighted F1 for two-class problems, accuracy otherwise.
    #[default]
    Auto,
}

impl MetricKind {
    pub fn resolve(self, classes: usize) -> MetricKind {
        match self {
            MetricKind::Auto if classes == 2 => MetricKind::WeightedF1,
            MetricKind::Auto => MetricKind::Accuracy,
            other => other,
        }
    }

    pub fn score(self, pred: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
        match self.resolve(classes) {
            MetricKind::WeightedF1 => weighted_f1(pred, truth, classes),
            _ => accuracy(pred, truth),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Accuracy => "accuracy",
            MetricKind::WeightedF1 => "weighted-f1",
            MetricKind::Auto => "auto",
        }
    }
}

/// Test-set summary of one trained model.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub model: String,
    pub hidden_dim: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub weighted_f1: f64,
    pub per_class: Vec<ClassScores>,
    pub confusion: ConfusionMatrix,
    pub timings: PhaseTimings,
}

impl EvalReport {
    pub fn new(
        model: impl Into<String>,
        hidden_dim: usize,
        seed: u64,
        pred: &[usize],
        truth: &[usize],
        classes: usize,
        timings: PhaseTimings,
    ) -> Result<Self> {
        let confusion = ConfusionMatrix::new(pred, truth, classes)?;
        Ok(Self {
            model: model.into(),
            hidden_dim,
            seed,
            accuracy: confusion.accuracy(),
            weighted_f1: confusion.weighted_f1(),
            per_class: (0..classes).map(|c| confusion.class_scores(c)).collect(),
            confusion,
            timings,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn auto_metric() {
        assert_eq!(MetricKind::Auto.resolve(2), MetricKind::WeightedF1);
        assert_eq!(MetricKind::Auto.resolve(10), MetricKind::Accuracy);
        assert_eq!(MetricKind::Accuracy.resolve(2), MetricKind::Accuracy);
    }

    #[test]
    fn report_fields() {
        let r = EvalReport::new("kcnet", 4, 1, &[0, 1, 1, 1], &[0, 0, 1, 1], 2, PhaseTimings::default())
            .unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.per_class.len(), 2);
        assert_eq!(r.confusion.get(0, 1), 1);
    }
}
