use serde::Serialize;

use crate::error::{KcError, Result};

fn check_labels(pred: &[usize], truth: &[usize], classes: usize) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(KcError::DimensionMismatch {
            context: "prediction count",
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(KcError::EmptyDataset);
    }
    if let Some(&bad) = pred.iter().chain(truth).find(|&&l| l >= classes) {
        return Err(KcError::InvalidConfig(format!(
            "label {bad} outside [0, {classes})"
        )));
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(KcError::DimensionMismatch {
            context: "prediction count",
            expected: truth.len(),
            actual: pred.len(),
        });
    }
    if truth.is_empty() {
        return Err(KcError::EmptyDataset);
    }
    let hits = pred.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// Counts indexed `[truth][predicted]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(pred: &[usize], truth: &[usize], classes: usize) -> Result<Self> {
        check_labels(pred, truth, classes)?;
        let mut counts = vec![vec![0u64; classes]; classes];
        for (&p, &t) in pred.iter().zip(truth) {
            counts[t][p] += 1;
        }
        Ok(Self { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn rows(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Precision, recall and F1 of one class; an undefined ratio counts as 0.
    pub fn class_scores(&self, class: usize) -> ClassScores {
        let tp = self.counts[class][class] as f64;
        let predicted: u64 = self.counts.iter().map(|r| r[class]).sum();
        let actual = self.support(class);
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if actual == 0 { 0.0 } else { tp / actual as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ClassScores {
            precision,
            recall,
            f1,
            support: actual,
        }
    }

    /// Support-weighted mean of per-class F1.
    pub fn weighted_f1(&self) -> f64 {
        let total = self.total() as f64;
        (0..self.classes())
            .map(|c| {
                let s = self.class_scores(c);
                s.f1 * s.support as f64 / total
            })
            .sum()
    }

    pub fn accuracy(&self) -> f64 {
        let hits: u64 = (0..self.classes()).map(|c| self.counts[c][c]).sum();
        hits as f64 / self.total() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

pub fn weighted_f1(pred: &[usize], truth: &[usize], classes: usize) -> Result<f64> {
    Ok(ConfusionMatrix::new(pred, truth, classes)?.weighted_f1())
}

/// Mean and sample standard deviation (`n − 1`); the deviation is 0 for a
/// single value.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
