use ndarray::{Array2, ArrayView2, Zip};

use crate::error::{KcError, Result};
use crate::projection::ProjectionMatrix;
use crate::rng::{stream, SeededRng};
use crate::scalar::Scalar;

/// Lower bound of a preference score.
pub const SCORE_MIN: f64 = -1.0;
/// Upper bound of a preference score.
pub const SCORE_MAX: f64 = 1.0;

/// Real-valued preference `s_ji ∈ [-1, 1]` behind each binary weight; the
/// weight is on exactly when its score is strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PreferenceMatrix {
    scores: Array2<f64>,
}

impl PreferenceMatrix {
    pub fn from_scores(scores: Array2<f64>) -> Result<Self> {
        if let Some(bad) = scores.iter().find(|v| !(SCORE_MIN..=SCORE_MAX).contains(*v)) {
            return Err(KcError::InvalidConfig(format!("score {bad} outside [-1, 1]")));
        }
        Ok(Self { scores })
    }

    pub fn scores(&self) -> ArrayView2<'_, f64> {
        self.scores.view()
    }

    pub fn hidden_dim(&self) -> usize {
        self.scores.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.scores.ncols()
    }

    /// `S ← clip(S − α·∇S, −1, 1)`.
    pub fn step<T: Scalar>(&mut self, grad: ArrayView2<'_, T>, learning_rate: f64) -> Result<()> {
        if grad.dim() != self.scores.dim() {
            return Err(KcError::DimensionMismatch {
                context: "score gradient shape",
                expected: self.scores.len(),
                actual: grad.len(),
            });
        }
        Zip::from(&mut self.scores).and(grad).for_each(|s, &g| {
            *s = (*s - learning_rate * g.to_f64_lossy()).clamp(SCORE_MIN, SCORE_MAX);
        });
        Ok(())
    }

    pub fn to_weights(&self) -> ProjectionMatrix {
        scores_to_weights(self)
    }
}

/// Scores for an existing projection: `U(0, 1]` where the weight is on and
/// `U(-1, 0]` where it is off, drawn row-major from the score stream of `seed`.
pub fn init_scores(weights: &ProjectionMatrix, seed: u64) -> PreferenceMatrix {
    let mut rng = SeededRng::for_stream(seed, stream::SCORES);
    let (b, d) = (weights.hidden_dim(), weights.input_dim());
    let mut scores = Array2::zeros((b, d));
    for j in 0..b {
        let row = weights.row(j);
        let mut next_on = 0;
        for i in 0..d {
            let u = rng.unit();
            let on = next_on < row.len() && row[next_on] == i;
            if on {
                next_on += 1;
                scores[[j, i]] = 1.0 - u;
            } else {
                scores[[j, i]] = -u;
            }
        }
    }
    PreferenceMatrix { scores }
}

/// `w_ji = 1` iff `s_ji > 0`.
pub fn scores_to_weights(scores: &PreferenceMatrix) -> ProjectionMatrix {
    let rows = scores
        .scores
        .rows()
        .into_iter()
        .map(|r| r.iter().enumerate().filter(|(_, &s)| s > 0.0).map(|(i, _)| i).collect())
        .collect();
    ProjectionMatrix::from_rows(scores.input_dim(), rows).expect("indices ascending and in range")
}
