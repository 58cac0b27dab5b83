//! The sparse binary random-projection network: encoder with global
//! inhibition, streamed ridge decoder fit, and prediction.

use ndarray::{s, Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Normalization, NormalizationMode};
use crate::error::{KcError, Result};
use crate::linalg::{accumulate_gram, solve_ridge_owned, HiddenLayer, OutputWeights, DEFAULT_BLOCK_SIZE};
use crate::projection::{sample_projection, ProjectionMatrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    /// Inputs wired to each hidden unit at sampling time.
    pub fan_in: usize,
    /// Strength of the mean-subtracting global inhibition.
    pub inhibition: f64,
    pub ridge_lambda: f64,
    pub rng_seed: u64,
    /// Samples per streamed activation block. Affects rounding only.
    pub block_size: usize,
    /// Input standardization fit on the training data.
    #[serde(default)]
    pub normalization: NormalizationMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 0,
            hidden_dim: 2000,
            fan_in: 7,
            inhibition: 1.0,
            ridge_lambda: 1.0,
            rng_seed: 0,
            block_size: DEFAULT_BLOCK_SIZE,
            normalization: NormalizationMode::PerFeature,
        }
    }
}

impl ModelConfig {
    pub fn new(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.fan_in < 1 || self.fan_in >= self.input_dim {
            return Err(KcError::InvalidConfig(format!(
                "fan_in must satisfy 1 <= fan_in < input_dim, got fan_in={} input_dim={}",
                self.fan_in, self.input_dim
            )));
        }
        if self.hidden_dim < 1 {
            return Err(KcError::InvalidConfig("hidden_dim must be at least 1".into()));
        }
        if !(self.ridge_lambda >= 0.0) || !self.ridge_lambda.is_finite() {
            return Err(KcError::InvalidConfig(format!("ridge_lambda must be >= 0, got {}", self.ridge_lambda)));
        }
        if !(self.inhibition >= 0.0) || !self.inhibition.is_finite() {
            return Err(KcError::InvalidConfig(format!("inhibition must be >= 0, got {}", self.inhibition)));
        }
        if self.block_size < 1 {
            return Err(KcError::InvalidConfig("block_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// Post-ReLU hidden layer output, one row per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenActivations<T: Scalar>(pub Array2<T>);

impl<T: Scalar> HiddenActivations<T> {
    pub fn view(&self) -> ArrayView2<'_, T> {
        self.0.view()
    }

    pub fn into_inner(self) -> Array2<T> {
        self.0
    }
}

/// Projection plus inhibition strength; the fixed half of the network.
#[derive(Debug, Clone, Copy)]
pub struct Encoder<'a> {
    pub projection: &'a ProjectionMatrix,
    pub inhibition: f64,
}

impl Encoder<'_> {
    /// Writes the hidden vector of one sample into `out`.
    ///
    /// `x̄_j = Σ_{i∈row j} x_i`, `μ = mean_j x̄_j`, `h_j = max(0, x̄_j − C·μ)`.
    pub fn forward_sample<T: Scalar>(&self, x: &[T], out: &mut [T]) {
        let rows = self.projection.rows();
        let mut total = T::zero();
        for (o, row) in out.iter_mut().zip(rows) {
            let mut acc = T::zero();
            for &i in row {
                acc += x[i];
            }
            *o = acc;
            total += acc;
        }
        let shift = T::from_f64_lossy(self.inhibition) * total / T::from_usize_lossy(rows.len());
        for o in out.iter_mut() {
            let v = *o - shift;
            *o = if v > T::zero() { v } else { T::zero() };
        }
    }
}

impl<T: Scalar> HiddenLayer<T> for Encoder<'_> {
    fn input_dim(&self) -> usize {
        self.projection.input_dim()
    }

    fn hidden_dim(&self) -> usize {
        self.projection.hidden_dim()
    }

    fn forward_block(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let mut h = Array2::zeros((x.nrows(), self.projection.hidden_dim()));
        Zip::from(h.rows_mut()).and(x.rows()).par_for_each(|mut out, xr| {
            let out = out.as_slice_mut().expect("fresh row-major output");
            match xr.as_slice() {
                Some(xs) => self.forward_sample(xs, out),
                None => self.forward_sample(&xr.to_vec(), out),
            }
        });
        h
    }
}

/// Hidden activations of every row of `x`.
pub fn hidden_forward<T: Scalar>(
    x: ArrayView2<'_, T>,
    projection: &ProjectionMatrix,
    inhibition: f64,
) -> Result<HiddenActivations<T>> {
    if x.ncols() != projection.input_dim() {
        return Err(KcError::DimensionMismatch {
            context: "feature columns",
            expected: projection.input_dim(),
            actual: x.ncols(),
        });
    }
    let enc = Encoder {
        projection,
        inhibition,
    };
    Ok(HiddenActivations(enc.forward_block(x)))
}

/// Row-wise numerically stable softmax.
pub fn softmax<T: Scalar>(logits: ArrayView2<'_, T>) -> Array2<T> {
    let mut p = logits.to_owned();
    for mut row in p.rows_mut() {
        let m = row.iter().fold(T::neg_infinity(), |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - m).exp());
        let z: T = row.iter().copied().sum();
        row.mapv_inplace(|v| v / z);
    }
    p
}

/// Row-wise argmax; ties resolve to the lowest column index.
pub fn argmax_rows<T: Scalar>(scores: ArrayView2<'_, T>) -> Vec<usize> {
    scores
        .rows()
        .into_iter()
        .map(|row| {
            let mut best = 0;
            for (k, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = k;
                }
            }
            best
        })
        .collect()
}

/// A fitted network. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct KcNet<T: Scalar> {
    pub config: ModelConfig,
    pub projection: ProjectionMatrix,
    pub output: OutputWeights<T>,
    pub normalization: Normalization,
    pub class_labels: Vec<String>,
}

impl<T: Scalar> KcNet<T> {
    /// Standardizes with training statistics, samples the projection from
    /// `config.rng_seed`, streams the Gram matrix and solves for `β`.
    pub fn fit(train: &Dataset<T>, config: &ModelConfig) -> Result<Self> {
        check_inputs(train, config)?;
        let projection = sample_projection(config)?;
        Self::fit_with_projection(train, config, projection)
    }

    /// As [`fit`](Self::fit) but with a caller-supplied projection.
    pub fn fit_with_projection(
        train: &Dataset<T>,
        config: &ModelConfig,
        projection: ProjectionMatrix,
    ) -> Result<Self> {
        check_inputs(train, config)?;
        if projection.input_dim() != config.input_dim || projection.hidden_dim() != config.hidden_dim {
            return Err(KcError::DimensionMismatch {
                context: "projection shape",
                expected: config.hidden_dim,
                actual: projection.hidden_dim(),
            });
        }
        let normalization = Normalization::fit_mode(train.features(), config.normalization);
        let x = normalization.apply(train.features())?;
        let y = train.one_hot();
        let encoder = Encoder {
            projection: &projection,
            inhibition: config.inhibition,
        };
        let (gram, cross) = accumulate_gram(x.view(), y.view(), &encoder, config.block_size)?;
        drop(x);
        let output = solve_ridge_owned(gram, &cross, config.ridge_lambda)?;
        Ok(Self {
            config: config.clone(),
            projection,
            output,
            normalization,
            class_labels: train.class_labels().to_vec(),
        })
    }

    pub fn hidden_dim(&self) -> usize {
        self.projection.hidden_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.projection.input_dim()
    }

    pub fn n_classes(&self) -> usize {
        self.output.classes()
    }

    pub fn encoder(&self) -> Encoder<'_> {
        Encoder {
            projection: &self.projection,
            inhibition: self.config.inhibition,
        }
    }

    /// Logits `Z = H β` for raw (unnormalized) inputs.
    pub fn predict_logits(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if x.ncols() != self.input_dim() {
            return Err(KcError::DimensionMismatch {
                context: "feature columns",
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        let x = self.normalization.apply(x)?;
        Ok(self.logits_normalized(x.view()))
    }

    /// Logits for inputs already standardized with `self.normalization`.
    pub fn logits_normalized(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let encoder = self.encoder();
        let mut z = Array2::zeros((x.nrows(), self.n_classes()));
        let block = self.config.block_size.max(1);
        for start in (0..x.nrows()).step_by(block) {
            let end = (start + block).min(x.nrows());
            let h = encoder.forward_block(x.slice(s![start..end, ..]));
            z.slice_mut(s![start..end, ..]).assign(&h.dot(&self.output.beta));
        }
        z
    }

    pub fn predict_proba(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        Ok(softmax(self.predict_logits(x)?.view()))
    }

    pub fn predict(&self, x: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        Ok(argmax_rows(self.predict_logits(x)?.view()))
    }
}

fn check_inputs<T: Scalar>(train: &Dataset<T>, config: &ModelConfig) -> Result<()> {
    config.validate()?;
    if train.n_features() != config.input_dim {
        return Err(KcError::DimensionMismatch {
            context: "dataset features vs input_dim",
            expected: config.input_dim,
            actual: train.n_features(),
        });
    }
    let present = train.classes_present();
    if present < 2 {
        return Err(KcError::TooFewClasses(present));
    }
    Ok(())
}

/// Fraction of strictly positive activations in `h`.
pub fn active_fraction<T: Scalar>(h: ArrayView2<'_, T>) -> f64 {
    let active = h.iter().filter(|&&v| v > T::zero()).count();
    active as f64 / (h.len().max(1)) as f64
}
