use log::warn;
use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Normalization, NormalizationMode};
use crate::error::{KcError, Result};
use crate::linalg::{accumulate_gram, solve_ridge_owned, HiddenLayer, OutputWeights, DEFAULT_BLOCK_SIZE};
use crate::network::argmax_rows;
use crate::rng::{stream, SeededRng};
use crate::scalar::Scalar;

/// Ridge added when the unregularized solve hits a singular Gram matrix.
pub const ELM_RETRY_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElmConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub rng_seed: u64,
    /// 0 gives the plain least-squares fit.
    pub ridge_lambda: f64,
    pub block_size: usize,
    pub normalization: NormalizationMode,
}

impl Default for ElmConfig {
    fn default() -> Self {
        Self {
            input_dim: 0,
            hidden_dim: 6500,
            rng_seed: 0,
            ridge_lambda: 0.0,
            block_size: DEFAULT_BLOCK_SIZE,
            normalization: NormalizationMode::PerFeature,
        }
    }
}

impl ElmConfig {
    pub fn new(input_dim: usize, hidden_dim: usize) -> Self {
        Self {
            input_dim,
            hidden_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(KcError::InvalidConfig("input_dim and hidden_dim must be positive".into()));
        }
        if self.block_size == 0 {
            return Err(KcError::InvalidConfig("block_size must be positive".into()));
        }
        if !(self.ridge_lambda >= 0.0 && self.ridge_lambda.is_finite()) {
            return Err(KcError::InvalidConfig(format!(
                "ridge_lambda must be finite and >= 0, got {}",
                self.ridge_lambda
            )));
        }
        Ok(())
    }
}

/// Overflow-safe logistic function.
pub fn sigmoid<T: Scalar>(v: T) -> T {
    if v >= T::zero() {
        T::one() / (T::one() + (-v).exp())
    } else {
        let e = v.exp();
        e / (T::one() + e)
    }
}

/// Dense hidden layer `h = σ(A x + b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElmEncoder<T: Scalar> {
    /// `hidden × input`, entries in `[-1, 1)`.
    pub weights: Array2<T>,
    /// Entries in `[0, 1)`.
    pub bias: Array1<T>,
}

impl<T: Scalar> ElmEncoder<T> {
    /// Draws `A` row-major, then `b`, from the ELM stream of the seed.
    pub fn sample(config: &ElmConfig) -> Self {
        let mut rng = SeededRng::for_stream(config.rng_seed, stream::ELM_WEIGHTS);
        let weights = Array2::from_shape_simple_fn((config.hidden_dim, config.input_dim), || {
            T::from_f64_lossy(rng.uniform(-1.0, 1.0))
        });
        let bias = Array1::from_shape_simple_fn(config.hidden_dim, || T::from_f64_lossy(rng.unit()));
        Self { weights, bias }
    }
}

impl<T: Scalar> HiddenLayer<T> for ElmEncoder<T> {
    fn input_dim(&self) -> usize {
        self.weights.ncols()
    }

    fn hidden_dim(&self) -> usize {
        self.weights.nrows()
    }

    fn forward_block(&self, x: ArrayView2<'_, T>) -> Array2<T> {
        let mut h = x.dot(&self.weights.t());
        Zip::from(h.rows_mut()).par_for_each(|mut row| {
            Zip::from(&mut row).and(&self.bias).for_each(|v, &b| *v = sigmoid(*v + b));
        });
        h
    }
}

/// Extreme learning machine: random dense sigmoid layer plus a
/// least-squares decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct ElmModel<T: Scalar> {
    pub config: ElmConfig,
    pub encoder: ElmEncoder<T>,
    pub output: OutputWeights<T>,
    pub normalization: Normalization,
    pub class_labels: Vec<String>,
    /// Ridge actually used, after any singularity retry.
    pub lambda_used: f64,
}

impl<T: Scalar> ElmModel<T> {
    /// With `ridge_lambda == 0`, a singular Gram matrix triggers one retry
    /// at [`ELM_RETRY_LAMBDA`] and a warning.
    pub fn fit(train: &Dataset<T>, config: &ElmConfig) -> Result<Self> {
        config.validate()?;
        Self::fit_with_encoder(train, config, ElmEncoder::sample(config))
    }

    /// As [`fit`](Self::fit) but with caller-supplied hidden weights.
    pub fn fit_with_encoder(train: &Dataset<T>, config: &ElmConfig, encoder: ElmEncoder<T>) -> Result<Self> {
        config.validate()?;
        if encoder.weights.dim() != (config.hidden_dim, config.input_dim) || encoder.bias.len() != config.hidden_dim {
            return Err(KcError::DimensionMismatch {
                context: "ELM hidden weights",
                expected: config.hidden_dim * config.input_dim,
                actual: encoder.weights.len(),
            });
        }
        if train.n_features() != config.input_dim {
            return Err(KcError::DimensionMismatch {
                context: "training features",
                expected: config.input_dim,
                actual: train.n_features(),
            });
        }
        if train.classes_present() < 2 {
            return Err(KcError::TooFewClasses(train.classes_present()));
        }
        let normalization = Normalization::fit_mode(train.features(), config.normalization);
        let x = normalization.apply(train.features())?;
        let y = train.one_hot();
        let (gram, cross) = accumulate_gram(x.view(), y.view(), &encoder, config.block_size)?;
        drop(x);

        let (output, lambda_used) = if config.ridge_lambda == 0.0 {
            match solve_ridge_owned(gram.clone(), &cross, 0.0) {
                Ok(out) => (out, 0.0),
                Err(KcError::SingularGram { row, pivot }) => {
                    warn!(
                        "ELM Gram matrix singular (pivot {pivot:e} at row {row}); retrying with lambda {ELM_RETRY_LAMBDA:e}"
                    );
                    match solve_ridge_owned(gram, &cross, ELM_RETRY_LAMBDA) {
                        Ok(out) => (out, ELM_RETRY_LAMBDA),
                        Err(KcError::SingularGram { .. }) => {
                            return Err(KcError::SingularAfterRetry {
                                jitter: ELM_RETRY_LAMBDA,
                            })
                        }
                        Err(e) => return Err(e),
                    }
                }
                Err(e) => return Err(e),
            }
        } else {
            (solve_ridge_owned(gram, &cross, config.ridge_lambda)?, config.ridge_lambda)
        };

        Ok(Self {
            config: config.clone(),
            encoder,
            output,
            normalization,
            class_labels: train.class_labels().to_vec(),
            lambda_used,
        })
    }

    pub fn predict_logits(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        let xn = self.normalization.apply(x)?;
        let mut out = Array2::zeros((xn.nrows(), self.output.classes()));
        let block = self.config.block_size.max(1);
        for (xb, mut ob) in xn
            .axis_chunks_iter(Axis(0), block)
            .zip(out.axis_chunks_iter_mut(Axis(0), block))
        {
            ob.assign(&self.encoder.forward_block(xb).dot(&self.output.beta));
        }
        Ok(out)
    }

    pub fn predict(&self, x: ArrayView2<'_, T>) -> Result<Vec<usize>> {
        Ok(argmax_rows(self.predict_logits(x)?.view()))
    }
}
