//! Sparse binary random-projection networks with global inhibition, a
//! closed-form ridge decoder, and score-based optimization of the projection.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the common choices.

pub mod baselines;
pub mod data;
pub mod doa;
pub mod error;
pub mod eval;
pub mod linalg;
pub mod network;
pub mod projection;
pub mod rng;
pub mod scalar;

pub use baselines::{ElmConfig, ElmModel};
pub use data::Dataset;
pub use doa::{run_doa, run_ensemble_doa, DoaConfig, DoaHistory, EnsembleConfig};
pub use error::{KcError, Result};
pub use eval::{EvalReport, MetricKind, PhaseTimings};
pub use linalg::{HiddenLayer, OutputWeights};
pub use network::{KcNet, ModelConfig};
pub use projection::{sample_projection, ProjectionMatrix};
pub use scalar::Scalar;

pub type KcNet64 = KcNet<f64>;
pub type KcNet32 = KcNet<f32>;
pub type Elm64 = ElmModel<f64>;
pub type Elm32 = ElmModel<f32>;
pub type Dataset64 = Dataset<f64>;
pub type Dataset32 = Dataset<f32>;
/// Default-precision trained model.
pub type TrainedModel = KcNet64;
