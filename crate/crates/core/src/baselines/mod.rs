//! Dense random-feature baseline.

mod elm;

pub use elm::{sigmoid, ElmConfig, ElmEncoder, ElmModel, ELM_RETRY_LAMBDA};
