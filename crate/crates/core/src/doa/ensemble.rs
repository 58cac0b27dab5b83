use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_doa, DoaConfig, DoaHistory};
use crate::data::Dataset;
use crate::error::{KcError, Result};
use crate::network::{KcNet, ModelConfig};
use crate::projection::ProjectionMatrix;
use crate::rng::{derive_seed, stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnsembleConfig {
    /// Number of submodels; each gets `hidden_dim / submodels` units.
    pub submodels: usize,
    pub doa: DoaConfig,
    /// Run submodels on the rayon pool instead of one after another.
    pub parallel: bool,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        Self {
            submodels: 10,
            doa: DoaConfig::default(),
            parallel: true,
        }
    }
}

/// Seed of submodel `k` under master seed `master`.
pub fn submodel_seed(master: u64, k: usize) -> u64 {
    derive_seed(derive_seed(master, stream::SUBMODEL), k as u64)
}

impl EnsembleConfig {
    /// Configuration of submodel `k` derived from the full model's.
    pub fn submodel_config(&self, full: &ModelConfig, k: usize) -> Result<(ModelConfig, DoaConfig)> {
        if self.submodels < 2 {
            return Err(KcError::InvalidConfig("ensemble needs at least two submodels".into()));
        }
        if full.hidden_dim % self.submodels != 0 {
            return Err(KcError::InvalidConfig(format!(
                "hidden_dim {} is not divisible by {} submodels",
                full.hidden_dim, self.submodels
            )));
        }
        let mut sub = full.clone();
        sub.hidden_dim = full.hidden_dim / self.submodels;
        sub.rng_seed = submodel_seed(full.rng_seed, k);
        let mut doa = self.doa.clone();
        doa.rng_seed = submodel_seed(self.doa.rng_seed, k);
        Ok((sub, doa))
    }
}

#[derive(Debug, Clone)]
pub struct EnsembleOutcome<T: Scalar> {
    /// Joint model over the concatenated projections, fit on all of `data`.
    pub model: KcNet<T>,
    pub histories: Vec<DoaHistory>,
}

/// Optimizes each submodel's projection independently, stacks the results
/// in submodel order and fits one decoder over the combined hidden layer.
pub fn run_ensemble_doa<T: Scalar>(
    data: &Dataset<T>,
    full: &ModelConfig,
    ensemble: &EnsembleConfig,
) -> Result<EnsembleOutcome<T>> {
    full.validate()?;
    ensemble.doa.validate()?;
    let run = |k: usize| -> Result<(ProjectionMatrix, DoaHistory)> {
        let (sub, doa) = ensemble.submodel_config(full, k)?;
        let out = run_doa(data, &sub, &doa)?;
        Ok((out.model.projection, out.history))
    };
    let results: Vec<(ProjectionMatrix, DoaHistory)> = if ensemble.parallel {
        (0..ensemble.submodels).into_par_iter().map(run).collect::<Result<_>>()?
    } else {
        (0..ensemble.submodels).map(run).collect::<Result<_>>()?
    };
    let (parts, histories): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let projection = ProjectionMatrix::concat(&parts)?;
    info!(
        "ensemble assembled: {} units, {} connections",
        projection.hidden_dim(),
        projection.nnz()
    );
    let model = KcNet::fit_with_projection(data, full, projection)?;
    Ok(EnsembleOutcome { model, histories })
}
