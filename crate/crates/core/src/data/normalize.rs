use ndarray::{Array2, ArrayView2, Axis, Zip};
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{KcError, Result};
use crate::scalar::Scalar;

/// How standardization statistics are pooled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizationMode {
    /// Separate mean and deviation for every feature.
    #[default]
    PerFeature,
    /// One mean and deviation over all feature values, as is usual for images.
    Global,
    /// No rescaling.
    Identity,
}

impl NormalizationMode {
    pub fn name(self) -> &'static str {
        match self {
            NormalizationMode::PerFeature => "per-feature",
            NormalizationMode::Global => "global",
            NormalizationMode::Identity => "identity",
        }
    }
}

impl std::str::FromStr for NormalizationMode {
    type Err = KcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-feature" => Ok(Self::PerFeature),
            "global" => Ok(Self::Global),
            "identity" | "none" => Ok(Self::Identity),
            other => Err(KcError::InvalidConfig(format!(
                "unknown normalization '{other}' (per-feature, global, identity)"
            ))),
        }
    }
}

/// Standardization statistics (population convention), stored per feature.
///
/// Features whose standard deviation is zero, up to rounding, are flagged
/// constant and pass through untouched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub constant: Vec<bool>,
}

impl Normalization {
    pub fn identity(d: usize) -> Self {
        Self {
            mean: vec![0.0; d],
            std: vec![1.0; d],
            constant: vec![false; d],
        }
    }

    pub fn fit_mode<T: Scalar>(x: ArrayView2<'_, T>, mode: NormalizationMode) -> Self {
        match mode {
            NormalizationMode::PerFeature => Self::fit(x),
            NormalizationMode::Global => Self::fit_global(x),
            NormalizationMode::Identity => Self::identity(x.ncols()),
        }
    }

    /// Pools every entry of `x` into one mean and deviation.
    pub fn fit_global<T: Scalar>(x: ArrayView2<'_, T>) -> Self {
        let d = x.ncols();
        let n = x.len() as f64;
        let m = x.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / n;
        let var = x
            .iter()
            .map(|v| {
                let dv = v.to_f64_lossy() - m;
                dv * dv
            })
            .sum::<f64>()
            / n;
        let s = var.sqrt();
        let flat = !(s > 1e-12 * m.abs().max(1.0));
        Self {
            mean: vec![m; d],
            std: vec![if flat { 0.0 } else { s }; d],
            constant: vec![flat; d],
        }
    }

    pub fn fit<T: Scalar>(x: ArrayView2<'_, T>) -> Self {
        let n = x.nrows() as f64;
        let mut mean = Vec::with_capacity(x.ncols());
        let mut std = Vec::with_capacity(x.ncols());
        let mut constant = Vec::with_capacity(x.ncols());
        for col in x.axis_iter(Axis(1)) {
            let m = col.iter().map(|v| v.to_f64_lossy()).sum::<f64>() / n;
            let var = col
                .iter()
                .map(|v| {
                    let dv = v.to_f64_lossy() - m;
                    dv * dv
                })
                .sum::<f64>()
                / n;
            let s = var.sqrt();
            let flat = !(s > 1e-12 * m.abs().max(1.0));
            mean.push(m);
            std.push(if flat { 0.0 } else { s });
            constant.push(flat);
        }
        Self { mean, std, constant }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn constant_count(&self) -> usize {
        self.constant.iter().filter(|&&c| c).count()
    }

    pub fn apply<T: Scalar>(&self, x: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if x.ncols() != self.dim() {
            return Err(KcError::DimensionMismatch {
                context: "normalization width",
                expected: self.dim(),
                actual: x.ncols(),
            });
        }
        let shift: Vec<T> = self
            .mean
            .iter()
            .zip(&self.constant)
            .map(|(&m, &c)| T::from_f64_lossy(if c { 0.0 } else { m }))
            .collect();
        let inv: Vec<T> = self
            .std
            .iter()
            .zip(&self.constant)
            .map(|(&s, &c)| T::from_f64_lossy(if c { 1.0 } else { 1.0 / s }))
            .collect();
        let mut out = x.to_owned();
        Zip::from(out.rows_mut()).par_for_each(|mut row| {
            for ((v, &s), &k) in row.iter_mut().zip(&shift).zip(&inv) {
                *v = (*v - s) * k;
            }
        });
        Ok(out)
    }
}

/// Standardizes `train` with its own statistics and every dataset in `others`
/// with the same statistics.
pub fn standardize<T: Scalar>(
    train: &Dataset<T>,
    others: &[&Dataset<T>],
) -> Result<(Dataset<T>, Vec<Dataset<T>>, Normalization)> {
    let stats = Normalization::fit(train.features());
    let t = train.with_features(stats.apply(train.features())?)?;
    let rest = others
        .iter()
        .map(|d| d.with_features(stats.apply(d.features())?))
        .collect::<Result<Vec<_>>>()?;
    Ok((t, rest, stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn ds(x: Array2<f64>) -> Dataset<f64> {
        let n = x.nrows();
        Dataset::new(x, (0..n).map(|i| i % 2).collect(), vec!["0".into(), "1".into()]).unwrap()
    }

    #[test]
    fn global_pools_all_entries() {
        let x = ndarray::array![[0.0, 2.0], [4.0, 6.0]];
        let g = Normalization::fit_global(x.view());
        assert_eq!(g.mean, vec![3.0, 3.0]);
        assert!((g.std[0] - 5f64.sqrt()).abs() < 1e-15);
        let id = Normalization::fit_mode(x.view(), NormalizationMode::Identity);
        assert_eq!(id.apply(x.view()).unwrap(), x);
        assert_eq!("global".parse::<NormalizationMode>().unwrap(), NormalizationMode::Global);
    }

    #[test]
    fn population_convention() {
        let (t, _, stats) = standardize(&ds(array![[1.0], [3.0]]), &[]).unwrap();
        assert_eq!(stats.mean, vec![2.0]);
        assert_eq!(stats.std, vec![1.0]);
        assert_eq!(t.features().column(0).to_vec(), vec![-1.0, 1.0]);
    }

    #[test]
    fn constant_column_passes_through() {
        let (t, _, stats) = standardize(&ds(array![[5.0, 1.0], [5.0, 2.0], [5.0, 4.0]]), &[]).unwrap();
        assert_eq!(stats.constant, vec![true, false]);
        assert_eq!(t.features().column(0).to_vec(), vec![5.0, 5.0, 5.0]);
    }

    #[test]
    fn others_use_train_statistics() {
        let train = ds(array![[0.0], [2.0]]);
        let test = ds(array![[4.0], [1.0]]);
        let (_, rest, _) = standardize(&train, &[&test]).unwrap();
        assert_eq!(rest[0].features().column(0).to_vec(), vec![3.0, 0.0]);
    }

    #[test]
    fn width_mismatch() {
        let stats = Normalization::identity(3);
        let x = Array2::<f64>::zeros((1, 2));
        assert!(stats.apply(x.view()).is_err());
    }
}
