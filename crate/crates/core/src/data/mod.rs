//! In-memory datasets and the loaders, normalization and splitting that feed
//! them.

mod csv;
mod idx;
mod normalize;
mod split;

pub use self::csv::{load_csv, CsvOptions};
pub use self::idx::{encode_idx_images, encode_idx_labels, load_idx, load_idx_with, IdxOptions};
pub use self::normalize::{standardize, Normalization, NormalizationMode};
pub use self::split::{split, split_indices, SplitSpec};

use ndarray::{Array2, ArrayView2, Axis};

use crate::error::{KcError, Result};
use crate::scalar::Scalar;

/// Features plus class-index targets.
///
/// Targets are stored as indices into `class_labels`; [`one_hot`](Self::one_hot)
/// expands them into the `N × c` indicator matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T: Scalar> {
    features: Array2<T>,
    labels: Vec<usize>,
    class_labels: Vec<String>,
    feature_names: Option<Vec<String>>,
    image_shape: Option<(usize, usize)>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(features: Array2<T>, labels: Vec<usize>, class_labels: Vec<String>) -> Result<Self> {
        if features.nrows() == 0 || features.ncols() == 0 {
            return Err(KcError::EmptyDataset);
        }
        if labels.len() != features.nrows() {
            return Err(KcError::DimensionMismatch {
                context: "label count",
                expected: features.nrows(),
                actual: labels.len(),
            });
        }
        if class_labels.is_empty() {
            return Err(KcError::TooFewClasses(0));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_labels.len()) {
            return Err(KcError::InvalidConfig(format!(
                "label index {bad} out of range for {} classes",
                class_labels.len()
            )));
        }
        Ok(Self {
            features,
            labels,
            class_labels,
            feature_names: None,
            image_shape: None,
        })
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(KcError::DimensionMismatch {
                context: "feature names",
                expected: self.n_features(),
                actual: names.len(),
            });
        }
        self.feature_names = Some(names);
        Ok(self)
    }

    pub fn with_image_shape(mut self, rows: usize, cols: usize) -> Result<Self> {
        if rows * cols != self.n_features() {
            return Err(KcError::DimensionMismatch {
                context: "image shape",
                expected: self.n_features(),
                actual: rows * cols,
            });
        }
        self.image_shape = Some((rows, cols));
        Ok(self)
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn features(&self) -> ArrayView2<'_, T> {
        self.features.view()
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_labels(&self) -> &[String] {
        &self.class_labels
    }

    pub fn feature_names(&self) -> Option<&[String]> {
        self.feature_names.as_deref()
    }

    pub fn image_shape(&self) -> Option<(usize, usize)> {
        self.image_shape
    }

    /// Number of distinct classes that actually occur.
    pub fn classes_present(&self) -> usize {
        let mut seen = vec![false; self.n_classes()];
        for &l in &self.labels {
            seen[l] = true;
        }
        seen.iter().filter(|&&s| s).count()
    }

    /// Per-class sample counts, indexed by class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// `N × c` indicator matrix with exactly one 1 per row.
    pub fn one_hot(&self) -> Array2<T> {
        let mut y = Array2::zeros((self.n_samples(), self.n_classes()));
        for (r, &l) in self.labels.iter().enumerate() {
            y[[r, l]] = T::one();
        }
        y
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(KcError::EmptyDataset);
        }
        let features = self.features.select(Axis(0), indices);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok(Self {
            features,
            labels,
            class_labels: self.class_labels.clone(),
            feature_names: self.feature_names.clone(),
            image_shape: self.image_shape,
        })
    }

    /// Same targets and metadata with replaced features of equal shape.
    pub fn with_features(&self, features: Array2<T>) -> Result<Self> {
        if features.dim() != self.features.dim() {
            return Err(KcError::DimensionMismatch {
                context: "replacement features",
                expected: self.n_features(),
                actual: features.ncols(),
            });
        }
        Ok(Self {
            features,
            ..self.clone()
        })
    }

    /// Re-index targets onto `classes` (matched by label string), so that a
    /// separately loaded test set shares the training set's class order.
    pub fn align_classes(&self, classes: &[String]) -> Result<Self> {
        let mut map = Vec::with_capacity(self.n_classes());
        for name in &self.class_labels {
            let idx = classes
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| KcError::UnknownLabel(name.clone()))?;
            map.push(idx);
        }
        Ok(Self {
            labels: self.labels.iter().map(|&l| map[l]).collect(),
            class_labels: classes.to_vec(),
            ..self.clone()
        })
    }

    /// Converts the feature storage type.
    pub fn cast<U: Scalar>(&self) -> Dataset<U> {
        Dataset {
            features: self.features.mapv(|v| U::from_f64_lossy(v.to_f64_lossy())),
            labels: self.labels.clone(),
            class_labels: self.class_labels.clone(),
            feature_names: self.feature_names.clone(),
            image_shape: self.image_shape,
        }
    }
}
