use serde::{Deserialize, Serialize};

use crate::error::{KcError, Result};
use crate::network::ModelConfig;
use crate::rng::{stream, SeededRng};

/// Binary input-to-hidden wiring, stored as one sorted index list per hidden
/// unit: index `i` is in row `j` iff `w_ji = 1`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectionMatrix {
    input_dim: usize,
    rows: Vec<Vec<usize>>,
}

impl ProjectionMatrix {
    /// Builds a projection from explicit rows. Indices are sorted and must be
    /// unique and below `input_dim`.
    pub fn from_rows(input_dim: usize, rows: Vec<Vec<usize>>) -> Result<Self> {
        let mut rows = rows;
        for (j, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            if row.windows(2).any(|w| w[0] == w[1]) {
                return Err(KcError::InvalidConfig(format!("row {j} repeats an input index")));
            }
            if let Some(&last) = row.last() {
                if last >= input_dim {
                    return Err(KcError::InvalidConfig(format!(
                        "row {j} references input {last}, input_dim is {input_dim}"
                    )));
                }
            }
        }
        Ok(Self { input_dim, rows })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.rows
    }

    pub fn row(&self, j: usize) -> &[usize] {
        &self.rows[j]
    }

    pub fn contains(&self, j: usize, i: usize) -> bool {
        self.rows[j].binary_search(&i).is_ok()
    }

    /// Total number of ones.
    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Number of `(j, i)` entries that differ between two projections of the
    /// same shape.
    pub fn hamming(&self, other: &Self) -> usize {
        assert_eq!(self.hidden_dim(), other.hidden_dim());
        self.rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let (mut p, mut q, mut same) = (0, 0, 0);
                while p < a.len() && q < b.len() {
                    match a[p].cmp(&b[q]) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            same += 1;
                            p += 1;
                            q += 1;
                        }
                    }
                }
                a.len() + b.len() - 2 * same
            })
            .sum()
    }

    /// Stacks row blocks in order. All parts must share `input_dim`.
    pub fn concat(parts: &[ProjectionMatrix]) -> Result<Self> {
        let input_dim = parts
            .first()
            .map(|p| p.input_dim)
            .ok_or_else(|| KcError::InvalidConfig("no projections to concatenate".into()))?;
        let mut rows = Vec::with_capacity(parts.iter().map(|p| p.hidden_dim()).sum());
        for p in parts {
            if p.input_dim != input_dim {
                return Err(KcError::DimensionMismatch {
                    context: "concatenated projection input_dim",
                    expected: input_dim,
                    actual: p.input_dim,
                });
            }
            rows.extend(p.rows.iter().cloned());
        }
        Ok(Self { input_dim, rows })
    }

    /// Dense 0/1 view, `hidden × input`.
    pub fn to_dense(&self) -> ndarray::Array2<f64> {
        let mut w = ndarray::Array2::zeros((self.hidden_dim(), self.input_dim));
        for (j, row) in self.rows.iter().enumerate() {
            for &i in row {
                w[[j, i]] = 1.0;
            }
        }
        w
    }
}

/// Draws `fan_in` distinct inputs for every hidden unit.
///
/// Rows are generated in order from the projection stream of
/// `config.rng_seed`, each by a partial Fisher–Yates pass over `[0, d)`.
pub fn sample_projection(config: &ModelConfig) -> Result<ProjectionMatrix> {
    config.validate()?;
    let mut rng = SeededRng::for_stream(config.rng_seed, stream::PROJECTION);
    let rows = (0..config.hidden_dim)
        .map(|_| rng.sample_without_replacement(config.input_dim, config.fan_in))
        .collect();
    Ok(ProjectionMatrix {
        input_dim: config.input_dim,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(d: usize, b: usize, n_in: usize, seed: u64) -> ModelConfig {
        ModelConfig {
            input_dim: d,
            hidden_dim: b,
            fan_in: n_in,
            rng_seed: seed,
            ..ModelConfig::default()
        }
    }

    #[test]
    fn mnist_sized_rows_have_fan_in_distinct_indices() {
        let w = sample_projection(&cfg(784, 6500, 7, 1)).unwrap();
        assert_eq!(w.hidden_dim(), 6500);
        for row in w.rows() {
            assert_eq!(row.len(), 7);
            assert!(row.windows(2).all(|p| p[0] < p[1]));
            assert!(row.iter().all(|&i| i < 784));
        }
    }

    #[test]
    fn two_inputs_one_fan_in_is_reproducible() {
        let a = sample_projection(&cfg(2, 3, 1, 99)).unwrap();
        for row in a.rows() {
            assert!(row == &vec![0] || row == &vec![1]);
        }
        assert_eq!(a, sample_projection(&cfg(2, 3, 1, 99)).unwrap());
    }

    #[test]
    fn omitted_index_is_uniform() {
        // d = 8, n_in = 7: each row omits exactly one index
        let w = sample_projection(&cfg(8, 10_000, 7, 2024)).unwrap();
        let mut counts = [0usize; 8];
        for row in w.rows() {
            let omitted = (0..8).find(|i| !row.contains(i)).unwrap();
            counts[omitted] += 1;
        }
        let expected = 10_000.0 / 8.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        // 7 degrees of freedom, 0.999 quantile ≈ 24.32
        assert!(chi2 < 24.32, "chi-square {chi2}, counts {counts:?}");
        for &c in &counts {
            assert!((c as f64 / 10_000.0 - 0.125).abs() <= 0.01, "{counts:?}");
        }
    }

    #[test]
    fn invalid_fan_in_rejected() {
        assert!(sample_projection(&cfg(4, 2, 4, 0)).is_err());
        assert!(sample_projection(&cfg(4, 2, 0, 0)).is_err());
    }

    #[test]
    fn hamming_counts_symmetric_difference() {
        let a = ProjectionMatrix::from_rows(5, vec![vec![0, 1, 2], vec![3]]).unwrap();
        let b = ProjectionMatrix::from_rows(5, vec![vec![1, 2, 4], vec![]]).unwrap();
        assert_eq!(a.hamming(&b), 3);
        assert_eq!(a.hamming(&a), 0);
    }

    #[test]
    fn from_rows_validates() {
        assert!(ProjectionMatrix::from_rows(3, vec![vec![0, 0]]).is_err());
        assert!(ProjectionMatrix::from_rows(3, vec![vec![3]]).is_err());
        let p = ProjectionMatrix::from_rows(3, vec![vec![2, 0]]).unwrap();
        assert_eq!(p.row(0), &[0, 2]);
    }
}
