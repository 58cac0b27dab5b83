//! Streaming normal-equation assembly and the symmetric positive-definite
//! solve behind every closed-form decoder in the crate.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Axis};
use rayon::prelude::*;

use crate::error::{KcError, Result};
use crate::scalar::Scalar;

/// Default number of samples per streamed block of hidden activations.
pub const DEFAULT_BLOCK_SIZE: usize = 2048;

/// Column panel width for the blocked Gram update and Cholesky trailing update.
const PANEL: usize = 256;

/// Anything that maps a block of inputs to a block of hidden activations.
pub trait HiddenLayer<T: Scalar>: Sync {
    fn input_dim(&self) -> usize;
    fn hidden_dim(&self) -> usize;
    /// Rows of `x` are samples; returns `x.nrows() × hidden_dim`.
    fn forward_block(&self, x: ArrayView2<'_, T>) -> Array2<T>;
}

/// Decoder weights `β` (hidden × classes).
#[derive(Debug, Clone, PartialEq)]
pub struct OutputWeights<T: Scalar> {
    pub beta: Array2<T>,
}

impl<T: Scalar> OutputWeights<T> {
    pub fn new(beta: Array2<T>) -> Self {
        Self { beta }
    }

    pub fn zeros(hidden_dim: usize, classes: usize) -> Self {
        Self::new(Array2::zeros((hidden_dim, classes)))
    }

    pub fn hidden_dim(&self) -> usize {
        self.beta.nrows()
    }

    pub fn classes(&self) -> usize {
        self.beta.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.beta.iter().all(|v| v.is_finite())
    }
}

/// Accumulates `G = HᵀH` and `T = HᵀY` one sample block at a time.
///
/// Only the upper triangle of `G` is maintained until [`finish`](Self::finish).
#[derive(Debug, Clone)]
pub struct GramAccumulator<T: Scalar> {
    gram: Array2<T>,
    cross: Array2<T>,
    samples: usize,
}

impl<T: Scalar> GramAccumulator<T> {
    pub fn new(hidden_dim: usize, classes: usize) -> Self {
        Self {
            gram: Array2::zeros((hidden_dim, hidden_dim)),
            cross: Array2::zeros((hidden_dim, classes)),
            samples: 0,
        }
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn push_block(&mut self, h: ArrayView2<'_, T>, y: ArrayView2<'_, T>) -> Result<()> {
        let b = self.gram.nrows();
        if h.ncols() != b {
            return Err(KcError::DimensionMismatch {
                context: "hidden block width",
                expected: b,
                actual: h.ncols(),
            });
        }
        if y.nrows() != h.nrows() {
            return Err(KcError::DimensionMismatch {
                context: "target block rows",
                expected: h.nrows(),
                actual: y.nrows(),
            });
        }
        if y.ncols() != self.cross.ncols() {
            return Err(KcError::DimensionMismatch {
                context: "target block columns",
                expected: self.cross.ncols(),
                actual: y.ncols(),
            });
        }
        if h.nrows() == 0 {
            return Ok(());
        }
        // upper-triangular panels of HᵀH
        for p0 in (0..b).step_by(PANEL) {
            let p1 = (p0 + PANEL).min(b);
            let hp = h.slice(s![.., p0..p1]);
            let rhs = h.slice(s![.., p0..]);
            let mut out = self.gram.slice_mut(s![p0..p1, p0..]);
            general_mat_mul(T::one(), &hp.t(), &rhs, T::one(), &mut out);
        }
        general_mat_mul(T::one(), &h.t(), &y, T::one(), &mut self.cross);
        self.samples += h.nrows();
        Ok(())
    }

    pub fn merge(&mut self, other: &Self) {
        self.gram += &other.gram;
        self.cross += &other.cross;
        self.samples += other.samples;
    }

    /// Mirror the upper triangle and return `(G, T)`.
    pub fn finish(mut self) -> (Array2<T>, Array2<T>) {
        let b = self.gram.nrows();
        for i in 0..b {
            for j in 0..i {
                self.gram[[i, j]] = self.gram[[j, i]];
            }
        }
        (self.gram, self.cross)
    }
}

/// Streams `x` through `layer` in row blocks and returns `(HᵀH, HᵀY)`.
///
/// The full activation matrix is never materialized. Blocks are split into
/// one contiguous group per worker thread; partial sums are merged at the end.
pub fn accumulate_gram<T, L>(
    x: ArrayView2<'_, T>,
    y: ArrayView2<'_, T>,
    layer: &L,
    block_size: usize,
) -> Result<(Array2<T>, Array2<T>)>
where
    T: Scalar,
    L: HiddenLayer<T> + ?Sized,
{
    if block_size == 0 {
        return Err(KcError::InvalidConfig("block_size must be at least 1".into()));
    }
    if x.ncols() != layer.input_dim() {
        return Err(KcError::DimensionMismatch {
            context: "feature columns",
            expected: layer.input_dim(),
            actual: x.ncols(),
        });
    }
    if y.nrows() != x.nrows() {
        return Err(KcError::DimensionMismatch {
            context: "target rows",
            expected: x.nrows(),
            actual: y.nrows(),
        });
    }
    let n = x.nrows();
    let hidden = layer.hidden_dim();
    let classes = y.ncols();
    let blocks: Vec<(usize, usize)> = (0..n)
        .step_by(block_size)
        .map(|start| (start, (start + block_size).min(n)))
        .collect();
    let groups = rayon::current_num_threads().clamp(1, blocks.len().max(1));
    let per_group = blocks.len().div_ceil(groups).max(1);

    let partials: Vec<Result<GramAccumulator<T>>> = blocks
        .par_chunks(per_group)
        .map(|chunk| {
            let mut acc = GramAccumulator::new(hidden, classes);
            for &(a, b) in chunk {
                let h = layer.forward_block(x.slice(s![a..b, ..]));
                acc.push_block(h.view(), y.slice(s![a..b, ..]))?;
            }
            Ok(acc)
        })
        .collect();

    let mut total = GramAccumulator::new(hidden, classes);
    for part in partials {
        total.merge(&part?);
    }
    Ok(total.finish())
}

/// In-place lower Cholesky factorization `A = L Lᵀ` (right-looking, blocked).
///
/// Only the lower triangle of the result is meaningful. Fails with
/// [`KcError::SingularGram`] when a pivot falls below `n·ε·max(diag A)`.
pub fn cholesky_in_place<T: Scalar>(a: &mut Array2<T>) -> Result<()> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(KcError::DimensionMismatch {
            context: "square matrix",
            expected: n,
            actual: a.ncols(),
        });
    }
    let max_diag = (0..n).map(|i| a[[i, i]]).fold(T::zero(), |m, v| m.max(v.abs()));
    let tol = T::epsilon() * T::from_usize_lossy(n.max(1)) * max_diag;

    for k in (0..n).step_by(PANEL) {
        let kb = PANEL.min(n - k);
        let ke = k + kb;

        // diagonal block, unblocked
        for j in k..ke {
            let mut d = a[[j, j]];
            for p in k..j {
                let v = a[[j, p]];
                d -= v * v;
            }
            if !(d > tol) {
                return Err(KcError::SingularGram {
                    row: j,
                    pivot: d.to_f64_lossy(),
                });
            }
            let d = d.sqrt();
            a[[j, j]] = d;
            for i in (j + 1)..ke {
                let mut v = a[[i, j]];
                for p in k..j {
                    v -= a[[i, p]] * a[[j, p]];
                }
                a[[i, j]] = v / d;
            }
        }
        if ke == n {
            break;
        }

        // panel below the diagonal block: L21 = A21 L11⁻ᵀ
        {
            let (top, mut bottom) = a.view_mut().split_at(Axis(0), ke);
            let l11 = top.slice(s![k..ke, k..ke]);
            bottom
                .axis_iter_mut(Axis(0))
                .into_par_iter()
                .for_each(|mut row| {
                    for j in 0..kb {
                        let mut v = row[k + j];
                        for p in 0..j {
                            v -= row[k + p] * l11[[j, p]];
                        }
                        row[k + j] = v / l11[[j, j]];
                    }
                });
        }

        // trailing update A22 -= L21 L21ᵀ, lower trapezoid only
        let l21 = a.slice(s![ke.., k..ke]).to_owned();
        let m = n - ke;
        for r0 in (0..m).step_by(PANEL) {
            let r1 = (r0 + PANEL).min(m);
            let lhs = l21.slice(s![r0..r1, ..]);
            let rhs = l21.slice(s![..r1, ..]);
            let mut out = a.slice_mut(s![ke + r0..ke + r1, ke..ke + r1]);
            general_mat_mul(-T::one(), &lhs, &rhs.t(), T::one(), &mut out);
        }
    }
    Ok(())
}

/// Solve `L Lᵀ X = B` given the lower Cholesky factor in `l`.
pub fn cholesky_solve<T: Scalar>(l: &Array2<T>, rhs: &Array2<T>) -> Array2<T> {
    let n = l.nrows();
    let c = rhs.ncols();
    let mut z = rhs.clone();
    // forward: L z = b
    for i in 0..n {
        for p in 0..i {
            let lip = l[[i, p]];
            if lip != T::zero() {
                for k in 0..c {
                    let zp = z[[p, k]];
                    z[[i, k]] -= lip * zp;
                }
            }
        }
        let d = l[[i, i]];
        for k in 0..c {
            z[[i, k]] /= d;
        }
    }
    // backward: Lᵀ x = z
    for i in (0..n).rev() {
        for p in (i + 1)..n {
            let lpi = l[[p, i]];
            if lpi != T::zero() {
                for k in 0..c {
                    let xp = z[[p, k]];
                    z[[i, k]] -= lpi * xp;
                }
            }
        }
        let d = l[[i, i]];
        for k in 0..c {
            z[[i, k]] /= d;
        }
    }
    z
}

/// Ridge solve `(G + λI) β = T`, consuming `G` as factorization workspace.
pub fn solve_ridge_owned<T: Scalar>(
    mut gram: Array2<T>,
    cross: &Array2<T>,
    lambda: f64,
) -> Result<OutputWeights<T>> {
    let b = gram.nrows();
    if gram.ncols() != b {
        return Err(KcError::DimensionMismatch {
            context: "Gram matrix columns",
            expected: b,
            actual: gram.ncols(),
        });
    }
    if cross.nrows() != b {
        return Err(KcError::DimensionMismatch {
            context: "cross-product rows",
            expected: b,
            actual: cross.nrows(),
        });
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(KcError::InvalidConfig(format!("lambda must be finite and >= 0, got {lambda}")));
    }
    let lam = T::from_f64_lossy(lambda);
    for i in 0..b {
        gram[[i, i]] += lam;
    }
    cholesky_in_place(&mut gram)?;
    Ok(OutputWeights::new(cholesky_solve(&gram, cross)))
}

/// Ridge solve `(G + λI) β = T`; `G` must be symmetric positive semidefinite
/// and `λ > 0` unless `G` has full rank.
pub fn solve_ridge<T: Scalar>(
    gram: &Array2<T>,
    cross: &Array2<T>,
    lambda: f64,
) -> Result<OutputWeights<T>> {
    solve_ridge_owned(gram.clone(), cross, lambda)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    struct Identity(usize);

    impl HiddenLayer<f64> for Identity {
        fn input_dim(&self) -> usize {
            self.0
        }
        fn hidden_dim(&self) -> usize {
            self.0
        }
        fn forward_block(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
            x.to_owned()
        }
    }

    #[test]
    fn identity_system() {
        let g = Array2::<f64>::eye(2);
        let y = array![[1.0, 0.0], [0.0, 1.0]];
        let beta = solve_ridge(&g, &y, 0.0).unwrap();
        assert_eq!(beta.beta, y);
        let half = solve_ridge(&g, &y, 1.0).unwrap();
        let want = y.mapv(|v| v / 2.0);
        assert!(half.beta.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-15));
    }

    #[test]
    fn rank_deficient_without_ridge_is_singular() {
        let g = array![[1.0, 1.0], [1.0, 1.0]];
        let t = array![[1.0], [1.0]];
        match solve_ridge(&g, &t, 0.0) {
            Err(KcError::SingularGram { .. }) => {}
            other => panic!("expected singular error, got {other:?}"),
        }
        assert!(solve_ridge(&g, &t, 1e-3).is_ok());
    }

    #[test]
    fn negative_lambda_rejected() {
        let g = Array2::<f64>::eye(2);
        let t = Array2::<f64>::zeros((2, 1));
        assert!(matches!(solve_ridge(&g, &t, -1.0), Err(KcError::InvalidConfig(_))));
    }

    #[test]
    fn blocked_cholesky_reconstructs_large_spd() {
        // large enough to cross several panels
        let n = 600;
        let mut rng = crate::rng::SeededRng::new(5);
        let m = Array2::from_shape_fn((n, n + 10), |_| rng.uniform(-1.0, 1.0));
        let a = m.dot(&m.t());
        let mut l = a.clone();
        cholesky_in_place(&mut l).unwrap();
        for i in 0..n {
            for j in (i + 1)..n {
                l[[i, j]] = 0.0;
            }
        }
        let back = l.dot(&l.t());
        let err = (&back - &a).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(err < 1e-9, "reconstruction error {err}");
    }

    #[test]
    fn zero_dataset_gives_zero_gram() {
        let x = Array2::<f64>::zeros((7, 3));
        let y = Array2::<f64>::zeros((7, 2));
        let (g, t) = accumulate_gram(x.view(), y.view(), &Identity(3), 2).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(t.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_block_size_rejected() {
        let x = Array2::<f64>::zeros((2, 3));
        let y = Array2::<f64>::zeros((2, 2));
        assert!(accumulate_gram(x.view(), y.view(), &Identity(3), 0).is_err());
    }

    #[test]
    fn gram_dimension_mismatch() {
        let x = Array2::<f64>::zeros((2, 4));
        let y = Array2::<f64>::zeros((2, 2));
        assert!(matches!(
            accumulate_gram(x.view(), y.view(), &Identity(3), 2),
            Err(KcError::DimensionMismatch { .. })
        ));
    }
}
