use ndarray::{s, Array2, ArrayView2, Zip};

use crate::error::{KcError, Result};
use crate::linalg::{HiddenLayer, OutputWeights};
use crate::network::{softmax, Encoder};
use crate::projection::ProjectionMatrix;
use crate::scalar::Scalar;

const GRAD_BLOCK: usize = 2048;

/// Straight-through score gradient summed over a validation batch.
///
/// For every sample, `∇s_ji += x_i · Σ_k (ŷ_k − y_k) β_jk` when unit `j` is
/// active (`h_j > 0`) and `w_ji = 1`; all other entries stay exactly zero.
/// The constant `∂x̂_j/∂x̄_j` factor is left to the learning rate.
///
/// `x_val` must already be standardized with the statistics the decoder was
/// fit under.
pub fn grad_scores<T: Scalar>(
    x_val: ArrayView2<'_, T>,
    y_val: ArrayView2<'_, T>,
    projection: &ProjectionMatrix,
    output: &OutputWeights<T>,
    inhibition: f64,
) -> Result<Array2<T>> {
    let (b, d) = (projection.hidden_dim(), projection.input_dim());
    if x_val.ncols() != d {
        return Err(KcError::DimensionMismatch {
            context: "validation features",
            expected: d,
            actual: x_val.ncols(),
        });
    }
    if y_val.nrows() != x_val.nrows() {
        return Err(KcError::DimensionMismatch {
            context: "validation targets",
            expected: x_val.nrows(),
            actual: y_val.nrows(),
        });
    }
    if output.hidden_dim() != b {
        return Err(KcError::DimensionMismatch {
            context: "decoder rows",
            expected: b,
            actual: output.hidden_dim(),
        });
    }
    if y_val.ncols() != output.classes() {
        return Err(KcError::DimensionMismatch {
            context: "validation classes",
            expected: output.classes(),
            actual: y_val.ncols(),
        });
    }

    let encoder = Encoder {
        projection,
        inhibition,
    };
    let beta = &output.beta;
    let mut full = Array2::<T>::zeros((b, d));
    for start in (0..x_val.nrows()).step_by(GRAD_BLOCK) {
        let end = (start + GRAD_BLOCK).min(x_val.nrows());
        let xb = x_val.slice(s![start..end, ..]);
        let h = encoder.forward_block(xb);
        let residual = softmax(h.dot(beta).view()) - y_val.slice(s![start..end, ..]);
        // back-propagated signal per hidden unit, zero where the unit was off
        let mut delta = residual.dot(&beta.t());
        Zip::from(&mut delta).and(&h).for_each(|g, &hv| {
            if !(hv > T::zero()) {
                *g = T::zero();
            }
        });
        full += &delta.t().dot(&xb);
    }

    let mut grad = Array2::<T>::zeros((b, d));
    for (j, row) in projection.rows().iter().enumerate() {
        for &i in row {
            grad[[j, i]] = full[[j, i]];
        }
    }
    Ok(grad)
}
