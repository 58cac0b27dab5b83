//! Independent dense oracles for the score gradient.
//!
//! Everything here works on dense `f64` matrices with explicit loops and
//! shares no code with the production gradient path.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use serde::Serialize;

use super::grad_scores;
use crate::linalg::OutputWeights;
use crate::projection::ProjectionMatrix;
use crate::rng::{derive_seed, SeededRng};

/// Centered-difference step used on the relaxed loss.
pub const FD_STEP: f64 = 1e-6;
/// Magnitude below which finite-difference errors are measured absolutely.
pub const FD_REL_FLOOR: f64 = 1e-4;

/// Pre-activation `x̂` of one sample under a dense, possibly real-valued `w`.
pub fn dense_preactivation(x: ArrayView1<'_, f64>, w: ArrayView2<'_, f64>, inhibition: f64) -> Array1<f64> {
    let b = w.nrows();
    let mut xbar = Array1::zeros(b);
    for j in 0..b {
        let mut acc = 0.0;
        for i in 0..w.ncols() {
            acc += w[[j, i]] * x[i];
        }
        xbar[j] = acc;
    }
    let mu = xbar.sum() / b as f64;
    xbar.mapv(|v| v - inhibition * mu)
}

fn dense_softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Per-sample `∂L/∂h_j` with the ReLU derivative applied, given activity mask.
fn hidden_signal(h: &[f64], active: &[bool], y: ArrayView1<'_, f64>, beta: ArrayView2<'_, f64>) -> Vec<f64> {
    let (b, c) = beta.dim();
    let mut z = vec![0.0; c];
    for k in 0..c {
        for j in 0..b {
            z[k] += beta[[j, k]] * h[j];
        }
    }
    let p = dense_softmax(&z);
    (0..b)
        .map(|j| {
            if !active[j] {
                return 0.0;
            }
            (0..c).map(|k| (p[k] - y[k]) * beta[[j, k]]).sum()
        })
        .collect()
}

fn active_mask(x: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>, inhibition: f64) -> Vec<Vec<bool>> {
    x.rows()
        .into_iter()
        .map(|row| dense_preactivation(row, w, inhibition).iter().map(|&v| v > 0.0).collect())
        .collect()
}

/// Product of the diagonal chain `∂L/∂z · ∂z/∂h · ∂h/∂x̂ · ∂x̂_j/∂x̄_j · ∂x̄_j/∂s_ji`
/// summed over samples, with the straight-through `∂x̄_j/∂s_ji = w_ji x_i`.
pub fn diagonal_chain_gradient(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    w: ArrayView2<'_, f64>,
    beta: ArrayView2<'_, f64>,
    inhibition: f64,
) -> Array2<f64> {
    let (b, d) = w.dim();
    let self_term = 1.0 - inhibition / b as f64;
    let mut grad = Array2::zeros((b, d));
    for (v, row) in x.rows().into_iter().enumerate() {
        let pre = dense_preactivation(row, w, inhibition);
        let active: Vec<bool> = pre.iter().map(|&p| p > 0.0).collect();
        let h: Vec<f64> = pre.iter().map(|&p| p.max(0.0)).collect();
        let dh = hidden_signal(&h, &active, y.row(v), beta);
        for j in 0..b {
            for i in 0..d {
                grad[[j, i]] += dh[j] * self_term * w[[j, i]] * row[i];
            }
        }
    }
    grad
}

/// Summed cross-entropy when `w` is treated as continuous and each unit's
/// ReLU state is pinned to `mask`.
pub fn relaxed_loss(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    w: ArrayView2<'_, f64>,
    beta: ArrayView2<'_, f64>,
    inhibition: f64,
    mask: &[Vec<bool>],
) -> f64 {
    let c = beta.ncols();
    let mut loss = 0.0;
    for (v, row) in x.rows().into_iter().enumerate() {
        let pre = dense_preactivation(row, w, inhibition);
        let h: Vec<f64> = pre.iter().zip(&mask[v]).map(|(&p, &a)| if a { p } else { 0.0 }).collect();
        let mut z = vec![0.0; c];
        for k in 0..c {
            for (j, hv) in h.iter().enumerate() {
                z[k] += beta[[j, k]] * hv;
            }
        }
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
        for k in 0..c {
            loss -= y[[v, k]] * (z[k] - lse);
        }
    }
    loss
}

/// Exact derivative of [`relaxed_loss`] with respect to every `w_ji`,
/// including the coupling of all units through the inhibition mean.
pub fn relaxed_gradient(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    w: ArrayView2<'_, f64>,
    beta: ArrayView2<'_, f64>,
    inhibition: f64,
    mask: &[Vec<bool>],
) -> Array2<f64> {
    let (b, d) = w.dim();
    let mut grad = Array2::zeros((b, d));
    for (v, row) in x.rows().into_iter().enumerate() {
        let pre = dense_preactivation(row, w, inhibition);
        let h: Vec<f64> = pre.iter().zip(&mask[v]).map(|(&p, &a)| if a { p } else { 0.0 }).collect();
        let dh = hidden_signal(&h, &mask[v], y.row(v), beta);
        let coupling = inhibition / b as f64 * dh.iter().sum::<f64>();
        for j in 0..b {
            for i in 0..d {
                grad[[j, i]] += (dh[j] - coupling) * row[i];
            }
        }
    }
    grad
}

/// Centered difference of [`relaxed_loss`] in `w_ji`.
pub fn finite_difference(
    x: ArrayView2<'_, f64>,
    y: ArrayView2<'_, f64>,
    w: ArrayView2<'_, f64>,
    beta: ArrayView2<'_, f64>,
    inhibition: f64,
    mask: &[Vec<bool>],
    (j, i): (usize, usize),
    step: f64,
) -> f64 {
    let mut wp = w.to_owned();
    wp[[j, i]] += step;
    let mut wm = w.to_owned();
    wm[[j, i]] -= step;
    let lp = relaxed_loss(x, y, wp.view(), beta, inhibition, mask);
    let lm = relaxed_loss(x, y, wm.view(), beta, inhibition, mask);
    (lp - lm) / (2.0 * step)
}

pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(FD_REL_FLOOR)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GradcheckSizes {
    pub max_input: usize,
    pub max_hidden: usize,
    pub max_classes: usize,
    pub max_samples: usize,
}

impl Default for GradcheckSizes {
    fn default() -> Self {
        Self {
            max_input: 6,
            max_hidden: 4,
            max_classes: 3,
            max_samples: 5,
        }
    }
}

/// One random instance of the gradient problem; every size is at least 2.
#[derive(Debug, Clone)]
pub struct GradInstance {
    pub projection: ProjectionMatrix,
    pub x: Array2<f64>,
    pub y: Array2<f64>,
    pub beta: Array2<f64>,
}

impl GradInstance {
    pub fn random(sizes: &GradcheckSizes, seed: u64) -> Self {
        let mut rng = SeededRng::new(seed);
        let d = 2 + rng.below(sizes.max_input.max(2) - 1);
        let b = 2 + rng.below(sizes.max_hidden.max(2) - 1);
        let c = 2 + rng.below(sizes.max_classes.max(2) - 1);
        let n = 1 + rng.below(sizes.max_samples.max(1));
        let rows = (0..b)
            .map(|_| {
                let k = 1 + rng.below(d);
                rng.sample_without_replacement(d, k)
            })
            .collect();
        let projection = ProjectionMatrix::from_rows(d, rows).expect("valid sampled rows");
        let x = Array2::from_shape_fn((n, d), |_| rng.uniform(-2.0, 2.0));
        let mut y = Array2::zeros((n, c));
        for v in 0..n {
            y[[v, rng.below(c)]] = 1.0;
        }
        let beta = Array2::from_shape_fn((b, c), |_| rng.uniform(-1.5, 1.5));
        Self { projection, x, y, beta }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct GradcheckReport {
    pub instances: usize,
    /// Largest `|compact · (1 − C/B) − diagonal chain|`.
    pub max_oracle_dev: f64,
    /// Largest relative error between the exact relaxed gradient and finite differences.
    pub max_fd_rel_err: f64,
    /// Largest relative error between the scaled compact gradient and finite differences.
    pub max_compact_fd_rel_err: f64,
    pub fd_entries: usize,
}

impl GradcheckReport {
    pub fn passed(&self, oracle_tol: f64, fd_tol: f64) -> bool {
        self.instances > 0 && self.max_oracle_dev <= oracle_tol && self.max_fd_rel_err <= fd_tol
    }
}

/// Checks one instance and folds the deviations into `report`.
pub fn check_instance(inst: &GradInstance, inhibition: f64, report: &mut GradcheckReport) {
    let w = inst.projection.to_dense();
    let b = w.nrows();
    let compact = grad_scores(
        inst.x.view(),
        inst.y.view(),
        &inst.projection,
        &OutputWeights::new(inst.beta.clone()),
        inhibition,
    )
    .expect("instance dimensions agree");
    let scaled = compact * (1.0 - inhibition / b as f64);
    let oracle = diagonal_chain_gradient(inst.x.view(), inst.y.view(), w.view(), inst.beta.view(), inhibition);
    let dev = (&scaled - &oracle).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    report.max_oracle_dev = report.max_oracle_dev.max(dev);

    let mask = active_mask(inst.x.view(), w.view(), inhibition);
    let exact = relaxed_gradient(inst.x.view(), inst.y.view(), w.view(), inst.beta.view(), inhibition, &mask);
    for (j, row) in inst.projection.rows().iter().enumerate() {
        if !mask.iter().any(|m| m[j]) {
            continue;
        }
        for &i in row {
            let fd = finite_difference(
                inst.x.view(),
                inst.y.view(),
                w.view(),
                inst.beta.view(),
                inhibition,
                &mask,
                (j, i),
                FD_STEP,
            );
            report.max_fd_rel_err = report.max_fd_rel_err.max(relative_error(exact[[j, i]], fd));
            report.max_compact_fd_rel_err = report.max_compact_fd_rel_err.max(relative_error(scaled[[j, i]], fd));
            report.fd_entries += 1;
        }
    }
    report.instances += 1;
}

/// Runs `instances` random checks; instance `t` is drawn from `derive_seed(seed, t)`.
pub fn run_gradcheck(sizes: &GradcheckSizes, seed: u64, instances: usize, inhibition: f64) -> GradcheckReport {
    let mut report = GradcheckReport::default();
    for t in 0..instances {
        let inst = GradInstance::random(sizes, derive_seed(seed, t as u64));
        check_instance(&inst, inhibition, &mut report);
    }
    report
}
