//! Layer-to-layer propagation of activity means and covariances.
//!
//! Pre-activations of one layer are treated as jointly Gaussian with
//! covariance `Delta = w C w^T` and mean `x0 = w m + b`; the layer's output
//! moments follow by Gaussian averages of `tanh` over that field. Pairwise
//! covariances use the parametrization of two correlated standard normals
//! `(x, psi*x + y*sqrt(1 - psi^2))`, so each unordered pair costs one
//! tensor-product quadrature.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::ensembles::LayerWeights;
use crate::error::{Error, Result};
use crate::math;
use crate::numerics::QuadratureRule;

/// Variances below this are treated as exactly deterministic pre-activations.
const DETERMINISTIC_VARIANCE: f64 = 1e-14;
/// Negative variances beyond this tolerance signal invalid input covariance.
const NEGATIVE_VARIANCE_TOL: f64 = -1e-12;

/// Mean vector and connected covariance matrix of one layer's activity.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerMoments {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl LayerMoments {
    /// Wrap a mean vector and covariance matrix, checking shape, symmetry
    /// (within 1e-10) and nonnegative diagonal.
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() {
            return Err(Error::dims(format!(
                "covariance must be square, got {}x{}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        if mean.len() != cov.nrows() {
            return Err(Error::dims(format!(
                "mean length {} vs covariance size {}",
                mean.len(),
                cov.nrows()
            )));
        }
        for i in 0..cov.nrows() {
            if cov[(i, i)] < NEGATIVE_VARIANCE_TOL {
                return Err(Error::domain(format!(
                    "negative variance {} at unit {i}",
                    cov[(i, i)]
                )));
            }
            for j in (i + 1)..cov.ncols() {
                if (cov[(i, j)] - cov[(j, i)]).abs() > 1e-10 {
                    return Err(Error::invalid(format!(
                        "covariance asymmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { mean, cov })
    }

    /// Zero-mean moments, the starting point of the random-input experiment.
    pub fn zero_mean(cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        Self::new(DVector::zeros(n), cov)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn into_parts(self) -> (DVector<f64>, DMatrix<f64>) {
        (self.mean, self.cov)
    }
}

/// Gaussian statistics of a layer's pre-activations.
#[derive(Debug, Clone, PartialEq)]
pub struct PreActivationStats {
    /// Covariance of the centered pre-activations, `w C w^T`, symmetrized.
    pub delta: DMatrix<f64>,
    /// Mean pre-activation `w m + b`.
    pub x0: DVector<f64>,
}

impl PreActivationStats {
    /// Pairwise correlation `Delta_ij / sqrt(Delta_ii * Delta_jj)`.
    /// Returns `None` when either variance vanishes.
    pub fn psi(&self, i: usize, j: usize) -> Option<f64> {
        let dii = self.delta[(i, i)];
        let djj = self.delta[(j, j)];
        if dii <= 0.0 || djj <= 0.0 {
            return None;
        }
        Some(self.delta[(i, j)] / math::sqrt(dii * djj))
    }
}

/// Diagnostics accumulated while propagating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PropagationTrace {
    /// Pairs whose correlation left `[-1, 1]` by rounding and was clamped.
    pub psi_clamped: usize,
    /// Units whose pre-activation variance was below the deterministic cutoff.
    pub deterministic_units: usize,
}

impl PropagationTrace {
    fn absorb(&mut self, other: PropagationTrace) {
        self.psi_clamped += other.psi_clamped;
        self.deterministic_units += other.deterministic_units;
    }
}

/// Compute `Delta = w C w^T` (symmetrized) and `x0 = w m + b`.
pub fn preactivation_stats(
    weights: &LayerWeights,
    prev: &LayerMoments,
) -> Result<PreActivationStats> {
    if weights.input_dim() != prev.dim() {
        return Err(Error::dims(format!(
            "layer expects input width {}, got moments of width {}",
            weights.input_dim(),
            prev.dim()
        )));
    }
    let wc = &weights.weights * prev.cov();
    let delta_raw = &wc * weights.weights.transpose();
    let delta = 0.5 * (&delta_raw + delta_raw.transpose());
    let x0 = &weights.weights * prev.mean() + &weights.biases;
    Ok(PreActivationStats { delta, x0 })
}

/// One mean-field layer update. See [`propagate_moments_traced`] for the
/// clamping diagnostics.
pub fn propagate_moments(
    weights: &LayerWeights,
    prev: &LayerMoments,
    rule: &QuadratureRule,
) -> Result<LayerMoments> {
    propagate_moments_traced(weights, prev, rule).map(|(m, _)| m)
}

/// One mean-field layer update, returning the propagated moments together
/// with clamping/degeneracy diagnostics.
pub fn propagate_moments_traced(
    weights: &LayerWeights,
    prev: &LayerMoments,
    rule: &QuadratureRule,
) -> Result<(LayerMoments, PropagationTrace)> {
    let stats = preactivation_stats(weights, prev)?;
    let n = stats.x0.len();
    let nodes = rule.nodes();
    let qweights = rule.weights();
    let order = rule.order();
    let mut trace = PropagationTrace::default();

    // Per-unit variances: error on genuinely negative, clip rounding noise.
    let mut sd = Vec::with_capacity(n);
    let mut deterministic = Vec::with_capacity(n);
    for i in 0..n {
        let mut v = stats.delta[(i, i)];
        if v < NEGATIVE_VARIANCE_TOL {
            return Err(Error::domain(format!(
                "pre-activation variance {v:.3e} at unit {i} is negative beyond tolerance"
            )));
        }
        if v < 0.0 {
            v = 0.0;
        }
        let is_det = v < DETERMINISTIC_VARIANCE;
        if is_det {
            trace.deterministic_units += 1;
        }
        deterministic.push(is_det);
        sd.push(math::sqrt(v));
    }

    // phi evaluated on each unit's shifted/scaled node grid; reused by the
    // mean, the diagonal, and the x-factor of every pairwise integral.
    let mut phi = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(order);
        for &t in nodes {
            row.push(math::tanh(sd[i] * t + stats.x0[i]));
        }
        phi.push(row);
    }

    let mut mean = DVector::<f64>::zeros(n);
    let mut cov = DMatrix::<f64>::zeros(n, n);

    for i in 0..n {
        if deterministic[i] {
            mean[i] = math::tanh(stats.x0[i]);
            continue;
        }
        let mut m = 0.0;
        let mut second = 0.0;
        for k in 0..order {
            let p = phi[i][k];
            m += qweights[k] * p;
            second += qweights[k] * p * p;
        }
        mean[i] = m;
        // Variance of a bounded variable; clip quadrature rounding.
        cov[(i, i)] = (second - m * m).max(0.0);
    }

    for i in 0..n {
        if deterministic[i] {
            continue;
        }
        for j in (i + 1)..n {
            if deterministic[j] {
                continue;
            }
            let mut psi = stats.delta[(i, j)] / (sd[i] * sd[j]);
            if psi.abs() > 1.0 {
                psi = psi.clamp(-1.0, 1.0);
                trace.psi_clamped += 1;
            }
            let spread = math::sqrt((1.0 - psi * psi).max(0.0));
            let mut corr = 0.0;
            if spread == 0.0 {
                // Perfectly (anti-)correlated pre-activations: 1-D integral.
                for k in 0..order {
                    let arg = sd[j] * psi * nodes[k] + stats.x0[j];
                    corr += qweights[k] * phi[i][k] * math::tanh(arg);
                }
            } else {
                let scale = sd[j] * spread;
                for k in 0..order {
                    let base = sd[j] * psi * nodes[k] + stats.x0[j];
                    let mut inner = 0.0;
                    for q in 0..order {
                        inner += qweights[q] * math::tanh(base + scale * nodes[q]);
                    }
                    corr += qweights[k] * phi[i][k] * inner;
                }
            }
            let c = corr - mean[i] * mean[j];
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }

    Ok((LayerMoments { mean, cov }, trace))
}

/// Propagate moments through a whole network, recording every layer
/// (the result has length `depth + 1` and starts with `input`).
pub fn propagate_chain(
    net: &[LayerWeights],
    input: &LayerMoments,
    rule: &QuadratureRule,
) -> Result<Vec<LayerMoments>> {
    propagate_chain_traced(net, input, rule).map(|(m, _)| m)
}

/// As [`propagate_chain`], also accumulating diagnostics over all layers.
pub fn propagate_chain_traced(
    net: &[LayerWeights],
    input: &LayerMoments,
    rule: &QuadratureRule,
) -> Result<(Vec<LayerMoments>, PropagationTrace)> {
    let mut layers = Vec::with_capacity(net.len() + 1);
    let mut trace = PropagationTrace::default();
    layers.push(input.clone());
    for weights in net {
        let (next, t) = propagate_moments_traced(weights, layers.last().expect("nonempty"), rule)?;
        trace.absorb(t);
        layers.push(next);
    }
    Ok((layers, trace))
}
