//! Sampling oracle for deterministic networks.
//!
//! Correlated Gaussian inputs are drawn from the PSD projection of the input
//! covariance, pushed through the tanh layers sample by sample, and the
//! empirical moments are compared against the mean-field prediction.
//! Batches are stored one column per sample, so whole layers advance with a
//! single matrix product.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::ensembles::LayerWeights;
use crate::error::{Error, Result};
use crate::math;
use crate::meanfield::LayerMoments;
use crate::metrics;
use crate::numerics::{nearest_psd, RngStream};

/// Activities of `S` samples at one layer, one column per sample.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    data: DMatrix<f64>,
    layer: usize,
}

impl SampleBatch {
    pub fn new(data: DMatrix<f64>, layer: usize) -> Self {
        Self { data, layer }
    }

    /// Unit count `N`.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Sample count `S`.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }
}

fn cholesky_with_jitter(psd: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let n = psd.nrows();
    if let Some(chol) = Cholesky::new(psd.clone()) {
        return Ok(chol);
    }
    // PSD projections are routinely singular; nudge the diagonal, doubling
    // the jitter up to ten times before giving up.
    let mut jitter = 1e-12 * psd.trace() / n as f64;
    if jitter <= 0.0 {
        jitter = 1e-12;
    }
    for _ in 0..10 {
        let mut bumped = psd.clone();
        for i in 0..n {
            bumped[(i, i)] += jitter;
        }
        if let Some(chol) = Cholesky::new(bumped) {
            return Ok(chol);
        }
        jitter *= 2.0;
    }
    Err(Error::domain(
        "Cholesky factorization failed even with diagonal jitter",
    ))
}

/// Draw `S` zero-mean Gaussian vectors whose covariance is the PSD projection
/// of `cov` (the projection, not the raw matrix, is what the samples realize).
pub fn sample_inputs(cov: &DMatrix<f64>, samples: usize, rng: &mut RngStream) -> Result<SampleBatch> {
    if samples < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let projected = nearest_psd(cov)?;
    let chol = cholesky_with_jitter(&projected)?;
    let n = cov.nrows();
    let z = DMatrix::<f64>::from_fn(n, samples, |_, _| rng.normal());
    Ok(SampleBatch {
        data: chol.l() * z,
        layer: 0,
    })
}

/// Advance a batch through one layer: `h = tanh(w h_prev + b)` per sample.
pub fn simulate_step(weights: &LayerWeights, batch: &SampleBatch) -> Result<SampleBatch> {
    if weights.input_dim() != batch.dim() {
        return Err(Error::dims(format!(
            "layer expects width {}, batch has {}",
            weights.input_dim(),
            batch.dim()
        )));
    }
    let mut next = &weights.weights * &batch.data;
    for j in 0..next.ncols() {
        for i in 0..next.nrows() {
            next[(i, j)] = math::tanh(next[(i, j)] + weights.biases[i]);
        }
    }
    Ok(SampleBatch {
        data: next,
        layer: batch.layer + 1,
    })
}

/// Push a batch through the whole network, keeping every layer's samples.
/// Memory grows with depth; use [`moments_along_chain`] when only the
/// statistics are needed.
pub fn simulate_chain(net: &[LayerWeights], batch: &SampleBatch) -> Result<Vec<SampleBatch>> {
    let mut layers = Vec::with_capacity(net.len() + 1);
    layers.push(batch.clone());
    for weights in net {
        let next = simulate_step(weights, layers.last().expect("nonempty"))?;
        layers.push(next);
    }
    Ok(layers)
}

/// Empirical per-layer moments of a simulated chain, retaining only one live
/// batch at a time.
pub fn moments_along_chain(net: &[LayerWeights], batch: &SampleBatch) -> Result<Vec<LayerMoments>> {
    let mut moments = Vec::with_capacity(net.len() + 1);
    moments.push(empirical_moments(batch)?);
    let mut current = batch.clone();
    for weights in net {
        current = simulate_step(weights, &current)?;
        moments.push(empirical_moments(&current)?);
    }
    Ok(moments)
}

/// Sample mean and unbiased sample covariance (divisor `S - 1`).
pub fn empirical_moments(batch: &SampleBatch) -> Result<LayerMoments> {
    column_moments(&batch.data)
}

/// Sample mean and unbiased sample covariance of column-major samples.
pub fn column_moments(data: &DMatrix<f64>) -> Result<LayerMoments> {
    let s = data.ncols();
    if s < 2 {
        return Err(Error::invalid("need at least 2 samples for a covariance"));
    }
    let n = data.nrows();
    let mut mean = DVector::<f64>::zeros(n);
    for j in 0..s {
        mean += data.column(j);
    }
    mean /= s as f64;
    let mut centered = data.clone();
    for j in 0..s {
        let mut col = centered.column_mut(j);
        col -= &mean;
    }
    let cov_raw = (&centered * centered.transpose()) / (s - 1) as f64;
    let cov = 0.5 * (&cov_raw + cov_raw.transpose());
    LayerMoments::new(mean, cov)
}

/// Agreement between a mean-field prediction and empirical moments.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentComparison {
    /// Entrywise `empirical - theory` covariance differences.
    pub cov_diff: DMatrix<f64>,
    /// Root-mean-square difference over off-diagonal entries.
    pub rmse_offdiag: f64,
    /// Median Monte Carlo standard error over off-diagonal entries, from the
    /// Gaussian formula `sqrt((C_ii C_jj + C_ij^2) / S)` on the theory side.
    pub median_standard_error: f64,
    /// Participation-ratio dimensionality of the theory covariance.
    pub dimensionality_theory: f64,
    /// Participation-ratio dimensionality of the empirical covariance.
    pub dimensionality_empirical: f64,
}

/// Compare theoretical and empirical moments of one layer estimated from `S`
/// samples.
pub fn compare(theory: &LayerMoments, empirical: &LayerMoments, samples: usize) -> Result<MomentComparison> {
    if theory.dim() != empirical.dim() {
        return Err(Error::dims(format!(
            "theory width {} vs empirical width {}",
            theory.dim(),
            empirical.dim()
        )));
    }
    if samples < 2 {
        return Err(Error::invalid("need at least 2 samples"));
    }
    let n = theory.dim();
    let cov_diff = empirical.cov() - theory.cov();
    let mut sq_sum = 0.0;
    let mut ses = Vec::with_capacity(n * (n - 1) / 2);
    let tc = theory.cov();
    for i in 0..n {
        for j in (i + 1)..n {
            let d = cov_diff[(i, j)];
            sq_sum += d * d;
            let var = (tc[(i, i)] * tc[(j, j)] + tc[(i, j)] * tc[(i, j)]) / samples as f64;
            ses.push(math::sqrt(var.max(0.0)));
        }
    }
    let pairs = ses.len().max(1);
    let rmse_offdiag = math::sqrt(sq_sum / pairs as f64);
    ses.sort_by(f64::total_cmp);
    let median_standard_error = if ses.is_empty() {
        0.0
    } else if ses.len() % 2 == 1 {
        ses[ses.len() / 2]
    } else {
        0.5 * (ses[ses.len() / 2 - 1] + ses[ses.len() / 2])
    };
    let (dimensionality_theory, _) = metrics::dimensionality(theory.cov())?;
    let (dimensionality_empirical, _) = metrics::dimensionality(empirical.cov())?;
    Ok(MomentComparison {
        cov_diff,
        rmse_offdiag,
        median_standard_error,
        dimensionality_theory,
        dimensionality_empirical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use approx::assert_abs_diff_eq;

    #[test]
    fn sample_inputs_requires_two_samples() {
        let cov = DMatrix::<f64>::identity(3, 3);
        assert!(sample_inputs(&cov, 1, &mut RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn white_noise_covariance_is_recovered() {
        let n = 8;
        let s = 40_000;
        let cov = DMatrix::<f64>::identity(n, n);
        let batch = sample_inputs(&cov, s, &mut RngStream::new(2, 0)).unwrap();
        let moments = empirical_moments(&batch).unwrap();
        let se_diag = (2.0f64 / s as f64).sqrt();
        let se_off = (1.0f64 / s as f64).sqrt();
        for i in 0..n {
            assert!((moments.cov()[(i, i)] - 1.0).abs() < 3.0 * se_diag);
            for j in (i + 1)..n {
                assert!(moments.cov()[(i, j)].abs() < 3.0 * se_off);
            }
            assert!(moments.mean()[i].abs() < 3.0 * se_off);
        }
    }

    #[test]
    fn sampling_is_deterministic_per_stream() {
        let cov = DMatrix::<f64>::identity(4, 4);
        let a = sample_inputs(&cov, 16, &mut RngStream::new(9, 5)).unwrap();
        let b = sample_inputs(&cov, 16, &mut RngStream::new(9, 5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn singular_covariance_still_factorizes() {
        // Rank-deficient PSD matrix: ones on a 2x2 block.
        let mut cov = DMatrix::<f64>::zeros(3, 3);
        cov[(0, 0)] = 1.0;
        cov[(0, 1)] = 1.0;
        cov[(1, 0)] = 1.0;
        cov[(1, 1)] = 1.0;
        cov[(2, 2)] = 1.0;
        let batch = sample_inputs(&cov, 1000, &mut RngStream::new(4, 0)).unwrap();
        for j in 0..10 {
            assert_abs_diff_eq!(
                batch.data()[(0, j)],
                batch.data()[(1, j)],
                epsilon = 1e-5
            );
        }
    }

    #[test]
    fn zero_network_produces_zero_activities() {
        let w = LayerWeights::new(DMatrix::zeros(3, 3), DVector::zeros(3)).unwrap();
        let batch = SampleBatch::new(DMatrix::from_element(3, 5, 0.7), 0);
        let chain = simulate_chain(&[w.clone(), w], &batch).unwrap();
        assert_eq!(chain.len(), 3);
        for layer in &chain[1..] {
            assert!(layer.data().iter().all(|&h| h == 0.0));
        }
    }

    #[test]
    fn single_sample_matches_hand_computation() {
        let w = LayerWeights::new(
            DMatrix::from_row_slice(2, 2, &[0.5, -0.25, 1.0, 0.75]),
            DVector::from_vec(vec![0.1, -0.2]),
        )
        .unwrap();
        let batch = SampleBatch::new(DMatrix::from_column_slice(2, 1, &[0.3, -0.6]), 0);
        let out = simulate_step(&w, &batch).unwrap();
        let h0 = (0.5 * 0.3 + -0.25 * -0.6 + 0.1f64).tanh();
        let h1 = (1.0 * 0.3 + 0.75 * -0.6 + -0.2f64).tanh();
        assert_abs_diff_eq!(out.data()[(0, 0)], h0, epsilon = 1e-15);
        assert_abs_diff_eq!(out.data()[(1, 0)], h1, epsilon = 1e-15);
        assert!(out.data().iter().all(|&h| h.abs() < 1.0));
    }

    #[test]
    fn constant_batch_has_zero_covariance() {
        let batch = SampleBatch::new(DMatrix::from_element(3, 10, 0.4), 0);
        let m = empirical_moments(&batch).unwrap();
        assert!(m.cov().iter().all(|&c| c.abs() < 1e-15));
    }

    #[test]
    fn two_antithetic_samples_match_hand_formula() {
        let x = DVector::from_vec(vec![0.5, -0.2]);
        let mut data = DMatrix::<f64>::zeros(2, 2);
        data.column_mut(0).copy_from(&x);
        data.column_mut(1).copy_from(&(-&x));
        let m = empirical_moments(&SampleBatch::new(data, 0)).unwrap();
        // With S = 2, the unbiased covariance is 2 x x^T.
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(m.cov()[(i, j)], 2.0 * x[i] * x[j], epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn covariance_error_shrinks_like_inverse_sqrt_samples() {
        let n = 30;
        let mut rng_cov = RngStream::new(31, 0);
        let cfg = crate::ensembles::InputEnsembleConfig {
            width: n,
            offdiag_scale: 0.1,
        };
        let cov = crate::ensembles::sample_input_covariance(&cfg, &mut rng_cov).unwrap();
        let truth = nearest_psd(&cov).unwrap();
        let mut errs = Vec::new();
        for (k, &s) in [1_000usize, 10_000, 100_000].iter().enumerate() {
            let batch = sample_inputs(&cov, s, &mut RngStream::new(32, k as u64)).unwrap();
            let est = empirical_moments(&batch).unwrap();
            let err = (est.cov() - &truth).norm();
            errs.push(err);
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2]);
        let ratio = errs[0] / errs[2];
        assert!(
            ratio > 7.0 && ratio < 14.0,
            "expected ~10x shrink from 10^3 to 10^5 samples, got {ratio}"
        );
    }

    #[test]
    fn identical_moments_compare_to_zero_rmse() {
        let cov = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.4]);
        let m = LayerMoments::zero_mean(cov).unwrap();
        let cmp = compare(&m, &m, 100).unwrap();
        assert_eq!(cmp.rmse_offdiag, 0.0);
        assert!(cmp.median_standard_error > 0.0);
        assert_abs_diff_eq!(
            cmp.dimensionality_theory,
            cmp.dimensionality_empirical,
            epsilon = 1e-12
        );
    }
}
