//! Random network and input ensembles.
//!
//! Weights of a width-`N` layer are i.i.d. `N(0, g/N)`, biases are
//! `N(0, sigma_b)` (`sigma_b` is a variance). Inputs are zero-mean Gaussians
//! with unit variance and pairwise covariance `r_ij / sqrt(N)`, `r_ij` uniform
//! on `[-rho, rho]`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math;
use crate::numerics::RngStream;

/// Hyperparameters of a deterministic deep network with tanh units.
#[derive(Debug, Clone, PartialEq)]
pub struct DeepNetConfig {
    /// Layer width `N` (equal across layers).
    pub width: usize,
    /// Number of hidden layers `d`.
    pub depth: usize,
    /// Weight-variance scale `g`: entries are `N(0, g/N)`.
    pub weight_scale: f64,
    /// Bias variance `sigma_b`: entries are `N(0, sigma_b)`.
    pub bias_variance: f64,
}

impl DeepNetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 {
            return Err(Error::invalid("network width must be at least 2"));
        }
        if self.depth < 1 {
            return Err(Error::invalid("network depth must be at least 1"));
        }
        if !(self.weight_scale > 0.0) {
            return Err(Error::invalid(format!(
                "weight scale g must be positive, got {}",
                self.weight_scale
            )));
        }
        if !(self.bias_variance >= 0.0) {
            return Err(Error::invalid(format!(
                "bias variance must be nonnegative, got {}",
                self.bias_variance
            )));
        }
        Ok(())
    }
}

/// One layer's parameters. Row `i` of the weight matrix holds the incoming
/// connections of unit `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub weights: DMatrix<f64>,
    pub biases: DVector<f64>,
}

impl LayerWeights {
    pub fn new(weights: DMatrix<f64>, biases: DVector<f64>) -> Result<Self> {
        if weights.nrows() != biases.len() {
            return Err(Error::dims(format!(
                "weight rows {} vs bias length {}",
                weights.nrows(),
                biases.len()
            )));
        }
        Ok(Self { weights, biases })
    }

    /// Output width of the layer.
    pub fn output_dim(&self) -> usize {
        self.weights.nrows()
    }

    /// Input width of the layer.
    pub fn input_dim(&self) -> usize {
        self.weights.ncols()
    }
}

/// Correlated Gaussian input ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct InputEnsembleConfig {
    /// Input width `N`.
    pub width: usize,
    /// Off-diagonal amplitude expressed as `rho / sqrt(N)`, so covariances are
    /// uniform on `[-offdiag_scale, offdiag_scale]` regardless of width.
    pub offdiag_scale: f64,
}

impl InputEnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.width < 2 {
            return Err(Error::invalid("input width must be at least 2"));
        }
        if !(self.offdiag_scale >= 0.0) {
            return Err(Error::invalid(format!(
                "off-diagonal scale must be nonnegative, got {}",
                self.offdiag_scale
            )));
        }
        Ok(())
    }

    /// Expected mean squared off-diagonal covariance of the ensemble,
    /// `E[(r/sqrt(N))^2] = offdiag_scale^2 / 3` for uniform `r`.
    pub fn expected_sigma(&self) -> f64 {
        self.offdiag_scale * self.offdiag_scale / 3.0
    }
}

/// Draw all layers of a random deep network.
pub fn sample_deep_net(config: &DeepNetConfig, rng: &mut RngStream) -> Result<Vec<LayerWeights>> {
    config.validate()?;
    let n = config.width;
    let w_sd = math::sqrt(config.weight_scale / n as f64);
    let b_sd = math::sqrt(config.bias_variance);
    let mut layers = Vec::with_capacity(config.depth);
    for _ in 0..config.depth {
        let weights = DMatrix::from_fn(n, n, |_, _| w_sd * rng.normal());
        let biases = DVector::from_fn(n, |_, _| b_sd * rng.normal());
        layers.push(LayerWeights { weights, biases });
    }
    Ok(layers)
}

/// Draw one input covariance matrix: unit diagonal, off-diagonals uniform on
/// `[-offdiag_scale, offdiag_scale]`, exactly symmetric by construction.
pub fn sample_input_covariance(
    config: &InputEnsembleConfig,
    rng: &mut RngStream,
) -> Result<DMatrix<f64>> {
    config.validate()?;
    let n = config.width;
    let amp = config.offdiag_scale;
    let mut cov = DMatrix::<f64>::identity(n, n);
    for i in 0..n {
        for j in (i + 1)..n {
            let r = rng.uniform(-amp, amp);
            cov[(i, j)] = r;
            cov[(j, i)] = r;
        }
    }
    Ok(cov)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(width: usize, g: f64, sigma_b: f64) -> DeepNetConfig {
        DeepNetConfig {
            width,
            depth: 2,
            weight_scale: g,
            bias_variance: sigma_b,
        }
    }

    #[test]
    fn invalid_configs_are_rejected() {
        assert!(config(1, 0.8, 0.1).validate().is_err());
        assert!(config(10, 0.0, 0.1).validate().is_err());
        assert!(config(10, 0.8, -0.1).validate().is_err());
        let bad_depth = DeepNetConfig {
            depth: 0,
            ..config(10, 0.8, 0.1)
        };
        assert!(bad_depth.validate().is_err());
    }

    #[test]
    fn degenerate_weight_scale_gives_zero_weights() {
        let mut rng = RngStream::new(1, 0);
        let net = sample_deep_net(&config(8, 1e-300, 0.0), &mut rng).unwrap();
        for layer in &net {
            assert!(layer.weights.iter().all(|&w| w.abs() < 1e-140));
            assert!(layer.biases.iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn weight_variance_matches_g_over_n() {
        let mut rng = RngStream::new(2, 0);
        let net = sample_deep_net(&config(200, 0.8, 0.1), &mut rng).unwrap();
        let w = &net[0].weights;
        let count = (w.nrows() * w.ncols()) as f64;
        let mean: f64 = w.iter().sum::<f64>() / count;
        let var: f64 = w.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / count;
        let target = 0.8 / 200.0;
        assert!(
            (var - target).abs() < 0.1 * target,
            "empirical variance {var}, expected {target}"
        );
    }

    #[test]
    fn sampling_is_deterministic_in_the_stream() {
        let net_a = sample_deep_net(&config(16, 0.8, 0.1), &mut RngStream::new(5, 9)).unwrap();
        let net_b = sample_deep_net(&config(16, 0.8, 0.1), &mut RngStream::new(5, 9)).unwrap();
        assert_eq!(net_a, net_b);
    }

    #[test]
    fn zero_amplitude_covariance_is_identity() {
        let cfg = InputEnsembleConfig {
            width: 12,
            offdiag_scale: 0.0,
        };
        let cov = sample_input_covariance(&cfg, &mut RngStream::new(3, 0)).unwrap();
        assert_eq!(cov, DMatrix::identity(12, 12));
    }

    #[test]
    fn offdiagonals_stay_in_band_and_symmetric() {
        let cfg = InputEnsembleConfig {
            width: 100,
            offdiag_scale: 0.05,
        };
        let cov = sample_input_covariance(&cfg, &mut RngStream::new(4, 0)).unwrap();
        for i in 0..100 {
            assert_eq!(cov[(i, i)], 1.0);
            for j in 0..100 {
                assert_eq!(cov[(i, j)], cov[(j, i)]);
                if i != j {
                    assert!(cov[(i, j)].abs() <= 0.05);
                }
            }
        }
    }

    #[test]
    fn offdiagonal_mean_is_consistent_with_uniform_law() {
        let cfg = InputEnsembleConfig {
            width: 120,
            offdiag_scale: 0.05,
        };
        let cov = sample_input_covariance(&cfg, &mut RngStream::new(6, 1)).unwrap();
        let mut sum = 0.0;
        let mut count = 0usize;
        for i in 0..cfg.width {
            for j in (i + 1)..cfg.width {
                sum += cov[(i, j)];
                count += 1;
            }
        }
        let mean = sum / count as f64;
        // Standard error of the mean of U[-a, a] over `count` pairs.
        let se = cfg.offdiag_scale / (3.0f64).sqrt() / (count as f64).sqrt();
        assert!(mean.abs() < 3.0 * se, "mean {mean}, 3se {}", 3.0 * se);
    }
}
