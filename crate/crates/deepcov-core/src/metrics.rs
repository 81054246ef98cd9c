//! Observables of a layer's collective representation: participation-ratio
//! dimensionality, overall covariance strength, their trace identity, and
//! eigenvalue spectra with a Marchenko–Pastur reference.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::math;
use crate::numerics::{self, RngStream};

/// Eigenvalues with `|lambda| < EIG_CLIP_REL * lambda_max` are treated as zero
/// to stabilize `tr(C^2)` for near-singular spectra.
const EIG_CLIP_REL: f64 = 1e-12;

/// Number of equal-width histogram bins in a [`SpectrumReport`].
pub const SPECTRUM_BINS: usize = 40;

/// Summary observables of one covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Matrix size `N`.
    pub width: usize,
    /// Intrinsic dimensionality `D = (sum lambda)^2 / sum lambda^2`.
    pub dimensionality: f64,
    /// `D / N`.
    pub normalized_dimensionality: f64,
    /// Mean squared off-diagonal entry.
    pub covariance_strength: f64,
    /// `K1 = tr(C) / N`.
    pub mean_diagonal: f64,
    /// `K2 = (1/N) sum_i C_ii^2`.
    pub mean_squared_diagonal: f64,
}

impl MetricsReport {
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        let (d, d_tilde) = dimensionality(cov)?;
        let sigma = covariance_strength(cov)?;
        let k1 = cov.diagonal().sum() / n as f64;
        let k2 = cov.diagonal().iter().map(|&c| c * c).sum::<f64>() / n as f64;
        Ok(Self {
            width: n,
            dimensionality: d,
            normalized_dimensionality: d_tilde,
            covariance_strength: sigma,
            mean_diagonal: k1,
            mean_squared_diagonal: k2,
        })
    }
}

/// Intrinsic dimensionality `(D, D/N)` from the eigen-spectrum of `cov`.
///
/// The all-zero matrix has no defined dimensionality and is rejected.
pub fn dimensionality(cov: &DMatrix<f64>) -> Result<(f64, f64)> {
    let vals = numerics::sym_eigvals(cov)?;
    let lambda_max = vals.iter().fold(0.0f64, |m, &l| m.max(l.abs()));
    if lambda_max == 0.0 {
        return Err(Error::invalid(
            "dimensionality of the zero matrix is undefined",
        ));
    }
    let clip = EIG_CLIP_REL * lambda_max;
    let mut s1 = 0.0;
    let mut s2 = 0.0;
    for &l in &vals {
        let l = if l.abs() < clip { 0.0 } else { l };
        s1 += l;
        s2 += l * l;
    }
    let d = s1 * s1 / s2;
    Ok((d, d / vals.len() as f64))
}

/// Intrinsic dimensionality computed from traces only: `tr(C)^2 / tr(C^2)`
/// with `tr(C^2) = sum_ij C_ij^2`. Independent of the eigensolver route.
pub fn dimensionality_from_traces(cov: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !cov.is_square() {
        return Err(Error::invalid("covariance must be square"));
    }
    let trace: f64 = cov.diagonal().sum();
    let trace_sq: f64 = cov.iter().map(|&c| c * c).sum();
    if trace_sq == 0.0 {
        return Err(Error::invalid(
            "dimensionality of the zero matrix is undefined",
        ));
    }
    let d = trace * trace / trace_sq;
    Ok((d, d / cov.nrows() as f64))
}

/// Overall covariance strength `Sigma = 2/(N(N-1)) * sum_{i<j} C_ij^2`.
pub fn covariance_strength(cov: &DMatrix<f64>) -> Result<f64> {
    let n = cov.nrows();
    if !cov.is_square() || n < 2 {
        return Err(Error::invalid(format!(
            "covariance strength needs a square matrix with N >= 2, got {}x{}",
            cov.nrows(),
            cov.ncols()
        )));
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            sum += cov[(i, j)] * cov[(i, j)];
        }
    }
    Ok(2.0 * sum / (n as f64 * (n - 1) as f64))
}

/// Covariance strength recovered from the dimensionality route,
/// `Sigma = [K1^2 / Dtilde - K2] / (N - 1)`, using the eigen-spectrum for
/// `Dtilde`. Agrees with [`covariance_strength`] through the trace identities.
pub fn sigma_dim_identity(cov: &DMatrix<f64>) -> Result<f64> {
    let n = cov.nrows();
    if n < 2 {
        return Err(Error::invalid("need N >= 2"));
    }
    let (_, d_tilde) = dimensionality(cov)?;
    let k1 = cov.diagonal().sum() / n as f64;
    let k2 = cov.diagonal().iter().map(|&c| c * c).sum::<f64>() / n as f64;
    Ok((k1 * k1 / d_tilde - k2) / (n - 1) as f64)
}

/// Marchenko–Pastur density for the `P = N` Wishart ensemble with entry
/// variance `variance`: support `(0, 4*variance]`, zero outside.
pub fn mp_density(variance: f64, lambda: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::invalid(format!(
            "MP variance must be positive, got {variance}"
        )));
    }
    let upper = 4.0 * variance;
    if lambda <= 0.0 || lambda > upper {
        return Ok(0.0);
    }
    Ok(math::sqrt(lambda * (upper - lambda)) / (2.0 * core::f64::consts::PI * lambda * variance))
}

/// Exact Marchenko–Pastur probability mass on `[a, b]` for the `P = N`
/// ensemble. Uses the substitution `lambda = u^2`, which removes the
/// inverse-square-root edge singularity and yields a closed form.
pub fn mp_mass(variance: f64, a: f64, b: f64) -> Result<f64> {
    if !(variance > 0.0) {
        return Err(Error::invalid("MP variance must be positive"));
    }
    let upper = 4.0 * variance;
    let lo = a.clamp(0.0, upper);
    let hi = b.clamp(0.0, upper);
    if hi <= lo {
        return Ok(0.0);
    }
    // With r = sqrt(lambda / lambda_plus), the mass integrand becomes
    // (2 lambda_plus / (pi lambda_plus)) * ... ; working in the exact ratio
    // keeps asin well-conditioned at the upper edge.
    let antiderivative = |fraction: f64| {
        let r = math::sqrt(fraction.clamp(0.0, 1.0));
        r * math::sqrt((1.0 - r * r).max(0.0)) + math::asin(r)
    };
    let scale = upper / (2.0 * core::f64::consts::PI * variance);
    let val = scale * (antiderivative(hi / upper) - antiderivative(lo / upper));
    Ok(val.max(0.0))
}

/// Eigenvalue spectrum with a binned density and a fitted MP reference.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    /// Eigenvalues in descending order (tiny negatives clipped to zero).
    pub eigenvalues: Vec<f64>,
    /// `SPECTRUM_BINS + 1` edges of equal-width bins over `[0, lambda_max]`.
    pub bin_edges: Vec<f64>,
    /// Per-bin densities; they integrate to one over the binned range.
    pub densities: Vec<f64>,
    /// MP variance fitted from the spectrum range: `lambda_max / 4`.
    pub mp_variance: f64,
    /// Lower edge of the MP support (always zero at `P = N`).
    pub mp_lambda_minus: f64,
    /// Upper edge of the MP support, `4 * mp_variance`.
    pub mp_lambda_plus: f64,
}

impl SpectrumReport {
    /// Bin a spectrum into [`SPECTRUM_BINS`] equal-width bins over
    /// `[0, lambda_max]` and fit the MP variance from the range.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("empty spectrum"));
        }
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let lambda_max = eigenvalues[0];
        if !(lambda_max > 0.0) {
            return Err(Error::invalid(
                "spectrum must contain a positive eigenvalue",
            ));
        }
        let clip = EIG_CLIP_REL * lambda_max;
        for l in eigenvalues.iter_mut() {
            if l.abs() < clip {
                *l = 0.0;
            }
            if *l < 0.0 && *l > -1e-8 * lambda_max {
                *l = 0.0;
            }
        }
        let width = lambda_max / SPECTRUM_BINS as f64;
        let mut counts = [0usize; SPECTRUM_BINS];
        for &l in &eigenvalues {
            if l < 0.0 {
                return Err(Error::domain(format!(
                    "eigenvalue {l} is negative beyond tolerance"
                )));
            }
            let idx = ((l / width) as usize).min(SPECTRUM_BINS - 1);
            counts[idx] += 1;
        }
        let total = eigenvalues.len() as f64;
        let densities = counts.iter().map(|&c| c as f64 / (total * width)).collect();
        let bin_edges = (0..=SPECTRUM_BINS).map(|k| k as f64 * width).collect();
        let mp_variance = lambda_max / 4.0;
        Ok(Self {
            eigenvalues,
            bin_edges,
            densities,
            mp_variance,
            mp_lambda_minus: 0.0,
            mp_lambda_plus: lambda_max,
        })
    }

    /// Spectrum of a covariance matrix.
    pub fn from_covariance(cov: &DMatrix<f64>) -> Result<Self> {
        Self::from_eigenvalues(numerics::sym_eigvals(cov)?)
    }

    /// Empirical probability mass per bin.
    pub fn bin_masses(&self) -> Vec<f64> {
        let width = self.bin_edges[1] - self.bin_edges[0];
        self.densities.iter().map(|&d| d * width).collect()
    }

    /// Total-variation distance between the binned spectrum and the fitted MP
    /// law, `0.5 * sum_bins |empirical mass - MP mass|`.
    pub fn total_variation_vs_mp(&self) -> Result<f64> {
        let mut tv = 0.0;
        for (k, mass) in self.bin_masses().iter().enumerate() {
            let mp = mp_mass(self.mp_variance, self.bin_edges[k], self.bin_edges[k + 1])?;
            tv += (mass - mp).abs();
        }
        Ok(0.5 * tv)
    }

    /// Empirical probability mass on `[a, b]`.
    pub fn empirical_mass(&self, a: f64, b: f64) -> f64 {
        let total = self.eigenvalues.len() as f64;
        self.eigenvalues
            .iter()
            .filter(|&&l| l >= a && l <= b)
            .count() as f64
            / total
    }
}

/// Spectrum of a `P = N`-style Wishart sample covariance `xi xi^T / N` with
/// `xi` an `n x p` matrix of i.i.d. `N(0, variance)` entries.
pub fn wishart_reference(
    n: usize,
    p: usize,
    variance: f64,
    rng: &mut RngStream,
) -> Result<SpectrumReport> {
    if n == 0 || p == 0 {
        return Err(Error::invalid("Wishart dimensions must be at least 1"));
    }
    if !(variance > 0.0) {
        return Err(Error::invalid("Wishart entry variance must be positive"));
    }
    let sd = math::sqrt(variance);
    let xi = DMatrix::<f64>::from_fn(n, p, |_, _| sd * rng.normal());
    let w = (&xi * xi.transpose()) / n as f64;
    SpectrumReport::from_covariance(&w)
}
