//! Eigenvalue spectra of propagated covariances and the Wishart reference,
//! with Marchenko–Pastur overlays and directional comparisons.

use deepcov_core::ensembles::{
    sample_deep_net, sample_input_covariance, DeepNetConfig, InputEnsembleConfig,
};
use deepcov_core::meanfield::{propagate_chain, LayerMoments};
use deepcov_core::metrics::{mp_density, mp_mass, wishart_reference, SpectrumReport};
use deepcov_core::numerics::{gauss_hermite_rule, sym_eigvals, RngStream};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{SpectrumConfig, SpectrumSource};
use crate::error::Result;
use crate::formats::{write_json, write_table, RunDir};

#[derive(Debug, Clone, Serialize)]
pub struct EigenvalueRow {
    pub instance: usize,
    pub index: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub density: f64,
    pub mp_density_mid: f64,
    pub empirical_mass: f64,
    pub mp_mass: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub instances: usize,
    pub pooled_count: usize,
    pub lambda_max: f64,
    pub mp_variance: f64,
    pub total_variation_vs_mp: f64,
    /// Empirical minus MP probability mass on `[0, 0.1 * lambda_plus]`.
    pub near_zero_excess: f64,
    /// MP minus empirical probability mass on `[0.75 * lambda_plus, lambda_plus]`.
    pub tail_deficit: f64,
    /// Excess kurtosis of the pooled eigenvalues (positive flags a long tail
    /// over a Gaussian-like bulk).
    pub excess_kurtosis: f64,
}

fn excess_kurtosis(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let m2 = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let m4 = values.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

fn summarize(
    pooled: Vec<f64>,
    per_instance: Vec<Vec<f64>>,
    dir: &RunDir,
) -> Result<(SpectrumSummary, SpectrumReport)> {
    let report = SpectrumReport::from_eigenvalues(pooled)?;
    let spectra = dir.subdir("spectra")?;

    let mut eig_rows = Vec::new();
    for (instance, vals) in per_instance.iter().enumerate() {
        for (index, &lambda) in vals.iter().enumerate() {
            eig_rows.push(EigenvalueRow {
                instance,
                index,
                lambda,
            });
        }
    }
    write_table(&spectra.join("eigenvalues.csv"), &eig_rows)?;

    let masses = report.bin_masses();
    let mut hist_rows = Vec::new();
    for k in 0..report.densities.len() {
        let lo = report.bin_edges[k];
        let hi = report.bin_edges[k + 1];
        hist_rows.push(HistogramRow {
            bin_lo: lo,
            bin_hi: hi,
            density: report.densities[k],
            mp_density_mid: mp_density(report.mp_variance, 0.5 * (lo + hi))?,
            empirical_mass: masses[k],
            mp_mass: mp_mass(report.mp_variance, lo, hi)?,
        });
    }
    write_table(&spectra.join("histogram.csv"), &hist_rows)?;

    let lambda_plus = report.mp_lambda_plus;
    let near_zero_excess = report.empirical_mass(0.0, 0.1 * lambda_plus)
        - mp_mass(report.mp_variance, 0.0, 0.1 * lambda_plus)?;
    let tail_deficit = mp_mass(report.mp_variance, 0.75 * lambda_plus, lambda_plus)?
        - report.empirical_mass(0.75 * lambda_plus, lambda_plus);
    let summary = SpectrumSummary {
        instances: per_instance.len(),
        pooled_count: report.eigenvalues.len(),
        lambda_max: report.eigenvalues[0],
        mp_variance: report.mp_variance,
        total_variation_vs_mp: report.total_variation_vs_mp()?,
        near_zero_excess,
        tail_deficit,
        excess_kurtosis: excess_kurtosis(&report.eigenvalues),
    };
    write_json(&dir.path("summary.json"), &summary)?;
    Ok((summary, report))
}

pub fn run_spectrum(config: &SpectrumConfig, dir: &RunDir) -> Result<SpectrumSummary> {
    match &config.source {
        SpectrumSource::Wishart {
            n,
            p,
            variance,
            instances,
        } => {
            let per_instance: Vec<Vec<f64>> = (0..*instances)
                .into_par_iter()
                .map(|k| {
                    let mut rng = RngStream::new(config.common.seed, 0).substream(k as u64);
                    Ok(wishart_reference(*n, *p, *variance, &mut rng)?.eigenvalues)
                })
                .collect::<Result<_>>()?;
            let pooled = per_instance.concat();
            let (summary, _) = summarize(pooled, per_instance, dir)?;
            Ok(summary)
        }
        SpectrumSource::RandomNet {
            width,
            depth,
            weight_scale,
            bias_variance,
            offdiag_scale,
            instances,
            layer,
        } => {
            let rule = gauss_hermite_rule(config.common.quad_order)?;
            let target_layer = layer.unwrap_or(*depth).min(*depth);
            let per_instance: Vec<Vec<f64>> = (0..*instances)
                .into_par_iter()
                .map(|k| {
                    let master = RngStream::new(config.common.seed, 0).substream(k as u64);
                    let net = sample_deep_net(
                        &DeepNetConfig {
                            width: *width,
                            depth: *depth,
                            weight_scale: *weight_scale,
                            bias_variance: *bias_variance,
                        },
                        &mut master.substream(0),
                    )?;
                    let cov0 = sample_input_covariance(
                        &InputEnsembleConfig {
                            width: *width,
                            offdiag_scale: *offdiag_scale,
                        },
                        &mut master.substream(1),
                    )?;
                    let chain =
                        propagate_chain(&net, &LayerMoments::zero_mean(cov0)?, &rule)?;
                    Ok(sym_eigvals(chain[target_layer].cov())?)
                })
                .collect::<Result<_>>()?;
            let pooled = per_instance.concat();
            let (summary, _) = summarize(pooled, per_instance, dir)?;
            Ok(summary)
        }
    }
}
