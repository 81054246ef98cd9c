//! Dedicated Monte Carlo verification of the mean-field propagation.

use deepcov_core::montecarlo::MomentComparison;
use serde::Serialize;

use crate::config::{McVerifyConfig, RandomNetConfig};
use crate::error::Result;
use crate::formats::{write_json, write_table, RunDir};

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonRow {
    pub realization: usize,
    pub layer: usize,
    pub rmse_offdiag: f64,
    pub median_standard_error: f64,
    pub rmse_over_se: f64,
    pub max_abs_diff: f64,
    pub dimensionality_theory: f64,
    pub dimensionality_empirical: f64,
    pub dimensionality_rel_diff: f64,
}

impl ComparisonRow {
    pub fn from_comparison(realization: usize, layer: usize, cmp: &MomentComparison) -> Self {
        let max_abs_diff = cmp.cov_diff.abs().max();
        Self {
            realization,
            layer,
            rmse_offdiag: cmp.rmse_offdiag,
            median_standard_error: cmp.median_standard_error,
            rmse_over_se: cmp.rmse_offdiag / cmp.median_standard_error,
            max_abs_diff,
            dimensionality_theory: cmp.dimensionality_theory,
            dimensionality_empirical: cmp.dimensionality_empirical,
            dimensionality_rel_diff: (cmp.dimensionality_theory - cmp.dimensionality_empirical)
                .abs()
                / cmp.dimensionality_theory,
        }
    }
}

pub fn run_mc_verify(config: &McVerifyConfig, dir: &RunDir) -> Result<Vec<ComparisonRow>> {
    let as_random_net = RandomNetConfig {
        common: config.common.clone(),
        width: config.width,
        depth: config.depth,
        weight_scale: config.weight_scale,
        bias_variance: config.bias_variance,
        offdiag_scale: config.offdiag_scale,
        realizations: config.realizations,
        mc_samples: Some(config.samples),
        dump_moments: false,
    };
    let summary = super::run_random_net(&as_random_net, dir)?;
    write_table(&dir.path("metrics.csv"), &summary.rows)?;
    write_json(&dir.path("comparison_summary.json"), &summary.comparisons)?;
    Ok(summary.comparisons)
}
