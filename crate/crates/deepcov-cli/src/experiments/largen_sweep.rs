//! Scalar order-parameter sweeps over `(g, sigma_b)` grids.

use deepcov_core::error::Error as CoreError;
use deepcov_core::largen::{dim_formulas, operating_point, LargeNRecursion};
use deepcov_core::numerics::gauss_hermite_rule;
use serde::Serialize;

use crate::config::LargenSweepConfig;
use crate::error::Result;
use crate::formats::{write_table, RunDir};

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub g: f64,
    pub sigma_b: f64,
    pub layer: usize,
    pub q: f64,
    pub k1: f64,
    pub k2: f64,
    pub sigma: f64,
    pub n_sigma: f64,
    pub d_tilde: f64,
    pub d_tilde_next: f64,
    pub additive_term: f64,
    pub chi2: f64,
    pub upsilon: f64,
    /// Operating point of the linearized map; empty when it diverges.
    pub n_sigma_star: Option<f64>,
    pub divergent: bool,
}

pub fn run_largen_sweep(config: &LargenSweepConfig, dir: &RunDir) -> Result<Vec<SweepRow>> {
    let rule = gauss_hermite_rule(config.common.quad_order)?;
    let n_sigma0 =
        config.width as f64 * config.offdiag_scale * config.offdiag_scale / 3.0;
    let mut rows = Vec::new();
    for &g in &config.g_values {
        for &sigma_b in &config.sigma_b_values {
            let star = match operating_point(g, sigma_b, &rule) {
                Ok(v) => Some(v),
                Err(CoreError::Divergence(_)) => None,
                Err(e) => return Err(e.into()),
            };
            let recursion = LargeNRecursion::new(g, sigma_b, config.width, rule.clone())?
                .with_smoothing(config.smoothing.into());
            let states = recursion.trajectory(n_sigma0, config.depth)?;
            for state in &states {
                let formulas = dim_formulas(state, config.width)?;
                rows.push(SweepRow {
                    g,
                    sigma_b,
                    layer: state.layer,
                    q: state.q,
                    k1: state.k1,
                    k2: state.k2,
                    sigma: state.sigma,
                    n_sigma: state.n_sigma(config.width),
                    d_tilde: state.d_tilde,
                    d_tilde_next: formulas.d_tilde_next,
                    additive_term: formulas.additive_term,
                    chi2: state.chi2,
                    upsilon: state.upsilon,
                    n_sigma_star: star,
                    divergent: star.is_none(),
                });
            }
        }
    }
    write_table(&dir.path("metrics.csv"), &rows)?;
    Ok(rows)
}
