//! Random deterministic networks: sample, propagate, measure, and optionally
//! verify against Monte Carlo per realization.

use deepcov_core::ensembles::{
    sample_deep_net, sample_input_covariance, DeepNetConfig, InputEnsembleConfig,
};
use deepcov_core::meanfield::{propagate_chain, LayerMoments};
use deepcov_core::metrics::MetricsReport;
use deepcov_core::montecarlo::{compare, moments_along_chain, sample_inputs};
use deepcov_core::numerics::{gauss_hermite_rule, RngStream};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RandomNetConfig;
use crate::error::Result;
use crate::formats::{write_moments_csv, write_table, RunDir};

#[derive(Debug, Clone, Serialize)]
pub struct LayerMetricsRow {
    pub realization: usize,
    pub layer: usize,
    pub dimensionality: f64,
    pub normalized_dimensionality: f64,
    pub covariance_strength: f64,
    pub n_sigma: f64,
    pub mean_diagonal: f64,
    pub mean_squared_diagonal: f64,
}

#[derive(Debug)]
pub struct RandomNetSummary {
    pub rows: Vec<LayerMetricsRow>,
    /// Per realization, per layer (1..=depth): Monte Carlo comparison rows
    /// when `mc_samples` was set.
    pub comparisons: Vec<super::ComparisonRow>,
    /// Propagated chains, one per realization.
    pub chains: Vec<Vec<LayerMoments>>,
}

struct Realization {
    rows: Vec<LayerMetricsRow>,
    comparisons: Vec<super::ComparisonRow>,
    chain: Vec<LayerMoments>,
}

fn run_one(config: &RandomNetConfig, realization: usize) -> Result<Realization> {
    let rule = gauss_hermite_rule(config.common.quad_order)?;
    let master = RngStream::new(config.common.seed, 0).substream(realization as u64);
    let net = sample_deep_net(
        &DeepNetConfig {
            width: config.width,
            depth: config.depth,
            weight_scale: config.weight_scale,
            bias_variance: config.bias_variance,
        },
        &mut master.substream(0),
    )?;
    let cov0 = sample_input_covariance(
        &InputEnsembleConfig {
            width: config.width,
            offdiag_scale: config.offdiag_scale,
        },
        &mut master.substream(1),
    )?;
    let input = LayerMoments::zero_mean(cov0)?;
    let chain = propagate_chain(&net, &input, &rule)?;

    let mut rows = Vec::with_capacity(chain.len());
    for (layer, moments) in chain.iter().enumerate() {
        let report = MetricsReport::from_covariance(moments.cov())?;
        rows.push(LayerMetricsRow {
            realization,
            layer,
            dimensionality: report.dimensionality,
            normalized_dimensionality: report.normalized_dimensionality,
            covariance_strength: report.covariance_strength,
            n_sigma: config.width as f64 * report.covariance_strength,
            mean_diagonal: report.mean_diagonal,
            mean_squared_diagonal: report.mean_squared_diagonal,
        });
    }

    let mut comparisons = Vec::new();
    if let Some(samples) = config.mc_samples {
        let batch = sample_inputs(chain[0].cov(), samples, &mut master.substream(2))?;
        let empirical = moments_along_chain(&net, &batch)?;
        for (layer, (th, emp)) in chain.iter().zip(&empirical).enumerate().skip(1) {
            let cmp = compare(th, emp, samples)?;
            comparisons.push(super::ComparisonRow::from_comparison(
                realization,
                layer,
                &cmp,
            ));
        }
    }
    Ok(Realization {
        rows,
        comparisons,
        chain,
    })
}

pub fn run_random_net(config: &RandomNetConfig, dir: &RunDir) -> Result<RandomNetSummary> {
    let results: Vec<Realization> = (0..config.realizations)
        .into_par_iter()
        .map(|r| run_one(config, r))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    let mut comparisons = Vec::new();
    let mut chains = Vec::new();
    for mut res in results {
        rows.append(&mut res.rows);
        comparisons.append(&mut res.comparisons);
        chains.push(res.chain);
    }
    write_table(&dir.path("metrics.csv"), &rows)?;
    if !comparisons.is_empty() {
        let cmp_dir = dir.subdir("comparisons")?;
        write_table(&cmp_dir.join("mc_agreement.csv"), &comparisons)?;
    }
    if config.dump_moments {
        let mdir = dir.subdir("moments")?;
        for (layer, moments) in chains[0].iter().enumerate() {
            write_moments_csv(&mdir, &format!("layer{layer}"), moments)?;
        }
    }
    Ok(RandomNetSummary {
        rows,
        comparisons,
        chains,
    })
}
