//! The generative-network pipeline: generate data from a random RBM, estimate
//! the input statistics two ways (message passing and sample moments), train
//! a DBN layer-wise with CD-1, propagate moments through the trained stack,
//! and compare theory against the empirical representations.

use deepcov_core::bethe::{diagonal_consistency_residual, solve};
use deepcov_core::meanfield::{propagate_moments, LayerMoments};
use deepcov_core::metrics::MetricsReport;
use deepcov_core::montecarlo::column_moments;
use deepcov_core::numerics::{gauss_hermite_rule, RngStream};
use deepcov_core::rbm::{
    gibbs_chain, hidden_mean_batch, sample_rbm, train_dbn, DbnTrainResult, GibbsConfig,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::DbnConfig;
use crate::error::Result;
use crate::formats::{
    write_dataset_csv, write_json, write_model_checkpoint, write_table, RunDir,
};

#[derive(Debug, Clone, Serialize)]
pub struct DbnLayerRow {
    pub layer: usize,
    pub dimensionality_theory: f64,
    pub dimensionality_empirical: f64,
    pub covariance_strength_theory: f64,
    pub covariance_strength_empirical: f64,
    pub n_sigma_theory: f64,
    pub n_sigma_empirical: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochRow {
    pub layer: usize,
    pub epoch: usize,
    pub learning_rate: f64,
    pub reconstruction_error: f64,
    pub dimensionality: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegressionRow {
    pub layer: usize,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScatterRow {
    pub i: usize,
    pub j: usize,
    pub theory: f64,
    pub empirical: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct InputEstimateReport {
    pub bethe_converged: bool,
    pub bethe_iterations: usize,
    pub bethe_residual: f64,
    pub bethe_raw_asymmetry: f64,
    pub bethe_diagonal_residual: f64,
    /// Regression of the empirical input covariance on the message-passing
    /// estimate (off-diagonal entries).
    pub input_regression: RegressionRow,
}

#[derive(Debug)]
pub struct DbnSummary {
    pub layer_rows: Vec<DbnLayerRow>,
    pub epoch_rows: Vec<EpochRow>,
    pub regressions: Vec<RegressionRow>,
    pub input_report: InputEstimateReport,
    pub training: DbnTrainResult,
    /// Theory moments per layer (index 0 = message-passing input estimate).
    pub theory_chain: Vec<LayerMoments>,
    /// Empirical moments per layer (index 0 = sample moments of the data).
    pub empirical_chain: Vec<LayerMoments>,
}

/// Draw `samples` visible configurations, chains distributed over threads.
/// Stream derivation matches `rbm::gibbs_generate` exactly, so the output is
/// identical to the sequential version.
pub fn gibbs_generate_parallel(
    model: &deepcov_core::rbm::RbmModel,
    samples: usize,
    config: &GibbsConfig,
    rng: &RngStream,
) -> Result<DMatrix<f64>> {
    let per_chain = config.samples_per_chain.max(1);
    let chains = samples.div_ceil(per_chain);
    let counts: Vec<usize> = (0..chains)
        .map(|c| per_chain.min(samples - c * per_chain))
        .collect();
    let blocks: Vec<DMatrix<f64>> = counts
        .par_iter()
        .enumerate()
        .map(|(c, &count)| {
            let mut chain_rng = rng.substream(c as u64);
            Ok(gibbs_chain(model, count, config, &mut chain_rng)?)
        })
        .collect::<Result<_>>()?;
    let mut out = DMatrix::<f64>::zeros(model.n_visible(), samples);
    let mut filled = 0;
    for block in blocks {
        out.columns_mut(filled, block.ncols()).copy_from(&block);
        filled += block.ncols();
    }
    Ok(out)
}

fn offdiag_scatter(theory: &LayerMoments, empirical: &LayerMoments) -> Vec<ScatterRow> {
    let n = theory.dim();
    let mut rows = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            rows.push(ScatterRow {
                i,
                j,
                theory: theory.cov()[(i, j)],
                empirical: empirical.cov()[(i, j)],
            });
        }
    }
    rows
}

fn regression_of(scatter: &[ScatterRow], layer: usize) -> RegressionRow {
    let x: Vec<f64> = scatter.iter().map(|s| s.theory).collect();
    let y: Vec<f64> = scatter.iter().map(|s| s.empirical).collect();
    let (slope, intercept, r_squared) = super::linear_regression(&x, &y);
    RegressionRow {
        layer,
        slope,
        intercept,
        r_squared,
        pairs: scatter.len(),
    }
}

pub fn run_dbn(config: &DbnConfig, dir: &RunDir) -> Result<DbnSummary> {
    let rule = gauss_hermite_rule(config.common.quad_order)?;
    let master = RngStream::new(config.common.seed, 0);

    // Data generation from the random RBM.
    let generator = sample_rbm(
        config.width,
        config.width,
        config.generator_weight_scale,
        config.generator_bias_variance,
        &mut master.substream(0),
    )?;
    let gibbs: GibbsConfig = (&config.gibbs).into();
    let data = gibbs_generate_parallel(&generator, config.samples, &gibbs, &master.substream(1))?;
    if config.dump_dataset {
        write_dataset_csv(&dir.path("dataset.csv"), &data)?;
    }

    // Input statistics: message passing on the generator vs sample moments.
    let outcome = solve(
        &generator,
        &(&config.solver).into(),
        &mut master.substream(2),
    )?;
    let input_theory = outcome.state.to_moments()?;
    let input_empirical = column_moments(&data)?;
    let input_scatter = offdiag_scatter(&input_theory, &input_empirical);
    let input_report = InputEstimateReport {
        bethe_converged: outcome.converged,
        bethe_iterations: outcome.iterations,
        bethe_residual: outcome.residual,
        bethe_raw_asymmetry: outcome.raw_asymmetry,
        bethe_diagonal_residual: diagonal_consistency_residual(&outcome.state),
        input_regression: regression_of(&input_scatter, 0),
    };

    // Layer-wise CD-1 training.
    let dim_rule = config.track_dimensionality.then_some(&rule);
    let training = train_dbn(
        &data,
        &config.hidden_sizes,
        &(&config.train).into(),
        dim_rule,
        &master.substream(3),
    )?;

    // Theory chain: input estimate propagated through the trained stack.
    // Empirical chain: the data's mean activities through the same stack.
    let mut theory_chain = vec![input_theory];
    let mut empirical_chain = vec![input_empirical];
    let mut current = data;
    for model in &training.models {
        let layer = model.as_feedforward_layer();
        let next_theory = propagate_moments(&layer, theory_chain.last().unwrap(), &rule)?;
        theory_chain.push(next_theory);
        current = hidden_mean_batch(model, &current)?;
        empirical_chain.push(column_moments(&current)?);
    }

    let mut layer_rows = Vec::new();
    let mut regressions = vec![input_report.input_regression.clone()];
    let comparisons = dir.subdir("comparisons")?;
    for (layer, (th, emp)) in theory_chain.iter().zip(&empirical_chain).enumerate() {
        let rt = MetricsReport::from_covariance(th.cov())?;
        let re = MetricsReport::from_covariance(emp.cov())?;
        layer_rows.push(DbnLayerRow {
            layer,
            dimensionality_theory: rt.dimensionality,
            dimensionality_empirical: re.dimensionality,
            covariance_strength_theory: rt.covariance_strength,
            covariance_strength_empirical: re.covariance_strength,
            n_sigma_theory: th.dim() as f64 * rt.covariance_strength,
            n_sigma_empirical: emp.dim() as f64 * re.covariance_strength,
        });
        let scatter = offdiag_scatter(th, emp);
        write_table(&comparisons.join(format!("offdiag_layer{layer}.csv")), &scatter)?;
        if layer > 0 {
            regressions.push(regression_of(&scatter, layer));
        }
    }

    let mut epoch_rows = Vec::new();
    for (idx, log) in training.logs.iter().enumerate() {
        for record in &log.epochs {
            epoch_rows.push(EpochRow {
                layer: idx + 1,
                epoch: record.epoch,
                learning_rate: record.learning_rate,
                reconstruction_error: record.reconstruction_error,
                dimensionality: record.dimensionality,
            });
        }
    }

    let models_dir = dir.subdir("models")?;
    write_model_checkpoint(&models_dir.join("generator"), &generator)?;
    for (idx, model) in training.models.iter().enumerate() {
        write_model_checkpoint(&models_dir.join(format!("layer{}", idx + 1)), model)?;
    }

    write_table(&dir.path("metrics.csv"), &layer_rows)?;
    write_table(&dir.path("reconstruction.csv"), &epoch_rows)?;
    write_table(&comparisons.join("regressions.csv"), &regressions)?;
    write_json(&dir.path("input_estimate.json"), &input_report)?;

    Ok(DbnSummary {
        layer_rows,
        epoch_rows,
        regressions,
        input_report,
        training,
        theory_chain,
        empirical_chain,
    })
}
