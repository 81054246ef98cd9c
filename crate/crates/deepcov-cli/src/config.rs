//! Run configuration: one JSON document per run, with CLI flags overriding
//! document fields. The resolved config is echoed verbatim into the run
//! manifest so every output directory is self-describing.

use std::path::PathBuf;

use deepcov_core::bethe::SolverConfig;
use deepcov_core::largen::ActivitySmoothing;
use deepcov_core::numerics::DEFAULT_QUAD_ORDER;
use deepcov_core::rbm::{GibbsConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

fn default_quad_order() -> usize {
    DEFAULT_QUAD_ORDER
}

fn default_out() -> PathBuf {
    PathBuf::from("run-out")
}

fn default_realizations() -> usize {
    10
}

fn default_samples() -> usize {
    100_000
}

const fn default_true() -> bool {
    true
}

/// Fields shared by every experiment kind.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CommonConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RandomNetConfig {
    #[serde(flatten)]
    pub common: CommonConfig,
    pub width: usize,
    pub depth: usize,
    pub weight_scale: f64,
    pub bias_variance: f64,
    /// Off-diagonal covariance amplitude as the width-independent ratio
    /// `rho / sqrt(N)`.
    pub offdiag_scale: f64,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
    /// When set, verify each realization against Monte Carlo with this many
    /// samples per layer.
    #[serde(default)]
    pub mc_samples: Option<usize>,
    /// Dump per-layer mean/covariance CSVs for the first realization.
    #[serde(default)]
    pub dump_moments: bool,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum SmoothingChoice {
    Bare,
    Smoothed,
}

impl From<SmoothingChoice> for ActivitySmoothing {
    fn from(s: SmoothingChoice) -> Self {
        match s {
            SmoothingChoice::Bare => ActivitySmoothing::Bare,
            SmoothingChoice::Smoothed => ActivitySmoothing::Smoothed,
        }
    }
}

fn default_smoothing() -> SmoothingChoice {
    SmoothingChoice::Smoothed
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LargenSweepConfig {
    #[serde(flatten)]
    pub common: CommonConfig,
    pub g_values: Vec<f64>,
    pub sigma_b_values: Vec<f64>,
    pub width: usize,
    pub depth: usize,
    /// Same input parametrization as the random-net experiment; the starting
    /// covariance strength is `N * offdiag_scale^2 / 3`.
    pub offdiag_scale: f64,
    #[serde(default = "default_smoothing")]
    pub smoothing: SmoothingChoice,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainParams {
    pub eta0: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub cd_steps: usize,
    pub patience: usize,
    pub min_improvement: f64,
    pub snapshot_interval: Option<usize>,
    pub init_weight_sd: f64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainConfig::default().into()
    }
}

impl From<TrainConfig> for TrainParams {
    fn from(c: TrainConfig) -> Self {
        Self {
            eta0: c.eta0,
            weight_decay: c.weight_decay,
            batch_size: c.batch_size,
            max_epochs: c.max_epochs,
            cd_steps: c.cd_steps,
            patience: c.patience,
            min_improvement: c.min_improvement,
            snapshot_interval: c.snapshot_interval,
            init_weight_sd: c.init_weight_sd,
        }
    }
}

impl From<&TrainParams> for TrainConfig {
    fn from(p: &TrainParams) -> Self {
        TrainConfig {
            eta0: p.eta0,
            weight_decay: p.weight_decay,
            batch_size: p.batch_size,
            max_epochs: p.max_epochs,
            cd_steps: p.cd_steps,
            patience: p.patience,
            min_improvement: p.min_improvement,
            snapshot_interval: p.snapshot_interval,
            init_weight_sd: p.init_weight_sd,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsParams {
    pub burn_in: usize,
    pub thinning: usize,
    pub samples_per_chain: usize,
}

impl Default for GibbsParams {
    fn default() -> Self {
        let c = GibbsConfig::default();
        Self {
            burn_in: c.burn_in,
            thinning: c.thinning,
            samples_per_chain: c.samples_per_chain,
        }
    }
}

impl From<&GibbsParams> for GibbsConfig {
    fn from(p: &GibbsParams) -> Self {
        GibbsConfig {
            burn_in: p.burn_in,
            thinning: p.thinning,
            samples_per_chain: p.samples_per_chain,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SolverParams {
    pub damping: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub symmetrize: bool,
    pub init_amplitude: f64,
}

impl Default for SolverParams {
    fn default() -> Self {
        let c = SolverConfig::default();
        Self {
            damping: c.damping,
            tolerance: c.tolerance,
            max_iterations: c.max_iterations,
            symmetrize: c.symmetrize,
            init_amplitude: c.init_amplitude,
        }
    }
}

impl From<&SolverParams> for SolverConfig {
    fn from(p: &SolverParams) -> Self {
        SolverConfig {
            damping: p.damping,
            tolerance: p.tolerance,
            max_iterations: p.max_iterations,
            symmetrize: p.symmetrize,
            init_amplitude: p.init_amplitude,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DbnConfig {
    #[serde(flatten)]
    pub common: CommonConfig,
    /// Visible width of the generator RBM and the data.
    pub width: usize,
    /// Hidden widths of the stacked RBMs, bottom-up.
    pub hidden_sizes: Vec<usize>,
    /// Number of training examples generated from the random RBM.
    pub samples: usize,
    pub generator_weight_scale: f64,
    pub generator_bias_variance: f64,
    #[serde(default)]
    pub train: TrainParams,
    #[serde(default)]
    pub gibbs: GibbsParams,
    #[serde(default)]
    pub solver: SolverParams,
    /// Track the per-epoch representation dimensionality (Fig.-style
    /// learning trajectories); costs one propagation per epoch per layer.
    #[serde(default = "default_true")]
    pub track_dimensionality: bool,
    #[serde(default)]
    pub dump_dataset: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum SpectrumSource {
    /// Sample covariance `xi xi^T / N` of an `n x p` Gaussian matrix.
    Wishart {
        n: usize,
        p: usize,
        variance: f64,
        #[serde(default = "default_realizations")]
        instances: usize,
    },
    /// Propagated covariances of random deep networks; eigenvalues of the
    /// chosen layer (default: deepest) are pooled over instances.
    RandomNet {
        width: usize,
        depth: usize,
        weight_scale: f64,
        bias_variance: f64,
        offdiag_scale: f64,
        #[serde(default = "default_realizations")]
        instances: usize,
        #[serde(default)]
        layer: Option<usize>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpectrumConfig {
    #[serde(flatten)]
    pub common: CommonConfig,
    #[serde(flatten)]
    pub source: SpectrumSource,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct McVerifyConfig {
    #[serde(flatten)]
    pub common: CommonConfig,
    pub width: usize,
    pub depth: usize,
    pub weight_scale: f64,
    pub bias_variance: f64,
    pub offdiag_scale: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_realizations")]
    pub realizations: usize,
}

/// One experiment. The JSON `kind` field selects the variant.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    RandomNet(RandomNetConfig),
    LargenSweep(LargenSweepConfig),
    Dbn(DbnConfig),
    Spectrum(SpectrumConfig),
    McVerify(McVerifyConfig),
}

impl ExperimentConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentConfig::RandomNet(_) => "random-net",
            ExperimentConfig::LargenSweep(_) => "largen-sweep",
            ExperimentConfig::Dbn(_) => "dbn",
            ExperimentConfig::Spectrum(_) => "spectrum",
            ExperimentConfig::McVerify(_) => "mc-verify",
        }
    }

    pub fn common(&self) -> &CommonConfig {
        match self {
            ExperimentConfig::RandomNet(c) => &c.common,
            ExperimentConfig::LargenSweep(c) => &c.common,
            ExperimentConfig::Dbn(c) => &c.common,
            ExperimentConfig::Spectrum(c) => &c.common,
            ExperimentConfig::McVerify(c) => &c.common,
        }
    }

    pub fn common_mut(&mut self) -> &mut CommonConfig {
        match self {
            ExperimentConfig::RandomNet(c) => &mut c.common,
            ExperimentConfig::LargenSweep(c) => &mut c.common,
            ExperimentConfig::Dbn(c) => &mut c.common,
            ExperimentConfig::Spectrum(c) => &mut c.common,
            ExperimentConfig::McVerify(c) => &mut c.common,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.common().quad_order == 0 {
            return Err(CliError::Config("quad_order must be positive".into()));
        }
        match self {
            ExperimentConfig::RandomNet(c) => {
                if c.realizations == 0 {
                    return Err(CliError::Config("realizations must be positive".into()));
                }
            }
            ExperimentConfig::LargenSweep(c) => {
                if c.g_values.is_empty() || c.sigma_b_values.is_empty() {
                    return Err(CliError::Config("empty sweep grid".into()));
                }
            }
            ExperimentConfig::Dbn(c) => {
                if c.hidden_sizes.is_empty() {
                    return Err(CliError::Config("hidden_sizes must be nonempty".into()));
                }
                if c.samples < c.train.batch_size {
                    return Err(CliError::Config(format!(
                        "dataset size {} smaller than batch size {}",
                        c.samples, c.train.batch_size
                    )));
                }
            }
            ExperimentConfig::Spectrum(_) | ExperimentConfig::McVerify(_) => {}
        }
        Ok(())
    }
}
