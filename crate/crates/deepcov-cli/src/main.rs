use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use deepcov_cli::config::{
    CommonConfig, DbnConfig, ExperimentConfig, LargenSweepConfig, McVerifyConfig,
    RandomNetConfig, SmoothingChoice, SpectrumConfig, SpectrumSource,
};
use deepcov_cli::error::{CliError, Result};
use deepcov_cli::experiments;
use deepcov_cli::formats::RunDir;

/// Mean-field complexity propagation in deep networks: experiment runner.
#[derive(Parser)]
#[command(name = "deepcov", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonFlags {
    /// JSON config document; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the run.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of realizations / instances.
    #[arg(long)]
    realizations: Option<usize>,
    /// Monte Carlo or dataset sample count.
    #[arg(long)]
    samples: Option<usize>,
    /// Gauss-Hermite nodes per dimension.
    #[arg(long)]
    quad_order: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Random deterministic deep networks: propagate moments, measure
    /// dimensionality and covariance strength per layer.
    RandomNet(CommonFlags),
    /// Scalar order-parameter recursions over a (g, sigma_b) grid.
    Largen(CommonFlags),
    /// Generate data from a random RBM, train a DBN with CD-1, compare
    /// theory and empirical statistics per layer.
    Dbn(CommonFlags),
    /// Eigenvalue spectra with Marchenko-Pastur overlays.
    Spectrum(CommonFlags),
    /// Monte Carlo verification of the mean-field propagation.
    McVerify(CommonFlags),
}

fn default_common(out: &str) -> CommonConfig {
    CommonConfig {
        seed: 0,
        out: PathBuf::from(out),
        quad_order: deepcov_core::numerics::DEFAULT_QUAD_ORDER,
    }
}

fn default_config(kind: &str) -> ExperimentConfig {
    match kind {
        "random-net" => ExperimentConfig::RandomNet(RandomNetConfig {
            common: default_common("runs/random-net"),
            width: 100,
            depth: 5,
            weight_scale: 0.8,
            bias_variance: 0.1,
            offdiag_scale: 0.05,
            realizations: 10,
            mc_samples: None,
            dump_moments: false,
        }),
        "largen-sweep" => ExperimentConfig::LargenSweep(LargenSweepConfig {
            common: default_common("runs/largen"),
            g_values: vec![0.2, 0.4, 0.6, 0.8, 1.0, 1.2],
            sigma_b_values: vec![0.0, 0.05, 0.1, 0.5],
            width: 100,
            depth: 12,
            offdiag_scale: 0.05,
            smoothing: SmoothingChoice::Smoothed,
        }),
        "dbn" => ExperimentConfig::Dbn(DbnConfig {
            common: default_common("runs/dbn"),
            width: 150,
            hidden_sizes: vec![150, 150, 150],
            samples: 60_000,
            generator_weight_scale: 0.8,
            generator_bias_variance: 0.1,
            train: Default::default(),
            gibbs: Default::default(),
            solver: Default::default(),
            track_dimensionality: true,
            dump_dataset: false,
        }),
        "spectrum" => ExperimentConfig::Spectrum(SpectrumConfig {
            common: default_common("runs/spectrum"),
            source: SpectrumSource::RandomNet {
                width: 100,
                depth: 5,
                weight_scale: 0.8,
                bias_variance: 0.1,
                offdiag_scale: 0.05,
                instances: 100,
                layer: None,
            },
        }),
        "mc-verify" => ExperimentConfig::McVerify(McVerifyConfig {
            common: default_common("runs/mc-verify"),
            width: 100,
            depth: 5,
            weight_scale: 0.8,
            bias_variance: 0.1,
            offdiag_scale: 0.05,
            samples: 100_000,
            realizations: 1,
        }),
        other => unreachable!("unknown kind {other}"),
    }
}

fn resolve(kind: &str, flags: &CommonFlags) -> Result<ExperimentConfig> {
    let mut config = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
            let config = ExperimentConfig::from_json(&text)?;
            if config.kind() != kind {
                return Err(CliError::Config(format!(
                    "config kind {:?} does not match subcommand {kind:?}",
                    config.kind()
                )));
            }
            config
        }
        None => default_config(kind),
    };
    let common = config.common_mut();
    if let Some(seed) = flags.seed {
        common.seed = seed;
    }
    if let Some(out) = &flags.out {
        common.out = out.clone();
    }
    if let Some(order) = flags.quad_order {
        common.quad_order = order;
    }
    match &mut config {
        ExperimentConfig::RandomNet(c) => {
            if let Some(r) = flags.realizations {
                c.realizations = r;
            }
            if let Some(s) = flags.samples {
                c.mc_samples = Some(s);
            }
        }
        ExperimentConfig::McVerify(c) => {
            if let Some(r) = flags.realizations {
                c.realizations = r;
            }
            if let Some(s) = flags.samples {
                c.samples = s;
            }
        }
        ExperimentConfig::Dbn(c) => {
            if let Some(s) = flags.samples {
                c.samples = s;
            }
        }
        ExperimentConfig::Spectrum(c) => {
            if let Some(r) = flags.realizations {
                match &mut c.source {
                    SpectrumSource::Wishart { instances, .. } => *instances = r,
                    SpectrumSource::RandomNet { instances, .. } => *instances = r,
                }
            }
        }
        ExperimentConfig::LargenSweep(_) => {}
    }
    config.validate()?;
    Ok(config)
}

fn run(kind: &str, flags: &CommonFlags) -> Result<PathBuf> {
    let config = resolve(kind, flags)?;
    let out = config.common().out.clone();
    let dir = RunDir::create(&out, &config)?;
    match &config {
        ExperimentConfig::RandomNet(c) => {
            experiments::run_random_net(c, &dir)?;
        }
        ExperimentConfig::LargenSweep(c) => {
            experiments::run_largen_sweep(c, &dir)?;
        }
        ExperimentConfig::Dbn(c) => {
            experiments::run_dbn(c, &dir)?;
        }
        ExperimentConfig::Spectrum(c) => {
            experiments::run_spectrum(c, &dir)?;
        }
        ExperimentConfig::McVerify(c) => {
            experiments::run_mc_verify(c, &dir)?;
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, flags) = match &cli.command {
        Command::RandomNet(f) => ("random-net", f),
        Command::Largen(f) => ("largen-sweep", f),
        Command::Dbn(f) => ("dbn", f),
        Command::Spectrum(f) => ("spectrum", f),
        Command::McVerify(f) => ("mc-verify", f),
    };
    match run(kind, flags) {
        Ok(out) => {
            println!("wrote {}", out.display());
            ExitCode::SUCCESS
        }
        Err(err) => {
            let payload = serde_json::json!({
                "error": err.to_string(),
                "kind": err.kind(),
            });
            eprintln!("{payload}");
            ExitCode::FAILURE
        }
    }
}
