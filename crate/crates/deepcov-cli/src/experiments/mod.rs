//! The experiment pipelines behind each CLI subcommand. Every runner returns
//! its results in memory (the acceptance suite consumes them directly) and
//! writes the standard run directory: `manifest.json` plus plot-ready CSVs.

mod dbn;
mod largen_sweep;
mod mc_verify;
mod random_net;
mod spectrum;

pub use dbn::{run_dbn, DbnSummary};
pub use largen_sweep::{run_largen_sweep, SweepRow};
pub use mc_verify::{run_mc_verify, ComparisonRow};
pub use random_net::{run_random_net, LayerMetricsRow, RandomNetSummary};
pub use spectrum::{run_spectrum, SpectrumSummary};

/// Ordinary least squares of `y` on `x`: `(slope, intercept, r_squared)`.
pub(crate) fn linear_regression(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        sxx += (xi - mx) * (xi - mx);
        sxy += (xi - mx) * (yi - my);
        syy += (yi - my) * (yi - my);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    (slope, intercept, r2)
}
