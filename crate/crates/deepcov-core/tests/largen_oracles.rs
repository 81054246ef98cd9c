//! Adaptive-quadrature oracles for the scalar recursions and the
//! self-averaging check against the full matrix mean-field at large width.

mod common;

use common::gaussian_expectation_oracle;
use deepcov_core::ensembles::{
    sample_deep_net, sample_input_covariance, DeepNetConfig, InputEnsembleConfig,
};
use deepcov_core::largen::{kappa, q_step, LargeNRecursion};
use deepcov_core::meanfield::{propagate_moments, LayerMoments};
use deepcov_core::metrics;
use deepcov_core::numerics::{QuadratureRule, RngStream};

#[test]
fn q_step_matches_adaptive_reference() {
    let rule = QuadratureRule::default_rule();
    // Q = 0 collapses the double integral onto the bias Gaussian alone.
    let sigma_b = 0.1f64;
    let q1 = q_step(0.0, 0.8, sigma_b, &rule).unwrap();
    let oracle = gaussian_expectation_oracle(&|u| (sigma_b.sqrt() * u).tanh().powi(2), 1e-13);
    assert!((q1 - oracle).abs() < 1e-8, "{q1} vs {oracle}");

    // Q > 0: the two independent Gaussians combine into one of summed
    // variance, which the 1-D oracle integrates.
    let q_prev = 0.3f64;
    let g = 0.8f64;
    let total_sd = (sigma_b + g * q_prev).sqrt();
    let q2 = q_step(q_prev, g, sigma_b, &rule).unwrap();
    let oracle = gaussian_expectation_oracle(&|z| (total_sd * z).tanh().powi(2), 1e-13);
    assert!((q2 - oracle).abs() < 1e-8, "{q2} vs {oracle}");
}

#[test]
fn smoothed_q_step_matches_nested_adaptive_reference() {
    let rule = QuadratureRule::default_rule();
    let (q_prev, k1_prev, g, sigma_b) = (0.05f64, 0.9f64, 0.8f64, 0.1f64);
    let got = deepcov_core::largen::q_step_smoothed(q_prev, k1_prev, g, sigma_b, &rule).unwrap();
    let outer_sd = (sigma_b + g * q_prev).sqrt();
    let inner_sd = (g * k1_prev).sqrt();
    let oracle = gaussian_expectation_oracle(
        &|z| {
            let x0 = outer_sd * z;
            let inner =
                gaussian_expectation_oracle(&|t| (inner_sd * t + x0).tanh(), 1e-12);
            inner * inner
        },
        1e-10,
    );
    assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
}

#[test]
fn kappa_matches_adaptive_reference() {
    let rule = QuadratureRule::default_rule();
    let sigma_b = 0.1f64;
    let k = kappa(sigma_b, &rule).unwrap();
    let oracle = gaussian_expectation_oracle(
        &|u| {
            let t = (sigma_b.sqrt() * u).tanh();
            let p = 1.0 - t * t;
            p * p
        },
        1e-13,
    );
    assert!((k - oracle).abs() < 1e-8, "{k} vs {oracle}");
}

#[test]
fn scalar_layer_one_matches_full_meanfield_at_large_width() {
    let n = 400usize;
    let g = 0.8;
    let sigma_b = 0.1;
    let offdiag = 0.05;
    let rule = QuadratureRule::default_rule();

    let mut rng = RngStream::new(2001, 0);
    let net = sample_deep_net(
        &DeepNetConfig {
            width: n,
            depth: 1,
            weight_scale: g,
            bias_variance: sigma_b,
        },
        &mut rng,
    )
    .unwrap();
    let c0 = sample_input_covariance(
        &InputEnsembleConfig {
            width: n,
            offdiag_scale: offdiag,
        },
        &mut rng,
    )
    .unwrap();
    let input = LayerMoments::zero_mean(c0).unwrap();
    let layer1 = propagate_moments(&net[0], &input, &rule).unwrap();
    let report = metrics::MetricsReport::from_covariance(layer1.cov()).unwrap();

    let recursion = LargeNRecursion::new(g, sigma_b, n, rule).unwrap();
    let n_sigma0 = n as f64 * offdiag * offdiag / 3.0;
    let states = recursion.trajectory(n_sigma0, 1).unwrap();
    let scalar = &states[1];

    let k1_rel = (report.mean_diagonal - scalar.k1).abs() / scalar.k1;
    let nsig_full = n as f64 * report.covariance_strength;
    let nsig_rel = (nsig_full - scalar.n_sigma(n)).abs() / scalar.n_sigma(n);
    assert!(
        k1_rel < 0.05,
        "K1: matrix {} vs scalar {} ({k1_rel:.3} rel)",
        report.mean_diagonal,
        scalar.k1
    );
    assert!(
        nsig_rel < 0.05,
        "N*Sigma: matrix {nsig_full} vs scalar {} ({nsig_rel:.3} rel)",
        scalar.n_sigma(n)
    );
}
