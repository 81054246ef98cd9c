//! The default quadrature order must be converged for the regimes the crate
//! targets: doubling the order may move no propagated moment entry by more
//! than 1e-9.

use deepcov_core::ensembles::{
    sample_deep_net, sample_input_covariance, DeepNetConfig, InputEnsembleConfig,
};
use deepcov_core::meanfield::{propagate_chain, LayerMoments};
use deepcov_core::numerics::{gauss_hermite_rule, QuadratureRule, RngStream, DEFAULT_QUAD_ORDER};

#[test]
fn doubling_the_default_order_changes_nothing_at_figure_scale() {
    let n = 100;
    let mut rng = RngStream::new(21, 0);
    let cfg = DeepNetConfig {
        width: n,
        depth: 1,
        weight_scale: 0.8,
        bias_variance: 0.1,
    };
    let net = sample_deep_net(&cfg, &mut rng).unwrap();
    let c0 = sample_input_covariance(
        &InputEnsembleConfig {
            width: n,
            offdiag_scale: 0.05,
        },
        &mut rng,
    )
    .unwrap();
    let input = LayerMoments::zero_mean(c0).unwrap();
    let base = propagate_chain(&net, &input, &QuadratureRule::default_rule()).unwrap();
    let doubled = propagate_chain(
        &net,
        &input,
        &gauss_hermite_rule(2 * DEFAULT_QUAD_ORDER).unwrap(),
    )
    .unwrap();
    for (a, b) in base.iter().zip(&doubled) {
        assert!((a.mean() - b.mean()).abs().max() < 1e-9);
        assert!((a.cov() - b.cov()).abs().max() < 1e-9);
    }
}
