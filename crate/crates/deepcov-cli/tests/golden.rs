//! Output-schema stability: CSV headers and manifest keys are pinned, and a
//! rerun with the same manifest reproduces the artifacts bit for bit.

use std::fs;
use std::path::Path;

use deepcov_cli::config::ExperimentConfig;
use deepcov_cli::experiments;
use deepcov_cli::formats::{
    read_matrix_csv, read_model_checkpoint, read_moments_csv, write_model_checkpoint,
    write_moments_csv, RunDir,
};
use deepcov_core::meanfield::LayerMoments;
use deepcov_core::numerics::RngStream;
use deepcov_core::rbm::sample_rbm;
use nalgebra::{DMatrix, DVector};

fn header_of(path: &Path) -> String {
    let text = fs::read_to_string(path).unwrap();
    text.lines().next().unwrap_or_default().to_string()
}

fn random_net_config(out: &Path) -> ExperimentConfig {
    ExperimentConfig::from_json(&format!(
        r#"{{
            "kind": "random-net",
            "seed": 9,
            "out": {out:?},
            "quad_order": 40,
            "width": 12,
            "depth": 2,
            "weight_scale": 0.8,
            "bias_variance": 0.1,
            "offdiag_scale": 0.05,
            "realizations": 2,
            "mc_samples": 2000
        }}"#
    ))
    .unwrap()
}

#[test]
fn random_net_schema_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let config = random_net_config(tmp.path());
    let dir = RunDir::create(tmp.path(), &config).unwrap();
    let ExperimentConfig::RandomNet(rn) = &config else {
        unreachable!()
    };
    experiments::run_random_net(rn, &dir).unwrap();

    assert_eq!(
        header_of(&tmp.path().join("metrics.csv")),
        "realization,layer,dimensionality,normalized_dimensionality,covariance_strength,n_sigma,mean_diagonal,mean_squared_diagonal"
    );
    assert_eq!(
        header_of(&tmp.path().join("comparisons/mc_agreement.csv")),
        "realization,layer,rmse_offdiag,median_standard_error,rmse_over_se,max_abs_diff,dimensionality_theory,dimensionality_empirical,dimensionality_rel_diff"
    );

    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("manifest.json")).unwrap())
            .unwrap();
    let keys: Vec<&str> = manifest.as_object().unwrap().keys().map(|k| k.as_str()).collect();
    assert_eq!(keys, ["kind", "seed", "quad_order", "tool", "version", "config"]);
    assert_eq!(manifest["kind"], "random-net");
    assert_eq!(manifest["seed"], 9);
}

#[test]
fn reruns_are_bit_identical() {
    let tmp_a = tempfile::tempdir().unwrap();
    let tmp_b = tempfile::tempdir().unwrap();
    for tmp in [&tmp_a, &tmp_b] {
        let mut config = random_net_config(tmp.path());
        config.common_mut().out = tmp.path().to_path_buf();
        let dir = RunDir::create(tmp.path(), &config).unwrap();
        let ExperimentConfig::RandomNet(rn) = &config else {
            unreachable!()
        };
        experiments::run_random_net(rn, &dir).unwrap();
    }
    for file in ["metrics.csv", "comparisons/mc_agreement.csv"] {
        let a = fs::read(tmp_a.path().join(file)).unwrap();
        let b = fs::read(tmp_b.path().join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
}

#[test]
fn largen_schema_is_stable() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_json(&format!(
        r#"{{
            "kind": "largen-sweep",
            "out": {:?},
            "quad_order": 40,
            "g_values": [0.8],
            "sigma_b_values": [0.1],
            "width": 50,
            "depth": 2,
            "offdiag_scale": 0.05
        }}"#,
        tmp.path()
    ))
    .unwrap();
    let dir = RunDir::create(tmp.path(), &config).unwrap();
    let ExperimentConfig::LargenSweep(sweep) = &config else {
        unreachable!()
    };
    experiments::run_largen_sweep(sweep, &dir).unwrap();
    assert_eq!(
        header_of(&tmp.path().join("metrics.csv")),
        "g,sigma_b,layer,q,k1,k2,sigma,n_sigma,d_tilde,d_tilde_next,additive_term,chi2,upsilon,n_sigma_star,divergent"
    );
}

#[test]
fn moments_csv_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = RngStream::new(5, 0);
    let a = DMatrix::<f64>::from_fn(6, 6, |_, _| rng.normal());
    let cov = &a * a.transpose();
    let mean = DVector::from_fn(6, |_, _| rng.uniform(-0.5, 0.5));
    let moments = LayerMoments::new(mean, cov).unwrap();
    write_moments_csv(tmp.path(), "layer3", &moments).unwrap();
    let back = read_moments_csv(tmp.path(), "layer3").unwrap();
    assert_eq!(moments, back);
}

#[test]
fn model_checkpoint_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = RngStream::new(6, 0);
    let model = sample_rbm(7, 5, 0.8, 0.1, &mut rng).unwrap();
    write_model_checkpoint(tmp.path(), &model).unwrap();
    let back = read_model_checkpoint(tmp.path()).unwrap();
    assert_eq!(model, back);
}

#[test]
fn matrix_csv_preserves_full_double_precision() {
    let tmp = tempfile::tempdir().unwrap();
    let values = [
        1.0 / 3.0,
        -2.2250738585072014e-308,
        1.7976931348623157e308,
        0.1 + 0.2,
        -0.0,
    ];
    let m = DMatrix::from_fn(1, values.len(), |_, j| values[j]);
    let path = tmp.path().join("m.csv");
    deepcov_cli::formats::write_matrix_csv(&path, &m).unwrap();
    let back = read_matrix_csv(&path).unwrap();
    for (a, b) in m.iter().zip(back.iter()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}
