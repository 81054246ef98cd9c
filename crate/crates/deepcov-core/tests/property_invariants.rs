//! Property tests for the algebraic invariants that must hold on arbitrary
//! symmetric matrices, not just hand-picked ones.

use deepcov_core::metrics::{covariance_strength, dimensionality, dimensionality_from_traces,
    sigma_dim_identity};
use deepcov_core::numerics::{nearest_psd, sym_eigvals};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn symmetric_matrix(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    proptest::collection::vec(-2.0f64..2.0, n * n).prop_map(move |vals| {
        let a = DMatrix::from_vec(n, n, vals);
        0.5 * (&a + a.transpose())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nearest_psd_is_idempotent_and_psd(c in symmetric_matrix(5)) {
        let p = nearest_psd(&c).unwrap();
        let again = nearest_psd(&p).unwrap();
        prop_assert!((&again - &p).abs().max() < 1e-10);
        let vals = sym_eigvals(&p).unwrap();
        prop_assert!(vals.iter().all(|&l| l >= -1e-10));
    }

    #[test]
    fn nonnegative_eigenvalues_survive_projection(c in symmetric_matrix(5)) {
        let before = sym_eigvals(&c).unwrap();
        let after = sym_eigvals(&nearest_psd(&c).unwrap()).unwrap();
        let kept: Vec<f64> = before.iter().copied().filter(|&l| l >= 0.0).collect();
        for (a, b) in kept.iter().zip(&after) {
            prop_assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn eigenvalue_sum_equals_trace(c in symmetric_matrix(6)) {
        let vals = sym_eigvals(&c).unwrap();
        let trace: f64 = c.diagonal().sum();
        prop_assert!((vals.iter().sum::<f64>() - trace).abs() < 1e-10);
    }

    #[test]
    fn dimensionality_routes_and_sigma_identity_agree(c in symmetric_matrix(6)) {
        let trace_sq: f64 = c.iter().map(|&x| x * x).sum();
        prop_assume!(trace_sq > 1e-6);
        let (d_eig, _) = dimensionality(&c).unwrap();
        let (d_tr, _) = dimensionality_from_traces(&c).unwrap();
        prop_assert!((d_eig - d_tr).abs() < 1e-8);
        let direct = covariance_strength(&c).unwrap();
        let via_dim = sigma_dim_identity(&c).unwrap();
        prop_assert!((direct - via_dim).abs() < 1e-10);
    }

    #[test]
    fn dimensionality_is_scale_invariant(c in symmetric_matrix(5), alpha in 0.01f64..100.0) {
        let trace_sq: f64 = c.iter().map(|&x| x * x).sum();
        prop_assume!(trace_sq > 1e-6);
        let (d, _) = dimensionality(&c).unwrap();
        let (d_scaled, _) = dimensionality(&(alpha * &c)).unwrap();
        prop_assert!((d - d_scaled).abs() < 1e-10);
    }
}
