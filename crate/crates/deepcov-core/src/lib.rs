//! Mean-field analysis of how deep networks transform the statistics of their
//! inputs.
//!
//! The crate propagates the mean vector and covariance matrix of a layer's
//! activity through `tanh` layers with a Gaussian closure of the
//! pre-activations, and measures the resulting representations:
//!
//! - [`numerics`] — Gauss–Hermite quadrature for standard-normal expectations,
//!   symmetric eigendecomposition, PSD projection, seeded RNG streams
//! - [`ensembles`] — random deep networks (Gaussian weights/biases) and the
//!   correlated Gaussian input ensemble
//! - [`meanfield`] — the layer-to-layer moment propagation engine
//! - [`metrics`] — participation-ratio dimensionality, covariance strength,
//!   eigenvalue spectra and the Marchenko–Pastur reference
//! - [`largen`] — scalar order-parameter recursions in the wide-network limit
//!   and the covariance-strength operating point
//! - [`montecarlo`] — sampling oracle: push correlated Gaussian inputs through
//!   the network and compare empirical moments against the theory
//! - [`rbm`] — ±1 restricted Boltzmann machines: block Gibbs sampling, CD-1
//!   learning, layer-wise deep-belief-network training, exact enumeration for
//!   small instances
//! - [`bethe`] — message passing with diagonal-consistency corrections and
//!   susceptibility propagation for the linear-response covariance of an RBM's
//!   visible marginal
//!
//! The crate is `no_std`-compatible (requires `alloc`); the default `std`
//! feature only switches the math functions from `libm` to the standard
//! library. All randomized operations draw from explicit [`numerics::RngStream`]s
//! so that every result is reproducible from a master seed.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod bethe;
pub mod ensembles;
pub mod error;
pub mod largen;
mod math;
pub mod meanfield;
pub mod metrics;
pub mod montecarlo;
pub mod numerics;
pub mod rbm;

pub use error::{Error, Result};
pub use numerics::{QuadratureRule, RngStream};
