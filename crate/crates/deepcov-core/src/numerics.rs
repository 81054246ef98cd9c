//! Shared numerical kernels.
//!
//! Quadrature rules here integrate against the standard-normal measure
//! `Dx = e^{-x^2/2} dx / sqrt(2*pi)`, so weights sum to one and an
//! `order`-point rule is exact for polynomials of degree `2*order - 1`.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::math;

/// Default number of nodes for 1-D rules (tensor-squared for 2-D integrals).
///
/// tanh-family integrands with pre-activation standard deviations up to ~1.2
/// converge below 1e-10 at this order; doubling it moves propagated moments
/// by less than 1e-9 in the weak-coupling regimes this crate targets.
pub const DEFAULT_QUAD_ORDER: usize = 100;

/// A Gauss–Hermite rule normalized to the standard-normal measure.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    order: usize,
}

impl QuadratureRule {
    /// Nodes in ascending order, symmetric about zero.
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Nonnegative weights summing to one.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// The rule used throughout the crate unless a caller overrides it.
    pub fn default_rule() -> Self {
        gauss_hermite_rule(DEFAULT_QUAD_ORDER).expect("default order is valid")
    }
}

/// Build an `order`-point Gauss–Hermite rule for the standard-normal measure.
///
/// Uses Golub–Welsch on the probabilists' Hermite recurrence: the Jacobi
/// matrix is tridiagonal with zero diagonal and off-diagonals `sqrt(k)`.
/// Nodes and weights are symmetrized exactly about zero afterwards to remove
/// eigensolver rounding.
pub fn gauss_hermite_rule(order: usize) -> Result<QuadratureRule> {
    if order == 0 {
        return Err(Error::invalid("quadrature order must be at least 1"));
    }
    let jacobi = DMatrix::<f64>::from_fn(order, order, |i, j| {
        if i + 1 == j {
            math::sqrt(j as f64)
        } else if j + 1 == i {
            math::sqrt(i as f64)
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..order)
        .map(|k| {
            let first = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], first * first)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut nodes: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut weights: Vec<f64> = pairs.iter().map(|p| p.1).collect();

    // Enforce exact +/- node symmetry and weight parity.
    for i in 0..order / 2 {
        let j = order - 1 - i;
        let t = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -t;
        nodes[j] = t;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if order % 2 == 1 {
        nodes[order / 2] = 0.0;
    }
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }

    Ok(QuadratureRule {
        nodes,
        weights,
        order,
    })
}

/// Expectation of `f` under a standard normal: `sum_k w_k f(t_k)`.
pub fn expect_1d(mut f: impl FnMut(f64) -> f64, rule: &QuadratureRule) -> Result<f64> {
    let mut acc = 0.0;
    for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
        let v = f(t);
        if !v.is_finite() {
            return Err(Error::domain(format!("integrand is {v} at node {t}")));
        }
        acc += w * v;
    }
    Ok(acc)
}

/// Expectation of `f(x, y')` where `(x, y')` are standard normals with
/// correlation `psi`, parametrized as `y' = psi*x + y*sqrt(1 - psi^2)` with
/// `x, y` independent.
pub fn expect_2d_correlated(
    mut f: impl FnMut(f64, f64) -> f64,
    psi: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if !(psi.abs() <= 1.0) {
        return Err(Error::invalid(format!("correlation {psi} outside [-1, 1]")));
    }
    let s = math::sqrt((1.0 - psi * psi).max(0.0));
    let mut acc = 0.0;
    for (&x, &wx) in rule.nodes.iter().zip(&rule.weights) {
        let mut inner = 0.0;
        for (&y, &wy) in rule.nodes.iter().zip(&rule.weights) {
            let v = f(x, psi * x + s * y);
            if !v.is_finite() {
                return Err(Error::domain(format!("integrand is {v} at ({x}, {y})")));
            }
            inner += wy * v;
        }
        acc += wx * inner;
    }
    Ok(acc)
}

fn check_symmetric(matrix: &DMatrix<f64>, tol: f64, what: &str) -> Result<()> {
    if !matrix.is_square() {
        return Err(Error::invalid(format!(
            "{what}: expected a square matrix, got {}x{}",
            matrix.nrows(),
            matrix.ncols()
        )));
    }
    for i in 0..matrix.nrows() {
        for j in (i + 1)..matrix.ncols() {
            let d = (matrix[(i, j)] - matrix[(j, i)]).abs();
            if d > tol {
                return Err(Error::invalid(format!(
                    "{what}: asymmetry {d:.3e} at ({i}, {j}) exceeds {tol:.1e}"
                )));
            }
        }
    }
    Ok(())
}

/// Project a symmetric matrix onto the PSD cone by clipping negative
/// eigenvalues to zero and reconstructing. Already-PSD inputs pass through
/// unchanged up to eigensolver rounding.
pub fn nearest_psd(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_symmetric(matrix, 1e-10, "nearest_psd")?;
    let sym = 0.5 * (matrix + matrix.transpose());
    let mut eig = sym.symmetric_eigen();
    for lambda in eig.eigenvalues.iter_mut() {
        if *lambda < 0.0 {
            *lambda = 0.0;
        }
    }
    let rebuilt = eig.recompose();
    Ok(0.5 * (&rebuilt + rebuilt.transpose()))
}

/// Eigenvalues of a symmetric matrix, sorted descending.
pub fn sym_eigvals(matrix: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_symmetric(matrix, 1e-10, "sym_eigvals")?;
    let sym = 0.5 * (matrix + matrix.transpose());
    let mut vals: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    Ok(vals)
}

/// A reproducible pseudo-random stream: one ChaCha12 generator per
/// `(seed, stream_id)` pair. Distinct stream ids under the same seed yield
/// statistically independent sequences, so parallel tasks can each own one
/// stream derived from a single master seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        Self {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Derive an independent child stream; `(parent id, index)` pairs are
    /// mixed so nested derivations do not collide.
    pub fn substream(&self, index: u64) -> Self {
        let child = splitmix64(self.stream_id ^ splitmix64(index.wrapping_add(1)));
        Self::new(self.seed, child)
    }

    /// One standard-normal draw.
    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }

    /// One uniform draw on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    /// One uniform draw on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        // 53 random mantissa bits.
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// A ±1 spin that is `+1` with probability `p_plus`.
    pub fn spin(&mut self, p_plus: f64) -> f64 {
        if self.unit() < p_plus {
            1.0
        } else {
            -1.0
        }
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}
