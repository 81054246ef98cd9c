//! Scalar order-parameter theory of wide networks.
//!
//! In the wide-network limit the matrix recursion collapses onto a handful of
//! scalars per layer: the spin-glass order parameter `Q`, the mean diagonal
//! covariance `K1`, the covariance strength `Sigma`, and the derivative
//! moments `chi2 = E[(phi')^2]` and `Upsilon = E[(phi')^4] / chi2^2` of the
//! layer's Gaussian field. The `Sigma` map is affine with slope
//! `g^2 * chi2^2`; its fixed point at the input layer is the operating point
//! `N*Sigma^* = g^2 kappa^2 / (1 - g^2 kappa^2)`.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;
use crate::numerics::{expect_2d_correlated, QuadratureRule};

/// Scalar order parameters of one layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LargeNState {
    /// Layer index (0 is the input).
    pub layer: usize,
    /// Spin-glass order parameter `Q = (1/N) sum_i m_i^2`.
    pub q: f64,
    /// Mean diagonal covariance `K1 = (1/N) sum_i C_ii`.
    pub k1: f64,
    /// Mean squared diagonal covariance `K2 = (1/N) sum_i C_ii^2`
    /// (taken as `K1^2` in the scalar theory).
    pub k2: f64,
    /// Covariance strength `Sigma`.
    pub sigma: f64,
    /// Normalized dimensionality predicted from the scalars.
    pub d_tilde: f64,
    /// `E[(phi')^2]` under this layer's Gaussian field; equals `kappa` at the
    /// input layer of the random model.
    pub chi2: f64,
    /// `E[(phi')^4] / chi2^2 >= 1`.
    pub upsilon: f64,
}

impl LargeNState {
    /// `N * Sigma`, the width-scaled covariance strength.
    pub fn n_sigma(&self, width: usize) -> f64 {
        width as f64 * self.sigma
    }

    /// The additive denominator term `(K1)^2 * Upsilon` driving the
    /// dimensionality reduction into the next layer.
    pub fn additive_term(&self) -> f64 {
        self.k1 * self.k1 * self.upsilon
    }
}

/// Outcome of a scalar fixed-point iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixedPoint {
    pub value: f64,
    pub iterations: usize,
    /// False when the iteration hit the cap before the tolerance; the caller
    /// decides how to handle an unconverged value.
    pub converged: bool,
}

const FIXED_POINT_TOL: f64 = 1e-12;
const FIXED_POINT_MAX_ITERS: usize = 10_000;

/// Iterate `map` from `start` until successive values differ by less than
/// 1e-12, capped at 10^4 iterations.
pub fn fixed_point(map: impl Fn(f64) -> Result<f64>, start: f64) -> Result<FixedPoint> {
    let mut x = start;
    for it in 1..=FIXED_POINT_MAX_ITERS {
        let next = map(x)?;
        if (next - x).abs() < FIXED_POINT_TOL {
            return Ok(FixedPoint {
                value: next,
                iterations: it,
                converged: true,
            });
        }
        x = next;
    }
    Ok(FixedPoint {
        value: x,
        iterations: FIXED_POINT_MAX_ITERS,
        converged: false,
    })
}

/// Expectation of `f(field)` where `field = sqrt(sigma_b)*u + sqrt(variance)*t`
/// over independent standard normals `u, t`.
fn field_average(
    f: impl Fn(f64) -> f64,
    variance: f64,
    sigma_b: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    let st = math::sqrt(variance.max(0.0));
    let su = math::sqrt(sigma_b.max(0.0));
    expect_2d_correlated(|t, u| f(st * t + su * u), 0.0, rule)
}

/// One step of the `Q` recursion:
/// `Q_next = E[phi^2(sqrt(sigma_b) u + sqrt(g Q_prev) t)]`.
pub fn q_step(q_prev: f64, g: f64, sigma_b: f64, rule: &QuadratureRule) -> Result<f64> {
    if !(q_prev >= 0.0) {
        return Err(Error::invalid(format!("Q must be nonnegative, got {q_prev}")));
    }
    field_average(
        |x| {
            let t = math::tanh(x);
            t * t
        },
        g * q_prev,
        sigma_b,
        rule,
    )
}

/// Second and fourth moments of `phi'` under the layer's Gaussian field:
/// returns `(chi2, Upsilon)` with `chi2 = E[(phi')^2]` and
/// `Upsilon = E[(phi')^4] / chi2^2`.
pub fn phi_prime_moments(
    q: f64,
    g: f64,
    sigma_b: f64,
    rule: &QuadratureRule,
) -> Result<(f64, f64)> {
    if !(q >= 0.0) {
        return Err(Error::invalid(format!("Q must be nonnegative, got {q}")));
    }
    let e2 = field_average(
        |x| {
            let p = math::sech2(x);
            p * p
        },
        g * q,
        sigma_b,
        rule,
    )?;
    let e4 = field_average(
        |x| {
            let p = math::sech2(x);
            let p2 = p * p;
            p2 * p2
        },
        g * q,
        sigma_b,
        rule,
    )?;
    Ok((e2, e4 / (e2 * e2)))
}

/// `kappa = E[(phi'(sqrt(sigma_b) u))^2]`, the input-layer value of `chi2`.
pub fn kappa(sigma_b: f64, rule: &QuadratureRule) -> Result<f64> {
    phi_prime_moments(0.0, 1.0, sigma_b, rule).map(|(chi2, _)| chi2)
}

/// `Q` step with the mean activity smoothed over the pre-activation variance
/// `Delta_ii ~ g K1_prev`:
/// `Q_next = E_z[(E_t phi(sqrt(g K1_prev) t + sqrt(sigma_b + g Q_prev) z))^2]`.
///
/// The bare [`q_step`] evaluates `phi` directly at the mean pre-activation,
/// which overestimates the mean activity when `Delta_ii` is of order one;
/// this variant keeps the scalar recursion quantitatively on top of the full
/// matrix propagation.
pub fn q_step_smoothed(
    q_prev: f64,
    k1_prev: f64,
    g: f64,
    sigma_b: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if !(q_prev >= 0.0 && k1_prev >= 0.0) {
        return Err(Error::invalid("Q and K1 must be nonnegative"));
    }
    let outer_sd = math::sqrt(sigma_b + g * q_prev);
    let inner_sd = math::sqrt(g * k1_prev);
    let nodes = rule.nodes();
    let weights = rule.weights();
    let mut acc = 0.0;
    for (&z, &wz) in nodes.iter().zip(weights) {
        let x0 = outer_sd * z;
        let mut inner = 0.0;
        for (&t, &wt) in nodes.iter().zip(weights) {
            inner += wt * math::tanh(inner_sd * t + x0);
        }
        acc += wz * inner * inner;
    }
    Ok(acc)
}

/// Derivative moments with the same smoothing as [`q_step_smoothed`]:
/// `chi2 = E_z[(E_t phi'(sqrt(g K1) t + x0))^2]` and the matching
/// fourth-to-second moment ratio.
pub fn phi_prime_moments_smoothed(
    q: f64,
    k1: f64,
    g: f64,
    sigma_b: f64,
    rule: &QuadratureRule,
) -> Result<(f64, f64)> {
    if !(q >= 0.0 && k1 >= 0.0) {
        return Err(Error::invalid("Q and K1 must be nonnegative"));
    }
    let outer_sd = math::sqrt(sigma_b + g * q);
    let inner_sd = math::sqrt(g * k1);
    let nodes = rule.nodes();
    let weights = rule.weights();
    let mut e2 = 0.0;
    let mut e4 = 0.0;
    for (&z, &wz) in nodes.iter().zip(weights) {
        let x0 = outer_sd * z;
        let mut inner = 0.0;
        for (&t, &wt) in nodes.iter().zip(weights) {
            inner += wt * math::sech2(inner_sd * t + x0);
        }
        let sq = inner * inner;
        e2 += wz * sq;
        e4 += wz * sq * sq;
    }
    Ok((e2, e4 / (e2 * e2)))
}

/// One step of the `K1` recursion:
/// `K1_next = E[phi^2(sqrt(g(K1_prev + Q_prev)) t + sqrt(sigma_b) u)] - Q_next`.
pub fn k1_step(
    k1_prev: f64,
    q_prev: f64,
    q_next: f64,
    g: f64,
    sigma_b: f64,
    rule: &QuadratureRule,
) -> Result<f64> {
    if !(k1_prev >= 0.0 && q_prev >= 0.0) {
        return Err(Error::invalid("K1 and Q must be nonnegative"));
    }
    let second = field_average(
        |x| {
            let t = math::tanh(x);
            t * t
        },
        g * (k1_prev + q_prev),
        sigma_b,
        rule,
    )?;
    Ok(second - q_next)
}

/// One step of the covariance-strength recursion:
/// `Sigma_next = g^2 chi2^2 (Sigma_prev + K2_prev / N)`.
pub fn sigma_step(sigma_prev: f64, k2_prev: f64, chi2: f64, g: f64, width: usize) -> Result<f64> {
    if !(sigma_prev >= 0.0) {
        return Err(Error::invalid(format!(
            "Sigma must be nonnegative, got {sigma_prev}"
        )));
    }
    let gain = g * g * chi2 * chi2;
    Ok(gain * (sigma_prev + k2_prev / width as f64))
}

/// The operating point `N*Sigma^* = g^2 kappa^2 / (1 - g^2 kappa^2)` of the
/// input-layer covariance-strength map. Fails with a divergence error when
/// `g^2 kappa^2 >= 1` (the linearized map has no finite fixed point).
pub fn operating_point(g: f64, sigma_b: f64, rule: &QuadratureRule) -> Result<f64> {
    let kap = kappa(sigma_b, rule)?;
    let slope = g * g * kap * kap;
    if slope >= 1.0 {
        return Err(Error::Divergence(format!(
            "g^2 kappa^2 = {slope} >= 1: correlation strength grows without bound"
        )));
    }
    Ok(slope / (1.0 - slope))
}

/// Dimensionality formulas evaluated from one layer's scalars.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DimFormulas {
    /// `Dtilde^l = K1^2 / ((N-1) Sigma + K2)`.
    pub d_tilde: f64,
    /// `Dtilde^{l+1} = K1^2 / ((N-1) Sigma + K2 + K1^2 Upsilon)`.
    pub d_tilde_next: f64,
    /// The additive denominator term `K1^2 Upsilon`.
    pub additive_term: f64,
}

/// Evaluate the per-layer dimensionality formulas.
pub fn dim_formulas(state: &LargeNState, width: usize) -> Result<DimFormulas> {
    let base = (width - 1) as f64 * state.sigma + state.k2;
    if !(base > 0.0) {
        return Err(Error::invalid(format!(
            "nonpositive denominator {base} in the dimensionality formula"
        )));
    }
    let k1_sq = state.k1 * state.k1;
    let additive = k1_sq * state.upsilon;
    Ok(DimFormulas {
        d_tilde: k1_sq / base,
        d_tilde_next: k1_sq / (base + additive),
        additive_term: additive,
    })
}

/// How the scalar coefficients treat the pre-activation variance when
/// averaging the mean activity and `phi'`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ActivitySmoothing {
    /// Evaluate `phi` and `phi'` directly at the mean pre-activation. This is
    /// the mechanistic form behind the closed operating-point expression, but
    /// it overstates `Q` (and `chi2`) when `Delta_ii` is of order one.
    Bare,
    /// Smooth the mean activity and `phi'` over `Delta_ii ~ g K1` first.
    /// Matches the full matrix propagation to ~1% at width 400.
    #[default]
    Smoothed,
}

/// Driver for the layer-by-layer scalar recursion at fixed `(g, sigma_b, N)`.
#[derive(Debug, Clone)]
pub struct LargeNRecursion {
    pub g: f64,
    pub sigma_b: f64,
    pub width: usize,
    pub smoothing: ActivitySmoothing,
    rule: QuadratureRule,
}

impl LargeNRecursion {
    pub fn new(g: f64, sigma_b: f64, width: usize, rule: QuadratureRule) -> Result<Self> {
        if !(g > 0.0) || !(sigma_b >= 0.0) || width < 2 {
            return Err(Error::invalid(
                "need g > 0, sigma_b >= 0 and width >= 2 for the scalar recursion",
            ));
        }
        Ok(Self {
            g,
            sigma_b,
            width,
            smoothing: ActivitySmoothing::default(),
            rule,
        })
    }

    pub fn with_smoothing(mut self, smoothing: ActivitySmoothing) -> Self {
        self.smoothing = smoothing;
        self
    }

    fn coefficients(&self, q: f64, k1: f64) -> Result<(f64, f64)> {
        match self.smoothing {
            ActivitySmoothing::Bare => phi_prime_moments(q, self.g, self.sigma_b, &self.rule),
            ActivitySmoothing::Smoothed => {
                phi_prime_moments_smoothed(q, k1, self.g, self.sigma_b, &self.rule)
            }
        }
    }

    /// Input-layer state of the random model: `Q = 0`, unit input variance
    /// (`K1 = K2 = 1`) and covariance strength `n_sigma0 / N`.
    pub fn initial_state(&self, n_sigma0: f64) -> Result<LargeNState> {
        if !(n_sigma0 >= 0.0) {
            return Err(Error::invalid("N*Sigma^0 must be nonnegative"));
        }
        let (chi2, upsilon) = self.coefficients(0.0, 1.0)?;
        let sigma = n_sigma0 / self.width as f64;
        let mut state = LargeNState {
            layer: 0,
            q: 0.0,
            k1: 1.0,
            k2: 1.0,
            sigma,
            d_tilde: 0.0,
            chi2,
            upsilon,
        };
        state.d_tilde = dim_formulas(&state, self.width)?.d_tilde;
        Ok(state)
    }

    /// One layer transition of all scalar order parameters.
    pub fn step(&self, state: &LargeNState) -> Result<LargeNState> {
        let q_next = match self.smoothing {
            ActivitySmoothing::Bare => q_step(state.q, self.g, self.sigma_b, &self.rule)?,
            ActivitySmoothing::Smoothed => {
                q_step_smoothed(state.q, state.k1, self.g, self.sigma_b, &self.rule)?
            }
        };
        let k1_next = k1_step(state.k1, state.q, q_next, self.g, self.sigma_b, &self.rule)?;
        let sigma_next = sigma_step(state.sigma, state.k2, state.chi2, self.g, self.width)?;
        let (chi2_next, upsilon_next) = self.coefficients(q_next, k1_next)?;
        let mut next = LargeNState {
            layer: state.layer + 1,
            q: q_next,
            k1: k1_next,
            k2: k1_next * k1_next,
            sigma: sigma_next,
            d_tilde: 0.0,
            chi2: chi2_next,
            upsilon: upsilon_next,
        };
        next.d_tilde = dim_formulas(&next, self.width)?.d_tilde;
        Ok(next)
    }

    /// The full trajectory from the input layer down to depth `depth`
    /// (`depth + 1` states including the input).
    pub fn trajectory(&self, n_sigma0: f64, depth: usize) -> Result<Vec<LargeNState>> {
        let mut states = Vec::with_capacity(depth + 1);
        states.push(self.initial_state(n_sigma0)?);
        for _ in 0..depth {
            let next = self.step(states.last().expect("nonempty"))?;
            states.push(next);
        }
        Ok(states)
    }

    /// Fixed point of the `Q` map from `Q = 0`.
    pub fn q_fixed_point(&self) -> Result<FixedPoint> {
        fixed_point(|q| q_step(q, self.g, self.sigma_b, &self.rule), 0.0)
    }

    /// Fixed point of the `K1` map at a frozen `Q`, from `K1 = 1`.
    pub fn k1_fixed_point(&self, q_star: f64) -> Result<FixedPoint> {
        fixed_point(
            |k1| k1_step(k1, q_star, q_star, self.g, self.sigma_b, &self.rule),
            1.0,
        )
    }
}
