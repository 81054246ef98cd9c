//! Corrected Bethe estimate of an RBM's visible-marginal statistics.
//!
//! Cavity magnetizations `m_{i->a}` and cavity biases `u_{a->i}` follow the
//! message-passing equations of the bipartite factor graph, with an Onsager
//! term `-Lambda_i m_i` enforcing the diagonal consistency
//! `C_ii = 1 - m_i^2` through Lagrange multipliers. Susceptibility
//! propagation closes the system: cavity susceptibilities
//! `chi_{i->a,k} = d m_{i->a} / d b^v_k` evolve alongside the messages and
//! yield the linear-response covariance `C`.
//!
//! All updates are fully synchronous within a sweep (damped), so a sweep is
//! deterministic and parallelizable over message indices; the bp and sp
//! phases alternate with a barrier between them.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::math;
use crate::meanfield::LayerMoments;
use crate::numerics::RngStream;
use crate::rbm::RbmModel;

/// Solver schedule and tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Mixing weight kept on the old value, in `[0, 1)`.
    pub damping: f64,
    /// Convergence threshold on the max absolute message change per sweep.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Return `(C + C^T) / 2` instead of the raw linear-response matrix.
    pub symmetrize: bool,
    /// Half-width of the uniform message initialization.
    pub init_amplitude: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            damping: 0.5,
            tolerance: 1e-10,
            max_iterations: 10_000,
            symmetrize: true,
            init_amplitude: 0.01,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.damping >= 0.0 && self.damping < 1.0) {
            return Err(Error::invalid("damping must lie in [0, 1)"));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::invalid("tolerance must be positive"));
        }
        Ok(())
    }
}

/// Messages, susceptibilities and linear-response observables.
#[derive(Debug, Clone, PartialEq)]
pub struct CavityState {
    n_visible: usize,
    n_hidden: usize,
    /// `m_{i->a}`, visible-to-factor cavity magnetizations.
    pub cavity_magnetizations: DMatrix<f64>,
    /// `u_{a->i}`, factor-to-visible cavity biases.
    pub cavity_biases: DMatrix<f64>,
    /// `chi_{i->a,k}` flattened as `[(i * n_h + a) * n_v + k]`.
    pub susceptibilities: Vec<f64>,
    /// Onsager multipliers `Lambda_i`.
    pub onsager: DVector<f64>,
    /// Full magnetizations `m_i`.
    pub magnetizations: DVector<f64>,
    /// Linear-response covariance `C_ik`.
    pub covariance: DMatrix<f64>,
}

impl CavityState {
    /// Random near-paramagnetic initialization: messages uniform in
    /// `[-amplitude, amplitude]`, susceptibilities and multipliers zero.
    pub fn init(model: &RbmModel, amplitude: f64, rng: &mut RngStream) -> Self {
        let n_v = model.n_visible();
        let n_h = model.n_hidden();
        Self {
            n_visible: n_v,
            n_hidden: n_h,
            cavity_magnetizations: DMatrix::from_fn(n_v, n_h, |_, _| {
                rng.uniform(-amplitude, amplitude)
            }),
            cavity_biases: DMatrix::from_fn(n_h, n_v, |_, _| rng.uniform(-amplitude, amplitude)),
            susceptibilities: alloc::vec![0.0; n_v * n_h * n_v],
            onsager: DVector::zeros(n_v),
            magnetizations: DVector::zeros(n_v),
            covariance: DMatrix::identity(n_v, n_v),
        }
    }

    #[inline]
    fn chi_index(&self, i: usize, a: usize, k: usize) -> usize {
        (i * self.n_hidden + a) * self.n_visible + k
    }

    pub fn chi(&self, i: usize, a: usize, k: usize) -> f64 {
        self.susceptibilities[self.chi_index(i, a, k)]
    }

    /// Export the converged statistics in the moment format the propagation
    /// engine consumes.
    pub fn to_moments(&self) -> Result<LayerMoments> {
        LayerMoments::new(self.magnetizations.clone(), self.covariance.clone())
    }
}

fn mix(old: f64, new: f64, damping: f64) -> f64 {
    damping * old + (1.0 - damping) * new
}

/// One synchronous sweep of the belief-propagation half: cavity biases from
/// the current cavity magnetizations, then full and cavity magnetizations
/// from the fresh biases. Returns the largest absolute change.
pub fn bp_step(state: &mut CavityState, model: &RbmModel, damping: f64) -> Result<f64> {
    let n_v = state.n_visible;
    let n_h = state.n_hidden;
    let w = &model.weights;
    let mut residual = 0.0f64;

    // u_{a->i} from the cavity field G_{a->i} = sum_{j != i} w_{ja} m_{j->a}.
    let mut col_dot = DVector::<f64>::zeros(n_h);
    for a in 0..n_h {
        let mut acc = 0.0;
        for j in 0..n_v {
            acc += w[(j, a)] * state.cavity_magnetizations[(j, a)];
        }
        col_dot[a] = acc;
    }
    for a in 0..n_h {
        let base = model.hidden_bias[a];
        for i in 0..n_v {
            let g = col_dot[a] - w[(i, a)] * state.cavity_magnetizations[(i, a)];
            let new = 0.5 * (math::ln_2cosh(base + g + w[(i, a)]) - math::ln_2cosh(base + g - w[(i, a)]));
            if !new.is_finite() {
                return Err(Error::domain(format!(
                    "cavity bias diverged at factor {a}, site {i}"
                )));
            }
            let mixed = mix(state.cavity_biases[(a, i)], new, damping);
            residual = residual.max((mixed - state.cavity_biases[(a, i)]).abs());
            state.cavity_biases[(a, i)] = mixed;
        }
    }

    // Full magnetizations (the Onsager term keeps m_i on both sides; one
    // damped substitution per sweep).
    let mut u_sums = DVector::<f64>::zeros(n_v);
    for i in 0..n_v {
        let mut acc = 0.0;
        for a in 0..n_h {
            acc += state.cavity_biases[(a, i)];
        }
        u_sums[i] = acc;
        let field = model.visible_bias[i] - state.onsager[i] * state.magnetizations[i] + acc;
        let new = math::tanh(field);
        let mixed = mix(state.magnetizations[i], new, damping);
        residual = residual.max((mixed - state.magnetizations[i]).abs());
        state.magnetizations[i] = mixed;
    }

    // Cavity magnetizations remove one factor's bias from the full field.
    for i in 0..n_v {
        let base = model.visible_bias[i] - state.onsager[i] * state.magnetizations[i] + u_sums[i];
        for a in 0..n_h {
            let new = math::tanh(base - state.cavity_biases[(a, i)]);
            let mixed = mix(state.cavity_magnetizations[(i, a)], new, damping);
            residual = residual.max((mixed - state.cavity_magnetizations[(i, a)]).abs());
            state.cavity_magnetizations[(i, a)] = mixed;
        }
    }
    Ok(residual)
}

/// One synchronous sweep of the susceptibility-propagation half: the response
/// kernel `Gamma`, the susceptibility recursion, the linear-response
/// covariance and the Onsager multipliers. Returns the largest change.
pub fn sp_step(state: &mut CavityState, model: &RbmModel, damping: f64) -> Result<f64> {
    let n_v = state.n_visible;
    let n_h = state.n_hidden;
    let w = &model.weights;

    // Gamma_{a->i} = tanh(w_ia) (1 - tanh^2(b^h_a + G_{a->i}))
    //             / (1 - tanh^2(b^h_a + G_{a->i}) tanh^2(w_ia)).
    let mut gamma = DMatrix::<f64>::zeros(n_h, n_v);
    for a in 0..n_h {
        let mut col_dot = 0.0;
        for j in 0..n_v {
            col_dot += w[(j, a)] * state.cavity_magnetizations[(j, a)];
        }
        for i in 0..n_v {
            let g = col_dot - w[(i, a)] * state.cavity_magnetizations[(i, a)];
            let th = math::tanh(model.hidden_bias[a] + g);
            let tw = math::tanh(w[(i, a)]);
            gamma[(a, i)] = tw * (1.0 - th * th) / (1.0 - th * th * tw * tw);
        }
    }

    // T_{a,k} = sum_j w_{ja} chi_{j->a,k}; the cavity sum P_{a->i,k} is then
    // T_{a,k} - w_{ia} chi_{i->a,k}.
    let mut t = DMatrix::<f64>::zeros(n_h, n_v);
    for a in 0..n_h {
        for j in 0..n_v {
            let wja = w[(j, a)];
            if wja == 0.0 {
                continue;
            }
            let off = (j * n_h + a) * n_v;
            for k in 0..n_v {
                t[(a, k)] += wja * state.susceptibilities[off + k];
            }
        }
    }

    // F_{ik} = sum_a Gamma_{a->i} P_{a->i,k} + delta_{ik}.
    let mut f = DMatrix::<f64>::zeros(n_v, n_v);
    for i in 0..n_v {
        for a in 0..n_h {
            let ga = gamma[(a, i)];
            if ga == 0.0 {
                continue;
            }
            let wia = w[(i, a)];
            let off = (i * n_h + a) * n_v;
            for k in 0..n_v {
                f[(i, k)] += ga * (t[(a, k)] - wia * state.susceptibilities[off + k]);
            }
        }
        f[(i, i)] += 1.0;
    }

    let mut residual = 0.0f64;

    // Covariance and multipliers from the old multipliers (synchronous sweep).
    let mut new_cov = DMatrix::<f64>::zeros(n_v, n_v);
    let mut new_onsager = DVector::<f64>::zeros(n_v);
    for i in 0..n_v {
        let mi = state.magnetizations[i];
        let var = 1.0 - mi * mi;
        if var < 1e-15 {
            return Err(Error::domain(format!(
                "magnetization saturated at site {i}; linear response undefined"
            )));
        }
        let denom = 1.0 + var * state.onsager[i];
        for k in 0..n_v {
            new_cov[(i, k)] = var * f[(i, k)] / denom;
        }
        new_onsager[i] = (f[(i, i)] - 1.0) / var;
    }

    // chi_{i->a,k} = (1 - m_{i->a}^2)(delta_{ik} - Lambda_i C_ik
    //               + sum_{a' != a} Gamma_{a'->i} P_{a'->i,k}),
    // the derivative of the cavity update at fixed Lambda.
    for i in 0..n_v {
        let lam = state.onsager[i];
        for a in 0..n_h {
            let mc = state.cavity_magnetizations[(i, a)];
            let coef = 1.0 - mc * mc;
            let ga = gamma[(a, i)];
            let wia = w[(i, a)];
            let off = (i * n_h + a) * n_v;
            for k in 0..n_v {
                // f carries the Kronecker delta and the full factor sum;
                // removing this factor's own contribution leaves a' != a.
                let own = ga * (t[(a, k)] - wia * state.susceptibilities[off + k]);
                let inner = f[(i, k)] - own - lam * state.covariance[(i, k)];
                let new = coef * inner;
                if !new.is_finite() {
                    return Err(Error::domain(format!(
                        "susceptibility diverged at ({i}, {a}, {k})"
                    )));
                }
                let mixed = mix(state.susceptibilities[off + k], new, damping);
                residual = residual.max((mixed - state.susceptibilities[off + k]).abs());
                state.susceptibilities[off + k] = mixed;
            }
        }
    }

    for i in 0..n_v {
        for k in 0..n_v {
            let mixed = mix(state.covariance[(i, k)], new_cov[(i, k)], damping);
            residual = residual.max((mixed - state.covariance[(i, k)]).abs());
            state.covariance[(i, k)] = mixed;
        }
        let mixed = mix(state.onsager[i], new_onsager[i], damping);
        residual = residual.max((mixed - state.onsager[i]).abs());
        state.onsager[i] = mixed;
    }
    Ok(residual)
}

/// Relax only the belief-propagation half (multipliers and susceptibilities
/// frozen) until `tol` or `max_iterations`. Returns `(iterations, residual)`.
/// This is the map whose derivative the susceptibilities represent, so
/// finite-difference checks perturb a bias and call this.
pub fn relax_magnetizations(
    state: &mut CavityState,
    model: &RbmModel,
    damping: f64,
    tol: f64,
    max_iterations: usize,
) -> Result<(usize, f64)> {
    let mut residual = f64::INFINITY;
    for it in 1..=max_iterations {
        residual = bp_step(state, model, damping)?;
        if residual < tol {
            return Ok((it, residual));
        }
    }
    Ok((max_iterations, residual))
}

/// Result of [`solve`]: the final state plus convergence diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub state: CavityState,
    pub converged: bool,
    pub iterations: usize,
    /// Largest message change of the last sweep.
    pub residual: f64,
    /// `max |C_ij - C_ji|` before any symmetrization.
    pub raw_asymmetry: f64,
    /// Whether the returned covariance was symmetrized.
    pub symmetrized: bool,
}

/// Alternate bp and sp sweeps from a random initialization until the largest
/// message change drops below the tolerance. Non-convergence is reported in
/// the outcome, not as an error; the last state and residual are returned
/// either way.
pub fn solve(model: &RbmModel, config: &SolverConfig, rng: &mut RngStream) -> Result<SolveOutcome> {
    config.validate()?;
    let mut state = CavityState::init(model, config.init_amplitude, rng);
    let mut converged = false;
    let mut iterations = 0;
    let mut residual = f64::INFINITY;
    for it in 1..=config.max_iterations {
        let r_bp = bp_step(&mut state, model, config.damping)?;
        let r_sp = sp_step(&mut state, model, config.damping)?;
        residual = r_bp.max(r_sp);
        iterations = it;
        if residual < config.tolerance {
            converged = true;
            break;
        }
    }
    let mut raw_asymmetry = 0.0f64;
    for i in 0..state.n_visible {
        for k in (i + 1)..state.n_visible {
            raw_asymmetry =
                raw_asymmetry.max((state.covariance[(i, k)] - state.covariance[(k, i)]).abs());
        }
    }
    if config.symmetrize {
        let sym = 0.5 * (&state.covariance + state.covariance.transpose());
        state.covariance = sym;
    }
    Ok(SolveOutcome {
        state,
        converged,
        iterations,
        residual,
        raw_asymmetry,
        symmetrized: config.symmetrize,
    })
}

/// `max_i |C_ii - (1 - m_i^2)|`: zero at a true fixed point of the corrected
/// scheme, large when the solver was stopped early.
pub fn diagonal_consistency_residual(state: &CavityState) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..state.n_visible {
        let mi = state.magnetizations[i];
        worst = worst.max((state.covariance[(i, i)] - (1.0 - mi * mi)).abs());
    }
    worst
}
