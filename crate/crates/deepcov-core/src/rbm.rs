//! Restricted Boltzmann machines over ±1 units and their greedy stacking into
//! deep belief networks.
//!
//! The energy is `E(s, v) = -sum_ia s_a w_ia v_i - sum_a b^h_a s_a
//! - sum_i b^v_i v_i`, so both conditionals factorize and the conditional
//! mean of a unit is the `tanh` of its field. Training follows CD-1: the
//! data-side statistics use exact conditional hidden means, the model side
//! pairs the sampled binary hidden state with the reconstructed visible
//! means. Deeper RBMs are trained on the mean activities of the layer below.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::ensembles::LayerWeights;
use crate::error::{Error, Result};
use crate::math;
use crate::meanfield::{propagate_moments, LayerMoments};
use crate::metrics;
use crate::montecarlo::column_moments;
use crate::numerics::{QuadratureRule, RngStream};
use rand::RngCore;

/// Weights and biases of one RBM. Weight entry `(i, a)` couples visible unit
/// `i` to hidden unit `a`.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmModel {
    pub weights: DMatrix<f64>,
    pub visible_bias: DVector<f64>,
    pub hidden_bias: DVector<f64>,
}

impl RbmModel {
    pub fn new(
        weights: DMatrix<f64>,
        visible_bias: DVector<f64>,
        hidden_bias: DVector<f64>,
    ) -> Result<Self> {
        if weights.nrows() != visible_bias.len() || weights.ncols() != hidden_bias.len() {
            return Err(Error::dims(format!(
                "weights {}x{} vs biases {}/{}",
                weights.nrows(),
                weights.ncols(),
                visible_bias.len(),
                hidden_bias.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite())
            || visible_bias.iter().any(|b| !b.is_finite())
            || hidden_bias.iter().any(|b| !b.is_finite())
        {
            return Err(Error::domain("non-finite RBM parameter"));
        }
        Ok(Self {
            weights,
            visible_bias,
            hidden_bias,
        })
    }

    pub fn n_visible(&self) -> usize {
        self.weights.nrows()
    }

    pub fn n_hidden(&self) -> usize {
        self.weights.ncols()
    }

    /// The deterministic feedforward view of the RBM used for moment
    /// propagation: `h = tanh(w^T v + b^h)`.
    pub fn as_feedforward_layer(&self) -> LayerWeights {
        LayerWeights {
            weights: self.weights.transpose(),
            biases: self.hidden_bias.clone(),
        }
    }
}

/// Draw a random RBM with weights `N(0, g/N_v)` and biases `N(0, sigma_b)`.
pub fn sample_rbm(
    n_visible: usize,
    n_hidden: usize,
    g: f64,
    sigma_b: f64,
    rng: &mut RngStream,
) -> Result<RbmModel> {
    if n_visible == 0 || n_hidden == 0 {
        return Err(Error::invalid("RBM needs at least one unit per layer"));
    }
    if !(g > 0.0) || !(sigma_b >= 0.0) {
        return Err(Error::invalid("need g > 0 and sigma_b >= 0"));
    }
    let w_sd = math::sqrt(g / n_visible as f64);
    let b_sd = math::sqrt(sigma_b);
    Ok(RbmModel {
        weights: DMatrix::from_fn(n_visible, n_hidden, |_, _| w_sd * rng.normal()),
        visible_bias: DVector::from_fn(n_visible, |_, _| b_sd * rng.normal()),
        hidden_bias: DVector::from_fn(n_hidden, |_, _| b_sd * rng.normal()),
    })
}

fn check_activity_range(v: &DMatrix<f64>, what: &str) -> Result<()> {
    if v.iter().any(|&x| !(x.abs() <= 1.0)) {
        return Err(Error::invalid(format!("{what} entries must lie in [-1, 1]")));
    }
    Ok(())
}

/// Hidden fields `theta_a = [w^T v]_a + b^h_a` for a batch (one column per
/// sample).
pub fn hidden_fields(model: &RbmModel, visible: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if visible.nrows() != model.n_visible() {
        return Err(Error::dims(format!(
            "visible width {} vs model {}",
            visible.nrows(),
            model.n_visible()
        )));
    }
    let mut theta = model.weights.transpose() * visible;
    for j in 0..theta.ncols() {
        let mut col = theta.column_mut(j);
        col += &model.hidden_bias;
    }
    Ok(theta)
}

/// Visible fields `[w s]_i + b^v_i` for a batch of hidden states.
pub fn visible_fields(model: &RbmModel, hidden: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if hidden.nrows() != model.n_hidden() {
        return Err(Error::dims(format!(
            "hidden width {} vs model {}",
            hidden.nrows(),
            model.n_hidden()
        )));
    }
    let mut phi = &model.weights * hidden;
    for j in 0..phi.ncols() {
        let mut col = phi.column_mut(j);
        col += &model.visible_bias;
    }
    Ok(phi)
}

/// Per-unit probability that a hidden unit is `+1` given a visible vector:
/// `p(s_a = +1 | v) = e^{theta_a} / (2 cosh theta_a) = (1 + tanh theta_a)/2`.
pub fn hidden_conditional(model: &RbmModel, visible: &DVector<f64>) -> Result<DVector<f64>> {
    let v = DMatrix::from_column_slice(visible.len(), 1, visible.as_slice());
    check_activity_range(&v, "visible")?;
    let theta = hidden_fields(model, &v)?;
    Ok(DVector::from_fn(model.n_hidden(), |a, _| {
        0.5 * (1.0 + math::tanh(theta[(a, 0)]))
    }))
}

/// Per-unit probability that a visible unit is `+1` given a hidden vector.
pub fn visible_conditional(model: &RbmModel, hidden: &DVector<f64>) -> Result<DVector<f64>> {
    let s = DMatrix::from_column_slice(hidden.len(), 1, hidden.as_slice());
    check_activity_range(&s, "hidden")?;
    let phi = visible_fields(model, &s)?;
    Ok(DVector::from_fn(model.n_visible(), |i, _| {
        0.5 * (1.0 + math::tanh(phi[(i, 0)]))
    }))
}

/// Conditional hidden means `tanh(theta_a)` for a batch.
pub fn hidden_mean_batch(model: &RbmModel, visible: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut theta = hidden_fields(model, visible)?;
    theta.apply(|x| *x = math::tanh(*x));
    Ok(theta)
}

/// Conditional visible means `tanh([w s]_i + b^v_i)` for a batch.
pub fn visible_mean_batch(model: &RbmModel, hidden: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut phi = visible_fields(model, hidden)?;
    phi.apply(|x| *x = math::tanh(*x));
    Ok(phi)
}

fn sample_spins_from_means(means: &DMatrix<f64>, rng: &mut RngStream) -> DMatrix<f64> {
    DMatrix::from_fn(means.nrows(), means.ncols(), |i, j| {
        rng.spin(0.5 * (1.0 + means[(i, j)]))
    })
}

/// Block-Gibbs protocol for drawing visible samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GibbsConfig {
    /// Full sweeps discarded before the first retained sample.
    pub burn_in: usize,
    /// Sweeps between retained samples.
    pub thinning: usize,
    /// Samples drawn per independent chain.
    pub samples_per_chain: usize,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        Self {
            burn_in: 1_000,
            thinning: 10,
            samples_per_chain: 10_000,
        }
    }
}

/// Run one Gibbs chain and return `count` visible samples as columns.
pub fn gibbs_chain(
    model: &RbmModel,
    count: usize,
    config: &GibbsConfig,
    rng: &mut RngStream,
) -> Result<DMatrix<f64>> {
    let n_v = model.n_visible();
    let mut v = DMatrix::from_fn(n_v, 1, |_, _| rng.spin(0.5));
    let sweep = |v: &mut DMatrix<f64>, rng: &mut RngStream| -> Result<()> {
        let h_mean = hidden_mean_batch(model, v)?;
        let s = sample_spins_from_means(&h_mean, rng);
        let v_mean = visible_mean_batch(model, &s)?;
        *v = sample_spins_from_means(&v_mean, rng);
        Ok(())
    };
    for _ in 0..config.burn_in {
        sweep(&mut v, rng)?;
    }
    let mut out = DMatrix::<f64>::zeros(n_v, count);
    for k in 0..count {
        for _ in 0..config.thinning.max(1) {
            sweep(&mut v, rng)?;
        }
        out.column_mut(k).copy_from(&v.column(0));
    }
    Ok(out)
}

/// Draw `samples` visible configurations via block Gibbs sampling, split over
/// independent chains of at most `samples_per_chain` draws. Chain `c` uses
/// `rng.substream(c)`, so the result is reproducible and chains may be run
/// in parallel externally with identical output.
pub fn gibbs_generate(
    model: &RbmModel,
    samples: usize,
    config: &GibbsConfig,
    rng: &RngStream,
) -> Result<DMatrix<f64>> {
    if samples == 0 {
        return Err(Error::invalid("need at least one sample"));
    }
    let per_chain = config.samples_per_chain.max(1);
    let chains = samples.div_ceil(per_chain);
    let mut out = DMatrix::<f64>::zeros(model.n_visible(), samples);
    let mut filled = 0;
    for c in 0..chains {
        let count = per_chain.min(samples - filled);
        let mut chain_rng = rng.substream(c as u64);
        let block = gibbs_chain(model, count, config, &mut chain_rng)?;
        out.columns_mut(filled, count).copy_from(&block);
        filled += count;
    }
    Ok(out)
}

/// One CD parameter update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdStep {
    pub eta: f64,
    pub weight_decay: f64,
    /// Gibbs steps for the model-side statistics (1 = CD-1).
    pub steps: usize,
}

/// Contrastive-divergence gradients `(data - model)` for weights and biases.
///
/// Data-side statistics use the exact conditional hidden means; the model
/// side pairs the sampled binary hidden state with the reconstructed visible
/// means after `steps` Gibbs half-sweeps.
pub fn cd_gradients(
    model: &RbmModel,
    batch: &DMatrix<f64>,
    steps: usize,
    rng: &mut RngStream,
) -> Result<(DMatrix<f64>, DVector<f64>, DVector<f64>)> {
    check_activity_range(batch, "batch")?;
    let b = batch.ncols();
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let scale = 1.0 / b as f64;

    let h_mean = hidden_mean_batch(model, batch)?;
    let mut s = sample_spins_from_means(&h_mean, rng);
    let mut v_recon = visible_mean_batch(model, &s)?;
    for _ in 1..steps.max(1) {
        let h_next = hidden_mean_batch(model, &v_recon)?;
        s = sample_spins_from_means(&h_next, rng);
        v_recon = visible_mean_batch(model, &s)?;
    }

    let grad_w = (batch * h_mean.transpose() - &v_recon * s.transpose()) * scale;
    let mut grad_bv = DVector::<f64>::zeros(model.n_visible());
    let mut grad_bh = DVector::<f64>::zeros(model.n_hidden());
    for j in 0..b {
        grad_bv += batch.column(j) - v_recon.column(j);
        grad_bh += h_mean.column(j) - s.column(j);
    }
    grad_bv *= scale;
    grad_bh *= scale;
    Ok((grad_w, grad_bv, grad_bh))
}

/// Apply one CD update with l2 weight decay on the weights only.
pub fn cd1_update(
    model: &mut RbmModel,
    batch: &DMatrix<f64>,
    step: &CdStep,
    rng: &mut RngStream,
) -> Result<()> {
    let (grad_w, grad_bv, grad_bh) = cd_gradients(model, batch, step.steps, rng)?;
    model.weights += step.eta * (grad_w - step.weight_decay * &model.weights);
    model.visible_bias += step.eta * grad_bv;
    model.hidden_bias += step.eta * grad_bh;
    Ok(())
}

/// Mean squared reconstruction error of one deterministic mean-field pass
/// (visible -> hidden means -> visible means), averaged over the batch.
pub fn reconstruction_error(model: &RbmModel, batch: &DMatrix<f64>) -> Result<f64> {
    let h = hidden_mean_batch(model, batch)?;
    let v = visible_mean_batch(model, &h)?;
    let mut err = 0.0;
    for j in 0..batch.ncols() {
        err += (v.column(j) - batch.column(j)).norm_squared();
    }
    Ok(err / batch.ncols() as f64)
}

/// CD-1 training schedule (the learning rate at epoch `t >= 1` is
/// `eta0 / ceil(t/10)`).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub eta0: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub cd_steps: usize,
    /// Stop when the error has not improved by `min_improvement` for this
    /// many consecutive epochs.
    pub patience: usize,
    pub min_improvement: f64,
    /// Record a parameter snapshot every this many epochs.
    pub snapshot_interval: Option<usize>,
    /// Standard deviation of the initial Gaussian weights.
    pub init_weight_sd: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta0: 0.12,
            weight_decay: 0.0025,
            batch_size: 150,
            max_epochs: 50,
            cd_steps: 1,
            patience: 5,
            min_improvement: 1e-4,
            snapshot_interval: None,
            init_weight_sd: 0.01,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0 > 0.0) {
            return Err(Error::invalid("eta0 must be positive"));
        }
        if self.batch_size == 0 || self.max_epochs == 0 || self.cd_steps == 0 {
            return Err(Error::invalid(
                "batch size, epoch cap and CD steps must be positive",
            ));
        }
        Ok(())
    }

    /// `eta0 / ceil(t / 10)` at epoch `t` (1-based).
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        self.eta0 / ((epoch + 9) / 10) as f64
    }
}

/// Optional per-epoch dimensionality tracking: the input moments are pushed
/// through the feedforward view of the current model and the participation
/// ratio of the resulting covariance is recorded.
#[derive(Debug, Clone)]
pub struct DimTracker {
    pub input: LayerMoments,
    pub rule: QuadratureRule,
}

impl DimTracker {
    fn estimate(&self, model: &RbmModel) -> Result<f64> {
        let layer = model.as_feedforward_layer();
        let moments = propagate_moments(&layer, &self.input, &self.rule)?;
        let (d, _) = metrics::dimensionality(moments.cov())?;
        Ok(d)
    }
}

/// One epoch of the training log. Epoch 0 records the freshly initialized
/// model before any update.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub learning_rate: f64,
    pub reconstruction_error: f64,
    pub dimensionality: Option<f64>,
}

/// Full log of one RBM's training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    pub snapshots: Vec<(usize, RbmModel)>,
    /// True when training stopped with a non-decreasing error over the whole
    /// patience window (flagged, not fatal).
    pub stalled: bool,
}

impl TrainLog {
    pub fn final_error(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |e| e.reconstruction_error)
    }

    pub fn initial_error(&self) -> f64 {
        self.epochs.first().map_or(f64::NAN, |e| e.reconstruction_error)
    }
}

fn shuffled_indices(count: usize, rng: &mut RngStream) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..count).collect();
    for i in (1..count).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        idx.swap(i, j);
    }
    idx
}

fn gather_columns(data: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(data.nrows(), idx.len(), |i, k| data[(i, idx[k])])
}

/// Train one RBM with CD-1 on ±1 data or mean activities in `[-1, 1]`
/// (one column per example).
pub fn train_rbm(
    data: &DMatrix<f64>,
    n_hidden: usize,
    config: &TrainConfig,
    tracker: Option<&DimTracker>,
    rng: &mut RngStream,
) -> Result<(RbmModel, TrainLog)> {
    config.validate()?;
    check_activity_range(data, "training data")?;
    let m = data.ncols();
    if m < config.batch_size {
        return Err(Error::invalid(format!(
            "dataset size {m} smaller than batch size {}",
            config.batch_size
        )));
    }
    let n_v = data.nrows();
    let mut model = RbmModel {
        weights: DMatrix::from_fn(n_v, n_hidden, |_, _| config.init_weight_sd * rng.normal()),
        visible_bias: DVector::zeros(n_v),
        hidden_bias: DVector::zeros(n_hidden),
    };

    let mut log = TrainLog {
        epochs: Vec::new(),
        snapshots: Vec::new(),
        stalled: false,
    };
    let record =
        |model: &RbmModel, epoch: usize, eta: f64, log: &mut TrainLog| -> Result<()> {
            let err = reconstruction_error(model, data)?;
            let dim = match tracker {
                Some(t) => Some(t.estimate(model)?),
                None => None,
            };
            log.epochs.push(EpochRecord {
                epoch,
                learning_rate: eta,
                reconstruction_error: err,
                dimensionality: dim,
            });
            Ok(())
        };
    record(&model, 0, 0.0, &mut log)?;

    let mut best = log.epochs[0].reconstruction_error;
    let mut since_improvement = 0usize;
    for epoch in 1..=config.max_epochs {
        let eta = config.learning_rate(epoch);
        let step = CdStep {
            eta,
            weight_decay: config.weight_decay,
            steps: config.cd_steps,
        };
        let order = shuffled_indices(m, rng);
        let mut start = 0;
        while start < m {
            let len = config.batch_size.min(m - start);
            let batch = gather_columns(data, &order[start..start + len]);
            cd1_update(&mut model, &batch, &step, rng)?;
            start += len;
        }
        record(&model, epoch, eta, &mut log)?;
        if let Some(every) = config.snapshot_interval {
            if every > 0 && epoch % every == 0 {
                log.snapshots.push((epoch, model.clone()));
            }
        }
        let err = log.epochs.last().expect("recorded").reconstruction_error;
        if err < best - config.min_improvement {
            best = err;
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= config.patience {
                let window_start =
                    log.epochs[log.epochs.len() - 1 - config.patience].reconstruction_error;
                log.stalled = err >= window_start;
                break;
            }
        }
    }
    Ok((model, log))
}

/// Result of greedy layer-wise DBN training.
#[derive(Debug, Clone, PartialEq)]
pub struct DbnTrainResult {
    pub models: Vec<RbmModel>,
    pub logs: Vec<TrainLog>,
}

/// Train a stack of RBMs bottom-up. Each higher RBM is trained on the mean
/// activities `tanh(w^T v + b^h)` of the frozen layer below; its own hidden
/// units stay stochastic binary during CD. When `dim_rule` is given, every
/// layer's log carries the per-epoch dimensionality of the representation it
/// creates.
pub fn train_dbn(
    data: &DMatrix<f64>,
    hidden_sizes: &[usize],
    config: &TrainConfig,
    dim_rule: Option<&QuadratureRule>,
    rng: &RngStream,
) -> Result<DbnTrainResult> {
    if hidden_sizes.is_empty() {
        return Err(Error::invalid("need at least one hidden layer"));
    }
    let mut models = Vec::with_capacity(hidden_sizes.len());
    let mut logs = Vec::with_capacity(hidden_sizes.len());
    let mut current = data.clone();
    for (idx, &n_h) in hidden_sizes.iter().enumerate() {
        let tracker = match dim_rule {
            Some(rule) => Some(DimTracker {
                input: column_moments(&current)?,
                rule: rule.clone(),
            }),
            None => None,
        };
        let mut layer_rng = rng.substream(idx as u64);
        let (model, log) = train_rbm(&current, n_h, config, tracker.as_ref(), &mut layer_rng)?;
        current = hidden_mean_batch(&model, &current)?;
        models.push(model);
        logs.push(log);
    }
    Ok(DbnTrainResult { models, logs })
}

const ENUMERATION_LIMIT: usize = 20;

/// Exact probabilities of all `2^{N_v}` visible configurations, indexed by
/// bitmask (bit `i` set means `v_i = +1`). The partition function exists only
/// inside this normalization. Refuses `N_v > 20`.
pub fn exact_visible_probabilities(model: &RbmModel) -> Result<Vec<f64>> {
    let n_v = model.n_visible();
    if n_v > ENUMERATION_LIMIT {
        return Err(Error::invalid(format!(
            "exact enumeration limited to {ENUMERATION_LIMIT} visible units, got {n_v}"
        )));
    }
    let n_h = model.n_hidden();
    let total = 1usize << n_v;

    // Gray-code walk: one spin flip per step keeps the hidden fields
    // incrementally updated.
    let mut v = alloc::vec![-1.0f64; n_v];
    let mut theta: Vec<f64> = (0..n_h)
        .map(|a| model.hidden_bias[a] - model.weights.column(a).sum())
        .collect();
    let mut log_w = alloc::vec![0.0f64; total];
    let mut bias_field: f64 = -model.visible_bias.sum();

    let log_weight = |bias_field: f64, theta: &[f64]| -> f64 {
        bias_field + theta.iter().map(|&t| math::ln_2cosh(t)).sum::<f64>()
    };

    let mut gray = 0usize;
    log_w[0] = log_weight(bias_field, &theta);
    for k in 1..total {
        let flip = k.trailing_zeros() as usize;
        gray ^= 1 << flip;
        let delta = -2.0 * v[flip];
        v[flip] += delta;
        bias_field += delta * model.visible_bias[flip];
        for a in 0..n_h {
            theta[a] += delta * model.weights[(flip, a)];
        }
        log_w[gray] = log_weight(bias_field, &theta);
    }

    let max = log_w.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut z = 0.0;
    for w in log_w.iter_mut() {
        *w = math::exp(*w - max);
        z += *w;
    }
    for w in log_w.iter_mut() {
        *w /= z;
    }
    Ok(log_w)
}

/// Exact mean and connected covariance of the visible marginal by full
/// enumeration. Refuses `N_v > 20`.
pub fn exact_moments(model: &RbmModel) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let probs = exact_visible_probabilities(model)?;
    let n_v = model.n_visible();
    let mut mean = DVector::<f64>::zeros(n_v);
    let mut second = DMatrix::<f64>::zeros(n_v, n_v);
    let spin = |mask: usize, i: usize| -> f64 {
        if mask & (1 << i) != 0 {
            1.0
        } else {
            -1.0
        }
    };
    for (mask, &p) in probs.iter().enumerate() {
        for i in 0..n_v {
            let vi = spin(mask, i);
            mean[i] += p * vi;
            for j in i..n_v {
                second[(i, j)] += p * vi * spin(mask, j);
            }
        }
    }
    let mut cov = DMatrix::<f64>::zeros(n_v, n_v);
    for i in 0..n_v {
        for j in i..n_v {
            let c = second[(i, j)] - mean[i] * mean[j];
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok((mean, cov))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn zero_model(n_v: usize, n_h: usize) -> RbmModel {
        RbmModel {
            weights: DMatrix::zeros(n_v, n_h),
            visible_bias: DVector::zeros(n_v),
            hidden_bias: DVector::zeros(n_h),
        }
    }

    #[test]
    fn conditional_probabilities_sum_to_one_and_saturate() {
        let mut model = zero_model(2, 2);
        let v = DVector::from_vec(alloc::vec![1.0, -1.0]);
        let p = hidden_conditional(&model, &v).unwrap();
        for a in 0..2 {
            assert_abs_diff_eq!(p[a], 0.5, epsilon = 1e-15);
        }
        model.hidden_bias[0] = 50.0;
        let p = hidden_conditional(&model, &v).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-15);
        // p(+1) + p(-1) = 1 holds exactly by construction.
        let p_minus = 0.5 * (1.0 - (50.0f64).tanh());
        assert_eq!(p[0] + p_minus, 1.0);
    }

    #[test]
    fn gibbs_free_spins_are_fair() {
        let model = zero_model(4, 3);
        let cfg = GibbsConfig {
            burn_in: 10,
            thinning: 1,
            samples_per_chain: 5_000,
        };
        let samples = gibbs_generate(&model, 10_000, &cfg, &RngStream::new(41, 0)).unwrap();
        let s = samples.ncols() as f64;
        for i in 0..4 {
            let mean: f64 = samples.row(i).sum() / s;
            assert!(mean.abs() < 3.0 / s.sqrt(), "unit {i} biased: {mean}");
        }
    }

    #[test]
    fn gibbs_biased_spins_match_tanh() {
        let mut model = zero_model(3, 2);
        model.visible_bias.fill(0.5);
        let cfg = GibbsConfig {
            burn_in: 50,
            thinning: 2,
            samples_per_chain: 20_000,
        };
        let samples = gibbs_generate(&model, 20_000, &cfg, &RngStream::new(42, 0)).unwrap();
        let target = 0.5f64.tanh();
        let s = samples.ncols() as f64;
        let se = ((1.0 - target * target) / s).sqrt();
        for i in 0..3 {
            let mean: f64 = samples.row(i).sum() / s;
            assert!(
                (mean - target).abs() < 3.0 * se,
                "unit {i}: {mean} vs {target}"
            );
        }
    }

    #[test]
    fn zero_learning_rate_leaves_model_unchanged() {
        let mut rng = RngStream::new(43, 0);
        let mut model = sample_rbm(6, 5, 0.8, 0.1, &mut rng).unwrap();
        let before = model.clone();
        let batch = DMatrix::from_fn(6, 10, |_, _| rng.spin(0.5));
        let step = CdStep {
            eta: 0.0,
            weight_decay: 0.0025,
            steps: 1,
        };
        cd1_update(&mut model, &batch, &step, &mut rng).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn weight_decay_cannot_flip_a_dominant_gradient() {
        let mut rng = RngStream::new(44, 0);
        let model = sample_rbm(8, 8, 0.8, 0.1, &mut rng).unwrap();
        let batch = DMatrix::from_fn(8, 64, |_, _| rng.spin(0.5));
        let (grad_w, _, _) = cd_gradients(&model, &batch, 1, &mut rng).unwrap();
        let decay = 0.0025;
        let mut checked = 0;
        for i in 0..8 {
            for a in 0..8 {
                let g = grad_w[(i, a)];
                let reg = decay * model.weights[(i, a)];
                if g.abs() > 10.0 * reg.abs() {
                    assert_eq!((g - reg).signum(), g.signum());
                    checked += 1;
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn reconstruction_error_closed_forms() {
        let model = zero_model(5, 4);
        let zeros = DMatrix::<f64>::zeros(5, 3);
        assert_eq!(reconstruction_error(&model, &zeros).unwrap(), 0.0);
        let mut rng = RngStream::new(45, 0);
        let spins = DMatrix::from_fn(5, 7, |_, _| rng.spin(0.5));
        // Zero model reconstructs the zero vector, so the error is N_v.
        assert_abs_diff_eq!(
            reconstruction_error(&model, &spins).unwrap(),
            5.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn one_unit_reconstruction_matches_hand_computation() {
        let model = RbmModel {
            weights: DMatrix::from_element(1, 1, 2.0),
            visible_bias: DVector::zeros(1),
            hidden_bias: DVector::zeros(1),
        };
        let x = 1.0f64;
        let batch = DMatrix::from_element(1, 1, x);
        let recon = (2.0 * (2.0 * x).tanh()).tanh();
        assert_abs_diff_eq!(
            reconstruction_error(&model, &batch).unwrap(),
            (recon - x) * (recon - x),
            epsilon = 1e-15
        );
    }

    #[test]
    fn learning_rate_schedule_matches_ceiling_rule() {
        let config = TrainConfig::default();
        assert_abs_diff_eq!(config.learning_rate(1), 0.12, epsilon = 1e-15);
        assert_abs_diff_eq!(config.learning_rate(10), 0.12, epsilon = 1e-15);
        assert_abs_diff_eq!(config.learning_rate(11), 0.06, epsilon = 1e-15);
        assert_abs_diff_eq!(config.learning_rate(25), 0.04, epsilon = 1e-15);
    }

    #[test]
    fn dataset_smaller_than_batch_is_rejected() {
        let data = DMatrix::from_element(4, 10, 1.0);
        let config = TrainConfig {
            batch_size: 11,
            ..TrainConfig::default()
        };
        let res = train_rbm(&data, 3, &config, None, &mut RngStream::new(1, 1));
        assert!(res.is_err());
    }

    #[test]
    fn exact_probabilities_normalize() {
        let mut rng = RngStream::new(46, 0);
        let model = sample_rbm(6, 4, 0.8, 0.1, &mut rng).unwrap();
        let probs = exact_visible_probabilities(&model).unwrap();
        assert_eq!(probs.len(), 64);
        let sum: f64 = probs.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        let big = zero_model(21, 2);
        assert!(exact_visible_probabilities(&big).is_err());
    }

    #[test]
    fn independent_spins_have_closed_form_moments() {
        let mut model = zero_model(5, 3);
        for i in 0..5 {
            model.visible_bias[i] = 0.2 * (i as f64 + 1.0);
        }
        let (mean, cov) = exact_moments(&model).unwrap();
        for i in 0..5 {
            let t = model.visible_bias[i].tanh();
            assert_abs_diff_eq!(mean[i], t, epsilon = 1e-14);
            assert_abs_diff_eq!(cov[(i, i)], 1.0 - t * t, epsilon = 1e-14);
            for j in 0..5 {
                if i != j {
                    assert_abs_diff_eq!(cov[(i, j)], 0.0, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn two_unit_enumeration_matches_hand_sum() {
        // N_v = 2, N_h = 1: weight vector (w1, w2), fields sum by hand over
        // the four visible configurations.
        let model = RbmModel {
            weights: DMatrix::from_column_slice(2, 1, &[0.7, -0.4]),
            visible_bias: DVector::from_vec(alloc::vec![0.3, -0.1]),
            hidden_bias: DVector::from_vec(alloc::vec![0.2]),
        };
        let weight = |v1: f64, v2: f64| -> f64 {
            let theta = 0.7 * v1 - 0.4 * v2 + 0.2;
            (2.0 * theta.cosh()) * (0.3 * v1 - 0.1 * v2).exp()
        };
        let mut z = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        let mut c12 = 0.0;
        for &v1 in &[-1.0, 1.0] {
            for &v2 in &[-1.0, 1.0] {
                let w = weight(v1, v2);
                z += w;
                m1 += w * v1;
                m2 += w * v2;
                c12 += w * v1 * v2;
            }
        }
        m1 /= z;
        m2 /= z;
        c12 = c12 / z - m1 * m2;
        let (mean, cov) = exact_moments(&model).unwrap();
        assert_abs_diff_eq!(mean[0], m1, epsilon = 1e-14);
        assert_abs_diff_eq!(mean[1], m2, epsilon = 1e-14);
        assert_abs_diff_eq!(cov[(0, 1)], c12, epsilon = 1e-14);
    }

    #[test]
    fn gibbs_moments_match_enumeration_on_a_small_model() {
        let mut rng = RngStream::new(47, 0);
        let model = sample_rbm(6, 6, 0.8, 0.1, &mut rng).unwrap();
        let (mean, cov) = exact_moments(&model).unwrap();
        let cfg = GibbsConfig {
            burn_in: 200,
            thinning: 5,
            samples_per_chain: 25_000,
        };
        let s = 100_000usize;
        let samples = gibbs_generate(&model, s, &cfg, &RngStream::new(48, 0)).unwrap();
        let sf = s as f64;
        for i in 0..6 {
            let emp: f64 = samples.row(i).sum() / sf;
            let se = ((1.0 - mean[i] * mean[i]) / sf).sqrt();
            assert!(
                (emp - mean[i]).abs() < 4.0 * se,
                "mean {i}: {emp} vs {}",
                mean[i]
            );
        }
        for i in 0..6 {
            for j in (i + 1)..6 {
                let mut acc = 0.0;
                for k in 0..s {
                    acc += samples[(i, k)] * samples[(j, k)];
                }
                let emp_second = acc / sf;
                let exact_second = cov[(i, j)] + mean[i] * mean[j];
                let se = ((1.0 - exact_second * exact_second) / sf).sqrt();
                assert!(
                    (emp_second - exact_second).abs() < 4.0 * se,
                    "pair ({i},{j}): {emp_second} vs {exact_second}"
                );
            }
        }
    }

    #[test]
    fn training_is_reproducible_for_a_fixed_seed() {
        let mut data_rng = RngStream::new(49, 0);
        let data = DMatrix::from_fn(6, 60, |_, _| data_rng.spin(0.5));
        let config = TrainConfig {
            batch_size: 20,
            max_epochs: 4,
            ..TrainConfig::default()
        };
        let run = |seed: u64| {
            train_dbn(&data, &[5, 4], &config, None, &RngStream::new(seed, 7)).unwrap()
        };
        let a = run(123);
        let b = run(123);
        assert_eq!(a.models, b.models);
        assert_eq!(a.logs, b.logs);
        let c = run(124);
        assert_ne!(a.models, c.models);
    }

    #[test]
    fn single_layer_dbn_reduces_to_one_rbm_run() {
        let mut data_rng = RngStream::new(50, 0);
        let data = DMatrix::from_fn(5, 40, |_, _| data_rng.spin(0.5));
        let config = TrainConfig {
            batch_size: 10,
            max_epochs: 3,
            ..TrainConfig::default()
        };
        let master = RngStream::new(9, 3);
        let dbn = train_dbn(&data, &[4], &config, None, &master).unwrap();
        let (model, log) =
            train_rbm(&data, 4, &config, None, &mut master.substream(0)).unwrap();
        assert_eq!(dbn.models[0], model);
        assert_eq!(dbn.logs[0], log);
    }
}
