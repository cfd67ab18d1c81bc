//! Temporal autoencoding: pretraining the delayed weights of a TRBM or CRBM
//! by treating the model as a deterministic feed-forward predictor of the
//! present frame, plus the three-stage schedule that combines it with CD.
//!
//! The forward pass uses mean-field activations only. For the TRBM each of
//! the `j` most recent past frames is first encoded through the static
//! weights, the encodings drive the present hidden layer through the delayed
//! couplings, and the static weights decode it back to a frame. For the CRBM
//! the past frames project directly onto the present hidden layer. The
//! training loss is the squared Euclidean distance between the predicted and
//! observed present frame (batch mean), minimized by plain SGD on the
//! delayed weights; static weights stay frozen here and are trained by CD in
//! the surrounding stages.

use crate::data::{windows, SequenceDataset, Window};
use crate::error::{Error, Result};
use crate::rbm::{
    self, hidden_given_visible_batch, sigmoid, static_pretrain, CdConfig, RbmParams,
    SparsityPenalty, UnitKind,
};
use crate::rng::RngStream;
use crate::temporal::{
    crbm_cd_update, trbm_cd_update, CrbmGradient, CrbmParams, ModelSpec, TemporalModel,
    TrbmGradient, TrbmParams, WindowBatch,
};
use ndarray::{Array1, Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use std::ops::Range;

/// Activation applied to the predicted frame. The mean of a binary visible
/// layer is a sigmoid of its pre-activation; for Gaussian (z-scored,
/// unbounded) data the conditional mean is linear, so Identity is the
/// default there and Sigmoid remains available as a flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputActivation {
    Sigmoid,
    Identity,
}

/// Hyperparameters of the autoencoding stage.
#[derive(Debug, Clone, PartialEq)]
pub struct TaConfig {
    /// Epochs spent at each progressive depth `j = 1..=T`.
    pub epochs_per_delay: usize,
    pub learning_rate: f64,
    pub minibatch_size: usize,
    /// Also descend on the static biases (shared across layers).
    pub update_biases: bool,
    /// Experimental: also descend on the static weight matrix. Off by
    /// default — the staged schedule trains static weights by CD.
    pub update_static: bool,
    pub output_activation: OutputActivation,
    /// Cap on the global L2 norm of each minibatch gradient; steps whose
    /// gradient exceeds it are scaled down to this norm. Delayed-weights-only
    /// pretraining stays far below any reasonable cap, but full-depth
    /// supervised training of all weights (the deterministic baseline) can
    /// blow up under plain SGD, and the cap keeps those runs finite. `None`
    /// disables clipping.
    pub max_grad_norm: Option<f64>,
}

impl TaConfig {
    /// Defaults for a visible-unit kind: 50 epochs per delay, minibatches of
    /// 100, delayed weights only, output activation matching the unit kind.
    pub fn default_for(kind: UnitKind) -> Self {
        Self {
            epochs_per_delay: 50,
            learning_rate: 0.2,
            minibatch_size: 100,
            update_biases: false,
            update_static: false,
            output_activation: match kind {
                UnitKind::Binary => OutputActivation::Sigmoid,
                UnitKind::Gaussian => OutputActivation::Identity,
            },
            max_grad_norm: Some(5.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "autoencoding learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.minibatch_size == 0 {
            return Err(Error::InvalidParameter("minibatch size must be >= 1".into()));
        }
        if let Some(cap) = self.max_grad_norm {
            if cap <= 0.0 || !cap.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "gradient norm cap must be positive, got {cap}"
                )));
            }
        }
        Ok(())
    }
}

/// Squared Euclidean distance between an observed and a predicted frame.
pub fn ta_loss(truth: ArrayView1<f64>, prediction: ArrayView1<f64>) -> Result<f64> {
    if truth.len() != prediction.len() {
        return Err(Error::DimensionMismatch(format!(
            "frame of length {} against prediction of length {}",
            truth.len(),
            prediction.len()
        )));
    }
    Ok(truth
        .iter()
        .zip(prediction.iter())
        .map(|(t, p)| (t - p) * (t - p))
        .sum())
}

/// Mean per-window squared distance over a batch.
fn batch_loss(truth: &Array2<f64>, prediction: &Array2<f64>) -> f64 {
    let q = truth.nrows() as f64;
    (truth - prediction).mapv(|d| d * d).sum() / q
}

fn apply_output_activation(act: &mut Array2<f64>, a: OutputActivation) {
    if a == OutputActivation::Sigmoid {
        act.mapv_inplace(sigmoid);
    }
}

/// Layer activations of one forward pass over a batch.
struct ForwardPass {
    /// Encodings of the past frames, index `d-1` for delay `d`; only the
    /// `active_delays` first entries are populated (TRBM only, empty for the
    /// CRBM whose past frames feed the hidden layer directly).
    delayed_hidden: Vec<Array2<f64>>,
    /// Present hidden activations, `Q x M`.
    hidden: Array2<f64>,
    /// Predicted present frames, `Q x N`.
    prediction: Array2<f64>,
}

/// Cached activations returned by the forward operations, consumed by the
/// matching backprop update. The fingerprint ties the cache to the exact
/// parameters and batch it was computed from.
pub struct TaCache {
    active_delays: usize,
    stamp: u64,
    pass: ForwardPass,
}

impl TaCache {
    pub fn active_delays(&self) -> usize {
        self.active_delays
    }

    /// Predicted present frames, one row per window.
    pub fn prediction(&self) -> &Array2<f64> {
        &self.pass.prediction
    }
}

fn check_active_delays(order: usize, j: usize) -> Result<()> {
    if j < 1 || j > order {
        return Err(Error::InvalidParameter(format!(
            "active delay depth {j} outside 1..={order}"
        )));
    }
    Ok(())
}

// --- fingerprinting -------------------------------------------------------

fn fnv_bytes(h: &mut u64, bytes: &[u8]) {
    for &b in bytes {
        *h ^= b as u64;
        *h = h.wrapping_mul(0x100_0000_01b3);
    }
}

fn fnv_f64s<'a>(h: &mut u64, xs: impl Iterator<Item = &'a f64>) {
    for x in xs {
        fnv_bytes(h, &x.to_bits().to_le_bytes());
    }
}

fn stamp_common(h: &mut u64, base: &RbmParams, batch: &WindowBatch, j: usize) {
    fnv_bytes(h, &(j as u64).to_le_bytes());
    fnv_bytes(h, &(batch.len() as u64).to_le_bytes());
    fnv_f64s(h, base.weights.iter());
    fnv_f64s(h, base.visible_bias.iter());
    fnv_f64s(h, base.hidden_bias.iter());
    fnv_f64s(h, batch.present.iter());
    for d in 0..j {
        fnv_f64s(h, batch.past_by_delay[d].iter());
    }
}

fn stamp_trbm(m: &TrbmParams, batch: &WindowBatch, j: usize) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325;
    fnv_bytes(&mut h, b"trbm");
    stamp_common(&mut h, &m.base, batch, j);
    for d in 0..j {
        fnv_f64s(&mut h, m.delayed_hidden[d].iter());
    }
    h
}

fn stamp_crbm(m: &CrbmParams, batch: &WindowBatch, j: usize) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325;
    fnv_bytes(&mut h, b"crbm");
    stamp_common(&mut h, &m.base, batch, j);
    for d in 0..j {
        fnv_f64s(&mut h, m.delayed_to_hidden[d].iter());
    }
    h
}

// --- forward passes -------------------------------------------------------

fn forward_trbm(m: &TrbmParams, batch: &WindowBatch, j: usize, out: OutputActivation) -> Result<ForwardPass> {
    check_active_delays(m.order(), j)?;
    let q = batch.len();
    let mut delayed_hidden = Vec::with_capacity(j);
    let mut pre = Array2::zeros((q, m.base.n_hidden()));
    for d in 1..=j {
        let h = hidden_given_visible_batch(&m.base, batch.past_by_delay[d - 1].view(), None)?;
        pre += &h.dot(&m.delayed_hidden[d - 1].t());
        delayed_hidden.push(h);
    }
    pre += &m.base.hidden_bias;
    pre.mapv_inplace(sigmoid);
    let hidden = pre;

    let mut prediction = hidden.dot(&m.base.weights.t());
    prediction += &m.base.visible_bias;
    apply_output_activation(&mut prediction, out);
    Ok(ForwardPass {
        delayed_hidden,
        hidden,
        prediction,
    })
}

fn forward_crbm(m: &CrbmParams, batch: &WindowBatch, j: usize, out: OutputActivation) -> Result<ForwardPass> {
    check_active_delays(m.order(), j)?;
    let q = batch.len();
    let mut pre = Array2::zeros((q, m.base.n_hidden()));
    for d in 1..=j {
        pre += &batch.past_by_delay[d - 1].dot(&m.delayed_to_hidden[d - 1]);
    }
    pre += &m.base.hidden_bias;
    pre.mapv_inplace(sigmoid);
    let hidden = pre;

    let mut prediction = hidden.dot(&m.base.weights.t());
    prediction += &m.base.visible_bias;
    apply_output_activation(&mut prediction, out);
    Ok(ForwardPass {
        delayed_hidden: Vec::new(),
        hidden,
        prediction,
    })
}

/// Deterministic prediction of the present frame from the `active_delays`
/// most recent past frames of a single window (TRBM).
pub fn ta_forward_trbm(
    m: &TrbmParams,
    past: &crate::temporal::HistoryWindow,
    active_delays: usize,
    out: OutputActivation,
) -> Result<(Array1<f64>, TaCache)> {
    m.validate()?;
    let batch = WindowBatch::from_history(past);
    let (pred, cache) = ta_forward_trbm_batch(m, &batch, active_delays, out)?;
    Ok((pred.row(0).to_owned(), cache))
}

/// Batched TRBM forward pass; one prediction row per window.
pub fn ta_forward_trbm_batch(
    m: &TrbmParams,
    batch: &WindowBatch,
    active_delays: usize,
    out: OutputActivation,
) -> Result<(Array2<f64>, TaCache)> {
    let pass = forward_trbm(m, batch, active_delays, out)?;
    let prediction = pass.prediction.clone();
    Ok((
        prediction,
        TaCache {
            active_delays,
            stamp: stamp_trbm(m, batch, active_delays),
            pass,
        },
    ))
}

/// Deterministic prediction of the present frame from the `active_delays`
/// most recent past frames of a single window (CRBM). The autoregressive
/// visible-to-visible matrices do not participate.
pub fn ta_forward_crbm(
    m: &CrbmParams,
    past: &crate::temporal::HistoryWindow,
    active_delays: usize,
    out: OutputActivation,
) -> Result<(Array1<f64>, TaCache)> {
    m.validate()?;
    let batch = WindowBatch::from_history(past);
    let (pred, cache) = ta_forward_crbm_batch(m, &batch, active_delays, out)?;
    Ok((pred.row(0).to_owned(), cache))
}

/// Batched CRBM forward pass; one prediction row per window.
pub fn ta_forward_crbm_batch(
    m: &CrbmParams,
    batch: &WindowBatch,
    active_delays: usize,
    out: OutputActivation,
) -> Result<(Array2<f64>, TaCache)> {
    let pass = forward_crbm(m, batch, active_delays, out)?;
    let prediction = pass.prediction.clone();
    Ok((
        prediction,
        TaCache {
            active_delays,
            stamp: stamp_crbm(m, batch, active_delays),
            pass,
        },
    ))
}

/// Deterministic full-depth prediction for either architecture (the
/// evaluation harness's deterministic mode).
pub fn ta_predict(model: &TemporalModel, batch: &WindowBatch, out: OutputActivation) -> Result<Array2<f64>> {
    match model {
        TemporalModel::Trbm(m) => Ok(forward_trbm(m, batch, m.order(), out)?.prediction),
        TemporalModel::Crbm(m) => Ok(forward_crbm(m, batch, m.order(), out)?.prediction),
    }
}

// --- backward passes ------------------------------------------------------

/// Derivative factor through the output activation, applied to the loss
/// derivative with respect to the prediction.
fn output_delta(
    truth: &Array2<f64>,
    pass: &ForwardPass,
    out: OutputActivation,
) -> Array2<f64> {
    let q = truth.nrows() as f64;
    let mut delta = (&pass.prediction - truth) * (2.0 / q);
    if out == OutputActivation::Sigmoid {
        delta *= &pass.prediction.mapv(|p| p * (1.0 - p));
    }
    delta
}

fn backward_trbm(
    m: &TrbmParams,
    batch: &WindowBatch,
    pass: &ForwardPass,
    j: usize,
    cfg: &TaConfig,
) -> (f64, TrbmGradient) {
    let loss = batch_loss(&batch.present, &pass.prediction);
    let mut grad = TrbmGradient::zeros_like(m);

    let g_out = output_delta(&batch.present, pass, cfg.output_activation);
    if cfg.update_biases {
        grad.rbm.visible_bias = g_out.sum_axis(Axis(0));
    }
    if cfg.update_static {
        grad.rbm.weights = g_out.t().dot(&pass.hidden);
    }

    // present hidden layer
    let mut delta_h = g_out.dot(&m.base.weights);
    delta_h *= &pass.hidden.mapv(|h| h * (1.0 - h));
    if cfg.update_biases {
        grad.rbm.hidden_bias = delta_h.sum_axis(Axis(0));
    }
    for d in 1..=j {
        grad.delayed_hidden[d - 1] = delta_h.t().dot(&pass.delayed_hidden[d - 1]);
    }

    // shared parameters also act inside each past-frame encoding
    if cfg.update_biases || cfg.update_static {
        for d in 1..=j {
            let hd = &pass.delayed_hidden[d - 1];
            let mut delta_d = delta_h.dot(&m.delayed_hidden[d - 1]);
            delta_d *= &hd.mapv(|h| h * (1.0 - h));
            if cfg.update_biases {
                grad.rbm.hidden_bias += &delta_d.sum_axis(Axis(0));
            }
            if cfg.update_static {
                let vd = m
                    .base
                    .scaled_visible_batch(batch.past_by_delay[d - 1].view());
                grad.rbm.weights += &vd.t().dot(&delta_d);
            }
        }
    }
    (loss, grad)
}

fn backward_crbm(
    m: &CrbmParams,
    batch: &WindowBatch,
    pass: &ForwardPass,
    j: usize,
    cfg: &TaConfig,
) -> (f64, CrbmGradient) {
    let loss = batch_loss(&batch.present, &pass.prediction);
    let mut grad = CrbmGradient::zeros_like(m);

    let g_out = output_delta(&batch.present, pass, cfg.output_activation);
    if cfg.update_biases {
        grad.rbm.visible_bias = g_out.sum_axis(Axis(0));
    }
    if cfg.update_static {
        grad.rbm.weights = g_out.t().dot(&pass.hidden);
    }

    let mut delta_h = g_out.dot(&m.base.weights);
    delta_h *= &pass.hidden.mapv(|h| h * (1.0 - h));
    if cfg.update_biases {
        grad.rbm.hidden_bias = delta_h.sum_axis(Axis(0));
    }
    for d in 1..=j {
        grad.delayed_to_hidden[d - 1] = batch.past_by_delay[d - 1].t().dot(&delta_h);
    }
    (loss, grad)
}

/// Batch loss and its exact gradient at depth `active_delays` (TRBM).
/// Inactive delays receive exactly zero gradient; static weights and biases
/// are populated only under the corresponding config flags.
pub fn ta_gradient_trbm(
    m: &TrbmParams,
    batch: &WindowBatch,
    active_delays: usize,
    cfg: &TaConfig,
) -> Result<(f64, TrbmGradient)> {
    cfg.validate()?;
    m.validate()?;
    let pass = forward_trbm(m, batch, active_delays, cfg.output_activation)?;
    Ok(backward_trbm(m, batch, &pass, active_delays, cfg))
}

/// Batch loss and its exact gradient at depth `active_delays` (CRBM). The
/// visible-to-visible matrices never receive gradient here.
pub fn ta_gradient_crbm(
    m: &CrbmParams,
    batch: &WindowBatch,
    active_delays: usize,
    cfg: &TaConfig,
) -> Result<(f64, CrbmGradient)> {
    cfg.validate()?;
    m.validate()?;
    let pass = forward_crbm(m, batch, active_delays, cfg.output_activation)?;
    Ok(backward_crbm(m, batch, &pass, active_delays, cfg))
}

fn sum_sq(a: &Array2<f64>) -> f64 {
    a.iter().map(|x| x * x).sum()
}

/// Learning rate after gradient-norm clipping: the norm is taken over
/// exactly the blocks the step will touch, so frozen blocks never dilute it.
fn clipped_eta(applied_sq_norm: f64, cfg: &TaConfig) -> f64 {
    let eta = cfg.learning_rate;
    match cfg.max_grad_norm {
        Some(cap) => {
            let norm = applied_sq_norm.sqrt();
            if norm > cap {
                eta * cap / norm
            } else {
                eta
            }
        }
        None => eta,
    }
}

fn apply_trbm_step(m: &mut TrbmParams, grad: &TrbmGradient, cfg: &TaConfig) {
    let mut sq = grad.delayed_hidden.iter().map(sum_sq).sum::<f64>();
    if cfg.update_static {
        sq += sum_sq(&grad.rbm.weights);
    }
    if cfg.update_biases {
        sq += grad.rbm.visible_bias.iter().map(|x| x * x).sum::<f64>();
        sq += grad.rbm.hidden_bias.iter().map(|x| x * x).sum::<f64>();
    }
    let eta = clipped_eta(sq, cfg);
    if cfg.update_static {
        m.base.weights.scaled_add(-eta, &grad.rbm.weights);
    }
    if cfg.update_biases {
        m.base.visible_bias.scaled_add(-eta, &grad.rbm.visible_bias);
        m.base.hidden_bias.scaled_add(-eta, &grad.rbm.hidden_bias);
    }
    for (w, g) in m.delayed_hidden.iter_mut().zip(&grad.delayed_hidden) {
        w.scaled_add(-eta, g);
    }
}

fn apply_crbm_step(m: &mut CrbmParams, grad: &CrbmGradient, cfg: &TaConfig) {
    let mut sq = grad.delayed_to_hidden.iter().map(sum_sq).sum::<f64>();
    if cfg.update_static {
        sq += sum_sq(&grad.rbm.weights);
    }
    if cfg.update_biases {
        sq += grad.rbm.visible_bias.iter().map(|x| x * x).sum::<f64>();
        sq += grad.rbm.hidden_bias.iter().map(|x| x * x).sum::<f64>();
    }
    let eta = clipped_eta(sq, cfg);
    if cfg.update_static {
        m.base.weights.scaled_add(-eta, &grad.rbm.weights);
    }
    if cfg.update_biases {
        m.base.visible_bias.scaled_add(-eta, &grad.rbm.visible_bias);
        m.base.hidden_bias.scaled_add(-eta, &grad.rbm.hidden_bias);
    }
    for (w, g) in m.delayed_to_hidden.iter_mut().zip(&grad.delayed_to_hidden) {
        w.scaled_add(-eta, g);
    }
}

/// Descent step from a cached forward pass (TRBM). The cache must have been
/// computed from exactly these parameters and windows; anything else is
/// rejected as stale.
pub fn ta_backprop_update_trbm(
    m: &mut TrbmParams,
    batch: &WindowBatch,
    cfg: &TaConfig,
    cache: &TaCache,
) -> Result<f64> {
    cfg.validate()?;
    if stamp_trbm(m, batch, cache.active_delays) != cache.stamp {
        return Err(Error::InvalidParameter(
            "stale activation cache: parameters or windows changed since the forward pass".into(),
        ));
    }
    let (loss, grad) = backward_trbm(m, batch, &cache.pass, cache.active_delays, cfg);
    apply_trbm_step(m, &grad, cfg);
    Ok(loss)
}

/// Descent step from a cached forward pass (CRBM); staleness as above.
pub fn ta_backprop_update_crbm(
    m: &mut CrbmParams,
    batch: &WindowBatch,
    cfg: &TaConfig,
    cache: &TaCache,
) -> Result<f64> {
    cfg.validate()?;
    if stamp_crbm(m, batch, cache.active_delays) != cache.stamp {
        return Err(Error::InvalidParameter(
            "stale activation cache: parameters or windows changed since the forward pass".into(),
        ));
    }
    let (loss, grad) = backward_crbm(m, batch, &cache.pass, cache.active_delays, cfg);
    apply_crbm_step(m, &grad, cfg);
    Ok(loss)
}

/// Fused forward + backward + SGD step at depth `active_delays`; returns the
/// pre-update batch loss. This is the training-loop entry point.
pub fn ta_sgd_step(
    model: &mut TemporalModel,
    batch: &WindowBatch,
    active_delays: usize,
    cfg: &TaConfig,
) -> Result<f64> {
    cfg.validate()?;
    match model {
        TemporalModel::Trbm(m) => {
            let pass = forward_trbm(m, batch, active_delays, cfg.output_activation)?;
            let (loss, grad) = backward_trbm(m, batch, &pass, active_delays, cfg);
            apply_trbm_step(m, &grad, cfg);
            Ok(loss)
        }
        TemporalModel::Crbm(m) => {
            let pass = forward_crbm(m, batch, active_delays, cfg.output_activation)?;
            let (loss, grad) = backward_crbm(m, batch, &pass, active_delays, cfg);
            apply_crbm_step(m, &grad, cfg);
            Ok(loss)
        }
    }
}

/// Mean batch loss of the full-depth deterministic predictor over a window
/// set (monitoring only; no updates).
pub fn ta_evaluate(model: &TemporalModel, ws: &[Window], out: OutputActivation) -> Result<f64> {
    let batch = WindowBatch::from_windows(ws)?;
    let pred = ta_predict(model, &batch, out)?;
    Ok(batch_loss(&batch.present, &pred))
}

/// `epochs` epochs of minibatch SGD at a fixed depth. Shuffle lanes are
/// keyed by `epoch_offset + e`, so callers stringing several phases together
/// on one lane stay reproducible. Returns the per-epoch mean training loss.
pub fn ta_train_at_depth(
    model: &mut TemporalModel,
    ws: &[Window],
    depth: usize,
    epochs: usize,
    cfg: &TaConfig,
    lane: &RngStream,
    epoch_offset: u64,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if ws.is_empty() {
        return Err(Error::Dataset("no training windows".into()));
    }
    let mut losses = Vec::with_capacity(epochs);
    let mut order_idx: Vec<usize> = (0..ws.len()).collect();
    for e in 0..epochs {
        let epoch_lane = lane.child(epoch_offset + e as u64);
        order_idx.shuffle(&mut epoch_lane.child(u64::MAX).rng());
        let mut loss_sum = 0.0;
        for chunk in order_idx.chunks(cfg.minibatch_size) {
            let selected: Vec<Window> = chunk.iter().map(|&i| ws[i].clone()).collect();
            let batch = WindowBatch::from_windows(&selected)?;
            let loss = ta_sgd_step(model, &batch, depth, cfg)?;
            loss_sum += loss * chunk.len() as f64;
        }
        losses.push(loss_sum / ws.len() as f64);
    }
    Ok(losses)
}

/// Progressive-depth autoencoding: for each depth `j = 1..=T`, run
/// `epochs_per_delay` epochs of minibatch SGD using the `j` most recent
/// delays. Weights learned at shallower depths persist and keep training at
/// deeper ones. Returns the per-epoch mean training loss.
pub fn ta_pretrain(
    model: &mut TemporalModel,
    ws: &[Window],
    cfg: &TaConfig,
    lane: &RngStream,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    let order = model.order();
    let mut losses = Vec::with_capacity(order * cfg.epochs_per_delay);
    for depth in 1..=order {
        let offset = (depth as u64 - 1) * cfg.epochs_per_delay as u64;
        losses.extend(ta_train_at_depth(
            model,
            ws,
            depth,
            cfg.epochs_per_delay,
            cfg,
            lane,
            offset,
        )?);
    }
    Ok(losses)
}

// --- staged training ------------------------------------------------------

/// How far a model has progressed through the training pipeline. Stored in
/// checkpoints so later stages can refuse to run out of order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum TrainingPhase {
    Fresh,
    StaticDone,
    TaDone,
    JointDone,
}

impl std::fmt::Display for TrainingPhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TrainingPhase::Fresh => "fresh",
            TrainingPhase::StaticDone => "static-done",
            TrainingPhase::TaDone => "ta-done",
            TrainingPhase::JointDone => "joint-done",
        })
    }
}

/// Training stage a metric row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Static,
    Ta,
    Joint,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Stage::Static => "static",
            Stage::Ta => "ta",
            Stage::Joint => "joint",
        })
    }
}

/// One per-epoch metrics row of the training log.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRecord {
    /// Global epoch number across all stages, starting at 1.
    pub epoch: usize,
    pub stage: Stage,
    pub loss_name: &'static str,
    pub loss_value: f64,
}

/// Epochs, learning configuration and seed for the full pipeline.
///
/// Defaults follow the reference protocol: 100 static epochs, 50
/// autoencoding epochs per delay, then 100 joint CD epochs on the
/// autoencoded path or 400 on the CD-only path — the two paths spend the
/// same 500 total epochs at order 6.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSchedule {
    pub static_epochs: usize,
    pub static_cd: CdConfig,
    pub ta: TaConfig,
    /// Joint CD epochs after autoencoding.
    pub joint_epochs: usize,
    /// Joint CD epochs when autoencoding is skipped.
    pub joint_epochs_cd_only: usize,
    pub joint_cd: CdConfig,
    /// Minibatch size of the CD stages.
    pub minibatch_size: usize,
    pub seed: u64,
}

impl TrainingSchedule {
    pub fn default_for(kind: UnitKind) -> Self {
        Self {
            static_epochs: 100,
            static_cd: CdConfig {
                steps: 1,
                learning_rate: 0.01,
                momentum: 0.9,
                visible_mean_field: false,
                sparsity: Some(SparsityPenalty::default()),
            },
            ta: TaConfig::default_for(kind),
            joint_epochs: 100,
            joint_epochs_cd_only: 400,
            // gentler rate than the static stage: joint CD fine-tunes a
            // pretrained model, and large steps undo the pretraining within
            // a few epochs
            joint_cd: CdConfig {
                steps: 1,
                learning_rate: 1e-4,
                momentum: 0.9,
                visible_mean_field: false,
                sparsity: None,
            },
            minibatch_size: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.static_cd.validate()?;
        self.joint_cd.validate()?;
        self.ta.validate()?;
        if self.minibatch_size == 0 {
            return Err(Error::InvalidParameter("minibatch size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Deterministic mean-field reconstruction error of the present frames given
/// their pasts: hidden conditional under the temporal bias, then the visible
/// mean. For the TRBM the past hidden states enter as probabilities rather
/// than samples so the proxy is noise-free.
pub fn temporal_reconstruction_mse(model: &TemporalModel, batch: &WindowBatch) -> Result<f64> {
    let recon = match model {
        TemporalModel::Trbm(m) => {
            let mut delta = Array2::zeros((batch.len(), m.base.n_hidden()));
            for d in 1..=m.order() {
                let h = hidden_given_visible_batch(&m.base, batch.past_by_delay[d - 1].view(), None)?;
                delta += &h.dot(&m.delayed_hidden[d - 1].t());
            }
            let p = hidden_given_visible_batch(&m.base, batch.present.view(), Some(&delta))?;
            rbm::visible_means_batch(&m.base, p.view(), None)?
        }
        TemporalModel::Crbm(m) => {
            let mut dh = Array2::zeros((batch.len(), m.base.n_hidden()));
            let mut dv = Array2::zeros((batch.len(), m.base.n_visible()));
            for d in 1..=m.order() {
                dh += &batch.past_by_delay[d - 1].dot(&m.delayed_to_hidden[d - 1]);
                dv += &batch.past_by_delay[d - 1].dot(&m.delayed_to_visible[d - 1]);
            }
            let p = hidden_given_visible_batch(&m.base, batch.present.view(), Some(&dh))?;
            rbm::visible_means_batch(&m.base, p.view(), Some(&dv))?
        }
    };
    let diff = &recon - &batch.present;
    Ok(diff.mapv(|d| d * d).mean().unwrap_or(0.0))
}

/// Joint CD over full windows (stage 3). Refuses to run on a model that has
/// not been statically pretrained. Returns the per-epoch reconstruction
/// proxy.
pub fn run_joint_cd(
    model: &mut TemporalModel,
    phase: &mut TrainingPhase,
    ws: &[Window],
    epochs: usize,
    cfg: &CdConfig,
    minibatch_size: usize,
    lane: &RngStream,
) -> Result<Vec<f64>> {
    if *phase < TrainingPhase::StaticDone {
        return Err(Error::Phase(
            "joint temporal CD requires static pretraining first".into(),
        ));
    }
    cfg.validate()?;
    if minibatch_size == 0 {
        return Err(Error::InvalidParameter("minibatch size must be >= 1".into()));
    }
    if ws.is_empty() {
        return Err(Error::Dataset("no training windows".into()));
    }

    let mut vel_trbm = match model {
        TemporalModel::Trbm(m) => Some(TrbmGradient::zeros_like(m)),
        TemporalModel::Crbm(_) => None,
    };
    let mut vel_crbm = match model {
        TemporalModel::Crbm(m) => Some(CrbmGradient::zeros_like(m)),
        TemporalModel::Trbm(_) => None,
    };

    let mut order_idx: Vec<usize> = (0..ws.len()).collect();
    let mut metrics = Vec::with_capacity(epochs);
    for epoch in 0..epochs {
        let epoch_lane = lane.child(epoch as u64);
        order_idx.shuffle(&mut epoch_lane.child(u64::MAX).rng());
        for (batch_no, chunk) in order_idx.chunks(minibatch_size).enumerate() {
            let selected: Vec<Window> = chunk.iter().map(|&i| ws[i].clone()).collect();
            let batch = WindowBatch::from_windows(&selected)?;
            let batch_lane = epoch_lane.child(batch_no as u64);
            match model {
                TemporalModel::Trbm(m) => {
                    trbm_cd_update(m, &batch, cfg, vel_trbm.as_mut().unwrap(), &batch_lane)?;
                }
                TemporalModel::Crbm(m) => {
                    crbm_cd_update(m, &batch, cfg, vel_crbm.as_mut().unwrap(), &batch_lane)?;
                }
            }
        }
        let full = WindowBatch::from_windows(ws)?;
        metrics.push(temporal_reconstruction_mse(model, &full)?);
    }
    *phase = TrainingPhase::JointDone;
    Ok(metrics)
}

/// Result of the staged pipeline.
#[derive(Debug, Clone)]
pub struct StagedOutcome {
    pub model: TemporalModel,
    pub phase: TrainingPhase,
    pub metrics: Vec<MetricRecord>,
}

/// Run the full training pipeline on `dataset[train_range]`.
///
/// With `use_ta`: static CD pretraining of the slice RBM, progressive-depth
/// autoencoding of the delayed weights, then joint CD over all parameters.
/// Without it, the autoencoding stage is replaced by additional joint CD
/// epochs so both paths consume the same budget under default settings. Both
/// paths share the stage-1 trajectory bit for bit under the same seed.
pub fn train_staged(
    spec: &ModelSpec,
    dataset: &SequenceDataset,
    train_range: Range<usize>,
    schedule: &TrainingSchedule,
    use_ta: bool,
) -> Result<StagedOutcome> {
    schedule.validate()?;
    if spec.hidden_units == 0 {
        return Err(Error::InvalidParameter("hidden_units must be >= 1".into()));
    }
    let root = RngStream::new(schedule.seed);
    let mut base = RbmParams::random(
        dataset.dim(),
        spec.hidden_units,
        spec.visible,
        &mut root.child(0).rng(),
    );

    let frames = dataset
        .frames
        .slice(ndarray::s![train_range.start..train_range.end, ..]);
    let mut metrics = Vec::new();
    let mut epoch = 0usize;

    // stage 1: static slice model
    let static_losses = static_pretrain(
        &mut base,
        frames,
        schedule.static_epochs,
        schedule.minibatch_size,
        &schedule.static_cd,
        &root.child(1),
    )?;
    for loss in static_losses {
        epoch += 1;
        metrics.push(MetricRecord {
            epoch,
            stage: Stage::Static,
            loss_name: "recon_mse",
            loss_value: loss,
        });
    }

    let mut model = TemporalModel::from_static(spec.kind, base, spec.order);
    let mut phase = TrainingPhase::StaticDone;
    let ws = windows(dataset, spec.order, train_range)?;

    // stage 2: autoencode the delayed weights
    if use_ta {
        let ta_losses = ta_pretrain(&mut model, &ws, &schedule.ta, &root.child(2))?;
        for loss in ta_losses {
            epoch += 1;
            metrics.push(MetricRecord {
                epoch,
                stage: Stage::Ta,
                loss_name: "ta_loss",
                loss_value: loss,
            });
        }
        phase = TrainingPhase::TaDone;
    }

    // stage 3: joint CD over all parameters
    let joint_epochs = if use_ta {
        schedule.joint_epochs
    } else {
        schedule.joint_epochs_cd_only
    };
    let joint_losses = run_joint_cd(
        &mut model,
        &mut phase,
        &ws,
        joint_epochs,
        &schedule.joint_cd,
        schedule.minibatch_size,
        &root.child(3),
    )?;
    for loss in joint_losses {
        epoch += 1;
        metrics.push(MetricRecord {
            epoch,
            stage: Stage::Joint,
            loss_name: "recon_mse",
            loss_value: loss,
        });
    }

    Ok(StagedOutcome {
        model,
        phase,
        metrics,
    })
}

/// Number of parameters the deterministic forward network uses: static
/// weights, both bias vectors, and the delayed matrices feeding the hidden
/// layer. The CRBM's visible-to-visible matrices are not part of that
/// network.
pub fn ta_parameter_count(model: &TemporalModel) -> usize {
    let base = model.base();
    let static_count = base.weights.len() + base.visible_bias.len() + base.hidden_bias.len();
    let delayed: usize = match model {
        TemporalModel::Trbm(m) => m.delayed_hidden.iter().map(|w| w.len()).sum(),
        TemporalModel::Crbm(m) => m.delayed_to_hidden.iter().map(|w| w.len()).sum(),
    };
    static_count + delayed
}
