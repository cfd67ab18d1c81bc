//! Evaluation protocols: filling in the next frame of held-out windows,
//! free-running generation over a horizon with predictions fed back as
//! history, the MSE/MAPE metrics, and a deterministic MLP baseline trained
//! with the same supervised objective as the autoencoding stage.
//!
//! Everything here is reproducible: each (window, repetition, chain) triple
//! owns an RNG lane derived from the caller's lane and the window's source
//! index, so reports are bit-identical across runs and indifferent to how
//! windows are grouped into batches.

use crate::data::{windows, NormalizationStats, SequenceDataset, Window};
use crate::error::{Error, Result};
use crate::rbm::RbmParams;
use crate::rng::RngStream;
use crate::ta::{
    ta_predict, ta_train_at_depth, OutputActivation, TaConfig, TrainingSchedule,
};
use crate::temporal::{ModelKind, ModelSpec, TemporalModel, WindowBatch};
use ndarray::{Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::ops::Range;

/// How a prediction for the present frame is formed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionMode {
    /// One Gibbs chain; the prediction is the visible mean under its final
    /// hidden sample.
    SingleSample,
    /// Mean of `k` independently seeded chains.
    PosteriorMean(usize),
    /// The deterministic feed-forward pass; no sampling at all.
    Deterministic,
}

impl PredictionMode {
    pub fn validate(&self) -> Result<()> {
        if let PredictionMode::PosteriorMean(k) = self {
            if *k < 1 {
                return Err(Error::InvalidParameter(
                    "posterior mean needs at least one sample".into(),
                ));
            }
        }
        Ok(())
    }

    /// Chains drawn per repetition; a single sample is the one-chain case of
    /// the posterior mean and shares its code path.
    fn chains(&self) -> usize {
        match self {
            PredictionMode::SingleSample => 1,
            PredictionMode::PosteriorMean(k) => *k,
            PredictionMode::Deterministic => 0,
        }
    }
}

/// Default divisor floor protecting MAPE against zero targets.
pub const MAPE_EPSILON: f64 = 1e-8;

/// Shared settings of the evaluation protocols.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub mode: PredictionMode,
    /// Gibbs steps per generated frame.
    pub gibbs_steps: usize,
    /// Repetitions of the whole task entering the mean ± sd summary.
    pub repetitions: usize,
    /// Output activation of the deterministic pass.
    pub output_activation: OutputActivation,
    pub mape_epsilon: f64,
}

impl EvalConfig {
    pub fn validate(&self) -> Result<()> {
        self.mode.validate()?;
        if self.mode != PredictionMode::Deterministic && self.gibbs_steps == 0 {
            return Err(Error::InvalidParameter(
                "sampling modes need at least one Gibbs step".into(),
            ));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be >= 1".into()));
        }
        if !self.mape_epsilon.is_finite() || self.mape_epsilon <= 0.0 {
            return Err(Error::InvalidParameter(
                "MAPE epsilon must be positive".into(),
            ));
        }
        Ok(())
    }
}

impl Default for EvalConfig {
    /// Reference protocol: single sample per repetition, 100 Gibbs steps,
    /// 100 repetitions.
    fn default() -> Self {
        Self {
            mode: PredictionMode::SingleSample,
            gibbs_steps: 100,
            repetitions: 100,
            output_activation: OutputActivation::Identity,
            mape_epsilon: MAPE_EPSILON,
        }
    }
}

/// Mean squared difference over all entries, in the units of its inputs
/// (normalized units throughout this crate's reports).
pub fn mse(prediction: ArrayView2<f64>, truth: ArrayView2<f64>) -> Result<f64> {
    if prediction.dim() != truth.dim() {
        return Err(Error::DimensionMismatch(format!(
            "prediction shape {:?} against truth shape {:?}",
            prediction.dim(),
            truth.dim()
        )));
    }
    let mut sum = 0.0;
    for (p, t) in prediction.iter().zip(truth.iter()) {
        sum += (p - t) * (p - t);
    }
    Ok(sum / prediction.len() as f64)
}

/// Mean absolute percentage error: `100 · mean |t - p| / max(|t|, epsilon)`.
/// Meaningful in the data's original units, so callers denormalize first.
pub fn mape(prediction: ArrayView2<f64>, truth: ArrayView2<f64>, epsilon: f64) -> Result<f64> {
    if prediction.dim() != truth.dim() {
        return Err(Error::DimensionMismatch(format!(
            "prediction shape {:?} against truth shape {:?}",
            prediction.dim(),
            truth.dim()
        )));
    }
    let mut sum = 0.0;
    for (p, t) in prediction.iter().zip(truth.iter()) {
        sum += (t - p).abs() / t.abs().max(epsilon);
    }
    Ok(100.0 * sum / prediction.len() as f64)
}

fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Summary of one filling-in-frames evaluation.
#[derive(Debug, Clone)]
pub struct FillInReport {
    /// MSE mean and standard deviation over repetitions, normalized units.
    pub mse_mean: f64,
    pub mse_sd: f64,
    /// MAPE mean and standard deviation over repetitions, original units
    /// when normalization statistics were supplied.
    pub mape_mean: f64,
    pub mape_sd: f64,
    /// Per-window MSE, averaged over repetitions; parallel to the input
    /// window order.
    pub per_window_mse: Vec<f64>,
    /// Predicted frames averaged over repetitions, one row per window,
    /// normalized units.
    pub predictions: Array2<f64>,
    pub n_windows: usize,
    pub repetitions: usize,
}

/// One repetition's predictions for every window under the configured mode.
/// `rep` and the window ids key the RNG lanes, so the result is independent
/// of batch grouping and identical across runs.
fn predict_batch(
    model: &TemporalModel,
    batch: &WindowBatch,
    cfg: &EvalConfig,
    lane: &RngStream,
    rep: u64,
) -> Result<Array2<f64>> {
    let chains = cfg.mode.chains();
    let mut acc = Array2::zeros((batch.len(), batch.dim()));
    for chain in 0..chains {
        let mut rngs: Vec<ChaCha8Rng> = batch
            .ids
            .iter()
            .map(|&id| lane.child(id).child(rep).child(chain as u64).rng())
            .collect();
        acc += &model.generate_frames_batched(batch, cfg.gibbs_steps, false, &mut rngs)?;
    }
    acc /= chains as f64;
    Ok(acc)
}

fn per_rep_metrics(
    prediction: &Array2<f64>,
    truth: &Array2<f64>,
    truth_original: &Array2<f64>,
    norm: Option<&NormalizationStats>,
    epsilon: f64,
) -> Result<(f64, f64)> {
    let rep_mse = mse(prediction.view(), truth.view())?;
    let denorm;
    let pred_original = match norm {
        Some(stats) => {
            denorm = stats.denormalize_frames(prediction.view());
            &denorm
        }
        None => prediction,
    };
    let rep_mape = mape(pred_original.view(), truth_original.view(), epsilon)?;
    Ok((rep_mse, rep_mape))
}

/// Filling in frames: predict each window's present frame from its past and
/// score against the ground truth. The summary is the mean ± standard
/// deviation over `cfg.repetitions` runs of the whole task (one run for the
/// deterministic mode). `norm` is used to restate MAPE in original units.
pub fn fill_in(
    model: &TemporalModel,
    ws: &[Window],
    cfg: &EvalConfig,
    norm: Option<&NormalizationStats>,
    lane: &RngStream,
) -> Result<FillInReport> {
    cfg.validate()?;
    model.validate()?;
    let batch = WindowBatch::from_windows(ws)?;
    if batch.order() != model.order() {
        return Err(Error::DimensionMismatch(format!(
            "windows carry {} past frames, model order is {}",
            batch.order(),
            model.order()
        )));
    }
    let q = batch.len();
    let truth = &batch.present;
    let truth_original = match norm {
        Some(stats) => stats.denormalize_frames(truth.view()),
        None => truth.clone(),
    };

    let reps = if cfg.mode == PredictionMode::Deterministic {
        1
    } else {
        cfg.repetitions
    };
    // Repetitions are independent (each draws from its own RNG lane), so they
    // run on the rayon pool; the reduction below stays in repetition order,
    // making the result identical for any worker count.
    let per_rep: Vec<(Array2<f64>, f64, f64)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let prediction = if cfg.mode == PredictionMode::Deterministic {
                ta_predict(model, &batch, cfg.output_activation)?
            } else {
                predict_batch(model, &batch, cfg, lane, rep as u64)?
            };
            let (rep_mse, rep_mape) =
                per_rep_metrics(&prediction, truth, &truth_original, norm, cfg.mape_epsilon)?;
            Ok((prediction, rep_mse, rep_mape))
        })
        .collect::<Result<_>>()?;

    let mut mse_per_rep = Vec::with_capacity(reps);
    let mut mape_per_rep = Vec::with_capacity(reps);
    let mut pred_accum: Array2<f64> = Array2::zeros(truth.raw_dim());
    let mut window_sq = vec![0.0; q];
    for (prediction, rep_mse, rep_mape) in &per_rep {
        mse_per_rep.push(*rep_mse);
        mape_per_rep.push(*rep_mape);
        for (w, diff) in (prediction - truth).rows().into_iter().enumerate() {
            window_sq[w] += diff.mapv(|d| d * d).mean().unwrap_or(0.0);
        }
        pred_accum += prediction;
    }

    let (mse_mean, mse_sd) = mean_sd(&mse_per_rep);
    let (mape_mean, mape_sd) = mean_sd(&mape_per_rep);
    pred_accum /= reps as f64;
    for s in &mut window_sq {
        *s /= reps as f64;
    }
    Ok(FillInReport {
        mse_mean,
        mse_sd,
        mape_mean,
        mape_sd,
        per_window_mse: window_sq,
        predictions: pred_accum,
        n_windows: q,
        repetitions: reps,
    })
}

/// Which metric a horizon report carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricName {
    Mse,
    Mape,
}

impl std::fmt::Display for MetricName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetricName::Mse => "mse",
            MetricName::Mape => "mape",
        })
    }
}

/// Per-step error curve of a free-running generation run.
#[derive(Debug, Clone)]
pub struct HorizonReport {
    pub metric: MetricName,
    /// Mean metric value at each step ahead, length = horizon.
    pub per_step: Vec<f64>,
    /// Standard deviation over repetitions at each step.
    pub dispersion: Vec<f64>,
    /// Windows times repetitions contributing to each step.
    pub n_trials: usize,
}

/// Ground truth a free-running run is scored against: seed windows are drawn
/// from `dataset[range]` and must leave `horizon` future frames inside the
/// range. `norm` restores original units for MAPE.
pub struct EvalTarget<'a> {
    pub dataset: &'a SequenceDataset,
    pub range: Range<usize>,
    pub norm: Option<&'a NormalizationStats>,
}

/// Free-running generation: after seeding with real history, each predicted
/// frame is pushed back into the history and the next step is predicted from
/// model output alone. Step 1 is exactly the filling-in task (same lanes,
/// same bits); by the last step the whole history is self-generated.
pub fn free_run(
    model: &TemporalModel,
    target: &EvalTarget,
    horizon: usize,
    metric: MetricName,
    cfg: &EvalConfig,
    lane: &RngStream,
) -> Result<HorizonReport> {
    cfg.validate()?;
    model.validate()?;
    if horizon < 1 {
        return Err(Error::InvalidParameter("horizon must be >= 1".into()));
    }
    let order = model.order();
    let all = windows(target.dataset, order, target.range.clone())?;
    let eligible: Vec<Window> = all
        .into_iter()
        .filter(|w| w.source_index + horizon <= target.range.end)
        .collect();
    if eligible.is_empty() {
        return Err(Error::Dataset(format!(
            "no seed window leaves room for a horizon of {horizon} inside the evaluation range"
        )));
    }
    let base_batch = WindowBatch::from_windows(&eligible)?;
    let q = base_batch.len();
    let n = base_batch.dim();

    // ground truth per step, in both unit systems
    let mut truths = Vec::with_capacity(horizon);
    for step in 0..horizon {
        let mut t = Array2::zeros((q, n));
        for (row, w) in eligible.iter().enumerate() {
            t.row_mut(row)
                .assign(&target.dataset.frames.row(w.source_index + step));
        }
        let original = match target.norm {
            Some(stats) => stats.denormalize_frames(t.view()),
            None => t.clone(),
        };
        truths.push((t, original));
    }

    let deterministic = cfg.mode == PredictionMode::Deterministic;
    let reps = if deterministic { 1 } else { cfg.repetitions };
    let chains = cfg.mode.chains();
    // Repetitions run in parallel; each is a self-contained stream of lanes,
    // so the numbers do not depend on the worker count.
    let per_rep_step: Vec<Vec<f64>> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let mut row = vec![0.0; horizon];
            let mut batch = base_batch.clone();
            // chain RNGs persist across steps so the whole run is one stream
            let mut rngs_by_chain: Vec<Vec<ChaCha8Rng>> = (0..chains)
                .map(|chain| {
                    batch
                        .ids
                        .iter()
                        .map(|&id| lane.child(id).child(rep as u64).child(chain as u64).rng())
                        .collect()
                })
                .collect();
            for (step, (truth, truth_original)) in truths.iter().enumerate() {
                let prediction = if deterministic {
                    ta_predict(model, &batch, cfg.output_activation)?
                } else {
                    let mut acc = Array2::zeros((q, n));
                    for rngs in &mut rngs_by_chain {
                        acc +=
                            &model.generate_frames_batched(&batch, cfg.gibbs_steps, false, rngs)?;
                    }
                    acc /= chains as f64;
                    acc
                };
                row[step] = match metric {
                    MetricName::Mse => mse(prediction.view(), truth.view())?,
                    MetricName::Mape => {
                        let denorm;
                        let pred_original = match target.norm {
                            Some(stats) => {
                                denorm = stats.denormalize_frames(prediction.view());
                                &denorm
                            }
                            None => &prediction,
                        };
                        mape(pred_original.view(), truth_original.view(), cfg.mape_epsilon)?
                    }
                };
                // the prediction becomes the most recent history frame
                batch.past_by_delay.rotate_right(1);
                batch.past_by_delay[0] = prediction;
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;

    let mut per_step = Vec::with_capacity(horizon);
    let mut dispersion = Vec::with_capacity(horizon);
    for step in 0..horizon {
        let column: Vec<f64> = per_rep_step.iter().map(|r| r[step]).collect();
        let (m, sd) = mean_sd(&column);
        per_step.push(m);
        dispersion.push(sd);
    }
    Ok(HorizonReport {
        metric,
        per_step,
        dispersion,
        n_trials: q * reps,
    })
}

/// A supervised-only baseline and its training curve.
#[derive(Debug, Clone)]
pub struct MlpOutcome {
    /// The trained predictor. It reuses the temporal-model parameter layout
    /// (autoregressive matrices, where present, stay zero) but was never
    /// trained by contrastive divergence, so only deterministic evaluation
    /// is meaningful.
    pub model: TemporalModel,
    /// Per-epoch training loss.
    pub losses: Vec<f64>,
}

/// Expected parameter count of the feed-forward network for a given spec.
fn forward_parameter_count(spec: &ModelSpec, visible_dim: usize) -> usize {
    let per_delay = match spec.kind {
        ModelKind::Trbm => spec.hidden_units * spec.hidden_units,
        ModelKind::Crbm => visible_dim * spec.hidden_units,
    };
    visible_dim * spec.hidden_units          // static weights
        + visible_dim + spec.hidden_units    // biases
        + spec.order * per_delay
}

/// Train a deterministic multi-layer perceptron with the same architecture
/// as the autoencoding forward network: identical layer shapes, but every
/// weight (static and delayed) learns by backpropagation and no contrastive
/// divergence runs at any point. Plain minibatch SGD at full depth for the
/// same total epoch budget as the staged pipeline.
pub fn mlp_baseline(
    spec: &ModelSpec,
    dataset: &SequenceDataset,
    train_range: Range<usize>,
    schedule: &TrainingSchedule,
) -> Result<MlpOutcome> {
    schedule.validate()?;
    if spec.hidden_units == 0 {
        return Err(Error::InvalidParameter("hidden_units must be >= 1".into()));
    }
    let root = RngStream::new(schedule.seed);
    let base = RbmParams::random(
        dataset.dim(),
        spec.hidden_units,
        spec.visible,
        &mut root.child(0).rng(),
    );
    let mut model = TemporalModel::from_static(spec.kind, base, spec.order);
    assert_eq!(
        crate::ta::ta_parameter_count(&model),
        forward_parameter_count(spec, dataset.dim()),
        "baseline must share the forward network's architecture"
    );

    let cfg = TaConfig {
        update_biases: true,
        update_static: true,
        ..schedule.ta.clone()
    };
    let ws = windows(dataset, spec.order, train_range)?;

    // same total budget as the staged pipeline on the autoencoded path
    let total = schedule.static_epochs + spec.order * cfg.epochs_per_delay + schedule.joint_epochs;
    let losses = ta_train_at_depth(&mut model, &ws, spec.order, total, &cfg, &root.child(2), 0)?;
    Ok(MlpOutcome { model, losses })
}
