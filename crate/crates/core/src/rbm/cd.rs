//! Contrastive-divergence training for static RBMs.
//!
//! CD-n follows `Delta W_ij ~ (1/s_i^2)(<v_i h_j>_0 - <v_i h_j>_n)`: the
//! data term collects mean-field hidden probabilities, the model term runs
//! an n-step Gibbs chain with sampled states and collects probabilities at
//! the final step. Every row of a minibatch owns its own RNG lane keyed by
//! the caller-supplied row id, so batch composition and ordering do not
//! change which random numbers a given sample sees.

use super::{
    hidden_given_visible_batch, sample_bernoulli_rows, sample_visible_rows, visible_means_batch,
    RbmParams,
};
use crate::error::{Error, Result};
use crate::rng::RngStream;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

/// Sparsity penalty on the mean hidden activation: each CD update adds
/// `strength * (target - <h_j>_batch)` to the hidden-bias gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityPenalty {
    pub target: f64,
    pub strength: f64,
}

impl Default for SparsityPenalty {
    fn default() -> Self {
        Self {
            target: 0.1,
            strength: 0.1,
        }
    }
}

/// Hyperparameters of a CD update.
#[derive(Debug, Clone, PartialEq)]
pub struct CdConfig {
    /// Gibbs steps per update (the `n` of CD-n).
    pub steps: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    /// Propagate Gaussian visible means through the chain instead of
    /// sampling the full conditional.
    pub visible_mean_field: bool,
    pub sparsity: Option<SparsityPenalty>,
}

impl Default for CdConfig {
    fn default() -> Self {
        Self {
            steps: 1,
            learning_rate: 1e-3,
            momentum: 0.9,
            visible_mean_field: false,
            sparsity: None,
        }
    }
}

impl CdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.steps < 1 {
            return Err(Error::InvalidParameter("CD steps must be >= 1".into()));
        }
        if self.learning_rate < 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidParameter(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        Ok(())
    }
}

/// Gradient (or momentum buffer) over the static RBM parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct RbmGradient {
    pub weights: Array2<f64>,
    pub visible_bias: Array1<f64>,
    pub hidden_bias: Array1<f64>,
}

impl RbmGradient {
    pub fn zeros_like(rbm: &RbmParams) -> Self {
        Self {
            weights: Array2::zeros(rbm.weights.raw_dim()),
            visible_bias: Array1::zeros(rbm.n_visible()),
            hidden_bias: Array1::zeros(rbm.n_hidden()),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.weights *= factor;
        self.visible_bias *= factor;
        self.hidden_bias *= factor;
    }

    pub fn add(&mut self, other: &RbmGradient) {
        self.weights += &other.weights;
        self.visible_bias += &other.visible_bias;
        self.hidden_bias += &other.hidden_bias;
    }

    pub fn dot(&self, other: &RbmGradient) -> f64 {
        self.weights
            .iter()
            .zip(other.weights.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + self.visible_bias.dot(&other.visible_bias)
            + self.hidden_bias.dot(&other.hidden_bias)
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn cosine_similarity(&self, other: &RbmGradient) -> f64 {
        self.dot(other) / (self.norm() * other.norm()).max(f64::MIN_POSITIVE)
    }
}

/// One CD-n update on a minibatch of visible rows.
///
/// `row_ids` key the per-row RNG lanes (one id per batch row, typically the
/// sample's index in its dataset). Applies `params += lr * velocity` with
/// classical momentum and returns the raw gradient estimate of this batch
/// (before momentum and learning rate).
pub fn cd_update(
    rbm: &mut RbmParams,
    batch: ArrayView2<f64>,
    row_ids: &[u64],
    cfg: &CdConfig,
    velocity: &mut RbmGradient,
    lane: &RngStream,
) -> Result<RbmGradient> {
    cfg.validate()?;
    rbm.validate()?;
    let q = batch.nrows();
    if q == 0 {
        return Err(Error::InvalidParameter("empty minibatch".into()));
    }
    if row_ids.len() != q {
        return Err(Error::DimensionMismatch(format!(
            "{} row ids for {} batch rows",
            row_ids.len(),
            q
        )));
    }

    let mut rngs: Vec<_> = row_ids.iter().map(|&id| lane.child(id).rng()).collect();

    // positive phase: mean-field hidden statistics on the data
    let p0 = hidden_given_visible_batch(rbm, batch, None)?;

    // negative phase: n sampled Gibbs steps, probabilities at collection
    let mut v_chain = batch.to_owned();
    let mut p_chain = p0.clone();
    for _ in 0..cfg.steps {
        let h = sample_bernoulli_rows(&p_chain, &mut rngs);
        let means = visible_means_batch(rbm, h.view(), None)?;
        v_chain = sample_visible_rows(rbm, &means, &mut rngs, cfg.visible_mean_field);
        p_chain = hidden_given_visible_batch(rbm, v_chain.view(), None)?;
    }

    let grad = collect_gradient(rbm, batch, &p0, &v_chain.view(), &p_chain, cfg.sparsity);

    velocity.scale(cfg.momentum);
    velocity.add(&grad);
    rbm.weights.scaled_add(cfg.learning_rate, &velocity.weights);
    rbm.visible_bias
        .scaled_add(cfg.learning_rate, &velocity.visible_bias);
    rbm.hidden_bias
        .scaled_add(cfg.learning_rate, &velocity.hidden_bias);
    Ok(grad)
}

pub(crate) fn collect_gradient(
    rbm: &RbmParams,
    v0: ArrayView2<f64>,
    p0: &Array2<f64>,
    vn: &ArrayView2<f64>,
    pn: &Array2<f64>,
    sparsity: Option<SparsityPenalty>,
) -> RbmGradient {
    let q = v0.nrows() as f64;
    let v0s = rbm.scaled_visible_batch(v0);
    let vns = rbm.scaled_visible_batch(*vn);

    let mut weights = v0s.t().dot(p0);
    weights -= &vns.t().dot(pn);
    weights /= q;

    let visible_bias = (&v0s - &vns).mean_axis(Axis(0)).unwrap();
    let mut hidden_bias = (p0 - pn).mean_axis(Axis(0)).unwrap();

    if let Some(sp) = sparsity {
        let mean_activation = p0.mean_axis(Axis(0)).unwrap();
        hidden_bias += &mean_activation.mapv(|m| sp.strength * (sp.target - m));
    }

    RbmGradient {
        weights,
        visible_bias,
        hidden_bias,
    }
}

/// Mean-field reconstruction error: one up-down pass through the model,
/// averaged squared difference over all elements.
pub fn reconstruction_mse(rbm: &RbmParams, frames: ArrayView2<f64>) -> Result<f64> {
    let p = hidden_given_visible_batch(rbm, frames, None)?;
    let recon = visible_means_batch(rbm, p.view(), None)?;
    let diff = &recon - &frames;
    Ok(diff.mapv(|d| d * d).mean().unwrap_or(0.0))
}

/// Stage-1 static training: CD epochs over single-frame minibatches with the
/// sparsity penalty. Returns the per-epoch mean-field reconstruction MSE.
pub fn static_pretrain(
    rbm: &mut RbmParams,
    frames: ArrayView2<f64>,
    epochs: usize,
    minibatch_size: usize,
    cfg: &CdConfig,
    lane: &RngStream,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if minibatch_size == 0 {
        return Err(Error::InvalidParameter("minibatch size must be >= 1".into()));
    }
    if frames.nrows() == 0 {
        return Err(Error::InvalidParameter("no training frames".into()));
    }

    let mut velocity = RbmGradient::zeros_like(rbm);
    let mut order: Vec<usize> = (0..frames.nrows()).collect();
    let mut metrics = Vec::with_capacity(epochs);

    for epoch in 0..epochs {
        let epoch_lane = lane.child(epoch as u64);
        order.shuffle(&mut epoch_lane.child(u64::MAX).rng());
        for (batch_no, chunk) in order.chunks(minibatch_size).enumerate() {
            let batch = frames.select(Axis(0), chunk);
            let ids: Vec<u64> = chunk.iter().map(|&i| i as u64).collect();
            cd_update(
                rbm,
                batch.view(),
                &ids,
                cfg,
                &mut velocity,
                &epoch_lane.child(batch_no as u64),
            )?;
        }
        metrics.push(reconstruction_mse(rbm, frames)?);
    }
    Ok(metrics)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rbm::{exact_loglik_gradient, exact_visible_probabilities, UnitKind};
    use ndarray::array;

    fn toy_model(seed: u64) -> RbmParams {
        let mut rng = RngStream::new(seed).rng();
        let mut rbm = RbmParams::random(3, 2, UnitKind::Binary, &mut rng);
        // scale up so the gradient is clearly nonzero
        rbm.weights *= 40.0;
        rbm
    }

    fn toy_batch() -> Array2<f64> {
        array![
            [1.0, 1.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 1.0],
            [1.0, 1.0, 1.0]
        ]
    }

    #[test]
    fn zero_learning_rate_leaves_parameters_unchanged() {
        let mut rbm = toy_model(1);
        let before = rbm.clone();
        let cfg = CdConfig {
            learning_rate: 0.0,
            ..CdConfig::default()
        };
        let batch = toy_batch();
        let ids: Vec<u64> = (0..batch.nrows() as u64).collect();
        let mut vel = RbmGradient::zeros_like(&rbm);
        cd_update(&mut rbm, batch.view(), &ids, &cfg, &mut vel, &RngStream::new(2)).unwrap();
        assert_eq!(rbm, before);
    }

    #[test]
    fn negative_learning_rate_rejected() {
        let cfg = CdConfig {
            learning_rate: -0.1,
            ..CdConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn mean_cd_direction_aligns_with_exact_gradient() {
        // 2000 seeded CD-1 updates at fixed parameters; their mean should
        // point along the enumerated exact gradient
        let rbm = toy_model(3);
        let batch = toy_batch();
        let ids: Vec<u64> = (0..batch.nrows() as u64).collect();
        let exact = exact_loglik_gradient(&rbm, batch.view()).unwrap();

        let cfg = CdConfig {
            learning_rate: 0.0,
            momentum: 0.0,
            ..CdConfig::default()
        };
        let mut mean = RbmGradient::zeros_like(&rbm);
        for trial in 0..2000u64 {
            let mut model = rbm.clone();
            let mut vel = RbmGradient::zeros_like(&model);
            let grad = cd_update(
                &mut model,
                batch.view(),
                &ids,
                &cfg,
                &mut vel,
                &RngStream::new(100).child(trial),
            )
            .unwrap();
            mean.add(&grad);
        }
        mean.scale(1.0 / 2000.0);
        let cos = mean.cosine_similarity(&exact);
        assert!(cos > 0.8, "cosine similarity {cos} <= 0.8");
    }

    #[test]
    fn single_pattern_training_concentrates_probability() {
        let mut rng = RngStream::new(4).rng();
        let mut rbm = RbmParams::random(3, 2, UnitKind::Binary, &mut rng);
        let data = array![[1.0, 1.0, 1.0]];
        let ids = [0u64];
        let cfg = CdConfig {
            learning_rate: 0.2,
            momentum: 0.5,
            ..CdConfig::default()
        };
        let mut vel = RbmGradient::zeros_like(&rbm);
        let lane = RngStream::new(5);
        for epoch in 0..500u64 {
            cd_update(
                &mut rbm,
                data.view(),
                &ids,
                &cfg,
                &mut vel,
                &lane.child(epoch),
            )
            .unwrap();
        }
        let probs = exact_visible_probabilities(&rbm).unwrap();
        let p_target = probs[0b111];
        assert!(p_target > 0.9, "P(1,1,1) = {p_target} after training");
    }

    #[test]
    fn minibatch_order_does_not_change_update() {
        let rbm0 = toy_model(8);
        let batch = toy_batch();
        let cfg = CdConfig::default();
        let lane = RngStream::new(9);

        let mut fwd = rbm0.clone();
        let mut vel = RbmGradient::zeros_like(&fwd);
        let ids: Vec<u64> = vec![10, 11, 12, 13];
        cd_update(&mut fwd, batch.view(), &ids, &cfg, &mut vel, &lane).unwrap();

        let reversed = batch.slice(ndarray::s![..;-1, ..]);
        let mut rev = rbm0.clone();
        let mut vel_r = RbmGradient::zeros_like(&rev);
        let ids_r: Vec<u64> = vec![13, 12, 11, 10];
        cd_update(&mut rev, reversed, &ids_r, &cfg, &mut vel_r, &lane).unwrap();

        assert!(fwd
            .weights
            .iter()
            .zip(rev.weights.iter())
            .all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn zero_strength_sparsity_matches_plain_cd() {
        let batch = toy_batch();
        let ids: Vec<u64> = (0..4).collect();
        let lane = RngStream::new(6);

        let mut plain = toy_model(7);
        let mut sparse = plain.clone();
        let base = CdConfig {
            learning_rate: 0.05,
            ..CdConfig::default()
        };
        let with_zero_sparsity = CdConfig {
            sparsity: Some(SparsityPenalty {
                target: 0.1,
                strength: 0.0,
            }),
            ..base.clone()
        };
        let mut v1 = RbmGradient::zeros_like(&plain);
        let mut v2 = RbmGradient::zeros_like(&sparse);
        for epoch in 0..20u64 {
            cd_update(&mut plain, batch.view(), &ids, &base, &mut v1, &lane.child(epoch)).unwrap();
            cd_update(
                &mut sparse,
                batch.view(),
                &ids,
                &with_zero_sparsity,
                &mut v2,
                &lane.child(epoch),
            )
            .unwrap();
        }
        assert_eq!(plain, sparse);
    }

    #[test]
    fn sparsity_pulls_hidden_activation_toward_target() {
        let mut rng = RngStream::new(12).rng();
        let mut rbm = RbmParams::random(6, 8, UnitKind::Binary, &mut rng);
        let frames = Array2::from_shape_fn((64, 6), |_| {
            if rand::Rng::random::<f64>(&mut rng) < 0.5 {
                1.0
            } else {
                0.0
            }
        });
        let cfg = CdConfig {
            learning_rate: 0.05,
            momentum: 0.0,
            sparsity: Some(SparsityPenalty {
                target: 0.1,
                strength: 0.5,
            }),
            ..CdConfig::default()
        };
        static_pretrain(&mut rbm, frames.view(), 200, 16, &cfg, &RngStream::new(13)).unwrap();
        let p = hidden_given_visible_batch(&rbm, frames.view(), None).unwrap();
        let mean_activation = p.mean().unwrap();
        assert!(
            (0.05..=0.4).contains(&mean_activation),
            "mean hidden activation {mean_activation} far from sparsity target 0.1"
        );
    }

    #[test]
    fn static_pretrain_reduces_reconstruction_error() {
        let mut rng = RngStream::new(14).rng();
        let mut rbm = RbmParams::random(5, 6, UnitKind::Binary, &mut rng);
        // correlated binary data: unit i copies a latent coin with noise
        let frames = Array2::from_shape_fn((80, 5), |(t, _)| {
            let coin = (t / 4) % 2 == 0;
            let flip = rand::Rng::random::<f64>(&mut rng) < 0.1;
            if coin != flip {
                1.0
            } else {
                0.0
            }
        });
        let cfg = CdConfig {
            learning_rate: 0.1,
            momentum: 0.5,
            ..CdConfig::default()
        };
        let metrics =
            static_pretrain(&mut rbm, frames.view(), 100, 20, &cfg, &RngStream::new(15)).unwrap();
        assert!(
            metrics[99] < metrics[0],
            "reconstruction MSE did not decrease: {} -> {}",
            metrics[0],
            metrics[99]
        );
    }
}
