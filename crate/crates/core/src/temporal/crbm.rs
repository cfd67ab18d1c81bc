//! CRBM: a static RBM on the present frame whose visible and hidden biases
//! are shifted by linear functions of the past frames.
//!
//! Delay `d` contributes `v^{T-d} W^d` to the hidden pre-activation and
//! `v^{T-d} P^d` to the visible bias. Because the past enters only through
//! these dynamic biases, conditioning on it keeps the model a plain RBM, so
//! sampling and CD reduce to the static machinery with shifted biases.

use super::{check_gibbs_steps, noise_visible_rows, HistoryWindow, WindowBatch};
use crate::error::{Error, Result};
use crate::rbm::{
    self, hidden_given_visible_batch, visible_means_batch, CdConfig, RbmGradient, RbmParams,
};
use crate::rng::RngStream;
use ndarray::{Array1, Array2};
use rand_chacha::ChaCha8Rng;

/// CRBM parameters. `delayed_to_hidden[d-1]` is the `N x M` projection of the
/// frame `d` steps back onto the present hidden bias; `delayed_to_visible[d-1]`
/// is the `N x N` autoregressive projection onto the present visible bias
/// (rows index the past unit, columns the present unit).
#[derive(Debug, Clone, PartialEq)]
pub struct CrbmParams {
    pub base: RbmParams,
    pub delayed_to_hidden: Vec<Array2<f64>>,
    pub delayed_to_visible: Vec<Array2<f64>>,
}

impl CrbmParams {
    /// Wrap a static RBM with `order` delays, all delayed weights zero.
    pub fn from_static(base: RbmParams, order: usize) -> Self {
        let (n, m) = (base.n_visible(), base.n_hidden());
        Self {
            base,
            delayed_to_hidden: vec![Array2::zeros((n, m)); order],
            delayed_to_visible: vec![Array2::zeros((n, n)); order],
        }
    }

    pub fn order(&self) -> usize {
        self.delayed_to_hidden.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.delayed_to_hidden.is_empty() {
            return Err(Error::InvalidParameter("model order must be >= 1".into()));
        }
        if self.delayed_to_visible.len() != self.delayed_to_hidden.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} visible-to-hidden delays but {} visible-to-visible delays",
                self.delayed_to_hidden.len(),
                self.delayed_to_visible.len()
            )));
        }
        let (n, m) = (self.base.n_visible(), self.base.n_hidden());
        for (i, w) in self.delayed_to_hidden.iter().enumerate() {
            if w.dim() != (n, m) {
                return Err(Error::DimensionMismatch(format!(
                    "delay-{} hidden projection is {}x{}, expected {n}x{m}",
                    i + 1,
                    w.nrows(),
                    w.ncols()
                )));
            }
        }
        for (i, p) in self.delayed_to_visible.iter().enumerate() {
            if p.dim() != (n, n) {
                return Err(Error::DimensionMismatch(format!(
                    "delay-{} visible projection is {}x{}, expected {n}x{n}",
                    i + 1,
                    p.nrows(),
                    p.ncols()
                )));
            }
        }
        let finite = self
            .delayed_to_hidden
            .iter()
            .chain(self.delayed_to_visible.iter())
            .all(|w| w.iter().all(|x| x.is_finite()));
        if !finite {
            return Err(Error::InvalidParameter(
                "delayed weights contain non-finite entries".into(),
            ));
        }
        Ok(())
    }

    fn check_history(&self, past: &HistoryWindow) -> Result<()> {
        if past.order() != self.order() || past.dim() != self.base.n_visible() {
            return Err(Error::DimensionMismatch(format!(
                "history is {}x{}, model expects {}x{}",
                past.order(),
                past.dim(),
                self.order(),
                self.base.n_visible()
            )));
        }
        Ok(())
    }

    fn check_batch(&self, batch: &WindowBatch) -> Result<()> {
        if batch.order() != self.order() || batch.dim() != self.base.n_visible() {
            return Err(Error::DimensionMismatch(format!(
                "window batch has order {} and dim {}, model expects {} and {}",
                batch.order(),
                batch.dim(),
                self.order(),
                self.base.n_visible()
            )));
        }
        Ok(())
    }
}

/// Effective biases of the present slice given a history: the static biases
/// plus each delayed frame pushed through its projection matrices. Returns
/// `(hidden_bias_eff, visible_bias_eff)`.
pub fn crbm_dynamic_biases(
    m: &CrbmParams,
    past: &HistoryWindow,
) -> Result<(Array1<f64>, Array1<f64>)> {
    m.validate()?;
    m.check_history(past)?;
    let mut hidden = m.base.hidden_bias.clone();
    let mut visible = m.base.visible_bias.clone();
    for d in 1..=m.order() {
        let frame = past.frame_at_delay(d);
        hidden += &frame.dot(&m.delayed_to_hidden[d - 1]);
        visible += &frame.dot(&m.delayed_to_visible[d - 1]);
    }
    Ok((hidden, visible))
}

/// Batched bias shifts relative to the static biases: `Q x M` hidden and
/// `Q x N` visible deltas, suitable as `extra_bias` in the static batched
/// conditionals (which add the static bias themselves).
fn dynamic_bias_deltas(
    m: &CrbmParams,
    past_by_delay: &[Array2<f64>],
) -> Result<(Array2<f64>, Array2<f64>)> {
    let q = past_by_delay[0].nrows();
    let mut hidden = Array2::zeros((q, m.base.n_hidden()));
    let mut visible = Array2::zeros((q, m.base.n_visible()));
    for (d, frames) in past_by_delay.iter().enumerate() {
        hidden += &frames.dot(&m.delayed_to_hidden[d]);
        visible += &frames.dot(&m.delayed_to_visible[d]);
    }
    Ok((hidden, visible))
}

/// Generate the frame following `past`: compute the effective biases, start
/// the present visible layer from noise and run `gibbs_steps` alternating
/// updates. Output convention as in the TRBM generator: conditional mean
/// under the last hidden sample unless `final_sample` is set.
pub fn crbm_generate_frame(
    m: &CrbmParams,
    past: &HistoryWindow,
    gibbs_steps: usize,
    final_sample: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Array1<f64>> {
    m.check_history(past)?;
    let batch = WindowBatch::from_history(past);
    let mut rngs = [rng.clone()];
    let frames = crbm_generate_frames_batched(m, &batch, gibbs_steps, final_sample, &mut rngs)?;
    let [advanced] = rngs;
    *rng = advanced;
    Ok(frames.row(0).to_owned())
}

/// [`crbm_generate_frame`] over a whole batch, one RNG per row; row `i`
/// reproduces the single-window result under the same RNG.
pub fn crbm_generate_frames_batched(
    m: &CrbmParams,
    batch: &WindowBatch,
    gibbs_steps: usize,
    final_sample: bool,
    rngs: &mut [ChaCha8Rng],
) -> Result<Array2<f64>> {
    check_gibbs_steps(gibbs_steps)?;
    m.validate()?;
    m.check_batch(batch)?;
    if rngs.len() != batch.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} RNG lanes for {} batch rows",
            rngs.len(),
            batch.len()
        )));
    }
    let (dh, dv) = dynamic_bias_deltas(m, &batch.past_by_delay)?;

    let mut v = noise_visible_rows(&m.base, batch.len(), rngs);
    for step in 1..=gibbs_steps {
        let probs = hidden_given_visible_batch(&m.base, v.view(), Some(&dh))?;
        let h = rbm::sample_bernoulli_rows(&probs, rngs);
        let means = visible_means_batch(&m.base, h.view(), Some(&dv))?;
        v = if step == gibbs_steps && !final_sample {
            means
        } else {
            rbm::sample_visible_rows(&m.base, &means, rngs, false)
        };
    }
    Ok(v)
}

/// Gradient (or momentum buffer) over all CRBM parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CrbmGradient {
    pub rbm: RbmGradient,
    pub delayed_to_hidden: Vec<Array2<f64>>,
    pub delayed_to_visible: Vec<Array2<f64>>,
}

impl CrbmGradient {
    pub fn zeros_like(m: &CrbmParams) -> Self {
        Self {
            rbm: RbmGradient::zeros_like(&m.base),
            delayed_to_hidden: m
                .delayed_to_hidden
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
            delayed_to_visible: m
                .delayed_to_visible
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.rbm.scale(factor);
        for w in self
            .delayed_to_hidden
            .iter_mut()
            .chain(self.delayed_to_visible.iter_mut())
        {
            *w *= factor;
        }
    }

    pub fn add(&mut self, other: &CrbmGradient) {
        self.rbm.add(&other.rbm);
        for (a, b) in self.delayed_to_hidden.iter_mut().zip(&other.delayed_to_hidden) {
            *a += b;
        }
        for (a, b) in self
            .delayed_to_visible
            .iter_mut()
            .zip(&other.delayed_to_visible)
        {
            *a += b;
        }
    }
}

/// One CD-n update on a minibatch of windows: standard CD on the present
/// slice under the dynamic biases, with delayed-weight gradients pairing each
/// past frame against the (data − chain) statistics of the present slice.
/// Applies the update with classical momentum and returns the raw gradient.
pub fn crbm_cd_update(
    m: &mut CrbmParams,
    batch: &WindowBatch,
    cfg: &CdConfig,
    velocity: &mut CrbmGradient,
    lane: &RngStream,
) -> Result<CrbmGradient> {
    cfg.validate()?;
    m.validate()?;
    m.check_batch(batch)?;
    let q = batch.len() as f64;
    let mut rngs: Vec<_> = batch.ids.iter().map(|&id| lane.child(id).rng()).collect();

    let (dh, dv) = dynamic_bias_deltas(m, &batch.past_by_delay)?;

    let p0 = hidden_given_visible_batch(&m.base, batch.present.view(), Some(&dh))?;
    let mut v_chain = batch.present.clone();
    let mut p_chain = p0.clone();
    for _ in 0..cfg.steps {
        let h = rbm::sample_bernoulli_rows(&p_chain, &mut rngs);
        let means = visible_means_batch(&m.base, h.view(), Some(&dv))?;
        v_chain = rbm::sample_visible_rows(&m.base, &means, &mut rngs, cfg.visible_mean_field);
        p_chain = hidden_given_visible_batch(&m.base, v_chain.view(), Some(&dh))?;
    }

    let hidden_diff = &p0 - &p_chain;
    let visible_diff =
        &m.base.scaled_visible_batch(batch.present.view()) - &m.base.scaled_visible_batch(v_chain.view());
    let mut grad = CrbmGradient {
        rbm: rbm::collect_gradient(
            &m.base,
            batch.present.view(),
            &p0,
            &v_chain.view(),
            &p_chain,
            cfg.sparsity,
        ),
        delayed_to_hidden: Vec::with_capacity(m.order()),
        delayed_to_visible: Vec::with_capacity(m.order()),
    };
    for frames in &batch.past_by_delay {
        grad.delayed_to_hidden.push(frames.t().dot(&hidden_diff) / q);
        grad.delayed_to_visible.push(frames.t().dot(&visible_diff) / q);
    }

    velocity.scale(cfg.momentum);
    velocity.add(&grad);
    m.base
        .weights
        .scaled_add(cfg.learning_rate, &velocity.rbm.weights);
    m.base
        .visible_bias
        .scaled_add(cfg.learning_rate, &velocity.rbm.visible_bias);
    m.base
        .hidden_bias
        .scaled_add(cfg.learning_rate, &velocity.rbm.hidden_bias);
    for (w, dw) in m
        .delayed_to_hidden
        .iter_mut()
        .zip(&velocity.delayed_to_hidden)
    {
        w.scaled_add(cfg.learning_rate, dw);
    }
    for (p, dp) in m
        .delayed_to_visible
        .iter_mut()
        .zip(&velocity.delayed_to_visible)
    {
        p.scaled_add(cfg.learning_rate, dp);
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{windows, SequenceDataset};
    use crate::rbm::{gibbs_step, UnitKind};
    use approx::assert_abs_diff_eq;
    use ndarray::array;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_crbm(n: usize, m: usize, order: usize, kind: UnitKind, seed: u64) -> CrbmParams {
        let mut rng = RngStream::new(seed).rng();
        let mut base = RbmParams::random(n, m, kind, &mut rng);
        base.weights *= 50.0;
        base.visible_bias = Array1::from_shape_fn(n, |_| rng.random::<f64>() - 0.5);
        base.hidden_bias = Array1::from_shape_fn(m, |_| rng.random::<f64>() - 0.5);
        let mut model = CrbmParams::from_static(base, order);
        for w in &mut model.delayed_to_hidden {
            *w = Array2::from_shape_fn((n, m), |_| 0.5 * (rng.random::<f64>() - 0.5));
        }
        for p in &mut model.delayed_to_visible {
            *p = Array2::from_shape_fn((n, n), |_| 0.5 * (rng.random::<f64>() - 0.5));
        }
        model
    }

    #[test]
    fn zero_delays_return_static_biases() {
        let mut rng = RngStream::new(11).rng();
        let base = RbmParams::random(3, 2, UnitKind::Binary, &mut rng);
        let model = CrbmParams::from_static(base.clone(), 2);
        let past = HistoryWindow::new(array![[1.0, 0.5, -1.0], [0.2, 0.0, 0.7]]);
        let (h, v) = crbm_dynamic_biases(&model, &past).unwrap();
        assert_eq!(h, base.hidden_bias);
        assert_eq!(v, base.visible_bias);
    }

    #[test]
    fn dynamic_bias_direct_value() {
        let base = RbmParams::zeros(1, 1, UnitKind::Binary);
        let mut model = CrbmParams::from_static(base, 1);
        model.delayed_to_hidden[0] = array![[2.0]];
        model.delayed_to_visible[0] = array![[-1.0]];
        let past = HistoryWindow::new(array![[1.0]]);
        let (h, v) = crbm_dynamic_biases(&model, &past).unwrap();
        assert_abs_diff_eq!(h[0], 2.0);
        assert_abs_diff_eq!(v[0], -1.0);
    }

    #[test]
    fn bias_shift_is_linear_in_past() {
        let model = random_crbm(3, 2, 2, UnitKind::Gaussian, 21);
        let past = HistoryWindow::new(Array2::from_shape_fn((2, 3), |(t, i)| {
            0.4 * t as f64 + 0.1 * i as f64 - 0.3
        }));
        let (h1, v1) = crbm_dynamic_biases(&model, &past).unwrap();
        let doubled = HistoryWindow::new(&past.past_frames * 2.0);
        let (h2, v2) = crbm_dynamic_biases(&model, &doubled).unwrap();

        let dh1 = &h1 - &model.base.hidden_bias;
        let dh2 = &h2 - &model.base.hidden_bias;
        let dv1 = &v1 - &model.base.visible_bias;
        let dv2 = &v2 - &model.base.visible_bias;
        for (a, b) in dh1.iter().zip(dh2.iter()) {
            assert_abs_diff_eq!(2.0 * a, *b, epsilon = 1e-12);
        }
        for (a, b) in dv1.iter().zip(dv2.iter()) {
            assert_abs_diff_eq!(2.0 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn generation_with_zero_delays_matches_static_gibbs_stream() {
        let mut model = random_crbm(3, 2, 2, UnitKind::Binary, 31);
        for w in &mut model.delayed_to_hidden {
            w.fill(0.0);
        }
        for p in &mut model.delayed_to_visible {
            p.fill(0.0);
        }
        let past = HistoryWindow::new(Array2::zeros((2, 3)));
        let steps = 6;

        let mut rng = RngStream::new(32).rng();
        let frame = crbm_generate_frame(&model, &past, steps, true, &mut rng).unwrap();

        let mut manual_rng = RngStream::new(32).rng();
        let mut v = Array1::from_shape_fn(3, |_| {
            if manual_rng.random::<f64>() < 0.5 {
                1.0
            } else {
                0.0
            }
        });
        for _ in 0..steps {
            let (_, v_next) = gibbs_step(&model.base, v.view(), &mut manual_rng).unwrap();
            v = v_next;
        }
        assert_eq!(frame, v);
    }

    #[test]
    fn generation_is_deterministic_per_stream() {
        let model = random_crbm(4, 3, 2, UnitKind::Gaussian, 41);
        let past = HistoryWindow::new(Array2::from_shape_fn((2, 4), |(t, i)| {
            0.25 * t as f64 - 0.15 * i as f64
        }));
        let a = crbm_generate_frame(&model, &past, 20, false, &mut RngStream::new(42).rng());
        let b = crbm_generate_frame(&model, &past, 20, false, &mut RngStream::new(42).rng());
        assert_eq!(a.unwrap(), b.unwrap());
    }

    #[test]
    fn batched_generation_matches_single_windows() {
        let model = random_crbm(3, 4, 3, UnitKind::Gaussian, 51);
        let ds = SequenceDataset::new(Array2::from_shape_fn((10, 3), |(t, i)| {
            (0.37 * t as f64 + 0.11 * i as f64).sin()
        }));
        let ws = windows(&ds, 3, 0..10).unwrap();
        let batch = WindowBatch::from_windows(&ws).unwrap();
        let lane = RngStream::new(52);

        for &final_sample in &[false, true] {
            let mut rngs: Vec<_> = batch.ids.iter().map(|&id| lane.child(id).rng()).collect();
            let frames =
                crbm_generate_frames_batched(&model, &batch, 7, final_sample, &mut rngs).unwrap();
            for (row, w) in ws.iter().enumerate() {
                let past = HistoryWindow::new(w.past_frames.to_owned());
                let single = crbm_generate_frame(
                    &model,
                    &past,
                    7,
                    final_sample,
                    &mut lane.child(w.source_index as u64).rng(),
                )
                .unwrap();
                assert_eq!(frames.row(row), single.view(), "row {row}");
            }
        }
    }

    #[test]
    fn zero_learning_rate_leaves_model_unchanged() {
        let mut model = random_crbm(3, 2, 2, UnitKind::Binary, 61);
        let before = model.clone();
        let frames = Array2::from_shape_fn((8, 3), |(t, i)| ((t + i) % 2) as f64);
        let ds = SequenceDataset::new(frames);
        let batch = WindowBatch::from_windows(&windows(&ds, 2, 0..8).unwrap()).unwrap();
        let cfg = CdConfig {
            learning_rate: 0.0,
            ..CdConfig::default()
        };
        let mut vel = CrbmGradient::zeros_like(&model);
        crbm_cd_update(&mut model, &batch, &cfg, &mut vel, &RngStream::new(62)).unwrap();
        assert_eq!(model, before);
    }

    #[test]
    fn matched_reconstruction_gives_zero_gradient() {
        // with zero static weights the mean-field chain reproduces the
        // dynamic visible bias; choosing data equal to it makes every
        // statistic match and the gradient vanish identically
        let mut base = RbmParams::zeros(1, 1, UnitKind::Gaussian);
        base.weights[[0, 0]] = 0.0;
        let mut model = CrbmParams::from_static(base, 1);
        model.delayed_to_visible[0] = array![[0.5]];

        let frames = array![[1.0], [0.5]];
        let ds = SequenceDataset::new(frames);
        let batch = WindowBatch::from_windows(&windows(&ds, 1, 0..2).unwrap()).unwrap();
        let cfg = CdConfig {
            visible_mean_field: true,
            ..CdConfig::default()
        };
        let mut vel = CrbmGradient::zeros_like(&model);
        let grad = crbm_cd_update(&mut model, &batch, &cfg, &mut vel, &RngStream::new(63)).unwrap();

        assert_eq!(grad.delayed_to_visible[0][[0, 0]], 0.0);
        assert_eq!(grad.delayed_to_hidden[0][[0, 0]], 0.0);
        assert_eq!(grad.rbm.weights[[0, 0]], 0.0);
        assert_eq!(grad.rbm.visible_bias[0], 0.0);
        assert_eq!(grad.rbm.hidden_bias[0], 0.0);
    }

    #[test]
    fn update_invariant_to_window_order() {
        let model0 = random_crbm(2, 3, 2, UnitKind::Gaussian, 71);
        let frames = Array2::from_shape_fn((9, 2), |(t, i)| (0.5 * t as f64 + i as f64).cos());
        let ds = SequenceDataset::new(frames);
        let ws = windows(&ds, 2, 0..9).unwrap();
        let cfg = CdConfig::default();
        let lane = RngStream::new(72);

        let mut fwd = model0.clone();
        let mut vel = CrbmGradient::zeros_like(&fwd);
        trbm_order_free_update(&mut fwd, &ws, &cfg, &mut vel, &lane, false);

        let mut rev = model0.clone();
        let mut vel_r = CrbmGradient::zeros_like(&rev);
        trbm_order_free_update(&mut rev, &ws, &cfg, &mut vel_r, &lane, true);

        assert!(fwd
            .base
            .weights
            .iter()
            .zip(rev.base.weights.iter())
            .all(|(a, b)| (a - b).abs() < 1e-14));
        for (a, b) in fwd.delayed_to_visible.iter().zip(&rev.delayed_to_visible) {
            assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-14));
        }
    }

    fn trbm_order_free_update(
        model: &mut CrbmParams,
        ws: &[crate::data::Window],
        cfg: &CdConfig,
        vel: &mut CrbmGradient,
        lane: &RngStream,
        reverse: bool,
    ) {
        let mut ws = ws.to_vec();
        if reverse {
            ws.reverse();
        }
        let batch = WindowBatch::from_windows(&ws).unwrap();
        crbm_cd_update(model, &batch, cfg, vel, lane).unwrap();
    }

    #[test]
    fn autoregressive_toy_approaches_noise_floor() {
        // v_t = 0.8 v_{t-1} + noise: after training, one-step prediction MSE
        // should come within a factor of two of the generating noise variance
        let a = 0.8;
        let noise_sd = 0.1;
        let mut rng = RngStream::new(81).rng();
        let mut series = vec![0.0f64];
        for t in 1..1300 {
            let z: f64 = StandardNormal.sample(&mut rng);
            series.push(a * series[t - 1] + noise_sd * z);
        }
        let frames = Array2::from_shape_vec((1300, 1), series).unwrap();
        let ds = SequenceDataset::new(frames);
        let train_ws = windows(&ds, 1, 0..1200).unwrap();
        let test_ws = windows(&ds, 1, 1200..1300).unwrap();

        let mut init_rng = RngStream::new(82).rng();
        let base = RbmParams::random(1, 4, UnitKind::Gaussian, &mut init_rng);
        let mut model = CrbmParams::from_static(base, 1);
        let cfg = CdConfig {
            learning_rate: 0.01,
            momentum: 0.9,
            visible_mean_field: true,
            ..CdConfig::default()
        };
        let mut vel = CrbmGradient::zeros_like(&model);
        let lane = RngStream::new(83);
        for epoch in 0..500u64 {
            for (b, chunk) in train_ws.chunks(100).enumerate() {
                let batch = WindowBatch::from_windows(chunk).unwrap();
                crbm_cd_update(
                    &mut model,
                    &batch,
                    &cfg,
                    &mut vel,
                    &lane.child(epoch).child(b as u64),
                )
                .unwrap();
            }
        }

        let mut eval_rng = RngStream::new(84).rng();
        let mut mse = 0.0;
        for w in &test_ws {
            let past = HistoryWindow::new(w.past_frames.to_owned());
            let mut pred = Array1::zeros(1);
            let reps = 10;
            for _ in 0..reps {
                pred += &crbm_generate_frame(&model, &past, 30, false, &mut eval_rng).unwrap();
            }
            pred /= reps as f64;
            mse += (pred[0] - w.present_frame[0]).powi(2);
        }
        mse /= test_ws.len() as f64;
        let floor = noise_sd * noise_sd;
        assert!(
            mse < 2.0 * floor,
            "one-step MSE {mse} vs noise floor {floor}"
        );
    }
}
