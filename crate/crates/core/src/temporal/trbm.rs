//! Reduced TRBM: a static RBM per time slice plus delayed hidden-to-hidden
//! couplings into the present slice.
//!
//! Inference uses the filtering approximation: hidden states of past slices
//! are sampled from their static conditionals alone, then act as a fixed
//! extra bias on the present hidden layer. The same approximation is applied
//! during CD training — the filtered samples are clamped in both phases, so
//! the delayed-weight gradient reduces to (data − chain) hidden statistics
//! against the clamped past.

use super::{check_gibbs_steps, noise_visible_rows, HistoryWindow, WindowBatch};
use crate::error::{Error, Result};
use crate::rbm::{
    self, hidden_given_visible, hidden_given_visible_batch, sample_hidden, visible_means_batch,
    CdConfig, RbmGradient, RbmParams,
};
use crate::rng::RngStream;
use ndarray::{Array1, Array2, ArrayView2};
use rand_chacha::ChaCha8Rng;

/// TRBM parameters: shared static slice parameters plus one `M x M` coupling
/// matrix per delay. In `delayed_hidden[d-1]`, rows index the present hidden
/// unit and columns the hidden unit `d` steps back.
#[derive(Debug, Clone, PartialEq)]
pub struct TrbmParams {
    pub base: RbmParams,
    pub delayed_hidden: Vec<Array2<f64>>,
}

impl TrbmParams {
    /// Wrap a static RBM with `order` delays, all couplings zero, so the
    /// temporal structure is determined entirely by later training stages.
    pub fn from_static(base: RbmParams, order: usize) -> Self {
        let m = base.n_hidden();
        Self {
            base,
            delayed_hidden: vec![Array2::zeros((m, m)); order],
        }
    }

    pub fn order(&self) -> usize {
        self.delayed_hidden.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.delayed_hidden.is_empty() {
            return Err(Error::InvalidParameter("model order must be >= 1".into()));
        }
        let m = self.base.n_hidden();
        for (i, w) in self.delayed_hidden.iter().enumerate() {
            if w.dim() != (m, m) {
                return Err(Error::DimensionMismatch(format!(
                    "delay-{} coupling is {}x{}, expected {m}x{m}",
                    i + 1,
                    w.nrows(),
                    w.ncols()
                )));
            }
            if !w.iter().all(|x| x.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "delay-{} coupling contains non-finite entries",
                    i + 1
                )));
            }
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

/// Energy of a full `(T+1)`-slice configuration: the sum of per-slice static
/// energies minus the coupling of every past hidden state into the present
/// one. Row `t` of `visibles`/`hiddens` is slice `t`, oldest first; the last
/// row is the present slice.
pub fn trbm_energy(
    m: &TrbmParams,
    visibles: ArrayView2<f64>,
    hiddens: ArrayView2<f64>,
) -> Result<f64> {
    let t = m.order();
    if visibles.nrows() != t + 1 || hiddens.nrows() != t + 1 {
        return Err(Error::DimensionMismatch(format!(
            "expected {} slices, got {} visible / {} hidden rows",
            t + 1,
            visibles.nrows(),
            hiddens.nrows()
        )));
    }
    let mut total = 0.0;
    for slice in 0..=t {
        total += rbm::energy(&m.base, visibles.row(slice), hiddens.row(slice))?;
    }
    let present = hiddens.row(t);
    for d in 1..=t {
        let past = hiddens.row(t - d);
        total -= present.dot(&m.delayed_hidden[d - 1].dot(&past));
    }
    Ok(total)
}

/// Filtering approximation: sample each past slice's hidden state from its
/// static conditional given that slice's visible frame alone. Returns a
/// `T x M` binary matrix, oldest slice first.
pub fn trbm_filter_hidden(
    m: &TrbmParams,
    past: &HistoryWindow,
    rng: &mut ChaCha8Rng,
) -> Result<Array2<f64>> {
    m.validate()?;
    m.check_history(past)?;
    let mut out = Array2::zeros((m.order(), m.base.n_hidden()));
    for (slice, v) in past.past_frames.rows().into_iter().enumerate() {
        let probs = hidden_given_visible(&m.base, v)?;
        out.row_mut(slice).assign(&sample_hidden(probs.view(), rng));
    }
    Ok(out)
}

/// Batched filtering: element `d-1` holds the `Q x M` sampled hidden states
/// at delay `d`. Rows are sampled oldest slice first so each row's RNG
/// consumption matches the single-window path.
fn filter_hidden_rows(
    m: &TrbmParams,
    past_by_delay: &[Array2<f64>],
    rngs: &mut [ChaCha8Rng],
) -> Result<Vec<Array2<f64>>> {
    let t = m.order();
    let mut out = vec![Array2::zeros((0, 0)); t];
    for d in (1..=t).rev() {
        let probs = hidden_given_visible_batch(&m.base, past_by_delay[d - 1].view(), None)?;
        out[d - 1] = rbm::sample_bernoulli_rows(&probs, rngs);
    }
    Ok(out)
}

/// Extra present-hidden bias contributed by clamped past hidden states:
/// `delta_j = sum_d (W^d h^{T-d})_j`, one row per batch entry.
fn hidden_bias_delta(m: &TrbmParams, filtered: &[Array2<f64>]) -> Array2<f64> {
    let q = filtered[0].nrows();
    let mut delta = Array2::zeros((q, m.base.n_hidden()));
    for (d, h) in filtered.iter().enumerate() {
        delta += &h.dot(&m.delayed_hidden[d].t());
    }
    delta
}

/// Generate the frame following `past`: sample the past hidden states by
/// filtering, fold them into the present hidden bias, start the present
/// visible layer from noise and run `gibbs_steps` alternating updates.
///
/// With `final_sample` false (the default protocol) the returned frame is the
/// conditional visible mean under the last hidden sample — for binary units
/// the Bernoulli probabilities, for Gaussian units the mean vector; with
/// `final_sample` true it is a drawn state.
pub fn trbm_generate_frame(
    m: &TrbmParams,
    past: &HistoryWindow,
    gibbs_steps: usize,
    final_sample: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Array1<f64>> {
    m.check_history(past)?;
    let batch = WindowBatch::from_history(past);
    let mut rngs = [rng.clone()];
    let frames = trbm_generate_frames_batched(m, &batch, gibbs_steps, final_sample, &mut rngs)?;
    let [advanced] = rngs;
    *rng = advanced;
    Ok(frames.row(0).to_owned())
}

/// [`trbm_generate_frame`] over a whole batch, one RNG per row; row `i`
/// reproduces the single-window result under the same RNG.
pub fn trbm_generate_frames_batched(
    m: &TrbmParams,
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
    let filtered = filter_hidden_rows(m, &batch.past_by_delay, rngs)?;
    let delta = hidden_bias_delta(m, &filtered);

    let mut v = noise_visible_rows(&m.base, batch.len(), rngs);
    for step in 1..=gibbs_steps {
        let probs = hidden_given_visible_batch(&m.base, v.view(), Some(&delta))?;
        let h = rbm::sample_bernoulli_rows(&probs, rngs);
        let means = visible_means_batch(&m.base, h.view(), None)?;
        v = if step == gibbs_steps && !final_sample {
            means
        } else {
            rbm::sample_visible_rows(&m.base, &means, rngs, false)
        };
    }
    Ok(v)
}

/// Gradient (or momentum buffer) over all TRBM parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrbmGradient {
    pub rbm: RbmGradient,
    pub delayed_hidden: Vec<Array2<f64>>,
}

impl TrbmGradient {
    pub fn zeros_like(m: &TrbmParams) -> Self {
        Self {
            rbm: RbmGradient::zeros_like(&m.base),
            delayed_hidden: m
                .delayed_hidden
                .iter()
                .map(|w| Array2::zeros(w.raw_dim()))
                .collect(),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.rbm.scale(factor);
        for w in &mut self.delayed_hidden {
            *w *= factor;
        }
    }

    pub fn add(&mut self, other: &TrbmGradient) {
        self.rbm.add(&other.rbm);
        for (a, b) in self.delayed_hidden.iter_mut().zip(&other.delayed_hidden) {
            *a += b;
        }
    }
}

/// One CD-n update on a minibatch of windows.
///
/// Past hidden states are filtered once per window and clamped for both
/// phases; positive statistics pair the present data frame with its
/// mean-field hidden conditional, negative statistics come from `n` Gibbs
/// steps on the present slice under the clamped temporal bias. Applies the
/// update with classical momentum and returns the raw gradient.
pub fn trbm_cd_update(
    m: &mut TrbmParams,
    batch: &WindowBatch,
    cfg: &CdConfig,
    velocity: &mut TrbmGradient,
    lane: &RngStream,
) -> Result<TrbmGradient> {
    cfg.validate()?;
    m.validate()?;
    m.check_batch(batch)?;
    let q = batch.len();
    let mut rngs: Vec<_> = batch.ids.iter().map(|&id| lane.child(id).rng()).collect();

    let filtered = filter_hidden_rows(m, &batch.past_by_delay, &mut rngs)?;
    let delta = hidden_bias_delta(m, &filtered);

    let p0 = hidden_given_visible_batch(&m.base, batch.present.view(), Some(&delta))?;
    let mut v_chain = batch.present.clone();
    let mut p_chain = p0.clone();
    for _ in 0..cfg.steps {
        let h = rbm::sample_bernoulli_rows(&p_chain, &mut rngs);
        let means = visible_means_batch(&m.base, h.view(), None)?;
        v_chain = rbm::sample_visible_rows(&m.base, &means, &mut rngs, cfg.visible_mean_field);
        p_chain = hidden_given_visible_batch(&m.base, v_chain.view(), Some(&delta))?;
    }

    let mut grad = TrbmGradient {
        rbm: rbm::collect_gradient(
            &m.base,
            batch.present.view(),
            &p0,
            &v_chain.view(),
            &p_chain,
            cfg.sparsity,
        ),
        delayed_hidden: Vec::with_capacity(m.order()),
    };
    let hidden_diff = &p0 - &p_chain;
    for h in &filtered {
        grad.delayed_hidden.push(hidden_diff.t().dot(h) / q as f64);
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
    for (w, dw) in m.delayed_hidden.iter_mut().zip(&velocity.delayed_hidden) {
        w.scaled_add(cfg.learning_rate, dw);
    }
    Ok(grad)
}
