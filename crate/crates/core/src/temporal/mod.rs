//! Temporal models: the reduced TRBM (delayed hidden-to-hidden weights) and
//! the CRBM (delayed visible-to-hidden and visible-to-visible weights).
//!
//! Both are a static RBM on the present slice whose effective biases are
//! shifted by the recent past. Delay `d` counts backwards from the present
//! frame, so `delayed[d-1]` couples the frame `d` steps ago to the present;
//! [`HistoryWindow`] rows are stored oldest first.

mod crbm;
mod trbm;

pub use crbm::{
    crbm_cd_update, crbm_dynamic_biases, crbm_generate_frame, crbm_generate_frames_batched,
    CrbmGradient, CrbmParams,
};
pub use trbm::{
    trbm_cd_update, trbm_energy, trbm_filter_hidden, trbm_generate_frame,
    trbm_generate_frames_batched, TrbmGradient, TrbmParams,
};

use crate::data::Window;
use crate::error::{Error, Result};
use crate::rbm::{RbmParams, UnitKind};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// The last `T` frames before a frame to be generated or scored, oldest
/// first, plus that frame when it is known (training / fill-in targets).
#[derive(Debug, Clone, PartialEq)]
pub struct HistoryWindow {
    /// `T x N`, row 0 is the oldest frame.
    pub past_frames: Array2<f64>,
    pub present_frame: Option<Array1<f64>>,
}

impl HistoryWindow {
    pub fn new(past_frames: Array2<f64>) -> Self {
        Self {
            past_frames,
            present_frame: None,
        }
    }

    pub fn order(&self) -> usize {
        self.past_frames.nrows()
    }

    pub fn dim(&self) -> usize {
        self.past_frames.ncols()
    }

    /// Frame `delay` steps before the present (`delay` in `1..=T`).
    pub fn frame_at_delay(&self, delay: usize) -> ndarray::ArrayView1<'_, f64> {
        self.past_frames.row(self.order() - delay)
    }

    /// Slide the window one step: drop the oldest frame, append `frame` as
    /// the most recent one. Used when feeding predictions back during
    /// free-running generation.
    pub fn push(&mut self, frame: ndarray::ArrayView1<f64>) {
        let t = self.order();
        for r in 0..t - 1 {
            let next = self.past_frames.row(r + 1).to_owned();
            self.past_frames.row_mut(r).assign(&next);
        }
        self.past_frames.row_mut(t - 1).assign(&frame);
        self.present_frame = None;
    }
}

/// A minibatch of windows in delay-major layout: `past_by_delay[d-1]` holds
/// the frames `d` steps before each window's present frame, so every per-delay
/// weight update is a single matrix product over the whole batch.
#[derive(Debug, Clone)]
pub struct WindowBatch {
    /// One `Q x N` matrix per delay, index `d-1` for delay `d`.
    pub past_by_delay: Vec<Array2<f64>>,
    /// `Q x N` present frames.
    pub present: Array2<f64>,
    /// Per-window RNG-lane ids (source frame indices), length `Q`.
    pub ids: Vec<u64>,
}

impl WindowBatch {
    pub fn from_windows(windows: &[Window]) -> Result<Self> {
        let first = windows
            .first()
            .ok_or_else(|| Error::InvalidParameter("empty window batch".into()))?;
        let order = first.past_frames.nrows();
        let dim = first.past_frames.ncols();
        let q = windows.len();
        let mut past_by_delay = vec![Array2::zeros((q, dim)); order];
        let mut present = Array2::zeros((q, dim));
        let mut ids = Vec::with_capacity(q);
        for (row, w) in windows.iter().enumerate() {
            if w.past_frames.nrows() != order || w.past_frames.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "window {} has shape {}x{}, expected {}x{}",
                    row,
                    w.past_frames.nrows(),
                    w.past_frames.ncols(),
                    order,
                    dim
                )));
            }
            for d in 1..=order {
                past_by_delay[d - 1]
                    .row_mut(row)
                    .assign(&w.past_frames.row(order - d));
            }
            present.row_mut(row).assign(&w.present_frame);
            ids.push(w.source_index as u64);
        }
        Ok(Self {
            past_by_delay,
            present,
            ids,
        })
    }

    /// Batch with the past of a single window and no meaningful present row.
    pub fn from_history(history: &HistoryWindow) -> Self {
        let order = history.order();
        let dim = history.dim();
        let past_by_delay = (1..=order)
            .map(|d| {
                history
                    .frame_at_delay(d)
                    .to_owned()
                    .insert_axis(ndarray::Axis(0))
            })
            .collect();
        let present = match &history.present_frame {
            Some(p) => p.clone().insert_axis(ndarray::Axis(0)),
            None => Array2::zeros((1, dim)),
        };
        Self {
            past_by_delay,
            present,
            ids: vec![0],
        }
    }

    pub fn len(&self) -> usize {
        self.present.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.present.nrows() == 0
    }

    pub fn order(&self) -> usize {
        self.past_by_delay.len()
    }

    pub fn dim(&self) -> usize {
        self.present.ncols()
    }
}

/// Which temporal architecture to build or load.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Trbm,
    Crbm,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Trbm => "trbm",
            ModelKind::Crbm => "crbm",
        })
    }
}

/// Architecture and size of a temporal model, fixed before training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub visible: UnitKind,
    pub hidden_units: usize,
    /// Temporal order `T`: how many past frames condition the present one.
    pub order: usize,
}

/// Either temporal architecture behind one interface; generation, staged
/// training and checkpointing all operate on this.
#[derive(Debug, Clone, PartialEq)]
pub enum TemporalModel {
    Trbm(TrbmParams),
    Crbm(CrbmParams),
}

impl TemporalModel {
    /// Wrap a static RBM in the requested architecture with all delayed
    /// weights zero.
    pub fn from_static(kind: ModelKind, base: RbmParams, order: usize) -> Self {
        match kind {
            ModelKind::Trbm => TemporalModel::Trbm(TrbmParams::from_static(base, order)),
            ModelKind::Crbm => TemporalModel::Crbm(CrbmParams::from_static(base, order)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            TemporalModel::Trbm(_) => ModelKind::Trbm,
            TemporalModel::Crbm(_) => ModelKind::Crbm,
        }
    }

    pub fn base(&self) -> &RbmParams {
        match self {
            TemporalModel::Trbm(m) => &m.base,
            TemporalModel::Crbm(m) => &m.base,
        }
    }

    pub fn base_mut(&mut self) -> &mut RbmParams {
        match self {
            TemporalModel::Trbm(m) => &mut m.base,
            TemporalModel::Crbm(m) => &mut m.base,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            TemporalModel::Trbm(m) => m.order(),
            TemporalModel::Crbm(m) => m.order(),
        }
    }

    pub fn visible_dim(&self) -> usize {
        self.base().n_visible()
    }

    pub fn hidden_dim(&self) -> usize {
        self.base().n_hidden()
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            TemporalModel::Trbm(m) => m.validate(),
            TemporalModel::Crbm(m) => m.validate(),
        }
    }

    /// Generate one frame conditioned on `past` (see the per-model
    /// functions for the sampling protocol).
    pub fn generate_frame(
        &self,
        past: &HistoryWindow,
        gibbs_steps: usize,
        final_sample: bool,
        rng: &mut ChaCha8Rng,
    ) -> Result<Array1<f64>> {
        match self {
            TemporalModel::Trbm(m) => trbm_generate_frame(m, past, gibbs_steps, final_sample, rng),
            TemporalModel::Crbm(m) => crbm_generate_frame(m, past, gibbs_steps, final_sample, rng),
        }
    }

    /// Batched generation: one frame per batch row, each row driven by its
    /// own RNG so results do not depend on how rows are grouped.
    pub fn generate_frames_batched(
        &self,
        batch: &WindowBatch,
        gibbs_steps: usize,
        final_sample: bool,
        rngs: &mut [ChaCha8Rng],
    ) -> Result<Array2<f64>> {
        match self {
            TemporalModel::Trbm(m) => {
                trbm_generate_frames_batched(m, batch, gibbs_steps, final_sample, rngs)
            }
            TemporalModel::Crbm(m) => {
                crbm_generate_frames_batched(m, batch, gibbs_steps, final_sample, rngs)
            }
        }
    }
}

/// Noise initialization for the present visible layer before Gibbs sampling:
/// standard normal for Gaussian units, Bernoulli(0.5) for binary units.
pub(crate) fn noise_visible_rows(rbm: &RbmParams, q: usize, rngs: &mut [ChaCha8Rng]) -> Array2<f64> {
    let n = rbm.n_visible();
    let mut v = Array2::zeros((q, n));
    for (row, rng) in v.rows_mut().into_iter().zip(rngs.iter_mut()) {
        for x in row {
            *x = match rbm.visible_kind {
                UnitKind::Gaussian => StandardNormal.sample(rng),
                UnitKind::Binary => {
                    if rng.random::<f64>() < 0.5 {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
        }
    }
    v
}

pub(crate) fn check_gibbs_steps(gibbs_steps: usize) -> Result<()> {
    if gibbs_steps == 0 {
        return Err(Error::InvalidParameter("gibbs_steps must be >= 1".into()));
    }
    Ok(())
}
