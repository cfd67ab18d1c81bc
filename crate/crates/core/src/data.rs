//! Sequence ingestion, normalization, window extraction and synthetic
//! benchmark generators.
//!
//! Datasets are time-major `L x N` matrices. Normalization is a per-dimension
//! z-score whose statistics come from the training portion only; the fitted
//! stats travel with the dataset so that predictions can be mapped back to
//! original units (MAPE is always computed there).

use crate::error::{Error, Result};
use crate::rng::RngStream;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand_distr::{Distribution, StandardNormal};
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;

/// Smallest standard deviation used when scaling; constant dimensions map to
/// zero instead of blowing up.
pub const STD_FLOOR: f64 = 1e-8;

/// Per-dimension z-score statistics (population standard deviation, floored
/// at [`STD_FLOOR`]).
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationStats {
    pub mean: Array1<f64>,
    pub std: Array1<f64>,
}

impl NormalizationStats {
    /// Fit on the given rows (population variance).
    pub fn fit(frames: ArrayView2<f64>) -> Result<Self> {
        if frames.nrows() < 2 {
            return Err(Error::Dataset(
                "need at least 2 frames to fit normalization statistics".into(),
            ));
        }
        let mean = frames.mean_axis(Axis(0)).unwrap();
        let mut var = Array1::zeros(frames.ncols());
        for row in frames.rows() {
            let d = &row - &mean;
            var += &d.mapv(|x| x * x);
        }
        var /= frames.nrows() as f64;
        let std = var.mapv(|v| v.sqrt().max(STD_FLOOR));
        Ok(Self { mean, std })
    }

    pub fn normalize_frame(&self, frame: ArrayView1<f64>) -> Array1<f64> {
        (&frame - &self.mean) / &self.std
    }

    pub fn denormalize_frame(&self, frame: ArrayView1<f64>) -> Array1<f64> {
        &frame * &self.std + &self.mean
    }

    pub fn normalize_frames(&self, frames: ArrayView2<f64>) -> Array2<f64> {
        (&frames - &self.mean) / &self.std
    }

    pub fn denormalize_frames(&self, frames: ArrayView2<f64>) -> Array2<f64> {
        &frames * &self.std + &self.mean
    }
}

/// A multivariate time series, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDataset {
    /// `L x N` frame matrix.
    pub frames: Array2<f64>,
    pub dim_names: Option<Vec<String>>,
    /// Statistics the frames were normalized with, if any.
    pub norm: Option<NormalizationStats>,
}

impl SequenceDataset {
    pub fn new(frames: Array2<f64>) -> Self {
        Self {
            frames,
            dim_names: None,
            norm: None,
        }
    }

    /// Number of time steps.
    pub fn len(&self) -> usize {
        self.frames.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.nrows() == 0
    }

    /// Number of dimensions per frame.
    pub fn dim(&self) -> usize {
        self.frames.ncols()
    }
}

/// One training example: `T` consecutive past frames (oldest first) and the
/// frame that follows them.
#[derive(Debug, Clone)]
pub struct Window<'a> {
    pub past_frames: ArrayView2<'a, f64>,
    pub present_frame: ArrayView1<'a, f64>,
    /// Index of the present frame in the source sequence.
    pub source_index: usize,
}

/// All maximal consecutive `(T+1)`-frame windows whose frames lie inside
/// `range`. Yields `range.len() - order` windows, oldest-first layout.
pub fn windows(
    dataset: &SequenceDataset,
    order: usize,
    range: Range<usize>,
) -> Result<Vec<Window<'_>>> {
    if order == 0 {
        return Err(Error::InvalidParameter("model order must be >= 1".into()));
    }
    if range.start >= range.end || range.end > dataset.len() {
        return Err(Error::Dataset(format!(
            "window range {}..{} out of bounds for {} frames",
            range.start,
            range.end,
            dataset.len()
        )));
    }
    if range.end - range.start < order + 1 {
        return Err(Error::Dataset(format!(
            "range of {} frames is shorter than a window of order {} ({} frames)",
            range.end - range.start,
            order,
            order + 1
        )));
    }
    let mut out = Vec::with_capacity(range.end - range.start - order);
    for present in (range.start + order)..range.end {
        out.push(Window {
            past_frames: dataset.frames.slice(ndarray::s![present - order..present, ..]),
            present_frame: dataset.frames.row(present),
            source_index: present,
        });
    }
    Ok(out)
}

/// Z-score every dimension using statistics fitted on `stats_range` only
/// (the training split); the whole sequence is transformed.
pub fn normalize(
    dataset: &SequenceDataset,
    stats_range: Range<usize>,
) -> Result<(SequenceDataset, NormalizationStats)> {
    if stats_range.start >= stats_range.end || stats_range.end > dataset.len() {
        return Err(Error::Dataset(format!(
            "normalization range {}..{} out of bounds for {} frames",
            stats_range.start,
            stats_range.end,
            dataset.len()
        )));
    }
    let stats = NormalizationStats::fit(
        dataset
            .frames
            .slice(ndarray::s![stats_range.start..stats_range.end, ..]),
    )?;
    let frames = stats.normalize_frames(dataset.frames.view());
    Ok((
        SequenceDataset {
            frames,
            dim_names: dataset.dim_names.clone(),
            norm: Some(stats.clone()),
        },
        stats,
    ))
}

/// Result of univariate chunk augmentation.
#[derive(Debug, Clone)]
pub struct AugmentedSeries {
    pub dataset: SequenceDataset,
    /// Trailing observations that did not fill a whole chunk.
    pub dropped: usize,
}

/// Group a univariate series into non-overlapping chunks of `chunk`
/// successive observations; frame `t` holds observations
/// `t*chunk .. (t+1)*chunk`. A trailing remainder is dropped with a warning.
pub fn augment_univariate(series: &[f64], chunk: usize) -> Result<AugmentedSeries> {
    if chunk == 0 {
        return Err(Error::InvalidParameter("chunk size must be >= 1".into()));
    }
    if series.len() < 2 * chunk {
        return Err(Error::Dataset(format!(
            "series of length {} is too short for chunks of {} (need at least {})",
            series.len(),
            chunk,
            2 * chunk
        )));
    }
    let n_frames = series.len() / chunk;
    let dropped = series.len() - n_frames * chunk;
    if dropped > 0 {
        log::warn!("chunk augmentation dropped {dropped} trailing observation(s)");
    }
    let frames = Array2::from_shape_fn((n_frames, chunk), |(t, i)| series[t * chunk + i]);
    let mut dataset = SequenceDataset::new(frames);
    dataset.dim_names = Some((0..chunk).map(|i| format!("c{i}")).collect());
    Ok(AugmentedSeries { dataset, dropped })
}

/// Seeded multi-sine benchmark: dimension `i` is
/// `sin(2 pi f_i t + phi_i) + noise_sd * N(0,1)` with seeded phases.
pub fn synth_multisine(
    dims: usize,
    length: usize,
    freqs: &[f64],
    noise_sd: f64,
    seed: u64,
) -> Result<SequenceDataset> {
    if dims == 0 {
        return Err(Error::InvalidParameter("dims must be >= 1".into()));
    }
    if length == 0 {
        return Err(Error::InvalidParameter("length must be >= 1".into()));
    }
    if freqs.len() != dims {
        return Err(Error::InvalidParameter(format!(
            "{} frequencies for {} dimensions",
            freqs.len(),
            dims
        )));
    }
    if noise_sd < 0.0 {
        return Err(Error::InvalidParameter("noise_sd must be >= 0".into()));
    }
    let lane = RngStream::new(seed);
    let mut phase_rng = lane.child(0).rng();
    let phases: Vec<f64> = (0..dims)
        .map(|_| rand::Rng::random::<f64>(&mut phase_rng) * std::f64::consts::TAU)
        .collect();
    let mut noise_rng = lane.child(1).rng();
    let frames = Array2::from_shape_fn((length, dims), |(t, i)| {
        let clean = (std::f64::consts::TAU * freqs[i] * t as f64 + phases[i]).sin();
        if noise_sd > 0.0 {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            clean + noise_sd * z
        } else {
            clean
        }
    });
    let mut dataset = SequenceDataset::new(frames);
    dataset.dim_names = Some((0..dims).map(|i| format!("d{i}")).collect());
    Ok(dataset)
}

/// Default configuration of the `synth multisine` command: four independent
/// incommensurate tones (periods 20, ~14.3, ~11.1 and ~9.1 frames) over
/// 3000 frames with mild observation noise.
pub const MULTISINE_DIMS: usize = 4;
pub const MULTISINE_LENGTH: usize = 3000;
pub const MULTISINE_FREQS: [f64; MULTISINE_DIMS] = [0.05, 0.07, 0.09, 0.11];
pub const MULTISINE_NOISE_SD: f64 = 0.1;

/// Seeded harmonic-mixture benchmark: a few latent oscillators, each a fixed
/// waveform built from `harmonics` phase-locked overtones of one fundamental
/// (`periods[j]` frames per cycle, amplitude `1/h^decay` for overtone `h`),
/// are mixed into `dims` observation channels through a seeded orthonormal
/// frame, plus white observation noise. Every channel therefore carries all
/// oscillators at once, and one-step prediction requires tracking the joint
/// phase of waveforms that never exactly repeat against each other.
pub fn synth_harmonic_mix(
    dims: usize,
    length: usize,
    periods: &[f64],
    harmonics: usize,
    decay: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<SequenceDataset> {
    if dims == 0 {
        return Err(Error::InvalidParameter("dims must be >= 1".into()));
    }
    if length == 0 {
        return Err(Error::InvalidParameter("length must be >= 1".into()));
    }
    if periods.is_empty() || periods.len() > dims {
        return Err(Error::InvalidParameter(format!(
            "need between 1 and dims={dims} fundamental periods, got {}",
            periods.len()
        )));
    }
    if periods.iter().any(|p| !p.is_finite() || *p <= 0.0) {
        return Err(Error::InvalidParameter("periods must be positive".into()));
    }
    if harmonics == 0 {
        return Err(Error::InvalidParameter("harmonics must be >= 1".into()));
    }
    if !decay.is_finite() {
        return Err(Error::InvalidParameter("decay must be finite".into()));
    }
    if noise_sd < 0.0 {
        return Err(Error::InvalidParameter("noise_sd must be >= 0".into()));
    }

    let lane = RngStream::new(seed);

    // per-oscillator waveform: global phase plus one offset per overtone
    let mut shape_rng = lane.child(0).rng();
    let specs: Vec<(f64, f64, Vec<f64>)> = periods
        .iter()
        .map(|&p| {
            let phase = rand::Rng::random::<f64>(&mut shape_rng) * std::f64::consts::TAU;
            let psis: Vec<f64> = (0..harmonics)
                .map(|_| rand::Rng::random::<f64>(&mut shape_rng) * std::f64::consts::TAU)
                .collect();
            (1.0 / p, phase, psis)
        })
        .collect();

    // orthonormal dims x n mixing frame via Gram-Schmidt on Gaussian columns
    let n = periods.len();
    let mut mix_rng = lane.child(2).rng();
    let mut cols: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..dims).map(|_| StandardNormal.sample(&mut mix_rng)).collect())
        .collect();
    for c in 0..n {
        let (done, rest) = cols.split_at_mut(c);
        let col = &mut rest[0];
        for prev in done.iter() {
            let d: f64 = col.iter().zip(prev.iter()).map(|(a, b)| a * b).sum();
            col.iter_mut().zip(prev.iter()).for_each(|(a, b)| *a -= d * b);
        }
        let norm: f64 = col.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < 1e-9 {
            return Err(Error::InvalidParameter(
                "mixing columns degenerate; try another seed".into(),
            ));
        }
        col.iter_mut().for_each(|v| *v /= norm);
    }

    let mut noise_rng = lane.child(1).rng();
    let mut frames = Array2::zeros((length, dims));
    for t in 0..length {
        let lat: Vec<f64> = specs
            .iter()
            .map(|(f, phase, psis)| {
                psis.iter()
                    .enumerate()
                    .map(|(h, psi)| {
                        let k = (h + 1) as f64;
                        (std::f64::consts::TAU * k * f * t as f64 + k * phase + psi).sin()
                            / k.powf(decay)
                    })
                    .sum::<f64>()
            })
            .collect();
        for i in 0..dims {
            let z: f64 = StandardNormal.sample(&mut noise_rng);
            let s: f64 = (0..n).map(|j| cols[j][i] * lat[j]).sum();
            frames[[t, i]] = s + noise_sd * z;
        }
    }
    let mut dataset = SequenceDataset::new(frames);
    dataset.dim_names = Some((0..dims).map(|i| format!("d{i}")).collect());
    Ok(dataset)
}

/// Released benchmark configuration: two incommensurate oscillators (24 and
/// 17.3 frames per cycle), twelve overtones each with slow amplitude decay,
/// four observation channels over 3000 frames, light noise. The acceptance
/// suite and the pipeline benches train on [`benchmark_sequence`] datasets.
pub const BENCHMARK_DIMS: usize = 4;
pub const BENCHMARK_LENGTH: usize = 3000;
pub const BENCHMARK_PERIODS: [f64; 2] = [24.0, 17.3];
pub const BENCHMARK_HARMONICS: usize = 12;
pub const BENCHMARK_HARMONIC_DECAY: f64 = 0.7;
pub const BENCHMARK_NOISE_SD: f64 = 0.05;

/// The released benchmark at a given seed.
pub fn benchmark_sequence(seed: u64) -> SequenceDataset {
    synth_harmonic_mix(
        BENCHMARK_DIMS,
        BENCHMARK_LENGTH,
        &BENCHMARK_PERIODS,
        BENCHMARK_HARMONICS,
        BENCHMARK_HARMONIC_DECAY,
        BENCHMARK_NOISE_SD,
        seed,
    )
    .expect("benchmark constants are valid")
}

/// Parse a rectangular numeric CSV (rows = time steps, columns = dimensions).
pub fn load_csv(path: &Path, has_header: bool) -> Result<SequenceDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text, has_header)
}

/// [`load_csv`] on in-memory text; row/column numbers in errors are 1-based
/// positions within the data (header excluded).
pub fn parse_csv(text: &str, has_header: bool) -> Result<SequenceDataset> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let dim_names = if has_header {
        lines
            .next()
            .map(|h| h.split(',').map(|s| s.trim().to_string()).collect())
    } else {
        None
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = 0usize;
    for (r, line) in lines.enumerate() {
        let mut row = Vec::new();
        for (c, cell) in line.split(',').enumerate() {
            let value: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                row: r + 1,
                col: c + 1,
                message: format!("not a number: {:?}", cell.trim()),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row: r + 1,
                    col: c + 1,
                    message: "non-finite value".into(),
                });
            }
            row.push(value);
        }
        if r == 0 {
            width = row.len();
        } else if row.len() != width {
            return Err(Error::Parse {
                row: r + 1,
                col: row.len().min(width) + 1,
                message: format!("ragged row: {} cells, expected {}", row.len(), width),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Dataset("CSV contains no data rows".into()));
    }
    let frames =
        Array2::from_shape_vec((rows.len(), width), rows.into_iter().flatten().collect())
            .expect("shape checked above");
    Ok(SequenceDataset {
        frames,
        dim_names,
        norm: None,
    })
}

/// Write frames as CSV. Values use the shortest representation that parses
/// back to the same bits, so save/load round-trips exactly.
pub fn save_csv(dataset: &SequenceDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    if let Some(names) = &dataset.dim_names {
        out.push_str(&names.join(","));
        out.push('\n');
    }
    for row in dataset.frames.rows() {
        let mut first = true;
        for x in row.iter() {
            if !first {
                out.push(',');
            }
            write!(out, "{x}").expect("writing to String cannot fail");
            first = false;
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn parse_zero_matrix() {
        let ds = parse_csv("0,0\n0,0\n0,0\n", false).unwrap();
        assert_eq!(ds.frames, Array2::zeros((3, 2)));
    }

    #[test]
    fn parse_error_names_cell() {
        let err = parse_csv("1,2\nabc,3\n", false).unwrap_err();
        match err {
            Error::Parse { row, col, .. } => {
                assert_eq!((row, col), (2, 1));
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn ragged_row_rejected() {
        let err = parse_csv("1,2\n3\n", false).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 2, .. }));
    }

    #[test]
    fn csv_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut ds = SequenceDataset::new(array![
            [0.1, -3.75e-7, 1.0 / 3.0],
            [f64::MIN_POSITIVE, 1e300, -0.0],
            [2.5, 1.25, 42.0]
        ]);
        ds.dim_names = Some(vec!["a".into(), "b".into(), "c".into()]);
        save_csv(&ds, &path).unwrap();
        let back = load_csv(&path, true).unwrap();
        assert_eq!(back.frames, ds.frames);
        assert_eq!(back.dim_names, ds.dim_names);
    }

    #[test]
    fn normalize_population_sd() {
        let ds = SequenceDataset::new(array![[0.0], [2.0]]);
        let (normed, stats) = normalize(&ds, 0..2).unwrap();
        assert_abs_diff_eq!(stats.mean[0], 1.0);
        assert_abs_diff_eq!(stats.std[0], 1.0);
        assert_eq!(normed.frames, array![[-1.0], [1.0]]);
    }

    #[test]
    fn constant_column_maps_to_zero() {
        let ds = SequenceDataset::new(array![[5.0], [5.0], [5.0]]);
        let (normed, stats) = normalize(&ds, 0..3).unwrap();
        assert_eq!(normed.frames, Array2::zeros((3, 1)));
        assert_eq!(stats.std[0], STD_FLOOR);
    }

    #[test]
    fn normalize_round_trips() {
        let ds = synth_multisine(3, 50, &[0.05, 0.1, 0.15], 0.3, 7).unwrap();
        let (normed, stats) = normalize(&ds, 0..40).unwrap();
        let back = stats.denormalize_frames(normed.frames.view());
        for (a, b) in back.iter().zip(ds.frames.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn window_counts() {
        let ds = SequenceDataset::new(Array2::from_shape_fn((8, 2), |(t, d)| (t * 2 + d) as f64));
        let ws = windows(&ds, 6, 0..8).unwrap();
        assert_eq!(ws.len(), 2);
        assert_eq!(ws[0].source_index, 6);
        assert_eq!(ws[1].source_index, 7);

        let ds7 = SequenceDataset::new(Array2::from_shape_fn((7, 1), |(t, _)| t as f64));
        let ws7 = windows(&ds7, 6, 0..7).unwrap();
        assert_eq!(ws7.len(), 1);
        assert_eq!(ws7[0].present_frame[0], 6.0); // frame 7 of the sequence
        assert_eq!(ws7[0].past_frames.column(0).to_vec(), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]);
    }

    #[test]
    fn windows_cover_each_eligible_present_index_once() {
        let ds = SequenceDataset::new(Array2::from_shape_fn((20, 1), |(t, _)| t as f64));
        let ws = windows(&ds, 3, 5..15).unwrap();
        let idx: Vec<usize> = ws.iter().map(|w| w.source_index).collect();
        assert_eq!(idx, (8..15).collect::<Vec<_>>());
        for w in &ws {
            // frames are consecutive in the source
            for (k, row) in w.past_frames.rows().into_iter().enumerate() {
                assert_eq!(row[0] as usize, w.source_index - 3 + k);
            }
        }
    }

    #[test]
    fn windows_reject_short_range() {
        let ds = SequenceDataset::new(Array2::zeros((10, 1)));
        assert!(windows(&ds, 6, 0..6).is_err());
    }

    #[test]
    fn chunk_augmentation_direct() {
        let series: Vec<f64> = (1..=8).map(|x| x as f64).collect();
        let aug = augment_univariate(&series, 4).unwrap();
        assert_eq!(aug.dropped, 0);
        assert_eq!(
            aug.dataset.frames,
            array![[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]]
        );
    }

    #[test]
    fn chunk_augmentation_drops_remainder() {
        let series: Vec<f64> = (1..=9).map(|x| x as f64).collect();
        let aug = augment_univariate(&series, 4).unwrap();
        assert_eq!(aug.dataset.len(), 2);
        assert_eq!(aug.dropped, 1);
        // flattening reproduces the retained prefix in order
        let flat: Vec<f64> = aug.dataset.frames.iter().cloned().collect();
        assert_eq!(flat, series[..8]);
    }

    #[test]
    fn chunk_augmentation_rejects_short_series() {
        assert!(augment_univariate(&[1.0; 7], 4).is_err());
    }

    #[test]
    fn multisine_noiseless_matches_closed_form() {
        let ds = synth_multisine(2, 100, &[0.05, 0.11], 0.0, 3).unwrap();
        // recover phases from t=0 and check an arbitrary later point
        let mut phase_rng = RngStream::new(3).child(0).rng();
        let phases: Vec<f64> = (0..2)
            .map(|_| rand::Rng::random::<f64>(&mut phase_rng) * std::f64::consts::TAU)
            .collect();
        for (t, i) in [(17usize, 0usize), (63, 1)] {
            let expect = (std::f64::consts::TAU * [0.05, 0.11][i] * t as f64 + phases[i]).sin();
            assert_abs_diff_eq!(ds.frames[[t, i]], expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn multisine_deterministic_and_variance() {
        let a = synth_multisine(2, 10_000, &[0.013, 0.029], 0.2, 9).unwrap();
        let b = synth_multisine(2, 10_000, &[0.013, 0.029], 0.2, 9).unwrap();
        assert_eq!(a.frames, b.frames);
        let expected = 0.5 + 0.2f64 * 0.2;
        for d in 0..2 {
            let col = a.frames.column(d);
            let mean = col.mean().unwrap();
            let var = col.mapv(|x| (x - mean) * (x - mean)).mean().unwrap();
            assert!(
                (var - expected).abs() / expected < 0.05,
                "dim {d}: variance {var} vs expected {expected}"
            );
        }
    }

    #[test]
    fn harmonic_mix_deterministic_shape_and_names() {
        let a = synth_harmonic_mix(4, 200, &[24.0, 17.3], 12, 0.7, 0.05, 5).unwrap();
        let b = synth_harmonic_mix(4, 200, &[24.0, 17.3], 12, 0.7, 0.05, 5).unwrap();
        let c = synth_harmonic_mix(4, 200, &[24.0, 17.3], 12, 0.7, 0.05, 6).unwrap();
        assert_eq!(a.frames, b.frames);
        assert_ne!(a.frames, c.frames);
        assert_eq!(a.frames.dim(), (200, 4));
        assert_eq!(
            a.dim_names.as_deref().unwrap(),
            ["d0", "d1", "d2", "d3"]
        );
    }

    #[test]
    fn harmonic_mix_noiseless_frames_span_one_direction_per_oscillator() {
        // with the noise off, every frame is a combination of the mixing
        // columns, so Gram-Schmidt over the frames finds exactly
        // periods.len() directions and the residuals vanish
        let ds = synth_harmonic_mix(5, 300, &[24.0, 17.3], 12, 0.7, 0.0, 11).unwrap();
        let mut basis: Vec<Vec<f64>> = Vec::new();
        for t in 0..300 {
            let mut r: Vec<f64> = ds.frames.row(t).to_vec();
            for b in &basis {
                let d: f64 = r.iter().zip(b).map(|(a, b)| a * b).sum();
                for (ri, bi) in r.iter_mut().zip(b) {
                    *ri -= d * bi;
                }
            }
            let norm: f64 = r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 1e-8 {
                r.iter_mut().for_each(|v| *v /= norm);
                basis.push(r);
            }
        }
        assert_eq!(basis.len(), 2, "frames must span one direction per oscillator");
    }

    #[test]
    fn harmonic_mix_integer_period_repeats_exactly() {
        let ds = synth_harmonic_mix(3, 120, &[25.0], 4, 0.7, 0.0, 2).unwrap();
        for t in 0..95 {
            for i in 0..3 {
                assert_abs_diff_eq!(ds.frames[[t, i]], ds.frames[[t + 25, i]], epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn harmonic_mix_rejects_bad_parameters() {
        assert!(synth_harmonic_mix(0, 10, &[24.0], 4, 0.7, 0.1, 0).is_err());
        assert!(synth_harmonic_mix(4, 0, &[24.0], 4, 0.7, 0.1, 0).is_err());
        assert!(synth_harmonic_mix(4, 10, &[], 4, 0.7, 0.1, 0).is_err());
        assert!(synth_harmonic_mix(1, 10, &[24.0, 17.3], 4, 0.7, 0.1, 0).is_err());
        assert!(synth_harmonic_mix(4, 10, &[-24.0], 4, 0.7, 0.1, 0).is_err());
        assert!(synth_harmonic_mix(4, 10, &[24.0], 0, 0.7, 0.1, 0).is_err());
        assert!(synth_harmonic_mix(4, 10, &[24.0], 4, f64::NAN, 0.1, 0).is_err());
        assert!(synth_harmonic_mix(4, 10, &[24.0], 4, 0.7, -0.1, 0).is_err());
    }

    #[test]
    fn released_benchmark_matches_its_constants() {
        let ds = benchmark_sequence(0);
        assert_eq!(ds.frames.dim(), (BENCHMARK_LENGTH, BENCHMARK_DIMS));
        assert_eq!(ds.frames, benchmark_sequence(0).frames);
    }
}
