//! Hot-path benchmarks at the released benchmark scale: 4 visible units,
//! 100 hidden units, order 6, minibatches of 100.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use tempora_core::data::{benchmark_sequence, normalize, windows};
use tempora_core::eval::{fill_in, EvalConfig, PredictionMode};
use tempora_core::rbm::{cd_update, CdConfig, RbmGradient, RbmParams, UnitKind};
use tempora_core::ta::{ta_gradient_crbm, ta_gradient_trbm, TaConfig};
use tempora_core::temporal::{ModelKind, TemporalModel, WindowBatch};
use tempora_core::RngStream;

const HIDDEN: usize = 100;
const ORDER: usize = 6;
const BATCH: usize = 100;

fn base_rbm(visible: usize) -> RbmParams {
    let lane = RngStream::new(7);
    RbmParams::random(visible, HIDDEN, UnitKind::Gaussian, &mut lane.child(0).rng())
}

/// The first `BATCH` training windows of the benchmark sequence.
fn window_batch() -> (tempora_core::data::SequenceDataset, WindowBatch) {
    let raw = benchmark_sequence(0);
    let (data, _) = normalize(&raw, 0..raw.len()).expect("benchmark normalizes");
    let ws = windows(&data, ORDER, 0..BATCH + ORDER).expect("enough frames");
    let batch = WindowBatch::from_windows(&ws).expect("uniform windows");
    (data, batch)
}

fn bench_cd_update(c: &mut Criterion) {
    let (data, _) = window_batch();
    let frames = data.frames.slice(ndarray::s![0..BATCH, ..]).to_owned();
    let ids: Vec<u64> = (0..BATCH as u64).collect();
    let mut rbm = base_rbm(data.dim());
    let cfg = CdConfig::default();
    let mut velocity = RbmGradient::zeros_like(&rbm);
    let lane = RngStream::new(1);
    c.bench_function("cd_update_batch100", |b| {
        b.iter(|| {
            cd_update(
                black_box(&mut rbm),
                frames.view(),
                &ids,
                &cfg,
                &mut velocity,
                &lane.child(0),
            )
            .expect("update succeeds")
        })
    });
}

fn bench_ta_gradients(c: &mut Criterion) {
    let (data, batch) = window_batch();
    let cfg = TaConfig::default_for(UnitKind::Gaussian);
    let crbm = match TemporalModel::from_static(ModelKind::Crbm, base_rbm(data.dim()), ORDER) {
        TemporalModel::Crbm(m) => m,
        _ => unreachable!(),
    };
    c.bench_function("ta_gradient_crbm_batch100", |b| {
        b.iter(|| ta_gradient_crbm(black_box(&crbm), &batch, ORDER, &cfg).expect("gradient"))
    });
    let trbm = match TemporalModel::from_static(ModelKind::Trbm, base_rbm(data.dim()), ORDER) {
        TemporalModel::Trbm(m) => m,
        _ => unreachable!(),
    };
    c.bench_function("ta_gradient_trbm_batch100", |b| {
        b.iter(|| ta_gradient_trbm(black_box(&trbm), &batch, ORDER, &cfg).expect("gradient"))
    });
}

fn bench_generation(c: &mut Criterion) {
    let (data, batch) = window_batch();
    let model = TemporalModel::from_static(ModelKind::Crbm, base_rbm(data.dim()), ORDER);
    let lane = RngStream::new(2);
    c.bench_function("generate_batch100_gibbs100", |b| {
        b.iter(|| {
            let mut rngs: Vec<_> = (0..BATCH as u64).map(|i| lane.child(i).rng()).collect();
            model
                .generate_frames_batched(black_box(&batch), 100, false, &mut rngs)
                .expect("generation succeeds")
        })
    });
}

fn bench_fill_in(c: &mut Criterion) {
    let (data, _) = window_batch();
    let model = TemporalModel::from_static(ModelKind::Crbm, base_rbm(data.dim()), ORDER);
    let ws = windows(&data, ORDER, 0..BATCH + ORDER).expect("enough frames");
    let cfg = EvalConfig {
        mode: PredictionMode::SingleSample,
        gibbs_steps: 100,
        repetitions: 5,
        ..EvalConfig::default()
    };
    let lane = RngStream::new(3);
    let mut group = c.benchmark_group("eval");
    group.sample_size(20);
    group.bench_function("fill_in_100w_5rep_gibbs100", |b| {
        b.iter(|| fill_in(black_box(&model), &ws, &cfg, None, &lane).expect("report"))
    });
    group.finish();
}

criterion_group!(
    benches,
    bench_cd_update,
    bench_ta_gradients,
    bench_generation,
    bench_fill_in
);
criterion_main!(benches);
