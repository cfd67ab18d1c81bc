//! Acceptance suite. Each test prints one `criterion N (<name>): PASS/FAIL`
//! line with the measured numbers before asserting, so a full run yields a
//! six-line scoreboard for the library crate (the command-line crate carries
//! criteria 7-9). Run with `-- --nocapture` to see the lines of passing
//! criteria too; plain `cargo test` replays only failing output.
//!
//! Criteria 1-3 run the oracle suite once: exact enumeration, CD update
//! direction, autoencoding backprop against central finite differences, and
//! Gibbs marginals against enumeration. Criteria 4-6 train both temporal
//! model kinds with and without autoencoding pretraining on the released
//! benchmark over five seeds and compare fill-in and free-run errors; every
//! tolerance and protocol choice is pinned in code next to its assertion.

use std::ops::Range;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use tempora_core::data::{benchmark_sequence, normalize, windows, NormalizationStats, SequenceDataset};
use tempora_core::eval::{
    fill_in, free_run, mlp_baseline, EvalConfig, EvalTarget, MetricName, PredictionMode,
};
use tempora_core::rbm::UnitKind;
use tempora_core::ta::{train_staged, TrainingSchedule};
use tempora_core::temporal::{ModelKind, ModelSpec};
use tempora_core::verify::{run_suite, CheckResult, VerifyLevel, VerifyMutation};
use tempora_core::RngStream;

// --- criteria 1-3: oracle suite -------------------------------------------

struct OracleRun {
    results: Vec<CheckResult>,
    elapsed: Duration,
}

fn oracle_run() -> &'static OracleRun {
    static RUN: OnceLock<OracleRun> = OnceLock::new();
    RUN.get_or_init(|| {
        let start = Instant::now();
        let results =
            run_suite(VerifyLevel::Full, VerifyMutation::None, 7).expect("oracle suite runs");
        OracleRun { results, elapsed: start.elapsed() }
    })
}

fn named<'a>(run: &'a OracleRun, name: &str) -> &'a CheckResult {
    run.results
        .iter()
        .find(|c| c.name == name)
        .unwrap_or_else(|| panic!("missing check {name}"))
}

#[test]
fn criterion_1_exact_gradient_oracle() {
    let run = oracle_run();
    let norm = named(run, "enumeration-normalization");
    let dir = named(run, "cd-gradient-direction");
    let ok = norm.passed && dir.passed && run.elapsed < Duration::from_secs(30);
    println!(
        "criterion 1 (exact-gradient oracle): {} — {}; {}; suite took {:.2?} (budget 30s)",
        pass(ok),
        norm.detail,
        dir.detail,
        run.elapsed
    );
    assert!(ok, "{} / {}", norm.detail, dir.detail);
}

#[test]
fn criterion_2_autoencoding_gradients_match_finite_differences() {
    let run = oracle_run();
    let fd = named(run, "ta-finite-differences");
    let ok = fd.passed && run.elapsed < Duration::from_secs(10);
    println!(
        "criterion 2 (backprop vs finite differences): {} — {}; suite took {:.2?} (budget 10s)",
        pass(ok),
        fd.detail,
        run.elapsed
    );
    assert!(ok, "{}", fd.detail);
}

#[test]
fn criterion_3_sampler_fidelity() {
    let run = oracle_run();
    let s = named(run, "sampler-frequencies");
    println!("criterion 3 (sampler fidelity): {} — {}", pass(s.passed), s.detail);
    assert!(s.passed, "{}", s.detail);
}

// --- criteria 4-6: benchmark fixture ---------------------------------------

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const TRAIN: Range<usize> = 0..2000;
const EVAL: Range<usize> = 2000..3000;
/// Posterior-mean slice: 50 generation chains per window are ~50x the cost
/// of a single-sample fill, so the head of the evaluation span stands in for
/// the whole of it.
const PM_EVAL: Range<usize> = 2000..2150;
const PM_CHAINS: usize = 50;

/// Per-seed measurements for one model kind.
struct KindNumbers {
    cd_fill: Vec<f64>,
    ta_fill: Vec<f64>,
    mlp_fill: Vec<f64>,
    ta_fill_pm_slice: Vec<f64>,
    ta_fill_ss_slice: Vec<f64>,
    ta_freerun6_det: Vec<f64>,
    cd_step1: Vec<f64>,
}

impl KindNumbers {
    fn empty() -> Self {
        Self {
            cd_fill: Vec::new(),
            ta_fill: Vec::new(),
            mlp_fill: Vec::new(),
            ta_fill_pm_slice: Vec::new(),
            ta_fill_ss_slice: Vec::new(),
            ta_freerun6_det: Vec::new(),
            cd_step1: Vec::new(),
        }
    }
}

struct Fixture {
    crbm: KindNumbers,
    trbm: KindNumbers,
    /// Training plus the three fill-in measurements (criterion 4's scope).
    fill_elapsed: Duration,
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite metric"));
    v[v.len() / 2]
}

/// Per-seed mean over the two model kinds, then the median over seeds: the
/// benchmark-level summary of one training recipe.
fn pooled_median(a: &[f64], b: &[f64]) -> f64 {
    let merged: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect();
    median(&merged)
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn measure_kind(
    kind: ModelKind,
    data: &SequenceDataset,
    stats: &NormalizationStats,
    seed: u64,
    out: &mut KindNumbers,
    fill_elapsed: &mut Duration,
) {
    let spec = ModelSpec {
        kind,
        visible: UnitKind::Gaussian,
        hidden_units: 100,
        order: 6,
    };
    let mut schedule = TrainingSchedule::default_for(UnitKind::Gaussian);
    schedule.seed = seed;

    let ws = windows(data, spec.order, EVAL).expect("evaluation windows");
    let ws_pm = windows(data, spec.order, PM_EVAL).expect("posterior-mean windows");
    let lane = RngStream::new(seed).child(4);

    // headline fill-in protocol: one generated frame per window (the
    // posterior-mean and deterministic readouts are measured separately)
    let single = EvalConfig {
        mode: PredictionMode::SingleSample,
        repetitions: 2,
        ..EvalConfig::default()
    };
    let det = EvalConfig {
        mode: PredictionMode::Deterministic,
        repetitions: 1,
        ..EvalConfig::default()
    };
    let pm = EvalConfig {
        mode: PredictionMode::PosteriorMean(PM_CHAINS),
        repetitions: 1,
        ..EvalConfig::default()
    };

    let t0 = Instant::now();
    let cd = train_staged(&spec, data, TRAIN, &schedule, false).expect("CD-only training");
    let ta = train_staged(&spec, data, TRAIN, &schedule, true).expect("staged TA training");
    let mlp = mlp_baseline(&spec, data, TRAIN, &schedule).expect("baseline training");

    let cd_fill = fill_in(&cd.model, &ws, &single, Some(stats), &lane).expect("CD fill");
    let ta_fill = fill_in(&ta.model, &ws, &single, Some(stats), &lane).expect("TA fill");
    // the deterministic baseline is read out deterministically: its forward
    // pass is the prediction, there is nothing to sample
    let mlp_fill = fill_in(&mlp.model, &ws, &det, Some(stats), &lane).expect("baseline fill");
    *fill_elapsed += t0.elapsed();

    out.cd_fill.push(cd_fill.mse_mean);
    out.ta_fill.push(ta_fill.mse_mean);
    out.mlp_fill.push(mlp_fill.mse_mean);

    let ta_ss = fill_in(&ta.model, &ws_pm, &single, Some(stats), &lane).expect("TA slice fill");
    let ta_pm = fill_in(&ta.model, &ws_pm, &pm, Some(stats), &lane).expect("TA posterior mean");
    out.ta_fill_ss_slice.push(ta_ss.mse_mean);
    out.ta_fill_pm_slice.push(ta_pm.mse_mean);

    let target = EvalTarget { dataset: data, range: EVAL, norm: Some(stats) };
    // forecasts are read out deterministically (the chain feeds its own
    // conditional-mean prediction back); the step-1 reference keeps the
    // headline single-sample protocol
    let fr_ta = free_run(&ta.model, &target, 6, MetricName::Mse, &det, &lane).expect("TA free-run");
    let fr_cd = free_run(&cd.model, &target, 1, MetricName::Mse, &single, &lane).expect("CD step 1");
    out.ta_freerun6_det.push(fr_ta.per_step[5]);
    out.cd_step1.push(fr_cd.per_step[0]);
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let mut crbm = KindNumbers::empty();
        let mut trbm = KindNumbers::empty();
        let mut fill_elapsed = Duration::ZERO;
        for &seed in &SEEDS {
            let raw = benchmark_sequence(seed);
            let (data, stats) = normalize(&raw, TRAIN).expect("normalization");
            measure_kind(ModelKind::Crbm, &data, &stats, seed, &mut crbm, &mut fill_elapsed);
            measure_kind(ModelKind::Trbm, &data, &stats, seed, &mut trbm, &mut fill_elapsed);
        }
        Fixture { crbm, trbm, fill_elapsed }
    })
}

#[test]
fn criterion_4_pretraining_improvement_and_baseline_ordering() {
    let f = fixture();

    // clause 1 names the kinds: each must improve by >= 20% in median
    let cd_c = median(&f.crbm.cd_fill);
    let ta_c = median(&f.crbm.ta_fill);
    let cd_t = median(&f.trbm.cd_fill);
    let ta_t = median(&f.trbm.ta_fill);
    let imp_c = 100.0 * (cd_c - ta_c) / cd_c;
    let imp_t = 100.0 * (cd_t - ta_t) / cd_t;
    let clause1 = ta_c < cd_c && ta_t < cd_t && imp_c >= 20.0 && imp_t >= 20.0;

    // clause 2 ranks the three training recipes on the benchmark as a whole,
    // so each recipe is summarized across kinds before taking the median;
    // the baseline is deterministic by construction and is evaluated so
    let ta_p = pooled_median(&f.crbm.ta_fill, &f.trbm.ta_fill);
    let mlp_p = pooled_median(&f.crbm.mlp_fill, &f.trbm.mlp_fill);
    let cd_p = pooled_median(&f.crbm.cd_fill, &f.trbm.cd_fill);
    let clause2 = ta_p < mlp_p && mlp_p < cd_p;

    let budget = f.fill_elapsed < Duration::from_secs(900);
    let ok = clause1 && clause2 && budget;
    println!(
        "criterion 4 (pretraining improvement and baseline ordering): {} — \
         CRBM {cd_c:.4}->{ta_c:.4} ({imp_c:.1}%), TRBM {cd_t:.4}->{ta_t:.4} ({imp_t:.1}%); \
         ordering TA {ta_p:.4} < baseline {mlp_p:.4} < CD {cd_p:.4} is {}; \
         train+fill took {:.1?} (budget 15 min)",
        pass(ok),
        clause2,
        f.fill_elapsed
    );
    assert!(
        clause1,
        "median fill-in must improve by >= 20% for both kinds: CRBM {imp_c:.1}%, TRBM {imp_t:.1}%"
    );
    assert!(
        clause2,
        "median fill-in must order TA ({ta_p:.4}) < baseline ({mlp_p:.4}) < CD ({cd_p:.4})"
    );
    assert!(budget, "criterion 4 exceeded its 15-minute budget: {:?}", f.fill_elapsed);
}

#[test]
fn criterion_5_posterior_mean_effect() {
    let f = fixture();
    let ss_c = median(&f.crbm.ta_fill_ss_slice);
    let pm_c = median(&f.crbm.ta_fill_pm_slice);
    let ss_t = median(&f.trbm.ta_fill_ss_slice);
    let pm_t = median(&f.trbm.ta_fill_pm_slice);
    let ok = pm_c <= ss_c && pm_t <= ss_t;
    println!(
        "criterion 5 (posterior-mean effect): {} — mean of {PM_CHAINS} vs single sample: \
         CRBM {pm_c:.4} <= {ss_c:.4}, TRBM {pm_t:.4} <= {ss_t:.4}",
        pass(ok)
    );
    assert!(ok, "averaging {PM_CHAINS} generations must not raise the fill-in MSE");
}

#[test]
fn criterion_6_horizon_robustness() {
    let f = fixture();
    let fr_p = pooled_median(&f.crbm.ta_freerun6_det, &f.trbm.ta_freerun6_det);
    let cd_p = pooled_median(&f.crbm.cd_step1, &f.trbm.cd_step1);
    let ok = fr_p <= cd_p;
    println!(
        "criterion 6 (horizon robustness): {} — pretrained free-run step-6 {fr_p:.4} <= \
         CD-only step-1 {cd_p:.4} (per kind: CRBM {:.4} vs {:.4}, TRBM {:.4} vs {:.4})",
        pass(ok),
        median(&f.crbm.ta_freerun6_det),
        median(&f.crbm.cd_step1),
        median(&f.trbm.ta_freerun6_det),
        median(&f.trbm.cd_step1),
    );
    assert!(
        ok,
        "six generated frames must not exceed the unpretrained single-frame error \
         ({fr_p:.4} vs {cd_p:.4})"
    );
}
