//! `tempora eval`: score a checkpoint on a frame range. Writes report.csv
//! (per-window filling-in error plus mean predictions) and horizon.csv
//! (free-running error per step ahead), and prints a summary with units
//! stated explicitly: MSE in normalized units, MAPE in original units.

use super::{require_file, resolve_config, setup_threads, CliError, CmdResult};
use crate::config::RunConfig;
use crate::manifest::{Manifest, MANIFEST_FILE};
use crate::EvalArgs;
use anyhow::{anyhow, Context};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use tempora_core::checkpoint::Checkpoint;
use tempora_core::data::{self, NormalizationStats, SequenceDataset};
use tempora_core::eval::{fill_in, free_run, EvalTarget, MetricName, PredictionMode};
use tempora_core::RngStream;

/// Evaluation draws its randomness from this child of the seed stream;
/// training uses children 0..=3, so the two never share a lane.
const EVAL_LANE: u64 = 4;

fn same_file(a: &Path, b: &Path) -> bool {
    match (a.canonicalize(), b.canonicalize()) {
        (Ok(ca), Ok(cb)) => ca == cb,
        _ => a == b,
    }
}

fn resolve_dataset_path(
    args: &EvalArgs,
    cfg: &RunConfig,
    manifest: Option<&Manifest>,
) -> Result<PathBuf, CliError> {
    if let Some(path) = &args.dataset {
        return Ok(path.clone());
    }
    if !cfg.data_path.is_empty() {
        return Ok(PathBuf::from(&cfg.data_path));
    }
    if let Some(m) = manifest {
        return Ok(PathBuf::from(&m.dataset));
    }
    Err(CliError::MissingInput(
        "no dataset path given (use --dataset, data.path, or a run manifest)".into(),
    ))
}

fn load_for_eval(
    path: &Path,
    cfg: &RunConfig,
    manifest: Option<&Manifest>,
) -> Result<SequenceDataset, CliError> {
    require_file(path, "dataset")?;
    let dataset = data::load_csv(path, cfg.has_header)
        .map_err(|e| anyhow!("loading {}: {e}", path.display()))?;
    // Reproduce the training-time chunk augmentation when scoring a raw
    // univariate file with a model trained on chunked frames.
    let chunk = manifest.map(|m| m.chunk).unwrap_or(cfg.chunk);
    if chunk > 0 && dataset.dim() == 1 {
        let series: Vec<f64> = dataset.frames.column(0).to_vec();
        let augmented = data::augment_univariate(&series, chunk)
            .map_err(|e| anyhow!("chunk augmentation: {e}"))?;
        return Ok(augmented.dataset);
    }
    Ok(dataset)
}

pub fn run(args: &EvalArgs) -> CmdResult {
    let mut cfg = resolve_config(args.config.as_deref(), &args.set)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(mode) = args.mode {
        cfg.eval_mode = mode;
    }
    if let Some(samples) = args.samples {
        cfg.eval_samples = samples;
    }
    if let Some(gibbs) = args.gibbs_steps {
        cfg.gibbs_steps = gibbs;
    }
    if let Some(reps) = args.repetitions {
        cfg.repetitions = reps;
    }
    if let Some(h) = args.horizon {
        cfg.horizon = h;
    }
    setup_threads(args.threads, &cfg);

    require_file(&args.checkpoint, "checkpoint")?;
    let checkpoint = Checkpoint::load(&args.checkpoint)
        .map_err(|e| anyhow!("loading {}: {e}", args.checkpoint.display()))?;
    let manifest_path = args
        .checkpoint
        .parent()
        .map(|dir| dir.join(MANIFEST_FILE))
        .filter(|p| p.exists());
    let manifest = match &manifest_path {
        Some(p) => Some(Manifest::load(p)?),
        None => None,
    };

    let dataset_path = resolve_dataset_path(args, &cfg, manifest.as_ref())?;
    let dataset = load_for_eval(&dataset_path, &cfg, manifest.as_ref())?;
    let model = &checkpoint.model;
    if dataset.dim() != model.visible_dim() {
        return Err(CliError::Other(anyhow!(
            "dimension mismatch: {} has {} columns, the checkpoint models {} visible units",
            dataset_path.display(),
            dataset.dim(),
            model.visible_dim()
        )));
    }

    // Evaluation range: default to the frames after the training range when
    // scoring the training dataset, otherwise the whole file.
    let trained_on_this = manifest
        .as_ref()
        .map(|m| same_file(Path::new(&m.dataset), &dataset_path))
        .unwrap_or(false);
    let start = args.start.unwrap_or(match (&manifest, trained_on_this) {
        (Some(m), true) => m.train_end,
        _ => 0,
    });
    let end = args.end.unwrap_or(dataset.len());
    if start >= end || end > dataset.len() {
        return Err(CliError::Other(anyhow!(
            "evaluation range {start}..{end} is invalid for {} frames",
            dataset.len()
        )));
    }
    if end - start < model.order() + 1 {
        return Err(CliError::Other(anyhow!(
            "evaluation range {start}..{end} holds {} frames, too few for order {} \
             (needs at least {})",
            end - start,
            model.order(),
            model.order() + 1
        )));
    }
    if let (Some(m), true) = (&manifest, trained_on_this) {
        let overlap = start < m.train_end && m.train_start < end;
        if overlap && !args.allow_train_eval {
            return Err(CliError::Other(anyhow!(
                "frames {start}..{end} overlap the training range {}..{} of this checkpoint; \
                 evaluate a held-out range or pass --allow-train-eval",
                m.train_start,
                m.train_end
            )));
        }
    }

    let eval_cfg = cfg.eval_config(model.base().visible_kind);
    if checkpoint.mlp_baseline && eval_cfg.mode != PredictionMode::Deterministic {
        return Err(CliError::Other(anyhow!(
            "this checkpoint holds the supervised baseline, which has no sampling \
             semantics; use --mode deterministic"
        )));
    }

    // Normalize with the training-time statistics so the model sees the same
    // units it was trained on; without a manifest, fit on the scored range.
    let stats = match &manifest {
        Some(m) if m.dim == dataset.dim() => m.stats(),
        Some(m) => {
            return Err(CliError::Other(anyhow!(
                "manifest normalization is {}-dimensional but the dataset has {} columns",
                m.dim,
                dataset.dim()
            )));
        }
        None => {
            log::warn!(
                "no run manifest next to the checkpoint; fitting normalization on the \
                 evaluation range itself"
            );
            NormalizationStats::fit(dataset.frames.slice(ndarray::s![start..end, ..]))?
        }
    };
    let normalized = SequenceDataset::new(stats.normalize_frames(dataset.frames.view()));

    let lane = RngStream::new(cfg.seed).child(EVAL_LANE);
    let ws = data::windows(&normalized, model.order(), start..end)?;
    let report = fill_in(model, &ws, &eval_cfg, Some(&stats), &lane)?;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;

    // report.csv: per-window filling-in error and the mean predicted frame
    // (original units).
    let names: Vec<String> = match &dataset.dim_names {
        Some(n) => n.clone(),
        None => (0..dataset.dim()).map(|d| format!("d{d}")).collect(),
    };
    let mut text = String::from("source_index,mse");
    for name in &names {
        write!(text, ",pred_{name}").expect("string write");
    }
    text.push('\n');
    let denorm_preds = stats.denormalize_frames(report.predictions.view());
    for (i, w) in ws.iter().enumerate() {
        write!(text, "{},{}", w.source_index, report.per_window_mse[i]).expect("string write");
        for v in denorm_preds.row(i) {
            write!(text, ",{v}").expect("string write");
        }
        text.push('\n');
    }
    std::fs::write(args.out_dir.join("report.csv"), text).context("writing report.csv")?;

    println!(
        "filling in {} windows of {}..{end}, {} repetition(s), mode {}:",
        report.n_windows,
        start,
        report.repetitions,
        mode_label(&eval_cfg.mode),
    );
    println!(
        "  MSE  (normalized units): {:.6} +/- {:.6}",
        report.mse_mean, report.mse_sd
    );
    println!(
        "  MAPE (original units):   {:.4}% +/- {:.4}%",
        report.mape_mean, report.mape_sd
    );

    // horizon.csv: free-running error per step ahead, both metrics. The two
    // runs share the lane, so they score the same generated trajectories.
    if cfg.horizon > 0 {
        let target = EvalTarget {
            dataset: &normalized,
            range: start..end,
            norm: Some(&stats),
        };
        let mse_curve = free_run(model, &target, cfg.horizon, MetricName::Mse, &eval_cfg, &lane)?;
        let mape_curve =
            free_run(model, &target, cfg.horizon, MetricName::Mape, &eval_cfg, &lane)?;
        let mut text = String::from("step,mse_mean,mse_sd,mape_mean,mape_sd,n_trials\n");
        for step in 0..cfg.horizon {
            writeln!(
                text,
                "{},{},{},{},{},{}",
                step + 1,
                mse_curve.per_step[step],
                mse_curve.dispersion[step],
                mape_curve.per_step[step],
                mape_curve.dispersion[step],
                mse_curve.n_trials
            )
            .expect("string write");
        }
        std::fs::write(args.out_dir.join("horizon.csv"), text).context("writing horizon.csv")?;
        println!(
            "free-running {} steps: MSE {:.6} at step 1 -> {:.6} at step {}",
            cfg.horizon,
            mse_curve.per_step[0],
            mse_curve.per_step[cfg.horizon - 1],
            cfg.horizon
        );
        println!(
            "wrote {}/report.csv, {}/horizon.csv",
            args.out_dir.display(),
            args.out_dir.display()
        );
    } else {
        println!("wrote {}/report.csv (horizon 0: no free run)", args.out_dir.display());
    }
    Ok(())
}

fn mode_label(mode: &PredictionMode) -> String {
    match mode {
        PredictionMode::SingleSample => "single".into(),
        PredictionMode::PosteriorMean(k) => format!("posterior-mean({k})"),
        PredictionMode::Deterministic => "deterministic".into(),
    }
}
