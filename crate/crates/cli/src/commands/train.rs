//! `tempora train`: load + optionally chunk-augment the dataset, normalize
//! on the training range, run the staged pipeline (or the supervised
//! baseline), and write checkpoint.bin, manifest.txt and metrics.csv.

use super::{code_version, require_file, resolve_config, setup_threads, CliError, CmdResult};
use crate::config::RunConfig;
use crate::manifest::{Manifest, MANIFEST_FILE};
use crate::TrainArgs;
use anyhow::{anyhow, bail, Context};
use std::fmt::Write as _;
use std::ops::Range;
use std::path::Path;
use tempora_core::checkpoint::Checkpoint;
use tempora_core::data::{self, SequenceDataset};
use tempora_core::eval::mlp_baseline;
use tempora_core::ta::{train_staged, MetricRecord, TrainingPhase};

/// Load `data.path`, applying chunk augmentation when configured. Returns
/// the dataset in frame form.
pub fn load_dataset(cfg: &RunConfig) -> Result<SequenceDataset, CliError> {
    if cfg.data_path.is_empty() {
        return Err(CliError::MissingInput(
            "no dataset path given (use --dataset or set data.path)".into(),
        ));
    }
    let path = Path::new(&cfg.data_path);
    require_file(path, "dataset")?;
    let dataset = data::load_csv(path, cfg.has_header)
        .map_err(|e| anyhow!("loading {}: {e}", path.display()))?;
    if cfg.chunk > 0 {
        if dataset.dim() != 1 {
            return Err(CliError::Other(anyhow!(
                "data.chunk = {} needs a univariate series, but {} has {} columns",
                cfg.chunk,
                path.display(),
                dataset.dim()
            )));
        }
        let series: Vec<f64> = dataset.frames.column(0).to_vec();
        let augmented = data::augment_univariate(&series, cfg.chunk)
            .map_err(|e| anyhow!("chunk augmentation: {e}"))?;
        if augmented.dropped > 0 {
            println!(
                "chunk augmentation dropped {} trailing observation(s)",
                augmented.dropped
            );
        }
        return Ok(augmented.dataset);
    }
    Ok(dataset)
}

/// Resolve `data.train_start`/`data.train_end` against the dataset
/// (`train_end = 0` means "all frames") and check it can hold at least one
/// window of `order` past frames plus a present.
pub fn resolve_train_range(
    cfg: &RunConfig,
    n_frames: usize,
) -> Result<Range<usize>, anyhow::Error> {
    let end = if cfg.train_end == 0 {
        n_frames
    } else {
        cfg.train_end
    };
    if cfg.train_start >= end || end > n_frames {
        bail!(
            "training range {}..{end} is invalid for {n_frames} frames",
            cfg.train_start
        );
    }
    if end - cfg.train_start < cfg.order + 1 {
        bail!(
            "training range {}..{end} holds {} frames, too few for order {} \
             (needs at least {})",
            cfg.train_start,
            end - cfg.train_start,
            cfg.order,
            cfg.order + 1
        );
    }
    Ok(cfg.train_start..end)
}

fn schedule_banner(cfg: &RunConfig) -> String {
    if cfg.baseline {
        let total =
            cfg.static_epochs + cfg.order * cfg.ta_epochs_per_delay + cfg.joint_epochs;
        format!(
            "schedule: supervised baseline, {total} epochs \
             ({} + {}x{} progressive + {} full-depth)",
            cfg.static_epochs, cfg.order, cfg.ta_epochs_per_delay, cfg.joint_epochs
        )
    } else if cfg.use_ta {
        format!(
            "schedule: {} static + {}x{} autoencoding + {} joint epochs",
            cfg.static_epochs, cfg.order, cfg.ta_epochs_per_delay, cfg.joint_epochs
        )
    } else {
        format!(
            "schedule: {} static + {} joint epochs (autoencoding disabled)",
            cfg.static_epochs, cfg.joint_epochs_cd_only
        )
    }
}

fn metrics_csv(records: &[MetricRecord]) -> String {
    let mut out = String::from("epoch,stage,loss,value\n");
    for r in records {
        writeln!(out, "{},{},{},{}", r.epoch, r.stage, r.loss_name, r.loss_value)
            .expect("string write");
    }
    out
}

pub fn run(args: &TrainArgs) -> CmdResult {
    let mut cfg = resolve_config(args.config.as_deref(), &args.set)?;
    if let Some(path) = &args.dataset {
        cfg.data_path = path.display().to_string();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(use_ta) = args.use_ta {
        cfg.use_ta = use_ta;
    }
    setup_threads(args.threads, &cfg);

    let dataset = load_dataset(&cfg)?;
    let train_range = resolve_train_range(&cfg, dataset.len())?;
    let (normalized, stats) = data::normalize(&dataset, train_range.clone())?;

    let spec = cfg.model_spec();
    let units = match spec.visible {
        tempora_core::rbm::UnitKind::Binary => "binary",
        tempora_core::rbm::UnitKind::Gaussian => "gaussian",
    };
    println!(
        "training {} ({units} visible units), order {}, {} hidden units on frames {}..{} \
         of {}, seed {}",
        spec.kind,
        spec.order,
        spec.hidden_units,
        train_range.start,
        train_range.end,
        dataset.len(),
        cfg.seed
    );
    println!("{}", schedule_banner(&cfg));

    let schedule = cfg.schedule();
    let (checkpoint, metrics) = if cfg.baseline {
        let outcome = mlp_baseline(&spec, &normalized, train_range.clone(), &schedule)
            .context("supervised baseline")?;
        let metrics: Vec<MetricRecord> = outcome
            .losses
            .iter()
            .enumerate()
            .map(|(i, &v)| MetricRecord {
                epoch: i + 1,
                stage: tempora_core::ta::Stage::Ta,
                loss_name: "supervised_mse",
                loss_value: v,
            })
            .collect();
        (
            Checkpoint {
                model: outcome.model,
                phase: TrainingPhase::JointDone,
                mlp_baseline: true,
            },
            metrics,
        )
    } else {
        let outcome = train_staged(&spec, &normalized, train_range.clone(), &schedule, cfg.use_ta)
            .context("staged training")?;
        (
            Checkpoint {
                model: outcome.model,
                phase: outcome.phase,
                mlp_baseline: false,
            },
            outcome.metrics,
        )
    };

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating {}", args.out_dir.display()))?;
    let checkpoint_path = args.out_dir.join("checkpoint.bin");
    checkpoint.save(&checkpoint_path)?;
    std::fs::write(args.out_dir.join("metrics.csv"), metrics_csv(&metrics))
        .context("writing metrics.csv")?;
    let manifest = Manifest {
        code_version: code_version().to_string(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        dataset: cfg.data_path.clone(),
        train_start: train_range.start,
        train_end: train_range.end,
        chunk: cfg.chunk,
        frames: normalized.len(),
        dim: normalized.dim(),
        norm_mean: stats.mean.to_vec(),
        norm_std: stats.std.to_vec(),
    };
    manifest.save(&args.out_dir.join(MANIFEST_FILE))?;

    if let Some(last) = metrics.last() {
        println!(
            "finished at epoch {} ({}): {} = {:.6}",
            last.epoch, last.stage, last.loss_name, last.loss_value
        );
    }
    println!(
        "wrote {}, manifest.txt, metrics.csv",
        checkpoint_path.display()
    );
    Ok(())
}
