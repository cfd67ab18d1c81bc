//! Run configuration: every knob of the pipeline under a dotted key.
//!
//! Values resolve with the precedence `CLI flag > config file > built-in
//! default`. A config file is plain text, one `key = value` per line, `#`
//! comments and blank lines ignored. `--set key=value` applies the same
//! keys from the command line, and dedicated flags (`--seed`, `--dataset`,
//! ...) are sugar for the corresponding key applied last.

use anyhow::{anyhow, bail, Context, Result};
use std::fmt::Write as _;
use tempora_core::eval::{EvalConfig, PredictionMode};
use tempora_core::rbm::{CdConfig, SparsityPenalty, UnitKind};
use tempora_core::ta::{TaConfig, TrainingSchedule};
use tempora_core::temporal::{ModelKind, ModelSpec};

/// Prediction mode by name; `eval.samples` supplies the chain count for
/// `posterior-mean`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalModeName {
    Single,
    PosteriorMean,
    Deterministic,
}

impl EvalModeName {
    fn as_str(self) -> &'static str {
        match self {
            EvalModeName::Single => "single",
            EvalModeName::PosteriorMean => "posterior-mean",
            EvalModeName::Deterministic => "deterministic",
        }
    }

    fn parse(value: &str) -> Result<Self> {
        match value {
            "single" => Ok(EvalModeName::Single),
            "posterior-mean" => Ok(EvalModeName::PosteriorMean),
            "deterministic" => Ok(EvalModeName::Deterministic),
            other => bail!("unknown mode {other:?} (single, posterior-mean, deterministic)"),
        }
    }

    pub fn to_mode(self, samples: usize) -> PredictionMode {
        match self {
            EvalModeName::Single => PredictionMode::SingleSample,
            EvalModeName::PosteriorMean => PredictionMode::PosteriorMean(samples),
            EvalModeName::Deterministic => PredictionMode::Deterministic,
        }
    }
}

/// All run settings. Defaults reproduce the reference pipeline: order-6
/// models with 100 hidden units, minibatches of 100, a 500-epoch budget
/// split 100 static + 50 per delay + 100 joint (100 + 400 without
/// autoencoding), 100 Gibbs steps and 100 repetitions at evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model_kind: ModelKind,
    pub units: UnitKind,
    pub order: usize,
    pub hidden: usize,

    pub use_ta: bool,
    pub baseline: bool,
    pub seed: u64,
    pub minibatch: usize,
    pub cd_steps: usize,
    pub visible_mean_field: bool,
    pub static_epochs: usize,
    pub static_lr: f64,
    pub static_momentum: f64,
    pub sparsity_target: f64,
    pub sparsity_strength: f64,
    pub ta_epochs_per_delay: usize,
    pub ta_lr: f64,
    pub ta_minibatch: usize,
    pub ta_update_biases: bool,
    pub ta_update_static: bool,
    pub joint_epochs: usize,
    pub joint_epochs_cd_only: usize,
    pub joint_lr: f64,
    pub joint_momentum: f64,

    pub data_path: String,
    pub train_start: usize,
    /// Exclusive end of the training range; 0 means "all frames".
    pub train_end: usize,
    /// Chunk size for univariate chunk augmentation; 0 disables it.
    pub chunk: usize,
    pub has_header: bool,

    pub eval_mode: EvalModeName,
    pub eval_samples: usize,
    pub gibbs_steps: usize,
    pub repetitions: usize,
    pub horizon: usize,
    pub mape_epsilon: f64,

    /// Worker threads for evaluation; 0 leaves the pool at its default.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model_kind: ModelKind::Crbm,
            units: UnitKind::Gaussian,
            order: 6,
            hidden: 100,
            use_ta: true,
            baseline: false,
            seed: 0,
            minibatch: 100,
            cd_steps: 1,
            visible_mean_field: false,
            static_epochs: 100,
            static_lr: 0.01,
            static_momentum: 0.9,
            sparsity_target: 0.1,
            sparsity_strength: 0.1,
            ta_epochs_per_delay: 50,
            ta_lr: 0.2,
            ta_minibatch: 100,
            ta_update_biases: false,
            ta_update_static: false,
            joint_epochs: 100,
            joint_epochs_cd_only: 400,
            joint_lr: 1e-4,
            joint_momentum: 0.9,
            data_path: String::new(),
            train_start: 0,
            train_end: 0,
            chunk: 0,
            has_header: true,
            eval_mode: EvalModeName::Single,
            eval_samples: 50,
            gibbs_steps: 100,
            repetitions: 100,
            horizon: 6,
            mape_epsilon: 1e-8,
            threads: 0,
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => bail!("{key}: expected true or false, got {other:?}"),
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("{key}: invalid value {value:?} ({e})"))
}

impl RunConfig {
    /// Set one field by its dotted key. Unknown keys and malformed values
    /// are errors that name the key.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "model.kind" => {
                self.model_kind = match value {
                    "trbm" => ModelKind::Trbm,
                    "crbm" => ModelKind::Crbm,
                    other => bail!("model.kind: expected trbm or crbm, got {other:?}"),
                }
            }
            "model.units" => {
                self.units = match value {
                    "binary" => UnitKind::Binary,
                    "gaussian" => UnitKind::Gaussian,
                    other => bail!("model.units: expected binary or gaussian, got {other:?}"),
                }
            }
            "model.order" => self.order = parse_num(key, value)?,
            "model.hidden" => self.hidden = parse_num(key, value)?,
            "train.use_ta" => self.use_ta = parse_bool(key, value)?,
            "train.baseline" => self.baseline = parse_bool(key, value)?,
            "train.seed" => self.seed = parse_num(key, value)?,
            "train.minibatch" => self.minibatch = parse_num(key, value)?,
            "train.cd_steps" => self.cd_steps = parse_num(key, value)?,
            "train.visible_mean_field" => self.visible_mean_field = parse_bool(key, value)?,
            "train.static_epochs" => self.static_epochs = parse_num(key, value)?,
            "train.static_lr" => self.static_lr = parse_num(key, value)?,
            "train.static_momentum" => self.static_momentum = parse_num(key, value)?,
            "train.sparsity_target" => self.sparsity_target = parse_num(key, value)?,
            "train.sparsity_strength" => self.sparsity_strength = parse_num(key, value)?,
            "train.ta_epochs_per_delay" => self.ta_epochs_per_delay = parse_num(key, value)?,
            "train.ta_lr" => self.ta_lr = parse_num(key, value)?,
            "train.ta_minibatch" => self.ta_minibatch = parse_num(key, value)?,
            "train.ta_update_biases" => self.ta_update_biases = parse_bool(key, value)?,
            "train.ta_update_static" => self.ta_update_static = parse_bool(key, value)?,
            "train.joint_epochs" => self.joint_epochs = parse_num(key, value)?,
            "train.joint_epochs_cd_only" => self.joint_epochs_cd_only = parse_num(key, value)?,
            "train.joint_lr" => self.joint_lr = parse_num(key, value)?,
            "train.joint_momentum" => self.joint_momentum = parse_num(key, value)?,
            "data.path" => self.data_path = value.to_string(),
            "data.train_start" => self.train_start = parse_num(key, value)?,
            "data.train_end" => self.train_end = parse_num(key, value)?,
            "data.chunk" => self.chunk = parse_num(key, value)?,
            "data.has_header" => self.has_header = parse_bool(key, value)?,
            "eval.mode" => self.eval_mode = EvalModeName::parse(value)?,
            "eval.samples" => self.eval_samples = parse_num(key, value)?,
            "eval.gibbs_steps" => self.gibbs_steps = parse_num(key, value)?,
            "eval.repetitions" => self.repetitions = parse_num(key, value)?,
            "eval.horizon" => self.horizon = parse_num(key, value)?,
            "eval.mape_epsilon" => self.mape_epsilon = parse_num(key, value)?,
            "threads" => self.threads = parse_num(key, value)?,
            other => bail!("unknown config key {other:?}"),
        }
        Ok(())
    }

    /// Canonical `key = value` dump: every key in a fixed order, parseable
    /// back by [`RunConfig::apply`]. The config hash is taken over this text.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let mut line = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        line("model.kind", self.model_kind.to_string());
        line(
            "model.units",
            match self.units {
                UnitKind::Binary => "binary".into(),
                UnitKind::Gaussian => "gaussian".into(),
            },
        );
        line("model.order", self.order.to_string());
        line("model.hidden", self.hidden.to_string());
        line("train.use_ta", self.use_ta.to_string());
        line("train.baseline", self.baseline.to_string());
        line("train.seed", self.seed.to_string());
        line("train.minibatch", self.minibatch.to_string());
        line("train.cd_steps", self.cd_steps.to_string());
        line(
            "train.visible_mean_field",
            self.visible_mean_field.to_string(),
        );
        line("train.static_epochs", self.static_epochs.to_string());
        line("train.static_lr", self.static_lr.to_string());
        line("train.static_momentum", self.static_momentum.to_string());
        line("train.sparsity_target", self.sparsity_target.to_string());
        line(
            "train.sparsity_strength",
            self.sparsity_strength.to_string(),
        );
        line(
            "train.ta_epochs_per_delay",
            self.ta_epochs_per_delay.to_string(),
        );
        line("train.ta_lr", self.ta_lr.to_string());
        line("train.ta_minibatch", self.ta_minibatch.to_string());
        line("train.ta_update_biases", self.ta_update_biases.to_string());
        line("train.ta_update_static", self.ta_update_static.to_string());
        line("train.joint_epochs", self.joint_epochs.to_string());
        line(
            "train.joint_epochs_cd_only",
            self.joint_epochs_cd_only.to_string(),
        );
        line("train.joint_lr", self.joint_lr.to_string());
        line("train.joint_momentum", self.joint_momentum.to_string());
        line("data.path", self.data_path.clone());
        line("data.train_start", self.train_start.to_string());
        line("data.train_end", self.train_end.to_string());
        line("data.chunk", self.chunk.to_string());
        line("data.has_header", self.has_header.to_string());
        line("eval.mode", self.eval_mode.as_str().to_string());
        line("eval.samples", self.eval_samples.to_string());
        line("eval.gibbs_steps", self.gibbs_steps.to_string());
        line("eval.repetitions", self.repetitions.to_string());
        line("eval.horizon", self.horizon.to_string());
        line("eval.mape_epsilon", self.mape_epsilon.to_string());
        line("threads", self.threads.to_string());
        s
    }

    /// FNV-1a hash of the canonical dump, as 16 hex digits.
    pub fn hash(&self) -> String {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for byte in self.dump().bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("{h:016x}")
    }

    /// Apply every `key = value` line of a config file, in order.
    pub fn apply_text(&mut self, text: &str, origin: &str) -> Result<()> {
        for (no, raw) in text.lines().enumerate() {
            let lin = raw.trim();
            if lin.is_empty() || lin.starts_with('#') {
                continue;
            }
            let (key, value) = lin
                .split_once('=')
                .with_context(|| format!("{origin}:{}: expected key = value", no + 1))?;
            self.apply(key.trim(), value.trim())
                .with_context(|| format!("{origin}:{}", no + 1))?;
        }
        Ok(())
    }

    /// Apply one `key=value` pair from a `--set` argument.
    pub fn apply_set(&mut self, pair: &str) -> Result<()> {
        let (key, value) = pair
            .split_once('=')
            .with_context(|| format!("--set {pair:?}: expected key=value"))?;
        self.apply(key.trim(), value.trim())
    }

    pub fn model_spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.model_kind,
            visible: self.units,
            hidden_units: self.hidden,
            order: self.order,
        }
    }

    pub fn schedule(&self) -> TrainingSchedule {
        let sparsity = if self.sparsity_strength > 0.0 {
            Some(SparsityPenalty {
                target: self.sparsity_target,
                strength: self.sparsity_strength,
            })
        } else {
            None
        };
        let mut ta = TaConfig::default_for(self.units);
        ta.epochs_per_delay = self.ta_epochs_per_delay;
        ta.learning_rate = self.ta_lr;
        ta.minibatch_size = self.ta_minibatch;
        ta.update_biases = self.ta_update_biases;
        ta.update_static = self.ta_update_static;
        TrainingSchedule {
            static_epochs: self.static_epochs,
            static_cd: CdConfig {
                steps: self.cd_steps,
                learning_rate: self.static_lr,
                momentum: self.static_momentum,
                visible_mean_field: self.visible_mean_field,
                sparsity,
            },
            ta,
            joint_epochs: self.joint_epochs,
            joint_epochs_cd_only: self.joint_epochs_cd_only,
            joint_cd: CdConfig {
                steps: self.cd_steps,
                learning_rate: self.joint_lr,
                momentum: self.joint_momentum,
                visible_mean_field: self.visible_mean_field,
                sparsity: None,
            },
            minibatch_size: self.minibatch,
            seed: self.seed,
        }
    }

    /// Evaluation settings for a model with the given visible-unit kind.
    pub fn eval_config(&self, units: UnitKind) -> EvalConfig {
        let mut cfg = EvalConfig {
            mode: self.eval_mode.to_mode(self.eval_samples),
            gibbs_steps: self.gibbs_steps,
            repetitions: self.repetitions,
            mape_epsilon: self.mape_epsilon,
            ..EvalConfig::default()
        };
        cfg.output_activation = match units {
            UnitKind::Binary => tempora_core::ta::OutputActivation::Sigmoid,
            UnitKind::Gaussian => tempora_core::ta::OutputActivation::Identity,
        };
        cfg
    }
}
