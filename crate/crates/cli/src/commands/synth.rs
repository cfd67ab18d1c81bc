//! `tempora synth`: dataset generators. `multisine` writes one independent
//! sine per dimension; `harmonic` writes the released benchmark (mixed
//! harmonic oscillators, same seed = same bytes); `chunk` re-shapes a
//! univariate series into frames of consecutive observations. All leave a
//! sidecar manifest recording how the file was produced.

use super::{code_version, require_file, CliError, CmdResult};
use crate::{SynthArgs, SynthKind};
use anyhow::{anyhow, Context};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use tempora_core::data;

/// `data.csv` → `data.manifest.txt`, `frames` → `frames.manifest.txt`.
fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("manifest.txt")
}

fn write_outputs(
    dataset: &data::SequenceDataset,
    out: &Path,
    manifest: String,
) -> Result<(), CliError> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    data::save_csv(dataset, out).map_err(|e| anyhow!("writing {}: {e}", out.display()))?;
    std::fs::write(sidecar(out), manifest)
        .with_context(|| format!("writing {}", sidecar(out).display()))?;
    println!(
        "wrote {} frames x {} dims to {} (manifest: {})",
        dataset.len(),
        dataset.dim(),
        out.display(),
        sidecar(out).display()
    );
    Ok(())
}

pub fn run(args: &SynthArgs) -> CmdResult {
    match &args.kind {
        SynthKind::Multisine {
            dims,
            length,
            freqs,
            noise_sd,
            seed,
            out,
        } => {
            // default tones follow the benchmark progression 0.05 + 0.02 d
            let freqs: Vec<f64> = match freqs {
                Some(f) => f.clone(),
                None => (0..*dims).map(|d| 0.05 + 0.02 * d as f64).collect(),
            };
            let dataset = data::synth_multisine(*dims, *length, &freqs, *noise_sd, *seed)?;
            let mut manifest = String::new();
            let mut line = |k: &str, v: String| {
                writeln!(manifest, "{k} = {v}").expect("string write");
            };
            line("generator", "multisine".into());
            line("code_version", code_version().into());
            line("dims", dims.to_string());
            line("length", length.to_string());
            line(
                "freqs",
                freqs
                    .iter()
                    .map(|f| f.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            line("noise_sd", noise_sd.to_string());
            line("seed", seed.to_string());
            write_outputs(&dataset, out, manifest)
        }
        SynthKind::Harmonic {
            dims,
            length,
            periods,
            harmonics,
            decay,
            noise_sd,
            seed,
            out,
        } => {
            let periods: Vec<f64> = match periods {
                Some(p) => p.clone(),
                None => data::BENCHMARK_PERIODS.to_vec(),
            };
            let dataset = data::synth_harmonic_mix(
                *dims, *length, &periods, *harmonics, *decay, *noise_sd, *seed,
            )?;
            let mut manifest = String::new();
            let mut line = |k: &str, v: String| {
                writeln!(manifest, "{k} = {v}").expect("string write");
            };
            line("generator", "harmonic".into());
            line("code_version", code_version().into());
            line("dims", dims.to_string());
            line("length", length.to_string());
            line(
                "periods",
                periods
                    .iter()
                    .map(|p| p.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
            );
            line("harmonics", harmonics.to_string());
            line("decay", decay.to_string());
            line("noise_sd", noise_sd.to_string());
            line("seed", seed.to_string());
            write_outputs(&dataset, out, manifest)
        }
        SynthKind::Chunk {
            input,
            chunk,
            has_header,
            out,
        } => {
            require_file(input, "input series")?;
            let series = data::load_csv(input, *has_header)
                .map_err(|e| anyhow!("loading {}: {e}", input.display()))?;
            if series.dim() != 1 {
                return Err(CliError::Other(anyhow!(
                    "chunk augmentation needs a univariate series, but {} has {} columns",
                    input.display(),
                    series.dim()
                )));
            }
            let observations: Vec<f64> = series.frames.column(0).to_vec();
            let augmented = data::augment_univariate(&observations, *chunk)?;
            let mut manifest = String::new();
            let mut line = |k: &str, v: String| {
                writeln!(manifest, "{k} = {v}").expect("string write");
            };
            line("generator", "chunk".into());
            line("code_version", code_version().into());
            line("source", input.display().to_string());
            line("chunk", chunk.to_string());
            line("dropped", augmented.dropped.to_string());
            write_outputs(&augmented.dataset, out, manifest)
        }
    }
}
