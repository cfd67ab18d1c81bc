//! `tempora inspect`: print what a checkpoint contains — model kind, unit
//! kind, sizes, training phase, parameter count — plus the run manifest
//! when one sits next to it.

use super::{require_file, CliError, CmdResult};
use crate::manifest::MANIFEST_FILE;
use crate::InspectArgs;
use anyhow::anyhow;
use tempora_core::checkpoint::Checkpoint;

pub fn run(args: &InspectArgs) -> CmdResult {
    require_file(&args.checkpoint, "checkpoint")?;
    let checkpoint = Checkpoint::load(&args.checkpoint)
        .map_err(|e| CliError::Other(anyhow!("loading {}: {e}", args.checkpoint.display())))?;
    println!("{}", checkpoint.summary());
    if let Some(manifest) = args
        .checkpoint
        .parent()
        .map(|dir| dir.join(MANIFEST_FILE))
        .filter(|p| p.exists())
    {
        println!("--- {} ---", manifest.display());
        print!("{}", std::fs::read_to_string(&manifest).unwrap_or_default());
    }
    Ok(())
}
