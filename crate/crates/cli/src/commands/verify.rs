//! `tempora verify`: run the oracle-backed self checks (exact enumeration,
//! gradient directions, finite differences, sampler frequencies) and print
//! one row per check. Any failure makes the command exit nonzero.

use super::{CliError, CmdResult};
use crate::{FaultArg, LevelArg, VerifyArgs};
use anyhow::anyhow;
use tempora_core::verify::{all_passed, run_suite, VerifyLevel, VerifyMutation};

pub fn run(args: &VerifyArgs) -> CmdResult {
    let level = match args.level {
        LevelArg::Quick => VerifyLevel::Quick,
        LevelArg::Full => VerifyLevel::Full,
    };
    let mutation = match args.inject_fault {
        FaultArg::None => VerifyMutation::None,
        FaultArg::FlipCdSign => VerifyMutation::FlipCdGradientSign,
    };
    let results = run_suite(level, mutation, args.seed)?;

    let name_width = results
        .iter()
        .map(|r| r.name.len())
        .max()
        .unwrap_or(0)
        .max("check".len());
    println!("{:name_width$}  result  detail", "check");
    for r in &results {
        println!(
            "{:name_width$}  {}  {}",
            r.name,
            if r.passed { "PASS  " } else { "FAIL  " },
            r.detail
        );
    }
    let passed = results.iter().filter(|r| r.passed).count();
    if all_passed(&results) {
        println!("{passed}/{} checks passed", results.len());
        Ok(())
    } else {
        Err(CliError::Other(anyhow!(
            "{}/{} checks failed",
            results.len() - passed,
            results.len()
        )))
    }
}
