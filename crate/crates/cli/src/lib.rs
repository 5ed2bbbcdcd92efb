//! Experiment driver for the `fracdual` library: config loading, runners and
//! artifact output.

pub mod artifacts;
pub mod commands;
pub mod config;

use std::path::Path;

use anyhow::Result;
use serde_json::json;

pub use commands::{Check, Command};
pub use config::ExperimentConfig;

use artifacts::{Artifacts, Timing, CSV_SCHEMA, SUMMARY_FILE, SUMMARY_SCHEMA, TIMING_FILE};

/// What a finished command reports back to the caller.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub written: Vec<String>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Runs `command` on `cfg`, writing every artifact under `out`. On error the
/// directory keeps a `FAILED` marker holding the message.
pub fn run(command: Command, cfg: &ExperimentConfig, out: &Path, seed_override: Option<u64>) -> Result<Outcome> {
    let mut art = Artifacts::create(out)?;
    match run_inner(command, cfg, &mut art, seed_override) {
        Ok(o) => Ok(o),
        Err(e) => {
            art.mark_failed(&e)?;
            Err(e)
        }
    }
}

fn run_inner(command: Command, cfg: &ExperimentConfig, art: &mut Artifacts, seed_override: Option<u64>) -> Result<Outcome> {
    // `assemble` reads any config and reports every operator its experiment builds
    if let Some(want) = &cfg.command {
        if want != command.name() && command != Command::Assemble {
            anyhow::bail!("this config is written for '{want}', not '{}'", command.name());
        }
    }
    let seed = seed_override.unwrap_or(cfg.seed);
    let mut timing = Timing::start(command.name());
    let mut state = commands::Run { cfg, seed, art, timing: &mut timing, checks: Vec::new() };
    let results = commands::dispatch(command, &mut state)?;
    let checks = std::mem::take(&mut state.checks);
    timing.finish();
    let passed = checks.iter().all(|c| c.passed);
    let summary = json!({
        "schema": SUMMARY_SCHEMA,
        "csv_schema": CSV_SCHEMA,
        "command": command.name(),
        "seed": seed,
        "passed": passed,
        "checks": checks,
        "results": results,
        "config": cfg,
    });
    art.json(SUMMARY_FILE, &summary)?;
    art.json(TIMING_FILE, &timing)?;
    Ok(Outcome { checks, written: art.written().to_vec() })
}
