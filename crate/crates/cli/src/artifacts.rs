//! Output directory handling: CSV tables, the JSON summary, timings and the
//! failure marker.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

/// Version of the CSV column layouts documented in the README.
pub const CSV_SCHEMA: u32 = 1;
pub const SUMMARY_SCHEMA: &str = "fracdual-summary/1";
pub const SUMMARY_FILE: &str = "summary.json";
pub const TIMING_FILE: &str = "timing.json";
pub const FAILED_FILE: &str = "FAILED";

pub struct Artifacts {
    dir: PathBuf,
    written: Vec<String>,
}

impl Artifacts {
    /// Creates `dir` and clears outputs of an earlier run.
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
        for stale in [FAILED_FILE, SUMMARY_FILE, TIMING_FILE] {
            let p = dir.join(stale);
            if p.exists() {
                fs::remove_file(&p).with_context(|| format!("cannot remove {}", p.display()))?;
            }
        }
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// File names written so far, in order.
    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<()> {
        let path = self.dir.join(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot write {}", path.display()))?;
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("cannot write {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    /// Leaves a marker next to whatever partial artifacts exist.
    pub fn mark_failed(&self, error: &anyhow::Error) -> Result<()> {
        fs::write(self.dir.join(FAILED_FILE), format!("{error:#}\n"))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

/// Wall-clock timings, kept out of the summary so that summaries are
/// reproducible byte for byte.
#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub command: String,
    pub threads: usize,
    pub total_seconds: f64,
    pub stages: Vec<Stage>,
    #[serde(skip)]
    start: Option<Instant>,
}

impl Timing {
    pub fn start(command: &str) -> Self {
        Self {
            command: command.to_string(),
            threads: rayon::current_num_threads(),
            total_seconds: 0.0,
            stages: Vec::new(),
            start: Some(Instant::now()),
        }
    }

    pub fn stage<T>(&mut self, name: impl Into<String>, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.stages.push(Stage { name: name.into(), seconds: t.elapsed().as_secs_f64() });
        out
    }

    pub fn finish(&mut self) {
        if let Some(t) = self.start {
            self.total_seconds = t.elapsed().as_secs_f64();
        }
    }
}
