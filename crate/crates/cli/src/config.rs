//! Experiment configuration files (TOML) and their validation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use fracdual::analysis::{ScanQuantity, Thresholds, Verdict};
use fracdual::domain::{BallSide, ShapeConfig};
use fracdual::kernel::{KernelConfig, QuadConfig};
use fracdual::measure::{DensityExpr, MeasureConfig};
use fracdual::solve::SolverConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Subcommand this file is written for; `assemble` accepts every file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<ShapeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub quadrature: QuadConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub measure: MeasureConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ellipticity: Option<EllipticitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duality: Option<DualitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fundamental: Option<FundamentalSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regularity: Option<RegularitySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub riesz: Option<RieszSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GeometrySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponents: Option<ExponentsSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Cells across the diameter of the domain.
    pub cells: usize,
    /// Box inflation per side in units of the domain diameter.
    #[serde(default = "one")]
    pub padding: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticitySection {
    #[serde(default = "ten_thousand")]
    pub samples: usize,
    /// Kernels checked in addition to `[kernel]`.
    #[serde(default)]
    pub kernels: Vec<KernelConfig>,
}

fn ten_thousand() -> usize {
    10_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveKind {
    Weak,
    Duality,
    Exterior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolveSection {
    pub kind: SolveKind,
    #[serde(default)]
    pub cases: Vec<ExteriorCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExteriorCase {
    pub name: String,
    pub phi: PhiConfig,
    /// Value beyond the grid box.
    #[serde(default)]
    pub tail: f64,
    /// Required accuracy when the data is one constant everywhere.
    #[serde(default = "constant_tol")]
    pub constant_tol: f64,
}

fn constant_tol() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhiConfig {
    Constant { value: f64 },
    /// Independent uniform values on exterior nodes.
    Random { lo: f64, hi: f64 },
    Field { expr: DensityExpr },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DualitySection {
    #[serde(default = "ten")]
    pub tests: usize,
    #[serde(default = "duality_tol")]
    pub tol: f64,
    /// Orders run in turn, replacing `kernel.s`; empty keeps the kernel as is.
    #[serde(default)]
    pub orders: Vec<f64>,
    /// Relative noise for the detector run; its mismatch must exceed `noise_floor`.
    #[serde(default = "noise")]
    pub noise: f64,
    #[serde(default = "noise_floor")]
    pub noise_floor: f64,
}

fn ten() -> usize {
    10
}
fn duality_tol() -> f64 {
    1e-8
}
fn noise() -> f64 {
    0.01
}
fn noise_floor() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceSection {
    pub cases: Vec<ConvergenceCase>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConvergenceCase {
    pub n: usize,
    pub s: f64,
    #[serde(default = "one")]
    pub radius: f64,
    pub cells: Vec<usize>,
    /// Require the error to decrease at every refinement.
    #[serde(default = "yes")]
    pub strictly_decreasing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_rate: Option<f64>,
    /// Relative tolerance for the center value on the finest grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center_tol: Option<f64>,
    /// Boundary distance of the region used for the consistency residual.
    #[serde(default = "deep_margin")]
    pub deep_margin: f64,
}

fn yes() -> bool {
    true
}
fn deep_margin() -> f64 {
    0.2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FundamentalSection {
    pub levels: Vec<usize>,
    pub x0: Vec<f64>,
    #[serde(default = "one")]
    pub mass: f64,
    /// Smallest annulus radius in units of `h`.
    #[serde(default = "four")]
    pub r_min_cells: f64,
    /// Largest outer annulus radius `2r`.
    pub r_max: f64,
    pub bound: f64,
}

fn four() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegularitySection {
    pub levels: Vec<usize>,
    #[serde(default)]
    pub thresholds: Thresholds,
    pub scans: Vec<ScanSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanSpec {
    pub quantity: ScanQuantity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingSection {
    pub s: f64,
    pub p: f64,
    pub levels: Vec<usize>,
    pub count: usize,
    pub radii: [f64; 2],
    pub drift_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RieszSection {
    pub alpha: f64,
    pub p: f64,
    /// Kernel constant; defaults to the isotropic Riesz normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constant: Option<f64>,
    /// The grid box is `[-half_width, half_width]^n`.
    pub half_width: f64,
    /// Cells per axis of the grid box.
    pub levels: Vec<usize>,
    pub count: usize,
    pub center_box: [f64; 2],
    pub radii: [f64; 2],
    /// Hoelder seminorms are taken over `|x_k| < region_half_width`.
    pub region_half_width: f64,
    pub drift_tol: f64,
    /// An exponent below `n/alpha` that must be refused.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refuse_p: Option<f64>,
    #[serde(default = "thousand")]
    pub bounds_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inversion: Option<InversionSection>,
}

fn thousand() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionSection {
    pub levels: Vec<usize>,
    pub bump_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySection {
    #[serde(default = "ten_thousand")]
    pub samples: usize,
    #[serde(default = "thousand")]
    pub probes: usize,
    pub checks: Vec<GeometryCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryCheck {
    pub label: String,
    pub domain: ShapeConfig,
    pub side: BallSide,
    pub radius: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expectation>,
    /// For expected failures: the witness must lie within this distance of `near`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub near_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentsSection {
    pub cases: Vec<ExponentCase>,
}

/// Exponents are written as decimal or `a/b` strings and evaluated exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentCase {
    pub label: String,
    pub n: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<String>,
    #[serde(default)]
    pub expect: BTreeMap<String, String>,
}

/// A config error pointing at a line of the file when one can be found.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
            if let Some(c) = self.column {
                write!(f, ":{c}")?;
            }
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn line_col(source: &str, offset: usize) -> (usize, usize) {
    let before = &source[..offset.min(source.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |p| p + 1) + 1;
    (line, col)
}

/// Line of `key` inside the table `table` (dotted, e.g. `riesz.inversion`),
/// or of the table header when `key` is empty or absent.
pub fn locate(source: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (k, raw) in source.lines().enumerate() {
        let line = raw.trim();
        if line.starts_with('[') {
            current = line.trim_matches(|c| c == '[' || c == ']').trim().to_string();
            if current == table && header.is_none() {
                header = Some(k + 1);
            }
            continue;
        }
        if current == table && !key.is_empty() {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(k + 1);
                }
            }
        }
        // keys of a top-level table can also be written inline
        if table.is_empty() && current.is_empty() && !key.is_empty() {
            if let Some(rest) = line.strip_prefix(key) {
                if rest.trim_start().starts_with('=') {
                    return Some(k + 1);
                }
            }
        }
    }
    header
}

impl ExperimentConfig {
    pub fn parse(source: &str, path: &Path) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(source).map_err(|e| {
            let (line, column) = match e.span() {
                Some(span) => {
                    let (l, c) = line_col(source, span.start);
                    (Some(l), Some(c))
                }
                None => (None, None),
            };
            ConfigError { path: path.to_path_buf(), line, column, message: e.message().trim().to_string() }
        })?;
        cfg.validate(source, path)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            column: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&source, path)
    }

    fn validate(&self, source: &str, path: &Path) -> Result<(), ConfigError> {
        let fail = |table: &str, key: &str, message: String| ConfigError {
            path: path.to_path_buf(),
            line: locate(source, table, key),
            column: None,
            message,
        };
        if let Some(k) = &self.kernel {
            k.build().map_err(|e| fail("kernel", "s", e.to_string()))?;
        }
        if let Some(d) = &self.domain {
            let shape = d.build().map_err(|e| fail("domain", "", e.to_string()))?;
            if let Some(k) = &self.kernel {
                if k.n != fracdual::domain::DomainShape::dim(&shape) {
                    return Err(fail("kernel", "n", format!("kernel dimension {} differs from the domain dimension", k.n)));
                }
            }
        }
        if let Some(g) = &self.grid {
            if g.cells < 2 {
                return Err(fail("grid", "cells", "grid.cells must be at least 2".into()));
            }
            if !(g.padding > 0.0) {
                return Err(fail("grid", "padding", "grid.padding must be positive".into()));
            }
        }
        self.quadrature.validate().map_err(|e| fail("quadrature", "", e.to_string()))?;
        if !(self.solver.tol > 0.0 && self.solver.tol < 1.0) || self.solver.max_iter == 0 {
            return Err(fail("solver", "tol", "solver.tol must lie in (0,1) and max_iter be positive".into()));
        }
        if let Some(d) = &self.duality {
            if let Some(s) = d.orders.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
                return Err(fail("duality", "orders", format!("order {s} outside (0,1)")));
            }
            if d.tests == 0 {
                return Err(fail("duality", "tests", "duality.tests must be positive".into()));
            }
        }
        if let Some(r) = &self.regularity {
            if r.levels.len() < 3 {
                return Err(fail("regularity", "levels", "a regularity scan needs at least three levels".into()));
            }
        }
        if let Some(c) = &self.convergence {
            if let Some(case) = c.cases.iter().find(|c| c.cells.len() < 2) {
                return Err(fail("convergence.cases", "cells", format!("convergence case n = {} needs two or more grids", case.n)));
            }
        }
        if let Some(f) = &self.fundamental {
            if f.levels.is_empty() {
                return Err(fail("fundamental", "levels", "fundamental.levels is empty".into()));
            }
        }
        if let Some(e) = &self.embedding {
            if e.levels.len() < 2 || e.count == 0 {
                return Err(fail("embedding", "levels", "embedding needs two or more levels and a positive count".into()));
            }
        }
        if let Some(r) = &self.riesz {
            if r.levels.len() < 2 || r.count == 0 {
                return Err(fail("riesz", "levels", "riesz needs two or more levels and a positive count".into()));
            }
        }
        Ok(())
    }
}

/// Sub-seed for one consumer of randomness, derived from the run seed.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    // FNV-1a of the purpose, then a SplitMix64 finalizer
    let mut z = purpose.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3)) ^ seed;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
