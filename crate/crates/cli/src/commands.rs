//! One runner per subcommand. Each returns a JSON result block and records
//! named pass/fail checks against the thresholds in the config.

use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use fracdual::analysis::{
    critical_exponents, embedding_ratio, fit_slope, random_bumps, regularity_scans, ExponentSet, ScanProblem,
    ScanQuantity,
};
use fracdual::domain::{
    build_mask, exterior_ball_check, interior_ball_check, BallCheckConfig, BallSide, DomainMask, DomainShape, Grid,
};
use fracdual::field::GridFunction;
use fracdual::kernel::{ellipticity_check, normalization_constant, KernelConfig, KernelSpec};
use fracdual::measure::{total_variation, RadonMeasure};
use fracdual::operator::{assemble, BallSolution, DiscreteOperator};
use fracdual::riesz::{
    holder_mapping_check, inversion_check, kernel_bounds_check, random_disc_indicators, riesz_constant,
    PotentialKernel,
};
use fracdual::solve::{
    comparability_constant, duality_solve, duality_verify, dyadic_radii, exterior_data_solve,
    fundamental_ratio_scan, random_test_functions, weak_solve,
};
use fracdual::Error as CoreError;
use num_rational::Rational64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::artifacts::{Artifacts, Timing};
use crate::config::{derive_seed, Expectation, ExperimentConfig, PhiConfig, SolveKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Assemble,
    Solve,
    DualityCheck,
    Convergence,
    Fundamental,
    Regularity,
    Embedding,
    Riesz,
    Geometry,
    Exponents,
}

impl Command {
    pub const ALL: [Command; 10] = [
        Command::Assemble,
        Command::Solve,
        Command::DualityCheck,
        Command::Convergence,
        Command::Fundamental,
        Command::Regularity,
        Command::Embedding,
        Command::Riesz,
        Command::Geometry,
        Command::Exponents,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::Assemble => "assemble",
            Command::Solve => "solve",
            Command::DualityCheck => "duality-check",
            Command::Convergence => "convergence",
            Command::Fundamental => "fundamental",
            Command::Regularity => "regularity",
            Command::Embedding => "embedding",
            Command::Riesz => "riesz",
            Command::Geometry => "geometry",
            Command::Exponents => "exponents",
        }
    }
}

impl FromStr for Command {
    type Err = anyhow::Error;
    fn from_str(s: &str) -> Result<Self> {
        Command::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| anyhow!("unknown command '{s}'"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// State shared by the runners of one invocation.
pub struct Run<'a> {
    pub cfg: &'a ExperimentConfig,
    pub seed: u64,
    pub art: &'a mut Artifacts,
    pub timing: &'a mut Timing,
    pub checks: Vec<Check>,
}

impl Run<'_> {
    fn check(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.checks.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    fn sub_seed(&self, purpose: &str) -> u64 {
        derive_seed(self.seed, purpose)
    }
}

pub fn dispatch(command: Command, run: &mut Run) -> Result<Value> {
    match command {
        Command::Assemble => assemble_cmd(run),
        Command::Solve => solve_cmd(run),
        Command::DualityCheck => duality_cmd(run),
        Command::Convergence => convergence_cmd(run),
        Command::Fundamental => fundamental_cmd(run),
        Command::Regularity => regularity_cmd(run),
        Command::Embedding => embedding_cmd(run),
        Command::Riesz => riesz_cmd(run),
        Command::Geometry => geometry_cmd(run),
        Command::Exponents => exponents_cmd(run),
    }
}

fn kernel_cfg(cfg: &ExperimentConfig) -> Result<&KernelConfig> {
    cfg.kernel.as_ref().ok_or_else(|| anyhow!("this command needs a [kernel] table"))
}

fn kernel(cfg: &ExperimentConfig) -> Result<KernelSpec> {
    Ok(kernel_cfg(cfg)?.build()?)
}

fn shape(cfg: &ExperimentConfig) -> Result<DomainShape> {
    Ok(cfg.domain.as_ref().ok_or_else(|| anyhow!("this command needs a [domain] table"))?.build()?)
}

fn padding(cfg: &ExperimentConfig) -> f64 {
    cfg.grid.as_ref().map_or(1.0, |g| g.padding)
}

fn mask_for(shape: &DomainShape, cells: usize, padding: f64) -> Result<DomainMask> {
    let grid = Grid::for_shape(shape, cells, padding)?;
    Ok(build_mask(&grid, shape)?)
}

fn primary_mask(cfg: &ExperimentConfig) -> Result<DomainMask> {
    let g = cfg.grid.as_ref().ok_or_else(|| anyhow!("this command needs a [grid] table"))?;
    mask_for(&shape(cfg)?, g.cells, g.padding)
}

fn with_order(cfg: &KernelConfig, s: f64) -> Result<KernelSpec> {
    let mut k = cfg.clone();
    k.s = s;
    Ok(k.build()?)
}

/// An operator that some command of this config assembles.
pub struct PlannedOperator {
    pub label: String,
    pub kernel: KernelSpec,
    pub shape: DomainShape,
    pub grid: Grid,
}

/// Every operator the config's experiment assembles, in a fixed order.
pub fn operator_plan(cfg: &ExperimentConfig) -> Result<Vec<PlannedOperator>> {
    let mut out = Vec::new();
    let pad = padding(cfg);
    let mut push = |label: String, kernel: KernelSpec, shape: &DomainShape, grid: Grid| {
        out.push(PlannedOperator { label, kernel, shape: shape.clone(), grid });
    };
    let duality_orders = cfg.duality.as_ref().map(|d| d.orders.clone()).unwrap_or_default();
    if let (Some(k), Some(_), Some(g)) = (&cfg.kernel, &cfg.domain, &cfg.grid) {
        let sh = shape(cfg)?;
        let grid = Grid::for_shape(&sh, g.cells, g.padding)?;
        if duality_orders.is_empty() {
            push(format!("primary cells={}", g.cells), k.build()?, &sh, grid);
        } else {
            for &s in &duality_orders {
                push(format!("duality s={s} cells={}", g.cells), with_order(k, s)?, &sh, grid.clone());
            }
        }
    }
    if let Some(c) = &cfg.convergence {
        for case in &c.cases {
            let sh = DomainShape::Ball { center: vec![0.0; case.n], radius: case.radius };
            for &cells in &case.cells {
                let grid = Grid::for_shape(&sh, cells, pad)?;
                push(format!("convergence n={} s={} cells={cells}", case.n, case.s), KernelSpec::fractional_laplacian(case.n, case.s)?, &sh, grid);
            }
        }
    }
    for (name, levels) in [
        ("fundamental", cfg.fundamental.as_ref().map(|f| f.levels.clone())),
        ("regularity", cfg.regularity.as_ref().map(|r| r.levels.clone())),
    ] {
        if let Some(levels) = levels {
            let (k, sh) = (kernel(cfg)?, shape(cfg)?);
            for cells in levels {
                push(format!("{name} cells={cells}"), k.clone(), &sh, Grid::for_shape(&sh, cells, pad)?);
            }
        }
    }
    if let Some(inv) = cfg.riesz.as_ref().and_then(|r| r.inversion.as_ref()) {
        // layout used by the inversion check
        let sh = DomainShape::Box { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
        for &cells in &inv.levels {
            let grid = Grid::new(vec![-2.0, -2.0], 4.0 / cells as f64, vec![cells, cells])?;
            push(format!("inversion cells={cells}"), KernelSpec::fractional_laplacian(2, 0.5)?, &sh, grid);
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct NodeRow {
    index: usize,
    x: f64,
    y: Option<f64>,
    value: f64,
}

fn node_rows(u: &GridFunction) -> Vec<NodeRow> {
    let g = u.grid();
    (0..g.len())
        .map(|i| {
            let x = g.node(i);
            NodeRow { index: i, x: x[0], y: x.get(1).copied(), value: u.values()[i] }
        })
        .collect()
}

#[derive(Serialize)]
struct OperatorRow {
    label: String,
    dim: usize,
    nx: usize,
    ny: usize,
    h: f64,
    unknowns: usize,
    offsets: usize,
    weights_nonnegative: bool,
    diagonal_positive: bool,
    symmetric: bool,
    strictly_dominant: bool,
    min_surplus: f64,
    max_diagonal: f64,
}

fn normalization_note(spec: &KernelSpec) -> Option<Value> {
    if !spec.is_fractional_laplacian() {
        return None;
    }
    let c = normalization_constant(spec.dim(), spec.order()).ok()?;
    Some(json!({
        "n": spec.dim(),
        "s": spec.order(),
        "c_ns": c,
        "formula": "s(1-s) 4^s Gamma((n+2s)/2) / (pi^(n/2) Gamma(2-s))",
        "note": "the factor s(1-s) is used; the variant s(s-1) is negative on (0,1) and would make the operator negative",
    }))
}

fn assemble_cmd(run: &mut Run) -> Result<Value> {
    let cfg = run.cfg;
    let plan = operator_plan(cfg)?;
    let mut rows = Vec::new();
    for (k, p) in plan.iter().enumerate() {
        let mask = build_mask(&p.grid, &p.shape)?;
        let op = run.timing.stage(format!("assemble {}", p.label), || assemble(&p.kernel, &mask, &cfg.quadrature))?;
        let rep = op.mmatrix_report()?;
        run.check(format!("m-matrix {}", p.label), rep.passed(), format!("min surplus {:.3e}", rep.min_surplus));
        rows.push(OperatorRow {
            label: p.label.clone(),
            dim: p.grid.dim(),
            nx: p.grid.nx(),
            ny: p.grid.ny(),
            h: p.grid.h(),
            unknowns: rep.unknowns,
            offsets: rep.offsets,
            weights_nonnegative: rep.weights_nonnegative,
            diagonal_positive: rep.diagonal_positive,
            symmetric: rep.symmetric,
            strictly_dominant: rep.strictly_dominant,
            min_surplus: rep.min_surplus,
            max_diagonal: rep.max_diagonal,
        });
        if k == 0 {
            export_operator(run.art, &op)?;
        }
    }
    run.art.csv("operators.csv", &rows)?;

    let mut kernels = Vec::new();
    if let Some(k) = &cfg.kernel {
        kernels.push(k.clone());
    }
    let samples = cfg.ellipticity.as_ref().map_or(10_000, |e| e.samples);
    if let Some(e) = &cfg.ellipticity {
        kernels.extend(e.kernels.iter().cloned());
    }
    let mut reports = Vec::new();
    for (k, kc) in kernels.iter().enumerate() {
        let spec = kc.build()?;
        let rep = ellipticity_check(&spec, samples, run.sub_seed(&format!("ellipticity {k}")));
        let name = format!("ellipticity {} n={} s={}", spec.family().name(), spec.dim(), spec.order());
        run.check(
            name,
            rep.passed(),
            format!("measured [{:.6}, {:.6}] within [{}, {}]", rep.measured_min, rep.measured_max, rep.lambda, rep.upper),
        );
        reports.push(json!({
            "kernel": kc,
            "report": rep,
            "normalization": normalization_note(&spec),
        }));
    }
    Ok(json!({ "operators": rows, "ellipticity": reports }))
}

#[derive(Serialize)]
struct OffsetRow {
    kx: isize,
    ky: isize,
    weight: f64,
}

#[derive(Serialize)]
struct DiagonalRow {
    index: usize,
    x: f64,
    y: Option<f64>,
    diagonal: f64,
    tail: f64,
}

#[derive(Serialize)]
struct MaskRow {
    index: usize,
    x: f64,
    y: Option<f64>,
    interior: bool,
    boundary_distance: f64,
}

fn export_operator(art: &mut Artifacts, op: &DiscreteOperator) -> Result<()> {
    let t = op.table();
    let mut offsets = Vec::with_capacity(t.len());
    for ky in t.y_range() {
        for kx in t.x_range() {
            offsets.push(OffsetRow { kx, ky, weight: t.get(kx, ky) });
        }
    }
    art.csv("offsets.csv", &offsets)?;
    let g = op.grid();
    let mask = op.mask();
    let diag: Vec<DiagonalRow> = mask
        .interior()
        .iter()
        .enumerate()
        .map(|(k, &i)| {
            let x = g.node(i);
            DiagonalRow { index: i, x: x[0], y: x.get(1).copied(), diagonal: op.diagonal()[k], tail: op.tail()[k] }
        })
        .collect();
    art.csv("diagonal.csv", &diag)?;
    let rows: Vec<MaskRow> = (0..g.len())
        .map(|i| {
            let x = g.node(i);
            MaskRow {
                index: i,
                x: x[0],
                y: x.get(1).copied(),
                interior: mask.is_interior(i),
                boundary_distance: mask.boundary_distance(i),
            }
        })
        .collect();
    art.csv("mask.csv", &rows)
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn measure_is_nonnegative(mu: &RadonMeasure, mask: &DomainMask) -> Result<bool> {
    Ok(mu.is_nonnegative_atoms() && mu.density_values(mask)?.iter().all(|v| *v >= 0.0))
}

fn measure_is_zero(mu: &RadonMeasure, mask: &DomainMask) -> Result<bool> {
    Ok(mu.atoms.iter().all(|a| a.mass == 0.0) && mu.density_values(mask)?.iter().all(|v| *v == 0.0))
}

fn solve_cmd(run: &mut Run) -> Result<Value> {
    let cfg = run.cfg;
    let section = cfg.solve.as_ref().ok_or_else(|| anyhow!("solve needs a [solve] table"))?;
    let spec = kernel(cfg)?;
    let mask = primary_mask(cfg)?;
    let op = run.timing.stage("assemble", || assemble(&spec, &mask, &cfg.quadrature))?;
    let rep = op.mmatrix_report()?;
    run.check("m-matrix", rep.passed(), format!("min surplus {:.3e}", rep.min_surplus));
    let mu = cfg.measure.build();
    match section.kind {
        SolveKind::Weak | SolveKind::Duality => {
            let (u, report) = if section.kind == SolveKind::Weak {
                if !mu.atoms.is_empty() || mu.density.is_none() {
                    bail!("a weak solve takes a density and no atoms in [measure]");
                }
                let f = GridFunction::from_interior(&mask, &mu.density_values(&mask)?)?;
                run.timing.stage("solve", || weak_solve(&op, &f, &cfg.solver))?
            } else {
                run.timing.stage("solve", || duality_solve(&op, &mu, &cfg.solver))?
            };
            run.art.csv("solution.csv", &node_rows(&u))?;
            let interior = u.interior_values(&mask)?;
            let min = interior.iter().copied().fold(f64::INFINITY, f64::min);
            let max = interior.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if measure_is_nonnegative(&mu, &mask)? {
                run.check("nonnegative data gives nonnegative solution", min >= 0.0, format!("min u = {min:e}"));
            }
            if measure_is_zero(&mu, &mask)? {
                run.check("zero data gives zero solution", u.values().iter().all(|v| *v == 0.0), format!("max |u| = {:e}", u.max_abs()));
            }
            Ok(json!({
                "kind": section.kind,
                "operator": rep,
                "report": report,
                "total_variation": total_variation(&mu, &mask)?,
                "min": min,
                "max": max,
            }))
        }
        SolveKind::Exterior => {
            if section.cases.is_empty() {
                bail!("an exterior solve needs [[solve.cases]] entries");
            }
            let mut cases = Vec::new();
            for case in &section.cases {
                let phi = exterior_data(&mask, &case.phi, run.sub_seed(&format!("phi {}", case.name)));
                let (u, report) =
                    run.timing.stage(format!("solve {}", case.name), || exterior_data_solve(&op, &phi, case.tail, &cfg.solver))?;
                run.art.csv(&format!("solution_{}.csv", case.name), &node_rows(&u))?;
                let ext: Vec<f64> = (0..phi.values().len()).filter(|&i| !mask.is_interior(i)).map(|i| phi.values()[i]).collect();
                let lo = ext.iter().copied().fold(case.tail, f64::min);
                let hi = ext.iter().copied().fold(case.tail, f64::max);
                let interior = u.interior_values(&mask)?;
                let umin = interior.iter().copied().fold(f64::INFINITY, f64::min);
                let umax = interior.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                // constant data is covered by the reproduction check below
                if lo < hi {
                    run.check(
                        format!("{}: solution within data range", case.name),
                        umin >= lo && umax <= hi,
                        format!("u in [{umin:.15}, {umax:.15}], data in [{lo}, {hi}]"),
                    );
                }
                let mut deviation = None;
                if let PhiConfig::Constant { value } = case.phi {
                    if value == case.tail {
                        let d = interior.iter().map(|v| (v - value).abs()).fold(0.0, f64::max);
                        run.check(
                            format!("{}: constants are reproduced", case.name),
                            d <= case.constant_tol,
                            format!("max |u - {value}| = {d:e}"),
                        );
                        deviation = Some(d);
                    }
                }
                cases.push(json!({
                    "name": case.name,
                    "report": report,
                    "data_min": lo,
                    "data_max": hi,
                    "min": umin,
                    "max": umax,
                    "constant_deviation": deviation,
                }));
            }
            Ok(json!({ "kind": section.kind, "operator": rep, "cases": cases }))
        }
    }
}

fn exterior_data(mask: &DomainMask, phi: &PhiConfig, seed: u64) -> GridFunction {
    let g = mask.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vals = (0..g.len())
        .map(|i| {
            if mask.is_interior(i) {
                return 0.0;
            }
            match phi {
                PhiConfig::Constant { value } => *value,
                PhiConfig::Random { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
                PhiConfig::Field { expr } => expr.eval(&g.node(i)),
            }
        })
        .collect();
    GridFunction::new(g, vals).expect("grid-sized vector")
}

#[derive(Serialize)]
struct MismatchRow {
    s: f64,
    test: usize,
    mismatch: f64,
    noisy_mismatch: f64,
}

fn duality_cmd(run: &mut Run) -> Result<Value> {
    let cfg = run.cfg;
    let d = cfg.duality.as_ref().ok_or_else(|| anyhow!("duality-check needs a [duality] table"))?;
    let kc = kernel_cfg(cfg)?;
    let orders = if d.orders.is_empty() { vec![kc.s] } else { d.orders.clone() };
    let mask = primary_mask(cfg)?;
    let mu = cfg.measure.build();
    let tests = random_test_functions(&mask, d.tests, run.sub_seed("duality tests"));
    let mut rows = Vec::new();
    let mut cases = Vec::new();
    for s in orders {
        let spec = with_order(kc, s)?;
        let label = format!("s={s}");
        let op = run.timing.stage(format!("assemble {label}"), || assemble(&spec, &mask, &cfg.quadrature))?;
        let (u, report) = run.timing.stage(format!("solve {label}"), || duality_solve(&op, &mu, &cfg.solver))?;
        let cert = run.timing.stage(format!("verify {label}"), || duality_verify(&op, &u, &mu, &tests, d.tol, &cfg.solver))?;
        let mut rng = ChaCha8Rng::seed_from_u64(run.sub_seed(&format!("duality noise {s}")));
        let noisy: Vec<f64> = u.values().iter().map(|v| v * (1.0 + d.noise * (2.0 * rng.random::<f64>() - 1.0))).collect();
        let noisy = GridFunction::new(mask.grid(), noisy)?;
        let detector =
            run.timing.stage(format!("noise detector {label}"), || duality_verify(&op, &noisy, &mu, &tests, d.tol, &cfg.solver))?;
        run.check(
            format!("duality certificate {label}"),
            cert.passed,
            format!("max mismatch {:.3e} <= {:e}", cert.max_mismatch, d.tol),
        );
        run.check(
            format!("noise detector {label}"),
            detector.max_mismatch > d.noise_floor,
            format!("{}% noise gives mismatch {:.3e} > {:e}", d.noise * 100.0, detector.max_mismatch, d.noise_floor),
        );
        for (k, (a, b)) in cert.mismatches.iter().zip(&detector.mismatches).enumerate() {
            rows.push(MismatchRow { s, test: k, mismatch: *a, noisy_mismatch: *b });
        }
        cases.push(json!({ "s": s, "report": report, "certificate": cert, "noisy_max_mismatch": detector.max_mismatch }));
    }
    run.art.csv("mismatches.csv", &rows)?;
    Ok(json!({ "unknowns": mask.interior_len(), "tests": d.tests, "cases": cases }))
}

#[derive(Serialize)]
struct ConvergenceRow {
    n: usize,
    s: f64,
    cells: usize,
    h: f64,
    unknowns: usize,
    max_error: f64,
    center_value: f64,
    center_exact: f64,
    residual: f64,
    iterations: usize,
}

fn convergence_cmd(run: &mut Run) -> Result<Value> {
    let cfg = run.cfg;
    let section = cfg.convergence.as_ref().ok_or_else(|| anyhow!("convergence needs a [convergence] table"))?;
    let pad = padding(cfg);
    let mut rows = Vec::new();
    let mut out = Vec::new();
    for case in &section.cases {
        let center = vec![0.0; case.n];
        let sh = DomainShape::Ball { center: center.clone(), radius: case.radius };
        let sol = BallSolution::new(center.clone(), case.radius, case.s);
        let spec = KernelSpec::fractional_laplacian(case.n, case.s)?;
        let mut errs = Vec::new();
        let mut hs = Vec::new();
        let mut case_rows = Vec::new();
        for &cells in &case.cells {
            let label = format!("n={} cells={cells}", case.n);
            let mask = mask_for(&sh, cells, pad)?;
            let op = run.timing.stage(format!("assemble {label}"), || assemble(&spec, &mask, &cfg.quadrature))?;
            let f = GridFunction::from_fn_interior(&mask, |_| 1.0);
            let (u, report) = run.timing.stage(format!("solve {label}"), || weak_solve(&op, &f, &cfg.solver))?;
            let g = mask.grid();
            let max_error =
                mask.interior().iter().map(|&i| (u.values()[i] - sol.value(&g.node(i))).abs()).fold(0.0, f64::max);
            let region = mask.region_away_from_boundary(case.deep_margin);
            let residual = op.consistency_residual(|x| sol.value(x), |_| 1.0, &region)?;
            errs.push(max_error);
            hs.push(g.h());
            case_rows.push(ConvergenceRow {
                n: case.n,
                s: case.s,
                cells,
                h: g.h(),
                unknowns: mask.interior_len(),
                max_error,
                center_value: u.interpolate(&center),
                center_exact: sol.value(&center),
                residual,
                iterations: report.iterations,
            });
        }
        let lx: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
        let ly: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let rate = fit_slope(&lx, &ly);
        let tag = format!("n={} s={}", case.n, case.s);
        if case.strictly_decreasing {
            let ok = errs.windows(2).all(|w| w[1] < w[0]);
            run.check(format!("{tag}: error decreases"), ok, format!("errors {}", sci(&errs)));
        }
        if let Some(min) = case.min_rate {
            run.check(format!("{tag}: rate"), rate >= min, format!("fitted rate {rate:.3} >= {min}"));
        }
        let last = case_rows.last().expect("two or more grids");
        let center_rel = (last.center_value / last.center_exact - 1.0).abs();
        if let Some(tol) = case.center_tol {
            run.check(
                format!("{tag}: center value"),
                center_rel <= tol,
                format!("u_h(0) = {:.6} vs {:.6}, relative {center_rel:.3e} <= {tol}", last.center_value, last.center_exact),
            );
        }
        out.push(json!({ "n": case.n, "s": case.s, "rate": rate, "center_relative_error": center_rel, "errors": errs }));
        rows.extend(case_rows);
    }
    run.art.csv("convergence.csv", &rows)?;
    Ok(json!({ "cases": out, "levels": rows.len() }))
}

#[derive(Serialize)]
struct RatioCsvRow {
    cells: usize,
    h: f64,
    r: f64,
    nodes: usize,
    min_ratio: f64,
    max_ratio: f64,
}

fn fundamental_cmd(run: &mut Run) -> Result<Value> {
    let cfg = run.cfg;
    let f = cfg.fundamental.as_ref().ok_or_else(|| anyhow!("fundamental needs a [fundamental] table"))?;
    let (spec, sh) = (kernel(cfg)?, shape(cfg)?);
    let mu = RadonMeasure::dirac(f.x0.clone(), f.mass);
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    let mut constants = Vec::new();
    for &cells in &f.levels {
        let mask = mask_for(&sh, cells, padding(cfg))?;
        let op = run.timing.stage(format!("assemble cells={cells}"), || assemble(&spec, &mask, &cfg.quadrature))?;
        let (u, report) = run.timing.stage(format!("solve cells={cells}"), || duality_solve(&op, &mu, &cfg.solver))?;
        let h = mask.grid().h();
        let radii = dyadic_radii(f.r_min_cells * h, f.r_max);
        let scan = fundamental_ratio_scan(&u, &mask, &f.x0, spec.order(), &radii)?;
        let k = comparability_constant(&scan);
        let positive = scan.iter().all(|r| r.min_ratio > 0.0);
        run.check(format!("cells={cells}: ratios positive"), positive, "u > 0 on every annulus");
        run.check(format!("cells={cells}: comparability"), k <= f.bound, format!("max/min = {k:.4} <= {}", f.bound));
        constants.push(k);
        for r in &scan {
            rows.push(RatioCsvRow { cells, h, r: r.r, nodes: r.nodes, min_ratio: r.min_ratio, max_ratio: r.max_ratio });
        }
        levels.push(json!({ "cells": cells, "h": h, "constant": k, "report": report, "rows": scan }));
    }
    let drift: Vec<f64> = constants.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    run.art.csv("ratios.csv", &rows)?;
    Ok(json!({ "order": spec.order(), "exponent": 2.0 * spec.order() - spec.dim() as f64, "levels": levels, "constant_drift": drift }))
}

fn exponents_json(e: &ExponentSet<f64>) -> Value {
    json!({
        "n": e.n, "s": e.s, "alpha": e.alpha, "q": e.q, "p": e.p, "q_crit": e.q_crit, "p_star": e.p_star,
        "eta": e.eta, "stable_local_bound": e.stable_local_bound, "riesz_gamma": e.riesz_gamma,
        "cz_nu": e.cz_nu, "cz_order": e.cz_order,
    })
}

#[derive(Serialize)]
struct ScanRow {
    scan: usize,
    quantity: String,
    cells: usize,
    h: f64,
    value: f64,
    iterations: usize,
}

fn quantity_label(q: &ScanQuantity) -> String {
    match q {
        ScanQuantity::LqNorm { q } => format!("lq-norm q={q}"),
        ScanQuantity::LqIntegral { q } => format!("lq-integral q={q}"),
        ScanQuantity::Gagliardo { sigma, q, margin } => format!("gagliardo sigma={sigma} q={q} margin={margin}"),
        ScanQuantity::CalderonZygmund { r } => format!("calderon-zygmund r={r}"),
    }
}

fn regularity_cmd(run: &mut Run) -> Result<Value> {
    let cfg = run.cfg;
    let r = cfg.regularity.as_ref().ok_or_else(|| anyhow!("regularity needs a [regularity] table"))?;
    let problem = ScanProblem {
        kernel: kernel(cfg)?,
        shape: shape(cfg)?,
        padding: padding(cfg),
        quad: cfg.quadrature.clone(),
        data: cfg.measure.build(),
        solver: cfg.solver.clone(),
    };
    let n = problem.kernel.dim() as i64;
    let s = problem.kernel.order();
    let mut exps = Vec::new();
    for spec in &r.scans {
        let q = match spec.quantity {
            ScanQuantity::LqNorm { q } | ScanQuantity::LqIntegral { q } | ScanQuantity::Gagliardo { q, .. } => q,
            ScanQuantity::CalderonZygmund { r } => r,
        };
        let e = critical_exponents(n, s, Some(q), None)?;
        if matches!(spec.quantity, ScanQuantity::LqNorm { .. } | ScanQuantity::LqIntegral { .. }) && e.q_crit == Some(q) {
            bail!("q = {q} is the critical exponent; scan strictly inside or outside the admissible range");
        }
        exps.push(exponents_json(&e));
    }
    let quantities: Vec<ScanQuantity> = r.scans.iter().map(|s| s.quantity.clone()).collect();
    let results = run.timing.stage("scan", || regularity_scans(&problem, &quantities, &r.levels, r.thresholds))?;
    let mut rows = Vec::new();
    for (k, (res, spec)) in results.iter().zip(&r.scans).enumerate() {
        let label = quantity_label(&res.quantity);
        for l in &res.levels {
            rows.push(ScanRow { scan: k, quantity: label.clone(), cells: l.cells, h: l.h, value: l.value, iterations: l.iterations });
        }
        if let Some(want) = spec.expect {
            run.check(
                format!("{label}: verdict"),
                res.verdict == want,
                format!("growth {:.4?} gives {:?}, expected {want:?}", res.growth, res.verdict),
            );
        }
    }
    run.art.csv("scan.csv", &rows)?;
    Ok(json!({
        "scans": results,
        "exponents": exps,
        "note": "verdicts describe discrete norms under refinement and are evidence, not proof",
    }))
}

#[derive(Serialize)]
struct EmbeddingRow {
    cells: usize,
    h: f64,
    function: usize,
    ratio: f64,
}

fn embedding_cmd(run: &mut Run) -> Result<Value> {
    let cfg = run.cfg;
    let e = cfg.embedding.as_ref().ok_or_else(|| anyhow!("embedding needs an [embedding] table"))?;
    let sh = shape(cfg)?;
    let seed = run.sub_seed("embedding bumps");
    let mut rows = Vec::new();
    let mut maxima = Vec::new();
    for &cells in &e.levels {
        let mask = mask_for(&sh, cells, padding(cfg))?;
        let bumps = random_bumps(&mask, e.count, (e.radii[0], e.radii[1]), seed)?;
        let h = mask.grid().h();
        let ratios = run.timing.stage(format!("embedding cells={cells}"), || {
            bumps.iter().map(|v| embedding_ratio(v, e.s, e.p, mask.interior())).collect::<fracdual::Result<Vec<f64>>>()
        })?;
        for (k, r) in ratios.iter().enumerate() {
            rows.push(EmbeddingRow { cells, h, function: k, ratio: *r });
        }
        maxima.push(ratios.iter().copied().fold(0.0, f64::max));
    }
    let drift: Vec<f64> = maxima.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let worst = drift.iter().map(|d| d.abs()).fold(0.0, f64::max);
    run.check("embedding constant stable", worst < e.drift_tol, format!("max ratios {maxima:.5?}, drift {drift:.4?}"));
    run.art.csv("embedding.csv", &rows)?;
    let dim = sh.dim() as f64;
    Ok(json!({ "p_star": dim * e.p / (dim - e.s * e.p), "max_ratio": maxima, "drift": drift }))
}

#[derive(Serialize)]
struct HolderRow {
    cells: usize,
    h: f64,
    function: usize,
    seminorm: f64,
    lp_norm: f64,
    ratio: f64,
}

fn riesz_cmd(run: &mut Run) -> Result<Value> {
    let cfg = run.cfg;
    let r = cfg.riesz.as_ref().ok_or_else(|| anyhow!("riesz needs a [riesz] table"))?;
    let constant = r.constant.unwrap_or_else(|| riesz_constant(2, r.alpha));
    let kernel = PotentialKernel::isotropic(2, r.alpha, constant)?;
    let bounds = kernel_bounds_check(&kernel, r.bounds_samples, run.sub_seed("riesz bounds"))?;
    run.check(
        "potential kernel bounds",
        bounds.measured_min >= bounds.c1 && bounds.measured_max <= bounds.c2,
        format!("measured [{}, {}] within [{}, {}]", bounds.measured_min, bounds.measured_max, bounds.c1, bounds.c2),
    );
    let seed = run.sub_seed("riesz data");
    let (lo, hi) = ([r.center_box[0]; 2], [r.center_box[1]; 2]);
    let mut rows = Vec::new();
    let mut maxima = Vec::new();
    let mut gamma = f64::NAN;
    let mut refusal = None;
    for &cells in &r.levels {
        let h = 2.0 * r.half_width / cells as f64;
        let grid = Grid::new(vec![-r.half_width; 2], h, vec![cells, cells])?;
        let fs = random_disc_indicators(&grid, (&lo, &hi), (r.radii[0], r.radii[1]), r.count, seed);
        let region: Vec<usize> =
            (0..grid.len()).filter(|&i| grid.node(i).iter().all(|c| c.abs() < r.region_half_width)).collect();
        let checks = run.timing.stage(format!("hoelder cells={cells}"), || {
            fs.iter().map(|f| holder_mapping_check(f, r.p, &kernel, &region)).collect::<fracdual::Result<Vec<_>>>()
        })?;
        for (k, c) in checks.iter().enumerate() {
            rows.push(HolderRow { cells, h, function: k, seminorm: c.seminorm, lp_norm: c.lp_norm, ratio: c.ratio });
            gamma = c.gamma;
        }
        maxima.push(checks.iter().map(|c| c.ratio).fold(0.0, f64::max));
        if let (Some(p), None) = (r.refuse_p, &refusal) {
            let outcome = holder_mapping_check(&fs[0], p, &kernel, &region);
            let refused = matches!(outcome, Err(CoreError::HypothesisViolation(_)));
            let message = match &outcome {
                Err(e) => e.to_string(),
                Ok(v) => format!("accepted with ratio {}", v.ratio),
            };
            run.check(format!("p = {p} is refused"), refused, message.clone());
            refusal = Some(json!({ "p": p, "refused": refused, "message": message }));
        }
    }
    let drift: Vec<f64> = maxima.windows(2).map(|w| w[1] / w[0] - 1.0).collect();
    let worst = drift.iter().map(|d| d.abs()).fold(0.0, f64::max);
    run.check("hoelder ratio stable", worst < r.drift_tol, format!("max ratios {maxima:.5?}, drift {drift:.4?}"));
    run.art.csv("hoelder.csv", &rows)?;
    let mut inversion = Vec::new();
    if let Some(inv) = &r.inversion {
        for &cells in &inv.levels {
            let level =
                run.timing.stage(format!("inversion cells={cells}"), || inversion_check(cells, inv.bump_radius, &cfg.quadrature))?;
            inversion.push(level);
        }
        let errs: Vec<f64> = inversion.iter().map(|l| l.max_error).collect();
        run.check("inversion error decreases", errs.windows(2).all(|w| w[1] < w[0]), format!("errors {}", sci(&errs)));
        run.art.csv("inversion.csv", &inversion)?;
    }
    Ok(json!({
        "alpha": r.alpha,
        "p": r.p,
        "gamma": gamma,
        "constant": constant,
        "kernel_bounds": bounds,
        "max_ratio": maxima,
        "drift": drift,
        "refusal": refusal,
        "inversion": inversion,
    }))
}

#[derive(Serialize)]
struct GeometryRow {
    label: String,
    side: BallSide,
    radius: f64,
    passed: bool,
    tested: usize,
    failures: usize,
    witness_x: Option<f64>,
    witness_y: Option<f64>,
}

fn geometry_cmd(run: &mut Run) -> Result<Value> {
    let cfg = run.cfg;
    let g = cfg.geometry.as_ref().ok_or_else(|| anyhow!("geometry needs a [geometry] table"))?;
    let ball = BallCheckConfig { samples: g.samples, probes: g.probes, seed: run.sub_seed("geometry") };
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for c in &g.checks {
        let sh = c.domain.build()?;
        let res = run.timing.stage(c.label.clone(), || match c.side {
            BallSide::Exterior => exterior_ball_check(&sh, c.radius, &ball),
            BallSide::Interior => interior_ball_check(&sh, c.radius, &ball),
        })?;
        if let Some(want) = c.expect {
            let got = if res.passed { Expectation::Pass } else { Expectation::Fail };
            run.check(format!("{}: {:?} ball", c.label, c.side), got == want, format!("{got:?}, expected {want:?}"));
        }
        if let (Some(near), Some(tol), Some(w)) = (&c.near, c.near_tol, &res.witness) {
            let d = near.iter().zip(w).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            run.check(format!("{}: witness location", c.label), d <= tol, format!("witness {w:?} at distance {d:.4} from {near:?}"));
        }
        rows.push(GeometryRow {
            label: c.label.clone(),
            side: c.side,
            radius: c.radius,
            passed: res.passed,
            tested: res.tested,
            failures: res.failures,
            witness_x: res.witness.as_ref().map(|w| w[0]),
            witness_y: res.witness.as_ref().and_then(|w| w.get(1).copied()),
        });
        results.push(json!({ "label": c.label, "result": res }));
    }
    run.art.csv("geometry.csv", &rows)?;
    Ok(json!({ "samples": g.samples, "probes": g.probes, "checks": results }))
}

/// Parses `a/b`, integers and finite decimals exactly.
pub fn parse_rational(text: &str) -> Result<Rational64> {
    let t = text.trim();
    if let Some((whole, frac)) = t.split_once('.') {
        if frac.contains('/') || frac.is_empty() {
            bail!("cannot read '{text}' as a rational");
        }
        let digits = frac.len() as u32;
        let den = 10i64.checked_pow(digits).ok_or_else(|| anyhow!("too many decimals in '{text}'"))?;
        let neg = whole.starts_with('-');
        let w: i64 = if whole.is_empty() || whole == "-" { 0 } else { whole.parse()? };
        let f: i64 = frac.parse()?;
        let num = w.abs() * den + f;
        return Ok(Rational64::new(if neg { -num } else { num }, den));
    }
    Rational64::from_str(t).map_err(|e| anyhow!("cannot read '{text}' as a rational: {e}"))
}

fn rational_text(r: Rational64) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn exponents_cmd(run: &mut Run) -> Result<Value> {
    let cfg = run.cfg;
    let section = cfg.exponents.as_ref().ok_or_else(|| anyhow!("exponents needs an [exponents] table"))?;
    let mut out = Vec::new();
    for case in &section.cases {
        let s = match (&case.s, &case.alpha) {
            (Some(s), None) => parse_rational(s)?,
            (None, Some(a)) => parse_rational(a)? / Rational64::from_integer(2),
            _ => bail!("exponent case '{}' needs exactly one of s and alpha", case.label),
        };
        let q = case.q.as_deref().map(parse_rational).transpose()?;
        let p = case.p.as_deref().map(parse_rational).transpose()?;
        let exact = critical_exponents(case.n, s, q, p).with_context(|| format!("exponent case '{}'", case.label))?;
        let float = critical_exponents(case.n, to_f64(s), q.map(to_f64), p.map(to_f64))?;
        let fields: [(&str, Option<Rational64>); 7] = [
            ("alpha", Some(exact.alpha)),
            ("q_crit", exact.q_crit),
            ("p_star", exact.p_star),
            ("eta", exact.eta),
            ("stable_local_bound", Some(exact.stable_local_bound)),
            ("riesz_gamma", exact.riesz_gamma),
            ("cz_order", Some(exact.cz_order)),
        ];
        let exact_json: serde_json::Map<String, Value> =
            fields.iter().map(|(k, v)| (k.to_string(), v.map_or(Value::Null, |r| Value::String(rational_text(r))))).collect();
        for (key, want) in &case.expect {
            let want_r = parse_rational(want)?;
            let got = fields
                .iter()
                .find(|(k, _)| k == key)
                .ok_or_else(|| anyhow!("unknown exponent '{key}' in case '{}'", case.label))?
                .1;
            run.check(
                format!("{}: {key}", case.label),
                got == Some(want_r),
                format!("{} vs expected {}", got.map_or("undefined".into(), rational_text), rational_text(want_r)),
            );
        }
        out.push(json!({
            "label": case.label,
            "n": case.n,
            "s": rational_text(s),
            "q": q.map(rational_text),
            "p": p.map(rational_text),
            "exact": exact_json,
            "float": exponents_json(&float),
        }));
    }
    Ok(json!({ "cases": out }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rationals_parse_exactly() {
        assert_eq!(parse_rational("1.2").unwrap(), Rational64::new(6, 5));
        assert_eq!(parse_rational("3/4").unwrap(), Rational64::new(3, 4));
        assert_eq!(parse_rational("8").unwrap(), Rational64::from_integer(8));
        assert_eq!(parse_rational("-0.25").unwrap(), Rational64::new(-1, 4));
        assert!(parse_rational("x").is_err());
    }

    #[test]
    fn command_names_round_trip() {
        for c in Command::ALL {
            assert_eq!(c.name().parse::<Command>().unwrap(), c);
        }
    }
}
