//! Linear solves with the discrete operator: density data, measure data via
//! the duality formulation, and exterior data.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::DomainMask;
use crate::error::{Error, Result};
use crate::field::{dot, GridFunction};
use crate::measure::{discretize_to_functional, RadonMeasure};
use crate::operator::{DiscreteOperator, DENSE_LIMIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMethod {
    /// CG, falling back to dense Cholesky for small systems that stall.
    #[default]
    Auto,
    Cg,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: SolverMethod::Auto, tol: 1e-10, max_iter: 10_000 }
    }
}

impl SolverConfig {
    pub fn with_tol(tol: f64) -> Self {
        Self { tol, ..Self::default() }
    }

    pub fn dense() -> Self {
        Self { method: SolverMethod::Dense, ..Self::default() }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol < 1.0) || self.max_iter == 0 {
            return Err(Error::Domain("solver tol must lie in (0,1) and max_iter be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub solver: String,
    pub iterations: usize,
    /// `|b - A u| / |b|`, recomputed from scratch at termination.
    pub relative_residual: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

/// Solves `A u = b` for interior-ordered vectors.
pub fn solve_linear(op: &DiscreteOperator, b: &[f64], guess: Option<&[f64]>, cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    if b.len() != op.unknowns() {
        return Err(Error::Dimension(format!("rhs has {} entries, operator {} unknowns", b.len(), op.unknowns())));
    }
    let start = Instant::now();
    let result = match cfg.method {
        SolverMethod::Dense => dense_solve(op, b),
        SolverMethod::Cg => pcg(op, b, guess, cfg),
        SolverMethod::Auto => match pcg(op, b, guess, cfg) {
            Err(Error::Convergence(_)) if op.unknowns() <= DENSE_LIMIT => dense_solve(op, b),
            other => other,
        },
    };
    result.map(|(u, mut rep)| {
        rep.wall_time = start.elapsed().as_secs_f64();
        (u, rep)
    })
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn true_residual(op: &DiscreteOperator, b: &[f64], u: &[f64]) -> Result<f64> {
    let au = op.apply_interior(u)?;
    let r: Vec<f64> = b.iter().zip(&au).map(|(x, y)| x - y).collect();
    let nb = norm(b);
    Ok(if nb == 0.0 { norm(&r) } else { norm(&r) / nb })
}

fn pcg(op: &DiscreteOperator, b: &[f64], guess: Option<&[f64]>, cfg: &SolverConfig) -> Result<(Vec<f64>, SolveReport)> {
    let m = op.unknowns();
    let nb = norm(b);
    let report = |iterations, relative_residual| SolveReport {
        solver: "pcg-jacobi".into(),
        iterations,
        relative_residual,
        wall_time: 0.0,
    };
    if nb == 0.0 {
        return Ok((vec![0.0; m], report(0, 0.0)));
    }
    let dinv: Vec<f64> = op.diagonal().iter().map(|d| 1.0 / d).collect();
    let mut x = match guess {
        Some(g) if g.len() == m => g.to_vec(),
        Some(_) => return Err(Error::Dimension("initial guess length mismatch".into())),
        None => vec![0.0; m],
    };
    let mut r: Vec<f64> = if guess.is_some() {
        let ax = op.apply_interior(&x)?;
        b.iter().zip(&ax).map(|(a, c)| a - c).collect()
    } else {
        b.to_vec()
    };
    let mut z: Vec<f64> = r.iter().zip(&dinv).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; m];
    let mut it = 0;
    // a few extra sweeps are allowed when the recurrence drifts from the true residual
    let mut rel = norm(&r) / nb;
    while it < cfg.max_iter {
        if rel <= cfg.tol {
            let t = true_residual(op, b, &x)?;
            if t <= cfg.tol {
                return Ok((x, report(it, t)));
            }
            // restart from the true residual
            let ax = op.apply_interior(&x)?;
            for k in 0..m {
                r[k] = b[k] - ax[k];
                z[k] = r[k] * dinv[k];
            }
            p.copy_from_slice(&z);
            rz = dot(&r, &z);
        }
        op.apply_into(&p, &mut ap)?;
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rz / pap;
        for k in 0..m {
            x[k] += alpha * p[k];
            r[k] -= alpha * ap[k];
            z[k] = r[k] * dinv[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..m {
            p[k] = z[k] + beta * p[k];
        }
        it += 1;
        rel = norm(&r) / nb;
    }
    let t = true_residual(op, b, &x)?;
    if t <= cfg.tol {
        return Ok((x, report(it, t)));
    }
    Err(Error::Convergence(report(it, t)))
}

fn dense_solve(op: &DiscreteOperator, b: &[f64]) -> Result<(Vec<f64>, SolveReport)> {
    let a = op.dense_matrix()?;
    let chol = a
        .cholesky()
        .ok_or_else(|| Error::Assembly("interior matrix is not positive definite".into()))?;
    let x = chol.solve(&nalgebra::DVector::from_column_slice(b));
    let u: Vec<f64> = x.iter().copied().collect();
    let t = true_residual(op, b, &u)?;
    Ok((u, SolveReport { solver: "dense-cholesky".into(), iterations: 1, relative_residual: t, wall_time: 0.0 }))
}

/// `A u = f` on interior nodes.
pub fn weak_solve(op: &DiscreteOperator, f: &GridFunction, cfg: &SolverConfig) -> Result<(GridFunction, SolveReport)> {
    let b = f.interior_values(op.mask())?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("right-hand side is not finite".into()));
    }
    let (u, rep) = solve_linear(op, &b, None, cfg)?;
    Ok((GridFunction::from_interior(op.mask(), &u)?, rep))
}

/// Interior right-hand side `mu_h / h^n` of the duality formulation.
pub fn duality_rhs(op: &DiscreteOperator, mu: &RadonMeasure) -> Result<Vec<f64>> {
    let hn = op.grid().cell_volume();
    Ok(discretize_to_functional(mu, op.mask())?.into_iter().map(|v| v / hn).collect())
}

/// `A u = mu_h / h^n`, so that `h^n <u, g> = <w, mu_h>` whenever `A w = g`.
pub fn duality_solve(op: &DiscreteOperator, mu: &RadonMeasure, cfg: &SolverConfig) -> Result<(GridFunction, SolveReport)> {
    duality_solve_from(op, mu, None, cfg)
}

pub fn duality_solve_from(
    op: &DiscreteOperator,
    mu: &RadonMeasure,
    guess: Option<&[f64]>,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveReport)> {
    let b = duality_rhs(op, mu)?;
    let (u, rep) = solve_linear(op, &b, guess, cfg)?;
    Ok((GridFunction::from_interior(op.mask(), &u)?, rep))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityCertificate {
    pub mismatches: Vec<f64>,
    pub max_mismatch: f64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const PAIRING_FLOOR: f64 = 1e-14;

/// For each `g`: solves `A w = g` and compares `h^n <u, g>` with `<w, mu_h>`.
pub fn duality_verify(
    op: &DiscreteOperator,
    u: &GridFunction,
    mu: &RadonMeasure,
    tests: &[GridFunction],
    tol: f64,
    cfg: &SolverConfig,
) -> Result<DualityCertificate> {
    let mask = op.mask();
    let hn = op.grid().cell_volume();
    let uv = u.interior_values(mask)?;
    let muh = discretize_to_functional(mu, mask)?;
    let mut mismatches = Vec::with_capacity(tests.len());
    for g in tests {
        let gv = g.interior_values(mask)?;
        let (w, _) = solve_linear(op, &gv, None, cfg)?;
        let lhs = dot(&uv, &gv) * hn;
        let rhs = dot(&w, &muh);
        mismatches.push((lhs - rhs).abs() / (lhs.abs() + PAIRING_FLOOR));
    }
    let max_mismatch = mismatches.iter().copied().fold(0.0, f64::max);
    Ok(DualityCertificate { mismatches, max_mismatch, tolerance: tol, passed: max_mismatch <= tol })
}

/// `count` smooth nonnegative test functions, each a sum of three bumps
/// with seeded centers, radii and heights.
pub fn random_test_functions(mask: &DomainMask, count: usize, seed: u64) -> Vec<GridFunction> {
    let (lo, hi) = mask.shape().bbox();
    let n = lo.len();
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let mut bumps = Vec::new();
            while bumps.len() < 3 {
                let c: Vec<f64> = (0..n).map(|a| lo[a] + rng.random::<f64>() * (hi[a] - lo[a])).collect();
                if !mask.shape().contains(&c) {
                    continue;
                }
                let r = 0.2 + 0.4 * rng.random::<f64>();
                let a = 0.5 + rng.random::<f64>();
                bumps.push((c, r, a));
            }
            GridFunction::from_fn_interior(mask, |x| {
                bumps
                    .iter()
                    .map(|(c, r, a)| {
                        let t = x.iter().zip(c).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / (r * r);
                        if t < 1.0 {
                            a * (1.0 - t) * (1.0 - t)
                        } else {
                            0.0
                        }
                    })
                    .sum()
            })
        })
        .collect()
}

/// Solves `L u = 0` in the domain with `u = phi` on exterior grid nodes and
/// `u = tail_value` beyond the grid box.
pub fn exterior_data_solve(
    op: &DiscreteOperator,
    phi: &GridFunction,
    tail_value: f64,
    cfg: &SolverConfig,
) -> Result<(GridFunction, SolveReport)> {
    if phi.values().iter().any(|v| !v.is_finite()) || !tail_value.is_finite() {
        return Err(Error::Domain("exterior data must be finite".into()));
    }
    let b = op.exterior_rhs(phi, tail_value)?;
    let (u, rep) = solve_linear(op, &b, None, cfg)?;
    let mask = op.mask();
    let mut vals = phi.values().to_vec();
    for (&i, v) in mask.interior().iter().zip(&u) {
        vals[i] = *v;
    }
    Ok((GridFunction::new(op.grid(), vals)?, rep))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioRow {
    pub r: f64,
    pub nodes: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Statistics of `u(x) / |x - x0|^{2s - n}` over the annuli `r <= |x - x0| < 2r`.
pub fn fundamental_ratio_scan(
    u: &GridFunction,
    mask: &DomainMask,
    x0: &[f64],
    order: f64,
    radii: &[f64],
) -> Result<Vec<RatioRow>> {
    u.check_grid(mask.grid())?;
    let grid = mask.grid();
    let n = grid.dim() as f64;
    let h = grid.h();
    let reach = mask.shape().boundary_distance(x0);
    let mut rows = Vec::with_capacity(radii.len());
    for &r in radii {
        if r <= 2.0 * h {
            return Err(Error::Resolution(format!("radius {r} is not above 2h = {}", 2.0 * h)));
        }
        if 2.0 * r > reach + 1e-12 {
            return Err(Error::Resolution(format!("annulus [{r}, {}] reaches the boundary (distance {reach})", 2.0 * r)));
        }
        let (mut lo, mut hi, mut count) = (f64::INFINITY, f64::NEG_INFINITY, 0);
        for &i in mask.interior() {
            let x = grid.node(i);
            let d = x.iter().zip(x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if d >= r && d < 2.0 * r {
                let ratio = u.values()[i] / d.powf(2.0 * order - n);
                lo = lo.min(ratio);
                hi = hi.max(ratio);
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::Resolution(format!("no nodes in the annulus at r = {r}")));
        }
        rows.push(RatioRow { r, nodes: count, min_ratio: lo, max_ratio: hi });
    }
    Ok(rows)
}

/// `max max_ratio / min min_ratio` over the scan.
pub fn comparability_constant(rows: &[RatioRow]) -> f64 {
    let hi = rows.iter().map(|r| r.max_ratio).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|r| r.min_ratio).fold(f64::INFINITY, f64::min);
    hi / lo
}

/// Dyadic radii `r0, 2 r0, ...` while `2r <= r_max`.
pub fn dyadic_radii(r0: f64, r_max: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = r0;
    while 2.0 * r <= r_max * (1.0 + 1e-12) {
        out.push(r);
        r *= 2.0;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_mask, DomainShape, Grid};
    use crate::kernel::{KernelSpec, QuadConfig};
    use crate::measure::DensityExpr;
    use crate::operator::assemble;
    use std::f64::consts::PI;

    fn op1(a: f64, b: f64, h: f64) -> DiscreteOperator {
        let shape = DomainShape::interval(a, b);
        let grid = Grid::for_shape_with_spacing(&shape, h, 1.0).unwrap();
        let mask = build_mask(&grid, &shape).unwrap();
        assemble(&KernelSpec::fractional_laplacian(1, 0.5).unwrap(), &mask, &QuadConfig::default()).unwrap()
    }

    #[test]
    fn scalar_examples() {
        let op = op1(-0.5, 0.5, 1.0);
        let f = GridFunction::from_fn_interior(op.mask(), |_| 1.0);
        let (u, _) = weak_solve(&op, &f, &SolverConfig::default()).unwrap();
        assert!((u.interpolate(&[0.0]) - PI / 4.0).abs() < 1e-12);
        let (u, _) = duality_solve(&op, &RadonMeasure::dirac(vec![0.0], 1.0), &SolverConfig::default()).unwrap();
        assert!((u.values()[1] - PI / 4.0).abs() < 1e-12);
    }

    #[test]
    fn zero_data_gives_zero() {
        let op = op1(-1.0, 1.0, 0.125);
        let (u, rep) = duality_solve(&op, &RadonMeasure::zero(), &SolverConfig::default()).unwrap();
        assert!(u.values().iter().all(|v| *v == 0.0));
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn cg_matches_dense_and_duality_matches_weak() {
        let op = op1(-1.0, 1.0, 1.0 / 32.0);
        let expr = DensityExpr::Gaussian { center: vec![0.1], width: 0.3, amplitude: 1.0 };
        let f = GridFunction::from_fn_interior(op.mask(), |x| expr.eval(x));
        let (a, _) = weak_solve(&op, &f, &SolverConfig { method: SolverMethod::Cg, ..Default::default() }).unwrap();
        let (b, _) = weak_solve(&op, &f, &SolverConfig::dense()).unwrap();
        let (c, _) = duality_solve(&op, &RadonMeasure::from_density(expr), &SolverConfig::default()).unwrap();
        for i in 0..a.values().len() {
            assert!((a.values()[i] - b.values()[i]).abs() < 1e-8);
            assert!((a.values()[i] - c.values()[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn duality_certificate_and_noise_detector() {
        let op = op1(-1.0, 1.0, 1.0 / 64.0);
        let mu = RadonMeasure::dirac(vec![0.1], 1.0);
        let cfg = SolverConfig::default();
        let (u, _) = duality_solve(&op, &mu, &cfg).unwrap();
        let gs = random_test_functions(op.mask(), 5, 3);
        let cert = duality_verify(&op, &u, &mu, &gs, 1e-8, &cfg).unwrap();
        assert!(cert.passed, "{cert:?}");
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let noisy: Vec<f64> = u.values().iter().map(|v| v * (1.0 + 0.01 * rng.random::<f64>())).collect();
        let noisy = GridFunction::new(op.grid(), noisy).unwrap();
        let cert = duality_verify(&op, &noisy, &mu, &gs, 1e-8, &cfg).unwrap();
        assert!(cert.max_mismatch > 1e-3, "{cert:?}");
    }

    #[test]
    fn exterior_data_constants() {
        let op = op1(-1.0, 1.0, 1.0 / 16.0);
        let one = GridFunction::from_fn(op.grid(), |_| 1.0);
        let (u, _) = exterior_data_solve(&op, &one, 1.0, &SolverConfig::dense()).unwrap();
        assert!(u.values().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let (u, _) = exterior_data_solve(&op, &one, 0.0, &SolverConfig::default()).unwrap();
        assert!(u.values().iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn ratio_scan_errors() {
        let op = op1(-1.0, 1.0, 1.0 / 32.0);
        let (u, _) = duality_solve(&op, &RadonMeasure::dirac(vec![0.0], 1.0), &SolverConfig::default()).unwrap();
        assert!(matches!(fundamental_ratio_scan(&u, op.mask(), &[0.0], 0.5, &[0.01]), Err(Error::Resolution(_))));
        let rows = fundamental_ratio_scan(&u, op.mask(), &[0.0], 0.75, &dyadic_radii(0.125, 0.5)).unwrap();
        assert!(rows.iter().all(|r| r.min_ratio > 0.0));
    }
}
