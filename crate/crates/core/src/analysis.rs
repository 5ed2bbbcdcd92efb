//! Discrete norms, exponent arithmetic and refinement scans.

use std::fmt::Debug;

use num_rational::Rational64;
use num_traits::Num;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{build_mask, DomainMask, DomainShape, Grid};
use crate::error::{domain, Error, Result};
use crate::field::GridFunction;
use crate::kernel::{KernelSpec, QuadConfig};
use crate::measure::RadonMeasure;
use crate::operator::assemble;
use crate::par;
use crate::solve::{duality_rhs, solve_linear, SolverConfig};

fn nodes<'a>(u: &'a GridFunction, region: Option<&'a [usize]>) -> Box<dyn Iterator<Item = usize> + 'a> {
    match region {
        Some(r) => Box::new(r.iter().copied()),
        None => Box::new(0..u.values().len()),
    }
}

/// `h^n sum_region |u_i|^q`.
pub fn lq_integral(u: &GridFunction, q: f64, region: Option<&[usize]>) -> Result<f64> {
    if !(q >= 1.0) {
        return domain(format!("q must be at least 1, got {q}"));
    }
    let v = u.values();
    let sum: f64 = nodes(u, region).map(|i| v[i].abs().powf(q)).sum();
    Ok(u.grid().cell_volume() * sum)
}

/// `(h^n sum_region |u_i|^q)^{1/q}`.
pub fn lq_norm(u: &GridFunction, q: f64, region: Option<&[usize]>) -> Result<f64> {
    Ok(lq_integral(u, q, region)?.powf(1.0 / q))
}

#[inline]
fn abs_pow(d: f64, p: f64) -> f64 {
    if p == 2.0 {
        d * d
    } else if p == 1.0 {
        d.abs()
    } else {
        d.abs().powf(p)
    }
}

/// Offset table of `|k h|^{-e}` for the grid.
fn distance_power_table(grid: &Grid, e: f64) -> (usize, Vec<f64>) {
    let (nx, ny) = (grid.nx(), grid.ny());
    let width = 2 * nx - 1;
    let h = grid.h();
    let table = par::map_range(width * (2 * ny - 1), |idx| {
        let kx = (idx % width) as f64 - (nx as f64 - 1.0);
        let ky = (idx / width) as f64 - (ny as f64 - 1.0);
        let r2 = (kx * kx + ky * ky) * h * h;
        if r2 == 0.0 {
            0.0
        } else {
            r2.powf(-0.5 * e)
        }
    });
    (width, table)
}

fn offset_position(grid: &Grid, width: usize, i: usize, j: usize) -> usize {
    let (ix, iy) = grid.multi_index(i);
    let (jx, jy) = grid.multi_index(j);
    (jx + grid.nx() - 1 - ix) + width * (jy + grid.ny() - 1 - iy)
}

/// `(h^{2n} sum_{i != j in region} |u_i - u_j|^p / |x_i - x_j|^{n + sigma p})^{1/p}`.
pub fn gagliardo_seminorm(u: &GridFunction, sigma: f64, p: f64, region: &[usize]) -> Result<f64> {
    if !(sigma > 0.0 && sigma < 1.0) {
        return domain(format!("smoothness must lie in (0,1), got {sigma}"));
    }
    if !(p >= 1.0) {
        return domain(format!("p must be at least 1, got {p}"));
    }
    Ok(gagliardo_sum(u, sigma, p, region).powf(1.0 / p))
}

/// The double sum before the `1/p` root. Pairs with both values zero are
/// skipped, so the cost is `O(|support| |region|)`.
fn gagliardo_sum(u: &GridFunction, sigma: f64, p: f64, region: &[usize]) -> f64 {
    let grid = u.grid();
    let n = grid.dim() as f64;
    let (width, table) = distance_power_table(grid, n + sigma * p);
    let v = u.values();
    let support: Vec<usize> = region.iter().copied().filter(|&i| v[i] != 0.0).collect();
    let mut in_support = vec![false; v.len()];
    for &i in &support {
        in_support[i] = true;
    }
    let partial = par::map_range(support.len(), |k| {
        let i = support[k];
        let vi = v[i];
        let own = abs_pow(vi, p);
        let mut acc = 0.0;
        for &j in region {
            if j == i {
                continue;
            }
            let kern = table[offset_position(grid, width, i, j)];
            if in_support[j] {
                acc += abs_pow(vi - v[j], p) * kern;
            } else {
                // counted once from each side of the pair
                acc += 2.0 * own * kern;
            }
        }
        acc
    });
    let hn = grid.cell_volume();
    hn * hn * partial.iter().sum::<f64>()
}

/// `max_{i != j in region} |u_i - u_j| / |x_i - x_j|^gamma`.
///
/// Offsets are visited by increasing length and the scan stops once the
/// oscillation over the region divided by `|k h|^gamma` cannot beat the
/// current maximum, so the result is exact.
pub fn holder_seminorm(u: &GridFunction, gamma: f64, region: &[usize]) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return domain(format!("Hoelder exponent must lie in (0,1], got {gamma}"));
    }
    if region.len() < 2 {
        return domain("Hoelder seminorm needs at least two nodes");
    }
    let grid = u.grid();
    let v = u.values();
    let (nx, ny) = (grid.nx() as isize, grid.ny() as isize);
    let mut member = vec![false; v.len()];
    for &i in region {
        member[i] = true;
    }
    let (lo, hi) = region.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &i| (a.min(v[i]), b.max(v[i])));
    let osc = hi - lo;
    if osc == 0.0 {
        return Ok(0.0);
    }
    // half-plane of offsets, so each unordered pair is seen once
    let mut offsets: Vec<(isize, isize)> = Vec::new();
    for ky in 0..ny {
        for kx in -(nx - 1)..nx {
            if ky > 0 || kx > 0 {
                offsets.push((kx, ky));
            }
        }
    }
    offsets.sort_by_key(|&(kx, ky)| (kx * kx + ky * ky, ky, kx));
    let h = grid.h();
    let mut best = 0.0f64;
    let chunk = 64;
    let mut start = 0;
    while start < offsets.len() {
        let (kx, ky) = offsets[start];
        let r = h * ((kx * kx + ky * ky) as f64).sqrt();
        if osc / r.powf(gamma) <= best {
            break;
        }
        let end = (start + chunk).min(offsets.len());
        let batch = &offsets[start..end];
        let maxima = par::map_range(batch.len(), |b| {
            let (kx, ky) = batch[b];
            let mut m = 0.0f64;
            for &i in region {
                let (ix, iy) = grid.multi_index(i);
                let (jx, jy) = (ix as isize + kx, iy as isize + ky);
                if jx < 0 || jx >= nx || jy >= ny {
                    continue;
                }
                let j = grid.flat_index(jx as usize, jy as usize);
                if member[j] {
                    m = m.max((v[i] - v[j]).abs());
                }
            }
            let r = h * ((kx * kx + ky * ky) as f64).sqrt();
            m / r.powf(gamma)
        });
        best = maxima.into_iter().fold(best, f64::max);
        start = end;
    }
    Ok(best)
}

/// Number types the exponent arithmetic runs in: `f64` and exact rationals.
pub trait Scalar: Num + Copy + PartialOrd + Debug {
    fn from_i64(v: i64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f64 {
    fn from_i64(v: i64) -> Self {
        v as f64
    }
    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for Rational64 {
    fn from_i64(v: i64) -> Self {
        Rational64::from_integer(v)
    }
    fn to_f64(self) -> f64 {
        *self.numer() as f64 / *self.denom() as f64
    }
}

/// Exponents attached to `(n, s)` and optional integrability exponents.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentSet<T> {
    pub n: i64,
    pub s: T,
    pub alpha: T,
    pub q: Option<T>,
    pub p: Option<T>,
    /// `n / (n - 2s)`; `None` when `2s >= n` (no constraint).
    pub q_crit: Option<T>,
    /// `n p / (n - s p)`, defined when `s p < n`.
    pub p_star: Option<T>,
    /// `1 - (2 - 2s) / q`, reported only when positive.
    pub eta: Option<T>,
    /// `(n + 2 - alpha) / (n + 1 - alpha)` for the stable local estimate.
    pub stable_local_bound: T,
    /// `alpha - n / p` when `p > n / alpha`.
    pub riesz_gamma: Option<T>,
    /// Order `nu` of the Calderon-Zygmund scan (only `0` is implemented) and
    /// the resulting target smoothness `2s - nu`.
    pub cz_nu: T,
    pub cz_order: T,
}

pub fn critical_exponents<T: Scalar>(n: i64, s: T, q: Option<T>, p: Option<T>) -> Result<ExponentSet<T>> {
    let zero = T::zero();
    let one = T::one();
    let two = T::from_i64(2);
    if !(1..=3).contains(&n) {
        return domain(format!("dimension {n} outside 1..=3"));
    }
    if !(s > zero && s < one) {
        return domain(format!("order {s:?} outside (0,1)"));
    }
    if let Some(q) = q {
        if !(q >= one) {
            return domain("q must be at least 1");
        }
    }
    if let Some(p) = p {
        if !(p >= one) {
            return domain("p must be at least 1");
        }
    }
    let nn = T::from_i64(n);
    let alpha = two * s;
    let q_crit = (alpha < nn).then(|| nn / (nn - alpha));
    let p_star = p.and_then(|p| (s * p < nn).then(|| nn * p / (nn - s * p)));
    let eta = q.and_then(|q| {
        let e = one - (two - alpha) / q;
        (e > zero).then_some(e)
    });
    let riesz_gamma = p.and_then(|p| (alpha < nn && p * alpha > nn).then(|| alpha - nn / p));
    Ok(ExponentSet {
        n,
        s,
        alpha,
        q,
        p,
        q_crit,
        p_star,
        eta,
        stable_local_bound: (nn + two - alpha) / (nn + one - alpha),
        riesz_gamma,
        cz_nu: zero,
        cz_order: alpha,
    })
}

/// `|v|_{L^{p*}} / (|v|_{L^p} + [v]_{s,p})` over `region`.
pub fn embedding_ratio(v: &GridFunction, s: f64, p: f64, region: &[usize]) -> Result<f64> {
    let n = v.grid().dim() as f64;
    if !(s * p < n) {
        return domain(format!("embedding needs s p < n; got s = {s}, p = {p}, n = {n}"));
    }
    if region.iter().all(|&i| v.values()[i] == 0.0) {
        return Err(Error::UndefinedRatio("embedding ratio of the zero function".into()));
    }
    let p_star = n * p / (n - s * p);
    let top = lq_norm(v, p_star, Some(region))?;
    let bottom = lq_norm(v, p, Some(region))? + gagliardo_seminorm(v, s, p, region)?;
    Ok(top / bottom)
}

/// `count` bumps `(1 - |x - c|^2 / r^2)_+^2` whose supports lie inside the
/// domain, with radii uniform in `radii`. Bump `k` draws from stream `k`.
pub fn random_bumps(mask: &DomainMask, count: usize, radii: (f64, f64), seed: u64) -> Result<Vec<GridFunction>> {
    let shape = mask.shape();
    let (lo, hi) = shape.bbox();
    if !(radii.0 > 0.0 && radii.0 <= radii.1) {
        return domain("bump radii must satisfy 0 < r_min <= r_max");
    }
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let mut found = None;
        for _ in 0..100_000 {
            let c: Vec<f64> = (0..lo.len()).map(|a| lo[a] + rng.random::<f64>() * (hi[a] - lo[a])).collect();
            let r = radii.0 + (radii.1 - radii.0) * rng.random::<f64>();
            if shape.contains(&c) && shape.boundary_distance(&c) > r {
                found = Some((c, r));
                break;
            }
        }
        let (c, r) = found.ok_or_else(|| Error::Domain("no bump of the requested radius fits in the domain".into()))?;
        out.push(GridFunction::from_fn_interior(mask, |x| {
            let t = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / (r * r);
            if t < 1.0 {
                (1.0 - t) * (1.0 - t)
            } else {
                0.0
            }
        }));
    }
    Ok(out)
}

/// Quantity tracked across a refinement scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScanQuantity {
    LqNorm { q: f64 },
    /// `h^n sum |u|^q`, which diverges like a power of `h` when `|u|^q` is not
    /// integrable and therefore separates the regimes more sharply than the norm.
    LqIntegral { q: f64 },
    /// Gagliardo seminorm of order `sigma` and exponent `q`, over interior
    /// nodes farther than `margin` from the boundary.
    Gagliardo { sigma: f64, q: f64, margin: f64 },
    /// `|w|_{W^{2s, r}} / |g|_{L^r}` with `A w = g` and `g` the data density.
    CalderonZygmund { r: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Bounded,
    Diverging,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanLevel {
    pub cells: usize,
    pub h: f64,
    pub value: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub quantity: ScanQuantity,
    pub realization: String,
    pub levels: Vec<ScanLevel>,
    /// `value_{k+1} / value_k - 1`.
    pub growth: Vec<f64>,
    /// Least-squares slope of `log value` against `log h`.
    pub slope: f64,
    pub bounded_below: f64,
    pub diverging_above: f64,
    pub verdict: Verdict,
}

/// Problem solved at each level of a scan.
#[derive(Debug, Clone)]
pub struct ScanProblem {
    pub kernel: KernelSpec,
    pub shape: DomainShape,
    pub padding: f64,
    pub quad: QuadConfig,
    pub data: RadonMeasure,
    pub solver: SolverConfig,
}

/// Per-level drift thresholds for the verdict.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    pub bounded_below: f64,
    pub diverging_above: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self { bounded_below: 0.10, diverging_above: 0.25 }
    }
}

pub fn verdict(growth: &[f64], t: Thresholds) -> Verdict {
    if growth.iter().all(|g| g.abs() < t.bounded_below) {
        Verdict::Bounded
    } else if growth.iter().all(|g| *g > t.diverging_above) {
        Verdict::Diverging
    } else {
        Verdict::Inconclusive
    }
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

fn realization(quantity: &ScanQuantity, order: f64) -> String {
    match quantity {
        ScanQuantity::LqNorm { q } => format!("discrete L^{q} norm over interior nodes"),
        ScanQuantity::LqIntegral { q } => format!("h^n sum |u|^{q} over interior nodes"),
        ScanQuantity::Gagliardo { sigma, q, margin } => {
            format!("discrete Gagliardo W^({sigma},{q}) seminorm on nodes at distance > {margin} from the boundary")
        }
        ScanQuantity::CalderonZygmund { r } => {
            if 2.0 * order < 1.0 {
                let sig = (2.0 * order).min(0.99);
                format!("(L^{r} + Gagliardo order {sig}) / L^{r} of data, nu = 0")
            } else if 2.0 * order - 1.0 < 0.01 {
                format!("(L^{r} + L^{r} norm of first differences) / L^{r} of data, nu = 0")
            } else {
                let sig = 2.0 * order - 1.0;
                format!("(L^{r} + Gagliardo order {sig} of first differences) / L^{r} of data, nu = 0")
            }
        }
    }
}

/// `W^{2s, r}` surrogate of `w` used by the Calderon-Zygmund scan.
pub fn fractional_sobolev_norm(w: &GridFunction, order: f64, r: f64, region: &[usize]) -> Result<f64> {
    let base = lq_norm(w, r, Some(region))?;
    let two_s = 2.0 * order;
    if two_s < 1.0 {
        return Ok(base + gagliardo_seminorm(w, two_s.min(0.99), r, region)?);
    }
    let grid = w.grid();
    let h = grid.h();
    let mut extra = 0.0;
    for axis in 0..grid.dim() {
        let v = w.values();
        let diff: Vec<f64> = (0..v.len())
            .map(|i| {
                let (ix, iy) = grid.multi_index(i);
                let next = if axis == 0 {
                    (ix + 1 < grid.nx()).then(|| grid.flat_index(ix + 1, iy))
                } else {
                    (iy + 1 < grid.ny()).then(|| grid.flat_index(ix, iy + 1))
                };
                next.map_or(0.0, |j| (v[j] - v[i]) / h)
            })
            .collect();
        let d = GridFunction::new(grid, diff)?;
        extra += if two_s - 1.0 < 0.01 {
            lq_norm(&d, r, Some(region))?
        } else {
            gagliardo_seminorm(&d, two_s - 1.0, r, region)?
        };
    }
    Ok(base + extra)
}

/// Solves the problem at each refinement level and tracks `quantity`.
pub fn regularity_scan(
    problem: &ScanProblem,
    quantity: &ScanQuantity,
    cells: &[usize],
    thresholds: Thresholds,
) -> Result<ScanResult> {
    let mut out = regularity_scans(problem, std::slice::from_ref(quantity), cells, thresholds)?;
    Ok(out.remove(0))
}

/// Like [`regularity_scan`] for several quantities sharing one solve per level.
pub fn regularity_scans(
    problem: &ScanProblem,
    quantities: &[ScanQuantity],
    cells: &[usize],
    thresholds: Thresholds,
) -> Result<Vec<ScanResult>> {
    if cells.len() < 3 {
        return domain("a scan needs at least three refinement levels");
    }
    let mut levels: Vec<Vec<ScanLevel>> = vec![Vec::with_capacity(cells.len()); quantities.len()];
    for &c in cells {
        let grid = Grid::for_shape(&problem.shape, c, problem.padding)?;
        let mask = build_mask(&grid, &problem.shape)?;
        let op = assemble(&problem.kernel, &mask, &problem.quad)?;
        let b = duality_rhs(&op, &problem.data)?;
        let (u, rep) = solve_linear(&op, &b, None, &problem.solver)?;
        let u = GridFunction::from_interior(&mask, &u)?;
        for (quantity, out) in quantities.iter().zip(levels.iter_mut()) {
            let value = evaluate(quantity, &u, &mask, problem)?;
            out.push(ScanLevel { cells: c, h: grid.h(), value, iterations: rep.iterations });
        }
    }
    Ok(quantities
        .iter()
        .zip(levels)
        .map(|(quantity, levels)| {
            let growth: Vec<f64> = levels.windows(2).map(|w| w[1].value / w[0].value - 1.0).collect();
            let lx: Vec<f64> = levels.iter().map(|l| l.h.ln()).collect();
            let ly: Vec<f64> = levels.iter().map(|l| l.value.ln()).collect();
            ScanResult {
                quantity: quantity.clone(),
                realization: realization(quantity, problem.kernel.order()),
                verdict: verdict(&growth, thresholds),
                slope: fit_slope(&lx, &ly),
                growth,
                levels,
                bounded_below: thresholds.bounded_below,
                diverging_above: thresholds.diverging_above,
            }
        })
        .collect())
}

fn evaluate(quantity: &ScanQuantity, u: &GridFunction, mask: &DomainMask, problem: &ScanProblem) -> Result<f64> {
    let interior = mask.interior();
    match quantity {
        ScanQuantity::LqNorm { q } => lq_norm(u, *q, Some(interior)),
        ScanQuantity::LqIntegral { q } => lq_integral(u, *q, Some(interior)),
        ScanQuantity::Gagliardo { sigma, q, margin } => {
            let region = mask.region_away_from_boundary(*margin);
            gagliardo_seminorm(u, *sigma, *q, &region)
        }
        ScanQuantity::CalderonZygmund { r } => {
            let g = problem.data.density_values(mask)?;
            let g = GridFunction::from_interior(mask, &g)?;
            let gn = lq_norm(&g, *r, Some(interior))?;
            if gn == 0.0 {
                return Err(Error::UndefinedRatio("Calderon-Zygmund ratio needs nonzero density data".into()));
            }
            Ok(fractional_sobolev_norm(u, problem.kernel.order(), *r, interior)? / gn)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_mask, DomainShape, Grid};

    fn line(n: usize) -> Grid {
        Grid::new(vec![0.0], 1.0 / n as f64, vec![n]).unwrap()
    }

    #[test]
    fn lq_basics() {
        let disc = DomainShape::unit_ball(2);
        let grid = Grid::for_shape_with_spacing(&disc, 0.05, 1.0).unwrap();
        let mask = build_mask(&grid, &disc).unwrap();
        let one = GridFunction::from_fn_interior(&mask, |_| 1.0);
        let nrm = lq_norm(&one, 2.0, Some(mask.interior())).unwrap();
        assert!((nrm / std::f64::consts::PI.sqrt() - 1.0).abs() < 0.03);
        assert_eq!(lq_norm(&GridFunction::zeros(&grid), 3.0, None).unwrap(), 0.0);
        assert_eq!(lq_norm(&one.scaled(2.0), 2.0, None).unwrap(), 2.0 * lq_norm(&one, 2.0, None).unwrap());
        assert!(lq_norm(&one, 0.5, None).is_err());
    }

    fn brute_gagliardo(u: &GridFunction, sigma: f64, p: f64, region: &[usize]) -> f64 {
        let g = u.grid();
        let n = g.dim() as f64;
        let mut acc = 0.0;
        for &i in region {
            for &j in region {
                if i == j {
                    continue;
                }
                let (a, b) = (g.node(i), g.node(j));
                let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                acc += (u.values()[i] - u.values()[j]).abs().powf(p) / d.powf(n + sigma * p);
            }
        }
        (g.cell_volume() * g.cell_volume() * acc).powf(1.0 / p)
    }

    #[test]
    fn gagliardo_matches_brute_force() {
        let grid = line(8);
        let u = GridFunction::from_fn(&grid, |x| if x[0] > 0.5 { 1.0 } else { 0.0 });
        let all: Vec<usize> = (0..8).collect();
        let a = gagliardo_seminorm(&u, 0.25, 2.0, &all).unwrap();
        let b = brute_gagliardo(&u, 0.25, 2.0, &all);
        assert!((a - b).abs() <= 1e-12 * b);
        assert_eq!(gagliardo_seminorm(&GridFunction::from_fn(&grid, |_| 3.0), 0.5, 2.0, &all).unwrap(), 0.0);
        let a2 = gagliardo_seminorm(&u.scaled(2.0), 0.25, 2.0, &all).unwrap();
        assert!((a2 - 2.0 * a).abs() < 1e-12 * a);
        assert!(gagliardo_seminorm(&u, 1.0, 2.0, &all).is_err());

        let g2 = Grid::new(vec![0.0, 0.0], 0.1, vec![12, 9]).unwrap();
        let v = GridFunction::from_fn(&g2, |x| (3.0 * x[0]).sin() * x[1]);
        let region: Vec<usize> = (0..g2.len()).filter(|i| i % 5 != 0).collect();
        for p in [1.0, 1.7, 2.0, 3.0] {
            let a = gagliardo_seminorm(&v, 0.4, p, &region).unwrap();
            let b = brute_gagliardo(&v, 0.4, p, &region);
            assert!((a - b).abs() <= 1e-12 * b, "p = {p}: {a} vs {b}");
        }
    }

    #[test]
    fn holder_examples() {
        // nodes -1.0, -0.9, ..., 1.0 including the origin
        let grid = Grid::new(vec![-1.05], 0.1, vec![21]).unwrap();
        let all: Vec<usize> = (0..grid.len()).collect();
        let abs = GridFunction::from_fn(&grid, |x| x[0].abs());
        assert!((holder_seminorm(&abs, 1.0, &all).unwrap() - 1.0).abs() < 1e-12);
        let sq = GridFunction::from_fn(&grid, |x| x[0].abs().sqrt());
        let hs = holder_seminorm(&sq, 0.5, &all).unwrap();
        // brute force over all pairs
        let v = sq.values();
        let mut best = 0.0f64;
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                let d = grid.node(j)[0] - grid.node(i)[0];
                best = best.max((v[i] - v[j]).abs() / d.abs().sqrt());
            }
        }
        assert!((hs - best).abs() < 1e-14);
        assert!((hs - 1.0).abs() < 1e-10);
        assert_eq!(holder_seminorm(&GridFunction::from_fn(&grid, |_| 1.0), 0.5, &all).unwrap(), 0.0);
    }

    #[test]
    fn exponent_examples_rational() {
        let r = |a, b| Rational64::new(a, b);
        let e = critical_exponents(2, r(3, 4), Some(r(6, 5)), Some(r(8, 1))).unwrap();
        assert_eq!(e.q_crit, Some(r(4, 1)));
        assert_eq!(e.eta, Some(r(7, 12)));
        assert_eq!(e.stable_local_bound, r(5, 3));
        let e = critical_exponents(2, r(1, 2), None, Some(r(8, 1))).unwrap();
        assert_eq!(e.riesz_gamma, Some(r(3, 4)));
        let e = critical_exponents(1, r(3, 4), None, None).unwrap();
        assert_eq!(e.q_crit, None);
        let f = critical_exponents(2, 0.75, Some(1.2), None).unwrap();
        assert!((f.eta.unwrap() - 7.0 / 12.0).abs() < 1e-15);
    }

    #[test]
    fn embedding_ratio_homogeneous() {
        let disc = DomainShape::unit_ball(2);
        let grid = Grid::for_shape(&disc, 16, 1.0).unwrap();
        let mask = build_mask(&grid, &disc).unwrap();
        let v = GridFunction::from_fn_interior(&mask, |x| (1.0 - x[0] * x[0] - x[1] * x[1]).max(0.0));
        let a = embedding_ratio(&v, 0.5, 2.0, mask.interior()).unwrap();
        let b = embedding_ratio(&v.scaled(2.0), 0.5, 2.0, mask.interior()).unwrap();
        assert!((a - b).abs() < 1e-12 * a);
        assert!(matches!(
            embedding_ratio(&GridFunction::zeros(&grid), 0.5, 2.0, mask.interior()),
            Err(Error::UndefinedRatio(_))
        ));
    }

    #[test]
    fn verdict_rules() {
        let t = Thresholds::default();
        assert_eq!(verdict(&[0.05, -0.02], t), Verdict::Bounded);
        assert_eq!(verdict(&[0.4, 0.3], t), Verdict::Diverging);
        assert_eq!(verdict(&[0.4, 0.05], t), Verdict::Inconclusive);
        assert!((fit_slope(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]) - 2.0).abs() < 1e-15);
    }
}
