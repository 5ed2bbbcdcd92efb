//! Uniform grids, domain shapes, interior masks and the uniform
//! exterior/interior ball checks.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::par;

/// Uniform tensor grid with nodes at cell centers. Node `i` along axis `a`
/// sits at `lo[a] + (i + 1/2) h`; indices are x-fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    lo: Vec<f64>,
    h: f64,
    counts: Vec<usize>,
}

impl Grid {
    pub fn new(lo: Vec<f64>, h: f64, counts: Vec<usize>) -> Result<Self> {
        if lo.is_empty() || lo.len() > 2 || lo.len() != counts.len() {
            return domain("grids are 1D or 2D with one count per axis");
        }
        if !(h > 0.0) || !h.is_finite() {
            return domain(format!("grid spacing must be positive, got {h}"));
        }
        if counts.contains(&0) {
            return domain("grid counts must be positive");
        }
        Ok(Self { lo, h, counts })
    }

    /// Grid whose cell faces align with the lower corner of the shape's
    /// bounding box, with `cells_across` cells along its longest side and
    /// `ceil(padding * diameter / (2h))` (at least one) padding cells per side.
    pub fn for_shape(shape: &DomainShape, cells_across: usize, padding: f64) -> Result<Self> {
        if cells_across == 0 {
            return domain("cells_across must be positive");
        }
        let (lo, hi) = shape.bbox();
        let width = (0..lo.len()).map(|a| hi[a] - lo[a]).fold(0.0, f64::max);
        Self::for_shape_with_spacing(shape, width / cells_across as f64, padding)
    }

    pub fn for_shape_with_spacing(shape: &DomainShape, h: f64, padding: f64) -> Result<Self> {
        if !(padding >= 0.0) {
            return domain("padding must be nonnegative");
        }
        let (lo, hi) = shape.bbox();
        let diam = shape.diameter();
        let pad = ((padding * diam / (2.0 * h)) - 1e-9).ceil().max(1.0) as usize;
        let mut glo = Vec::with_capacity(lo.len());
        let mut counts = Vec::with_capacity(lo.len());
        for a in 0..lo.len() {
            let inner = ((hi[a] - lo[a]) / h - 1e-9).ceil().max(1.0) as usize;
            glo.push(lo[a] - pad as f64 * h);
            counts.push(inner + 2 * pad);
        }
        Self::new(glo, h, counts)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.counts).map(|(l, &c)| l + c as f64 * self.h).collect()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `h^n`.
    pub fn cell_volume(&self) -> f64 {
        self.h.powi(self.dim() as i32)
    }

    pub fn nx(&self) -> usize {
        self.counts[0]
    }

    pub fn ny(&self) -> usize {
        if self.dim() > 1 {
            self.counts[1]
        } else {
            1
        }
    }

    /// `(ix, iy)` of a flat index (`iy = 0` in 1D).
    pub fn multi_index(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx(), idx / self.nx())
    }

    pub fn flat_index(&self, ix: usize, iy: usize) -> usize {
        ix + self.nx() * iy
    }

    pub fn coordinate(&self, axis: usize, i: usize) -> f64 {
        self.lo[axis] + (i as f64 + 0.5) * self.h
    }

    pub fn node(&self, idx: usize) -> Vec<f64> {
        let (ix, iy) = self.multi_index(idx);
        if self.dim() == 1 {
            vec![self.coordinate(0, ix)]
        } else {
            vec![self.coordinate(0, ix), self.coordinate(1, iy)]
        }
    }
}

/// A bounded open set `Omega`.
#[derive(Clone)]
pub enum DomainShape {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
    /// The box `[lo, hi]` with the closed upper-right quadrant
    /// `[mid, hi]` removed, `mid` being the box center.
    LShape { lo: [f64; 2], hi: [f64; 2] },
    /// `indicator(x) > 0` inside; `lo`/`hi` bound the set.
    Predicate {
        name: String,
        lo: Vec<f64>,
        hi: Vec<f64>,
        indicator: Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for DomainShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Ball { center, radius } => write!(f, "Ball({center:?}, {radius})"),
            Self::Box { lo, hi } => write!(f, "Box({lo:?}, {hi:?})"),
            Self::Annulus { center, r_in, r_out } => write!(f, "Annulus({center:?}, {r_in}, {r_out})"),
            Self::LShape { lo, hi } => write!(f, "LShape({lo:?}, {hi:?})"),
            Self::Predicate { name, .. } => write!(f, "Predicate({name})"),
        }
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn project_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let d = [b[0] - a[0], b[1] - a[1]];
    let len2 = d[0] * d[0] + d[1] * d[1];
    let t = (((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2).clamp(0.0, 1.0);
    [a[0] + t * d[0], a[1] + t * d[1]]
}

impl DomainShape {
    pub fn unit_ball(dim: usize) -> Self {
        Self::Ball { center: vec![0.0; dim], radius: 1.0 }
    }

    pub fn interval(a: f64, b: f64) -> Self {
        Self::Box { lo: vec![a], hi: vec![b] }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::DegenerateDomain(m.to_string()));
        match self {
            Self::Ball { center, radius } => {
                if center.is_empty() || center.len() > 3 || !(*radius > 0.0) {
                    return bad("ball needs 1..=3 center coordinates and a positive radius");
                }
            }
            Self::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return bad("box corners must satisfy lo < hi per axis");
                }
            }
            Self::Annulus { center, r_in, r_out } => {
                if center.is_empty() || !(*r_in > 0.0 && r_in < r_out) {
                    return bad("annulus needs 0 < r_in < r_out");
                }
            }
            Self::LShape { lo, hi } => {
                if !(lo[0] < hi[0] && lo[1] < hi[1]) {
                    return bad("L-shape corners must satisfy lo < hi");
                }
            }
            Self::Predicate { lo, hi, .. } => {
                if lo.is_empty() || lo.len() != hi.len() || lo.iter().zip(hi).any(|(a, b)| !(a < b)) {
                    return bad("predicate bounding box must satisfy lo < hi");
                }
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Ball { center, .. } | Self::Annulus { center, .. } => center.len(),
            Self::Box { lo, .. } | Self::Predicate { lo, .. } => lo.len(),
            Self::LShape { .. } => 2,
        }
    }

    pub fn bbox(&self) -> (Vec<f64>, Vec<f64>) {
        match self {
            Self::Ball { center, radius: r } | Self::Annulus { center, r_out: r, .. } => {
                (center.iter().map(|c| c - r).collect(), center.iter().map(|c| c + r).collect())
            }
            Self::Box { lo, hi } | Self::Predicate { lo, hi, .. } => (lo.clone(), hi.clone()),
            Self::LShape { lo, hi } => (lo.to_vec(), hi.to_vec()),
        }
    }

    pub fn diameter(&self) -> f64 {
        match self {
            Self::Ball { radius: r, .. } | Self::Annulus { r_out: r, .. } => 2.0 * r,
            _ => {
                let (lo, hi) = self.bbox();
                dist(&lo, &hi)
            }
        }
    }

    /// Strict membership; boundary points are outside.
    pub fn contains(&self, x: &[f64]) -> bool {
        match self {
            Self::Ball { center, radius } => dist(x, center) < *radius,
            Self::Box { lo, hi } => x.iter().enumerate().all(|(a, v)| *v > lo[a] && *v < hi[a]),
            Self::Annulus { center, r_in, r_out } => {
                let r = dist(x, center);
                r > *r_in && r < *r_out
            }
            Self::LShape { lo, hi } => {
                let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
                let in_box = x[0] > lo[0] && x[0] < hi[0] && x[1] > lo[1] && x[1] < hi[1];
                in_box && !(x[0] >= mid[0] && x[1] >= mid[1])
            }
            Self::Predicate { indicator, .. } => indicator(x) > 0.0,
        }
    }

    fn polygon(&self) -> Option<Vec<[f64; 2]>> {
        match self {
            Self::Box { lo, hi } if lo.len() == 2 => {
                Some(vec![[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
            }
            Self::LShape { lo, hi } => {
                let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
                Some(vec![
                    [lo[0], lo[1]],
                    [hi[0], lo[1]],
                    [hi[0], mid[1]],
                    [mid[0], mid[1]],
                    [mid[0], hi[1]],
                    [lo[0], hi[1]],
                ])
            }
            _ => None,
        }
    }

    /// A nearest point of the boundary to `x`: exact projections for the
    /// analytic shapes, ray bisection for predicates.
    pub fn nearest_boundary_point(&self, x: &[f64]) -> Vec<f64> {
        if let Some(poly) = self.polygon() {
            let p = [x[0], x[1]];
            let mut best = poly[0];
            let mut best_d = f64::INFINITY;
            for k in 0..poly.len() {
                let q = project_segment(p, poly[k], poly[(k + 1) % poly.len()]);
                let d = dist(&p, &q);
                if d < best_d {
                    best_d = d;
                    best = q;
                }
            }
            return best.to_vec();
        }
        match self {
            Self::Ball { center, radius } => radial_projection(x, center, *radius),
            Self::Annulus { center, r_in, r_out } => {
                let r = dist(x, center);
                let target = if (r - r_in).abs() < (r - r_out).abs() { *r_in } else { *r_out };
                radial_projection(x, center, target)
            }
            Self::Box { lo, hi } => {
                let outside = x.iter().enumerate().any(|(a, v)| *v <= lo[a] || *v >= hi[a]);
                if outside {
                    x.iter().enumerate().map(|(a, v)| v.clamp(lo[a], hi[a])).collect()
                } else {
                    let (mut axis, mut to_hi, mut best) = (0, false, f64::INFINITY);
                    for a in 0..x.len() {
                        if x[a] - lo[a] < best {
                            best = x[a] - lo[a];
                            axis = a;
                            to_hi = false;
                        }
                        if hi[a] - x[a] < best {
                            best = hi[a] - x[a];
                            axis = a;
                            to_hi = true;
                        }
                    }
                    let mut z = x.to_vec();
                    z[axis] = if to_hi { hi[axis] } else { lo[axis] };
                    z
                }
            }
            Self::Predicate { lo, hi, .. } => self.ray_boundary_point(x, dist(lo, hi)),
            Self::LShape { .. } => unreachable!("handled as polygon"),
        }
    }

    fn ray_boundary_point(&self, x: &[f64], reach: f64) -> Vec<f64> {
        let inside = self.contains(x);
        let dirs: Vec<Vec<f64>> = if x.len() == 1 {
            vec![vec![1.0], vec![-1.0]]
        } else {
            (0..720)
                .map(|k| {
                    let t = std::f64::consts::PI * k as f64 / 360.0;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        };
        let mut best: Option<(f64, Vec<f64>)> = None;
        for d in dirs {
            let at = |t: f64| -> Vec<f64> { x.iter().zip(&d).map(|(a, b)| a + t * b).collect() };
            // march to the first sign change, then bisect
            let steps = 400;
            let dt = reach / steps as f64;
            let mut t0 = 0.0;
            let mut hit = None;
            for k in 1..=steps {
                let t = k as f64 * dt;
                if best.as_ref().is_some_and(|(bd, _)| t - dt > *bd) {
                    break;
                }
                if self.contains(&at(t)) != inside {
                    hit = Some((t0, t));
                    break;
                }
                t0 = t;
            }
            if let Some((mut a, mut b)) = hit {
                for _ in 0..60 {
                    let m = 0.5 * (a + b);
                    if self.contains(&at(m)) == inside {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                let t = 0.5 * (a + b);
                if best.as_ref().is_none_or(|(bd, _)| t < *bd) {
                    best = Some((t, at(t)));
                }
            }
        }
        best.map(|(_, p)| p).unwrap_or_else(|| x.to_vec())
    }

    /// Distance to the boundary.
    pub fn boundary_distance(&self, x: &[f64]) -> f64 {
        match self {
            Self::Ball { center, radius } => (dist(x, center) - radius).abs(),
            Self::Annulus { center, r_in, r_out } => {
                let r = dist(x, center);
                (r - r_in).abs().min((r - r_out).abs())
            }
            _ => dist(x, &self.nearest_boundary_point(x)),
        }
    }
}

fn radial_projection(x: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let r = dist(x, center);
    if r == 0.0 {
        let mut z = center.to_vec();
        z[0] += radius;
        return z;
    }
    x.iter().zip(center).map(|(v, c)| c + radius * (v - c) / r).collect()
}

/// Serializable shape description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ShapeConfig {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Annulus { center: Vec<f64>, r_in: f64, r_out: f64 },
    LShape { lo: [f64; 2], hi: [f64; 2] },
}

impl ShapeConfig {
    pub fn build(&self) -> Result<DomainShape> {
        let shape = match self.clone() {
            Self::Ball { center, radius } => DomainShape::Ball { center, radius },
            Self::Box { lo, hi } => DomainShape::Box { lo, hi },
            Self::Annulus { center, r_in, r_out } => DomainShape::Annulus { center, r_in, r_out },
            Self::LShape { lo, hi } => DomainShape::LShape { lo, hi },
        };
        shape.validate()?;
        Ok(shape)
    }
}

/// Interior node set of a shape on a grid.
#[derive(Debug, Clone)]
pub struct DomainMask {
    grid: Grid,
    shape: DomainShape,
    interior: Vec<usize>,
    slot: Vec<u32>,
    boundary_distance: Vec<f64>,
}

const EXTERIOR: u32 = u32::MAX;

/// Marks the nodes whose centers lie strictly inside the shape.
pub fn build_mask(grid: &Grid, shape: &DomainShape) -> Result<DomainMask> {
    shape.validate()?;
    if shape.dim() != grid.dim() {
        return Err(Error::Dimension(format!("{}D shape on a {}D grid", shape.dim(), grid.dim())));
    }
    let (slo, shi) = shape.bbox();
    let ghi = grid.hi();
    for a in 0..grid.dim() {
        if !(slo[a] >= grid.lo()[a] + grid.h() - 1e-12 && shi[a] <= ghi[a] - grid.h() + 1e-12) {
            return domain("shape must leave at least one padding cell inside the grid box");
        }
    }
    let inside: Vec<bool> = par::map_range(grid.len(), |i| shape.contains(&grid.node(i)));
    let mut interior = Vec::new();
    let mut slot = vec![EXTERIOR; grid.len()];
    for (i, &ins) in inside.iter().enumerate() {
        if ins {
            slot[i] = interior.len() as u32;
            interior.push(i);
        }
    }
    if interior.is_empty() {
        return Err(Error::DegenerateDomain("no grid node lies inside the domain".into()));
    }
    let boundary_distance = match shape {
        DomainShape::Predicate { .. } => crossing_distances(grid, &inside),
        _ => par::map_range(grid.len(), |i| shape.boundary_distance(&grid.node(i))),
    };
    Ok(DomainMask { grid: grid.clone(), shape: shape.clone(), interior, slot, boundary_distance })
}

/// Distance estimates from the midpoints of label-changing grid edges.
fn crossing_distances(grid: &Grid, inside: &[bool]) -> Vec<f64> {
    let mut crossings: Vec<Vec<f64>> = Vec::new();
    let (nx, ny) = (grid.nx(), grid.ny());
    for iy in 0..ny {
        for ix in 0..nx {
            let i = grid.flat_index(ix, iy);
            let mut neighbours = Vec::new();
            if ix + 1 < nx {
                neighbours.push(grid.flat_index(ix + 1, iy));
            }
            if grid.dim() > 1 && iy + 1 < ny {
                neighbours.push(grid.flat_index(ix, iy + 1));
            }
            for j in neighbours {
                if inside[i] != inside[j] {
                    let (a, b) = (grid.node(i), grid.node(j));
                    crossings.push(a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect());
                }
            }
        }
    }
    par::map_range(grid.len(), |i| {
        let x = grid.node(i);
        crossings.iter().map(|c| dist(&x, c)).fold(f64::INFINITY, f64::min)
    })
}

impl DomainMask {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn shape(&self) -> &DomainShape {
        &self.shape
    }

    /// Grid indices of interior nodes, increasing.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    pub fn interior_len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_interior(&self, grid_index: usize) -> bool {
        self.slot[grid_index] != EXTERIOR
    }

    /// Position of a grid node in the interior ordering.
    pub fn slot(&self, grid_index: usize) -> Option<usize> {
        match self.slot[grid_index] {
            EXTERIOR => None,
            s => Some(s as usize),
        }
    }

    pub fn boundary_distance(&self, grid_index: usize) -> f64 {
        self.boundary_distance[grid_index]
    }

    /// Interior nodes (grid indices) satisfying `keep(x, boundary_distance)`.
    pub fn region_where(&self, keep: impl Fn(&[f64], f64) -> bool) -> Vec<usize> {
        self.interior
            .iter()
            .copied()
            .filter(|&i| keep(&self.grid.node(i), self.boundary_distance[i]))
            .collect()
    }

    /// Interior nodes farther than `delta` from the boundary.
    pub fn region_away_from_boundary(&self, delta: f64) -> Vec<usize> {
        self.region_where(|_, d| d > delta)
    }
}

/// Which side of the boundary a ball condition concerns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BallSide {
    Exterior,
    Interior,
}

/// Monte Carlo parameters for the ball checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallCheckConfig {
    pub samples: usize,
    pub probes: usize,
    pub seed: u64,
}

impl Default for BallCheckConfig {
    fn default() -> Self {
        Self { samples: 10_000, probes: 1_000, seed: 0x5eed }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BallCheckResult {
    pub side: BallSide,
    pub radius: f64,
    pub passed: bool,
    /// The lowest-index sample point whose tangent ball leaves its side.
    pub witness: Option<Vec<f64>>,
    pub tested: usize,
    pub failures: usize,
}

pub fn exterior_ball_check(shape: &DomainShape, radius: f64, cfg: &BallCheckConfig) -> Result<BallCheckResult> {
    ball_check(shape, radius, cfg, BallSide::Exterior)
}

pub fn interior_ball_check(shape: &DomainShape, radius: f64, cfg: &BallCheckConfig) -> Result<BallCheckResult> {
    ball_check(shape, radius, cfg, BallSide::Interior)
}

fn ball_check(shape: &DomainShape, radius: f64, cfg: &BallCheckConfig, side: BallSide) -> Result<BallCheckResult> {
    shape.validate()?;
    if cfg.samples < 100 {
        return domain(format!("ball checks need at least 100 samples, got {}", cfg.samples));
    }
    if !(radius > 0.0) {
        return domain("ball radius must be positive");
    }
    let n = shape.dim();
    let (lo, hi) = shape.bbox();
    let on_side = |x: &[f64]| match side {
        BallSide::Exterior => !shape.contains(x),
        BallSide::Interior => shape.contains(x),
    };
    let outcomes: Vec<Option<bool>> = par::map_range(cfg.samples, |k| {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        let mut x = vec![0.0; n];
        let mut found = false;
        for _ in 0..1000 {
            for a in 0..n {
                x[a] = lo[a] - radius + rng.random::<f64>() * (hi[a] - lo[a] + 2.0 * radius);
            }
            if on_side(&x) {
                let d = shape.boundary_distance(&x);
                if d > 0.0 && d < radius {
                    found = true;
                    break;
                }
            }
        }
        if !found {
            return None;
        }
        let z = shape.nearest_boundary_point(&x);
        let d = dist(&x, &z);
        if d == 0.0 {
            return None;
        }
        let center: Vec<f64> = z.iter().zip(&x).map(|(zv, xv)| zv + radius * (xv - zv) / d).collect();
        let probe_r = radius * (1.0 - 1e-9);
        let mut p = vec![0.0; n];
        for _ in 0..cfg.probes {
            sample_in_ball(&mut rng, &center, probe_r, &mut p);
            if !on_side(&p) {
                return Some(false);
            }
        }
        Some(true)
    });
    let tested = outcomes.iter().filter(|o| o.is_some()).count();
    let failures = outcomes.iter().filter(|o| **o == Some(false)).count();
    let witness = outcomes.iter().position(|o| *o == Some(false)).map(|k| {
        // regenerate the sample point deterministically
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(k as u64);
        let mut x = vec![0.0; n];
        loop {
            for a in 0..n {
                x[a] = lo[a] - radius + rng.random::<f64>() * (hi[a] - lo[a] + 2.0 * radius);
            }
            if on_side(&x) {
                let d = shape.boundary_distance(&x);
                if d > 0.0 && d < radius {
                    break x;
                }
            }
        }
    });
    Ok(BallCheckResult { side, radius, passed: failures == 0 && tested > 0, witness, tested, failures })
}

fn sample_in_ball(rng: &mut ChaCha8Rng, center: &[f64], r: f64, out: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for o in out.iter_mut() {
            *o = 2.0 * rng.random::<f64>() - 1.0;
            norm2 += *o * *o;
        }
        if norm2 < 1.0 {
            break;
        }
    }
    for (o, c) in out.iter_mut().zip(center) {
        *o = c + r * *o;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_for_interval_matches_example() {
        let shape = DomainShape::interval(-1.0, 1.0);
        let grid = Grid::for_shape_with_spacing(&shape, 0.5, 1.0).unwrap();
        assert_eq!(grid.lo(), &[-2.0]);
        assert_eq!(grid.hi(), vec![2.0]);
        let mask = build_mask(&grid, &shape).unwrap();
        let xs: Vec<f64> = mask.interior().iter().map(|&i| grid.node(i)[0]).collect();
        assert_eq!(xs, vec![-0.75, -0.25, 0.25, 0.75]);
    }

    #[test]
    fn single_node_grid() {
        let shape = DomainShape::interval(-0.5, 0.5);
        let grid = Grid::for_shape(&shape, 1, 1.0).unwrap();
        assert_eq!(grid.counts(), &[3]);
        let mask = build_mask(&grid, &shape).unwrap();
        assert_eq!(mask.interior_len(), 1);
        assert_eq!(grid.node(mask.interior()[0]), vec![0.0]);
    }

    #[test]
    fn disc_and_annulus_masks() {
        let disc = DomainShape::unit_ball(2);
        let grid = Grid::for_shape_with_spacing(&disc, 0.5, 1.0).unwrap();
        assert_eq!(grid.lo(), &[-2.0, -2.0]);
        let mask = build_mask(&grid, &disc).unwrap();
        assert!(mask.interior().iter().all(|&i| dist(&grid.node(i), &[0.0, 0.0]) < 1.0));

        let ann = DomainShape::Annulus { center: vec![0.0, 0.0], r_in: 0.5, r_out: 1.0 };
        let grid = Grid::for_shape(&ann, 32, 1.0).unwrap();
        let mask = build_mask(&grid, &ann).unwrap();
        for &i in mask.interior() {
            let r = dist(&grid.node(i), &[0.0, 0.0]);
            assert!(r > 0.5 && r < 1.0);
        }
    }

    #[test]
    fn boundary_nodes_are_exterior() {
        let shape = DomainShape::interval(-1.0, 1.0);
        let grid = Grid::new(vec![-2.25], 0.5, vec![9]).unwrap();
        let mask = build_mask(&grid, &shape).unwrap();
        let xs: Vec<f64> = mask.interior().iter().map(|&i| grid.node(i)[0]).collect();
        assert_eq!(xs, vec![-0.5, 0.0, 0.5]);
    }

    #[test]
    fn empty_interior_is_degenerate() {
        let shape = DomainShape::Ball { center: vec![0.05, 0.05], radius: 0.01 };
        let grid = Grid::new(vec![-1.0, -1.0], 0.5, vec![4, 4]).unwrap();
        assert!(matches!(build_mask(&grid, &shape), Err(Error::DegenerateDomain(_))));
    }

    #[test]
    fn mask_refinement_keeps_deep_nodes() {
        let shape = DomainShape::LShape { lo: [-1.0, -1.0], hi: [1.0, 1.0] };
        let coarse = Grid::for_shape(&shape, 8, 1.0).unwrap();
        let fine = Grid::for_shape(&shape, 16, 1.0).unwrap();
        let mc = build_mask(&coarse, &shape).unwrap();
        let mf = build_mask(&fine, &shape).unwrap();
        let hc = coarse.h();
        for &i in mc.interior() {
            if mc.boundary_distance(i) <= hc {
                continue;
            }
            let c = coarse.node(i);
            for j in 0..fine.len() {
                let x = fine.node(j);
                if (x[0] - c[0]).abs() < hc / 2.0 && (x[1] - c[1]).abs() < hc / 2.0 {
                    assert!(mf.is_interior(j));
                }
            }
        }
    }

    #[test]
    fn nearest_point_on_lshape_reentrant_edges() {
        let shape = DomainShape::LShape { lo: [-1.0, -1.0], hi: [1.0, 1.0] };
        let z = shape.nearest_boundary_point(&[0.3, 0.1]);
        assert!((z[0] - 0.3).abs() < 1e-15 && z[1].abs() < 1e-15);
        assert!(!shape.contains(&[0.5, 0.5]));
        assert!(shape.contains(&[-0.5, 0.5]));
        assert!(!shape.contains(&[0.0, 0.5]));
    }

    #[test]
    fn predicate_shape_matches_disc() {
        let pred = DomainShape::Predicate {
            name: "disc".into(),
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
            indicator: Arc::new(|x: &[f64]| 1.0 - (x[0] * x[0] + x[1] * x[1])),
        };
        let z = pred.nearest_boundary_point(&[0.5, 0.0]);
        assert!((z[0] - 1.0).abs() < 1e-6 && z[1].abs() < 1e-6, "{z:?}");
        let grid = Grid::for_shape(&pred, 16, 1.0).unwrap();
        let mask = build_mask(&grid, &pred).unwrap();
        let disc = build_mask(&grid, &DomainShape::unit_ball(2)).unwrap();
        assert_eq!(mask.interior(), disc.interior());
    }

    fn cfg() -> BallCheckConfig {
        BallCheckConfig { samples: 2000, probes: 400, seed: 11 }
    }

    #[test]
    fn disc_balls_pass() {
        let disc = DomainShape::unit_ball(2);
        assert!(exterior_ball_check(&disc, 0.5, &cfg()).unwrap().passed);
        assert!(interior_ball_check(&disc, 0.5, &cfg()).unwrap().passed);
    }

    #[test]
    fn square_and_lshape() {
        let sq = DomainShape::Box { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
        assert!(exterior_ball_check(&sq, 0.25, &cfg()).unwrap().passed);
        let int = interior_ball_check(&sq, 0.1, &cfg()).unwrap();
        assert!(!int.passed);
        let w = int.witness.unwrap();
        assert!((1.0 - w[0].abs()) < 0.1 && (1.0 - w[1].abs()) < 0.1, "witness {w:?} not near a corner");

        let l = DomainShape::LShape { lo: [-1.0, -1.0], hi: [1.0, 1.0] };
        let ext = exterior_ball_check(&l, 0.1, &cfg()).unwrap();
        assert!(!ext.passed);
        let w = ext.witness.unwrap();
        assert!(w[0].hypot(w[1]) < 0.2, "witness {w:?} not near the reentrant corner");
    }

    #[test]
    fn annulus_interior_ball() {
        let ann = DomainShape::Annulus { center: vec![0.0, 0.0], r_in: 0.5, r_out: 1.0 };
        assert!(interior_ball_check(&ann, 0.2, &cfg()).unwrap().passed);
    }

    #[test]
    fn ball_check_is_deterministic_and_validates() {
        let l = DomainShape::LShape { lo: [-1.0, -1.0], hi: [1.0, 1.0] };
        let a = exterior_ball_check(&l, 0.3, &cfg()).unwrap();
        let b = exterior_ball_check(&l, 0.3, &cfg()).unwrap();
        assert_eq!(a, b);
        let few = BallCheckConfig { samples: 10, ..cfg() };
        assert!(exterior_ball_check(&l, 0.3, &few).is_err());
    }
}
