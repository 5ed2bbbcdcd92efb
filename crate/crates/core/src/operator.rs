//! The discrete nonlocal operator: offset-indexed cell weights, per-node
//! tails beyond the grid box, and the induced symmetric M-matrix on the
//! interior nodes.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::domain::{DomainMask, Grid};
use crate::error::{Error, Result};
use crate::field::GridFunction;
use crate::kernel::{self, KernelSpec, QuadConfig};
use crate::par;
use crate::special::{gamma, GaussLegendre};

/// Translation-invariant weights `w(k)` for offsets spanning the grid.
/// `w(0) = 0`; the table is stored x-fastest with `(2 nx - 1)` columns.
#[derive(Debug, Clone, PartialEq)]
pub struct OffsetTable {
    nx: usize,
    ny: usize,
    width: usize,
    weights: Vec<f64>,
}

impl OffsetTable {
    fn new(grid: &Grid, f: impl Fn(isize, isize) -> f64 + Sync + Send) -> Self {
        let (nx, ny) = (grid.nx(), grid.ny());
        let width = 2 * nx - 1;
        let height = 2 * ny - 1;
        let weights = par::map_range(width * height, |idx| {
            let kx = (idx % width) as isize - (nx as isize - 1);
            let ky = (idx / width) as isize - (ny as isize - 1);
            if kx == 0 && ky == 0 {
                0.0
            } else {
                f(kx, ky)
            }
        });
        Self { nx, ny, width, weights }
    }

    fn position(&self, kx: isize, ky: isize) -> usize {
        (kx + self.nx as isize - 1) as usize + self.width * (ky + self.ny as isize - 1) as usize
    }

    /// `w(kx, ky)`; `ky` is ignored for 1D tables.
    pub fn get(&self, kx: isize, ky: isize) -> f64 {
        self.weights[self.position(kx, ky)]
    }

    /// `w(kx0 .. kx0 + len, ky)` as a contiguous slice.
    pub fn row(&self, kx0: isize, ky: isize, len: usize) -> &[f64] {
        let p = self.position(kx0, ky);
        &self.weights[p..p + len]
    }

    pub fn x_range(&self) -> std::ops::RangeInclusive<isize> {
        -(self.nx as isize - 1)..=(self.nx as isize - 1)
    }

    pub fn y_range(&self) -> std::ops::RangeInclusive<isize> {
        -(self.ny as isize - 1)..=(self.ny as isize - 1)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.weights
    }

    fn symmetrize(&mut self) {
        let n = self.weights.len();
        for p in 0..n / 2 {
            let q = n - 1 - p;
            let avg = 0.5 * (self.weights[p] + self.weights[q]);
            self.weights[p] = avg;
            self.weights[q] = avg;
        }
    }
}

/// Interior-bounding rectangle `[x0, x1) x [y0, y1)` in grid indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Rect {
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

impl Rect {
    fn width(&self) -> usize {
        self.x1 - self.x0
    }
}

#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    spec: KernelSpec,
    mask: DomainMask,
    quad: QuadConfig,
    table: OffsetTable,
    tail: Vec<f64>,
    diag: Vec<f64>,
    rect: Rect,
}

/// Builds the operator for `spec` on the mask's grid.
pub fn assemble(spec: &KernelSpec, mask: &DomainMask, quad: &QuadConfig) -> Result<DiscreteOperator> {
    quad.validate()?;
    let grid = mask.grid();
    if spec.dim() != grid.dim() {
        return Err(Error::Dimension(format!("{}D kernel on a {}D grid", spec.dim(), grid.dim())));
    }
    let h = grid.h();
    let rule = GaussLegendre::new(quad.gauss_order);
    let mut table = OffsetTable::new(grid, |kx, ky| {
        let cx = kx as f64 * h;
        if grid.dim() == 1 {
            kernel::cell_weight_1d(spec, 0.0, cx - 0.5 * h, cx + 0.5 * h)
        } else {
            let cy = ky as f64 * h;
            kernel::cell_weight_2d(
                spec,
                [0.0, 0.0],
                [cx - 0.5 * h, cy - 0.5 * h],
                [cx + 0.5 * h, cy + 0.5 * h],
                quad,
                &rule,
            )
        }
    });
    if let Some(p) = table.weights.iter().position(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::Assembly(format!("cell weight {} at table position {p} is not a finite nonnegative number", table.weights[p])));
    }
    table.symmetrize();

    let lo = grid.lo().to_vec();
    let hi = grid.hi();
    let interior = mask.interior();
    let tail: Vec<f64> = par::map_range(interior.len(), |k| {
        let x = grid.node(interior[k]);
        match grid.dim() {
            1 => kernel::box_exterior_mass(spec, &x, &lo, &hi, quad).unwrap_or(f64::NAN),
            _ => kernel::box_exterior_mass_2d(spec, [x[0], x[1]], [lo[0], lo[1]], [hi[0], hi[1]], quad),
        }
    });
    if let Some(p) = tail.iter().position(|t| !t.is_finite() || *t <= 0.0) {
        return Err(Error::Assembly(format!("tail mass {} at interior node {p} is not positive", tail[p])));
    }

    let rect = interior_rect(mask);
    let full = Rect { x0: 0, x1: grid.nx(), y0: 0, y1: grid.ny() };
    let ones = vec![1.0; grid.len()];
    let diag: Vec<f64> = par::map_range(interior.len(), |k| {
        tail[k] + weighted_sum(&table, grid, full, &ones, full.width(), interior[k])
    });
    Ok(DiscreteOperator { spec: spec.clone(), mask: mask.clone(), quad: quad.clone(), table, tail, diag, rect })
}

fn interior_rect(mask: &DomainMask) -> Rect {
    let grid = mask.grid();
    let mut r = Rect { x0: usize::MAX, x1: 0, y0: usize::MAX, y1: 0 };
    for &i in mask.interior() {
        let (ix, iy) = grid.multi_index(i);
        r.x0 = r.x0.min(ix);
        r.x1 = r.x1.max(ix + 1);
        r.y0 = r.y0.min(iy);
        r.y1 = r.y1.max(iy + 1);
    }
    r
}

/// `sum_{j in rect} w(j - i) v_j` where `v` is laid out row-major over the
/// rectangle with row stride `stride`. Fixed summation order.
fn weighted_sum(table: &OffsetTable, grid: &Grid, rect: Rect, v: &[f64], stride: usize, i: usize) -> f64 {
    let (ix, iy) = grid.multi_index(i);
    let kx0 = rect.x0 as isize - ix as isize;
    let w = rect.width();
    let mut acc = 0.0;
    for jy in rect.y0..rect.y1 {
        let ky = jy as isize - iy as isize;
        let wr = table.row(kx0, ky, w);
        let start = (jy - rect.y0) * stride;
        acc += dot4(wr, &v[start..start + w]);
    }
    acc
}

/// Dot product with four interleaved accumulators.
#[inline]
fn dot4(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut s = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        s[0] += x[0] * y[0];
        s[1] += x[1] * y[1];
        s[2] += x[2] * y[2];
        s[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (s[0] + s[1]) + (s[2] + s[3]) + tail
}

/// Structural report on the induced interior matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MMatrixReport {
    pub unknowns: usize,
    pub offsets: usize,
    pub weights_nonnegative: bool,
    pub diagonal_positive: bool,
    pub symmetric: bool,
    pub strictly_dominant: bool,
    /// `min_i (d_i - sum_{interior j != i} w(j - i))`.
    pub min_surplus: f64,
    pub max_diagonal: f64,
}

impl MMatrixReport {
    pub fn passed(&self) -> bool {
        self.weights_nonnegative && self.diagonal_positive && self.symmetric && self.strictly_dominant
    }
}

impl DiscreteOperator {
    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn mask(&self) -> &DomainMask {
        &self.mask
    }

    pub fn grid(&self) -> &Grid {
        self.mask.grid()
    }

    pub fn quad(&self) -> &QuadConfig {
        &self.quad
    }

    pub fn table(&self) -> &OffsetTable {
        &self.table
    }

    /// Mass beyond the grid box seen from each interior node.
    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    pub fn unknowns(&self) -> usize {
        self.diag.len()
    }

    /// `w(x_j - x_i)` for grid indices `i`, `j`.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let g = self.grid();
        let (ix, iy) = g.multi_index(i);
        let (jx, jy) = g.multi_index(j);
        self.table.get(jx as isize - ix as isize, jy as isize - iy as isize)
    }

    fn scatter_rect(&self, u: &[f64]) -> Vec<f64> {
        let g = self.grid();
        let r = self.rect;
        let mut v = vec![0.0; r.width() * (r.y1 - r.y0)];
        for (k, &i) in self.mask.interior().iter().enumerate() {
            let (ix, iy) = g.multi_index(i);
            v[(ix - r.x0) + r.width() * (iy - r.y0)] = u[k];
        }
        v
    }

    /// `A u` for interior-ordered `u`.
    pub fn apply_interior(&self, u: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.unknowns()];
        self.apply_into(u, &mut out)?;
        Ok(out)
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) -> Result<()> {
        if u.len() != self.unknowns() || out.len() != self.unknowns() {
            return Err(Error::Dimension(format!("operator has {} unknowns, got {}", self.unknowns(), u.len())));
        }
        let v = self.scatter_rect(u);
        let g = self.grid();
        let interior = self.mask.interior();
        par::fill_indexed(out, |k| {
            self.diag[k] * u[k] - weighted_sum(&self.table, g, self.rect, &v, self.rect.width(), interior[k])
        });
        Ok(())
    }

    /// `A u` as a grid function; `u` must vanish on exterior nodes.
    pub fn apply(&self, u: &GridFunction) -> Result<GridFunction> {
        u.check_grid(self.grid())?;
        if (0..u.values().len()).any(|i| !self.mask.is_interior(i) && u.values()[i] != 0.0) {
            return Err(Error::Dimension("apply expects a function vanishing outside the domain".into()));
        }
        let au = self.apply_interior(&u.interior_values(&self.mask)?)?;
        GridFunction::from_interior(&self.mask, &au)
    }

    /// The nonlocal operator at interior nodes for a function given on the
    /// whole grid and zero beyond the box:
    /// `d_i u_i - sum_{grid j != i} w(j - i) u_j`.
    pub fn apply_with_exterior(&self, u: &GridFunction) -> Result<Vec<f64>> {
        u.check_grid(self.grid())?;
        let g = self.grid();
        let full = Rect { x0: 0, x1: g.nx(), y0: 0, y1: g.ny() };
        let interior = self.mask.interior();
        let vals = u.values();
        Ok(par::map_range(interior.len(), |k| {
            let i = interior[k];
            self.diag[k] * vals[i] - weighted_sum(&self.table, g, full, vals, full.width(), i)
        }))
    }

    /// `b_i = sum_{exterior j} w(j - i) phi_j + tail_value T_i`.
    pub fn exterior_rhs(&self, phi: &GridFunction, tail_value: f64) -> Result<Vec<f64>> {
        phi.check_grid(self.grid())?;
        let g = self.grid();
        let full = Rect { x0: 0, x1: g.nx(), y0: 0, y1: g.ny() };
        let ext: Vec<f64> = (0..g.len())
            .map(|i| if self.mask.is_interior(i) { 0.0 } else { phi.values()[i] })
            .collect();
        let interior = self.mask.interior();
        Ok(par::map_range(interior.len(), |k| {
            weighted_sum(&self.table, g, full, &ext, full.width(), interior[k]) + tail_value * self.tail[k]
        }))
    }

    pub fn mmatrix_report(&self) -> Result<MMatrixReport> {
        let w = self.table.as_slice();
        let n = w.len();
        let weights_nonnegative = w.iter().all(|x| *x >= 0.0);
        let symmetric = (0..n).all(|p| w[p].to_bits() == w[n - 1 - p].to_bits());
        let diagonal_positive = self.diag.iter().all(|d| *d > 0.0);
        let row_sums = self.apply_interior(&vec![1.0; self.unknowns()])?;
        let min_surplus = row_sums.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(MMatrixReport {
            unknowns: self.unknowns(),
            offsets: n,
            weights_nonnegative,
            diagonal_positive,
            symmetric,
            strictly_dominant: min_surplus > 0.0,
            min_surplus,
            max_diagonal: self.diag.iter().copied().fold(0.0, f64::max),
        })
    }

    /// Dense interior matrix; limited to 2000 unknowns.
    pub fn dense_matrix(&self) -> Result<DMatrix<f64>> {
        let m = self.unknowns();
        if m > DENSE_LIMIT {
            return Err(Error::Dimension(format!("dense export limited to {DENSE_LIMIT} unknowns, operator has {m}")));
        }
        let interior = self.mask.interior();
        Ok(DMatrix::from_fn(m, m, |a, b| {
            if a == b {
                self.diag[a]
            } else {
                -self.weight(interior[a], interior[b])
            }
        }))
    }

    /// `max_{i in region} |(A u_ref)_i - image(x_i)|` with `u_ref` sampled on
    /// interior nodes and zero outside.
    pub fn consistency_residual(
        &self,
        reference: impl Fn(&[f64]) -> f64,
        image: impl Fn(&[f64]) -> f64,
        region: &[usize],
    ) -> Result<f64> {
        let g = self.grid();
        let u: Vec<f64> = self.mask.interior().iter().map(|&i| reference(&g.node(i))).collect();
        let au = self.apply_interior(&u)?;
        let mut worst = 0.0f64;
        for &i in region {
            let k = self.mask.slot(i).ok_or_else(|| Error::Domain("region node is not interior".into()))?;
            worst = worst.max((au[k] - image(&g.node(i))).abs());
        }
        Ok(worst)
    }
}

pub const DENSE_LIMIT: usize = 2000;

/// `u(x) = gamma (R^2 - |x - c|^2)_+^s`, the solution of `(-Delta)^s u = 1`
/// on the ball with zero exterior values.
#[derive(Debug, Clone, PartialEq)]
pub struct BallSolution {
    pub center: Vec<f64>,
    pub radius: f64,
    pub order: f64,
    pub gamma: f64,
}

impl BallSolution {
    pub fn new(center: Vec<f64>, radius: f64, order: f64) -> Self {
        let n = center.len() as f64;
        let s = order;
        let gamma = gamma(0.5 * n) / (4f64.powf(s) * gamma(1.0 + s) * gamma(0.5 * n + s));
        Self { center, radius, order, gamma }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let r2: f64 = x.iter().zip(&self.center).map(|(a, b)| (a - b) * (a - b)).sum();
        let t = self.radius * self.radius - r2;
        if t > 0.0 {
            self.gamma * t.powf(self.order)
        } else {
            0.0
        }
    }
}
