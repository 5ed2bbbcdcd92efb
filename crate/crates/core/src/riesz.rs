//! Potential kernels `K(y) = m(y/|y|) |y|^{alpha - n}`, full-space
//! convolution on a truncated box, and checks of the potential's bounds,
//! Hoelder mapping and inversion of the operator.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{holder_seminorm, lq_norm};
use crate::domain::{build_mask, DomainShape, Grid};
use crate::error::{domain, Error, Result};
use crate::field::GridFunction;
use crate::kernel::{Anisotropy, KernelSpec, QuadConfig};
use crate::operator::assemble;
use crate::par;
use crate::special::GaussLegendre;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialMultiplier {
    Constant(f64),
    Table(Anisotropy),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialKernel {
    dim: usize,
    alpha: f64,
    multiplier: PotentialMultiplier,
    c1: f64,
    c2: f64,
}

/// `Gamma((n - alpha)/2) / (2^alpha pi^{n/2} Gamma(alpha/2))`, the constant
/// for which the kernel inverts the fractional Laplacian of order `alpha/2`.
pub fn riesz_constant(n: usize, alpha: f64) -> f64 {
    use crate::special::gamma;
    gamma(0.5 * (n as f64 - alpha)) / (2f64.powf(alpha) * PI.powf(0.5 * n as f64) * gamma(0.5 * alpha))
}

impl PotentialKernel {
    pub fn isotropic(dim: usize, alpha: f64, constant: f64) -> Result<Self> {
        Self::check(dim, alpha)?;
        if !(constant > 0.0) || !constant.is_finite() {
            return domain("potential constant must be positive");
        }
        Ok(Self { dim, alpha, multiplier: PotentialMultiplier::Constant(constant), c1: constant, c2: constant })
    }

    /// 2D kernel with an even angular table and declared bounds `c1 <= m <= c2`.
    pub fn anisotropic(alpha: f64, table: Anisotropy, c1: f64, c2: f64) -> Result<Self> {
        Self::check(2, alpha)?;
        if !(c1 > 0.0 && c1 <= c2) {
            return domain("potential bounds must satisfy 0 < c1 <= c2");
        }
        Ok(Self { dim: 2, alpha, multiplier: PotentialMultiplier::Table(table), c1, c2 })
    }

    fn check(dim: usize, alpha: f64) -> Result<()> {
        if !(1..=2).contains(&dim) {
            return domain("potential kernels are implemented for n <= 2");
        }
        if !(alpha > 0.0 && alpha < 2.0) {
            return domain(format!("alpha must lie in (0,2), got {alpha}"));
        }
        if alpha >= dim as f64 {
            return Err(Error::DivergentPotential(format!("alpha = {alpha} is not below n = {dim}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.c1, self.c2)
    }

    pub fn multiplier(&self) -> &PotentialMultiplier {
        &self.multiplier
    }

    fn angular(&self, theta: f64) -> f64 {
        match &self.multiplier {
            PotentialMultiplier::Constant(c) => *c,
            PotentialMultiplier::Table(a) => a.value_at(theta),
        }
    }

    /// `m(y / |y|)`; depends on the direction only.
    pub fn direction_multiplier(&self, y: &[f64]) -> f64 {
        match &self.multiplier {
            PotentialMultiplier::Constant(c) => *c,
            PotentialMultiplier::Table(a) => {
                let (x0, x1) = if y[1] < 0.0 || (y[1] == 0.0 && y[0] < 0.0) { (-y[0], -y[1]) } else { (y[0], y[1]) };
                a.value_at(x1.atan2(x0))
            }
        }
    }

    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(Error::Dimension("point dimension does not match the kernel".into()));
        }
        let r2: f64 = y.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            return Err(Error::Singularity("potential kernel at y = 0".into()));
        }
        Ok(self.direction_multiplier(y) * r2.powf(0.5 * (self.alpha - self.dim as f64)))
    }

    /// `integral_{[-h/2, h/2]^n} K`: the inscribed ball in closed form plus
    /// angular quadrature over the corners.
    pub fn self_cell_integral(&self, h: f64) -> f64 {
        let a = self.alpha;
        let r0 = 0.5 * h;
        if self.dim == 1 {
            return (self.angular(0.0) + self.angular(PI)) * r0.powf(a) / a;
        }
        let ball = match &self.multiplier {
            PotentialMultiplier::Constant(c) => 2.0 * PI * c,
            PotentialMultiplier::Table(t) => t.circle_integral(),
        } * r0.powf(a)
            / a;
        let rule = GaussLegendre::new(20);
        let mut cuts: Vec<f64> = (0..=8).map(|k| k as f64 * PI / 4.0).collect();
        if let PotentialMultiplier::Table(t) = &self.multiplier {
            let dt = t.spacing();
            let mut k = 1.0;
            while k * dt < 2.0 * PI {
                cuts.push(k * dt);
                k += 1.0;
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-15);
        let corners: f64 = cuts
            .windows(2)
            .map(|w| {
                rule.integrate(w[0], w[1], |th| {
                    let rho = r0 / th.cos().abs().max(th.sin().abs());
                    self.angular(th) * (rho.powf(a) - r0.powf(a)) / a
                })
            })
            .sum();
        ball + corners
    }
}

#[derive(Debug, Clone)]
pub struct RieszOutput {
    pub potential: GridFunction,
    /// False within the margin band next to the grid box.
    pub trusted: Vec<bool>,
}

/// Fraction of the box width kept free of data and flagged in the output.
pub const MARGIN: f64 = 0.1;

/// `I f(x_i) = h^n sum_{j != i} f_j K(x_i - x_j) + f_i integral_{cell} K`.
pub fn riesz_convolve(f: &GridFunction, kernel: &PotentialKernel) -> Result<RieszOutput> {
    let grid = f.grid();
    if grid.dim() != kernel.dim {
        return Err(Error::Dimension("potential kernel and grid dimensions differ".into()));
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let band = |axis: usize, i: usize| {
        let count = grid.counts()[axis] as f64;
        let t = (i as f64 + 0.5) / count;
        !(MARGIN..=1.0 - MARGIN).contains(&t)
    };
    let trusted: Vec<bool> = (0..grid.len())
        .map(|i| {
            let (ix, iy) = grid.multi_index(i);
            !band(0, ix) && !(grid.dim() > 1 && band(1, iy))
        })
        .collect();
    let vals = f.values();
    if let Some(i) = (0..grid.len()).find(|&i| vals[i] != 0.0 && !trusted[i]) {
        return domain(format!("data at {:?} lies inside the {MARGIN} margin band of the box", grid.node(i)));
    }
    // support rectangle
    let (mut x0, mut x1, mut y0, mut y1) = (nx, 0, ny, 0);
    for i in (0..grid.len()).filter(|&i| vals[i] != 0.0) {
        let (ix, iy) = grid.multi_index(i);
        x0 = x0.min(ix);
        x1 = x1.max(ix + 1);
        y0 = y0.min(iy);
        y1 = y1.max(iy + 1);
    }
    if x1 == 0 {
        return Ok(RieszOutput { potential: GridFunction::zeros(grid), trusted });
    }
    let h = grid.h();
    let hn = grid.cell_volume();
    let width = 2 * nx - 1;
    let self_term = kernel.self_cell_integral(h);
    let table: Vec<f64> = par::map_range(width * (2 * ny - 1), |idx| {
        let kx = (idx % width) as f64 - (nx as f64 - 1.0);
        let ky = (idx / width) as f64 - (ny as f64 - 1.0);
        if kx == 0.0 && ky == 0.0 {
            self_term
        } else if grid.dim() == 1 {
            hn * kernel.eval(&[kx * h]).unwrap_or(0.0)
        } else {
            hn * kernel.eval(&[kx * h, ky * h]).unwrap_or(0.0)
        }
    });
    let sw = x1 - x0;
    let out = par::map_range(grid.len(), |i| {
        let (ix, iy) = grid.multi_index(i);
        let mut acc = 0.0;
        for jy in y0..y1 {
            // K(x_i - x_j) = K(x_j - x_i) by evenness
            let ky = jy as isize - iy as isize;
            let start = (x0 as isize - ix as isize + nx as isize - 1) as usize + width * (ky + ny as isize - 1) as usize;
            let w = &table[start..start + sw];
            let row = &vals[grid.flat_index(x0, jy)..grid.flat_index(x0, jy) + sw];
            acc += w.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
        acc
    });
    Ok(RieszOutput { potential: GridFunction::new(grid, out)?, trusted })
}

/// `holder_seminorm(I f, alpha - n/p) / |f|_{L^p}` over `region`.
pub fn holder_mapping_check(f: &GridFunction, p: f64, kernel: &PotentialKernel, region: &[usize]) -> Result<HolderRatio> {
    let n = kernel.dim as f64;
    if !(p > n / kernel.alpha) {
        return Err(Error::HypothesisViolation(format!(
            "the Hoelder mapping needs p > n/alpha = {}; got p = {p}",
            n / kernel.alpha
        )));
    }
    let gamma = kernel.alpha - n / p;
    if gamma > 1.0 {
        return domain(format!("Hoelder exponent {gamma} exceeds 1"));
    }
    let out = riesz_convolve(f, kernel)?;
    if region.iter().any(|&i| !out.trusted[i]) {
        return domain("Hoelder region reaches into the untrusted margin band");
    }
    let fp = lq_norm(f, p, None)?;
    if fp == 0.0 {
        return Err(Error::UndefinedRatio("Hoelder ratio of the zero function".into()));
    }
    let seminorm = holder_seminorm(&out.potential, gamma, region)?;
    Ok(HolderRatio { gamma, seminorm, lp_norm: fp, ratio: seminorm / fp })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderRatio {
    pub gamma: f64,
    pub seminorm: f64,
    pub lp_norm: f64,
    pub ratio: f64,
}

/// Indicators of `count` seeded discs with centers in `center_box` and
/// radii in `[r_min, r_max]`.
pub fn random_disc_indicators(
    grid: &Grid,
    center_box: (&[f64], &[f64]),
    radii: (f64, f64),
    count: usize,
    seed: u64,
) -> Vec<GridFunction> {
    let (lo, hi) = center_box;
    (0..count)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            let c: Vec<f64> = (0..grid.dim()).map(|a| lo[a] + rng.random::<f64>() * (hi[a] - lo[a])).collect();
            let r = radii.0 + rng.random::<f64>() * (radii.1 - radii.0);
            GridFunction::from_fn(grid, |x| {
                let d2: f64 = x.iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum();
                if d2 < r * r {
                    1.0
                } else {
                    0.0
                }
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelBounds {
    pub samples: usize,
    pub measured_min: f64,
    pub measured_max: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Samples `K(y) |y|^{n - alpha}`; errors with a witness when a sample
/// leaves `[c1, c2]`.
pub fn kernel_bounds_check(kernel: &PotentialKernel, samples: usize, seed: u64) -> Result<KernelBounds> {
    if samples < 1000 {
        return domain(format!("kernel bounds check needs at least 1000 samples, got {samples}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let e = 0.5 * (kernel.alpha - kernel.dim as f64);
    for _ in 0..samples {
        let r = 10f64.powf(-3.0 + 6.0 * rng.random::<f64>());
        let y: Vec<f64> = if kernel.dim == 1 {
            vec![if rng.random::<bool>() { r } else { -r }]
        } else {
            let t = 2.0 * PI * rng.random::<f64>();
            vec![r * t.cos(), r * t.sin()]
        };
        let r2: f64 = y.iter().map(|v| v * v).sum();
        let pw = r2.powf(e);
        let m = kernel.direction_multiplier(&y);
        let k = m * pw;
        if !(kernel.c1 * pw <= k && k <= kernel.c2 * pw) {
            return Err(Error::Bound {
                message: format!("K(y)|y|^(n-alpha) = {m} outside [{}, {}]", kernel.c1, kernel.c2),
                witness: y,
            });
        }
        lo = lo.min(m);
        hi = hi.max(m);
    }
    Ok(KernelBounds { samples, measured_min: lo, measured_max: hi, c1: kernel.c1, c2: kernel.c2 })
}

/// Outcome of applying the discrete operator to a computed potential.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InversionLevel {
    pub cells: usize,
    pub h: f64,
    pub max_error: f64,
    pub max_data: f64,
}

/// Mean-zero radial bump `(1 - t)^3 (1 - 5t)` with `t = |x|^2 / R^2`.
pub fn mean_zero_bump(x: &[f64], radius: f64) -> f64 {
    let t = x.iter().map(|v| v * v).sum::<f64>() / (radius * radius);
    if t < 1.0 {
        (1.0 - t).powi(3) * (1.0 - 5.0 * t)
    } else {
        0.0
    }
}

/// In 2D with `alpha = 1` and the constant `1/(2 pi)`: computes `I f` for a
/// mean-zero bump on the box `[-2, 2]^2`, applies the discrete half-Laplacian
/// with those exterior values on `[-1, 1]^2`, and measures `max |L I f - f|`.
pub fn inversion_check(cells: usize, bump_radius: f64, quad: &QuadConfig) -> Result<InversionLevel> {
    let kernel = PotentialKernel::isotropic(2, 1.0, riesz_constant(2, 1.0))?;
    let omega = DomainShape::Box { lo: vec![-1.0, -1.0], hi: vec![1.0, 1.0] };
    let h = 4.0 / cells as f64;
    let grid = Grid::new(vec![-2.0, -2.0], h, vec![cells, cells])?;
    let mask = build_mask(&grid, &omega)?;
    let f = GridFunction::from_fn(&grid, |x| mean_zero_bump(x, bump_radius));
    let potential = riesz_convolve(&f, &kernel)?.potential;
    let op = assemble(&KernelSpec::fractional_laplacian(2, 0.5)?, &mask, quad)?;
    let lu = op.apply_with_exterior(&potential)?;
    let mut worst = 0.0f64;
    for (k, &i) in mask.interior().iter().enumerate() {
        worst = worst.max((lu[k] - f.values()[i]).abs());
    }
    Ok(InversionLevel { cells, h, max_error: worst, max_data: f.max_abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_and_errors() {
        assert!((riesz_constant(2, 1.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        assert!(matches!(PotentialKernel::isotropic(1, 1.0, 1.0), Err(Error::DivergentPotential(_))));
        assert!(matches!(PotentialKernel::isotropic(2, 1.0, 1.0).unwrap().eval(&[0.0, 0.0]), Err(Error::Singularity(_))));
    }

    #[test]
    fn self_cell_matches_fine_quadrature() {
        let k = PotentialKernel::isotropic(2, 1.0, 1.0).unwrap();
        // int_{[-1/2,1/2]^2} |y|^{-1} = 4 ln(1 + sqrt 2)
        let exact = 4.0 * (1.0 + 2f64.sqrt()).ln();
        let got = k.self_cell_integral(1.0);
        assert!((got - exact).abs() < 1e-12, "{got} vs {exact}");
    }

    #[test]
    fn delta_reproduces_kernel() {
        let k = PotentialKernel::isotropic(2, 1.0, 0.3).unwrap();
        let grid = Grid::new(vec![-1.0, -1.0], 2.0 / 40.0, vec![40, 40]).unwrap();
        let c = grid.flat_index(20, 20);
        let mut v = vec![0.0; grid.len()];
        v[c] = 1.0 / grid.cell_volume();
        let f = GridFunction::new(&grid, v).unwrap();
        let out = riesz_convolve(&f, &k).unwrap();
        let x0 = grid.node(c);
        for i in 0..grid.len() {
            let x = grid.node(i);
            let d = [x[0] - x0[0], x[1] - x0[1]];
            if d[0].hypot(d[1]) > 5.0 * grid.h() {
                let exact = k.eval(&d).unwrap();
                assert!((out.potential.values()[i] / exact - 1.0).abs() < 1e-3);
            }
        }
        let zero = riesz_convolve(&GridFunction::zeros(&grid), &k).unwrap();
        assert!(zero.potential.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn margin_rule_and_hypothesis() {
        let k = PotentialKernel::isotropic(2, 1.0, 1.0).unwrap();
        let grid = Grid::new(vec![-1.0, -1.0], 0.1, vec![20, 20]).unwrap();
        let edge = GridFunction::from_fn(&grid, |x| if x[0] < -0.9 { 1.0 } else { 0.0 });
        assert!(riesz_convolve(&edge, &k).is_err());
        let f = GridFunction::from_fn(&grid, |x| if x[0].hypot(x[1]) < 0.3 { 1.0 } else { 0.0 });
        let region: Vec<usize> = (0..grid.len()).filter(|&i| grid.node(i)[0].abs() < 0.5 && grid.node(i)[1].abs() < 0.5).collect();
        assert!(matches!(holder_mapping_check(&f, 1.5, &k, &region), Err(Error::HypothesisViolation(_))));
        let a = holder_mapping_check(&f, 8.0, &k, &region).unwrap();
        assert_eq!(a.gamma, 0.75);
        let b = holder_mapping_check(&f.scaled(2.0), 8.0, &k, &region).unwrap();
        assert!((a.ratio - b.ratio).abs() < 1e-12 * a.ratio);
    }

    #[test]
    fn convolution_is_symmetric() {
        let k = PotentialKernel::anisotropic(1.0, Anisotropy::new(vec![1.0, 2.0, 1.5, 1.2, 1.0, 1.8]).unwrap(), 1.0, 2.0).unwrap();
        let grid = Grid::new(vec![-1.0, -1.0], 0.1, vec![20, 20]).unwrap();
        let f = GridFunction::from_fn(&grid, |x| mean_zero_bump(&[x[0] - 0.1, x[1]], 0.5));
        let g = GridFunction::from_fn(&grid, |x| (1.0 - 4.0 * (x[0] * x[0] + x[1] * x[1])).max(0.0));
        let a: f64 = riesz_convolve(&f, &k).unwrap().potential.values().iter().zip(g.values()).map(|(p, q)| p * q).sum();
        let b: f64 = riesz_convolve(&g, &k).unwrap().potential.values().iter().zip(f.values()).map(|(p, q)| p * q).sum();
        assert!((a - b).abs() <= 1e-10 * a.abs().max(b.abs()));
    }

    #[test]
    fn bounds_check() {
        let iso = PotentialKernel::isotropic(2, 1.0, 0.4).unwrap();
        let b = kernel_bounds_check(&iso, 1000, 1).unwrap();
        assert_eq!((b.measured_min, b.measured_max), (0.4, 0.4));
        let table = Anisotropy::new(vec![1.0, 2.0, 1.5, 1.2]).unwrap();
        let an = PotentialKernel::anisotropic(1.0, table.clone(), 1.0, 2.0).unwrap();
        let b = kernel_bounds_check(&an, 5000, 2).unwrap();
        assert!(b.measured_min >= 1.0 && b.measured_max <= 2.0);
        let tight = PotentialKernel::anisotropic(1.0, table, 1.3, 2.0).unwrap();
        assert!(matches!(kernel_bounds_check(&tight, 1000, 3), Err(Error::Bound { .. })));
        let d = [0.6, 0.8];
        let near = an.direction_multiplier(&[0.1 * d[0], 0.1 * d[1]]);
        let far = an.direction_multiplier(&[10.0 * d[0], 10.0 * d[1]]);
        assert!((near - far).abs() < 1e-14);
    }
}
