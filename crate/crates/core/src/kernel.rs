//! Jump kernels `K(y)` comparable to the fractional-Laplacian kernel, and
//! integrals of them over cells, balls and box complements.
//!
//! Every kernel has the form `K(y) = m(y) |y|^{-(n+2s)}` where the
//! multiplier `m` stays inside the ellipticity bounds `[lambda, Lambda]`:
//!
//! * fractional Laplacian: `m = c_{n,s}`;
//! * comparable radial: `m = m(|y|)` for a bounded radial profile;
//! * alpha-stable: `m = a(y/|y|)` for an even angular table.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::special::{gamma, sphere_measure, GaussLegendre};

/// Normalization constant of the fractional Laplacian,
/// `c_{n,s} = s(1-s) 4^s Gamma((n+2s)/2) / (pi^{n/2} Gamma(2-s))`.
pub fn normalization_constant(n: usize, s: f64) -> Result<f64> {
    if !(1..=3).contains(&n) {
        return domain(format!("dimension {n} outside 1..=3"));
    }
    if !(s > 0.0 && s < 1.0) {
        return domain(format!("order s = {s} outside (0, 1)"));
    }
    let nf = n as f64;
    Ok(s * (1.0 - s) * 4f64.powf(s) * gamma((nf + 2.0 * s) / 2.0)
        / (PI.powf(nf / 2.0) * gamma(2.0 - s)))
}

/// Bounded radial multiplier `m(r)` of a comparable-radial kernel.
#[derive(Clone)]
pub enum RadialProfile {
    Constant(f64),
    /// `lo + (hi - lo) (1 + sin(frequency ln r)) / 2`.
    LogOscillating { lo: f64, hi: f64, frequency: f64 },
    /// `inner` for `r < radius`, `outer` otherwise.
    Step { radius: f64, inner: f64, outer: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RadialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Constant(c) => write!(f, "Constant({c})"),
            Self::LogOscillating { lo, hi, frequency } => {
                write!(f, "LogOscillating {{ lo: {lo}, hi: {hi}, frequency: {frequency} }}")
            }
            Self::Step { radius, inner, outer } => {
                write!(f, "Step {{ radius: {radius}, inner: {inner}, outer: {outer} }}")
            }
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl RadialProfile {
    pub fn value(&self, r: f64) -> f64 {
        match self {
            Self::Constant(c) => *c,
            Self::LogOscillating { lo, hi, frequency } => {
                let t = 0.5 * (1.0 + (frequency * r.ln()).sin());
                (lo + (hi - lo) * t).clamp(*lo, *hi)
            }
            Self::Step { radius, inner, outer } => {
                if r < *radius {
                    *inner
                } else {
                    *outer
                }
            }
            Self::Custom(f) => f(r),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::Step { radius, .. } => vec![*radius],
            _ => Vec::new(),
        }
    }
}

/// Even angular multiplier `a(theta)` tabulated at `M` uniform angles
/// `2 pi k / M`, linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct Anisotropy {
    values: Vec<f64>,
}

impl Anisotropy {
    /// Builds the table and symmetrizes it so that `a(theta) = a(theta + pi)`.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let m = values.len();
        if m < 2 || !m.is_multiple_of(2) {
            return Err(Error::InvalidKernel(format!(
                "anisotropy table needs an even number (>= 2) of entries, got {m}"
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidKernel("anisotropy values must be positive and finite".into()));
        }
        let half = m / 2;
        let mut sym = values.clone();
        for k in 0..half {
            let avg = 0.5 * (values[k] + values[k + half]);
            sym[k] = avg;
            sym[k + half] = avg;
        }
        Ok(Self { values: sym })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Table spacing in radians.
    pub fn spacing(&self) -> f64 {
        2.0 * PI / self.values.len() as f64
    }

    /// Interpolated value; the result never leaves the hull of the two
    /// neighbouring table entries.
    pub fn value_at(&self, theta: f64) -> f64 {
        let m = self.values.len();
        let t = theta.rem_euclid(2.0 * PI) / self.spacing();
        let k = (t.floor() as usize).min(m - 1);
        let frac = (t - k as f64).clamp(0.0, 1.0);
        let a0 = self.values[k];
        let a1 = self.values[(k + 1) % m];
        ((1.0 - frac) * a0 + frac * a1).clamp(a0.min(a1), a0.max(a1))
    }

    /// Exact integral of the interpolant over the circle.
    pub fn circle_integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spacing()
    }
}

#[derive(Debug, Clone)]
pub enum KernelFamily {
    FractionalLaplacian,
    ComparableRadial(RadialProfile),
    AlphaStable(Anisotropy),
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FractionalLaplacian => "fractional-laplacian",
            Self::ComparableRadial(_) => "comparable-radial",
            Self::AlphaStable(_) => "alpha-stable",
        }
    }
}

/// A symmetric, translation-invariant jump kernel of order `s`.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    dim: usize,
    order: f64,
    family: KernelFamily,
    lambda: f64,
    upper: f64,
}

impl KernelSpec {
    pub fn fractional_laplacian(dim: usize, order: f64) -> Result<Self> {
        let c = normalization_constant(dim, order)?;
        Ok(Self { dim, order, family: KernelFamily::FractionalLaplacian, lambda: c, upper: c })
    }

    /// Radial kernel `m(|y|)/|y|^{n+2s}`; the profile is validated on a
    /// log-spaced sample of 1000 radii in `[1e-6, 1e6]`.
    pub fn comparable_radial(
        dim: usize,
        order: f64,
        profile: RadialProfile,
        lambda: f64,
        upper: f64,
    ) -> Result<Self> {
        check_common(dim, order)?;
        check_bounds(lambda, upper)?;
        for k in 0..1000 {
            let r = 10f64.powf(-6.0 + 12.0 * k as f64 / 999.0);
            let m = profile.value(r);
            if !(m >= lambda && m <= upper) {
                return Err(Error::InvalidKernel(format!(
                    "radial profile value {m} at r = {r:e} outside [{lambda}, {upper}]"
                )));
            }
        }
        Ok(Self { dim, order, family: KernelFamily::ComparableRadial(profile), lambda, upper })
    }

    /// Alpha-stable kernel `a(y/|y|)/|y|^{n+alpha}` with `alpha = 2 order`.
    /// Bounds default to the table range.
    pub fn alpha_stable(
        dim: usize,
        order: f64,
        anisotropy: Anisotropy,
        bounds: Option<(f64, f64)>,
    ) -> Result<Self> {
        check_common(dim, order)?;
        if dim > 2 {
            return Err(Error::InvalidKernel("anisotropic tables are supported for n <= 2".into()));
        }
        let (lambda, upper) = bounds.unwrap_or((anisotropy.min(), anisotropy.max()));
        check_bounds(lambda, upper)?;
        if anisotropy.min() < lambda || anisotropy.max() > upper {
            return Err(Error::InvalidKernel(format!(
                "anisotropy range [{}, {}] outside [{lambda}, {upper}]",
                anisotropy.min(),
                anisotropy.max()
            )));
        }
        Ok(Self { dim, order, family: KernelFamily::AlphaStable(anisotropy), lambda, upper })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn order(&self) -> f64 {
        self.order
    }

    /// The homogeneity exponent `n + 2s`.
    pub fn exponent(&self) -> f64 {
        self.dim as f64 + 2.0 * self.order
    }

    pub fn family(&self) -> &KernelFamily {
        &self.family
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn is_fractional_laplacian(&self) -> bool {
        matches!(self.family, KernelFamily::FractionalLaplacian)
    }

    /// `K(y) |y|^{n+2s}`; `y` must be nonzero.
    pub fn multiplier(&self, y: &[f64]) -> f64 {
        match &self.family {
            KernelFamily::FractionalLaplacian => self.lambda,
            KernelFamily::ComparableRadial(p) => p.value(norm(y)),
            KernelFamily::AlphaStable(a) => a.value_at(half_turn_angle(y)),
        }
    }

    /// Angular part for kernels whose multiplier depends on direction only.
    fn angular_multiplier(&self, theta: f64) -> f64 {
        match &self.family {
            KernelFamily::FractionalLaplacian => self.lambda,
            KernelFamily::ComparableRadial(_) => 1.0,
            KernelFamily::AlphaStable(a) => a.value_at(theta),
        }
    }

    /// `integral_rho^infinity m r^{-1-2s} dr` for the radial variable, with
    /// the angular multiplier factored out.
    fn radial_tail(&self, rho: f64, quad: &QuadConfig) -> f64 {
        let two_s = 2.0 * self.order;
        match &self.family {
            KernelFamily::ComparableRadial(p) => radial_profile_tail(p, self.order, rho, quad),
            _ => rho.powf(-two_s) / two_s,
        }
    }

    /// Evaluates `K(y)`.
    pub fn eval(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.dim {
            return Err(Error::Dimension(format!("point has {} coordinates, kernel is {}D", y.len(), self.dim)));
        }
        let r2: f64 = y.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            return Err(Error::Singularity("kernel evaluated at y = 0".into()));
        }
        Ok(self.eval_r2(y, r2))
    }

    #[inline]
    pub(crate) fn eval_r2(&self, y: &[f64], r2: f64) -> f64 {
        self.multiplier(y) * r2.powf(-0.5 * self.exponent())
    }

    /// The ellipticity sandwich at `y`, `(lambda |y|^{-(n+2s)}, K(y), Lambda |y|^{-(n+2s)})`,
    /// all three built from the same computed power so the comparison is exact.
    pub fn sandwich(&self, y: &[f64]) -> Result<(f64, f64, f64)> {
        let r2: f64 = y.iter().map(|v| v * v).sum();
        if r2 == 0.0 {
            return Err(Error::Singularity("kernel evaluated at y = 0".into()));
        }
        let pw = r2.powf(-0.5 * self.exponent());
        Ok((self.lambda * pw, self.multiplier(y) * pw, self.upper * pw))
    }

    /// Angular integral of the multiplier over the unit sphere (radial
    /// profiles contribute their radial part through [`tail_mass`]).
    fn sphere_integral(&self) -> f64 {
        match &self.family {
            KernelFamily::FractionalLaplacian => self.lambda * sphere_measure(self.dim),
            KernelFamily::ComparableRadial(_) => sphere_measure(self.dim),
            KernelFamily::AlphaStable(a) => {
                if self.dim == 1 {
                    a.value_at(0.0) + a.value_at(PI)
                } else {
                    a.circle_integral()
                }
            }
        }
    }
}

fn check_common(dim: usize, order: f64) -> Result<()> {
    if !(1..=3).contains(&dim) {
        return Err(Error::InvalidKernel(format!("dimension {dim} outside 1..=3")));
    }
    if !(order > 0.0 && order < 1.0) {
        return Err(Error::InvalidKernel(format!("order {order} outside (0, 1)")));
    }
    Ok(())
}

fn check_bounds(lambda: f64, upper: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda <= upper && upper.is_finite()) {
        return Err(Error::InvalidKernel(format!("need 0 < lambda <= Lambda, got [{lambda}, {upper}]")));
    }
    Ok(())
}

fn norm(y: &[f64]) -> f64 {
    y.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Angle of `y` or `-y`, whichever lies in `[0, pi)`; `y` and `-y` map to the
/// same value bitwise, which makes even tables give exactly even kernels.
fn half_turn_angle(y: &[f64]) -> f64 {
    if y.len() == 1 {
        return 0.0;
    }
    if y[1] < 0.0 || (y[1] == 0.0 && y[0] < 0.0) {
        (-y[1]).atan2(-y[0])
    } else {
        y[1].atan2(y[0])
    }
}

/// Quadrature parameters for cell, tail and box-complement integrals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    /// Gauss-Legendre points per axis on each (sub)cell.
    pub gauss_order: usize,
    /// Maximum dyadic subdivision depth.
    pub max_depth: u32,
    /// A subcell is integrated directly once `diameter <= refine_ratio * distance`.
    pub refine_ratio: f64,
    /// Gauss points per angular piece.
    pub angular_order: usize,
    /// Equal angular pieces per box side (or per quadrant on a sphere).
    pub angular_pieces: usize,
    /// Panel width in `ln r` for radial-profile tails.
    pub radial_panel: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            gauss_order: 4,
            max_depth: 6,
            refine_ratio: 0.35,
            angular_order: 8,
            angular_pieces: 8,
            radial_panel: 0.5,
        }
    }
}

impl QuadConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gauss_order == 0 || self.angular_order == 0 || self.angular_pieces == 0 {
            return domain("quadrature orders must be positive");
        }
        if !(self.refine_ratio > 0.0) || !(self.radial_panel > 0.0) {
            return domain("refine_ratio and radial_panel must be positive");
        }
        Ok(())
    }
}

fn radial_profile_tail(profile: &RadialProfile, order: f64, rho: f64, quad: &QuadConfig) -> f64 {
    let two_s = 2.0 * order;
    if let RadialProfile::Constant(c) = profile {
        return c * rho.powf(-two_s) / two_s;
    }
    // integral over v = ln r of m(e^v) e^{-2 s v}; truncation leaves e^{-40} of the mass
    let v0 = rho.ln();
    let v1 = v0 + 40.0 / two_s;
    let mut cuts = vec![v0];
    let mut breaks: Vec<f64> = profile
        .breakpoints()
        .into_iter()
        .filter(|b| *b > 0.0)
        .map(f64::ln)
        .filter(|b| *b > v0 && *b < v1)
        .collect();
    breaks.sort_by(f64::total_cmp);
    cuts.extend(breaks);
    cuts.push(v1);
    let rule = GaussLegendre::new(quad.angular_order.max(8));
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let panels = ((b - a) / quad.radial_panel).ceil().max(1.0) as usize;
        let w = (b - a) / panels as f64;
        for k in 0..panels {
            let pa = a + k as f64 * w;
            total += rule.integrate(pa, pa + w, |v| profile.value(v.exp()) * (-two_s * v).exp());
        }
    }
    total
}

/// `integral_{|y| >= radius} K(y) dy`.
pub fn tail_mass(spec: &KernelSpec, radius: f64, quad: &QuadConfig) -> Result<f64> {
    if !(radius > 0.0) || !radius.is_finite() {
        return domain(format!("tail radius must be positive, got {radius}"));
    }
    Ok(spec.sphere_integral() * spec.radial_tail(radius, quad))
}

/// `integral_cell K(y - source) dy` over the axis-aligned cell `[lo, hi]`.
///
/// 1D cells use the closed-form antiderivative of `r^{-1-2s}` with the
/// multiplier taken at the cell midpoint (exact unless the multiplier varies
/// within the cell). 2D cells use tensor Gauss-Legendre rules on a dyadic
/// subdivision that refines toward the source.
pub fn cell_weight(spec: &KernelSpec, source: &[f64], lo: &[f64], hi: &[f64], quad: &QuadConfig) -> Result<f64> {
    let n = spec.dim();
    if source.len() != n || lo.len() != n || hi.len() != n {
        return Err(Error::Dimension("cell_weight arguments must match kernel dimension".into()));
    }
    if (0..n).any(|a| !(lo[a] < hi[a])) {
        return domain("cell has empty extent");
    }
    if (0..n).all(|a| source[a] >= lo[a] && source[a] <= hi[a]) {
        return Err(Error::Singularity(format!("source {source:?} lies in the closed cell")));
    }
    match n {
        1 => Ok(cell_weight_1d(spec, source[0], lo[0], hi[0])),
        2 => {
            let rule = GaussLegendre::new(quad.gauss_order);
            Ok(cell_weight_2d(spec, [source[0], source[1]], [lo[0], lo[1]], [hi[0], hi[1]], quad, &rule))
        }
        _ => domain("cell quadrature is implemented for n <= 2"),
    }
}

pub(crate) fn cell_weight_1d(spec: &KernelSpec, source: f64, lo: f64, hi: f64) -> f64 {
    let (a, b, mid) = if lo > source {
        (lo - source, hi - source, 0.5 * (lo + hi) - source)
    } else {
        (source - hi, source - lo, 0.5 * (lo + hi) - source)
    };
    let two_s = 2.0 * spec.order();
    let m = spec.multiplier(&[mid]);
    // a^{-2s} - b^{-2s} without cancellation
    let diff = -a.powf(-two_s) * (two_s * (a / b).ln()).exp_m1();
    m * diff / two_s
}

pub(crate) fn cell_weight_2d(
    spec: &KernelSpec,
    src: [f64; 2],
    lo: [f64; 2],
    hi: [f64; 2],
    quad: &QuadConfig,
    rule: &GaussLegendre,
) -> f64 {
    let dx = (lo[0] - src[0]).max(src[0] - hi[0]).max(0.0);
    let dy = (lo[1] - src[1]).max(src[1] - hi[1]).max(0.0);
    let dist = dx.hypot(dy);
    let diam = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
    if quad.max_depth == 0 || diam <= quad.refine_ratio * dist {
        return gauss_rect(spec, src, lo, hi, rule);
    }
    let mid = [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1])];
    let child = QuadConfig { max_depth: quad.max_depth - 1, ..quad.clone() };
    let mut total = 0.0;
    for (x0, x1) in [(lo[0], mid[0]), (mid[0], hi[0])] {
        for (y0, y1) in [(lo[1], mid[1]), (mid[1], hi[1])] {
            total += cell_weight_2d(spec, src, [x0, y0], [x1, y1], &child, rule);
        }
    }
    total
}

fn gauss_rect(spec: &KernelSpec, src: [f64; 2], lo: [f64; 2], hi: [f64; 2], rule: &GaussLegendre) -> f64 {
    let hx = 0.5 * (hi[0] - lo[0]);
    let hy = 0.5 * (hi[1] - lo[1]);
    let cx = 0.5 * (lo[0] + hi[0]) - src[0];
    let cy = 0.5 * (lo[1] + hi[1]) - src[1];
    let mut acc = 0.0;
    for (xi, wi) in rule.nodes().iter().zip(rule.weights()) {
        let x = cx + hx * xi;
        let mut row = 0.0;
        for (yj, wj) in rule.nodes().iter().zip(rule.weights()) {
            let y = cy + hy * yj;
            let p = [x, y];
            row += wj * spec.eval_r2(&p, x * x + y * y);
        }
        acc += wi * row;
    }
    acc * hx * hy
}

/// `integral_{y outside [lo, hi]} K(y - x) dy` for `x` strictly inside the box.
///
/// In 2D the angular integral is split at the four corner directions and,
/// for tabulated anisotropy, at every table angle; each piece is integrated
/// by Gauss-Legendre with the radial factor in closed form.
pub fn box_exterior_mass(spec: &KernelSpec, x: &[f64], lo: &[f64], hi: &[f64], quad: &QuadConfig) -> Result<f64> {
    let n = spec.dim();
    if x.len() != n || lo.len() != n || hi.len() != n {
        return Err(Error::Dimension("box_exterior_mass arguments must match kernel dimension".into()));
    }
    if (0..n).any(|a| !(x[a] > lo[a] && x[a] < hi[a])) {
        return domain(format!("point {x:?} not strictly inside the box"));
    }
    match n {
        1 => Ok(spec.angular_multiplier(PI) * spec.radial_tail(x[0] - lo[0], quad)
            + spec.angular_multiplier(0.0) * spec.radial_tail(hi[0] - x[0], quad)),
        2 => Ok(box_exterior_mass_2d(spec, [x[0], x[1]], [lo[0], lo[1]], [hi[0], hi[1]], quad)),
        _ => domain("box complements are implemented for n <= 2"),
    }
}

pub(crate) fn box_exterior_mass_2d(spec: &KernelSpec, x: [f64; 2], lo: [f64; 2], hi: [f64; 2], quad: &QuadConfig) -> f64 {
    let rule = GaussLegendre::new(quad.angular_order);
    let table_spacing = match spec.family() {
        KernelFamily::AlphaStable(a) => Some(a.spacing()),
        _ => None,
    };
    // corner angles, unwrapped to increase monotonically starting at the bottom-right corner
    let br = (lo[1] - x[1]).atan2(hi[0] - x[0]);
    let tr = (hi[1] - x[1]).atan2(hi[0] - x[0]);
    let tl = (hi[1] - x[1]).atan2(lo[0] - x[0]);
    let bl = (lo[1] - x[1]).atan2(lo[0] - x[0]) + 2.0 * PI;
    let sides = [
        (br, tr, 0.0, hi[0] - x[0]),
        (tr, tl, 0.5 * PI, hi[1] - x[1]),
        (tl, bl, PI, x[0] - lo[0]),
        (bl, br + 2.0 * PI, 1.5 * PI, x[1] - lo[1]),
    ];
    let mut total = 0.0;
    for (a, b, normal, dist) in sides {
        let mut cuts = Vec::with_capacity(quad.angular_pieces + 8);
        for k in 0..=quad.angular_pieces {
            cuts.push(a + (b - a) * k as f64 / quad.angular_pieces as f64);
        }
        if let Some(dt) = table_spacing {
            let mut k = (a / dt).ceil();
            while k * dt < b {
                cuts.push(k * dt);
                k += 1.0;
            }
        }
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|p, q| (*p - *q).abs() < 1e-15);
        for pair in cuts.windows(2) {
            total += rule.integrate(pair[0], pair[1], |theta| {
                let rho = dist / (theta - normal).cos();
                spec.angular_multiplier(theta) * spec.radial_tail(rho, quad)
            });
        }
    }
    total
}

/// Result of sampling the ellipticity sandwich.
#[derive(Debug, Clone, Serialize)]
pub struct EllipticityReport {
    pub samples: usize,
    /// Smallest and largest observed `K(y) |y|^{n+2s}`.
    pub measured_min: f64,
    pub measured_max: f64,
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub upper: f64,
    pub violations: usize,
    pub witness: Option<Vec<f64>>,
}

impl EllipticityReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

/// Samples `samples` points with log-uniform radius in `[1e-3, 1e3]` and
/// uniform direction and checks `lambda/|y|^{n+2s} <= K(y) <= Lambda/|y|^{n+2s}`.
pub fn ellipticity_check(spec: &KernelSpec, samples: usize, seed: u64) -> EllipticityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.dim();
    let mut report = EllipticityReport {
        samples,
        measured_min: f64::INFINITY,
        measured_max: f64::NEG_INFINITY,
        lambda: spec.lambda(),
        upper: spec.upper(),
        violations: 0,
        witness: None,
    };
    for _ in 0..samples {
        let dir = loop {
            let d: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let len = norm(&d);
            if len > 1e-12 && len <= 1.0 {
                break d.iter().map(|v| v / len).collect::<Vec<f64>>();
            }
        };
        let r = 10f64.powf(rng.random::<f64>() * 6.0 - 3.0);
        let y: Vec<f64> = dir.iter().map(|d| d * r).collect();
        let (lo, k, hi) = spec.sandwich(&y).expect("nonzero sample");
        let m = spec.multiplier(&y);
        report.measured_min = report.measured_min.min(m);
        report.measured_max = report.measured_max.max(m);
        if !(lo <= k && k <= hi) || !(m >= spec.lambda() && m <= spec.upper()) {
            report.violations += 1;
            report.witness.get_or_insert(y);
        }
    }
    report
}

/// Serializable kernel description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: String,
    pub n: usize,
    pub s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, rename = "Lambda", skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anisotropy: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<ProfileConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inner: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outer: Option<f64>,
}

impl KernelConfig {
    pub fn fractional_laplacian(n: usize, s: f64) -> Self {
        Self { family: "fractional-laplacian".into(), n, s, lambda: None, upper: None, anisotropy: None, profile: None }
    }

    pub fn build(&self) -> Result<KernelSpec> {
        match self.family.as_str() {
            "fractional-laplacian" => KernelSpec::fractional_laplacian(self.n, self.s),
            "comparable-radial" => {
                let lambda = self.lambda.ok_or_else(|| Error::InvalidKernel("comparable-radial needs lambda".into()))?;
                let upper = self.upper.ok_or_else(|| Error::InvalidKernel("comparable-radial needs Lambda".into()))?;
                let p = self.profile.as_ref().ok_or_else(|| Error::InvalidKernel("comparable-radial needs a profile".into()))?;
                let profile = match p.id.as_str() {
                    "constant" => RadialProfile::Constant(p.value.unwrap_or(lambda)),
                    "log-oscillating" => RadialProfile::LogOscillating {
                        lo: lambda,
                        hi: upper,
                        frequency: p.frequency.unwrap_or(1.0),
                    },
                    "step" => RadialProfile::Step {
                        radius: p.radius.unwrap_or(1.0),
                        inner: p.inner.unwrap_or(upper),
                        outer: p.outer.unwrap_or(lambda),
                    },
                    other => return Err(Error::InvalidKernel(format!("unknown profile id '{other}'"))),
                };
                KernelSpec::comparable_radial(self.n, self.s, profile, lambda, upper)
            }
            "alpha-stable" => {
                let table = self
                    .anisotropy
                    .clone()
                    .ok_or_else(|| Error::InvalidKernel("alpha-stable needs an anisotropy table".into()))?;
                let bounds = match (self.lambda, self.upper) {
                    (Some(l), Some(u)) => Some((l, u)),
                    (None, None) => None,
                    _ => return Err(Error::InvalidKernel("give both lambda and Lambda or neither".into())),
                };
                KernelSpec::alpha_stable(self.n, self.s, Anisotropy::new(table)?, bounds)
            }
            other => Err(Error::InvalidKernel(format!("unknown kernel family '{other}'"))),
        }
    }

    /// Describes `spec`; custom radial profiles have no serialized form.
    pub fn from_spec(spec: &KernelSpec) -> Result<Self> {
        let mut cfg = Self::fractional_laplacian(spec.dim(), spec.order());
        cfg.family = spec.family().name().into();
        match spec.family() {
            KernelFamily::FractionalLaplacian => {}
            KernelFamily::AlphaStable(a) => {
                cfg.anisotropy = Some(a.values().to_vec());
                cfg.lambda = Some(spec.lambda());
                cfg.upper = Some(spec.upper());
            }
            KernelFamily::ComparableRadial(p) => {
                cfg.lambda = Some(spec.lambda());
                cfg.upper = Some(spec.upper());
                let mut pc = ProfileConfig { id: String::new(), value: None, frequency: None, radius: None, inner: None, outer: None };
                match p {
                    RadialProfile::Constant(c) => {
                        pc.id = "constant".into();
                        pc.value = Some(*c);
                    }
                    RadialProfile::LogOscillating { lo, hi, frequency } => {
                        if *lo != spec.lambda() || *hi != spec.upper() {
                            return Err(Error::InvalidKernel("log-oscillating range must equal [lambda, Lambda] to serialize".into()));
                        }
                        pc.id = "log-oscillating".into();
                        pc.frequency = Some(*frequency);
                    }
                    RadialProfile::Step { radius, inner, outer } => {
                        pc.id = "step".into();
                        pc.radius = Some(*radius);
                        pc.inner = Some(*inner);
                        pc.outer = Some(*outer);
                    }
                    RadialProfile::Custom(_) => {
                        return Err(Error::InvalidKernel("custom radial profiles cannot be serialized".into()))
                    }
                }
                cfg.profile = Some(pc);
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fl(n: usize, s: f64) -> KernelSpec {
        KernelSpec::fractional_laplacian(n, s).unwrap()
    }

    #[test]
    fn normalization_constant_half_order() {
        assert!((normalization_constant(1, 0.5).unwrap() - 1.0 / PI).abs() < 1e-14);
        assert!((normalization_constant(2, 0.5).unwrap() - 0.5 / PI).abs() < 1e-14);
        assert!((normalization_constant(3, 0.5).unwrap() - 1.0 / (PI * PI)).abs() < 1e-14);
    }

    #[test]
    fn normalization_constant_rejects_bad_input() {
        assert!(matches!(normalization_constant(0, 0.5), Err(Error::Domain(_))));
        assert!(matches!(normalization_constant(4, 0.5), Err(Error::Domain(_))));
        assert!(matches!(normalization_constant(2, 0.0), Err(Error::Domain(_))));
        assert!(matches!(normalization_constant(2, 1.0), Err(Error::Domain(_))));
        for s in [0.01, 0.3, 0.7, 0.99] {
            assert!(normalization_constant(2, s).unwrap() > 0.0);
        }
    }

    #[test]
    fn eval_example_and_singularity() {
        let k = fl(1, 0.5);
        assert!((k.eval(&[2.0]).unwrap() - 0.25 / PI).abs() < 1e-15);
        assert!(matches!(k.eval(&[0.0]), Err(Error::Singularity(_))));
        assert!(matches!(k.eval(&[1.0, 0.0]), Err(Error::Dimension(_))));
    }

    #[test]
    fn anisotropy_is_symmetrized_and_even() {
        let a = Anisotropy::new(vec![1.0, 2.0, 1.5, 1.2]).unwrap();
        assert_eq!(a.values(), &[1.25, 1.6, 1.25, 1.6]);
        let k = KernelSpec::alpha_stable(2, 0.6, a, None).unwrap();
        for y in [[0.3, 0.7], [-1.0, 0.2], [0.01, -3.0]] {
            let neg = [-y[0], -y[1]];
            assert_eq!(k.eval(&y).unwrap(), k.eval(&neg).unwrap());
        }
        assert!(Anisotropy::new(vec![1.0, 2.0, 3.0]).is_err());
        assert!(Anisotropy::new(vec![1.0, -2.0]).is_err());
    }

    #[test]
    fn radial_profile_validation() {
        let bad = RadialProfile::Custom(Arc::new(|r: f64| if r > 100.0 { 5.0 } else { 1.0 }));
        assert!(KernelSpec::comparable_radial(2, 0.5, bad, 0.5, 2.0).is_err());
        let ok = RadialProfile::LogOscillating { lo: 0.5, hi: 2.0, frequency: 1.0 };
        assert!(KernelSpec::comparable_radial(2, 0.5, ok, 0.5, 2.0).is_ok());
    }

    #[test]
    fn cell_weight_1d_example() {
        let k = fl(1, 0.5);
        let q = QuadConfig::default();
        let w = cell_weight(&k, &[0.0], &[1.0], &[2.0], &q).unwrap();
        assert!((w - 0.5 / PI).abs() < 1e-15);
        let mirror = cell_weight(&k, &[0.0], &[-2.0], &[-1.0], &q).unwrap();
        assert_eq!(w, mirror);
        assert!(matches!(cell_weight(&k, &[1.0], &[1.0], &[2.0], &q), Err(Error::Singularity(_))));
    }

    #[test]
    fn cell_weight_1d_is_additive() {
        let k = fl(1, 0.3);
        let q = QuadConfig::default();
        let whole = cell_weight(&k, &[0.1], &[0.6], &[1.4], &q).unwrap();
        let left = cell_weight(&k, &[0.1], &[0.6], &[1.0], &q).unwrap();
        let right = cell_weight(&k, &[0.1], &[1.0], &[1.4], &q).unwrap();
        assert!(((left + right) - whole).abs() / whole < 1e-12);
    }

    #[test]
    fn tail_mass_examples() {
        let q = QuadConfig::default();
        let t1 = tail_mass(&fl(1, 0.5), 1.0, &q).unwrap();
        assert!((t1 - 2.0 / PI).abs() < 1e-15);
        let t2 = tail_mass(&fl(2, 0.5), 2.0, &q).unwrap();
        assert!((t2 - 0.5).abs() < 1e-14);
        assert!(tail_mass(&fl(2, 0.5), 0.0, &q).is_err());
        let k = fl(2, 0.3);
        let mut prev = f64::INFINITY;
        for r in [0.1, 0.5, 1.0, 3.0, 10.0] {
            let t = tail_mass(&k, r, &q).unwrap();
            assert!(t < prev);
            prev = t;
        }
    }

    #[test]
    fn tail_plus_annulus_cells_reconstructs_tail_1d() {
        let k = fl(1, 0.4);
        let q = QuadConfig::default();
        let (r0, r1, cells) = (0.25, 2.25, 8);
        let h = (r1 - r0) / cells as f64;
        let mut sum = tail_mass(&k, r1, &q).unwrap();
        for c in 0..cells {
            let a = r0 + c as f64 * h;
            sum += cell_weight(&k, &[0.0], &[a], &[a + h], &q).unwrap();
            sum += cell_weight(&k, &[0.0], &[-a - h], &[-a], &q).unwrap();
        }
        let t0 = tail_mass(&k, r0, &q).unwrap();
        assert!((sum - t0).abs() / t0 < 1e-12);
    }

    #[test]
    fn radial_profile_tail_matches_constant_closed_form() {
        let q = QuadConfig::default();
        let p = RadialProfile::Custom(Arc::new(|_| 1.7));
        let spec = KernelSpec::comparable_radial(2, 0.35, p, 1.0, 2.0).unwrap();
        let exact = 2.0 * PI * 1.7 * 0.8f64.powf(-0.7) / 0.7;
        let got = tail_mass(&spec, 0.8, &q).unwrap();
        assert!((got - exact).abs() / exact < 1e-12, "{got} vs {exact}");
    }

    #[test]
    fn box_exterior_mass_1d_closed_form() {
        let k = fl(1, 0.5);
        let q = QuadConfig::default();
        let got = box_exterior_mass(&k, &[0.25], &[-1.0], &[1.0], &q).unwrap();
        let exact = (1.0 / PI) * (1.0 / 1.25 + 1.0 / 0.75);
        assert!((got - exact).abs() < 1e-14);
    }

    #[test]
    fn box_exterior_mass_2d_concentric_square_brackets_tails() {
        // the complement of a square lies between the complements of its
        // circumscribed and inscribed discs
        let k = fl(2, 0.6);
        let q = QuadConfig::default();
        let m = box_exterior_mass(&k, &[0.0, 0.0], &[-1.0, -1.0], &[1.0, 1.0], &q).unwrap();
        let inner = tail_mass(&k, 1.0, &q).unwrap();
        let outer = tail_mass(&k, 2f64.sqrt(), &q).unwrap();
        assert!(m < inner && m > outer);
    }

    #[test]
    fn box_exterior_mass_2d_angular_refinement_is_converged() {
        let a = Anisotropy::new((0..64).map(|k| 1.5 + 0.5 * (2.0 * PI * k as f64 / 64.0).cos().powi(2)).collect()).unwrap();
        let k = KernelSpec::alpha_stable(2, 0.75, a, None).unwrap();
        let q = QuadConfig::default();
        let q2 = QuadConfig { angular_order: 2 * q.angular_order, angular_pieces: 2 * q.angular_pieces, ..q.clone() };
        let x = [0.3, -0.45];
        let m1 = box_exterior_mass(&k, &x, &[-2.0, -2.0], &[2.0, 2.0], &q).unwrap();
        let m2 = box_exterior_mass(&k, &x, &[-2.0, -2.0], &[2.0, 2.0], &q2).unwrap();
        assert!((m1 - m2).abs() / m2 < 1e-8, "{m1} vs {m2}");
    }

    #[test]
    fn ellipticity_sampled() {
        let q = ellipticity_check(&fl(2, 0.3), 1000, 7);
        assert!(q.passed());
        assert_eq!(q.measured_min, q.measured_max);
        let a = Anisotropy::new(vec![1.0, 2.0, 1.5, 1.0, 2.0, 1.5]).unwrap();
        let k = KernelSpec::alpha_stable(2, 0.75, a, Some((1.0, 2.0))).unwrap();
        let r = ellipticity_check(&k, 1000, 3);
        assert!(r.passed());
        assert!(r.measured_min >= 1.0 && r.measured_max <= 2.0);
    }

    #[test]
    fn config_round_trip() {
        for cfg in [
            KernelConfig::fractional_laplacian(2, 0.4),
            KernelConfig {
                family: "alpha-stable".into(),
                n: 2,
                s: 0.75,
                lambda: Some(1.0),
                upper: Some(2.0),
                anisotropy: Some(vec![1.0, 2.0, 1.0, 2.0]),
                profile: None,
            },
        ] {
            let spec = cfg.build().unwrap();
            assert_eq!(KernelConfig::from_spec(&spec).unwrap().build().unwrap().lambda(), spec.lambda());
        }
        let bad = KernelConfig { family: "gaussian".into(), ..KernelConfig::fractional_laplacian(2, 0.5) };
        assert!(bad.build().is_err());
    }
}
