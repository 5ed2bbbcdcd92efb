//! Checks against values computed independently of the library's own
//! quadrature: statrs' Gamma function and adaptive Simpson integration of
//! closed-form integrands.

use std::f64::consts::PI;

use fracdual::domain::{build_mask, DomainShape, Grid};
use fracdual::kernel::{cell_weight, normalization_constant, KernelSpec, QuadConfig};
use fracdual::operator::{assemble, BallSolution};
use fracdual::special::gamma;

fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    rec(f, a, b, fa, fm, fb, whole, tol, 30)
}

#[test]
fn gamma_matches_statrs() {
    for k in 1..=1000 {
        let x = k as f64 / 100.0;
        let a = gamma(x);
        let b = statrs::function::gamma::gamma(x);
        assert!((a / b - 1.0).abs() < 1e-12, "x = {x}: {a} vs {b}");
    }
}

#[test]
fn normalization_constant_matches_statrs() {
    let g = statrs::function::gamma::gamma;
    for n in 1..=3usize {
        for k in 1..20 {
            let s = k as f64 / 20.0;
            let nf = n as f64;
            let want = s * (1.0 - s) * 4f64.powf(s) * g((nf + 2.0 * s) / 2.0) / (PI.powf(nf / 2.0) * g(2.0 - s));
            let got = normalization_constant(n, s).unwrap();
            assert!((got / want - 1.0).abs() < 1e-12, "n = {n}, s = {s}");
        }
    }
}

#[test]
fn cell_weight_2d_matches_semi_analytic_oracle() {
    // inner y-integral of (x^2 + y^2)^{-3/2} over [-1/2, 1/2] is 1 / (x^2 sqrt(x^2 + 1/4))
    let c = 1.0 / (2.0 * PI);
    let oracle = c * simpson(&|x: f64| 1.0 / (x * x * (x * x + 0.25).sqrt()), 1.0, 2.0, 1e-15);
    let spec = KernelSpec::fractional_laplacian(2, 0.5).unwrap();
    let got = cell_weight(&spec, &[0.0, 0.0], &[1.0, -0.5], &[2.0, 0.5], &QuadConfig::default()).unwrap();
    assert!((got / oracle - 1.0).abs() < 1e-8, "{got} vs {oracle}");
}

#[test]
fn adjacent_cell_weight_converges_with_depth() {
    let c = 1.0 / (2.0 * PI);
    let oracle = c * simpson(&|x: f64| 1.0 / (x * x * (x * x + 0.25).sqrt()), 0.5, 1.5, 1e-15);
    let spec = KernelSpec::fractional_laplacian(2, 0.5).unwrap();
    let got = cell_weight(&spec, &[0.0, 0.0], &[0.5, -0.5], &[1.5, 0.5], &QuadConfig::default()).unwrap();
    assert!((got / oracle - 1.0).abs() < 1e-6, "{got} vs {oracle}");
}

/// `(-Delta)^{1/2}` of `sqrt(1 - x^2)` at `x`, by direct quadrature of
/// `c int_0^inf (2u(x) - u(x+y) - u(x-y)) / y^2 dy`.
fn half_laplacian_1d(x: f64) -> f64 {
    let u = |t: f64| if t.abs() < 1.0 { (1.0 - t * t).sqrt() } else { 0.0 };
    let g = |y: f64| {
        if y == 0.0 {
            // limit: -u''(x)
            return 1.0 / (1.0 - x * x).powf(1.5);
        }
        (2.0 * u(x) - u(x + y) - u(x - y)) / (y * y)
    };
    let (a, b) = (1.0 - x.abs(), 1.0 + x.abs());
    // y = end - t^2 removes the square-root endpoint singularities
    let near = simpson(&|t: f64| 2.0 * t * g(a - t * t), 0.0, a.sqrt(), 1e-13)
        + simpson(&|t: f64| 2.0 * t * g(b - t * t), 0.0, (b - a).sqrt(), 1e-13);
    let far = 2.0 * u(x) / b;
    (near + far) / PI
}

/// `(-Delta)^{1/2}` of `(2/pi) sqrt(1 - |x|^2)` at the origin in 2D.
fn half_laplacian_2d_origin() -> f64 {
    let g0 = 2.0 / PI;
    let u = |r: f64| if r < 1.0 { g0 * (1.0 - r * r).sqrt() } else { 0.0 };
    let f = |r: f64| if r == 0.0 { 0.5 * g0 } else { (g0 - u(r)) / (r * r) };
    let c = 1.0 / (2.0 * PI);
    c * 2.0 * PI * (simpson(&|t: f64| 2.0 * t * f(1.0 - t * t), 0.0, 1.0, 1e-13) + g0)
}

#[test]
fn ball_solution_is_verified_by_direct_quadrature() {
    for x in [0.0, 0.3, 0.7] {
        let v = half_laplacian_1d(x);
        assert!((v - 1.0).abs() < 1e-5, "x = {x}: {v}");
    }
    assert!((half_laplacian_2d_origin() - 1.0).abs() < 1e-8);
    assert!((BallSolution::new(vec![0.0], 1.0, 0.5).value(&[0.0]) - 1.0).abs() < 1e-15);
}

#[test]
fn consistency_residual_decays_under_refinement() {
    let shape = DomainShape::interval(-1.0, 1.0);
    let sol = BallSolution::new(vec![0.0], 1.0, 0.5);
    let mut prev: Option<f64> = None;
    for cells in [32, 64, 128, 256] {
        let grid = Grid::for_shape(&shape, cells, 1.0).unwrap();
        let mask = build_mask(&grid, &shape).unwrap();
        let op = assemble(&KernelSpec::fractional_laplacian(1, 0.5).unwrap(), &mask, &QuadConfig::default()).unwrap();
        let region = mask.region_away_from_boundary(0.2);
        let res = op.consistency_residual(|x| sol.value(x), |_| 1.0, &region).unwrap();
        if let Some(p) = prev {
            assert!(p / res >= 1.3, "residual {p} -> {res}");
        }
        prev = Some(res);
    }
}

#[test]
fn two_dimensional_consistency_at_deep_nodes() {
    let shape = DomainShape::unit_ball(2);
    let sol = BallSolution::new(vec![0.0, 0.0], 1.0, 0.5);
    let mut prev: Option<f64> = None;
    for cells in [16, 32, 64] {
        let grid = Grid::for_shape(&shape, cells, 1.0).unwrap();
        let mask = build_mask(&grid, &shape).unwrap();
        let op = assemble(&KernelSpec::fractional_laplacian(2, 0.5).unwrap(), &mask, &QuadConfig::default()).unwrap();
        let region = mask.region_away_from_boundary(0.2);
        let res = op.consistency_residual(|x| sol.value(x), |_| 1.0, &region).unwrap();
        if let Some(p) = prev {
            assert!(p / res >= 1.3, "residual {p} -> {res}");
        }
        prev = Some(res);
    }
}
