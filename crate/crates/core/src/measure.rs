//! Finite signed measures on `Omega`: atoms plus an integrable density.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::DomainMask;
use crate::error::{Error, Result};
use crate::field::{stencil, GridFunction};
use crate::special::GaussLegendre;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Atom {
    pub location: Vec<f64>,
    pub mass: f64,
}

/// Named density expressions usable from configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DensityExpr {
    Constant { value: f64 },
    /// `amplitude * exp(-|x - center|^2 / (2 width^2))`
    Gaussian { center: Vec<f64>, width: f64, amplitude: f64 },
    /// `amplitude * (1 - |x - center|^2 / radius^2)^2` inside the radius.
    Bump { center: Vec<f64>, radius: f64, amplitude: f64 },
}

impl DensityExpr {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let d2 = |c: &[f64]| x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        match self {
            Self::Constant { value } => *value,
            Self::Gaussian { center, width, amplitude } => amplitude * (-d2(center) / (2.0 * width * width)).exp(),
            Self::Bump { center, radius, amplitude } => {
                let t = d2(center) / (radius * radius);
                if t < 1.0 {
                    amplitude * (1.0 - t) * (1.0 - t)
                } else {
                    0.0
                }
            }
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Self::Constant { value } => value.is_finite(),
            Self::Gaussian { width, amplitude, .. } => *width > 0.0 && amplitude.is_finite(),
            Self::Bump { radius, amplitude, .. } => *radius > 0.0 && amplitude.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidMeasure(format!("bad density parameters: {self:?}")))
        }
    }
}

#[derive(Clone)]
pub enum Density {
    Expr(DensityExpr),
    Samples(GridFunction),
    Custom(Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>),
}

impl fmt::Debug for Density {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Expr(e) => write!(f, "Expr({e:?})"),
            Self::Samples(_) => write!(f, "Samples(..)"),
            Self::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// How an analytic density becomes nodal values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    #[default]
    Collocation,
    /// 3-point Gauss average over each cell.
    CellAverage,
}

#[derive(Debug, Clone, Default)]
pub struct RadonMeasure {
    pub atoms: Vec<Atom>,
    pub density: Option<Density>,
    pub sampling: Sampling,
}

impl RadonMeasure {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn dirac(location: Vec<f64>, mass: f64) -> Self {
        Self { atoms: vec![Atom { location, mass }], ..Self::default() }
    }

    pub fn from_density(expr: DensityExpr) -> Self {
        Self { density: Some(Density::Expr(expr)), ..Self::default() }
    }

    pub fn with_density(mut self, density: Density) -> Self {
        self.density = Some(density);
        self
    }

    pub fn with_atom(mut self, location: Vec<f64>, mass: f64) -> Self {
        self.atoms.push(Atom { location, mass });
        self
    }

    pub fn scaled(&self, a: f64) -> Self {
        let atoms = self.atoms.iter().map(|at| Atom { location: at.location.clone(), mass: a * at.mass }).collect();
        let density = self.density.clone().map(|d| match d {
            Density::Expr(e) => Density::Custom(Arc::new(move |x: &[f64]| a * e.eval(x))),
            Density::Samples(g) => Density::Samples(g.scaled(a)),
            Density::Custom(f) => Density::Custom(Arc::new(move |x: &[f64]| a * f(x))),
        });
        Self { atoms, density, sampling: self.sampling }
    }

    pub fn is_nonnegative_atoms(&self) -> bool {
        self.atoms.iter().all(|a| a.mass >= 0.0)
    }

    fn validate(&self, mask: &DomainMask) -> Result<()> {
        let n = mask.grid().dim();
        for a in &self.atoms {
            if a.location.len() != n || !a.mass.is_finite() {
                return Err(Error::InvalidMeasure(format!("atom {:?} has wrong dimension or mass", a.location)));
            }
            if !mask.shape().contains(&a.location) {
                return Err(Error::InvalidMeasure(format!("atom at {:?} is not strictly inside the domain", a.location)));
            }
        }
        match &self.density {
            Some(Density::Expr(e)) => e.validate(),
            Some(Density::Samples(g)) => g.check_grid(mask.grid()),
            _ => Ok(()),
        }
    }

    /// Density values at interior nodes, in mask order.
    pub fn density_values(&self, mask: &DomainMask) -> Result<Vec<f64>> {
        let grid = mask.grid();
        let eval = |f: &dyn Fn(&[f64]) -> f64| -> Vec<f64> {
            mask.interior()
                .iter()
                .map(|&i| {
                    let x = grid.node(i);
                    match self.sampling {
                        Sampling::Collocation => f(&x),
                        Sampling::CellAverage => cell_average(f, &x, grid.h()),
                    }
                })
                .collect()
        };
        let vals = match &self.density {
            None => vec![0.0; mask.interior_len()],
            Some(Density::Expr(e)) => eval(&|x| e.eval(x)),
            Some(Density::Custom(f)) => eval(&**f),
            Some(Density::Samples(g)) => g.interior_values(mask)?,
        };
        if vals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMeasure("density is not finite at an interior node".into()));
        }
        Ok(vals)
    }
}

fn cell_average(f: &dyn Fn(&[f64]) -> f64, x: &[f64], h: f64) -> f64 {
    let gl = GaussLegendre::new(3);
    let pts: Vec<(f64, f64)> = gl.nodes().iter().zip(gl.weights()).map(|(t, w)| (0.5 * h * t, 0.5 * w)).collect();
    if x.len() == 1 {
        pts.iter().map(|(t, w)| w * f(&[x[0] + t])).sum()
    } else {
        let mut acc = 0.0;
        for (ty, wy) in &pts {
            for (tx, wx) in &pts {
                acc += wx * wy * f(&[x[0] + tx, x[1] + ty]);
            }
        }
        acc
    }
}

/// `sum |m_k| + h^n sum_interior |f_i|`.
pub fn total_variation(mu: &RadonMeasure, mask: &DomainMask) -> Result<f64> {
    mu.validate(mask)?;
    let atoms: f64 = mu.atoms.iter().map(|a| a.mass.abs()).sum();
    let dens: f64 = mu.density_values(mask)?.iter().map(|v| v.abs()).sum();
    Ok(atoms + mask.grid().cell_volume() * dens)
}

/// The vector `mu_h` over interior nodes with `<w_h, mu_h> ~ int w dmu`.
/// Hat-weight shares landing on exterior nodes are dropped.
pub fn discretize_to_functional(mu: &RadonMeasure, mask: &DomainMask) -> Result<Vec<f64>> {
    mu.validate(mask)?;
    let grid = mask.grid();
    let hn = grid.cell_volume();
    let mut out: Vec<f64> = mu.density_values(mask)?.into_iter().map(|v| v * hn).collect();
    for a in &mu.atoms {
        let st = stencil(grid, &a.location);
        let mut hit = false;
        for (i, w) in st {
            if let Some(k) = mask.slot(i) {
                out[k] += w * a.mass;
                hit = true;
            }
        }
        if !hit {
            return Err(Error::MeasureSupport(format!(
                "atom at {:?} has no interior node in its stencil",
                a.location
            )));
        }
    }
    Ok(out)
}

/// Config form of a measure.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureConfig {
    pub atoms: Vec<Atom>,
    pub density: Option<DensityExpr>,
    pub sampling: Sampling,
}

impl MeasureConfig {
    pub fn build(&self) -> RadonMeasure {
        RadonMeasure {
            atoms: self.atoms.clone(),
            density: self.density.clone().map(Density::Expr),
            sampling: self.sampling,
        }
    }
}
