use crate::domain::{DomainMask, Grid};
use crate::error::{Error, Result};

/// Real values at every node of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    values: Vec<f64>,
    zero_exterior: bool,
}

impl GridFunction {
    pub fn new(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Dimension(format!("{} values for {} grid nodes", values.len(), grid.len())));
        }
        Ok(Self { grid: grid.clone(), values, zero_exterior: false })
    }

    pub fn zeros(grid: &Grid) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.len()], zero_exterior: true }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.node(i))).collect();
        Self { grid: grid.clone(), values, zero_exterior: false }
    }

    /// Samples `f` on interior nodes, zero elsewhere.
    pub fn from_fn_interior(mask: &DomainMask, f: impl Fn(&[f64]) -> f64) -> Self {
        let grid = mask.grid();
        let mut values = vec![0.0; grid.len()];
        for &i in mask.interior() {
            values[i] = f(&grid.node(i));
        }
        Self { grid: grid.clone(), values, zero_exterior: true }
    }

    /// Scatters interior-ordered values; exterior nodes are zero.
    pub fn from_interior(mask: &DomainMask, interior_values: &[f64]) -> Result<Self> {
        if interior_values.len() != mask.interior_len() {
            return Err(Error::Dimension(format!(
                "{} values for {} interior nodes",
                interior_values.len(),
                mask.interior_len()
            )));
        }
        let grid = mask.grid();
        let mut values = vec![0.0; grid.len()];
        for (&i, &v) in mask.interior().iter().zip(interior_values) {
            values[i] = v;
        }
        Ok(Self { grid: grid.clone(), values, zero_exterior: true })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_zero_exterior(&self) -> bool {
        self.zero_exterior
    }

    /// Interior values in mask order.
    pub fn interior_values(&self, mask: &DomainMask) -> Result<Vec<f64>> {
        self.check_grid(mask.grid())?;
        Ok(mask.interior().iter().map(|&i| self.values[i]).collect())
    }

    /// Copy with exterior nodes set to zero.
    pub fn restricted(&self, mask: &DomainMask) -> Result<Self> {
        Self::from_interior(mask, &self.interior_values(mask)?)
    }

    /// Whether exterior nodes are exactly zero; sets the flag when they are.
    pub fn verify_zero_exterior(&mut self, mask: &DomainMask) -> bool {
        let ok = (0..self.values.len()).all(|i| mask.is_interior(i) || self.values[i] == 0.0);
        self.zero_exterior = ok;
        ok
    }

    pub fn check_grid(&self, grid: &Grid) -> Result<()> {
        if &self.grid != grid {
            return Err(Error::Dimension("grid function lives on a different grid".into()));
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| a * v).collect(), zero_exterior: self.zero_exterior }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Multilinear interpolation; points outside the node hull are clamped.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        stencil(&self.grid, x)
            .into_iter()
            .map(|(i, w)| w * self.values[i])
            .sum()
    }
}

/// The up-to-`2^n` nodes surrounding `x` with their multilinear hat weights.
/// Points beyond the outermost nodes clamp to them.
pub fn stencil(grid: &Grid, x: &[f64]) -> Vec<(usize, f64)> {
    let axis = |a: usize| -> [(usize, f64); 2] {
        let n = grid.counts()[a];
        let t = (x[a] - grid.lo()[a]) / grid.h() - 0.5;
        if t <= 0.0 {
            return [(0, 1.0), (0, 0.0)];
        }
        if t >= (n - 1) as f64 {
            return [(n - 1, 1.0), (n - 1, 0.0)];
        }
        let i = t.floor() as usize;
        let f = t - i as f64;
        [(i, 1.0 - f), (i + 1, f)]
    };
    let ax = axis(0);
    let mut out = Vec::with_capacity(4);
    if grid.dim() == 1 {
        for (i, w) in ax {
            if w != 0.0 {
                out.push((i, w));
            }
        }
    } else {
        let ay = axis(1);
        for (iy, wy) in ay {
            for (ix, wx) in ax {
                let w = wx * wy;
                if w != 0.0 {
                    out.push((grid.flat_index(ix, iy), w));
                }
            }
        }
    }
    out
}

/// `sum_i a_i b_i`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
