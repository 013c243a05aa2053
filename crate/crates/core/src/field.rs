//! Sampled complex fields on a [`Grid`].
//!
//! All amplitudes use the `exp(-iωt)` convention: a wave travelling toward +z
//! carries `exp(+ikz)`. Vector fields are stored in natural units
//! (`ε0 = μ0 = c = 1`, `ω = k0`), so a plane wave has `|H| = |E|`.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{QmeError, Result};
use crate::grid::Grid;

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Grid,
    /// Vacuum wavenumber `2π/λ`.
    pub k0: f64,
    pub values: Array2<C64>,
}

fn check_k0(k0: f64) -> Result<()> {
    if k0 > 0.0 && k0.is_finite() {
        Ok(())
    } else {
        Err(QmeError::invalid(format!("wavenumber must be positive, got {k0}")))
    }
}

fn check_samples(grid: &Grid, values: &Array2<C64>, what: &str) -> Result<()> {
    if values.dim() != grid.shape() {
        return Err(QmeError::GridMismatch(format!(
            "{what}: array {:?} vs grid {:?}",
            values.dim(),
            grid.shape()
        )));
    }
    if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(QmeError::invalid(format!("{what}: non-finite sample")));
    }
    Ok(())
}

impl ScalarField {
    pub fn new(grid: Grid, k0: f64, values: Array2<C64>) -> Result<Self> {
        check_k0(k0)?;
        check_samples(&grid, &values, "scalar field")?;
        Ok(ScalarField { grid, k0, values })
    }

    pub fn zeros(grid: Grid, k0: f64) -> Self {
        ScalarField {
            grid,
            k0,
            values: Array2::zeros(grid.shape()),
        }
    }

    /// Samples `f(x, y)` at every grid point.
    pub fn from_fn(grid: Grid, k0: f64, f: impl Fn(f64, f64) -> C64) -> Self {
        let xs = grid.xs();
        let ys = grid.ys();
        let values = Array2::from_shape_fn(grid.shape(), |(iy, ix)| f(xs[ix], ys[iy]));
        ScalarField { grid, k0, values }
    }

    pub fn wavelength(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.k0
    }

    pub fn intensity(&self) -> Array2<f64> {
        self.values.mapv(|v| v.norm_sqr())
    }

    /// `Σ |u|² dx dy` over the whole plane.
    pub fn power(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn scaled(&self, c: C64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            k0: self.k0,
            values: self.values.mapv(|v| v * c),
        }
    }

    /// `Σ c_i u_i`; all fields must share the sampling.
    pub fn superpose(fields: &[ScalarField], coeffs: &[C64]) -> Result<ScalarField> {
        let first = fields
            .first()
            .ok_or_else(|| QmeError::invalid("superposition of zero fields"))?;
        if fields.len() != coeffs.len() {
            return Err(QmeError::invalid(format!(
                "{} fields but {} coefficients",
                fields.len(),
                coeffs.len()
            )));
        }
        let mut out = Array2::zeros(first.grid.shape());
        for (f, &c) in fields.iter().zip(coeffs) {
            first.grid.check_sampling(&f.grid, "superpose")?;
            out.scaled_add(c, &f.values);
        }
        Ok(ScalarField {
            grid: first.grid,
            k0: first.k0,
            values: out,
        })
    }
}

/// Electric and magnetic field, three complex components each.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    pub grid: Grid,
    pub k0: f64,
    pub e: [Array2<C64>; 3],
    pub h: [Array2<C64>; 3],
}

impl VectorField {
    pub fn new(grid: Grid, k0: f64, e: [Array2<C64>; 3], h: [Array2<C64>; 3]) -> Result<Self> {
        check_k0(k0)?;
        for c in e.iter().chain(h.iter()) {
            check_samples(&grid, c, "vector field")?;
        }
        Ok(VectorField { grid, k0, e, h })
    }

    pub fn zeros(grid: Grid, k0: f64) -> Self {
        let z = || Array2::zeros(grid.shape());
        VectorField {
            grid,
            k0,
            e: [z(), z(), z()],
            h: [z(), z(), z()],
        }
    }

    /// x-polarized paraxial embedding of a scalar field: `E = u e_x`,
    /// `H = u e_y` (plane-wave impedance in natural units).
    pub fn from_scalar_paraxial(u: &ScalarField) -> VectorField {
        let mut v = VectorField::zeros(u.grid, u.k0);
        v.e[0] = u.values.clone();
        v.h[1] = u.values.clone();
        v
    }

    /// Pointwise `|E|²`.
    pub fn electric_intensity(&self) -> Array2<f64> {
        let mut out = Array2::zeros(self.grid.shape());
        for c in &self.e {
            out.zip_mut_with(c, |o, v| *o += v.norm_sqr());
        }
        out
    }

    /// Pointwise z component of the time-averaged Poynting vector `½ Re(E × H*)`.
    pub fn flux_z(&self) -> Array2<f64> {
        let [ex, ey, _] = &self.e;
        let [hx, hy, _] = &self.h;
        let mut out = Array2::zeros(self.grid.shape());
        ndarray::Zip::from(&mut out)
            .and(ex)
            .and(ey)
            .and(hx)
            .and(hy)
            .for_each(|o, ex, ey, hx, hy| {
                *o = 0.5 * (ex * hy.conj() - ey * hx.conj()).re;
            });
        out
    }

    pub fn superpose(fields: &[VectorField], coeffs: &[C64]) -> Result<VectorField> {
        let first = fields
            .first()
            .ok_or_else(|| QmeError::invalid("superposition of zero fields"))?;
        if fields.len() != coeffs.len() {
            return Err(QmeError::invalid(format!(
                "{} fields but {} coefficients",
                fields.len(),
                coeffs.len()
            )));
        }
        let mut out = VectorField::zeros(first.grid, first.k0);
        for (f, &c) in fields.iter().zip(coeffs) {
            first.grid.check_sampling(&f.grid, "superpose")?;
            for k in 0..3 {
                out.e[k].scaled_add(c, &f.e[k]);
                out.h[k].scaled_add(c, &f.h[k]);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn superposition_is_linear() {
        let g = Grid::square(4, 1.0, 0.0).unwrap();
        let a = ScalarField::from_fn(g, 1.0, |x, _| C64::new(x, 0.0));
        let b = ScalarField::from_fn(g, 1.0, |_, y| C64::new(0.0, y));
        let s = ScalarField::superpose(&[a.clone(), b.clone()], &[C64::new(2.0, 0.0), C64::new(0.0, 1.0)])
            .unwrap();
        for ((s, a), b) in s.values.iter().zip(a.values.iter()).zip(b.values.iter()) {
            assert_eq!(*s, a * 2.0 + b * C64::i());
        }
    }

    #[test]
    fn rejects_non_finite_and_wrong_shape() {
        let g = Grid::square(3, 1.0, 0.0).unwrap();
        let mut v = Array2::zeros((3, 3));
        v[[1, 1]] = C64::new(f64::NAN, 0.0);
        assert!(ScalarField::new(g, 1.0, v).is_err());
        assert!(ScalarField::new(g, 1.0, Array2::zeros((2, 3))).is_err());
        assert!(ScalarField::new(g, 0.0, Array2::zeros((3, 3))).is_err());
    }

    #[test]
    fn paraxial_embedding_carries_power_forward() {
        let g = Grid::square(5, 0.5, 0.0).unwrap();
        let u = ScalarField::from_fn(g, 2.0, |x, y| C64::new((-(x * x + y * y)).exp(), 0.0));
        let v = VectorField::from_scalar_paraxial(&u);
        let flux: f64 = v.flux_z().sum() * g.cell_area();
        assert!((flux - 0.5 * u.power()).abs() < 1e-14);
    }
}
