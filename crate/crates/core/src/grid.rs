use crate::error::{QmeError, Result};

/// Uniform Cartesian sampling of one transverse plane.
///
/// Samples sit at `x_i = x0 + (i - (nx-1)/2) dx` (likewise `y`), so the grid
/// is symmetric about its center `(x0, y0)`. Arrays over a grid are indexed
/// `[iy, ix]` (row-major, y outer).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub dx: f64,
    pub dy: f64,
    pub x0: f64,
    pub y0: f64,
    pub z: f64,
}

impl Grid {
    pub fn new(nx: usize, ny: usize, dx: f64, dy: f64, center: (f64, f64), z: f64) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(QmeError::invalid(format!(
                "grid needs at least 2x2 samples, got {nx}x{ny}"
            )));
        }
        if !(dx > 0.0 && dy > 0.0 && dx.is_finite() && dy.is_finite()) {
            return Err(QmeError::invalid(format!("grid pitch must be positive, got ({dx}, {dy})")));
        }
        if !(center.0.is_finite() && center.1.is_finite() && z.is_finite()) {
            return Err(QmeError::invalid("grid center and plane must be finite"));
        }
        Ok(Grid {
            nx,
            ny,
            dx,
            dy,
            x0: center.0,
            y0: center.1,
            z,
        })
    }

    /// Square grid centered on the optical axis.
    pub fn square(n: usize, pitch: f64, z: f64) -> Result<Self> {
        Grid::new(n, n, pitch, pitch, (0.0, 0.0), z)
    }

    #[inline]
    pub fn x(&self, ix: usize) -> f64 {
        self.x0 + (ix as f64 - (self.nx as f64 - 1.0) / 2.0) * self.dx
    }

    #[inline]
    pub fn y(&self, iy: usize) -> f64 {
        self.y0 + (iy as f64 - (self.ny as f64 - 1.0) / 2.0) * self.dy
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.ny).map(|i| self.y(i)).collect()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.ny, self.nx)
    }

    /// Copy of this grid moved to plane `z`.
    pub fn at_z(&self, z: f64) -> Grid {
        Grid { z, ..*self }
    }

    /// Same transverse sampling (counts, pitch and center); `z` may differ.
    pub fn same_sampling(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.dx == other.dx
            && self.dy == other.dy
            && self.x0 == other.x0
            && self.y0 == other.y0
    }

    pub(crate) fn check_sampling(&self, other: &Grid, what: &str) -> Result<()> {
        if self.same_sampling(other) {
            Ok(())
        } else {
            Err(QmeError::GridMismatch(format!(
                "{what}: {}x{} @ ({}, {}) vs {}x{} @ ({}, {})",
                self.nx, self.ny, self.dx, self.dy, other.nx, other.ny, other.dx, other.dy
            )))
        }
    }
}

/// Spec-facing constructor; see [`Grid::new`].
pub fn make_grid(nx: usize, ny: usize, dx: f64, dy: f64, center: (f64, f64), z: f64) -> Result<Grid> {
    Grid::new(nx, ny, dx, dy, center, z)
}
