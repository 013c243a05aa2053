//! Regions of interest and their quadrature weights.
//!
//! Membership is decided by sample centers: a sample belongs to the region
//! if its center does, and then carries the full cell area `dx·dy`
//! (planar) or cell volume `dx·dy·dz` (plane stack).

use std::fmt;
use std::ops::{Add, Mul};

use ndarray::Array2;

use crate::error::{QmeError, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    Disk { r: f64 },
    Annulus { r_in: f64, r_out: f64 },
    /// Axis-aligned rectangle given by its half widths.
    Rectangle { half_x: f64, half_y: f64 },
    /// Every sample of whatever grid the region is applied to.
    FullPlane,
}

/// A planar region at height `z`, centered on `center` (also the `r0` of
/// spot-size kernels).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub shape: Shape,
    pub center: (f64, f64),
    pub z: f64,
}

const Z_TOL: f64 = 1e-9;

impl Region {
    pub fn new(shape: Shape) -> Result<Self> {
        match shape {
            Shape::Disk { r } if !(r > 0.0 && r.is_finite()) => {
                Err(QmeError::invalid(format!("disk radius must be positive, got {r}")))
            }
            Shape::Annulus { r_in, r_out } if !(r_in >= 0.0 && r_out > r_in && r_out.is_finite()) => Err(
                QmeError::invalid(format!("annulus needs 0 <= R_in < R_out, got {r_in}, {r_out}")),
            ),
            Shape::Rectangle { half_x, half_y } if !(half_x > 0.0 && half_y > 0.0) => Err(
                QmeError::invalid(format!("rectangle half widths must be positive, got {half_x}, {half_y}")),
            ),
            _ => Ok(Region {
                shape,
                center: (0.0, 0.0),
                z: 0.0,
            }),
        }
    }

    pub fn disk(r: f64) -> Result<Self> {
        Region::new(Shape::Disk { r })
    }

    pub fn annulus(r_in: f64, r_out: f64) -> Result<Self> {
        Region::new(Shape::Annulus { r_in, r_out })
    }

    pub fn rectangle(half_x: f64, half_y: f64) -> Result<Self> {
        Region::new(Shape::Rectangle { half_x, half_y })
    }

    pub fn full_plane() -> Self {
        Region {
            shape: Shape::FullPlane,
            center: (0.0, 0.0),
            z: 0.0,
        }
    }

    pub fn centered_at(mut self, center: (f64, f64)) -> Self {
        self.center = center;
        self
    }

    pub fn at_z(mut self, z: f64) -> Self {
        self.z = z;
        self
    }

    /// All lengths (shape, center, height) multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let shape = match self.shape {
            Shape::Disk { r } => Shape::Disk { r: r * factor },
            Shape::Annulus { r_in, r_out } => Shape::Annulus {
                r_in: r_in * factor,
                r_out: r_out * factor,
            },
            Shape::Rectangle { half_x, half_y } => Shape::Rectangle {
                half_x: half_x * factor,
                half_y: half_y * factor,
            },
            Shape::FullPlane => Shape::FullPlane,
        };
        Ok(Region::new(shape)?
            .centered_at((self.center.0 * factor, self.center.1 * factor))
            .at_z(self.z * factor))
    }

    /// Outer radius for disks and annuli.
    pub fn radius(&self) -> Option<f64> {
        match self.shape {
            Shape::Disk { r } => Some(r),
            Shape::Annulus { r_out, .. } => Some(r_out),
            _ => None,
        }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        match self.shape {
            Shape::Disk { r } => dx * dx + dy * dy <= r * r,
            Shape::Annulus { r_in, r_out } => {
                let r2 = dx * dx + dy * dy;
                r2 >= r_in * r_in && r2 < r_out * r_out
            }
            Shape::Rectangle { half_x, half_y } => dx.abs() <= half_x && dy.abs() <= half_y,
            Shape::FullPlane => true,
        }
    }

    fn check_plane(&self, grid: &Grid) -> Result<()> {
        if (grid.z - self.z).abs() > Z_TOL * self.z.abs().max(1.0) {
            return Err(QmeError::invalid(format!(
                "region lies in plane z={} but the grid samples z={}",
                self.z, grid.z
            )));
        }
        Ok(())
    }

    /// Quadrature weights on `grid`: `dx·dy` inside, zero outside.
    pub fn mask(&self, grid: &Grid) -> Result<Array2<f64>> {
        self.check_plane(grid)?;
        let area = grid.cell_area();
        let (xs, ys) = (grid.xs(), grid.ys());
        Ok(Array2::from_shape_fn(grid.shape(), |(iy, ix)| {
            if self.contains(xs[ix], ys[iy]) {
                area
            } else {
                0.0
            }
        }))
    }

    /// Indices `(iy, ix)` of member samples with their weights.
    pub fn members(&self, grid: &Grid) -> Result<Vec<((usize, usize), f64)>> {
        let w = self.mask(grid)?;
        Ok(w.indexed_iter()
            .filter(|(_, &v)| v > 0.0)
            .map(|(idx, &v)| (idx, v))
            .collect())
    }

    /// Weighted sum of `integrand` over the region.
    pub fn integrate<T>(&self, grid: &Grid, integrand: &Array2<T>) -> Result<T>
    where
        T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    {
        let w = self.mask(grid)?;
        integrate_weighted(&w, integrand)
    }
}

/// `Σ w·f` over two arrays of equal shape.
pub fn integrate_weighted<T>(weights: &Array2<f64>, integrand: &Array2<T>) -> Result<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    if weights.dim() != integrand.dim() {
        return Err(QmeError::invalid(format!(
            "integrand shape {:?} does not match region weights {:?}",
            integrand.dim(),
            weights.dim()
        )));
    }
    Ok(weights
        .iter()
        .zip(integrand.iter())
        .filter(|(&w, _)| w != 0.0)
        .fold(T::default(), |acc, (&w, &f)| acc + f * w))
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.shape {
            Shape::Disk { r } => write!(f, "disk:R={r}")?,
            Shape::Annulus { r_in, r_out } => write!(f, "annulus:Rin={r_in},Rout={r_out}")?,
            Shape::Rectangle { half_x, half_y } => write!(f, "rect:hx={half_x},hy={half_y}")?,
            Shape::FullPlane => write!(f, "full")?,
        }
        let mut sep = if self.shape == Shape::FullPlane { ':' } else { ',' };
        if self.center != (0.0, 0.0) {
            write!(f, "{sep}x0={},y0={}", self.center.0, self.center.1)?;
            sep = ',';
        }
        if self.z != 0.0 {
            write!(f, "{sep}z={}", self.z)?;
        }
        Ok(())
    }
}

/// Parse a region spec such as `disk:R=1.5`, `annulus:Rin=1,Rout=2`,
/// `rect:hx=3,hy=2` or `full`, optionally followed by `x0=`, `y0=`, `z=`.
///
/// Values are numbers, a named variable from `vars`, or `number*name`
/// (e.g. `R=w0`, `R=0.5*w0`).
pub fn parse_region(spec: &str, vars: &[(&str, f64)]) -> Result<Region> {
    let (name, rest) = spec.split_once(':').unwrap_or((spec, ""));
    let mut params: Vec<(String, f64)> = Vec::new();
    for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| QmeError::invalid(format!("region parameter '{item}' is not key=value")))?;
        params.push((k.trim().to_string(), parse_value(v.trim(), vars)?));
    }
    let take = |key: &str| -> Result<f64> {
        params
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
            .ok_or_else(|| QmeError::invalid(format!("region '{name}' needs parameter {key}")))
    };
    let opt = |key: &str, default: f64| params.iter().find(|(k, _)| k == key).map_or(default, |(_, v)| *v);
    let known: &[&str] = match name {
        "disk" => &["R"],
        "annulus" => &["Rin", "Rout"],
        "rect" | "rectangle" => &["hx", "hy"],
        "full" => &[],
        other => return Err(QmeError::invalid(format!("unknown region shape '{other}'"))),
    };
    if let Some((k, _)) = params
        .iter()
        .find(|(k, _)| !known.contains(&k.as_str()) && !["x0", "y0", "z"].contains(&k.as_str()))
    {
        return Err(QmeError::invalid(format!("unknown parameter '{k}' for region '{name}'")));
    }
    let region = match name {
        "disk" => Region::disk(take("R")?)?,
        "annulus" => Region::annulus(take("Rin")?, take("Rout")?)?,
        "rect" | "rectangle" => Region::rectangle(take("hx")?, take("hy")?)?,
        _ => Region::full_plane(),
    };
    Ok(region.centered_at((opt("x0", 0.0), opt("y0", 0.0))).at_z(opt("z", 0.0)))
}

pub(crate) fn parse_value(text: &str, vars: &[(&str, f64)]) -> Result<f64> {
    let lookup = |name: &str| vars.iter().find(|(n, _)| *n == name).map(|(_, v)| *v);
    if let Ok(v) = text.parse::<f64>() {
        return Ok(v);
    }
    if let Some(v) = lookup(text) {
        return Ok(v);
    }
    if let Some((a, b)) = text.split_once('*') {
        if let (Ok(c), Some(v)) = (a.trim().parse::<f64>(), lookup(b.trim())) {
            return Ok(c * v);
        }
    }
    Err(QmeError::invalid(format!("cannot interpret '{text}' as a number")))
}

/// A volume made of planar slices at equally spaced heights. Each slice
/// carries weight `dx·dy·dz`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeRegion {
    slices: Vec<Region>,
    dz: f64,
}

impl VolumeRegion {
    pub fn new(slices: Vec<Region>) -> Result<Self> {
        if slices.len() < 2 {
            return Err(QmeError::invalid("a volume region needs at least two planes"));
        }
        let dz = slices[1].z - slices[0].z;
        for pair in slices.windows(2) {
            let step = pair[1].z - pair[0].z;
            if step <= 0.0 {
                return Err(QmeError::invalid("volume planes must have strictly increasing z"));
            }
            if (step - dz).abs() > 1e-9 * dz.abs().max(1.0) {
                return Err(QmeError::invalid("volume planes must be equally spaced"));
            }
        }
        Ok(VolumeRegion { slices, dz })
    }

    /// Stack of the same cross section at the given heights.
    pub fn cylinder(section: Region, zs: &[f64]) -> Result<Self> {
        VolumeRegion::new(zs.iter().map(|&z| section.at_z(z)).collect())
    }

    /// Disks whose radius follows an ellipsoid of semi-axes `r` (transverse)
    /// and `half_length` (along z); planes beyond the tip are skipped.
    pub fn ellipsoid(r: f64, half_length: f64, zs: &[f64]) -> Result<Self> {
        let slices = zs
            .iter()
            .filter(|&&z| z.abs() < half_length)
            .map(|&z| Region::disk(r * (1.0 - (z / half_length).powi(2)).sqrt()).map(|d| d.at_z(z)))
            .collect::<Result<Vec<_>>>()?;
        VolumeRegion::new(slices)
    }

    pub fn slices(&self) -> &[Region] {
        &self.slices
    }

    pub fn dz(&self) -> f64 {
        self.dz
    }

    /// Per-plane weights `dx·dy·dz`, one array per slice, for `grids[k]` at slice `k`.
    pub fn masks(&self, grids: &[Grid]) -> Result<Vec<Array2<f64>>> {
        if grids.len() != self.slices.len() {
            return Err(QmeError::invalid(format!(
                "volume has {} planes but {} grids were supplied",
                self.slices.len(),
                grids.len()
            )));
        }
        self.slices
            .iter()
            .zip(grids)
            .map(|(s, g)| s.mask(g).map(|m| m * self.dz))
            .collect()
    }
}

/// Either a single plane or a plane stack.
#[derive(Debug, Clone, PartialEq)]
pub enum RegionOfInterest {
    Planar(Region),
    Volume(VolumeRegion),
}

impl RegionOfInterest {
    pub fn planes(&self) -> Vec<Region> {
        match self {
            RegionOfInterest::Planar(r) => vec![*r],
            RegionOfInterest::Volume(v) => v.slices.clone(),
        }
    }

    /// Weight arrays for each plane on the matching grids.
    pub fn masks(&self, grids: &[Grid]) -> Result<Vec<Array2<f64>>> {
        match self {
            RegionOfInterest::Planar(r) => {
                if grids.len() != 1 {
                    return Err(QmeError::invalid("a planar region needs exactly one grid"));
                }
                Ok(vec![r.mask(&grids[0])?])
            }
            RegionOfInterest::Volume(v) => v.masks(grids),
        }
    }

    /// Kernel center `r0` (the first plane's center for volumes).
    pub fn center(&self) -> (f64, f64) {
        match self {
            RegionOfInterest::Planar(r) => r.center,
            RegionOfInterest::Volume(v) => v.slices[0].center,
        }
    }
}

impl From<Region> for RegionOfInterest {
    fn from(r: Region) -> Self {
        RegionOfInterest::Planar(r)
    }
}

impl From<VolumeRegion> for RegionOfInterest {
    fn from(v: VolumeRegion) -> Self {
        RegionOfInterest::Volume(v)
    }
}

impl fmt::Display for RegionOfInterest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RegionOfInterest::Planar(r) => write!(f, "{r}"),
            RegionOfInterest::Volume(v) => {
                write!(f, "volume[")?;
                for (k, s) in v.slices.iter().enumerate() {
                    if k > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{s}")?;
                }
                write!(f, "]")
            }
        }
    }
}
