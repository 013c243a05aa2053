//! Diagnostics of optimized fields: second-order intensity moment (SOIM),
//! Strehl ratio, local radial wavevector and super-oscillation maps.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use rustfft::FftPlanner;

use crate::basis::Field;
use crate::error::{QmeError, Result};
use crate::field::{ScalarField, C64};
use crate::grid::Grid;
use crate::operators::{MeasureMatrix, MeasureTag};
use crate::roi::Region;

/// Pointwise power density used by the intensity measure: `|u|²` for
/// scalar fields, `Re(E × H*)·e_z` for vector fields.
pub fn power_density(field: &Field) -> Array2<f64> {
    match field {
        Field::Scalar(u) => u.intensity(),
        Field::Vector(v) => v.flux_z() * 2.0,
    }
}

/// Beam width `w = 2 sqrt(m²/m⁰)` over `region`, with the moment taken
/// about `r0`.
pub fn soim(field: &Field, region: &Region, r0: (f64, f64)) -> Result<f64> {
    let grid = field.grid();
    let w = region.mask(&grid)?;
    let density = power_density(field);
    let (xs, ys) = (grid.xs(), grid.ys());
    let (mut m0, mut m2) = (0.0, 0.0);
    for ((iy, ix), &wt) in w.indexed_iter() {
        if wt == 0.0 {
            continue;
        }
        let p = wt * density[[iy, ix]];
        m0 += p;
        m2 += p * ((xs[ix] - r0.0).powi(2) + (ys[iy] - r0.1).powi(2));
    }
    if m0 <= 0.0 {
        return Err(QmeError::UndefinedMeasure(format!("no power inside {region}")));
    }
    Ok(2.0 * (m2 / m0).max(0.0).sqrt())
}

/// Intensity Strehl ratio: ROI intensity of the superposition `a`
/// relative to the best achievable, both at the same input norm:
/// `(a* M⁰ a) / (|a|² λ_max(M⁰))`.
pub fn strehl(coeffs: &Array1<C64>, m0: &MeasureMatrix) -> Result<f64> {
    if m0.tag != MeasureTag::Io {
        return Err(QmeError::invalid(format!("Strehl ratio needs an IO matrix, got {}", m0.tag)));
    }
    if coeffs.len() != m0.dim() {
        return Err(QmeError::invalid(format!(
            "{} coefficients for a {}-member basis",
            coeffs.len(),
            m0.dim()
        )));
    }
    let norm2: f64 = coeffs.iter().map(|v| v.norm_sqr()).sum();
    let top = crate::eigen::eig_hermitian(&m0.entries)?.values[0];
    if norm2 == 0.0 || top <= 0.0 {
        return Err(QmeError::UndefinedMeasure("zero superposition or zero intensity operator".into()));
    }
    Ok(m0.quadratic(coeffs).re / (norm2 * top))
}

/// Radial phase gradient `∂_r arg u` about a center, with the samples where
/// it is meaningful.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalWavevector {
    pub k: Array2<f64>,
    pub valid: Array2<bool>,
}

/// Phase floor relative to peak intensity below which no phase is reported.
pub const PHASE_FLOOR: f64 = 1e-6;

/// `∂_r arg u` from central differences of the wrapped phase
/// (`arg(u₊ u₋*)/(2h)` along x and y, projected on the radial direction).
/// Samples below `floor · peak` intensity, on the grid border or at the
/// center itself are marked invalid.
pub fn local_wavevector(field: &ScalarField, r0: (f64, f64), floor: f64) -> LocalWavevector {
    let g = field.grid;
    let u = &field.values;
    let inten = field.intensity();
    let peak = inten.iter().cloned().fold(0.0, f64::max);
    let cut = floor * peak;
    let (ny, nx) = g.shape();
    let mut k = Array2::zeros((ny, nx));
    let mut valid = Array2::from_elem((ny, nx), false);
    for iy in 1..ny.saturating_sub(1) {
        for ix in 1..nx.saturating_sub(1) {
            let (x, y) = (g.x(ix) - r0.0, g.y(iy) - r0.1);
            let r = x.hypot(y);
            let around = [(iy, ix), (iy, ix - 1), (iy, ix + 1), (iy - 1, ix), (iy + 1, ix)];
            if r < 1e-12 * g.dx.max(g.dy) || around.iter().any(|&i| inten[i] <= cut) || peak == 0.0 {
                continue;
            }
            let kx = (u[[iy, ix + 1]] * u[[iy, ix - 1]].conj()).arg() / (2.0 * g.dx);
            let ky = (u[[iy + 1, ix]] * u[[iy - 1, ix]].conj()).arg() / (2.0 * g.dy);
            k[[iy, ix]] = (kx * x + ky * y) / r;
            valid[[iy, ix]] = true;
        }
    }
    LocalWavevector { k, valid }
}

/// Settings for [`superoscillation_mask`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperoscillationOptions {
    /// Spectral density fraction of the peak that still counts as inside
    /// the band.
    pub band_fraction: f64,
    /// Analytic-signal intensity floor relative to its peak.
    pub floor: f64,
    /// Number of diameters through the center, spread over `[0, π)`.
    pub angles: usize,
    /// Zero-padding factor applied to each line before transforming.
    pub pad: usize,
}

impl Default for SuperoscillationOptions {
    fn default() -> Self {
        SuperoscillationOptions {
            band_fraction: 1e-3,
            floor: PHASE_FLOOR,
            angles: 360,
            pad: 4,
        }
    }
}

/// Result of a super-oscillation analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperoscillationMap {
    /// True where the local radial wavevector exceeds the band.
    pub mask: Array2<bool>,
    /// Largest radial frequency with density above the band fraction.
    pub k_band: f64,
    /// Local radial wavevector on the grid (zero where not evaluated).
    pub k_local: Array2<f64>,
    /// Radial spectral density, summed over all diameters, against `k`.
    pub spectrum: Vec<(f64, f64)>,
}

impl SuperoscillationMap {
    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

fn bilinear(grid: &Grid, values: &Array2<C64>, x: f64, y: f64) -> Option<C64> {
    let fx = (x - grid.x(0)) / grid.dx;
    let fy = (y - grid.y(0)) / grid.dy;
    if fx < 0.0 || fy < 0.0 || fx > (grid.nx - 1) as f64 || fy > (grid.ny - 1) as f64 {
        return None;
    }
    let ix = (fx.floor() as usize).min(grid.nx - 2);
    let iy = (fy.floor() as usize).min(grid.ny - 2);
    let (tx, ty) = (fx - ix as f64, fy - iy as f64);
    Some(
        values[[iy, ix]] * ((1.0 - tx) * (1.0 - ty))
            + values[[iy, ix + 1]] * (tx * (1.0 - ty))
            + values[[iy + 1, ix]] * ((1.0 - tx) * ty)
            + values[[iy + 1, ix + 1]] * (tx * ty),
    )
}

/// Flag super-oscillating samples of `field` about the center `r0`.
///
/// The field is resampled along diameters through `r0`. Each line gives a
/// radial spectrum (accumulated over all diameters to find the band edge
/// `k_band`) and an analytic signal (negative frequencies removed) whose
/// phase derivative is the local radial wavevector. A grid sample is masked
/// when the nearest line sample has `|k_local| > k_band` and an analytic
/// intensity above the floor.
pub fn superoscillation_mask(
    field: &ScalarField,
    r0: (f64, f64),
    opts: &SuperoscillationOptions,
) -> Result<SuperoscillationMap> {
    if !(opts.band_fraction > 0.0 && opts.band_fraction < 1.0) || opts.angles == 0 || opts.pad == 0 {
        return Err(QmeError::invalid("band fraction must lie in (0, 1); angles and padding must be positive"));
    }
    let g = field.grid;
    let h = g.dx.min(g.dy);
    let half = (g.x(g.nx - 1) - r0.0)
        .min(r0.0 - g.x(0))
        .min(g.y(g.ny - 1) - r0.1)
        .min(r0.1 - g.y(0));
    if half <= 2.0 * h {
        return Err(QmeError::invalid("center too close to the grid border"));
    }
    let ns = (half / h).floor() as usize;
    let len = 2 * ns + 1;
    let padded = len * opts.pad;
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(padded);
    let inv = planner.plan_fft_inverse(padded);

    let mut density = vec![0.0; padded];
    let mut lines: Vec<Vec<C64>> = Vec::with_capacity(opts.angles);
    for a in 0..opts.angles {
        let alpha = PI * a as f64 / opts.angles as f64;
        let (ca, sa) = (alpha.cos(), alpha.sin());
        let mut buf = vec![C64::new(0.0, 0.0); padded];
        for (j, b) in buf.iter_mut().take(len).enumerate() {
            let s = (j as f64 - ns as f64) * h;
            *b = bilinear(&g, &field.values, r0.0 + s * ca, r0.1 + s * sa).unwrap_or_default();
        }
        fwd.process(&mut buf);
        for (d, v) in density.iter_mut().zip(buf.iter()) {
            *d += v.norm_sqr();
        }
        // analytic signal: keep DC and positive frequencies (doubled)
        for (m, v) in buf.iter_mut().enumerate() {
            if m == 0 || (padded.is_multiple_of(2) && m == padded / 2) {
                continue;
            }
            if m < padded.div_ceil(2) {
                *v *= 2.0;
            } else {
                *v = C64::new(0.0, 0.0);
            }
        }
        inv.process(&mut buf);
        buf.truncate(len);
        buf.iter_mut().for_each(|v| *v /= padded as f64);
        lines.push(buf);
    }

    let freq = |m: usize| {
        let s = if m < padded.div_ceil(2) { m as f64 } else { m as f64 - padded as f64 };
        2.0 * PI * s / (padded as f64 * h)
    };
    let peak = density.iter().cloned().fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(QmeError::UndefinedMeasure("field vanishes along every diameter".into()));
    }
    let k_band = density
        .iter()
        .enumerate()
        .filter(|(_, &d)| d >= opts.band_fraction * peak)
        .map(|(m, _)| freq(m).abs())
        .fold(0.0, f64::max);
    let mut spectrum: Vec<(f64, f64)> = density.iter().enumerate().map(|(m, &d)| (freq(m), d)).collect();
    spectrum.sort_by(|a, b| a.0.total_cmp(&b.0));

    let a_peak = lines
        .iter()
        .flat_map(|l| l.iter().map(|v| v.norm_sqr()))
        .fold(0.0, f64::max);
    let cut = opts.floor * a_peak;
    // local wavevector along each line, signed toward increasing s
    let k_lines: Vec<Vec<Option<f64>>> = lines
        .iter()
        .map(|l| {
            (0..len)
                .map(|j| {
                    if j == 0 || j + 1 == len || l[j].norm_sqr() <= cut {
                        return None;
                    }
                    if l[j - 1].norm_sqr() <= cut || l[j + 1].norm_sqr() <= cut {
                        return None;
                    }
                    Some((l[j + 1] * l[j - 1].conj()).arg() / (2.0 * h))
                })
                .collect()
        })
        .collect();

    let (ny, nx) = g.shape();
    let mut mask = Array2::from_elem((ny, nx), false);
    let mut k_local = Array2::zeros((ny, nx));
    for iy in 0..ny {
        for ix in 0..nx {
            let (dx, dy) = (g.x(ix) - r0.0, g.y(iy) - r0.1);
            let r = dx.hypot(dy);
            let mut phi = dy.atan2(dx);
            let mut s = r;
            if phi < 0.0 {
                phi += PI;
                s = -r;
            }
            let mut a = (phi / PI * opts.angles as f64).round() as usize;
            if a == opts.angles {
                // angle π is the angle-0 diameter traversed backwards
                a = 0;
                s = -s;
            }
            let j = (s / h).round() + ns as f64;
            if j < 0.0 || j >= len as f64 {
                continue;
            }
            if let Some(kl) = k_lines[a][j as usize] {
                // radial direction is +s for s > 0 and −s for s < 0
                k_local[[iy, ix]] = if s >= 0.0 { kl } else { -kl };
                mask[[iy, ix]] = kl.abs() > k_band;
            }
        }
    }
    Ok(SuperoscillationMap {
        mask,
        k_band,
        k_local,
        spectrum,
    })
}
