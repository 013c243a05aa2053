//! Free-space propagation of sampled scalar fields: angular spectrum between
//! parallel planes and the Fourier transform performed by a thin lens.

use std::f64::consts::PI;

use ndarray::{Array2, Axis};
use rustfft::{FftDirection, FftPlanner};

use crate::error::{QmeError, Result};
use crate::field::{ScalarField, C64};
use crate::grid::Grid;

/// In-place 2-D FFT (unnormalized) along both axes.
pub(crate) fn fft2(values: &mut Array2<C64>, direction: FftDirection) {
    let mut planner = FftPlanner::new();
    for axis in [Axis(1), Axis(0)] {
        let n = values.len_of(axis);
        let fft = planner.plan_fft(n, direction);
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for mut lane in values.lanes_mut(axis) {
            buf.iter_mut().zip(lane.iter()).for_each(|(b, v)| *b = *v);
            fft.process(&mut buf);
            lane.iter_mut().zip(buf.iter()).for_each(|(v, b)| *v = *b);
        }
    }
}

/// Angular frequencies `2π m / (n d)` in FFT order.
fn fft_wavenumbers(n: usize, d: f64) -> Vec<f64> {
    (0..n)
        .map(|m| {
            let s = if m < n.div_ceil(2) { m as f64 } else { m as f64 - n as f64 };
            2.0 * PI * s / (n as f64 * d)
        })
        .collect()
}

/// Propagate `field` by `dz` with the transfer function
/// `exp(i dz sqrt(k0² - kx² - ky²))`. Evanescent components are dropped.
pub fn angular_spectrum_propagate(field: &ScalarField, dz: f64) -> Result<ScalarField> {
    if !dz.is_finite() {
        return Err(QmeError::invalid(format!("propagation distance must be finite, got {dz}")));
    }
    let g = field.grid;
    let k0 = field.k0;
    let kxs = fft_wavenumbers(g.nx, g.dx);
    let kys = fft_wavenumbers(g.ny, g.dy);
    let mut spec = field.values.clone();
    fft2(&mut spec, FftDirection::Forward);
    let scale = 1.0 / g.len() as f64;
    for ((iy, ix), v) in spec.indexed_iter_mut() {
        let kz2 = k0 * k0 - kxs[ix] * kxs[ix] - kys[iy] * kys[iy];
        *v = if kz2 > 0.0 {
            *v * C64::new(0.0, dz * kz2.sqrt()).exp() * scale
        } else {
            C64::new(0.0, 0.0)
        };
    }
    fft2(&mut spec, FftDirection::Inverse);
    ScalarField::new(g.at_z(g.z + dz), k0, spec)
}

/// Centered DFT along one axis: `V_m = Σ_j u_j exp(-2πi (j-c)(m-c)/n)`,
/// `c = (n-1)/2`, evaluated with one FFT and two phase ramps.
fn centered_dft(values: &mut Array2<C64>, axis: Axis) {
    let n = values.len_of(axis);
    let c = (n as f64 - 1.0) / 2.0;
    let nf = n as f64;
    let pre: Vec<C64> = (0..n).map(|j| C64::new(0.0, 2.0 * PI * j as f64 * c / nf).exp()).collect();
    let post: Vec<C64> = (0..n)
        .map(|m| C64::new(0.0, 2.0 * PI * (c * m as f64 - c * c) / nf).exp())
        .collect();
    let fft = FftPlanner::new().plan_fft_forward(n);
    let mut buf = vec![C64::new(0.0, 0.0); n];
    for mut lane in values.lanes_mut(axis) {
        for (j, b) in buf.iter_mut().enumerate() {
            *b = lane[j] * pre[j];
        }
        fft.process(&mut buf);
        for (m, v) in lane.iter_mut().enumerate() {
            *v = buf[m] * post[m];
        }
    }
}

/// Field in the back focal plane of a thin lens of focal length `f`:
/// `U(ρ) = (1/(λ f)) ∫ u(x) exp(-i k0 x·ρ / f) dx`, evaluated on the
/// conjugate grid with pitch `λ f / (n d)`, centered on the axis.
///
/// The discrete map is unitary up to the pitch ratio, so
/// `Σ|U|² dρx dρy = Σ|u|² dx dy`.
pub fn fourier_lens(field: &ScalarField, f: f64) -> Result<ScalarField> {
    if !(f > 0.0 && f.is_finite()) {
        return Err(QmeError::invalid(format!("focal length must be positive, got {f}")));
    }
    let g = field.grid;
    let lambda = field.wavelength();
    let out = Grid::new(
        g.nx,
        g.ny,
        lambda * f / (g.nx as f64 * g.dx),
        lambda * f / (g.ny as f64 * g.dy),
        (0.0, 0.0),
        g.z + f,
    )?;
    let mut v = field.values.clone();
    centered_dft(&mut v, Axis(1));
    centered_dft(&mut v, Axis(0));
    let (x0, y0) = (g.x0, g.y0);
    let k0 = field.k0;
    let scale = g.dx * g.dy / (lambda * f);
    for ((iy, ix), val) in v.indexed_iter_mut() {
        // input grid offset from the axis gives a linear phase on the output
        let shift = C64::new(0.0, -k0 * (x0 * out.x(ix) + y0 * out.y(iy)) / f).exp();
        *val *= shift * scale;
    }
    ScalarField::new(out, k0, v)
}
