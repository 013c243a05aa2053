//! Basis beam synthesis: scalar Laguerre-Gauss modes, vector Bessel beams
//! and the focal pattern of a uniformly filled circular aperture.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{QmeError, Result};
use crate::field::{ScalarField, VectorField, C64};
use crate::grid::Grid;
use crate::special::{bessel_j_orders, factorial_ratio_sqrt, laguerre, BesselTable};

/// Laguerre-Gauss envelope exactly as tabulated in the `exp(+iωt)`
/// convention, with only the `C_P^L` prefactor (on-axis waist value of the
/// fundamental mode is 1). `r`, `phi` are cylindrical coordinates about the
/// beam axis.
pub fn lg_profile(p: usize, l: i32, w0: f64, k0: f64, r: f64, phi: f64, z: f64) -> C64 {
    let i = C64::i();
    let al = l.unsigned_abs() as usize;
    let zr = k0 * w0 * w0 / 2.0;
    let q = C64::new(z, zr);
    let c = factorial_ratio_sqrt(p, al);
    let w2 = w0 * w0 * (1.0 + z * z / (zr * zr));

    let pref = i * c * zr / q;
    let radial = (i * k0 * w0 * r / (2f64.sqrt() * q)).powu(al as u32);
    let gouy = (-q.conj() / q).powu(p as u32);
    let lag = laguerre(p, al as f64, 2.0 * r * r / w2);
    let phase = (-i * k0 * r * r / (2.0 * q) - i * (l as f64) * phi).exp();
    pref * radial * gouy * lag * phase
}

/// Unit-power Laguerre-Gauss mode sampled on `grid` at plane `grid.z`.
///
/// The tabulated envelope is scaled by `sqrt(2/(π w0²))` so that
/// `∫|u|² dS = 1` over the infinite plane, and conjugated into the
/// crate-wide `exp(-iωt)` convention (same physical beam; the azimuthal
/// factor becomes `exp(+iLφ)`). No carrier is included.
pub fn evaluate_lg(p: i64, l: i32, w0: f64, k0: f64, grid: &Grid) -> Result<ScalarField> {
    if p < 0 {
        return Err(QmeError::invalid(format!("LG radial index must be >= 0, got {p}")));
    }
    if !(w0 > 0.0 && w0.is_finite()) {
        return Err(QmeError::invalid(format!("LG waist must be positive, got {w0}")));
    }
    if !(k0 > 0.0 && k0.is_finite()) {
        return Err(QmeError::invalid(format!("wavenumber must be positive, got {k0}")));
    }
    let norm = (2.0 / PI).sqrt() / w0;
    let z = grid.z;
    Ok(ScalarField::from_fn(*grid, k0, |x, y| {
        let r = x.hypot(y);
        let phi = y.atan2(x);
        (lg_profile(p as usize, l, w0, k0, r, phi, z) * norm).conj()
    }))
}

/// Parameters of one vector Bessel beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselParams {
    /// Cone angle, `0 <= θ < π/2`.
    pub theta: f64,
    /// Topological charge.
    pub l: i32,
    pub alpha: C64,
    pub beta: C64,
    pub e0: C64,
}

impl BesselParams {
    pub fn x_polarized(theta: f64, l: i32) -> Self {
        BesselParams {
            theta,
            l,
            alpha: C64::new(1.0, 0.0),
            beta: C64::new(0.0, 0.0),
            e0: C64::new(1.0, 0.0),
        }
    }
}

/// Coefficients of `Σ_m c_m J_m(k_t r) e^{imφ}` for orders `lo ..= lo+4`.
/// The common factor `exp(i k_z z)` is kept outside.
#[derive(Debug, Clone, Copy)]
struct Harmonics {
    lo: i32,
    c: [C64; 5],
}

impl Harmonics {
    fn zero(lo: i32) -> Self {
        Harmonics {
            lo,
            c: [C64::new(0.0, 0.0); 5],
        }
    }

    fn with(lo: i32, terms: &[(i32, C64)]) -> Self {
        let mut h = Harmonics::zero(lo);
        for &(m, v) in terms {
            h.c[(m - lo) as usize] += v;
        }
        h
    }

    fn get(&self, m: i32) -> C64 {
        let k = m - self.lo;
        if (0..5).contains(&k) {
            self.c[k as usize]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    // (∂x ± i∂y) J_m e^{imφ} = ∓k J_{m±1} e^{i(m±1)φ}, hence
    // ∂x f_m = k/2 (f_{m-1} - f_{m+1}) and ∂y f_m = ik/2 (f_{m-1} + f_{m+1}).
    fn dx(&self, kt: f64) -> Self {
        let mut out = Harmonics::zero(self.lo);
        for k in 0..5 {
            let m = self.lo + k as i32;
            out.c[k] = 0.5 * kt * (self.get(m + 1) - self.get(m - 1));
        }
        out
    }

    fn dy(&self, kt: f64) -> Self {
        let mut out = Harmonics::zero(self.lo);
        let i = C64::i();
        for k in 0..5 {
            let m = self.lo + k as i32;
            out.c[k] = 0.5 * i * kt * (self.get(m + 1) + self.get(m - 1));
        }
        out
    }

    fn scale(&self, s: C64) -> Self {
        let mut out = *self;
        for v in out.c.iter_mut() {
            *v *= s;
        }
        out
    }

    fn sub(&self, other: &Self) -> Self {
        let mut out = *self;
        for (a, b) in out.c.iter_mut().zip(other.c.iter()) {
            *a -= b;
        }
        out
    }

    fn eval(&self, table: &BesselTable, rot: &[C64; 5]) -> C64 {
        self.c
            .iter()
            .enumerate()
            .map(|(k, c)| c * table.get(self.lo + k as i32) * rot[k])
            .sum()
    }
}

/// Closed-form E and H components of one vector Bessel beam in harmonic form.
struct BesselModes {
    kt: f64,
    kz: f64,
    lo: i32,
    e: [Harmonics; 3],
    h: [Harmonics; 3],
}

impl BesselModes {
    fn new(p: &BesselParams, k0: f64) -> Self {
        let i = C64::i();
        let kt = k0 * p.theta.sin();
        let kz = k0 * p.theta.cos();
        let l = p.l;
        let lo = l - 2;
        let ap = p.alpha + i * p.beta;
        let am = p.alpha - i * p.beta;
        let ez_pref = i * kt / (2.0 * kz);
        let ex = Harmonics::with(lo, &[(l, p.e0 * p.alpha)]);
        let ey = Harmonics::with(lo, &[(l, p.e0 * p.beta)]);
        let ez = Harmonics::with(
            lo,
            &[(l - 1, p.e0 * ez_pref * ap), (l + 1, -p.e0 * ez_pref * am)],
        );
        // curl E, with ∂z -> i k_z on every term
        let dz = i * kz;
        let curl = [
            ez.dy(kt).sub(&ey.scale(dz)),
            ex.scale(dz).sub(&ez.dx(kt)),
            ey.dx(kt).sub(&ex.dy(kt)),
        ];
        // curl E = i μ0 ω H with μ0 ω = k0 in natural units
        let to_h = C64::new(0.0, -1.0 / k0);
        let h = [curl[0].scale(to_h), curl[1].scale(to_h), curl[2].scale(to_h)];
        BesselModes {
            kt,
            kz,
            lo,
            e: [ex, ey, ez],
            h,
        }
    }
}

/// Vector Bessel beam (E from the standard closed form, H from its curl via
/// Bessel recurrences) sampled on `grid` at plane `grid.z`.
pub fn evaluate_bessel_vector(params: &BesselParams, k0: f64, grid: &Grid) -> Result<VectorField> {
    if !(params.theta >= 0.0 && params.theta < PI / 2.0) {
        return Err(QmeError::invalid(format!(
            "Bessel cone angle must lie in [0, π/2), got {}",
            params.theta
        )));
    }
    if params.alpha.norm() == 0.0 && params.beta.norm() == 0.0 {
        return Err(QmeError::invalid("polarization (α, β) must not vanish"));
    }
    if !(k0 > 0.0 && k0.is_finite()) {
        return Err(QmeError::invalid(format!("wavenumber must be positive, got {k0}")));
    }
    let modes = BesselModes::new(params, k0);
    let carrier = C64::new(0.0, modes.kz * grid.z).exp();
    let shape = grid.shape();
    let mut e: [Array2<C64>; 3] = std::array::from_fn(|_| Array2::zeros(shape));
    let mut h: [Array2<C64>; 3] = std::array::from_fn(|_| Array2::zeros(shape));
    let xs = grid.xs();
    let ys = grid.ys();
    for (iy, &y) in ys.iter().enumerate() {
        for (ix, &x) in xs.iter().enumerate() {
            let [ev, hv] = bessel_point(&modes, x, y);
            for k in 0..3 {
                e[k][[iy, ix]] = ev[k] * carrier;
                h[k][[iy, ix]] = hv[k] * carrier;
            }
        }
    }
    VectorField::new(*grid, k0, e, h)
}

fn bessel_point(modes: &BesselModes, x: f64, y: f64) -> [[C64; 3]; 2] {
    let r = x.hypot(y);
    let phi = y.atan2(x);
    let table = BesselTable::new(modes.lo, modes.lo + 4, modes.kt * r);
    let rot: [C64; 5] = std::array::from_fn(|k| C64::new(0.0, (modes.lo + k as i32) as f64 * phi).exp());
    [
        std::array::from_fn(|k| modes.e[k].eval(&table, &rot)),
        std::array::from_fn(|k| modes.h[k].eval(&table, &rot)),
    ]
}

/// Analytic E and H of a Bessel beam at one point `(x, y, z)`.
///
/// Used by residual checks that need the field off the sampling grid.
pub fn bessel_vector_at(params: &BesselParams, k0: f64, x: f64, y: f64, z: f64) -> ([C64; 3], [C64; 3]) {
    let modes = BesselModes::new(params, k0);
    let carrier = C64::new(0.0, modes.kz * z).exp();
    let [e, h] = bessel_point(&modes, x, y);
    (e.map(|v| v * carrier), h.map(|v| v * carrier))
}

/// Fraunhofer pattern of a uniformly illuminated (unit amplitude) disk of
/// radius `r_ap` behind a lens of focal length `f`:
/// `u(ρ) = (π r_ap² / (λ f)) · 2 J1(v)/v` with `v = k0 r_ap ρ / f`.
///
/// The scale matches [`crate::propagate::fourier_lens`] applied to the same
/// aperture.
pub fn evaluate_aperture_airy(r_ap: f64, k0: f64, f: f64, grid_out: &Grid) -> Result<ScalarField> {
    if !(r_ap > 0.0 && f > 0.0 && k0 > 0.0) {
        return Err(QmeError::invalid(format!(
            "aperture radius, focal length and wavenumber must be positive (got {r_ap}, {f}, {k0})"
        )));
    }
    let lambda = 2.0 * PI / k0;
    let peak = PI * r_ap * r_ap / (lambda * f);
    Ok(ScalarField::from_fn(*grid_out, k0, |x, y| {
        let v = k0 * r_ap * x.hypot(y) / f;
        C64::new(peak * airy_amplitude(v), 0.0)
    }))
}

/// `2 J1(v) / v`, equal to 1 at the origin.
pub fn airy_amplitude(v: f64) -> f64 {
    if v.abs() < 1e-8 {
        1.0 - v * v / 8.0
    } else {
        2.0 * bessel_j_orders(1, v)[1] / v
    }
}
