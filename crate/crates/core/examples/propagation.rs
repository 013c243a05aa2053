//! Free-space propagation: a Gaussian spreading by √2 over one Rayleigh
//! range, and a disk aperture focused by a lens into an Airy pattern.

use std::f64::consts::PI;

use qme::analysis::soim;
use qme::basis::Field;
use qme::beams::{evaluate_aperture_airy, evaluate_lg};
use qme::propagate::{angular_spectrum_propagate, fourier_lens};
use qme::roi::Region;
use qme::{Grid, ScalarField, C64};

pub fn run_example() -> qme::Result<()> {
    let k0 = 2.0 * PI;
    let w0 = 4.0;
    let g = Grid::square(256, 0.5, 0.0)?;
    let u0 = evaluate_lg(0, 0, w0, k0, &g)?;
    let zr = k0 * w0 * w0 / 2.0;
    let u1 = angular_spectrum_propagate(&u0, zr)?;
    let w = |u: &ScalarField| soim(&Field::Scalar(u.clone()), &Region::full_plane().at_z(u.grid.z), (0.0, 0.0));
    println!("spread over z_R: {:.5} (√2 = {:.5})", w(&u1)? / w(&u0)?, 2f64.sqrt());

    let n = 256;
    let slm = Grid::square(n, 1.0, 0.0)?;
    let r_ap = 16.0;
    let disk = ScalarField::from_fn(slm, k0, |x, y| C64::new(if x.hypot(y) <= r_ap { 1.0 } else { 0.0 }, 0.0));
    let focus = fourier_lens(&disk, n as f64)?;
    let airy = evaluate_aperture_airy(r_ap, k0, n as f64, &focus.grid)?;
    let peak = airy.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let err = focus.values.iter().zip(airy.values.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("lens focus vs Airy pattern: max deviation {:.2}% of peak", 100.0 * err / peak);
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
