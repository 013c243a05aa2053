//! Smallest focal spot inside a one-wavelength disk from 25 radial
//! Laguerre-Gauss modes, with its Strehl ratio and an intensity raster.

use std::f64::consts::PI;

use qme::basis::BeamBasis;
use qme::pipelines::{minimize_spot, DEFAULT_TAU};
use qme::raster::{write_intensity_ppm, Colormap};
use qme::roi::Region;
use qme::Grid;

pub fn run_example() -> qme::Result<()> {
    let k0 = 2.0 * PI;
    let w0 = 3.0;
    let grid = Grid::square(241, 0.1, 0.0)?;
    let basis = BeamBasis::lg_radial(25, 0, w0, k0, &[grid])?;
    let region = Region::disk(1.0)?;

    let run = minimize_spot(&basis, &region.into(), (0.0, 0.0), DEFAULT_TAU)?;
    let rep = &run.report;
    let w = rep.w.unwrap_or(f64::NAN);
    println!("retained {} of {} intensity modes", rep.retained, rep.members);
    println!("w = {w:.4} λ  (w/w0 = {:.4}), Strehl = {:.2}%", w / w0, 100.0 * rep.strehl);

    let field = rep.field(&basis, 0)?;
    let path = out_dir().join("spot_size.ppm");
    write_intensity_ppm(&path, &field.intensity(), &grid, Colormap::Hot, Some(&region))?;
    println!("raster: {}", path.display());
    Ok(())
}

fn out_dir() -> std::path::PathBuf {
    std::env::var_os(qme::config::OUT_DIR_ENV)
        .map(Into::into)
        .unwrap_or_else(|| std::env::temp_dir().join("qme-examples"))
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
