//! Spot-size optimization over a three-dimensional region: a stack of
//! planes, each basis member propagated to every plane.

use std::f64::consts::PI;

use qme::basis::BeamBasis;
use qme::pipelines::{minimize_spot, DEFAULT_TAU};
use qme::roi::{Region, RegionOfInterest, VolumeRegion};
use qme::Grid;

pub fn run_example() -> qme::Result<()> {
    let w0 = 2.0;
    let zs = [-1.0, -0.5, 0.0, 0.5, 1.0];
    let grids: Vec<Grid> = zs.iter().map(|&z| Grid::square(121, 0.1, z)).collect::<qme::Result<_>>()?;
    let basis = BeamBasis::lg_radial(15, 0, w0, 2.0 * PI, &grids)?;

    let cylinder = VolumeRegion::cylinder(Region::disk(1.0)?, &zs)?;
    let ellipsoid = VolumeRegion::ellipsoid(1.0, 1.2, &zs)?;
    for (name, roi) in [("cylinder", cylinder), ("ellipsoid", ellipsoid)] {
        let roi = RegionOfInterest::Volume(roi);
        let rep = minimize_spot(&basis, &roi, (0.0, 0.0), DEFAULT_TAU)?.report;
        println!(
            "{name}: K = {}, w = {:.4} λ, Strehl = {:.2}%",
            rep.retained,
            rep.w.unwrap_or(f64::NAN),
            100.0 * rep.strehl
        );
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
