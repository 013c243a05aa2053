//! Spot size and Strehl ratio against ROI radius. Each time an intensity
//! mode drops below the threshold the spot size jumps up.

use std::f64::consts::PI;

use qme::basis::BeamBasis;
use qme::pipelines::{sweep_spot_radius, sweep_steps, DEFAULT_TAU};
use qme::Grid;

pub fn run_example() -> qme::Result<()> {
    let w0 = 4.0;
    let grid = Grid::square(201, 0.2, 0.0)?;
    let basis = BeamBasis::lg_radial(11, 0, w0, 2.0 * PI, &[grid])?;
    let radii: Vec<f64> = (0..=30).map(|i| w0 * (1.5 - 0.045 * i as f64)).collect();
    let pts = sweep_spot_radius(&basis, &radii, (0.0, 0.0), DEFAULT_TAU)?;

    println!("R/w0   K   w/w0    Strehl");
    for p in &pts {
        println!("{:5.3}  {:2}  {:.4}  {:.4}", p.r / w0, p.k, p.w / w0, p.strehl);
    }
    let (up, drops) = sweep_steps(&pts, 1e-6);
    println!("w steps up at {up:?}; K drops at {drops:?}");
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
