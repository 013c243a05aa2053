//! Largest power through a disk from radial Laguerre-Gauss superpositions,
//! as a function of the number of modes.

use std::f64::consts::PI;

use qme::pipelines::{maximize_transmission, sweep_csv, sweep_transmission_modes};
use qme::Grid;

pub fn run_example() -> qme::Result<()> {
    let k0 = 2.0 * PI;
    let w0 = 1.0;
    let grid = Grid::square(161, 0.025, 0.0)?;

    let single = maximize_transmission(1, w0, k0, w0, &grid)?;
    println!("Gaussian through R = w0: T = {:.5} (1 - e^-2 = {:.5})", single.value, 1.0 - (-2.0f64).exp());

    let best = maximize_transmission(6, w0, k0, w0, &grid)?;
    println!("six modes: T = {:.5}, mode weights:", best.value);
    for (p, c) in best.coefficients.iter().enumerate() {
        println!("  P={p}  |v|^2 = {:.4}", c.norm_sqr());
    }

    let ns: Vec<usize> = (1..=8).collect();
    for r in [0.5, 1.0] {
        let pts = sweep_transmission_modes(&ns, w0, k0, r * w0, &grid)?;
        println!("R = {r} w0\n{}", sweep_csv(&pts));
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
