//! Where a squeezed spot oscillates faster than its own bandwidth: the
//! flagged samples sit in the dark region around the core.

use std::f64::consts::PI;

use qme::analysis::{superoscillation_mask, SuperoscillationOptions};
use qme::basis::{BeamBasis, Field};
use qme::pipelines::{minimize_spot, DEFAULT_TAU};
use qme::roi::Region;
use qme::Grid;

pub fn run_example() -> qme::Result<()> {
    let w0 = 3.0;
    let grid = Grid::square(321, 0.125, 0.0)?;
    let basis = BeamBasis::lg_radial(25, 0, w0, 2.0 * PI, &[grid])?;
    let opts = SuperoscillationOptions::default();

    for r in [1.0, 3.0 * w0] {
        let rep = minimize_spot(&basis, &Region::disk(r)?.into(), (0.0, 0.0), DEFAULT_TAU)?.report;
        let Field::Scalar(u) = rep.field(&basis, 0)? else {
            unreachable!("LG bases are scalar")
        };
        let map = superoscillation_mask(&u, (0.0, 0.0), &opts)?;
        let inten = u.intensity();
        let peak = inten.iter().cloned().fold(0.0, f64::max);
        let brightest = inten
            .iter()
            .zip(map.mask.iter())
            .filter(|(_, &m)| m)
            .map(|(&i, _)| i / peak)
            .fold(0.0, f64::max);
        println!(
            "R = {r:4.1} λ: k_band = {:.3} rad/λ, {} super-oscillating samples, brightest at {:.2}% of peak",
            map.k_band,
            map.count(),
            100.0 * brightest
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
