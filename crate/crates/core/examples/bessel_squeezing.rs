//! Vector Bessel beams up to NA = 0.1: the optimized spot beats the
//! highest-NA Bessel core inside its first zero, and tends to an Airy-like
//! spot for a large region.

use std::f64::consts::PI;

use qme::analysis::soim;
use qme::basis::{BeamBasis, Field, PlaneMembers};
use qme::pipelines::{bessel_na_family, minimize_spot, DEFAULT_TAU};
use qme::roi::Region;
use qme::special::{J0_FIRST_ZERO, J1_FIRST_ZERO};
use qme::Grid;

pub fn run_example() -> qme::Result<()> {
    let k0 = 2.0 * PI;
    let na = 0.1;
    let grid = Grid::square(129, 0.15, 0.0)?;
    let basis = BeamBasis::bessel(&bessel_na_family(15, na, k0)?, k0, &[grid])?;

    let kt = k0 * na;
    let r_b = J0_FIRST_ZERO / kt;
    let PlaneMembers::Vector(members) = &basis.planes()[0] else {
        unreachable!("Bessel bases are vectorial")
    };
    let reference = Field::Vector(members[members.len() - 1].clone());
    let w_b = soim(&reference, &Region::disk(r_b)?, (0.0, 0.0))?;
    println!("reference core: R_B = {r_b:.3} λ, w_B = {w_b:.3} λ");

    for r in [0.5 * r_b, 0.8 * r_b, J1_FIRST_ZERO / kt] {
        let rep = minimize_spot(&basis, &Region::disk(r)?.into(), (0.0, 0.0), DEFAULT_TAU)?.report;
        println!(
            "R/R_B = {:.2}: w/w_B = {:.3}, Strehl = {:.2}%",
            r / r_b,
            rep.w.unwrap_or(f64::NAN) / w_b,
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
