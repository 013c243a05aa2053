//! Energy, chirality and force operators of vector Bessel beams: the
//! superpositions with extreme energy density and helicity in a disk, and
//! the momentum flux through a pair of planes.

use std::f64::consts::PI;

use qme::basis::BeamBasis;
use qme::beams::BesselParams;
use qme::eigen::{eig_hermitian, maximize_measure};
use qme::operators::{assemble_force, assemble_local_kernel, MeasureTag};
use qme::roi::{Region, RegionOfInterest};
use qme::{Grid, C64};

pub fn run_example() -> qme::Result<()> {
    let k0 = 2.0 * PI;
    let members: Vec<BesselParams> = [0.3, 0.5]
        .iter()
        .flat_map(|&theta| {
            [C64::new(0.0, 0.0), C64::new(0.0, 1.0)].map(|beta| BesselParams {
                beta,
                ..BesselParams::x_polarized(theta, 0)
            })
        })
        .collect();
    let grids = [Grid::square(64, 0.05, 0.0)?, Grid::square(64, 0.05, 0.4)?];
    let basis = BeamBasis::bessel(&members, k0, &grids)?;
    let disk = Region::disk(1.0)?;
    let roi: RegionOfInterest = disk.into();

    let eo = assemble_local_kernel(&basis, &roi, MeasureTag::Eo)?;
    let (energy, _) = maximize_measure(&eo)?;
    println!("largest energy in the disk: {energy:.4}");

    let cso = assemble_local_kernel(&basis, &roi, MeasureTag::Cso)?;
    let spectrum = eig_hermitian(&cso.entries)?;
    println!("chirality eigenvalues: {:.4?}", spectrum.values);

    for m in assemble_force(&basis, &disk, &disk.at_z(0.4))? {
        let s = eig_hermitian(&m.entries)?;
        println!("{}: range [{:.4}, {:.4}]", m.tag, s.values[s.len() - 1], s.values[0]);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
