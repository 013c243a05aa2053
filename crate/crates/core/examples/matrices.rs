//! Assemble measure matrices from a basis written to disk, export them and
//! read back their eigen decomposition.

use std::f64::consts::PI;

use qme::basis::BeamBasis;
use qme::eigen::eig_hermitian;
use qme::io::{read_bundle, read_matrix, write_bundle, write_eigen, write_matrix};
use qme::operators::{assemble_io, assemble_second_moment};
use qme::roi::{Region, RegionOfInterest};
use qme::Grid;

pub fn run_example() -> qme::Result<()> {
    let dir = out_dir().join("matrices");
    let grid = Grid::square(96, 0.05, 0.0)?;
    let basis = BeamBasis::lg(&[(0, 0), (1, 0), (0, 1), (0, -1), (2, 0)], 1.0, 2.0 * PI, &[grid])?;
    write_bundle(&basis, &dir.join("basis"))?;
    let back = read_bundle(&dir.join("basis"))?;

    let roi: RegionOfInterest = Region::disk(1.2)?.centered_at((0.2, 0.0)).into();
    let io = assemble_io(&back, &roi)?;
    assert_eq!(io, assemble_io(&basis, &roi)?, "bundle round trip changed the matrix");
    let m2 = assemble_second_moment(&back, &roi, (0.2, 0.0))?;
    for m in [&io, &m2] {
        let path = dir.join(format!("{}.qmat", m.tag));
        write_matrix(m, &path)?;
        let sol = eig_hermitian(&read_matrix(&path)?.entries)?;
        write_eigen(&sol, m, &dir.join(format!("{}_eig", m.tag)))?;
        println!("{} eigenvalues: {:.5?} (residual {:.1e})", m.tag, sol.values, sol.residual);
    }
    println!("files under {}", dir.display());
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
