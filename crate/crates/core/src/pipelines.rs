//! End-to-end optimizations: maximal transmission through a region and
//! minimal spot size inside it, plus parameter sweeps.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use ndarray::Array1;

use crate::analysis::strehl;
use crate::analysis::soim;
use crate::basis::{BeamBasis, Field, PlaneMembers};
use crate::bench::{encode_ring_basis, first_dark_ring, ring_schedule, Bench, BenchConfig, MeasuredBasis};
use crate::beams::BesselParams;
use crate::eigen::{maximize_measure, minimize_constrained_sso};
use crate::error::{QmeError, Result};
use crate::field::C64;
use crate::grid::Grid;
use crate::operators::{assemble_io, assemble_sso, normalized_base, MeasureMatrix, MeasureTag};
use crate::roi::{Region, RegionOfInterest};
use crate::special::J0_FIRST_ZERO;

/// Default intensity threshold fraction for the normalized base.
pub const DEFAULT_TAU: f64 = 1e-3;

/// Outcome of one optimization.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub measure: MeasureTag,
    /// Optimal coefficients over the original basis.
    pub coefficients: Array1<C64>,
    /// Extremal eigenvalue (`λ_max` of IO, `λ_min` of SSO).
    pub value: f64,
    /// Spot size `2 sqrt(λ_min)` for spot-size runs.
    pub w: Option<f64>,
    /// Transmittance for intensity runs.
    pub transmittance: Option<f64>,
    pub strehl: f64,
    /// Retained intensity modes `K` (equals `N` for intensity runs).
    pub retained: usize,
    pub members: usize,
    pub roi: String,
    /// Free-form parameter echo, written verbatim into reports.
    pub params: Vec<(String, String)>,
}

impl OptimizationReport {
    /// Optimized superposition on basis plane `plane`.
    pub fn field(&self, basis: &BeamBasis, plane: usize) -> Result<Field> {
        basis.superpose(plane, self.coefficients.as_slice().unwrap_or(&self.coefficients.to_vec()))
    }

    pub fn with_param(mut self, key: &str, value: impl ToString) -> Self {
        self.params.push((key.to_string(), value.to_string()));
        self
    }

    /// Key/value text form.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "measure {}", self.measure);
        let _ = writeln!(s, "roi {}", self.roi);
        let _ = writeln!(s, "N {}", self.members);
        let _ = writeln!(s, "K {}", self.retained);
        let _ = writeln!(s, "value {:e}", self.value);
        if let Some(w) = self.w {
            let _ = writeln!(s, "w {w:e}");
        }
        if let Some(t) = self.transmittance {
            let _ = writeln!(s, "T {t:e}");
        }
        let _ = writeln!(s, "strehl {:e}", self.strehl);
        for (k, v) in &self.params {
            let _ = writeln!(s, "param.{k} {v}");
        }
        for (i, c) in self.coefficients.iter().enumerate() {
            let _ = writeln!(s, "coef.{i} {:e} {:e}", c.re, c.im);
        }
        s
    }
}

fn single_plane(basis: &BeamBasis) -> Result<f64> {
    basis
        .grids()
        .first()
        .map(|g| g.z)
        .ok_or_else(|| QmeError::invalid("basis has no planes"))
}

/// Superposition with the largest power inside `roi`.
pub fn maximize_intensity(basis: &BeamBasis, roi: &RegionOfInterest) -> Result<OptimizationReport> {
    let m0 = assemble_io(basis, roi)?;
    let (lam, v) = maximize_measure(&m0)?;
    Ok(OptimizationReport {
        measure: MeasureTag::Io,
        value: lam,
        w: None,
        transmittance: Some(lam),
        strehl: 1.0,
        retained: basis.len(),
        members: basis.len(),
        roi: m0.roi.clone(),
        coefficients: v,
        params: Vec::new(),
    })
}

/// Maximal transmission of `n` radial LG modes (`L = 0`) through a disk of
/// radius `r` at the waist. With unit-power members the top intensity
/// eigenvalue is the transmittance.
pub fn maximize_transmission(n: usize, w0: f64, k0: f64, r: f64, grid: &Grid) -> Result<OptimizationReport> {
    let basis = BeamBasis::lg_radial(n, 0, w0, k0, &[grid.at_z(0.0)])?;
    let roi = Region::disk(r)?.into();
    Ok(maximize_intensity(&basis, &roi)?
        .with_param("basis", "lg")
        .with_param("w0", w0)
        .with_param("R", r))
}

/// Intermediate products of a spot-size run, for callers that need the
/// matrices themselves.
#[derive(Debug, Clone)]
pub struct SpotSizeRun {
    pub report: OptimizationReport,
    pub io: MeasureMatrix,
    pub sso: MeasureMatrix,
}

/// Smallest spot (about `r0`) among superpositions with unit intensity in
/// `roi`, restricted to intensity modes above the threshold `tau`.
pub fn minimize_spot(
    basis: &BeamBasis,
    roi: &RegionOfInterest,
    r0: (f64, f64),
    tau: f64,
) -> Result<SpotSizeRun> {
    let io = assemble_io(basis, roi)?;
    let base = normalized_base(&io, tau)?;
    let sso = assemble_sso(basis, roi, r0, &base)?;
    let (lam, coeffs) = minimize_constrained_sso(&sso, &base)?;
    let s = strehl(&coeffs, &io)?;
    let report = OptimizationReport {
        measure: MeasureTag::Sso,
        value: lam,
        w: Some(2.0 * lam.max(0.0).sqrt()),
        transmittance: None,
        strehl: s,
        retained: base.len(),
        members: basis.len(),
        roi: io.roi.clone(),
        coefficients: coeffs,
        params: vec![("tau".into(), tau.to_string())],
    };
    Ok(SpotSizeRun { report, io, sso })
}

/// One row of a sweep table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub r: f64,
    pub n: usize,
    pub k: usize,
    pub w: f64,
    pub t: f64,
    pub strehl: f64,
}

/// Spot-size optimization over concentric disks of the given radii.
/// `T` is the ROI intensity of the optimal superposition per unit input
/// norm.
pub fn sweep_spot_radius(basis: &BeamBasis, radii: &[f64], center: (f64, f64), tau: f64) -> Result<Vec<SweepPoint>> {
    let z = single_plane(basis)?;
    radii
        .iter()
        .map(|&r| {
            let roi: RegionOfInterest = Region::disk(r)?.centered_at(center).at_z(z).into();
            let run = minimize_spot(basis, &roi, center, tau)?;
            let a = &run.report.coefficients;
            let norm2: f64 = a.iter().map(|v| v.norm_sqr()).sum();
            Ok(SweepPoint {
                r,
                n: basis.len(),
                k: run.report.retained,
                w: run.report.w.unwrap_or(0.0),
                t: run.io.quadratic(a).re / norm2,
                strehl: run.report.strehl,
            })
        })
        .collect()
}

/// Transmission optimization for growing radial LG families `N = 1..`.
pub fn sweep_transmission_modes(ns: &[usize], w0: f64, k0: f64, r: f64, grid: &Grid) -> Result<Vec<SweepPoint>> {
    ns.iter()
        .map(|&n| {
            let rep = maximize_transmission(n, w0, k0, r, grid)?;
            Ok(SweepPoint {
                r,
                n,
                k: n,
                w: f64::NAN,
                t: rep.value,
                strehl: 1.0,
            })
        })
        .collect()
}

/// CSV with columns `R,N,K,w,T,Strehl`.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut s = String::from("R,N,K,w,T,Strehl\n");
    for p in points {
        let _ = writeln!(s, "{:e},{},{},{:e},{:e},{:e}", p.r, p.n, p.k, p.w, p.t, p.strehl);
    }
    s
}

pub fn write_sweep_csv(points: &[SweepPoint], path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| QmeError::io(path, e))?;
    f.write_all(sweep_csv(points).as_bytes())
        .map_err(|e| QmeError::io(path, e))
}

/// Indices where `w` steps up along a sweep of decreasing radius
/// (`w[i+1] > w[i]` by more than `rtol`), and where `K` drops.
pub fn sweep_steps(points: &[SweepPoint], rtol: f64) -> (Vec<usize>, Vec<usize>) {
    let mut w_up = Vec::new();
    let mut k_drop = Vec::new();
    for (i, pair) in points.windows(2).enumerate() {
        if pair[1].w > pair[0].w * (1.0 + rtol) {
            w_up.push(i + 1);
        }
        if pair[1].k < pair[0].k {
            k_drop.push(i + 1);
        }
    }
    (w_up, k_drop)
}

/// `n` x-polarized, `L = 0` Bessel beams with transverse wavenumbers
/// `k_t,i = i·NA·k0/n` (`i = 1..n`), each scaled to equal power per unit
/// area of its angular-spectrum ring. The last member has the largest cone
/// angle and serves as the reference beam.
pub fn bessel_na_family(n: usize, na: f64, k0: f64) -> Result<Vec<BesselParams>> {
    if n == 0 || !(na > 0.0 && na < 1.0) {
        return Err(QmeError::invalid(format!("need n >= 1 and 0 < NA < 1, got {n}, {na}")));
    }
    let k_max = na * k0;
    let dk = k_max / n as f64;
    Ok((1..=n)
        .map(|i| {
            let kt = dk * i as f64;
            let theta = (kt / k0).asin();
            let mut p = BesselParams::x_polarized(theta, 0);
            p.e0 = C64::new((kt * dk / (2.0 * std::f64::consts::PI * theta.cos())).sqrt(), 0.0);
            p
        })
        .collect())
}

/// The ring-mask bench run end to end: masks encoded, each retrieved on the
/// camera, and the reference (outermost ring) beam's core measured.
#[derive(Debug, Clone)]
pub struct BenchExperiment {
    pub bench: Bench,
    /// Ring masks on the modulator plane.
    pub slm_basis: BeamBasis,
    pub measured: MeasuredBasis,
    /// First dark ring of the reference beam on the camera.
    pub r_b: f64,
    /// SOIM of the reference beam inside `r_b`.
    pub w_b: f64,
}

/// Encode `n_rings` masks sized so that the outermost ring focuses to a
/// Bessel core whose first zero lies near `r_b_target` on the camera, then
/// measure all of them.
pub fn bench_experiment(config: BenchConfig, n_rings: usize, r_b_target: f64, fill: f64) -> Result<BenchExperiment> {
    if !(r_b_target > 0.0) {
        return Err(QmeError::invalid(format!("reference core radius must be positive, got {r_b_target}")));
    }
    let bench = Bench::new(config)?;
    let cfg = &bench.config;
    let rho_c = J0_FIRST_ZERO * cfg.focal_length / (cfg.k0 * r_b_target);
    let pitch = rho_c / (n_rings as f64 - fill / 2.0);
    let rings = ring_schedule(n_rings, pitch * n_rings as f64, fill)?;
    let (slm_basis, _) = encode_ring_basis(&rings, &bench.slm_grid, cfg.k0)?;
    let measured = bench.measure_basis(&slm_basis)?;
    let PlaneMembers::Scalar(fields) = &measured.basis.planes()[0] else {
        unreachable!("bench bases are scalar")
    };
    let reference = fields.last().expect("at least one ring");
    let r_b = first_dark_ring(reference)
        .ok_or_else(|| QmeError::UndefinedMeasure("reference beam shows no dark ring on the camera".into()))?;
    let region = Region::disk(r_b)?.at_z(bench.ccd_grid.z);
    let w_b = soim(&Field::Scalar(reference.clone()), &region, (0.0, 0.0))?;
    Ok(BenchExperiment {
        bench,
        slm_basis,
        measured,
        r_b,
        w_b,
    })
}

impl BenchExperiment {
    pub fn roi(&self, r: f64) -> Result<RegionOfInterest> {
        Ok(Region::disk(r)?.at_z(self.bench.ccd_grid.z).into())
    }

    /// Spot-size minimization on the retrieved fields.
    pub fn spot(&self, r: f64, tau: f64) -> Result<SpotSizeRun> {
        minimize_spot(&self.measured.basis, &self.roi(r)?, (0.0, 0.0), tau)
    }

    pub fn sweep(&self, radii: &[f64], tau: f64) -> Result<Vec<SweepPoint>> {
        sweep_spot_radius(&self.measured.basis, radii, (0.0, 0.0), tau)
    }

    /// Exp-S vs Num-S discrepancy for coefficients `a`.
    pub fn linearity(&self, a: &Array1<C64>) -> Result<f64> {
        self.bench.verify_linearity(&self.slm_basis, &self.measured, &a.to_vec())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::soim;
    use std::f64::consts::PI;

    fn k0() -> f64 {
        2.0 * PI
    }

    #[test]
    fn single_gaussian_transmission() {
        let g = Grid::square(201, 1.0 / 40.0, 0.0).unwrap();
        let rep = maximize_transmission(1, 1.0, k0(), 1.0, &g).unwrap();
        assert!((rep.transmittance.unwrap() - (1.0 - (-2f64).exp())).abs() < 1e-3);
        assert!(rep.to_text().contains("measure IO"));
    }

    #[test]
    fn transmission_grows_with_modes() {
        let g = Grid::square(201, 1.0 / 20.0, 0.0).unwrap();
        let pts = sweep_transmission_modes(&[1, 2, 4, 8], 1.0, k0(), 1.0, &g).unwrap();
        assert!(pts.windows(2).all(|p| p[1].t >= p[0].t - 1e-12));
        let big = maximize_transmission(3, 1.0, k0(), 4.9, &g).unwrap();
        assert!(big.value > 0.999);
    }

    #[test]
    fn single_member_spot_is_its_own_soim() {
        let g = Grid::square(101, 0.05, 0.0).unwrap();
        let basis = BeamBasis::lg(&[(1, 0)], 1.0, k0(), &[g]).unwrap();
        let region = Region::disk(1.2).unwrap();
        let run = minimize_spot(&basis, &region.into(), (0.0, 0.0), DEFAULT_TAU).unwrap();
        assert_eq!(run.report.retained, 1);
        let f = run.report.field(&basis, 0).unwrap();
        let direct = soim(&f, &region, (0.0, 0.0)).unwrap();
        assert!((run.report.w.unwrap() / direct - 1.0).abs() < 1e-9);
    }

    #[test]
    fn spot_report_matches_pointwise_soim() {
        let g = Grid::square(121, 0.05, 0.0).unwrap();
        let basis = BeamBasis::lg_radial(8, 0, 1.0, k0(), &[g]).unwrap();
        let region = Region::disk(0.8).unwrap();
        let run = minimize_spot(&basis, &region.into(), (0.0, 0.0), DEFAULT_TAU).unwrap();
        let f = run.report.field(&basis, 0).unwrap();
        let direct = soim(&f, &region, (0.0, 0.0)).unwrap();
        assert!((run.report.w.unwrap() / direct - 1.0).abs() < 1e-6);
        assert!(run.report.strehl > 0.0 && run.report.strehl <= 1.0);
        assert!((run.io.quadratic(&run.report.coefficients).re - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sweep_csv_layout() {
        let p = SweepPoint {
            r: 1.0,
            n: 3,
            k: 2,
            w: 0.5,
            t: 0.25,
            strehl: 0.1,
        };
        let csv = sweep_csv(&[p]);
        assert_eq!(csv.lines().next().unwrap(), "R,N,K,w,T,Strehl");
        assert_eq!(csv.lines().nth(1).unwrap(), "1e0,3,2,5e-1,2.5e-1,1e-1");
        let (up, drop) = sweep_steps(&[p, SweepPoint { w: 0.6, k: 1, ..p }], 1e-9);
        assert_eq!(up, vec![1]);
        assert_eq!(drop, vec![1]);
    }

    #[test]
    fn bessel_family_layout() {
        let fam = bessel_na_family(4, 0.1, k0()).unwrap();
        assert_eq!(fam.len(), 4);
        assert!((fam[3].theta.sin() - 0.1).abs() < 1e-15);
        assert!(fam.windows(2).all(|w| w[1].theta > w[0].theta));
        assert!(bessel_na_family(0, 0.1, k0()).is_err());
    }
}
