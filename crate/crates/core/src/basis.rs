//! Ordered sets of basis beams sampled on one or more planes.

use std::fmt;

use crate::beams::{evaluate_bessel_vector, evaluate_lg, BesselParams};
use crate::error::{QmeError, Result};
use crate::field::{ScalarField, VectorField, C64};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Scalar,
    Vector,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisKind::Scalar => "scalar",
            BasisKind::Vector => "vector",
        })
    }
}

/// How a basis member was generated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MemberParams {
    Lg { p: u32, l: i32, w0: f64 },
    Bessel(BesselParams),
    /// Annular amplitude mask on a modulator.
    Ring { r_in: f64, r_out: f64 },
    Custom,
}

impl fmt::Display for MemberParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MemberParams::Lg { p, l, w0 } => write!(f, "lg P={p} L={l} w0={w0:e}"),
            MemberParams::Bessel(b) => write!(
                f,
                "bessel theta={:e} L={} alpha={:e},{:e} beta={:e},{:e} E0={:e},{:e}",
                b.theta, b.l, b.alpha.re, b.alpha.im, b.beta.re, b.beta.im, b.e0.re, b.e0.im
            ),
            MemberParams::Ring { r_in, r_out } => write!(f, "ring Rin={r_in:e} Rout={r_out:e}"),
            MemberParams::Custom => write!(f, "custom"),
        }
    }
}

impl std::str::FromStr for MemberParams {
    type Err = QmeError;

    fn from_str(s: &str) -> Result<Self> {
        let mut words = s.split_whitespace();
        let kind = words.next().unwrap_or("");
        let pairs: Vec<(&str, &str)> = words.filter_map(|w| w.split_once('=')).collect();
        let get = |key: &str| -> Result<&str> {
            pairs
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .ok_or_else(|| QmeError::format("member parameters", format!("'{s}' lacks {key}")))
        };
        let num = |key: &str| -> Result<f64> {
            get(key)?
                .parse()
                .map_err(|_| QmeError::format("member parameters", format!("bad {key} in '{s}'")))
        };
        let int = |key: &str| -> Result<i64> {
            get(key)?
                .parse()
                .map_err(|_| QmeError::format("member parameters", format!("bad {key} in '{s}'")))
        };
        let cplx = |key: &str| -> Result<C64> {
            let text = get(key)?;
            let (re, im) = text
                .split_once(',')
                .ok_or_else(|| QmeError::format("member parameters", format!("bad {key} in '{s}'")))?;
            match (re.parse(), im.parse()) {
                (Ok(re), Ok(im)) => Ok(C64::new(re, im)),
                _ => Err(QmeError::format("member parameters", format!("bad {key} in '{s}'"))),
            }
        };
        match kind {
            "lg" => Ok(MemberParams::Lg {
                p: u32::try_from(int("P")?)
                    .map_err(|_| QmeError::format("member parameters", "negative P"))?,
                l: int("L")? as i32,
                w0: num("w0")?,
            }),
            "bessel" => Ok(MemberParams::Bessel(BesselParams {
                theta: num("theta")?,
                l: int("L")? as i32,
                alpha: cplx("alpha")?,
                beta: cplx("beta")?,
                e0: cplx("E0")?,
            })),
            "ring" => Ok(MemberParams::Ring {
                r_in: num("Rin")?,
                r_out: num("Rout")?,
            }),
            "custom" => Ok(MemberParams::Custom),
            other => Err(QmeError::format("member parameters", format!("unknown member kind '{other}'"))),
        }
    }
}

/// All basis members sampled on one plane.
#[derive(Debug, Clone, PartialEq)]
pub enum PlaneMembers {
    Scalar(Vec<ScalarField>),
    Vector(Vec<VectorField>),
}

impl PlaneMembers {
    pub fn len(&self) -> usize {
        match self {
            PlaneMembers::Scalar(v) => v.len(),
            PlaneMembers::Vector(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn grid(&self) -> Option<Grid> {
        match self {
            PlaneMembers::Scalar(v) => v.first().map(|f| f.grid),
            PlaneMembers::Vector(v) => v.first().map(|f| f.grid),
        }
    }

    fn k0(&self) -> Option<f64> {
        match self {
            PlaneMembers::Scalar(v) => v.first().map(|f| f.k0),
            PlaneMembers::Vector(v) => v.first().map(|f| f.k0),
        }
    }

    fn kind(&self) -> BasisKind {
        match self {
            PlaneMembers::Scalar(_) => BasisKind::Scalar,
            PlaneMembers::Vector(_) => BasisKind::Vector,
        }
    }

    fn validate(&self) -> Result<()> {
        let grid = self.grid().ok_or_else(|| QmeError::invalid("basis plane has no members"))?;
        let k0 = self.k0().unwrap_or(0.0);
        let check = |g: &Grid, k: f64| -> Result<()> {
            grid.check_sampling(g, "basis member")?;
            if k != k0 {
                return Err(QmeError::invalid("basis members must share k0"));
            }
            Ok(())
        };
        match self {
            PlaneMembers::Scalar(v) => v.iter().try_for_each(|f| check(&f.grid, f.k0)),
            PlaneMembers::Vector(v) => v.iter().try_for_each(|f| check(&f.grid, f.k0)),
        }
    }
}

/// A sampled field of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Scalar(ScalarField),
    Vector(VectorField),
}

impl Field {
    pub fn grid(&self) -> Grid {
        match self {
            Field::Scalar(f) => f.grid,
            Field::Vector(f) => f.grid,
        }
    }

    /// `|u|²` for scalar fields, `|E|²` for vector fields.
    pub fn intensity(&self) -> ndarray::Array2<f64> {
        match self {
            Field::Scalar(f) => f.intensity(),
            Field::Vector(f) => f.electric_intensity(),
        }
    }
}

/// `N` basis beams on one or more planes. Coefficient index `i` always
/// refers to member `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamBasis {
    params: Vec<MemberParams>,
    planes: Vec<PlaneMembers>,
}

impl BeamBasis {
    pub fn new(params: Vec<MemberParams>, planes: Vec<PlaneMembers>) -> Result<Self> {
        let first = planes
            .first()
            .ok_or_else(|| QmeError::invalid("a basis needs at least one plane"))?;
        if params.is_empty() {
            return Err(QmeError::invalid("a basis needs at least one member"));
        }
        let kind = first.kind();
        let k0 = first.k0();
        for p in &planes {
            p.validate()?;
            if p.len() != params.len() {
                return Err(QmeError::invalid(format!(
                    "plane holds {} members, expected {}",
                    p.len(),
                    params.len()
                )));
            }
            if p.kind() != kind || p.k0() != k0 {
                return Err(QmeError::invalid("all planes must share field kind and k0"));
            }
        }
        Ok(BeamBasis { params, planes })
    }

    /// Laguerre-Gauss modes `(P, L)` of common waist, evaluated on each grid.
    pub fn lg(modes: &[(u32, i32)], w0: f64, k0: f64, grids: &[Grid]) -> Result<Self> {
        let planes = grids
            .iter()
            .map(|g| {
                modes
                    .iter()
                    .map(|&(p, l)| evaluate_lg(p as i64, l, w0, k0, g))
                    .collect::<Result<Vec<_>>>()
                    .map(PlaneMembers::Scalar)
            })
            .collect::<Result<Vec<_>>>()?;
        let params = modes.iter().map(|&(p, l)| MemberParams::Lg { p, l, w0 }).collect();
        BeamBasis::new(params, planes)
    }

    /// Radial family `P = 0..n-1` at fixed `L`.
    pub fn lg_radial(n: usize, l: i32, w0: f64, k0: f64, grids: &[Grid]) -> Result<Self> {
        let modes: Vec<(u32, i32)> = (0..n as u32).map(|p| (p, l)).collect();
        BeamBasis::lg(&modes, w0, k0, grids)
    }

    pub fn bessel(members: &[BesselParams], k0: f64, grids: &[Grid]) -> Result<Self> {
        let planes = grids
            .iter()
            .map(|g| {
                members
                    .iter()
                    .map(|p| evaluate_bessel_vector(p, k0, g))
                    .collect::<Result<Vec<_>>>()
                    .map(PlaneMembers::Vector)
            })
            .collect::<Result<Vec<_>>>()?;
        let params = members.iter().map(|&b| MemberParams::Bessel(b)).collect();
        BeamBasis::new(params, planes)
    }

    pub fn kind(&self) -> BasisKind {
        self.planes[0].kind()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn k0(&self) -> f64 {
        self.planes[0].k0().unwrap_or(0.0)
    }

    pub fn params(&self) -> &[MemberParams] {
        &self.params
    }

    pub fn planes(&self) -> &[PlaneMembers] {
        &self.planes
    }

    pub fn grids(&self) -> Vec<Grid> {
        self.planes.iter().filter_map(PlaneMembers::grid).collect()
    }

    /// Index of the plane sampled at height `z`.
    pub fn plane_at(&self, z: f64) -> Result<usize> {
        self.planes
            .iter()
            .position(|p| p.grid().is_some_and(|g| (g.z - z).abs() <= 1e-9 * z.abs().max(1.0)))
            .ok_or_else(|| QmeError::invalid(format!("basis has no plane at z={z}")))
    }

    /// Keep only the planes at the listed indices, in that order.
    pub fn select_planes(&self, indices: &[usize]) -> Result<BeamBasis> {
        let planes = indices
            .iter()
            .map(|&i| {
                self.planes
                    .get(i)
                    .cloned()
                    .ok_or_else(|| QmeError::invalid(format!("no plane {i}")))
            })
            .collect::<Result<Vec<_>>>()?;
        BeamBasis::new(self.params.clone(), planes)
    }

    /// x-polarized paraxial embedding (`E = u e_x`, `H = u e_y`).
    pub fn to_vector_paraxial(&self) -> Result<BeamBasis> {
        let planes = self
            .planes
            .iter()
            .map(|p| match p {
                PlaneMembers::Scalar(v) => Ok(PlaneMembers::Vector(
                    v.iter().map(VectorField::from_scalar_paraxial).collect(),
                )),
                PlaneMembers::Vector(_) => Err(QmeError::invalid("basis is already vectorial")),
            })
            .collect::<Result<Vec<_>>>()?;
        BeamBasis::new(self.params.clone(), planes)
    }

    /// `Σ a_i F_i` on plane `plane`.
    pub fn superpose(&self, plane: usize, coeffs: &[C64]) -> Result<Field> {
        match self.planes.get(plane) {
            Some(PlaneMembers::Scalar(v)) => ScalarField::superpose(v, coeffs).map(Field::Scalar),
            Some(PlaneMembers::Vector(v)) => VectorField::superpose(v, coeffs).map(Field::Vector),
            None => Err(QmeError::invalid(format!("no plane {plane}"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn params_round_trip_through_text() {
        let all = [
            MemberParams::Lg { p: 3, l: -2, w0: 1.25 },
            MemberParams::Bessel(BesselParams {
                theta: 0.1,
                l: 1,
                alpha: C64::new(1.0, 0.0),
                beta: C64::new(0.0, -1.0),
                e0: C64::new(0.3, 1e-17),
            }),
            MemberParams::Ring { r_in: 0.5, r_out: 1.0 / 3.0 },
            MemberParams::Custom,
        ];
        for p in all {
            let back: MemberParams = p.to_string().parse().unwrap();
            assert_eq!(back, p);
        }
        assert!("lg P=-1 L=0 w0=1".parse::<MemberParams>().is_err());
        assert!("wave k=1".parse::<MemberParams>().is_err());
    }

    #[test]
    fn construction_checks() {
        let g = Grid::square(8, 0.5, 0.0).unwrap();
        let g2 = Grid::square(9, 0.5, 1.0).unwrap();
        let b = BeamBasis::lg_radial(3, 0, 1.0, 2.0 * PI, &[g, g2]).unwrap();
        assert_eq!(b.len(), 3);
        assert_eq!(b.kind(), BasisKind::Scalar);
        assert_eq!(b.plane_at(1.0).unwrap(), 1);
        assert!(b.plane_at(0.5).is_err());
        let one = b.select_planes(&[1]).unwrap();
        assert_eq!(one.grids(), vec![g2]);

        let u = ScalarField::zeros(g, 2.0 * PI);
        let v = ScalarField::zeros(g2, 2.0 * PI);
        let mixed = PlaneMembers::Scalar(vec![u.clone(), v]);
        assert!(BeamBasis::new(vec![MemberParams::Custom; 2], vec![mixed]).is_err());
        let short = PlaneMembers::Scalar(vec![u]);
        assert!(BeamBasis::new(vec![MemberParams::Custom; 2], vec![short]).is_err());
    }

    #[test]
    fn superpose_and_embed() {
        let g = Grid::square(6, 0.5, 0.0).unwrap();
        let b = BeamBasis::lg_radial(2, 0, 1.0, 2.0 * PI, &[g]).unwrap();
        let c = [C64::new(1.0, 0.0), C64::new(0.0, 2.0)];
        let Field::Scalar(s) = b.superpose(0, &c).unwrap() else { panic!() };
        let v = b.to_vector_paraxial().unwrap();
        let Field::Vector(e) = v.superpose(0, &c).unwrap() else { panic!() };
        assert_eq!(s.values, e.e[0]);
        assert_eq!(s.values, e.h[1]);
        assert!(v.to_vector_paraxial().is_err());
    }
}
