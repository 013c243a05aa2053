//! Measure matrices: overlap integrals of basis members over a region of
//! interest, with a pointwise kernel that makes the measure quadratic.
//!
//! Every integrand is written in its explicitly Hermitian form (for vector
//! fields the time-averaged quantities are real parts of bilinear forms),
//! and the assembled array is then symmetrized as `(A + Aᴴ)/2`.

use std::fmt;

use ndarray::{Array1, Array2};

use crate::basis::{BasisKind, BeamBasis, PlaneMembers};
use crate::eigen::eig_hermitian;
use crate::error::{QmeError, Result};
use crate::field::C64;
use crate::roi::RegionOfInterest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Which quadratic measure a matrix represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureTag {
    /// Power through the region.
    Io,
    /// Second moment `|r − r0|²` of the power.
    Sso,
    /// Electromagnetic energy density.
    Eo,
    /// Optical chirality density.
    Cso,
    /// Momentum flux (force) component.
    Force(Axis),
}

impl fmt::Display for MeasureTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeasureTag::Io => f.write_str("IO"),
            MeasureTag::Sso => f.write_str("SSO"),
            MeasureTag::Eo => f.write_str("EO"),
            MeasureTag::Cso => f.write_str("CSO"),
            MeasureTag::Force(Axis::X) => f.write_str("OFO_x"),
            MeasureTag::Force(Axis::Y) => f.write_str("OFO_y"),
            MeasureTag::Force(Axis::Z) => f.write_str("OFO_z"),
        }
    }
}

impl std::str::FromStr for MeasureTag {
    type Err = QmeError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "IO" => MeasureTag::Io,
            "SSO" => MeasureTag::Sso,
            "EO" => MeasureTag::Eo,
            "CSO" => MeasureTag::Cso,
            "OFO_x" => MeasureTag::Force(Axis::X),
            "OFO_y" => MeasureTag::Force(Axis::Y),
            "OFO_z" => MeasureTag::Force(Axis::Z),
            other => return Err(QmeError::format("measure tag", format!("unknown tag '{other}'"))),
        })
    }
}

/// Hermitian `N×N` (or `K×K` in a normalized base) measure matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasureMatrix {
    pub tag: MeasureTag,
    pub entries: Array2<C64>,
    /// Region spec the matrix was integrated over.
    pub roi: String,
    /// Fingerprint of the basis (parameters and sampling).
    pub basis_hash: u64,
    /// `max |A − Aᴴ|` of the raw overlap array before symmetrization.
    pub raw_asymmetry: f64,
}

impl MeasureMatrix {
    /// Wrap an arbitrary array, symmetrizing it.
    pub fn from_raw(tag: MeasureTag, raw: Array2<C64>, roi: String, basis_hash: u64) -> Result<Self> {
        let (n, m) = raw.dim();
        if n != m || n == 0 {
            return Err(QmeError::invalid(format!("measure matrix must be square and non-empty, got {n}x{m}")));
        }
        if raw.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(QmeError::invalid("measure matrix has non-finite entries"));
        }
        let adj = raw.t().mapv(|v| v.conj());
        let raw_asymmetry = raw.iter().zip(adj.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let mut entries = (&raw + &adj) * C64::new(0.5, 0.0);
        for k in 0..n {
            entries[[k, k]].im = 0.0;
        }
        Ok(MeasureMatrix {
            tag,
            entries,
            roi,
            basis_hash,
            raw_asymmetry,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// `a* M a`.
    pub fn quadratic(&self, a: &Array1<C64>) -> C64 {
        a.mapv(|v| v.conj()).dot(&self.entries.dot(a))
    }
}

/// Intensity-normalized base: the retained intensity eigenmodes, each
/// scaled to unit ROI intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedBase {
    /// `N×K`; column `k` is `v_k / sqrt(λ_k)`.
    pub transform: Array2<C64>,
    /// Retained intensity eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    /// Retained intensity eigenvectors (`N×K`, unit norm).
    pub eigenvectors: Array2<C64>,
    pub tau: f64,
    /// Sum of all intensity eigenvalues (the trace of the IO matrix).
    pub total: f64,
    pub basis_hash: u64,
}

impl NormalizedBase {
    /// Number of retained modes `K`.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Number of original members `N`.
    pub fn original_len(&self) -> usize {
        self.transform.nrows()
    }
}

/// Keep intensity eigenmodes with `λ_k >= τ Σ_j λ_j` and rescale them to
/// unit ROI intensity.
pub fn normalized_base(m0: &MeasureMatrix, tau: f64) -> Result<NormalizedBase> {
    if m0.tag != MeasureTag::Io {
        return Err(QmeError::invalid(format!("normalized base needs an IO matrix, got {}", m0.tag)));
    }
    if !(0.0..1.0).contains(&tau) {
        return Err(QmeError::invalid(format!("threshold fraction must lie in [0, 1), got {tau}")));
    }
    let sol = eig_hermitian(&m0.entries)?;
    let total: f64 = sol.values.iter().sum();
    let keep: Vec<usize> = (0..sol.len())
        .filter(|&k| sol.values[k] > 0.0 && sol.values[k] >= tau * total)
        .collect();
    if keep.is_empty() {
        return Err(QmeError::EmptyBase { tau });
    }
    let n = sol.len();
    let mut transform = Array2::zeros((n, keep.len()));
    let mut eigenvectors = Array2::zeros((n, keep.len()));
    for (col, &k) in keep.iter().enumerate() {
        let s = 1.0 / sol.values[k].sqrt();
        for i in 0..n {
            eigenvectors[[i, col]] = sol.vectors[[i, k]];
            transform[[i, col]] = sol.vectors[[i, k]] * s;
        }
    }
    Ok(NormalizedBase {
        transform,
        eigenvalues: keep.iter().map(|&k| sol.values[k]).collect(),
        eigenvectors,
        tau,
        total,
        basis_hash: m0.basis_hash,
    })
}

/// Field component used by an overlap term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Comp {
    U,
    E(usize),
    H(usize),
}

/// `Σ coef · conj(left_i) · right_j`.
type Terms = Vec<(C64, Comp, Comp)>;

fn flux_terms() -> Terms {
    // ½[(E_i* × H_j) + (E_j × H_i*)]·z
    let h = C64::new(0.5, 0.0);
    vec![
        (h, Comp::E(0), Comp::H(1)),
        (-h, Comp::E(1), Comp::H(0)),
        (h, Comp::H(1), Comp::E(0)),
        (-h, Comp::H(0), Comp::E(1)),
    ]
}

fn energy_terms() -> Terms {
    let h = C64::new(0.5, 0.0);
    (0..3)
        .flat_map(|c| [(h, Comp::E(c), Comp::E(c)), (h, Comp::H(c), Comp::H(c))])
        .collect()
}

fn chirality_terms() -> Terms {
    // (i/2)(E_i*·H_j − H_i*·E_j)
    let h = C64::new(0.0, 0.5);
    (0..3)
        .flat_map(|c| [(h, Comp::E(c), Comp::H(c)), (-h, Comp::H(c), Comp::E(c))])
        .collect()
}

fn stress_terms(axis: Axis) -> Terms {
    // Time-averaged stress T_cz = ½Re(E_c* E_z + H_c* H_z) − ¼δ_cz(|E|² + |H|²),
    // written as ¼(a_c* b_z + a_z* b_c) so the kernel is Hermitian.
    let c = axis.index();
    let q = C64::new(0.25, 0.0);
    let mut t: Terms = Vec::new();
    for (l, r) in [(Comp::E(c), Comp::E(2)), (Comp::H(c), Comp::H(2))] {
        t.push((q, l, r));
        t.push((q, r, l));
    }
    if axis == Axis::Z {
        for k in 0..3 {
            t.push((-q, Comp::E(k), Comp::E(k)));
            t.push((-q, Comp::H(k), Comp::H(k)));
        }
    }
    t
}

fn component(members: &PlaneMembers, i: usize, comp: Comp) -> Result<&Array2<C64>> {
    match (members, comp) {
        (PlaneMembers::Scalar(v), Comp::U) => Ok(&v[i].values),
        (PlaneMembers::Vector(v), Comp::E(k)) => Ok(&v[i].e[k]),
        (PlaneMembers::Vector(v), Comp::H(k)) => Ok(&v[i].h[k]),
        _ => Err(QmeError::UnsupportedKernel("kernel does not match the basis kind")),
    }
}

/// `A_ij = Σ_planes sign_p Σ_pixels w·κ(x,y) Σ_t coef_t conj(L_t,i) R_t,j`.
fn overlap(
    basis: &BeamBasis,
    plane_weights: &[(usize, Array2<f64>, f64)],
    kernel: &dyn Fn(usize, f64, f64) -> f64,
    terms: &Terms,
) -> Result<Array2<C64>> {
    let n = basis.len();
    let mut acc = Array2::<C64>::zeros((n, n));
    for (plane, weights, sign) in plane_weights {
        let members = &basis.planes()[*plane];
        let grid = members.grid().ok_or_else(|| QmeError::invalid("empty plane"))?;
        if weights.dim() != grid.shape() {
            return Err(QmeError::GridMismatch("region weights vs basis plane".into()));
        }
        let (xs, ys) = (grid.xs(), grid.ys());
        let pixels: Vec<((usize, usize), f64)> = weights
            .indexed_iter()
            .filter(|(_, &w)| w > 0.0)
            .map(|((iy, ix), &w)| ((iy, ix), w * kernel(*plane, xs[ix], ys[iy]) * sign))
            .filter(|(_, w)| *w != 0.0)
            .collect();
        if pixels.is_empty() {
            continue;
        }
        let gather = |comp: Comp| -> Result<Array2<C64>> {
            let mut out = Array2::zeros((pixels.len(), n));
            for i in 0..n {
                let arr = component(members, i, comp)?;
                for (p, (idx, _)) in pixels.iter().enumerate() {
                    out[[p, i]] = arr[*idx];
                }
            }
            Ok(out)
        };
        let w = Array1::from_iter(pixels.iter().map(|(_, w)| *w));
        let mut cache: Vec<(Comp, Array2<C64>)> = Vec::new();
        let mut get = |comp: Comp| -> Result<Array2<C64>> {
            if let Some((_, a)) = cache.iter().find(|(c, _)| *c == comp) {
                return Ok(a.clone());
            }
            let a = gather(comp)?;
            cache.push((comp, a.clone()));
            Ok(a)
        };
        for &(coef, lc, rc) in terms {
            let left = get(lc)?;
            let mut right = get(rc)?;
            for (mut row, &wp) in right.rows_mut().into_iter().zip(w.iter()) {
                row.mapv_inplace(|v| v * wp);
            }
            let block = left.t().mapv(|v| v.conj()).dot(&right);
            acc.scaled_add(coef, &block);
        }
    }
    Ok(acc)
}

fn region_weights(basis: &BeamBasis, roi: &RegionOfInterest) -> Result<Vec<(usize, Array2<f64>, f64)>> {
    let planes = roi.planes();
    let grids = planes
        .iter()
        .map(|p| basis.plane_at(p.z).map(|i| (i, basis.grids()[i])))
        .collect::<Result<Vec<_>>>()?;
    let masks = roi.masks(&grids.iter().map(|(_, g)| *g).collect::<Vec<_>>())?;
    Ok(grids.into_iter().zip(masks).map(|((i, _), m)| (i, m, 1.0)).collect())
}

fn intensity_terms(basis: &BeamBasis) -> Terms {
    match basis.kind() {
        BasisKind::Scalar => vec![(C64::new(1.0, 0.0), Comp::U, Comp::U)],
        BasisKind::Vector => flux_terms(),
    }
}

/// Intensity operator `M⁰`: `∫ u_i* u_j dS` (scalar) or
/// `½∫(E_i* × H_j + E_j × H_i*)·e_z dS` (vector). Plane stacks integrate
/// over the volume.
pub fn assemble_io(basis: &BeamBasis, roi: &RegionOfInterest) -> Result<MeasureMatrix> {
    let weights = region_weights(basis, roi)?;
    let raw = overlap(basis, &weights, &|_, _, _| 1.0, &intensity_terms(basis))?;
    MeasureMatrix::from_raw(MeasureTag::Io, raw, roi.to_string(), basis_hash(basis))
}

/// Second-moment operator in the original basis, kernel `|r − r0|²` on the
/// intensity (scalar) or power flux (vector) integrand.
pub fn assemble_second_moment(basis: &BeamBasis, roi: &RegionOfInterest, r0: (f64, f64)) -> Result<MeasureMatrix> {
    let weights = region_weights(basis, roi)?;
    let kernel = |_: usize, x: f64, y: f64| (x - r0.0).powi(2) + (y - r0.1).powi(2);
    let raw = overlap(basis, &weights, &kernel, &intensity_terms(basis))?;
    MeasureMatrix::from_raw(MeasureTag::Sso, raw, roi.to_string(), basis_hash(basis))
}

/// Spot-size operator `M²` expressed in the normalized base.
pub fn assemble_sso(
    basis: &BeamBasis,
    roi: &RegionOfInterest,
    r0: (f64, f64),
    base: &NormalizedBase,
) -> Result<MeasureMatrix> {
    let hash = basis_hash(basis);
    if base.basis_hash != hash || base.original_len() != basis.len() {
        return Err(QmeError::invalid("normalized base was built from a different basis"));
    }
    let full = assemble_second_moment(basis, roi, r0)?;
    let t = &base.transform;
    let projected = t.t().mapv(|v| v.conj()).dot(&full.entries).dot(t);
    MeasureMatrix::from_raw(MeasureTag::Sso, projected, full.roi, hash)
}

/// Energy (`½(E*·E + H*·H)`) or chirality (`(i/2)(E*·H − H*·E)`) density
/// integrated over the region. Vector bases only.
pub fn assemble_local_kernel(basis: &BeamBasis, roi: &RegionOfInterest, kernel: MeasureTag) -> Result<MeasureMatrix> {
    if basis.kind() != BasisKind::Vector {
        return Err(QmeError::UnsupportedKernel("energy and chirality kernels need a vector basis"));
    }
    let terms = match kernel {
        MeasureTag::Eo => energy_terms(),
        MeasureTag::Cso => chirality_terms(),
        _ => return Err(QmeError::UnsupportedKernel("local kernel must be EO or CSO")),
    };
    let weights = region_weights(basis, roi)?;
    let raw = overlap(basis, &weights, &|_, _, _| 1.0, &terms)?;
    MeasureMatrix::from_raw(kernel, raw, roi.to_string(), basis_hash(basis))
}

/// Force operators from the time-averaged Maxwell stress tensor over two
/// parallel regions bracketing a volume. The lower plane has outward normal
/// `-e_z`, the upper one `+e_z`; flux through the lateral sides is neglected.
pub fn assemble_force(
    basis: &BeamBasis,
    lower: &crate::roi::Region,
    upper: &crate::roi::Region,
) -> Result<[MeasureMatrix; 3]> {
    if basis.kind() != BasisKind::Vector {
        return Err(QmeError::UnsupportedKernel("force operators need a vector basis"));
    }
    if upper.z <= lower.z {
        return Err(QmeError::invalid("upper force plane must lie above the lower one"));
    }
    let grids = basis.grids();
    let li = basis.plane_at(lower.z)?;
    let ui = basis.plane_at(upper.z)?;
    let weights = vec![(li, lower.mask(&grids[li])?, -1.0), (ui, upper.mask(&grids[ui])?, 1.0)];
    let roi = format!("pair[{lower};{upper}]");
    let hash = basis_hash(basis);
    let build = |axis: Axis| -> Result<MeasureMatrix> {
        let raw = overlap(basis, &weights, &|_, _, _| 1.0, &stress_terms(axis))?;
        MeasureMatrix::from_raw(MeasureTag::Force(axis), raw, roi.clone(), hash)
    };
    Ok([build(Axis::X)?, build(Axis::Y)?, build(Axis::Z)?])
}

/// FNV-1a fingerprint of the member parameters and plane sampling.
pub fn basis_hash(basis: &BeamBasis) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut eat = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    eat(basis.kind().to_string().as_bytes());
    eat(&basis.k0().to_le_bytes());
    for p in basis.params() {
        eat(p.to_string().as_bytes());
    }
    for g in basis.grids() {
        for v in [g.nx as f64, g.ny as f64, g.dx, g.dy, g.x0, g.y0, g.z] {
            eat(&v.to_le_bytes());
        }
    }
    h
}
