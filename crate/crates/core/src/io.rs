//! On-disk formats: field bundles, measure matrices, eigen tables and
//! optimization reports.
//!
//! A field bundle is a directory holding `manifest.txt` (one `key value`
//! pair per line) and `member_<i>.bin` per basis member. Each payload is the
//! member's planes in manifest order; per plane one array (scalar) or six
//! (`Ex Ey Ez Hx Hy Hz`) of little-endian f64 `(re, im)` pairs, row-major
//! with y outer. Floats in text use Rust's shortest round-trip notation, so
//! reading a bundle back is bit-exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use crate::basis::{BasisKind, BeamBasis, MemberParams, PlaneMembers};
use crate::eigen::EigenSolution;
use crate::error::{QmeError, Result};
use crate::field::{ScalarField, VectorField, C64};
use crate::grid::Grid;
use crate::operators::MeasureMatrix;

const BUNDLE_MAGIC: &str = "qme-bundle 1";
const MATRIX_MAGIC: &str = "qme-matrix 1";

/// Ordered `key value` lines.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KeyValues {
    entries: Vec<(String, String)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    /// Replace the value of `key`, appending it if absent.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        match self.entries.iter_mut().find(|(k, _)| k == key) {
            Some(e) => e.1 = value.to_string(),
            None => self.push(key, value),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn require(&self, what: &'static str, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| QmeError::format(what, format!("missing key '{key}'")))
    }

    pub fn parse_as<T: std::str::FromStr>(&self, what: &'static str, key: &str) -> Result<T> {
        let v = self.require(what, key)?;
        v.parse()
            .map_err(|_| QmeError::format(what, format!("bad value '{v}' for '{key}'")))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    /// Blank lines and lines starting with `#` are skipped; the value is
    /// everything after the first run of whitespace.
    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| match l.split_once(char::is_whitespace) {
                Some((k, v)) => (k.to_string(), v.trim().to_string()),
                None => (l.to_string(), String::new()),
            })
            .collect();
        KeyValues { entries }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k} {v}");
        }
        s
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| QmeError::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| QmeError::io(path, e))
}

fn push_complex(buf: &mut Vec<u8>, values: &Array2<C64>) {
    // iteration order of a standard-layout array is row-major, y outer
    for v in values.iter() {
        buf.extend_from_slice(&v.re.to_le_bytes());
        buf.extend_from_slice(&v.im.to_le_bytes());
    }
}

fn take_complex(bytes: &[u8], offset: &mut usize, shape: (usize, usize)) -> Result<Array2<C64>> {
    let n = shape.0 * shape.1;
    let end = *offset + 16 * n;
    let chunk = bytes
        .get(*offset..end)
        .ok_or_else(|| QmeError::format("binary payload", format!("expected at least {end} bytes, found {}", bytes.len())))?;
    *offset = end;
    let vals = chunk
        .chunks_exact(16)
        .map(|c| {
            let re = f64::from_le_bytes(c[..8].try_into().expect("8 bytes"));
            let im = f64::from_le_bytes(c[8..].try_into().expect("8 bytes"));
            C64::new(re, im)
        })
        .collect();
    Ok(Array2::from_shape_vec(shape, vals).expect("length checked"))
}

fn member_path(dir: &Path, i: usize) -> PathBuf {
    dir.join(format!("member_{i}.bin"))
}

/// Write `basis` as a bundle directory (created if needed).
pub fn write_bundle(basis: &BeamBasis, dir: &Path) -> Result<()> {
    let grids = basis.grids();
    let g0 = grids[0];
    if grids.iter().any(|g| !g.same_sampling(&g0)) {
        return Err(QmeError::invalid("bundles require one transverse sampling shared by all planes"));
    }
    fs::create_dir_all(dir).map_err(|e| QmeError::io(dir, e))?;
    let mut kv = KeyValues::new();
    kv.push("format", BUNDLE_MAGIC);
    kv.push("kind", basis.kind());
    kv.push("nx", g0.nx);
    kv.push("ny", g0.ny);
    kv.push("dx", g0.dx);
    kv.push("dy", g0.dy);
    kv.push("x0", g0.x0);
    kv.push("y0", g0.y0);
    kv.push("z", g0.z);
    kv.push(
        "planes",
        grids.iter().map(|g| g.z.to_string()).collect::<Vec<_>>().join(" "),
    );
    kv.push("k0", basis.k0());
    kv.push("N", basis.len());
    for (i, p) in basis.params().iter().enumerate() {
        kv.push(&format!("member.{i}"), p);
    }
    write_bytes(&dir.join("manifest.txt"), kv.to_text().as_bytes())?;

    for i in 0..basis.len() {
        let mut buf = Vec::new();
        for plane in basis.planes() {
            match plane {
                PlaneMembers::Scalar(v) => push_complex(&mut buf, &v[i].values),
                PlaneMembers::Vector(v) => {
                    for a in v[i].e.iter().chain(v[i].h.iter()) {
                        push_complex(&mut buf, a);
                    }
                }
            }
        }
        write_bytes(&member_path(dir, i), &buf)?;
    }
    Ok(())
}

/// Read a bundle directory written by [`write_bundle`].
pub fn read_bundle(dir: &Path) -> Result<BeamBasis> {
    const WHAT: &str = "bundle manifest";
    let kv = KeyValues::parse(&read_text(&dir.join("manifest.txt"))?);
    if kv.get("format") != Some(BUNDLE_MAGIC) {
        return Err(QmeError::format(WHAT, format!("{} is not a field bundle", dir.display())));
    }
    let kind = match kv.require(WHAT, "kind")? {
        "scalar" => BasisKind::Scalar,
        "vector" => BasisKind::Vector,
        other => return Err(QmeError::format(WHAT, format!("unknown kind '{other}'"))),
    };
    let grid = Grid::new(
        kv.parse_as(WHAT, "nx")?,
        kv.parse_as(WHAT, "ny")?,
        kv.parse_as(WHAT, "dx")?,
        kv.parse_as(WHAT, "dy")?,
        (kv.parse_as(WHAT, "x0")?, kv.parse_as(WHAT, "y0")?),
        kv.parse_as(WHAT, "z")?,
    )?;
    let zs = kv
        .require(WHAT, "planes")?
        .split_whitespace()
        .map(|t| t.parse::<f64>().map_err(|_| QmeError::format(WHAT, format!("bad plane height '{t}'"))))
        .collect::<Result<Vec<_>>>()?;
    if zs.is_empty() {
        return Err(QmeError::format(WHAT, "no planes listed"));
    }
    let k0: f64 = kv.parse_as(WHAT, "k0")?;
    let n: usize = kv.parse_as(WHAT, "N")?;
    let params = (0..n)
        .map(|i| kv.require(WHAT, &format!("member.{i}"))?.parse::<MemberParams>())
        .collect::<Result<Vec<_>>>()?;

    let shape = grid.shape();
    let mut planes: Vec<PlaneMembers> = zs
        .iter()
        .map(|_| match kind {
            BasisKind::Scalar => PlaneMembers::Scalar(Vec::with_capacity(n)),
            BasisKind::Vector => PlaneMembers::Vector(Vec::with_capacity(n)),
        })
        .collect();
    for i in 0..n {
        let path = member_path(dir, i);
        let bytes = fs::read(&path).map_err(|e| QmeError::io(&path, e))?;
        let mut off = 0;
        for (plane, &z) in planes.iter_mut().zip(zs.iter()) {
            let g = grid.at_z(z);
            match plane {
                PlaneMembers::Scalar(v) => v.push(ScalarField::new(g, k0, take_complex(&bytes, &mut off, shape)?)?),
                PlaneMembers::Vector(v) => {
                    let mut comps = Vec::with_capacity(6);
                    for _ in 0..6 {
                        comps.push(take_complex(&bytes, &mut off, shape)?);
                    }
                    let h: [Array2<C64>; 3] = comps.split_off(3).try_into().expect("three components");
                    let e: [Array2<C64>; 3] = comps.try_into().expect("three components");
                    v.push(VectorField::new(g, k0, e, h)?);
                }
            }
        }
        if off != bytes.len() {
            return Err(QmeError::format("binary payload", format!("{} has {} trailing bytes", path.display(), bytes.len() - off)));
        }
    }
    BeamBasis::new(params, planes)
}

fn matrix_bytes(header: &KeyValues, entries: &Array2<C64>) -> Vec<u8> {
    let mut buf = header.to_text().into_bytes();
    buf.extend_from_slice(b"data\n");
    push_complex(&mut buf, &entries.as_standard_layout().to_owned());
    buf
}

fn split_matrix(bytes: &[u8], path: &Path) -> Result<(KeyValues, Array2<C64>)> {
    const WHAT: &str = "matrix file";
    let marker = b"\ndata\n";
    let pos = bytes
        .windows(marker.len())
        .position(|w| w == marker)
        .ok_or_else(|| QmeError::format(WHAT, format!("{} has no data section", path.display())))?;
    let text = std::str::from_utf8(&bytes[..pos]).map_err(|_| QmeError::format(WHAT, "header is not UTF-8"))?;
    let kv = KeyValues::parse(text);
    if kv.get("format") != Some(MATRIX_MAGIC) {
        return Err(QmeError::format(WHAT, format!("{} is not a matrix file", path.display())));
    }
    let rows: usize = kv.parse_as(WHAT, "rows")?;
    let cols: usize = kv.parse_as(WHAT, "cols")?;
    let payload = &bytes[pos + marker.len()..];
    let mut off = 0;
    let m = take_complex(payload, &mut off, (rows, cols))?;
    if off != payload.len() {
        return Err(QmeError::format(WHAT, "trailing bytes after payload"));
    }
    Ok((kv, m))
}

/// Text header (tag, N, roi, basis hash) followed by the row-major
/// `(re, im)` payload.
pub fn write_matrix(m: &MeasureMatrix, path: &Path) -> Result<()> {
    let mut kv = KeyValues::new();
    kv.push("format", MATRIX_MAGIC);
    kv.push("tag", m.tag);
    kv.push("N", m.dim());
    kv.push("rows", m.dim());
    kv.push("cols", m.dim());
    kv.push("roi", &m.roi);
    kv.push("basis_hash", format!("{:016x}", m.basis_hash));
    kv.push("raw_asymmetry", m.raw_asymmetry);
    write_bytes(path, &matrix_bytes(&kv, &m.entries))
}

pub fn read_matrix(path: &Path) -> Result<MeasureMatrix> {
    const WHAT: &str = "matrix file";
    let bytes = fs::read(path).map_err(|e| QmeError::io(path, e))?;
    let (kv, entries) = split_matrix(&bytes, path)?;
    let hash = u64::from_str_radix(kv.require(WHAT, "basis_hash")?, 16)
        .map_err(|_| QmeError::format(WHAT, "bad basis hash"))?;
    let mut m = MeasureMatrix::from_raw(kv.parse_as(WHAT, "tag")?, entries, kv.require(WHAT, "roi")?.to_string(), hash)?;
    m.raw_asymmetry = kv.parse_as(WHAT, "raw_asymmetry")?;
    Ok(m)
}

/// Ordered eigenvalue table.
pub fn eigen_table(sol: &EigenSolution) -> String {
    let mut s = String::from("# index eigenvalue\n");
    for (k, v) in sol.values.iter().enumerate() {
        let _ = writeln!(s, "{k} {v:e}");
    }
    s
}

/// Write `eigenvalues.txt` and `eigenvectors.bin` (columns are the
/// eigenvectors, same layout as a matrix file) into `dir`.
pub fn write_eigen(sol: &EigenSolution, source: &MeasureMatrix, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| QmeError::io(dir, e))?;
    write_bytes(&dir.join("eigenvalues.txt"), eigen_table(sol).as_bytes())?;
    let mut kv = KeyValues::new();
    kv.push("format", MATRIX_MAGIC);
    kv.push("tag", source.tag);
    kv.push("N", sol.len());
    kv.push("rows", sol.vectors.nrows());
    kv.push("cols", sol.vectors.ncols());
    kv.push("roi", &source.roi);
    kv.push("basis_hash", format!("{:016x}", source.basis_hash));
    kv.push("content", "eigenvectors");
    write_bytes(&dir.join("eigenvectors.bin"), &matrix_bytes(&kv, &sol.vectors))
}

/// Parse an eigenvalue table back into ordered values.
pub fn read_eigen_table(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_whitespace()
                .nth(1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| QmeError::format("eigenvalue table", format!("bad line '{l}'")))
        })
        .collect()
}

/// Write text to a file, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| QmeError::io(parent, e))?;
    }
    write_bytes(path, text.as_bytes())
}

/// Collect `key value` pairs into a map, last one wins.
pub fn key_map(kv: &KeyValues) -> BTreeMap<String, String> {
    kv.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}
