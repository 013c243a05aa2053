//! Netpbm rasters: 8-bit intensity maps with an optional region outline,
//! 16-bit camera frames, and two-channel modulator patterns.
//!
//! Images are written with the largest y on the top row.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use ndarray::Array2;

use crate::bench::{CcdFrame, SlmPattern};
use crate::error::{QmeError, Result};
use crate::grid::Grid;
use crate::roi::Region;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Colormap {
    #[default]
    Gray,
    /// Black, red, yellow, white.
    Hot,
}

impl FromStr for Colormap {
    type Err = QmeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gray" | "grey" => Ok(Colormap::Gray),
            "hot" => Ok(Colormap::Hot),
            other => Err(QmeError::invalid(format!("unknown colormap '{other}'"))),
        }
    }
}

impl Colormap {
    fn rgb(self, t: f64) -> [u8; 3] {
        let q = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        match self {
            Colormap::Gray => [q(t); 3],
            Colormap::Hot => [q(3.0 * t), q(3.0 * t - 1.0), q(3.0 * t - 2.0)],
        }
    }
}

const OUTLINE: [u8; 3] = [255, 0, 0];

/// P6 image of `intensity / max`, outlining `roi` in red when given.
pub fn intensity_ppm(intensity: &Array2<f64>, grid: &Grid, colormap: Colormap, roi: Option<&Region>) -> Result<Vec<u8>> {
    if intensity.dim() != grid.shape() {
        return Err(QmeError::GridMismatch("raster data does not match its grid".into()));
    }
    if intensity.iter().any(|v| !v.is_finite()) {
        return Err(QmeError::invalid("raster data must be finite"));
    }
    let peak = intensity.iter().cloned().fold(0.0, f64::max);
    let (ny, nx) = grid.shape();
    let mut out = format!("P6\n{nx} {ny}\n255\n").into_bytes();
    let half = 0.5 * grid.dx.max(grid.dy);
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            let t = if peak > 0.0 { intensity[[iy, ix]] / peak } else { 0.0 };
            let mut px = colormap.rgb(t);
            if let Some(r) = roi {
                let (x, y) = (grid.x(ix), grid.y(iy));
                if on_outline(r, x, y, half) {
                    px = OUTLINE;
                }
            }
            out.extend_from_slice(&px);
        }
    }
    Ok(out)
}

fn on_outline(r: &Region, x: f64, y: f64, half: f64) -> bool {
    use crate::roi::Shape;
    let (dx, dy) = (x - r.center.0, y - r.center.1);
    let rho = dx.hypot(dy);
    match r.shape {
        Shape::Disk { r } => (rho - r).abs() < half,
        Shape::Annulus { r_in, r_out } => (rho - r_in).abs() < half || (rho - r_out).abs() < half,
        Shape::Rectangle { half_x, half_y } => {
            let inside = dx.abs() <= half_x + half && dy.abs() <= half_y + half;
            inside && ((dx.abs() - half_x).abs() < half || (dy.abs() - half_y).abs() < half)
        }
        Shape::FullPlane => false,
    }
}

pub fn write_intensity_ppm(
    path: &Path,
    intensity: &Array2<f64>,
    grid: &Grid,
    colormap: Colormap,
    roi: Option<&Region>,
) -> Result<()> {
    let bytes = intensity_ppm(intensity, grid, colormap, roi)?;
    fs::write(path, bytes).map_err(|e| QmeError::io(path, e))
}

/// P5 16-bit image of a camera frame. Counts are scaled so that the
/// saturation level (or the frame maximum when unbounded) maps to 65535;
/// the scale is recorded in a header comment.
pub fn frame_pgm16(frame: &CcdFrame) -> Vec<u8> {
    let top = if frame.saturation.is_finite() {
        frame.saturation
    } else {
        frame.counts.iter().cloned().fold(0.0, f64::max)
    };
    let scale = if top > 0.0 { 65535.0 / top } else { 0.0 };
    let (ny, nx) = frame.counts.dim();
    let mut out = format!("P5\n# counts_per_level {:e}\n{nx} {ny}\n65535\n", if scale > 0.0 { 1.0 / scale } else { 0.0 }).into_bytes();
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            let v = (frame.counts[[iy, ix]].max(0.0) * scale).round().min(65535.0) as u16;
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

pub fn write_frame_pgm16(path: &Path, frame: &CcdFrame) -> Result<()> {
    fs::write(path, frame_pgm16(frame)).map_err(|e| QmeError::io(path, e))
}

/// P6 pattern: green carries the phase, blue the amplitude, red is zero.
pub fn slm_ppm(pattern: &SlmPattern) -> Vec<u8> {
    let (ny, nx) = pattern.dim();
    let mut out = format!("P6\n{nx} {ny}\n255\n").into_bytes();
    for iy in (0..ny).rev() {
        for ix in 0..nx {
            out.extend_from_slice(&[0, pattern.phase[[iy, ix]], pattern.amplitude[[iy, ix]]]);
        }
    }
    out
}

/// Pair of P5 images `(amplitude, phase)`.
pub fn slm_pgm_pair(pattern: &SlmPattern) -> (Vec<u8>, Vec<u8>) {
    let one = |a: &Array2<u8>| {
        let (ny, nx) = a.dim();
        let mut out = format!("P5\n{nx} {ny}\n255\n").into_bytes();
        for iy in (0..ny).rev() {
            out.extend(a.row(iy).iter());
        }
        out
    };
    (one(&pattern.amplitude), one(&pattern.phase))
}

struct Netpbm<'a> {
    magic: &'a str,
    width: usize,
    height: usize,
    maxval: usize,
    data: &'a [u8],
}

fn parse_netpbm(bytes: &[u8]) -> Result<Netpbm<'_>> {
    const WHAT: &str = "netpbm image";
    let mut fields = Vec::new();
    let mut i = 0;
    while fields.len() < 4 {
        while i < bytes.len() && bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if i < bytes.len() && bytes[i] == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return Err(QmeError::format(WHAT, "truncated header"));
        }
        fields.push(std::str::from_utf8(&bytes[start..i]).map_err(|_| QmeError::format(WHAT, "bad header"))?);
    }
    // exactly one whitespace byte separates header and raster
    let data = bytes.get(i + 1..).ok_or_else(|| QmeError::format(WHAT, "no raster"))?;
    let num = |s: &str| s.parse::<usize>().map_err(|_| QmeError::format(WHAT, format!("bad number '{s}'")));
    Ok(Netpbm {
        magic: fields[0],
        width: num(fields[1])?,
        height: num(fields[2])?,
        maxval: num(fields[3])?,
        data,
    })
}

fn flip_rows(nx: usize, ny: usize, at: impl Fn(usize) -> u8) -> Array2<u8> {
    Array2::from_shape_fn((ny, nx), |(iy, ix)| at((ny - 1 - iy) * nx + ix))
}

pub fn read_slm_ppm(bytes: &[u8]) -> Result<SlmPattern> {
    let img = parse_netpbm(bytes)?;
    if img.magic != "P6" || img.maxval != 255 {
        return Err(QmeError::format("modulator pattern", "expected an 8-bit P6 image"));
    }
    let (nx, ny) = (img.width, img.height);
    if img.data.len() != 3 * nx * ny {
        return Err(QmeError::format("modulator pattern", "raster size mismatch"));
    }
    Ok(SlmPattern {
        amplitude: flip_rows(nx, ny, |k| img.data[3 * k + 2]),
        phase: flip_rows(nx, ny, |k| img.data[3 * k + 1]),
    })
}

pub fn read_slm_pgm_pair(amplitude: &[u8], phase: &[u8]) -> Result<SlmPattern> {
    let one = |bytes: &[u8]| -> Result<Array2<u8>> {
        let img = parse_netpbm(bytes)?;
        if img.magic != "P5" || img.maxval != 255 || img.data.len() != img.width * img.height {
            return Err(QmeError::format("modulator pattern", "expected an 8-bit P5 image"));
        }
        Ok(flip_rows(img.width, img.height, |k| img.data[k]))
    };
    let (a, p) = (one(amplitude)?, one(phase)?);
    if a.dim() != p.dim() {
        return Err(QmeError::format("modulator pattern", "channel sizes differ"));
    }
    Ok(SlmPattern { amplitude: a, phase: p })
}

pub fn write_slm_ppm(path: &Path, pattern: &SlmPattern) -> Result<()> {
    fs::write(path, slm_ppm(pattern)).map_err(|e| QmeError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{ScalarField, C64};

    fn pixels(img: &[u8]) -> &[u8] {
        parse_netpbm(img).unwrap().data
    }

    #[test]
    fn zero_field_is_black() {
        let g = Grid::square(5, 1.0, 0.0).unwrap();
        let img = intensity_ppm(&Array2::zeros((5, 5)), &g, Colormap::Hot, None).unwrap();
        assert!(pixels(&img).iter().all(|&b| b == 0));
    }

    #[test]
    fn gaussian_peaks_at_center() {
        let g = Grid::square(9, 0.5, 0.0).unwrap();
        let u = ScalarField::from_fn(g, 1.0, |x, y| C64::new((-(x * x + y * y)).exp(), 0.0));
        let img = intensity_ppm(&u.intensity(), &g, Colormap::Gray, None).unwrap();
        let px = pixels(&img);
        let center = 3 * (4 * 9 + 4);
        assert_eq!(px[center], 255);
        assert_eq!(px.iter().cloned().max(), Some(255));
        assert_eq!(px.iter().filter(|&&b| b == 255).count(), 3);
    }

    #[test]
    fn outline_is_drawn() {
        let g = Grid::square(41, 0.1, 0.0).unwrap();
        let img = intensity_ppm(&Array2::zeros((41, 41)), &g, Colormap::Gray, Some(&Region::disk(1.0).unwrap())).unwrap();
        let red = pixels(&img).chunks(3).filter(|p| p == &OUTLINE).count();
        assert!(red > 20);
        assert!(intensity_ppm(&Array2::from_elem((41, 41), f64::NAN), &g, Colormap::Gray, None).is_err());
    }

    #[test]
    fn modulator_rasters_round_trip() {
        let pat = SlmPattern {
            amplitude: Array2::from_shape_fn((3, 4), |(i, j)| (i * 40 + j) as u8),
            phase: Array2::from_shape_fn((3, 4), |(i, j)| (255 - i * 7 - j) as u8),
        };
        assert_eq!(read_slm_ppm(&slm_ppm(&pat)).unwrap(), pat);
        let (a, p) = slm_pgm_pair(&pat);
        assert_eq!(read_slm_pgm_pair(&a, &p).unwrap(), pat);
    }

    #[test]
    fn frame_uses_full_depth() {
        let g = Grid::square(2, 1.0, 0.0).unwrap();
        let frame = CcdFrame {
            grid: g,
            counts: ndarray::arr2(&[[0.0, 2.0], [1.0, 4.0]]),
            floor: 0.0,
            saturation: f64::INFINITY,
        };
        let img = frame_pgm16(&frame);
        let px = parse_netpbm(&img).unwrap();
        assert_eq!(px.maxval, 65535);
        let top_right = u16::from_be_bytes([px.data[2], px.data[3]]);
        assert_eq!(top_right, 65535);
    }
}
