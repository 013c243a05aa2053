//! Run configuration shared by the command-line front end and the examples.
//!
//! A configuration is a flat list of `key value` lines; every run echoes
//! the configuration it used so the run can be repeated from that file
//! alone.

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::basis::BeamBasis;
use crate::bench::BenchConfig;
use crate::error::{QmeError, Result};
use crate::grid::Grid;
use crate::io::KeyValues;
use crate::pipelines::{bessel_na_family, DEFAULT_TAU};
use crate::roi::{parse_region, Region};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QME_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Assemble,
    Eig,
    Optimize,
    Sweep,
    Bench,
    Analyze,
}

impl Command {
    const ALL: [(Command, &'static str); 7] = [
        (Command::Synth, "synth"),
        (Command::Assemble, "assemble"),
        (Command::Eig, "eig"),
        (Command::Optimize, "optimize"),
        (Command::Sweep, "sweep"),
        (Command::Bench, "bench"),
        (Command::Analyze, "analyze"),
    ];
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = Command::ALL.iter().find(|(c, _)| c == self).map(|(_, n)| *n).unwrap_or("?");
        f.write_str(name)
    }
}

impl FromStr for Command {
    type Err = QmeError;

    fn from_str(s: &str) -> Result<Self> {
        Command::ALL
            .iter()
            .find(|(_, n)| *n == s)
            .map(|(c, _)| *c)
            .ok_or_else(|| QmeError::invalid(format!("unknown command '{s}'")))
    }
}

/// Family of generated basis beams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisFamily {
    /// Radial Laguerre-Gauss family `P = 0..N-1` at fixed `L`.
    Lg,
    /// Vector Bessel beams with cone angles up to `asin(NA)`.
    Bessel,
    /// Ring masks on the simulated bench.
    Rings,
}

impl fmt::Display for BasisFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BasisFamily::Lg => "lg",
            BasisFamily::Bessel => "bessel",
            BasisFamily::Rings => "rings",
        })
    }
}

impl FromStr for BasisFamily {
    type Err = QmeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lg" => Ok(BasisFamily::Lg),
            "bessel" => Ok(BasisFamily::Bessel),
            "rings" => Ok(BasisFamily::Rings),
            other => Err(QmeError::invalid(format!("unknown basis '{other}'"))),
        }
    }
}

/// Inclusive range `start..stop` with a step, written `start..stop[:step]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Range {
    /// Values from `start` toward `stop` (either direction).
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.stop - self.start).abs() / self.step + 1e-9).floor() as usize;
        let dir = if self.stop >= self.start { 1.0 } else { -1.0 };
        (0..=n).map(|i| self.start + dir * self.step * i as f64).collect()
    }
}

impl fmt::Display for Range {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}:{}", self.start, self.stop, self.step)
    }
}

impl FromStr for Range {
    type Err = QmeError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || QmeError::invalid(format!("range '{s}' is not start..stop[:step]"));
        let (span, step) = match s.split_once(':') {
            Some((a, b)) => (a, b.parse().map_err(|_| bad())?),
            None => (s, 1.0),
        };
        let (a, b) = span.split_once("..").ok_or_else(bad)?;
        let r = Range {
            start: a.parse().map_err(|_| bad())?,
            stop: b.parse().map_err(|_| bad())?,
            step,
        };
        if !(r.step > 0.0) {
            return Err(bad());
        }
        Ok(r)
    }
}

/// What a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Sweep {
    /// Disk radius, spot-size optimization.
    Radius(Range),
    /// Number of radial modes, transmission optimization.
    Modes(Range),
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSpec {
    pub slm: usize,
    pub ccd: usize,
    pub rings: usize,
    pub fill: f64,
    /// Target first-zero radius of the reference beam, camera pixels.
    pub r_b: f64,
    pub quantize: bool,
    pub floor: f64,
    pub noise: f64,
    pub seed: u64,
    /// ROI radius of the single optimization, camera pixels.
    pub r: f64,
}

impl Default for BenchSpec {
    fn default() -> Self {
        BenchSpec {
            slm: 1024,
            ccd: 128,
            rings: 11,
            fill: 0.5,
            r_b: 10.0,
            quantize: true,
            floor: 0.0,
            noise: 0.0,
            seed: 0,
            r: 7.0,
        }
    }
}

impl BenchSpec {
    pub fn bench_config(&self) -> BenchConfig {
        let mut cfg = BenchConfig::pixel_units(self.slm, self.ccd);
        cfg.quantize = self.quantize;
        cfg.ccd.floor = self.floor;
        cfg.ccd.noise_sigma = self.noise;
        cfg.ccd.seed = self.seed;
        cfg.uniform_radius = (self.ccd as f64 * 0.4).min(5.0 * self.r_b);
        cfg
    }
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub basis: BasisFamily,
    pub n: usize,
    pub l: i32,
    pub w0: f64,
    pub na: f64,
    /// Samples per side and pitch of the square grid.
    pub grid_n: usize,
    pub grid_pitch: f64,
    pub planes: Vec<f64>,
    pub roi: String,
    /// Optional second region for force measures (upper plane).
    pub roi_upper: Option<String>,
    pub r0: (f64, f64),
    pub sweep: Option<Sweep>,
    /// Measure name: transmission, spotsize, IO, SSO, EO, CSO, OFO.
    pub measure: String,
    pub tau: f64,
    /// Spectral band fraction for the super-oscillation analysis.
    pub eps: f64,
    pub input: Option<PathBuf>,
    pub out: PathBuf,
    /// Lengths are in wavelengths unless this is set (metres per unit).
    pub wavelength_si: Option<f64>,
    pub export_bundle: bool,
    pub export_raster: bool,
    pub bench: BenchSpec,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig {
            command,
            basis: BasisFamily::Lg,
            n: 1,
            l: 0,
            w0: 1.0,
            na: 0.1,
            grid_n: 201,
            grid_pitch: 0.05,
            planes: vec![0.0],
            roi: "disk:R=w0".into(),
            roi_upper: None,
            r0: (0.0, 0.0),
            sweep: None,
            measure: "IO".into(),
            tau: DEFAULT_TAU,
            eps: 1e-3,
            input: None,
            out: std::env::var_os(OUT_DIR_ENV).map_or_else(|| PathBuf::from("qme-out"), PathBuf::from),
            wavelength_si: None,
            export_bundle: true,
            export_raster: true,
            bench: BenchSpec::default(),
        }
    }

    /// Factor taking input lengths to wavelengths.
    pub fn length_scale(&self) -> f64 {
        self.wavelength_si.map_or(1.0, |l| 1.0 / l)
    }

    /// Free-space wavenumber in the internal unit (one wavelength).
    pub fn k0(&self) -> f64 {
        2.0 * PI
    }

    pub fn w0_internal(&self) -> f64 {
        self.w0 * self.length_scale()
    }

    pub fn grids(&self) -> Result<Vec<Grid>> {
        let s = self.length_scale();
        let g = Grid::square(self.grid_n, self.grid_pitch * s, 0.0)?;
        Ok(self.planes.iter().map(|&z| g.at_z(z * s)).collect())
    }

    fn region(&self, spec: &str) -> Result<Region> {
        parse_region(spec, &[("w0", self.w0)])?.scaled(self.length_scale())
    }

    /// Region of interest in internal units.
    pub fn region_of_interest(&self) -> Result<Region> {
        self.region(&self.roi)
    }

    pub fn upper_region(&self) -> Result<Option<Region>> {
        self.roi_upper.as_deref().map(|s| self.region(s)).transpose()
    }

    pub fn r0_internal(&self) -> (f64, f64) {
        let s = self.length_scale();
        (self.r0.0 * s, self.r0.1 * s)
    }

    /// Generate the configured basis on all planes (not for ring bases,
    /// which live on the bench).
    pub fn build_basis(&self) -> Result<BeamBasis> {
        let grids = self.grids()?;
        match self.basis {
            BasisFamily::Lg => BeamBasis::lg_radial(self.n, self.l, self.w0_internal(), self.k0(), &grids),
            BasisFamily::Bessel => BeamBasis::bessel(&bessel_na_family(self.n, self.na, self.k0())?, self.k0(), &grids),
            BasisFamily::Rings => Err(QmeError::invalid("ring bases exist only on the bench; use the bench command")),
        }
    }

    pub fn to_key_values(&self) -> KeyValues {
        let mut kv = KeyValues::new();
        kv.push("command", self.command);
        kv.push("basis", self.basis);
        kv.push("N", self.n);
        kv.push("L", self.l);
        kv.push("w0", self.w0);
        kv.push("na", self.na);
        kv.push("grid", format!("{}:{}", self.grid_n, self.grid_pitch));
        kv.push("planes", self.planes.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        kv.push("roi", &self.roi);
        if let Some(u) = &self.roi_upper {
            kv.push("roi_upper", u);
        }
        kv.push("r0", format!("{},{}", self.r0.0, self.r0.1));
        match self.sweep {
            Some(Sweep::Radius(r)) => kv.push("sweep", format!("R={r}")),
            Some(Sweep::Modes(r)) => kv.push("sweep", format!("N={r}")),
            None => {}
        }
        kv.push("measure", &self.measure);
        kv.push("tau", self.tau);
        kv.push("eps", self.eps);
        if let Some(p) = &self.input {
            kv.push("input", p.display());
        }
        kv.push("out", self.out.display());
        match self.wavelength_si {
            Some(l) => kv.push("wavelength_si", l),
            None => kv.push("units", "lambda"),
        }
        kv.push("export_bundle", self.export_bundle);
        kv.push("export_raster", self.export_raster);
        let b = &self.bench;
        kv.push("bench.slm", b.slm);
        kv.push("bench.ccd", b.ccd);
        kv.push("bench.rings", b.rings);
        kv.push("bench.fill", b.fill);
        kv.push("bench.r_b", b.r_b);
        kv.push("bench.quantize", b.quantize);
        kv.push("bench.floor", b.floor);
        kv.push("bench.noise", b.noise);
        kv.push("bench.seed", b.seed);
        kv.push("bench.R", b.r);
        kv
    }

    pub fn to_text(&self) -> String {
        self.to_key_values().to_text()
    }

    /// Apply every key present in `kv` on top of `self`.
    pub fn apply(&mut self, kv: &KeyValues) -> Result<()> {
        for (key, value) in kv.iter() {
            self.set(key, value)?;
        }
        Ok(())
    }

    /// Set one key from its text value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| QmeError::invalid(format!("bad value '{v}' for config key '{key}'")))
        }
        fn pair(key: &str, v: &str) -> Result<(f64, f64)> {
            let (a, b) = v
                .split_once(',')
                .ok_or_else(|| QmeError::invalid(format!("'{key}' expects x,y")))?;
            Ok((num(key, a.trim())?, num(key, b.trim())?))
        }
        match key {
            "command" => self.command = value.parse()?,
            "basis" => self.basis = value.parse()?,
            "N" => self.n = num(key, value)?,
            "L" => self.l = num(key, value)?,
            "w0" => self.w0 = num(key, value)?,
            "na" => self.na = num(key, value)?,
            "grid" => {
                let (n, p) = value
                    .split_once(':')
                    .ok_or_else(|| QmeError::invalid("grid expects samples:pitch"))?;
                self.grid_n = num(key, n)?;
                self.grid_pitch = num(key, p)?;
            }
            "planes" => {
                self.planes = value
                    .split(',')
                    .map(|z| num(key, z.trim()))
                    .collect::<Result<Vec<_>>>()?
            }
            "roi" => self.roi = value.to_string(),
            "roi_upper" => self.roi_upper = Some(value.to_string()),
            "r0" => self.r0 = pair(key, value)?,
            "sweep" => {
                self.sweep = Some(match value.split_once('=') {
                    Some(("R", r)) => Sweep::Radius(r.parse()?),
                    Some(("N", r)) => Sweep::Modes(r.parse()?),
                    _ => return Err(QmeError::invalid(format!("sweep '{value}' must be R=a..b or N=a..b"))),
                })
            }
            "measure" => self.measure = value.to_string(),
            "tau" => self.tau = num(key, value)?,
            "eps" => self.eps = num(key, value)?,
            "input" => self.input = Some(PathBuf::from(value)),
            "out" => self.out = PathBuf::from(value),
            "units" => match value {
                "lambda" => self.wavelength_si = None,
                other => return Err(QmeError::invalid(format!("units '{other}': give wavelength_si for SI input"))),
            },
            "wavelength_si" => self.wavelength_si = Some(num(key, value)?),
            "export_bundle" => self.export_bundle = num(key, value)?,
            "export_raster" => self.export_raster = num(key, value)?,
            "bench.slm" => self.bench.slm = num(key, value)?,
            "bench.ccd" => self.bench.ccd = num(key, value)?,
            "bench.rings" => self.bench.rings = num(key, value)?,
            "bench.fill" => self.bench.fill = num(key, value)?,
            "bench.r_b" => self.bench.r_b = num(key, value)?,
            "bench.quantize" => self.bench.quantize = num(key, value)?,
            "bench.floor" => self.bench.floor = num(key, value)?,
            "bench.noise" => self.bench.noise = num(key, value)?,
            "bench.seed" => self.bench.seed = num(key, value)?,
            "bench.R" => self.bench.r = num(key, value)?,
            other => return Err(QmeError::invalid(format!("unknown config key '{other}'"))),
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let kv = KeyValues::parse(text);
        let command = kv
            .get("command")
            .ok_or_else(|| QmeError::invalid("config lacks a command"))?
            .parse()?;
        let mut cfg = RunConfig::new(command);
        cfg.apply(&kv)?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_round_trips_through_text() {
        let mut c = RunConfig::new(Command::Sweep);
        c.basis = BasisFamily::Bessel;
        c.n = 21;
        c.sweep = Some(Sweep::Radius("1..50:0.5".parse().unwrap()));
        c.r0 = (0.25, -1.0);
        c.roi_upper = Some("disk:R=2,z=1".into());
        c.wavelength_si = Some(633e-9);
        c.input = Some("a/b".into());
        c.bench.quantize = false;
        assert_eq!(RunConfig::from_text(&c.to_text()).unwrap(), c);
        assert!(RunConfig::from_text("command optimize\nfoo 1\n").is_err());
        assert!(RunConfig::from_text("N 3\n").is_err());
    }

    #[test]
    fn ranges() {
        let r: Range = "50..1".parse().unwrap();
        assert_eq!(r.values().len(), 50);
        assert_eq!(r.values()[1], 49.0);
        let r: Range = "0.1..0.5:0.1".parse().unwrap();
        assert_eq!(r.values().len(), 5);
        assert!("1..2:0".parse::<Range>().is_err());
        assert!("12".parse::<Range>().is_err());
    }

    #[test]
    fn si_lengths_are_scaled() {
        let mut c = RunConfig::new(Command::Optimize);
        c.wavelength_si = Some(0.5e-6);
        c.w0 = 1e-6;
        c.grid_pitch = 0.05e-6;
        assert!((c.w0_internal() - 2.0).abs() < 1e-12);
        assert_eq!(c.region_of_interest().unwrap().radius(), Some(2.0));
        assert!((c.grids().unwrap()[0].dx - 0.1).abs() < 1e-12);
    }
}
