//! Command-line front end. Flags fill a [`RunConfig`]; a `--config` file is
//! applied on top of them, and every run writes the configuration it used
//! to `config.txt` in the output directory.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{superoscillation_mask, SuperoscillationOptions};
use crate::basis::{BeamBasis, Field, MemberParams, PlaneMembers};
use crate::bench::{capture, CcdParams, SlmPattern};
use crate::config::{BasisFamily, Command, RunConfig, Sweep};
use crate::eigen::eig_hermitian;
use crate::error::{QmeError, Result};
use crate::field::ScalarField;
use crate::io::{self, KeyValues};
use crate::operators::{assemble_force, assemble_io, assemble_local_kernel, assemble_sso, normalized_base, MeasureTag};
use crate::pipelines::{
    bench_experiment, maximize_intensity, minimize_spot, sweep_csv, sweep_spot_radius, sweep_steps,
    sweep_transmission_modes, OptimizationReport, SweepPoint,
};
use crate::raster::{frame_pgm16, slm_ppm, write_intensity_ppm, Colormap};
use crate::roi::Region;

#[derive(Parser, Debug)]
#[command(name = "qme", version, about = "Quadratic measure eigenmode optimization of structured light")]
struct Cli {
    /// Output directory (default: $QME_OUT_DIR, else ./qme-out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Key/value configuration; its entries override flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Treat length inputs as metres with this wavelength.
    #[arg(long = "wavelength-si", global = true)]
    wavelength_si: Option<f64>,
    #[command(subcommand)]
    command: Option<Sub>,
}

#[derive(Args, Debug, Default)]
struct BasisArgs {
    /// lg, bessel or rings.
    #[arg(long)]
    basis: Option<String>,
    /// Number of basis members.
    #[arg(long = "N")]
    n: Option<usize>,
    /// Azimuthal index of the LG family.
    #[arg(long = "L", allow_hyphen_values = true)]
    l: Option<i32>,
    #[arg(long)]
    w0: Option<f64>,
    /// Numerical aperture of the Bessel family.
    #[arg(long)]
    na: Option<f64>,
    /// Square grid as samples:pitch.
    #[arg(long)]
    grid: Option<String>,
    /// Comma-separated plane heights.
    #[arg(long, allow_hyphen_values = true)]
    planes: Option<String>,
}

#[derive(Args, Debug, Default)]
struct RoiArgs {
    /// Region spec, e.g. disk:R=w0 or annulus:Rin=1,Rout=2.
    #[arg(long)]
    roi: Option<String>,
    /// Spot center as x,y.
    #[arg(long, allow_hyphen_values = true)]
    r0: Option<String>,
    /// Intensity threshold fraction.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Sub {
    /// Generate a basis and write it as a field bundle.
    Synth(#[command(flatten)] BasisArgs),
    /// Assemble a measure matrix.
    Assemble {
        #[command(flatten)]
        basis: BasisArgs,
        #[command(flatten)]
        roi: RoiArgs,
        /// Field bundle to read instead of generating the basis.
        #[arg(long)]
        input: Option<PathBuf>,
        /// IO, SSO, EO, CSO or OFO.
        #[arg(long)]
        measure: Option<String>,
        /// Upper plane region for OFO.
        #[arg(long = "roi-upper")]
        roi_upper: Option<String>,
    },
    /// Eigendecomposition of a matrix file.
    Eig {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Optimize transmission or spot size.
    Optimize {
        #[command(flatten)]
        basis: BasisArgs,
        #[command(flatten)]
        roi: RoiArgs,
        #[arg(long)]
        input: Option<PathBuf>,
        /// transmission or spotsize.
        #[arg(long)]
        measure: Option<String>,
    },
    /// CSV table over ROI radius (--R) or basis size (--Ns).
    Sweep {
        #[command(flatten)]
        basis: BasisArgs,
        #[command(flatten)]
        roi: RoiArgs,
        /// Radii as start..stop[:step].
        #[arg(long = "R")]
        radii: Option<String>,
        /// Basis sizes as start..stop[:step].
        #[arg(long = "Ns")]
        ns: Option<String>,
    },
    /// Run the simulated ring-mask bench.
    Bench {
        #[arg(long)]
        rings: Option<usize>,
        #[arg(long)]
        slm: Option<usize>,
        #[arg(long)]
        ccd: Option<usize>,
        #[arg(long)]
        fill: Option<f64>,
        /// Target reference core radius, camera pixels.
        #[arg(long = "rb")]
        r_b: Option<f64>,
        /// ROI radius, camera pixels.
        #[arg(long = "R")]
        r: Option<f64>,
        #[arg(long = "no-quantize")]
        no_quantize: bool,
        #[arg(long)]
        floor: Option<f64>,
        #[arg(long)]
        noise: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tau: Option<f64>,
        /// Also sweep the ROI radius, start..stop[:step].
        #[arg(long = "sweep-R")]
        sweep_r: Option<String>,
    },
    /// Field analysis.
    Analyze {
        #[command(flatten)]
        basis: BasisArgs,
        #[command(flatten)]
        roi: RoiArgs,
        /// Map super-oscillating regions.
        #[arg(long)]
        superoscillation: bool,
        /// Bundle whose first member is analyzed (default: the optimized
        /// spot of the configured basis).
        #[arg(long)]
        input: Option<PathBuf>,
        /// Spectral band fraction.
        #[arg(long)]
        eps: Option<f64>,
    },
}

fn set_opt<T: ToString>(cfg: &mut RunConfig, key: &str, v: &Option<T>) -> Result<()> {
    match v {
        Some(v) => cfg.set(key, &v.to_string()),
        None => Ok(()),
    }
}

fn apply_basis(cfg: &mut RunConfig, b: &BasisArgs) -> Result<()> {
    set_opt(cfg, "basis", &b.basis)?;
    set_opt(cfg, "N", &b.n)?;
    set_opt(cfg, "L", &b.l)?;
    set_opt(cfg, "w0", &b.w0)?;
    set_opt(cfg, "na", &b.na)?;
    set_opt(cfg, "grid", &b.grid)?;
    set_opt(cfg, "planes", &b.planes)
}

fn apply_roi(cfg: &mut RunConfig, r: &RoiArgs) -> Result<()> {
    set_opt(cfg, "roi", &r.roi)?;
    set_opt(cfg, "r0", &r.r0)?;
    set_opt(cfg, "tau", &r.tau)
}

fn input(cfg: &mut RunConfig, p: &Option<PathBuf>) {
    if let Some(p) = p {
        cfg.input = Some(p.clone());
    }
}

fn config_from_cli(cli: &Cli) -> Result<RunConfig> {
    let file = cli
        .config
        .as_ref()
        .map(|p| std::fs::read_to_string(p).map_err(|e| QmeError::io(p, e)))
        .transpose()?
        .map(|t| KeyValues::parse(&t));
    let command = match (&cli.command, &file) {
        (Some(sub), _) => match sub {
            Sub::Synth(_) => Command::Synth,
            Sub::Assemble { .. } => Command::Assemble,
            Sub::Eig { .. } => Command::Eig,
            Sub::Optimize { .. } => Command::Optimize,
            Sub::Sweep { .. } => Command::Sweep,
            Sub::Bench { .. } => Command::Bench,
            Sub::Analyze { .. } => Command::Analyze,
        },
        (None, Some(kv)) => kv
            .get("command")
            .ok_or_else(|| QmeError::invalid("no subcommand given and the config names none"))?
            .parse()?,
        (None, None) => return Err(QmeError::invalid("no subcommand given (try --help)")),
    };
    let mut cfg = RunConfig::new(command);
    match &cli.command {
        Some(Sub::Synth(b)) => apply_basis(&mut cfg, b)?,
        Some(Sub::Assemble {
            basis,
            roi,
            input: i,
            measure,
            roi_upper,
        }) => {
            apply_basis(&mut cfg, basis)?;
            apply_roi(&mut cfg, roi)?;
            input(&mut cfg, i);
            set_opt(&mut cfg, "measure", measure)?;
            set_opt(&mut cfg, "roi_upper", roi_upper)?;
        }
        Some(Sub::Eig { input: i }) => input(&mut cfg, i),
        Some(Sub::Optimize {
            basis,
            roi,
            input: i,
            measure,
        }) => {
            apply_basis(&mut cfg, basis)?;
            apply_roi(&mut cfg, roi)?;
            input(&mut cfg, i);
            cfg.measure = "transmission".into();
            set_opt(&mut cfg, "measure", measure)?;
        }
        Some(Sub::Sweep { basis, roi, radii, ns }) => {
            apply_basis(&mut cfg, basis)?;
            apply_roi(&mut cfg, roi)?;
            if let Some(r) = radii {
                cfg.set("sweep", &format!("R={r}"))?;
            }
            if let Some(n) = ns {
                cfg.set("sweep", &format!("N={n}"))?;
            }
        }
        Some(Sub::Bench {
            rings,
            slm,
            ccd,
            fill,
            r_b,
            r,
            no_quantize,
            floor,
            noise,
            seed,
            tau,
            sweep_r,
        }) => {
            cfg.basis = BasisFamily::Rings;
            set_opt(&mut cfg, "bench.rings", rings)?;
            set_opt(&mut cfg, "bench.slm", slm)?;
            set_opt(&mut cfg, "bench.ccd", ccd)?;
            set_opt(&mut cfg, "bench.fill", fill)?;
            set_opt(&mut cfg, "bench.r_b", r_b)?;
            set_opt(&mut cfg, "bench.R", r)?;
            if *no_quantize {
                cfg.bench.quantize = false;
            }
            set_opt(&mut cfg, "bench.floor", floor)?;
            set_opt(&mut cfg, "bench.noise", noise)?;
            set_opt(&mut cfg, "bench.seed", seed)?;
            set_opt(&mut cfg, "tau", tau)?;
            if let Some(r) = sweep_r {
                cfg.set("sweep", &format!("R={r}"))?;
            }
        }
        Some(Sub::Analyze {
            basis,
            roi,
            superoscillation,
            input: i,
            eps,
        }) => {
            if !superoscillation {
                return Err(QmeError::invalid("analyze needs an analysis flag (--superoscillation)"));
            }
            apply_basis(&mut cfg, basis)?;
            apply_roi(&mut cfg, roi)?;
            input(&mut cfg, i);
            set_opt(&mut cfg, "eps", eps)?;
        }
        None => {}
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(l) = cli.wavelength_si {
        cfg.wavelength_si = Some(l);
    }
    if let Some(kv) = &file {
        cfg.apply(kv)?;
    }
    Ok(cfg)
}

/// Parse `argv` (program name first), run, and return the exit code.
/// Results go to stdout, diagnostics to stderr.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match config_from_cli(&cli).and_then(|cfg| run(&cfg)) {
        Ok(summary) => {
            print!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("qme: {e}");
            1
        }
    }
}

fn basis_for(cfg: &RunConfig) -> Result<BeamBasis> {
    match &cfg.input {
        Some(p) => io::read_bundle(p),
        None => cfg.build_basis(),
    }
}

/// Execute a configuration, writing outputs under `cfg.out`. Returns a
/// short human-readable summary.
pub fn run(cfg: &RunConfig) -> Result<String> {
    let out = &cfg.out;
    std::fs::create_dir_all(out).map_err(|e| QmeError::io(out, e))?;
    io::write_text(&out.join("config.txt"), &cfg.to_text())?;
    match cfg.command {
        Command::Synth => synth(cfg, out),
        Command::Assemble => assemble(cfg, out),
        Command::Eig => eig(cfg, out),
        Command::Optimize => optimize(cfg, out),
        Command::Sweep => sweep(cfg, out),
        Command::Bench => bench(cfg, out),
        Command::Analyze => analyze(cfg, out),
    }
}

fn synth(cfg: &RunConfig, out: &Path) -> Result<String> {
    let basis = cfg.build_basis()?;
    let dir = out.join("basis");
    io::write_bundle(&basis, &dir)?;
    Ok(format!("wrote {} {} members on {} plane(s) to {}\n", basis.len(), basis.kind(), basis.planes().len(), dir.display()))
}

fn assemble(cfg: &RunConfig, out: &Path) -> Result<String> {
    let basis = basis_for(cfg)?;
    let region = cfg.region_of_interest()?;
    let roi = region.into();
    let matrices = match cfg.measure.as_str() {
        "IO" => vec![assemble_io(&basis, &roi)?],
        "SSO" => {
            let io = assemble_io(&basis, &roi)?;
            let base = normalized_base(&io, cfg.tau)?;
            vec![assemble_sso(&basis, &roi, cfg.r0_internal(), &base)?]
        }
        "EO" => vec![assemble_local_kernel(&basis, &roi, MeasureTag::Eo)?],
        "CSO" => vec![assemble_local_kernel(&basis, &roi, MeasureTag::Cso)?],
        "OFO" => {
            let upper = cfg
                .upper_region()?
                .ok_or_else(|| QmeError::invalid("OFO needs --roi-upper"))?;
            assemble_force(&basis, &region, &upper)?.to_vec()
        }
        other => return Err(QmeError::invalid(format!("unknown measure '{other}'"))),
    };
    let mut s = String::new();
    for m in &matrices {
        let path = out.join(format!("{}.qmat", m.tag));
        io::write_matrix(m, &path)?;
        let _ = writeln!(s, "{} {}x{} roi {} -> {}", m.tag, m.dim(), m.dim(), m.roi, path.display());
    }
    Ok(s)
}

fn eig(cfg: &RunConfig, out: &Path) -> Result<String> {
    let path = cfg.input.as_ref().ok_or_else(|| QmeError::invalid("eig needs --input <matrix file>"))?;
    let m = io::read_matrix(path)?;
    let sol = eig_hermitian(&m.entries)?;
    io::write_eigen(&sol, &m, out)?;
    Ok(io::eigen_table(&sol))
}

fn emit_field(cfg: &RunConfig, out: &Path, basis: &BeamBasis, rep: &OptimizationReport, region: &Region) -> Result<()> {
    let planes = (0..basis.planes().len())
        .map(|p| {
            Ok(match rep.field(basis, p)? {
                Field::Scalar(f) => PlaneMembers::Scalar(vec![f]),
                Field::Vector(f) => PlaneMembers::Vector(vec![f]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if cfg.export_bundle {
        io::write_bundle(&BeamBasis::new(vec![MemberParams::Custom], planes)?, &out.join("optimized"))?;
    }
    if cfg.export_raster {
        let plane = basis.plane_at(region.z)?;
        let field = rep.field(basis, plane)?;
        write_intensity_ppm(&out.join("intensity.ppm"), &field.intensity(), &field.grid(), Colormap::Hot, Some(region))?;
    }
    Ok(())
}

fn optimize(cfg: &RunConfig, out: &Path) -> Result<String> {
    let basis = basis_for(cfg)?;
    let region = cfg.region_of_interest()?;
    let roi = region.into();
    let rep = match cfg.measure.as_str() {
        "transmission" => maximize_intensity(&basis, &roi)?,
        "spotsize" => minimize_spot(&basis, &roi, cfg.r0_internal(), cfg.tau)?.report,
        other => return Err(QmeError::invalid(format!("optimize measure must be transmission or spotsize, got '{other}'"))),
    };
    let text = rep.to_text();
    io::write_text(&out.join("report.txt"), &text)?;
    emit_field(cfg, out, &basis, &rep, &region)?;
    Ok(text)
}

fn sweep(cfg: &RunConfig, out: &Path) -> Result<String> {
    let sweep = cfg.sweep.ok_or_else(|| QmeError::invalid("sweep needs --R or --Ns"))?;
    let mut summary = String::new();
    let points: Vec<SweepPoint> = match sweep {
        Sweep::Radius(range) => {
            let s = cfg.length_scale();
            let radii: Vec<f64> = range.values().iter().map(|r| r * s).collect();
            if cfg.basis == BasisFamily::Rings {
                let exp = bench_experiment(cfg.bench.bench_config(), cfg.bench.rings, cfg.bench.r_b, cfg.bench.fill)?;
                let _ = writeln!(summary, "w_B {:e}\nR_B {:e}", exp.w_b, exp.r_b);
                exp.sweep(&radii, cfg.tau)?
            } else {
                let basis = basis_for(cfg)?;
                let c = sweep_center(cfg)?;
                sweep_spot_radius(&basis, &radii, c, cfg.tau)?
            }
        }
        Sweep::Modes(range) => {
            let r = cfg
                .region_of_interest()?
                .radius()
                .ok_or_else(|| QmeError::invalid("mode sweeps need a disk ROI"))?;
            let ns: Vec<usize> = range.values().iter().map(|&n| n.round() as usize).collect();
            let grid = cfg.grids()?[0];
            sweep_transmission_modes(&ns, cfg.w0_internal(), cfg.k0(), r, &grid)?
        }
    };
    let csv = sweep_csv(&points);
    io::write_text(&out.join("sweep.csv"), &csv)?;
    let (w_up, k_drop) = sweep_steps(&points, 1e-6);
    let _ = writeln!(summary, "points {}\nw_steps_up {w_up:?}\nK_drops {k_drop:?}", points.len());
    summary.push_str(&csv);
    Ok(summary)
}

fn bench(cfg: &RunConfig, out: &Path) -> Result<String> {
    let exp = bench_experiment(cfg.bench.bench_config(), cfg.bench.rings, cfg.bench.r_b, cfg.bench.fill)?;
    let mut kv = KeyValues::new();
    kv.push("reference_chirp", exp.bench.reference_chirp);
    kv.push("R_B", exp.r_b);
    kv.push("w_B", exp.w_b);
    kv.push("retrievable", exp.measured.valid.iter().filter(|&&v| v).count());
    let roi = exp.roi(exp.r_b)?;
    let io_meas = assemble_io(&exp.measured.basis, &roi)?;
    let io_true = assemble_io(&exp.measured.truth, &roi)?;
    let dev = (&io_meas.entries - &io_true.entries)
        .iter()
        .map(|v| v.norm())
        .fold(0.0, f64::max)
        / io_true.max_abs();
    kv.push("io_retrieval_deviation", dev);
    let run = exp.spot(cfg.bench.r, cfg.tau)?;
    let w = run.report.w.unwrap_or(f64::NAN);
    kv.push("R", cfg.bench.r);
    kv.push("K", run.report.retained);
    kv.push("w", w);
    kv.push("w_over_wB", w / exp.w_b);
    kv.push("strehl", run.report.strehl);
    kv.push("linearity", exp.linearity(&run.report.coefficients)?);
    let text = kv.to_text();
    io::write_text(&out.join("bench.txt"), &text)?;

    if cfg.export_raster {
        let a = run.report.coefficients.to_vec();
        let Field::Scalar(target) = exp.slm_basis.superpose(0, &a)? else {
            unreachable!("ring bases are scalar")
        };
        let scale = target.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let pattern = SlmPattern::encode(&target.values, scale)?;
        std::fs::write(out.join("slm.ppm"), slm_ppm(&pattern)).map_err(|e| QmeError::io(out.join("slm.ppm"), e))?;
        let exp_s = exp.bench.experimental_superposition(&exp.slm_basis, &a)?;
        std::fs::write(out.join("exp_s.pgm"), frame_pgm16(&exp_s)).map_err(|e| QmeError::io(out.join("exp_s.pgm"), e))?;
        let num_s = exp.measured.basis.superpose(0, &a)?;
        let region = Region::disk(cfg.bench.r)?.at_z(exp.bench.ccd_grid.z);
        write_intensity_ppm(&out.join("num_s.ppm"), &num_s.intensity(), &num_s.grid(), Colormap::Hot, Some(&region))?;
        let Field::Scalar(ref_beam) = exp.measured.basis.superpose(0, &unit(exp.slm_basis.len()))? else {
            unreachable!()
        };
        let frame = capture(&ref_beam, &CcdParams::default());
        std::fs::write(out.join("reference.pgm"), frame_pgm16(&frame)).map_err(|e| QmeError::io(out.join("reference.pgm"), e))?;
    }
    let mut summary = text;
    if let Some(Sweep::Radius(range)) = cfg.sweep {
        let points = exp.sweep(&range.values(), cfg.tau)?;
        io::write_text(&out.join("sweep.csv"), &sweep_csv(&points))?;
        let _ = writeln!(summary, "sweep {} points -> {}", points.len(), out.join("sweep.csv").display());
    }
    Ok(summary)
}

/// Center of a radius sweep; the ROI spec may omit the radius
/// (`--roi disk`).
fn sweep_center(cfg: &RunConfig) -> Result<(f64, f64)> {
    let spec = &cfg.roi;
    if !spec.starts_with("disk") {
        return Err(QmeError::invalid(format!("radius sweeps use disk regions, got '{spec}'")));
    }
    if spec.contains("R=") {
        return Ok(cfg.region_of_interest()?.center);
    }
    let mut probe = cfg.clone();
    probe.roi = match spec.split_once(':') {
        Some((_, rest)) => format!("disk:R=1,{rest}"),
        None => "disk:R=1".into(),
    };
    Ok(probe.region_of_interest()?.center)
}

/// Coefficients selecting only the last (reference) member.
fn unit(n: usize) -> Vec<crate::field::C64> {
    let mut v = vec![crate::field::C64::new(0.0, 0.0); n];
    v[n - 1] = crate::field::C64::new(1.0, 0.0);
    v
}

fn analyze(cfg: &RunConfig, out: &Path) -> Result<String> {
    let region = cfg.region_of_interest()?;
    let field = match &cfg.input {
        Some(p) => {
            let b = io::read_bundle(p)?;
            let plane = b.plane_at(region.z).unwrap_or(0);
            let mut a = vec![crate::field::C64::new(0.0, 0.0); b.len()];
            a[0] = crate::field::C64::new(1.0, 0.0);
            b.superpose(plane, &a)?
        }
        None => {
            let basis = cfg.build_basis()?;
            let run = minimize_spot(&basis, &region.into(), cfg.r0_internal(), cfg.tau)?;
            run.report.field(&basis, basis.plane_at(region.z)?)?
        }
    };
    // vector fields are analyzed through their x component
    let scalar = match field {
        Field::Scalar(f) => f,
        Field::Vector(v) => ScalarField::new(v.grid, v.k0, v.e[0].clone())?,
    };
    let opts = SuperoscillationOptions {
        band_fraction: cfg.eps,
        ..Default::default()
    };
    let r0 = cfg.r0_internal();
    let map = superoscillation_mask(&scalar, r0, &opts)?;
    let inten = scalar.intensity();
    let peak = inten.iter().cloned().fold(0.0, f64::max);
    let masked_max = inten
        .iter()
        .zip(map.mask.iter())
        .filter(|(_, &m)| m)
        .map(|(&i, _)| i)
        .fold(0.0, f64::max);
    let mut kv = KeyValues::new();
    kv.push("k_band", map.k_band);
    kv.push("masked_samples", map.count());
    kv.push("masked_peak_fraction", if peak > 0.0 { masked_max / peak } else { 0.0 });
    let text = kv.to_text();
    io::write_text(&out.join("superoscillation.txt"), &text)?;
    let mut spectrum = String::from("k,density\n");
    for (k, d) in &map.spectrum {
        let _ = writeln!(spectrum, "{k:e},{d:e}");
    }
    io::write_text(&out.join("spectrum.csv"), &spectrum)?;
    if cfg.export_raster {
        // masked samples drawn at full scale over the normalized intensity
        let overlay = ndarray::Zip::from(&inten)
            .and(&map.mask)
            .map_collect(|&i, &m| if m { peak.max(f64::MIN_POSITIVE) } else { 0.5 * i });
        write_intensity_ppm(&out.join("superoscillation.ppm"), &overlay, &scalar.grid, Colormap::Gray, Some(&region))?;
    }
    Ok(text)
}
