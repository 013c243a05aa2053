//! Exit-gate checks. Each criterion prints one PASS/FAIL line; the test
//! fails if any criterion fails.

use std::f64::consts::PI;
use std::io::Write;

use ndarray::{Array1, Array2};
use qme::analysis::{soim, superoscillation_mask, SuperoscillationOptions};
use qme::basis::{BeamBasis, Field, PlaneMembers};
use qme::beams::{bessel_vector_at, BesselParams};
use qme::bench::{encode_ring_basis, ring_schedule, three_step_retrieve, Bench, BenchConfig};
use qme::eigen::eig_hermitian;
use qme::operators::{
    assemble_force, assemble_io, assemble_local_kernel, assemble_second_moment, normalized_base,
    MeasureMatrix, MeasureTag,
};
use qme::pipelines::{
    bench_experiment, bessel_na_family, maximize_transmission, minimize_spot, sweep_spot_radius, sweep_steps,
    DEFAULT_TAU,
};
use qme::roi::{Region, RegionOfInterest};
use qme::special::{bessel_j, J0_FIRST_ZERO, J1_FIRST_ZERO};
use qme::{Grid, ScalarField, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const K0: f64 = 2.0 * PI;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn max_dev(a: &MeasureMatrix, b: &MeasureMatrix) -> f64 {
    (&a.entries - &b.entries).iter().map(|v| v.norm()).fold(0.0, f64::max) / b.max_abs()
}

fn random_unit(rng: &mut ChaCha8Rng, n: usize) -> Array1<C64> {
    let v = Array1::from_shape_fn(n, |_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
    let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    v.mapv(|c| c / norm)
}

/// Hermitian exactly, small raw asymmetry, Rayleigh quotients bounded by
/// the top eigenvalue. Returns the worst margins seen.
fn soundness(m: &MeasureMatrix, rng: &mut ChaCha8Rng, worst: &mut [f64; 3]) -> bool {
    let n = m.dim();
    let exact = (0..n).all(|i| (0..n).all(|j| m.entries[[i, j]] == m.entries[[j, i]].conj()));
    let frob = m.entries.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let asym = m.raw_asymmetry / frob;
    let sol = eig_hermitian(&m.entries).unwrap();
    let top = sol.values[0];
    let scale = sol.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut beat = f64::NEG_INFINITY;
    for _ in 0..10_000 {
        let a = random_unit(rng, n);
        beat = beat.max((m.quadratic(&a).re - top) / scale);
    }
    let mut ok = exact && asym < 1e-10 && beat <= 1e-9;
    worst[0] = worst[0].max(asym);
    worst[1] = worst[1].max(beat);
    if m.tag == MeasureTag::Io {
        let low = sol.values.last().copied().unwrap() / top;
        worst[2] = worst[2].min(low);
        ok &= low >= -1e-10;
    }
    ok
}

fn random_region(rng: &mut ChaCha8Rng, z: f64) -> Region {
    let c = (rng.random_range(-0.4..0.4), rng.random_range(-0.4..0.4));
    let r = match rng.random_range(0..3) {
        0 => Region::disk(rng.random_range(0.5..1.8)).unwrap(),
        1 => {
            let a = rng.random_range(0.1..0.8);
            Region::annulus(a, a + rng.random_range(0.4..1.2)).unwrap()
        }
        _ => Region::rectangle(rng.random_range(0.3..1.5), rng.random_range(0.3..1.5)).unwrap(),
    };
    r.centered_at(c).at_z(z)
}

fn criterion_1() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = [0.0, f64::NEG_INFINITY, f64::INFINITY];
    let mut count = 0;
    let mut ok = true;
    let g = Grid::square(48, 0.1, 0.0).unwrap();
    for _ in 0..16 {
        let n = rng.random_range(2..7);
        let mut modes = Vec::new();
        while modes.len() < n {
            let m = (rng.random_range(0..4u32), rng.random_range(-2..3));
            if !modes.contains(&m) {
                modes.push(m);
            }
        }
        let basis = BeamBasis::lg(&modes, rng.random_range(0.6..1.5), K0, &[g]).unwrap();
        let roi: RegionOfInterest = random_region(&mut rng, 0.0).into();
        let io = assemble_io(&basis, &roi).unwrap();
        let m2 = assemble_second_moment(&basis, &roi, roi.center()).unwrap();
        for m in [&io, &m2] {
            ok &= soundness(m, &mut rng, &mut worst);
            count += 1;
        }
    }
    let zs = [0.0, 0.5];
    let grids: Vec<Grid> = zs.iter().map(|&z| Grid::square(40, 0.1, z)).collect::<Result<_, _>>().unwrap();
    for _ in 0..6 {
        let members: Vec<BesselParams> = (0..rng.random_range(2..5))
            .map(|_| {
                let mut p = BesselParams::x_polarized(rng.random_range(0.05..0.6), rng.random_range(-2..3));
                p.beta = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
                p
            })
            .collect();
        let basis = BeamBasis::bessel(&members, K0, &grids).unwrap();
        let lower = random_region(&mut rng, 0.0);
        let upper = lower.at_z(0.5);
        let roi: RegionOfInterest = lower.into();
        let mut mats = vec![
            assemble_io(&basis, &roi).unwrap(),
            assemble_second_moment(&basis, &roi, lower.center).unwrap(),
            assemble_local_kernel(&basis, &roi, MeasureTag::Eo).unwrap(),
            assemble_local_kernel(&basis, &roi, MeasureTag::Cso).unwrap(),
        ];
        mats.extend(assemble_force(&basis, &lower, &upper).unwrap());
        for m in &mats {
            ok &= soundness(m, &mut rng, &mut worst);
            count += 1;
        }
    }
    outcome(
        ok && count >= 20,
        format!(
            "{count} matrices over 22 random bases/ROIs; max raw asymmetry {:.1e}·‖M‖, max Rayleigh excess {:.1e}, min IO eigenvalue {:.1e}·λmax",
            worst[0], worst[1], worst[2]
        ),
    )
}

fn criterion_2() -> Outcome {
    let w0 = 1.0;
    let g = Grid::square(201, 0.02, 0.0).unwrap();
    let oracle = 1.0 - (-2.0f64).exp();
    let t: Vec<f64> = (1..=15).map(|n| maximize_transmission(n, w0, K0, w0, &g).unwrap().value).collect();
    let first = (t[0] - oracle).abs() < 1e-3;
    let monotone = t.windows(2).all(|p| p[1] >= p[0] - 1e-12);
    outcome(
        first && monotone && t[14] >= 0.99,
        format!("T(1)={:.6} (oracle {oracle:.6}), non-decreasing={monotone}, T(15)={:.5}", t[0], t[14]),
    )
}

fn core_soim(f: impl Fn(f64) -> f64, r_zero: f64) -> f64 {
    let g = Grid::square(601, r_zero / 100.0, 0.0).unwrap();
    let u = ScalarField::from_fn(g, K0, |x, y| C64::new(f(x.hypot(y)), 0.0));
    soim(&Field::Scalar(u), &Region::disk(r_zero).unwrap(), (0.0, 0.0)).unwrap()
}

fn criterion_3() -> Outcome {
    let w0 = 1.3;
    let g = Grid::square(241, w0 / 20.0, 0.0).unwrap();
    let gauss = ScalarField::from_fn(g, K0, |x, y| C64::new((-(x * x + y * y) / (w0 * w0)).exp(), 0.0));
    let w = soim(&Field::Scalar(gauss), &Region::full_plane(), (0.0, 0.0)).unwrap();
    let rel = (w / (2f64.sqrt() * w0) - 1.0).abs();
    let kt = K0 * 0.1;
    let airy = core_soim(|r| if r == 0.0 { 1.0 } else { 2.0 * bessel_j(1, kt * r) / (kt * r) }, J1_FIRST_ZERO / kt);
    let bessel = core_soim(|r| bessel_j(0, kt * r), J0_FIRST_ZERO / kt);
    let ratio = airy / bessel;
    outcome(
        rel < 5e-3 && (ratio - 1.5).abs() <= 0.1,
        format!("Gaussian w/(√2 w0) off by {:.2e}; Airy/Bessel core SOIM ratio {ratio:.4}", rel),
    )
}

fn criterion_4() -> Outcome {
    let na = 0.1;
    let g = Grid::square(161, 0.125, 0.0).unwrap();
    let members = bessel_na_family(21, na, K0).unwrap();
    let basis = BeamBasis::bessel(&members, K0, &[g]).unwrap();
    let kt = K0 * na;
    let r_b = J0_FIRST_ZERO / kt;
    let r_a = J1_FIRST_ZERO / kt;
    let PlaneMembers::Vector(fields) = &basis.planes()[0] else { unreachable!() };
    let reference = Field::Vector(fields.last().unwrap().clone());
    let w_b = soim(&reference, &Region::disk(r_b).unwrap(), (0.0, 0.0)).unwrap();
    let mut small = Vec::new();
    for f in [0.25, 0.5, 0.75, 0.9] {
        let run = minimize_spot(&basis, &Region::disk(f * r_b).unwrap().into(), (0.0, 0.0), DEFAULT_TAU).unwrap();
        small.push((f, run.report.w.unwrap() / w_b));
    }
    let large = minimize_spot(&basis, &Region::disk(r_a).unwrap().into(), (0.0, 0.0), DEFAULT_TAU).unwrap();
    let s = large.report.strehl;
    let squeezed = small.iter().all(|&(_, r)| r < 1.0);
    outcome(
        squeezed && (0.007..=0.06).contains(&s),
        format!(
            "w/w_B inside R_B: {}; large ROI (R_A={r_a:.3}λ) w/w_B={:.3}, Strehl {:.2}%",
            small.iter().map(|(f, r)| format!("{f}R_B→{r:.3}")).collect::<Vec<_>>().join(" "),
            large.report.w.unwrap() / w_b,
            100.0 * s
        ),
    )
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn criterion_5() -> Outcome {
    // 11 radial LG modes, shrinking disk
    let w0 = 4.0;
    let g = Grid::square(301, 0.15, 0.0).unwrap();
    let lg = BeamBasis::lg_radial(11, 0, w0, K0, &[g]).unwrap();
    let radii: Vec<f64> = (0..=75).map(|i| w0 * (1.6 - 0.02 * i as f64)).collect();
    let pts = sweep_spot_radius(&lg, &radii, (0.0, 0.0), DEFAULT_TAU).unwrap();
    let (w_up, k_drop) = sweep_steps(&pts, 1e-6);
    let colocated = !k_drop.is_empty() && w_up == k_drop;

    // 11-ring bench
    let exp = bench_experiment(BenchConfig::pixel_units(1024, 128), 11, 10.0, 0.5).unwrap();
    let at7 = exp.spot(7.0, DEFAULT_TAU).unwrap().report.w.unwrap() / exp.w_b;
    let big: Vec<f64> = (10..=50).map(f64::from).collect();
    let big_pts = exp.sweep(&big, DEFAULT_TAU).unwrap();
    let med = median(big_pts.iter().map(|p| p.w / exp.w_b).collect());
    let mut desc: Vec<f64> = (1..=50).rev().map(f64::from).collect();
    desc.retain(|r| *r < 10.0);
    let mut all = big_pts.clone();
    all.reverse();
    all.extend(exp.sweep(&desc, DEFAULT_TAU).unwrap());
    let (bw, bk) = sweep_steps(&all, 1e-6);
    outcome(
        colocated && (at7 - 0.72).abs() <= 0.15 && (1.3..=1.7).contains(&med),
        format!(
            "LG sweep w-steps {w_up:?} vs K-drops {k_drop:?}; bench R_B={:.2}px w_B={:.2}px, w/w_B(R=7px)={at7:.3}, median w/w_B over R∈[10,50]px={med:.3} (bench sweep w-steps {bw:?}, K-drops {bk:?})",
            exp.r_b, exp.w_b
        ),
    )
}

fn criterion_6() -> Outcome {
    let g = Grid::square(101, 0.022, 0.0).unwrap();
    let roi: RegionOfInterest = Region::disk(1.0).unwrap().into();
    let mut rows = Vec::new();
    for w0 in [2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0, 10.0] {
        let basis = BeamBasis::lg_radial(25, 0, w0, K0, &[g]).unwrap();
        let run = minimize_spot(&basis, &roi, (0.0, 0.0), DEFAULT_TAU).unwrap();
        rows.push((w0, run.report.strehl, run.report.retained));
    }
    let (w_min, s_min, _) = rows.iter().cloned().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    outcome(
        (0.01..=0.15).contains(&s_min),
        format!(
            "min Strehl {:.2}% at w0={w_min}λ; sweep {}",
            100.0 * s_min,
            rows.iter().map(|(w, s, k)| format!("{w}:{:.2}%(K={k})", 100.0 * s)).collect::<Vec<_>>().join(" ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let w0 = 3.0;
    let g = Grid::square(401, 0.125, 0.0).unwrap();
    let basis = BeamBasis::lg_radial(25, 0, w0, K0, &[g]).unwrap();
    let opts = SuperoscillationOptions::default();
    let analyze = |r: f64| {
        let run = minimize_spot(&basis, &Region::disk(r).unwrap().into(), (0.0, 0.0), DEFAULT_TAU).unwrap();
        let Field::Scalar(u) = run.report.field(&basis, 0).unwrap() else { unreachable!() };
        let map = superoscillation_mask(&u, (0.0, 0.0), &opts).unwrap();
        let inten = u.intensity();
        let peak = inten.iter().cloned().fold(0.0, f64::max);
        let worst = inten
            .iter()
            .zip(map.mask.iter())
            .filter(|(_, &m)| m)
            .map(|(&i, _)| i / peak)
            .fold(0.0, f64::max);
        (map.count(), worst)
    };
    let (n_small, worst) = analyze(1.0);
    let large: Vec<(f64, usize)> = [3.0, 4.0].iter().map(|&f| (f, analyze(f * w0).0)).collect();
    outcome(
        n_small > 0 && worst < 0.1 && large.iter().all(|&(_, n)| n == 0),
        format!(
            "R=λ: {n_small} masked samples, brightest at {:.2}% of peak; masked samples for R=3w0, 4w0: {:?}",
            100.0 * worst,
            large.iter().map(|p| p.1).collect::<Vec<_>>()
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let dim = (64, 64);
    let field = Array2::from_shape_fn(dim, |_| C64::from_polar(rng.random_range(0.05..1.0), rng.random_range(-PI..PI)));
    let reference = Array2::from_shape_fn(dim, |(i, j)| C64::from_polar(1.0, 0.01 * ((i * i + j * j) as f64)));
    let frames: Vec<Array2<f64>> = (0..3)
        .map(|k| {
            let s = C64::from_polar(1.0, 2.0 * PI * k as f64 / 3.0);
            ndarray::Zip::from(&field).and(&reference).map_collect(|&e, &r| (e + r * s).norm_sqr())
        })
        .collect();
    let ret = three_step_retrieve([&frames[0], &frames[1], &frames[2]], &reference.mapv(|r| r.norm_sqr()), 1e-12).unwrap();
    let mut sq = 0.0;
    let mut n = 0;
    for idx in ndarray::indices(dim) {
        if ret.valid[idx] {
            let want = (reference[idx].arg() - field[idx].arg()).rem_euclid(2.0 * PI);
            let d = (ret.delta_phase[idx] - want).abs();
            sq += d.min(2.0 * PI - d).powi(2);
            n += 1;
        }
    }
    let rms = (sq / n as f64).sqrt();

    let exp = bench_experiment(BenchConfig::pixel_units(1024, 128), 11, 10.0, 0.5).unwrap();
    let mut worst: f64 = 0.0;
    let mut sso_worst: f64 = 0.0;
    for r in [5.0, 7.0, exp.r_b, 30.0, 50.0] {
        let roi = exp.roi(r).unwrap();
        let a = assemble_io(&exp.measured.basis, &roi).unwrap();
        let b = assemble_io(&exp.measured.truth, &roi).unwrap();
        worst = worst.max(max_dev(&a, &b));
        let base = normalized_base(&b, DEFAULT_TAU).unwrap();
        let base_m = normalized_base(&a, DEFAULT_TAU).unwrap();
        if base.len() == base_m.len() {
            let sa = assemble_second_moment(&exp.measured.basis, &roi, (0.0, 0.0)).unwrap();
            let sb = assemble_second_moment(&exp.measured.truth, &roi, (0.0, 0.0)).unwrap();
            sso_worst = sso_worst.max(max_dev(&sa, &sb));
        }
    }
    outcome(
        rms < 1e-9 && worst <= 0.01,
        format!(
            "noiseless phase RMS {rms:.1e} rad over {n} pixels; 8-bit bench IO max|ΔM|/max|M| = {:.3}% (second-moment {:.3}%)",
            100.0 * worst,
            100.0 * sso_worst
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut cfg = BenchConfig::pixel_units(256, 64);
    cfg.quantize = false;
    let ideal = Bench::new(cfg.clone()).unwrap();
    let rings = ring_schedule(6, 24.0, 0.5).unwrap();
    let (slm, _) = encode_ring_basis(&rings, &ideal.slm_grid, K0).unwrap();
    let measured = ideal.measure_basis(&slm).unwrap();
    let run = minimize_spot(&measured.basis, &Region::disk(3.0).unwrap().at_z(ideal.ccd_grid.z).into(), (0.0, 0.0), DEFAULT_TAU)
        .unwrap();
    let a = run.report.coefficients.to_vec();
    let d_ideal = ideal.verify_linearity(&slm, &measured, &a).unwrap();

    let peak = ideal
        .propagate(ideal.reference(), 1.0)
        .unwrap()
        .intensity()
        .iter()
        .cloned()
        .fold(0.0, f64::max);
    let mut bad = cfg.clone();
    bad.ccd.compression = Some(peak);
    let faulty = Bench::new(bad).unwrap();
    let m_bad = faulty.measure_basis(&slm).unwrap();
    let d_bad = faulty.verify_linearity(&slm, &m_bad, &a).unwrap();

    let mut q = cfg;
    q.quantize = true;
    let quant = Bench::new(q).unwrap();
    let m_q = quant.measure_basis(&slm).unwrap();
    let d_q = quant.verify_linearity(&slm, &m_q, &a).unwrap();
    outcome(
        d_ideal < 1e-10 && d_bad > 0.02,
        format!("ideal bench {d_ideal:.1e}; compressive detector {:.1}% (detected); 8-bit bench {:.3}%", 100.0 * d_bad, 100.0 * d_q),
    )
}

/// Central-difference Maxwell residuals of the analytic vector Bessel beam,
/// relative to `k0·max|E|` over the sample points.
fn maxwell_residuals(p: &BesselParams, pts: &[(f64, f64, f64)]) -> (f64, f64, f64) {
    let d = 1e-4;
    let field = |x: f64, y: f64, z: f64| bessel_vector_at(p, K0, x, y, z);
    let deriv = |x: f64, y: f64, z: f64, axis: usize| -> ([C64; 3], [C64; 3]) {
        let mut a = [x, y, z];
        let mut b = [x, y, z];
        a[axis] += d;
        b[axis] -= d;
        let (ea, ha) = field(a[0], a[1], a[2]);
        let (eb, hb) = field(b[0], b[1], b[2]);
        let s = 1.0 / (2.0 * d);
        (
            [0, 1, 2].map(|c| (ea[c] - eb[c]) * s),
            [0, 1, 2].map(|c| (ha[c] - hb[c]) * s),
        )
    };
    let i = C64::new(0.0, 1.0);
    let (mut div, mut faraday, mut ampere, mut scale) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for &(x, y, z) in pts {
        let (e, h) = field(x, y, z);
        let dx = deriv(x, y, z, 0);
        let dy = deriv(x, y, z, 1);
        let dz = deriv(x, y, z, 2);
        let curl = |f: usize| {
            let g = |pair: &([C64; 3], [C64; 3]), c: usize| if f == 0 { pair.0[c] } else { pair.1[c] };
            [g(&dy, 2) - g(&dz, 1), g(&dz, 0) - g(&dx, 2), g(&dx, 1) - g(&dy, 0)]
        };
        let (ce, ch) = (curl(0), curl(1));
        div = div.max((dx.0[0] + dy.0[1] + dz.0[2]).norm()).max((dx.1[0] + dy.1[1] + dz.1[2]).norm());
        for c in 0..3 {
            // exp(-iωt): curl E = iωH, curl H = -iωE (natural units, ω = k0)
            faraday = faraday.max((ce[c] - i * K0 * h[c]).norm());
            ampere = ampere.max((ch[c] + i * K0 * e[c]).norm());
        }
        scale = scale.max(e.iter().map(|v| v.norm()).fold(0.0, f64::max));
    }
    let s = K0 * scale;
    (div / s, faraday / s, ampere / s)
}

fn criterion_10() -> Outcome {
    let h = 1.0 / 20.0;
    let pts: Vec<(f64, f64, f64)> = (0..21)
        .flat_map(|iy| (0..21).map(move |ix| (-0.5 + h * ix as f64, -0.5 + h * iy as f64)))
        .flat_map(|(x, y)| [0.0, 0.35].map(|z| (x, y, z)))
        .collect();
    let mut worst = [0.0f64; 3];
    for l in 0..3 {
        for (alpha, beta) in [(C64::new(1.0, 0.0), C64::new(0.0, 0.0)), (C64::new(1.0, 0.0), C64::new(0.0, 1.0))] {
            let p = BesselParams {
                theta: 0.1,
                l,
                alpha,
                beta,
                e0: C64::new(1.0, 0.0),
            };
            let r = maxwell_residuals(&p, &pts);
            worst = [worst[0].max(r.0), worst[1].max(r.1), worst[2].max(r.2)];
        }
    }
    outcome(
        worst.iter().all(|&r| r < 1e-6),
        format!(
            "θ=0.1, L∈{{0,1,2}}, λ/20 grid: divergence {:.1e}, curl E−iωH {:.1e}, curl H+iωE {:.1e} (relative)",
            worst[0], worst[1], worst[2]
        ),
    )
}

#[test]
fn acceptance_criteria() {
    let criteria: [(u32, fn() -> Outcome); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let results: Vec<(u32, Outcome)> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria.iter().map(|&(n, f)| (n, s.spawn(f))).collect();
        handles.into_iter().map(|(n, h)| (n, h.join().expect("criterion panicked"))).collect()
    });
    // written straight to stdout so the lines appear without --nocapture
    let mut out = std::io::stdout().lock();
    let mut failed = Vec::new();
    for (n, o) in &results {
        let tag = if o.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(out, "criterion {n:>2} {tag}: {}", o.detail);
        if !o.pass {
            failed.push(*n);
        }
    }
    let _ = out.flush();
    drop(out);
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
