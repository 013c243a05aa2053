//! Simulated dual-modulator bench: 8-bit amplitude/phase encoding, a
//! Fourier lens onto a camera, three-step phase-shifting retrieval of each
//! basis field, and the check that the bench superposes linearly.

use std::f64::consts::PI;

use ndarray::{s, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::basis::{BeamBasis, MemberParams, PlaneMembers};
use crate::error::{QmeError, Result};
use crate::field::{ScalarField, C64};
use crate::grid::Grid;
use crate::propagate::fourier_lens;
use crate::roi::Region;

/// Two 8-bit channels: amplitude (0 → 0, 255 → 1) and phase
/// (0 → 0, 255 → 2π·255/256).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlmPattern {
    pub amplitude: Array2<u8>,
    pub phase: Array2<u8>,
}

impl SlmPattern {
    /// Quantize `values / scale`; amplitudes above one saturate at 255.
    pub fn encode(values: &Array2<C64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(QmeError::invalid(format!("encoding scale must be positive, got {scale}")));
        }
        let amplitude = values.mapv(|v| (v.norm() / scale * 255.0).round().clamp(0.0, 255.0) as u8);
        let phase = values.mapv(|v| {
            let p = v.arg().rem_euclid(2.0 * PI) / (2.0 * PI) * 256.0;
            (p.round() as u32 % 256) as u8
        });
        Ok(SlmPattern { amplitude, phase })
    }

    /// Modulated field, `scale · a/255 · exp(2πi p/256)`.
    pub fn decode(&self, scale: f64) -> Array2<C64> {
        let mut out = Array2::zeros(self.amplitude.dim());
        ndarray::Zip::from(&mut out)
            .and(&self.amplitude)
            .and(&self.phase)
            .for_each(|o, &a, &p| {
                *o = C64::from_polar(scale * a as f64 / 255.0, 2.0 * PI * p as f64 / 256.0);
            });
        out
    }

    pub fn dim(&self) -> (usize, usize) {
        self.amplitude.dim()
    }
}

/// Camera response. Counts are `gain · |u|²` before floor and saturation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdParams {
    pub gain: f64,
    /// Counts below this are recorded as zero.
    pub floor: f64,
    /// Counts are clipped to this value.
    pub saturation: f64,
    /// Standard deviation of additive Gaussian counts noise (0 = off).
    pub noise_sigma: f64,
    pub seed: u64,
    /// Intensity-dependent gain `1/(1 + I/I_sat)`; `None` is a linear
    /// detector. Used as a deliberate fault.
    pub compression: Option<f64>,
}

impl Default for CcdParams {
    fn default() -> Self {
        CcdParams {
            gain: 1.0,
            floor: 0.0,
            saturation: f64::INFINITY,
            noise_sigma: 0.0,
            seed: 0,
            compression: None,
        }
    }
}

/// Recorded intensity in counts.
#[derive(Debug, Clone, PartialEq)]
pub struct CcdFrame {
    pub grid: Grid,
    pub counts: Array2<f64>,
    pub floor: f64,
    pub saturation: f64,
}

/// Record `|u|²` with the given camera response.
pub fn capture(field: &ScalarField, ccd: &CcdParams) -> CcdFrame {
    capture_seeded(field, ccd, ccd.seed)
}

fn capture_seeded(field: &ScalarField, ccd: &CcdParams, seed: u64) -> CcdFrame {
    let mut counts = field.intensity().mapv(|i| {
        let i = match ccd.compression {
            Some(sat) => i / (1.0 + i / sat),
            None => i,
        };
        ccd.gain * i
    });
    if ccd.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, ccd.noise_sigma).expect("finite positive sigma");
        counts.mapv_inplace(|c| c + normal.sample(&mut rng));
    }
    counts.mapv_inplace(|c| if c < ccd.floor { 0.0 } else { c.min(ccd.saturation) });
    CcdFrame {
        grid: field.grid,
        counts,
        floor: ccd.floor,
        saturation: ccd.saturation,
    }
}

/// Per-pixel outcome of three-step phase-shifting interferometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Retrieval {
    /// `Δφ = φ_R − φ_i` wrapped to `[0, 2π)`.
    pub delta_phase: Array2<f64>,
    /// Fringe amplitude `γ`.
    pub gamma: Array2<f64>,
    pub background: Array2<f64>,
    /// Field amplitude `|E_i|` (needs the reference intensity).
    pub amplitude: Array2<f64>,
    /// Pixels with fringe amplitude above the floor.
    pub valid: Array2<bool>,
}

impl Retrieval {
    /// `|E_i| exp(-iΔφ) = |E_i| exp(i(φ_i − φ_R))`; zero where invalid.
    /// The common reference phase drops out of every overlap integral.
    pub fn field(&self, grid: Grid, k0: f64) -> Result<ScalarField> {
        let mut v = Array2::zeros(grid.shape());
        ndarray::Zip::from(&mut v)
            .and(&self.amplitude)
            .and(&self.delta_phase)
            .and(&self.valid)
            .for_each(|o, &a, &d, &ok| {
                if ok {
                    *o = C64::from_polar(a, -d);
                }
            });
        ScalarField::new(grid, k0, v)
    }
}

/// Solve `I_k = I_bg + γ cos(Δφ + 2πk/3)`, `k = 0, 1, 2`, per pixel.
///
/// `reference` is the reference-only intensity `|A_R|²`; the field
/// amplitude follows from `γ = 2|A_i||A_R|`. Pixels with
/// `γ <= gamma_floor` are unretrievable.
pub fn three_step_retrieve(frames: [&Array2<f64>; 3], reference: &Array2<f64>, gamma_floor: f64) -> Result<Retrieval> {
    let dim = frames[0].dim();
    if frames.iter().any(|f| f.dim() != dim) || reference.dim() != dim {
        return Err(QmeError::GridMismatch("phase-shifted frames differ in shape".into()));
    }
    let sq3 = 3f64.sqrt();
    let mut delta = Array2::zeros(dim);
    let mut gamma = Array2::zeros(dim);
    let mut bg = Array2::zeros(dim);
    let mut amp = Array2::zeros(dim);
    let mut valid = Array2::from_elem(dim, false);
    for idx in ndarray::indices(dim) {
        let (i0, i1, i2) = (frames[0][idx], frames[1][idx], frames[2][idx]);
        let c = (2.0 * i0 - i1 - i2) / 3.0;
        let s = (i2 - i1) / sq3;
        let g = c.hypot(s);
        gamma[idx] = g;
        bg[idx] = (i0 + i1 + i2) / 3.0;
        let r = reference[idx];
        if g > gamma_floor && r > 0.0 {
            delta[idx] = s.atan2(c).rem_euclid(2.0 * PI);
            amp[idx] = g / (2.0 * r.sqrt());
            valid[idx] = true;
        }
    }
    Ok(Retrieval {
        delta_phase: delta,
        gamma,
        background: bg,
        amplitude: amp,
        valid,
    })
}

/// `n` disjoint rings filling the fraction `fill` of equal radial slots up
/// to `outer`: ring `i` spans `[(i+1)p − fill·p, (i+1)p)`, `p = outer/n`.
pub fn ring_schedule(n: usize, outer: f64, fill: f64) -> Result<Vec<(f64, f64)>> {
    if n == 0 || !(outer > 0.0) || !(fill > 0.0 && fill <= 1.0) {
        return Err(QmeError::invalid(format!("bad ring schedule n={n} outer={outer} fill={fill}")));
    }
    let p = outer / n as f64;
    Ok((0..n).map(|i| ((i as f64 + 1.0 - fill) * p, (i as f64 + 1.0) * p)).collect())
}

/// Annular unit-amplitude, constant-phase masks on the modulator grid.
/// Returns the basis (one plane, the modulator) and the encoded patterns.
pub fn encode_ring_basis(rings: &[(f64, f64)], grid: &Grid, k0: f64) -> Result<(BeamBasis, Vec<SlmPattern>)> {
    if rings.is_empty() {
        return Err(QmeError::invalid("need at least one ring"));
    }
    for (k, &(a, b)) in rings.iter().enumerate() {
        if !(a >= 0.0 && b > a) {
            return Err(QmeError::invalid(format!("ring {k} has radii {a}, {b}")));
        }
        if k > 0 && a < rings[k - 1].1 {
            return Err(QmeError::invalid(format!("ring {k} overlaps ring {}", k - 1)));
        }
    }
    let fields = rings
        .iter()
        .map(|&(a, b)| {
            let region = Region::annulus(a, b)?.at_z(grid.z);
            let w = region.mask(grid)?;
            ScalarField::new(*grid, k0, w.mapv(|v| C64::new(if v > 0.0 { 1.0 } else { 0.0 }, 0.0)))
        })
        .collect::<Result<Vec<_>>>()?;
    let patterns = fields
        .iter()
        .map(|f| SlmPattern::encode(&f.values, 1.0))
        .collect::<Result<Vec<_>>>()?;
    let params = rings.iter().map(|&(r_in, r_out)| MemberParams::Ring { r_in, r_out }).collect();
    Ok((BeamBasis::new(params, vec![PlaneMembers::Scalar(fields)])?, patterns))
}

/// Geometry and detector of the simulated bench.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Modulator samples per side.
    pub n_slm: usize,
    pub slm_pitch: f64,
    pub focal_length: f64,
    pub k0: f64,
    /// Camera samples per side kept around the optical axis.
    pub ccd_size: usize,
    /// Apply 8-bit quantization when displaying patterns.
    pub quantize: bool,
    pub ccd: CcdParams,
    /// Reference beam waist on the modulator.
    pub reference_waist: f64,
    /// Quadratic reference phase `β (x² + y²)`; `None` picks the smallest β
    /// that makes the camera-plane reference uniform within ±20% over
    /// `uniform_radius`.
    pub reference_chirp: Option<f64>,
    pub uniform_radius: f64,
    /// Fringe amplitude floor relative to the largest fringe amplitude.
    pub gamma_floor: f64,
}

impl BenchConfig {
    /// Unit modulator pitch, `λ = 1` and `f = n`, so one camera pixel equals
    /// one length unit.
    pub fn pixel_units(n_slm: usize, ccd_size: usize) -> Self {
        BenchConfig {
            n_slm,
            slm_pitch: 1.0,
            focal_length: n_slm as f64,
            k0: 2.0 * PI,
            ccd_size,
            quantize: true,
            ccd: CcdParams::default(),
            reference_waist: n_slm as f64 / 50.0,
            reference_chirp: None,
            uniform_radius: ccd_size as f64 * 0.4,
            gamma_floor: 1e-9,
        }
    }
}

/// Retrieved camera-plane basis.
#[derive(Debug, Clone)]
pub struct MeasuredBasis {
    /// Retrieved fields (relative to the reference phase), camera plane.
    pub basis: BeamBasis,
    /// Exact camera-plane fields of the unquantized masks, same plane.
    pub truth: BeamBasis,
    /// Pixels retrievable for every member.
    pub valid: Array2<bool>,
    pub retrievals: Vec<Retrieval>,
}

/// A configured bench with its reference beam.
#[derive(Debug, Clone)]
pub struct Bench {
    pub config: BenchConfig,
    pub slm_grid: Grid,
    pub ccd_grid: Grid,
    reference: Array2<C64>,
    pub reference_chirp: f64,
}

impl Bench {
    pub fn new(config: BenchConfig) -> Result<Self> {
        if config.ccd_size > config.n_slm || config.ccd_size < 2 {
            return Err(QmeError::invalid("camera crop must lie within the modulator sampling"));
        }
        let slm_grid = Grid::square(config.n_slm, config.slm_pitch, 0.0)?;
        let mut bench = Bench {
            ccd_grid: slm_grid,
            slm_grid,
            reference: Array2::zeros(slm_grid.shape()),
            reference_chirp: 0.0,
            config,
        };
        bench.ccd_grid = bench.lens(&ScalarField::zeros(slm_grid, bench.config.k0))?.grid;
        let beta = match bench.config.reference_chirp {
            Some(b) => b,
            None => bench.uniform_chirp()?,
        };
        bench.reference = bench.reference_field(beta);
        bench.reference_chirp = beta;
        Ok(bench)
    }

    fn reference_field(&self, beta: f64) -> Array2<C64> {
        let w = self.config.reference_waist;
        let g = self.slm_grid;
        Array2::from_shape_fn(g.shape(), |(iy, ix)| {
            let r2 = g.x(ix).powi(2) + g.y(iy).powi(2);
            C64::from_polar((-r2 / (w * w)).exp(), beta * r2)
        })
    }

    /// Smallest chirp on a geometric ladder giving ±20% uniformity.
    fn uniform_chirp(&self) -> Result<f64> {
        let region = Region::disk(self.config.uniform_radius)?.at_z(self.ccd_grid.z);
        let w = self.config.reference_waist;
        let mut beta = 0.0;
        for step in 0..200 {
            let field = self.lens_values(&self.reference_field(beta))?;
            let inten = field.intensity();
            let mask = region.mask(&field.grid)?;
            let vals: Vec<f64> = inten.iter().zip(mask.iter()).filter(|(_, &m)| m > 0.0).map(|(&i, _)| i).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            if vals.iter().all(|&i| (i / mean - 1.0).abs() <= 0.2) {
                return Ok(beta);
            }
            beta = 0.05 / (w * w) * 1.1f64.powi(step);
        }
        Err(QmeError::invalid("no reference chirp gives a uniform reference over the requested radius"))
    }

    fn lens_values(&self, slm: &Array2<C64>) -> Result<ScalarField> {
        self.lens(&ScalarField::new(self.slm_grid, self.config.k0, slm.clone())?)
    }

    /// Lens to the camera plane and crop around the axis.
    fn lens(&self, slm: &ScalarField) -> Result<ScalarField> {
        let full = fourier_lens(slm, self.config.focal_length)?;
        let n = self.config.n_slm;
        let m = self.config.ccd_size;
        let start = (n - m) / 2;
        let g = full.grid;
        let crop = Grid::new(
            m,
            m,
            g.dx,
            g.dy,
            (
                (g.x(start) + g.x(start + m - 1)) / 2.0,
                (g.y(start) + g.y(start + m - 1)) / 2.0,
            ),
            g.z,
        )?;
        let values = full.values.slice(s![start..start + m, start..start + m]).to_owned();
        ScalarField::new(crop, self.config.k0, values)
    }

    /// Field leaving the modulator when asked to display `target`.
    pub fn display(&self, target: &Array2<C64>, scale: f64) -> Result<Array2<C64>> {
        if self.config.quantize {
            Ok(SlmPattern::encode(target, scale)?.decode(scale))
        } else {
            Ok(target.clone())
        }
    }

    /// Camera-plane field for a modulator target.
    pub fn propagate(&self, target: &Array2<C64>, scale: f64) -> Result<ScalarField> {
        self.lens_values(&self.display(target, scale)?)
    }

    pub fn reference(&self) -> &Array2<C64> {
        &self.reference
    }

    /// Retrieve every member of a modulator-plane scalar basis at the
    /// camera through three reference-shifted captures each.
    pub fn measure_basis(&self, slm_basis: &BeamBasis) -> Result<MeasuredBasis> {
        let PlaneMembers::Scalar(members) = &slm_basis.planes()[0] else {
            return Err(QmeError::invalid("bench measures scalar modulator fields"));
        };
        let r_amp = self.reference.mapv(|v| v.norm());
        let scale = members
            .iter()
            .map(|m| {
                m.values
                    .iter()
                    .zip(r_amp.iter())
                    .map(|(v, r)| v.norm() + r)
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let ccd = &self.config.ccd;
        let reference_frame = capture_seeded(&self.propagate(&self.reference, scale)?, ccd, ccd.seed);
        let reference_intensity = reference_frame.counts.mapv(|c| c / ccd.gain);

        let mut retrieved = Vec::with_capacity(members.len());
        let mut truth = Vec::with_capacity(members.len());
        let mut retrievals = Vec::with_capacity(members.len());
        for (i, m) in members.iter().enumerate() {
            let frames = (0..3)
                .map(|k| {
                    let shift = C64::from_polar(1.0, 2.0 * PI * k as f64 / 3.0);
                    let target = &m.values + &self.reference.mapv(|r| r * shift);
                    let seed = ccd.seed.wrapping_add(1 + 3 * i as u64 + k as u64);
                    Ok(capture_seeded(&self.propagate(&target, scale)?, ccd, seed)
                        .counts
                        .mapv(|c| c / ccd.gain))
                })
                .collect::<Result<Vec<_>>>()?;
            let gmax = {
                let c = (2.0 * &frames[0] - &frames[1] - &frames[2]) / 3.0;
                let s = (&frames[2] - &frames[1]) / 3f64.sqrt();
                c.iter().zip(s.iter()).map(|(a, b)| a.hypot(*b)).fold(0.0, f64::max)
            };
            let r = three_step_retrieve(
                [&frames[0], &frames[1], &frames[2]],
                &reference_intensity,
                self.config.gamma_floor * gmax,
            )?;
            retrieved.push(r.field(self.ccd_grid, self.config.k0)?);
            truth.push(self.lens(m)?);
            retrievals.push(r);
        }
        let mut valid = Array2::from_elem(self.ccd_grid.shape(), true);
        for r in &retrievals {
            valid.zip_mut_with(&r.valid, |a, &b| *a &= b);
        }
        let params = slm_basis.params().to_vec();
        Ok(MeasuredBasis {
            basis: BeamBasis::new(params.clone(), vec![PlaneMembers::Scalar(retrieved)])?,
            truth: BeamBasis::new(params, vec![PlaneMembers::Scalar(truth)])?,
            valid,
            retrievals,
        })
    }

    /// Camera frame of the superposition `Σ a_i E_i` displayed on the
    /// modulator, scaled to use the full amplitude range.
    pub fn experimental_superposition(&self, slm_basis: &BeamBasis, coeffs: &[C64]) -> Result<CcdFrame> {
        let crate::basis::Field::Scalar(target) = slm_basis.superpose(0, coeffs)? else {
            return Err(QmeError::invalid("bench superposes scalar modulator fields"));
        };
        let scale = target.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if scale == 0.0 {
            return Err(QmeError::invalid("superposition vanishes on the modulator"));
        }
        let ccd = &self.config.ccd;
        Ok(capture_seeded(&self.propagate(&target.values, scale)?, ccd, ccd.seed.wrapping_add(0x5eed)))
    }

    /// Relative L2 difference between the experimental superposition
    /// (Exp-S) and the intensity of the numerically summed retrieved fields
    /// (Num-S), each normalized to unit sum over the retrievable pixels.
    pub fn verify_linearity(&self, slm_basis: &BeamBasis, measured: &MeasuredBasis, coeffs: &[C64]) -> Result<f64> {
        let exp = self.experimental_superposition(slm_basis, coeffs)?.counts;
        let crate::basis::Field::Scalar(num) = measured.basis.superpose(0, coeffs)? else {
            unreachable!("measured bases are scalar")
        };
        Ok(normalized_l2(&exp, &num.intensity(), &measured.valid))
    }
}

/// `‖a/Σa − b/Σb‖ / ‖b/Σb‖` over pixels where `mask` holds.
pub fn normalized_l2(a: &Array2<f64>, b: &Array2<f64>, mask: &Array2<bool>) -> f64 {
    let pick = |x: &Array2<f64>| -> Vec<f64> { x.iter().zip(mask.iter()).filter(|(_, &m)| m).map(|(&v, _)| v).collect() };
    let (va, vb) = (pick(a), pick(b));
    let (sa, sb) = (va.iter().sum::<f64>(), vb.iter().sum::<f64>());
    if sa == 0.0 || sb == 0.0 {
        return f64::INFINITY;
    }
    let num: f64 = va.iter().zip(vb.iter()).map(|(x, y)| (x / sa - y / sb).powi(2)).sum();
    let den: f64 = vb.iter().map(|y| (y / sb).powi(2)).sum();
    (num / den).sqrt()
}

/// First local minimum of the azimuthally averaged intensity about the
/// grid center, in length units (bins one sample wide).
pub fn first_dark_ring(field: &ScalarField) -> Option<f64> {
    let g = field.grid;
    let inten = field.intensity();
    let h = g.dx.min(g.dy);
    let nbins = (g.nx.min(g.ny) / 2).max(2);
    let mut sum = vec![0.0; nbins];
    let mut cnt = vec![0usize; nbins];
    for ((iy, ix), &v) in inten.indexed_iter() {
        let r = (g.x(ix) - g.x0).hypot(g.y(iy) - g.y0);
        let b = (r / h).round() as usize;
        if b < nbins {
            sum[b] += v;
            cnt[b] += 1;
        }
    }
    let prof: Vec<f64> = sum.iter().zip(cnt.iter()).map(|(s, &c)| if c > 0 { s / c as f64 } else { f64::NAN }).collect();
    (1..nbins - 1)
        .find(|&b| prof[b] < prof[b - 1] && prof[b] <= prof[b + 1])
        .map(|b| {
            // parabolic refinement of the minimum
            let (a, c, d) = (prof[b - 1], prof[b], prof[b + 1]);
            let den = a - 2.0 * c + d;
            let off = if den > 0.0 { 0.5 * (a - d) / den } else { 0.0 };
            (b as f64 + off) * h
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::bessel_j;
    use proptest::prelude::*;

    fn small_bench(quantize: bool) -> Bench {
        let mut cfg = BenchConfig::pixel_units(256, 64);
        cfg.quantize = quantize;
        Bench::new(cfg).unwrap()
    }

    #[test]
    fn pattern_round_trip_is_idempotent() {
        let v = Array2::from_shape_fn((5, 7), |(i, j)| C64::from_polar(i as f64 / 4.0, j as f64 - 3.0));
        let p = SlmPattern::encode(&v, 1.0).unwrap();
        let again = SlmPattern::encode(&p.decode(1.0), 1.0).unwrap();
        assert_eq!(p, again);
        let full = SlmPattern::encode(&Array2::from_elem((1, 1), C64::new(1.0, 0.0)), 1.0).unwrap();
        assert_eq!(full.amplitude[[0, 0]], 255);
        assert_eq!(full.decode(1.0)[[0, 0]], C64::new(1.0, 0.0));
        assert!(SlmPattern::encode(&v, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn any_pattern_survives_decode_encode(a in proptest::collection::vec(any::<u8>(), 12), p in proptest::collection::vec(any::<u8>(), 12)) {
            let pat = SlmPattern {
                amplitude: Array2::from_shape_vec((3, 4), a).unwrap(),
                phase: Array2::from_shape_vec((3, 4), p).unwrap(),
            };
            let back = SlmPattern::encode(&pat.decode(2.5), 2.5).unwrap();
            // phase of a zero amplitude pixel is not observable
            for idx in ndarray::indices((3, 4)) {
                prop_assert_eq!(back.amplitude[idx], pat.amplitude[idx]);
                if pat.amplitude[idx] > 0 {
                    prop_assert_eq!(back.phase[idx], pat.phase[idx]);
                }
            }
        }
    }

    #[test]
    fn camera_floor_and_saturation() {
        let g = Grid::square(4, 1.0, 0.0).unwrap();
        let u = ScalarField::from_fn(g, 1.0, |x, _| C64::new(x, 0.0));
        let exact = capture(&u, &CcdParams::default());
        assert_eq!(exact.counts, u.intensity());
        let dim = ScalarField::from_fn(g, 1.0, |_, _| C64::new(0.5f64.sqrt(), 0.0));
        let clipped = capture(
            &dim,
            &CcdParams {
                floor: 1.0,
                ..Default::default()
            },
        );
        assert!(clipped.counts.iter().all(|&c| c == 0.0));
        let sat = capture(
            &u,
            &CcdParams {
                saturation: 1.0,
                ..Default::default()
            },
        );
        assert!(sat.counts.iter().all(|&c| c <= 1.0));
    }

    fn forward_frames(field: &Array2<C64>, reference: &Array2<C64>, bg: f64) -> Vec<Array2<f64>> {
        (0..3)
            .map(|k| {
                let shift = C64::from_polar(1.0, 2.0 * PI * k as f64 / 3.0);
                ndarray::Zip::from(field)
                    .and(reference)
                    .map_collect(|&e, &r| (e + r * shift).norm_sqr() + bg)
            })
            .collect()
    }

    #[test]
    fn retrieval_round_trip() {
        let dim = (9, 11);
        let field = Array2::from_shape_fn(dim, |(i, j)| C64::from_polar(0.2 + 0.1 * i as f64, 0.7 * j as f64 - 2.0));
        let reference = Array2::from_shape_fn(dim, |(i, j)| C64::from_polar(1.0 + 0.05 * j as f64, 0.3 * (i * i) as f64));
        let f = forward_frames(&field, &reference, 0.0);
        let r_int = reference.mapv(|v| v.norm_sqr());
        let ret = three_step_retrieve([&f[0], &f[1], &f[2]], &r_int, 1e-12).unwrap();
        let mut sq = 0.0;
        for idx in ndarray::indices(dim) {
            assert!(ret.valid[idx]);
            let expected = (reference[idx].arg() - field[idx].arg()).rem_euclid(2.0 * PI);
            let mut d = (ret.delta_phase[idx] - expected).abs();
            d = d.min(2.0 * PI - d);
            sq += d * d;
            assert!((ret.amplitude[idx] - field[idx].norm()).abs() < 1e-12);
        }
        assert!((sq / (dim.0 * dim.1) as f64).sqrt() < 1e-9);

        // a constant background leaves the phase unchanged
        let fb = forward_frames(&field, &reference, 3.5);
        let retb = three_step_retrieve([&fb[0], &fb[1], &fb[2]], &r_int, 1e-12).unwrap();
        for idx in ndarray::indices(dim) {
            let mut d = (retb.delta_phase[idx] - ret.delta_phase[idx]).abs();
            d = d.min(2.0 * PI - d);
            assert!(d < 1e-12);
        }
    }

    #[test]
    fn zero_fringe_pixel_is_flagged() {
        let dim = (2, 2);
        let z = C64::new(0.0, 0.0);
        let field = ndarray::arr2(&[[z, C64::new(0.5, 0.5)], [C64::new(0.1, 0.0), z]]);
        let reference = Array2::from_elem(dim, C64::new(1.0, 0.0));
        let f = forward_frames(&field, &reference, 0.0);
        let ret = three_step_retrieve([&f[0], &f[1], &f[2]], &reference.mapv(|v| v.norm_sqr()), 1e-12).unwrap();
        assert!(!ret.valid[[0, 0]]);
        assert!(ret.valid[[0, 1]]);
        let v = ret.field(Grid::square(2, 1.0, 0.0).unwrap(), 1.0).unwrap();
        assert_eq!(v.values[[0, 0]], z);
    }

    #[test]
    fn ring_schedule_and_masks() {
        let rings = ring_schedule(3, 6.0, 0.5).unwrap();
        assert_eq!(rings, vec![(1.0, 2.0), (3.0, 4.0), (5.0, 6.0)]);
        let g = Grid::square(32, 1.0, 0.0).unwrap();
        let (b, pats) = encode_ring_basis(&rings, &g, 2.0 * PI).unwrap();
        assert_eq!(pats.len(), 3);
        let PlaneMembers::Scalar(m) = &b.planes()[0] else { panic!() };
        for i in 0..3 {
            for j in 0..i {
                let overlap: C64 = m[i].values.iter().zip(m[j].values.iter()).map(|(a, b)| a.conj() * b).sum();
                assert_eq!(overlap, C64::new(0.0, 0.0));
            }
        }
        assert!(encode_ring_basis(&[(1.0, 3.0), (2.0, 4.0)], &g, 1.0).is_err());
    }

    #[test]
    fn thin_ring_focuses_to_j0() {
        let bench = small_bench(false);
        let n = bench.config.n_slm as f64;
        let rho = 20.0;
        let (b, _) = encode_ring_basis(&[(rho - 0.5, rho + 0.5)], &bench.slm_grid, bench.config.k0).unwrap();
        let PlaneMembers::Scalar(m) = &b.planes()[0] else { panic!() };
        let u = bench.lens(&m[0]).unwrap();
        let kt = 2.0 * PI * rho / n;
        let g = u.grid;
        // compare along the row nearest the axis, inside the first zero,
        // after a least-squares amplitude fit
        let iy = g.ny / 2;
        let pts: Vec<(f64, f64)> = (0..g.nx)
            .map(|ix| (g.x(ix).hypot(g.y(iy)), u.values[[iy, ix]].norm()))
            .filter(|&(r, _)| kt * r < 2.0)
            .collect();
        let scale = pts.iter().map(|&(r, a)| a * bessel_j(0, kt * r)).sum::<f64>()
            / pts.iter().map(|&(r, _)| bessel_j(0, kt * r).powi(2)).sum::<f64>();
        for (r, a) in pts {
            let (got, want) = (a / scale, bessel_j(0, kt * r));
            assert!((got - want).abs() < 0.02, "r={r} got={got} want={want}");
        }
    }

    #[test]
    fn full_disk_gives_airy_pattern() {
        let bench = small_bench(false);
        let r_ap = 12.0;
        let disk = Region::disk(r_ap).unwrap().mask(&bench.slm_grid).unwrap().mapv(|w| C64::new(w.min(1.0), 0.0));
        let u = bench.propagate(&disk, 1.0).unwrap();
        let airy =
            crate::beams::evaluate_aperture_airy(r_ap, bench.config.k0, bench.config.focal_length, &u.grid).unwrap();
        let peak = airy.values.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let err = u.values.iter().zip(airy.values.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(err < 0.03 * peak, "{}", err / peak);
    }

    #[test]
    fn reference_is_uniform_over_the_largest_region() {
        let bench = small_bench(true);
        let r = bench.lens_values(bench.reference()).unwrap().intensity();
        let mask = Region::disk(bench.config.uniform_radius).unwrap().at_z(bench.ccd_grid.z).mask(&bench.ccd_grid).unwrap();
        let vals: Vec<f64> = r.iter().zip(mask.iter()).filter(|(_, &m)| m > 0.0).map(|(&v, _)| v).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!(vals.iter().all(|v| (v / mean - 1.0).abs() <= 0.2));
    }

    #[test]
    fn ideal_bench_retrieves_exactly_and_is_linear() {
        let bench = small_bench(false);
        let rings = ring_schedule(4, 24.0, 0.5).unwrap();
        let (b, _) = encode_ring_basis(&rings, &bench.slm_grid, bench.config.k0).unwrap();
        let measured = bench.measure_basis(&b).unwrap();
        let (PlaneMembers::Scalar(got), PlaneMembers::Scalar(want)) =
            (&measured.basis.planes()[0], &measured.truth.planes()[0])
        else {
            panic!()
        };
        let ref_phase = bench.lens_values(bench.reference()).unwrap();
        for (g, w) in got.iter().zip(want.iter()) {
            for idx in ndarray::indices(g.values.dim()) {
                if measured.valid[idx] {
                    let expect = w.values[idx] * ref_phase.values[idx].conj() / ref_phase.values[idx].norm();
                    assert!((g.values[idx] - expect).norm() < 1e-9 * w.values.iter().map(|v| v.norm()).fold(0.0, f64::max));
                }
            }
        }
        let coeffs = [C64::new(1.0, 0.0), C64::new(-0.5, 0.3), C64::new(0.2, -0.7), C64::new(0.1, 0.1)];
        let d = bench.verify_linearity(&b, &measured, &coeffs).unwrap();
        assert!(d < 1e-10, "{d}");
    }

    #[test]
    fn compressive_detector_breaks_linearity() {
        let mut cfg = BenchConfig::pixel_units(256, 64);
        cfg.quantize = false;
        let base = Bench::new(cfg.clone()).unwrap();
        let rings = ring_schedule(4, 24.0, 0.5).unwrap();
        let (b, _) = encode_ring_basis(&rings, &base.slm_grid, cfg.k0).unwrap();
        let peak = base.lens_values(base.reference()).unwrap().intensity().iter().cloned().fold(0.0, f64::max);
        cfg.ccd.compression = Some(peak);
        let bench = Bench::new(cfg).unwrap();
        let measured = bench.measure_basis(&b).unwrap();
        let coeffs = [C64::new(1.0, 0.0), C64::new(-0.5, 0.3), C64::new(0.2, -0.7), C64::new(0.1, 0.1)];
        let d = bench.verify_linearity(&b, &measured, &coeffs).unwrap();
        assert!(d > 0.02, "{d}");
    }

    #[test]
    fn clipping_floor_shrinks_measured_moment() {
        let g = Grid::square(101, 0.1, 0.0).unwrap();
        let u = ScalarField::from_fn(g, 2.0 * PI, |x, y| {
            let r = x.hypot(y);
            C64::new(bessel_j(0, 3.0 * r) * (-r * r / 9.0).exp(), 0.0)
        });
        let peak = u.intensity().iter().cloned().fold(0.0, f64::max);
        let frame = capture(
            &u,
            &CcdParams {
                floor: 0.05 * peak,
                ..Default::default()
            },
        );
        let clipped = ScalarField::new(g, 2.0 * PI, frame.counts.mapv(|c| C64::new(c.sqrt(), 0.0))).unwrap();
        let region = Region::full_plane();
        let w_true = crate::analysis::soim(&crate::basis::Field::Scalar(u), &region, (0.0, 0.0)).unwrap();
        let w_clip = crate::analysis::soim(&crate::basis::Field::Scalar(clipped), &region, (0.0, 0.0)).unwrap();
        assert!(w_clip <= w_true);
    }

    #[test]
    fn dark_ring_of_bessel_core() {
        let g = Grid::square(201, 0.05, 0.0).unwrap();
        let u = ScalarField::from_fn(g, 1.0, |x, y| C64::new(bessel_j(0, 2.0 * x.hypot(y)), 0.0));
        let r = first_dark_ring(&u).unwrap();
        assert!((r - crate::special::J0_FIRST_ZERO / 2.0).abs() < 0.02, "{r}");
    }
}
