//! Special functions used by the beam generators.

/// Bessel functions of the first kind `J_0(x) ..= J_nmax(x)`.
///
/// Miller's backward recurrence, normalized with `J_0 + 2 Σ J_2k = 1`.
/// Accurate to a few ulps of the largest order's magnitude for the argument
/// ranges met on optical grids (|x| up to several thousand).
pub fn bessel_j_orders(nmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let ax = x.abs();
    let big = nmax.max(ax.ceil() as usize);
    let mut m = big + 20 + (40.0 * big as f64).sqrt() as usize;
    if m % 2 == 1 {
        m += 1;
    }

    const RESCALE: f64 = 1e250;
    let mut j_next = 0.0;
    let mut j_cur = 1e-30;
    let mut norm = 0.0;
    for k in (1..=m).rev() {
        let j_prev = 2.0 * k as f64 / ax * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        // j_cur now holds J_{k-1}
        if k - 1 <= nmax {
            out[k - 1] = j_cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * j_cur;
        }
        if j_cur.abs() > RESCALE {
            j_cur /= RESCALE;
            j_next /= RESCALE;
            norm /= RESCALE;
            for v in out.iter_mut() {
                *v /= RESCALE;
            }
        }
    }
    norm += j_cur;
    for v in out.iter_mut() {
        *v /= norm;
    }
    if x < 0.0 {
        for (n, v) in out.iter_mut().enumerate() {
            if n % 2 == 1 {
                *v = -*v;
            }
        }
    }
    out
}

/// `J_n(x)` for any integer order, using `J_{-n} = (-1)^n J_n`.
pub fn bessel_j(n: i32, x: f64) -> f64 {
    let m = n.unsigned_abs() as usize;
    let v = bessel_j_orders(m, x)[m];
    if n < 0 && m % 2 == 1 {
        -v
    } else {
        v
    }
}

/// Table of `J_n(x)` over a contiguous, possibly negative, order range.
#[derive(Debug, Clone)]
pub struct BesselTable {
    lo: i32,
    values: Vec<f64>,
}

impl BesselTable {
    pub fn new(lo: i32, hi: i32, x: f64) -> Self {
        let nmax = lo.unsigned_abs().max(hi.unsigned_abs()) as usize;
        let pos = bessel_j_orders(nmax, x);
        let values = (lo..=hi)
            .map(|n| {
                let m = n.unsigned_abs() as usize;
                if n < 0 && m % 2 == 1 {
                    -pos[m]
                } else {
                    pos[m]
                }
            })
            .collect();
        BesselTable { lo, values }
    }

    pub fn get(&self, n: i32) -> f64 {
        self.values[(n - self.lo) as usize]
    }
}

/// Generalized Laguerre polynomial `L_p^a(x)` by the three-term recurrence.
pub fn laguerre(p: usize, a: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if p == 0 {
        return prev;
    }
    let mut cur = 1.0 + a - x;
    for k in 1..p {
        let k = k as f64;
        let next = ((2.0 * k + 1.0 + a - x) * cur - (k + a) * prev) / (k + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `sqrt(p! / (p + l)!)`.
pub fn factorial_ratio_sqrt(p: usize, l: usize) -> f64 {
    let log: f64 = (p + 1..=p + l).map(|k| (k as f64).ln()).sum();
    (-0.5 * log).exp()
}

/// First positive zero of `J_1`.
pub const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512;
/// First positive zero of `J_0`.
pub const J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // J_n(x) = 1/(2π) ∫_0^{2π} cos(nτ - x sin τ) dτ; the trapezoid rule is
    // spectrally accurate for this periodic integrand.
    fn bessel_integral(n: i32, x: f64) -> f64 {
        let m = 4 * (x.abs() as usize + n.unsigned_abs() as usize) + 200;
        let h = 2.0 * PI / m as f64;
        (0..m)
            .map(|i| {
                let t = i as f64 * h;
                (n as f64 * t - x * t.sin()).cos()
            })
            .sum::<f64>()
            / m as f64
    }

    #[test]
    fn bessel_matches_integral_representation() {
        for &x in &[1e-6, 0.1, 1.0, 2.404825557695773, 5.5, 17.3, 60.0, 250.0] {
            for n in -4..=12 {
                let got = bessel_j(n, x);
                let want = bessel_integral(n, x);
                assert!((got - want).abs() < 1e-13, "J_{n}({x}) = {got} vs {want}");
            }
        }
    }

    #[test]
    fn bessel_at_zero_and_negative_argument() {
        assert_eq!(bessel_j(0, 0.0), 1.0);
        assert_eq!(bessel_j(3, 0.0), 0.0);
        assert!((bessel_j(1, -2.0) + bessel_j(1, 2.0)).abs() < 1e-15);
        assert!((bessel_j(2, -2.0) - bessel_j(2, 2.0)).abs() < 1e-15);
    }

    #[test]
    fn tabulated_zeros() {
        assert!(bessel_j(0, J0_FIRST_ZERO).abs() < 1e-15);
        assert!(bessel_j(1, J1_FIRST_ZERO).abs() < 1e-15);
    }

    #[test]
    fn table_covers_negative_orders() {
        let t = BesselTable::new(-3, 2, 4.2);
        for n in -3..=2 {
            assert!((t.get(n) - bessel_j(n, 4.2)).abs() < 1e-15);
        }
    }

    #[test]
    fn laguerre_closed_forms() {
        let x = 0.7;
        assert_eq!(laguerre(0, 0.0, x), 1.0);
        assert!((laguerre(1, 0.0, x) - (1.0 - x)).abs() < 1e-15);
        assert!((laguerre(2, 0.0, x) - (x * x - 4.0 * x + 2.0) / 2.0).abs() < 1e-15);
        assert!((laguerre(2, 1.0, x) - (x * x / 2.0 - 3.0 * x + 3.0)).abs() < 1e-14);
    }

    #[test]
    fn factorial_ratio() {
        assert_eq!(factorial_ratio_sqrt(3, 0), 1.0);
        assert!((factorial_ratio_sqrt(2, 2) - (2.0f64 / 24.0).sqrt()).abs() < 1e-15);
    }
}
