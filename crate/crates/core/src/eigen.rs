//! Hermitian eigendecomposition by cyclic complex Jacobi rotations, and the
//! two extremal problems built on it.

use ndarray::{Array1, Array2};

use crate::error::{QmeError, Result};
use crate::field::C64;
use crate::operators::{MeasureMatrix, NormalizedBase};

/// Eigenvalues in descending order with orthonormal eigenvectors as columns.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSolution {
    pub values: Vec<f64>,
    pub vectors: Array2<C64>,
    /// `max_k ‖M v_k − λ_k v_k‖`.
    pub residual: f64,
}

impl EigenSolution {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn vector(&self, k: usize) -> Array1<C64> {
        self.vectors.column(k).to_owned()
    }
}

const MAX_SWEEPS: usize = 100;
const TIE_RTOL: f64 = 1e-12;

fn frobenius(a: &Array2<C64>) -> f64 {
    a.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
}

fn off_diagonal(a: &Array2<C64>) -> f64 {
    a.indexed_iter()
        .filter(|((i, j), _)| i != j)
        .map(|(_, v)| v.norm_sqr())
        .sum::<f64>()
        .sqrt()
}

/// Full eigendecomposition of a Hermitian matrix. Only the Hermitian part
/// of the input is meaningful; callers symmetrize beforehand.
///
/// Output is deterministic: eigenvalues descending, near-ties
/// (relative 1e-12) ordered by the index of each vector's largest
/// component, and every vector's largest component real positive.
pub fn eig_hermitian(m: &Array2<C64>) -> Result<EigenSolution> {
    let (n, n2) = m.dim();
    if n != n2 {
        return Err(QmeError::invalid(format!("matrix must be square, got {n}x{n2}")));
    }
    if m.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
        return Err(QmeError::invalid("matrix has non-finite entries"));
    }
    let mut a = m.clone();
    let mut v = Array2::<C64>::eye(n);
    let scale = frobenius(&a);
    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            if off_diagonal(&a) <= 1e-16 * scale {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    rotate(&mut a, &mut v, p, q);
                }
            }
        }
    }

    let diag: Vec<f64> = (0..n).map(|k| a[[k, k]].re).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let spread = diag.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let lead = |k: usize| argmax_abs(v.column(k).iter());
    // break near-degenerate runs by leading-component index
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (diag[order[start]] - diag[order[end]]).abs() <= TIE_RTOL * spread {
            end += 1;
        }
        order[start..end].sort_by_key(|&k| lead(k));
        start = end;
    }

    let values: Vec<f64> = order.iter().map(|&k| diag[k]).collect();
    let mut vectors = Array2::<C64>::zeros((n, n));
    for (dst, &src) in order.iter().enumerate() {
        let col = v.column(src);
        let m_idx = argmax_abs(col.iter());
        let phase = if col[m_idx].norm() > 0.0 {
            col[m_idx].conj() / col[m_idx].norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for i in 0..n {
            vectors[[i, dst]] = col[i] * phase;
        }
    }
    let residual = (0..n)
        .map(|k| {
            let x = vectors.column(k);
            let mx = m.dot(&x);
            mx.iter()
                .zip(x.iter())
                .map(|(a, b)| (a - b * values[k]).norm_sqr())
                .sum::<f64>()
                .sqrt()
        })
        .fold(0.0, f64::max);
    Ok(EigenSolution {
        values,
        vectors,
        residual,
    })
}

fn argmax_abs<'a>(it: impl Iterator<Item = &'a C64>) -> usize {
    let mut best = (0, -1.0);
    for (i, v) in it.enumerate() {
        // strict comparison keeps the lowest index among equal magnitudes
        if v.norm() > best.1 * (1.0 + 1e-12) {
            best = (i, v.norm());
        }
    }
    best.0
}

/// One Jacobi rotation annihilating `a[p][q]`:
/// `A <- Uᴴ A U`, `V <- V U` with
/// `U[:,p] = (c, -s e^{-iφ})`, `U[:,q] = (s, c e^{-iφ})` on rows `(p, q)`.
fn rotate(a: &mut Array2<C64>, v: &mut Array2<C64>, p: usize, q: usize) {
    let apq = a[[p, q]];
    let mag = apq.norm();
    if mag == 0.0 {
        return;
    }
    let app = a[[p, p]].re;
    let aqq = a[[q, q]].re;
    let theta = (aqq - app) / (2.0 * mag);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let e = apq / mag; // e^{iφ}
    let ec = e.conj();
    let n = a.nrows();

    for k in 0..n {
        let (akp, akq) = (a[[k, p]], a[[k, q]]);
        a[[k, p]] = akp * c - akq * ec * s;
        a[[k, q]] = akp * s + akq * ec * c;
    }
    for k in 0..n {
        let (apk, aqk) = (a[[p, k]], a[[q, k]]);
        a[[p, k]] = apk * c - aqk * e * s;
        a[[q, k]] = apk * s + aqk * e * c;
    }
    a[[p, q]] = C64::new(0.0, 0.0);
    a[[q, p]] = C64::new(0.0, 0.0);
    a[[p, p]] = C64::new(a[[p, p]].re, 0.0);
    a[[q, q]] = C64::new(a[[q, q]].re, 0.0);

    for k in 0..n {
        let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
        v[[k, p]] = vkp * c - vkq * ec * s;
        v[[k, q]] = vkp * s + vkq * ec * c;
    }
}

/// Top eigenpair: the superposition that maximizes the measure at unit
/// coefficient norm.
pub fn maximize_measure(m: &MeasureMatrix) -> Result<(f64, Array1<C64>)> {
    let sol = eig_hermitian(&m.entries)?;
    if sol.is_empty() {
        return Err(QmeError::invalid("empty matrix"));
    }
    Ok((sol.values[0], sol.vector(0)))
}

/// Smallest eigenpair of a spot-size matrix expressed in the normalized
/// base, mapped back to coefficients of the original basis. The returned
/// superposition has unit ROI intensity.
pub fn minimize_constrained_sso(m2: &MeasureMatrix, base: &NormalizedBase) -> Result<(f64, Array1<C64>)> {
    if m2.entries.nrows() != base.len() {
        return Err(QmeError::invalid(format!(
            "spot-size matrix is {}x{} but the normalized base keeps {} modes",
            m2.entries.nrows(),
            m2.entries.ncols(),
            base.len()
        )));
    }
    let sol = eig_hermitian(&m2.entries)?;
    let k = sol.len().checked_sub(1).ok_or(QmeError::EmptyBase { tau: base.tau })?;
    let coeffs = base.transform.dot(&sol.vector(k));
    Ok((sol.values[k], coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub(crate) fn random_hermitian(n: usize, seed: u64) -> Array2<C64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = Array2::from_shape_fn((n, n), |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        (&a + &a.t().mapv(|v| v.conj())) * c(0.5, 0.0)
    }

    fn max_abs(a: &Array2<C64>) -> f64 {
        a.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn diagonal_matrix() {
        let m = Array2::from_diag(&ndarray::arr1(&[c(3.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]));
        let s = eig_hermitian(&m).unwrap();
        assert_eq!(s.values, vec![3.0, 2.0, 1.0]);
        let expected = ndarray::arr2(&[
            [c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)],
            [c(0.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)],
            [c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0)],
        ]);
        assert_eq!(s.vectors, expected);
    }

    #[test]
    fn pauli_y() {
        let m = ndarray::arr2(&[[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]);
        let s = eig_hermitian(&m).unwrap();
        assert!((s.values[0] - 1.0).abs() < 1e-15);
        assert!((s.values[1] + 1.0).abs() < 1e-15);
        assert!(s.residual < 1e-15);
    }

    #[test]
    fn degenerate_ties_follow_leading_component() {
        let m = Array2::from_diag(&ndarray::arr1(&[c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0), c(2.0, 0.0)]));
        let s = eig_hermitian(&m).unwrap();
        assert_eq!(s.values, vec![2.0, 2.0, 1.0, 1.0]);
        let leads: Vec<usize> = (0..4).map(|k| argmax_abs(s.vectors.column(k).iter())).collect();
        assert_eq!(leads, vec![1, 3, 0, 2]);
    }

    #[test]
    fn random_reconstruction() {
        for seed in 0..5 {
            let m = random_hermitian(8, seed);
            let s = eig_hermitian(&m).unwrap();
            let lam = Array2::from_diag(&s.values.iter().map(|&x| c(x, 0.0)).collect::<Array1<_>>());
            let rec = s.vectors.dot(&lam).dot(&s.vectors.t().mapv(|v| v.conj()));
            assert!(max_abs(&(&rec - &m)) < 1e-10 * max_abs(&m));
            let gram = s.vectors.t().mapv(|v| v.conj()).dot(&s.vectors);
            assert!(max_abs(&(&gram - &Array2::<C64>::eye(8))) < 1e-10);
            assert!(s.residual < 1e-9 * max_abs(&m) * 8.0);
            assert!(s.values.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn rejects_non_finite_and_non_square() {
        let mut m = random_hermitian(3, 1);
        m[[0, 1]] = c(f64::NAN, 0.0);
        assert!(eig_hermitian(&m).is_err());
        assert!(eig_hermitian(&Array2::zeros((2, 3))).is_err());
    }

    #[test]
    fn deterministic_output() {
        let m = random_hermitian(12, 42);
        assert_eq!(eig_hermitian(&m).unwrap(), eig_hermitian(&m).unwrap());
    }

    fn rayleigh(m: &Array2<C64>, a: &Array1<C64>) -> f64 {
        let num = a.mapv(|v| v.conj()).dot(&m.dot(a)).re;
        let den: f64 = a.iter().map(|v| v.norm_sqr()).sum();
        num / den
    }

    #[test]
    fn rayleigh_quotient_is_stationary_at_eigenvectors() {
        let m = random_hermitian(6, 7);
        let s = eig_hermitian(&m).unwrap();
        let h = 1e-5;
        for k in 0..6 {
            let v = s.vector(k);
            let mut grad2 = 0.0;
            for i in 0..6 {
                for dir in [c(1.0, 0.0), c(0.0, 1.0)] {
                    let mut plus = v.clone();
                    let mut minus = v.clone();
                    plus[i] += dir * h;
                    minus[i] -= dir * h;
                    let d = (rayleigh(&m, &plus) - rayleigh(&m, &minus)) / (2.0 * h);
                    grad2 += d * d;
                }
            }
            assert!(grad2.sqrt() < 1e-6, "k={k}: {}", grad2.sqrt());
        }
    }

    proptest! {
        #[test]
        fn scaling_keeps_vectors(seed in 0u64..1000, scale in 0.01f64..100.0) {
            let m = random_hermitian(5, seed);
            let a = eig_hermitian(&m).unwrap();
            let b = eig_hermitian(&(&m * c(scale, 0.0))).unwrap();
            for k in 0..5 {
                prop_assert!((b.values[k] - scale * a.values[k]).abs() < 1e-10 * scale * 5.0);
                let overlap = a.vector(k).mapv(|v| v.conj()).dot(&b.vector(k)).norm();
                prop_assert!((overlap - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn random_vectors_never_beat_the_top(seed in 0u64..1000) {
            let m = random_hermitian(6, seed);
            let s = eig_hermitian(&m).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 17);
            for _ in 0..200 {
                let a = Array1::from_shape_fn(6, |_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
                let q = rayleigh(&m, &a);
                prop_assert!(q <= s.values[0] + 1e-9);
                prop_assert!(q >= s.values[5] - 1e-9);
            }
        }
    }
}
