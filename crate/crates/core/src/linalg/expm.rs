use num_complex::Complex64;

use super::CMatrix;
use crate::error::{Error, Result};

const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

const THETA13: f64 = 5.371920351148152;

fn r(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

/// Matrix exponential by scaling and squaring with a degree-13 Padé
/// approximant.
pub fn mat_exp(m: &CMatrix) -> Result<CMatrix> {
    assert!(m.is_square(), "matrix exponential needs a square matrix");
    if !m.is_finite() {
        return Err(Error::Overflow("matrix exponential"));
    }
    let n = m.rows();
    let norm = m.norm_1();
    let s = if norm > THETA13 {
        (norm / THETA13).log2().ceil() as i32
    } else {
        0
    };
    let a = m.scale(r(0.5f64.powi(s)));
    let id = CMatrix::identity(n);
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = PADE13;
    let comb = |c6: f64, c4: f64, c2: f64, c0: f64| {
        &(&a6.scale(r(c6)) + &a4.scale(r(c4))) + &(&a2.scale(r(c2)) + &id.scale(r(c0)))
    };
    let u_inner = &(&a6 * &comb(b[13], b[11], b[9], 0.0)) + &comb(b[7], b[5], b[3], b[1]);
    let u = &a * &u_inner;
    let v = &(&a6 * &comb(b[12], b[10], b[8], 0.0)) + &comb(b[6], b[4], b[2], b[0]);
    let mut e = (&v - &u)
        .solve(&(&v + &u))
        .ok_or(Error::Overflow("matrix exponential"))?;
    for _ in 0..s {
        e = &e * &e;
    }
    if !e.is_finite() {
        return Err(Error::Overflow("matrix exponential"));
    }
    Ok(e)
}

/// Closed-form 2×2 exponential. With `A = M - (tr M / 2) I` traceless,
/// `A² = -det(A) I`, so `exp(M) = exp(tr M / 2) (cos d I + sinc d A)` with
/// `d = sqrt(det A)`; both functions are even, so the branch is immaterial.
pub fn mat_exp_2x2(m: &CMatrix) -> CMatrix {
    assert!(m.rows() == 2 && m.cols() == 2, "mat_exp_2x2 needs a 2x2 matrix");
    let half = m.trace() * 0.5;
    let a = m - &CMatrix::identity(2).scale(half);
    let det_a = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    let d = det_a.sqrt();
    let sinc = if d.norm() < 1e-4 {
        let d2 = d * d;
        r(1.0) - d2 / 6.0 + d2 * d2 / 120.0
    } else {
        d.sin() / d
    };
    let body = &CMatrix::identity(2).scale(d.cos()) + &a.scale(sinc);
    body.scale(half.exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Truncated Taylor series with scaling, as an independent reference.
    fn series(m: &CMatrix, terms: usize) -> CMatrix {
        let s = (m.norm_1().max(1.0)).log2().ceil().max(0.0) as i32 + 2;
        let a = m.scale(r(0.5f64.powi(s)));
        let mut sum = CMatrix::identity(m.rows());
        let mut term = CMatrix::identity(m.rows());
        for k in 1..terms {
            term = (&term * &a).scale(r(1.0 / k as f64));
            sum = &sum + &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    fn rotation() -> CMatrix {
        CMatrix::from_real(&[&[0.0, 1.0], &[-1.0, 0.0]])
    }

    #[test]
    fn zero_and_diagonal() {
        let z = CMatrix::zeros(3, 3);
        assert_eq!(mat_exp(&z).unwrap(), CMatrix::identity(3));
        let d = CMatrix::diag(&[r(1.0), r(2.0)]);
        let e = mat_exp(&d).unwrap();
        let want = CMatrix::diag(&[r(1f64.exp()), r(2f64.exp())]);
        assert!(e.rel_diff(&want) < 1e-14);
    }

    #[test]
    fn rotation_generator() {
        let want = CMatrix::from_real(&[&[1f64.cos(), 1f64.sin()], &[-1f64.sin(), 1f64.cos()]]);
        assert!(mat_exp(&rotation()).unwrap().max_diff(&want) < 1e-14);
        assert!(mat_exp_2x2(&rotation()).max_diff(&want) < 1e-15);
        assert!(series(&rotation(), 40).max_diff(&want) < 1e-14);
    }

    #[test]
    fn hyperbolic_and_scalar_paths() {
        let m = CMatrix::from_real(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let want = &CMatrix::identity(2).scale(r(1f64.cosh())) + &m.scale(r(1f64.sinh()));
        assert!(mat_exp_2x2(&m).max_diff(&want) < 1e-15);
        let c = Complex64::new(0.3, -1.2);
        let s = CMatrix::identity(2).scale(c);
        assert!(mat_exp_2x2(&s).max_diff(&CMatrix::identity(2).scale(c.exp())) < 1e-15);
    }

    #[test]
    fn large_norm_uses_squaring() {
        let m = CMatrix::from_real(&[&[-20.0, 15.0], &[0.0, -3.0]]);
        let e = mat_exp(&m).unwrap();
        assert!(e.rel_diff(&series(&m, 60)) < 1e-12);
        assert!(e.rel_diff(&mat_exp_2x2(&m)) < 1e-12);
    }

    #[test]
    fn determinant_is_exp_trace() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in 1..=6 {
            let entries: Vec<Vec<Complex64>> = (0..n)
                .map(|_| {
                    (0..n)
                        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                        .collect()
                })
                .collect();
            let m = CMatrix::from_rows(&entries);
            let d = mat_exp(&m).unwrap().det();
            let want = m.trace().exp();
            assert!((d - want).norm() < 1e-10 * want.norm(), "n={n}");
        }
    }

    #[test]
    fn overflow_is_reported() {
        let m = CMatrix::diag(&[r(1e6), r(0.0)]);
        assert!(matches!(mat_exp(&m), Err(Error::Overflow(_))));
    }
}
