use num_complex::Complex64;

use super::CMatrix;
use crate::charroots::RootFrame;
use crate::error::{Error, Result};

/// `D_ij = k_j^(i-1)` and its root derivative `C_ij = (i-1) k_j^(i-2)`.
pub fn vandermonde(fr: &RootFrame) -> (CMatrix, CMatrix) {
    vandermonde_of(&fr.roots)
}

pub(crate) fn vandermonde_of(k: &[Complex64]) -> (CMatrix, CMatrix) {
    let n = k.len();
    let mut d = CMatrix::zeros(n, n);
    let mut c = CMatrix::zeros(n, n);
    for (j, &kj) in k.iter().enumerate() {
        let mut p = Complex64::new(1.0, 0.0);
        for i in 0..n {
            d[(i, j)] = p;
            if i + 1 < n {
                c[(i + 1, j)] = p * (i + 1) as f64;
                p *= kj;
            }
        }
    }
    (d, c)
}

/// Inverse of `D` from the Lagrange basis: row `i` holds the monomial
/// coefficients of `prod_{j != i} (t - k_j) / (k_i - k_j)`.
pub fn vandermonde_inverse(fr: &RootFrame) -> Result<CMatrix> {
    vandermonde_inverse_of(&fr.roots).map_err(|pair| Error::Degenerate {
        x: fr.x,
        pair,
        gap: 0.0,
    })
}

pub(crate) fn vandermonde_inverse_of(
    k: &[Complex64],
) -> std::result::Result<CMatrix, (usize, usize)> {
    let n = k.len();
    let mut g = CMatrix::zeros(n, n);
    for i in 0..n {
        // Coefficients of the numerator, lowest degree first.
        let mut poly = vec![Complex64::new(0.0, 0.0); n];
        poly[0] = Complex64::new(1.0, 0.0);
        let mut deg = 0;
        let mut denom = Complex64::new(1.0, 0.0);
        for (j, &kj) in k.iter().enumerate() {
            if j == i {
                continue;
            }
            let diff = k[i] - kj;
            if diff == Complex64::new(0.0, 0.0) {
                return Err((i.min(j), i.max(j)));
            }
            denom *= diff;
            deg += 1;
            for r in (1..=deg).rev() {
                poly[r] = poly[r - 1] - kj * poly[r];
            }
            poly[0] = -kj * poly[0];
        }
        for (r, v) in poly.into_iter().enumerate() {
            g[(i, r)] = v / denom;
        }
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_by_two() {
        let k = [c(0.0, -1.0), c(0.0, 1.0)];
        let (d, cm) = vandermonde_of(&k);
        assert_eq!(d.to_rows(), vec![vec![c(1.0, 0.0), c(1.0, 0.0)], vec![k[0], k[1]]]);
        assert_eq!(
            cm.to_rows(),
            vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(1.0, 0.0), c(1.0, 0.0)]]
        );
        let g = vandermonde_inverse_of(&k).unwrap();
        let want = CMatrix::from_rows(&[
            vec![c(0.5, 0.0), c(0.0, 0.5)],
            vec![c(0.5, 0.0), c(0.0, -0.5)],
        ]);
        assert!(g.max_diff(&want) < 1e-16);
        assert!((&g * &d).max_diff(&CMatrix::identity(2)) < 1e-16);
    }

    #[test]
    fn scalar_case() {
        let (d, cm) = vandermonde_of(&[c(-3.0, 0.0)]);
        assert_eq!(d, CMatrix::identity(1));
        assert_eq!(cm, CMatrix::zeros(1, 1));
        assert_eq!(vandermonde_inverse_of(&[c(-3.0, 0.0)]).unwrap(), CMatrix::identity(1));
    }

    #[test]
    fn fourth_roots_of_unity() {
        let k = [c(-1.0, 0.0), c(0.0, -1.0), c(1.0, 0.0), c(0.0, 1.0)];
        let (d, cm) = vandermonde_of(&k);
        assert_eq!(d.row(1), &k);
        assert_eq!(d.row(2), &[c(1.0, 0.0), c(-1.0, 0.0), c(1.0, 0.0), c(-1.0, 0.0)]);
        // C is the root derivative of D: column j of C is d/dk of column j of D.
        for j in 0..4 {
            let h = 1e-6;
            let mut kp = k;
            kp[j] += h;
            let (dp, _) = vandermonde_of(&kp);
            for i in 0..4 {
                assert!(((dp[(i, j)] - d[(i, j)]) / h - cm[(i, j)]).norm() < 1e-5);
            }
        }
        let g = vandermonde_inverse_of(&k).unwrap();
        assert!((&d * &g).max_diff(&CMatrix::identity(4)) < 1e-15);
    }

    #[test]
    fn repeated_root_is_rejected() {
        assert_eq!(vandermonde_inverse_of(&[c(1.0, 0.0), c(2.0, 0.0), c(1.0, 0.0)]), Err((0, 2)));
    }
}
