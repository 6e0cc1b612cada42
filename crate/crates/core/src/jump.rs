//! Jump transfer matrices across coefficient discontinuities and their
//! composition through layered media.

use num_complex::Complex64;

use crate::charroots::RootFrame;
use crate::error::{Error, Result, Side};
use crate::linalg::{vandermonde, CMatrix};

const CHAIN_TOL: f64 = 1e-12;

/// A slab `[x_lo, x_hi]` with constant roots.
#[derive(Debug, Clone)]
pub struct Layer {
    pub x_lo: f64,
    pub x_hi: f64,
    pub frame: RootFrame,
}

impl Layer {
    pub fn new(x_lo: f64, x_hi: f64, roots: Vec<Complex64>) -> Result<Layer> {
        if !(x_lo < x_hi) {
            return Err(Error::EmptyDomain { lo: x_lo, hi: x_hi });
        }
        let (gap, _) = crate::charroots::min_gap(&roots);
        if !(gap > 0.0) {
            return Err(Error::DegenerateFrame { side: Side::A, x: x_lo });
        }
        let n = roots.len();
        Ok(Layer {
            x_lo,
            x_hi,
            frame: RootFrame {
                x: x_lo,
                roots,
                droots: vec![Complex64::new(0.0, 0.0); n],
                gap,
            },
        })
    }
}

/// Maps envelopes at `x_from` to envelopes at `x_to`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferMatrix {
    pub x_from: f64,
    pub x_to: f64,
    pub q: CMatrix,
}

impl TransferMatrix {
    pub fn identity(n: usize, x_from: f64, x_to: f64) -> Self {
        TransferMatrix {
            x_from,
            x_to,
            q: CMatrix::identity(n),
        }
    }

    pub fn order(&self) -> usize {
        self.q.rows()
    }

    pub fn det(&self) -> Complex64 {
        self.q.det()
    }

    /// Reverse map, `Q_{to -> from}`.
    pub fn inverse(&self) -> Result<TransferMatrix> {
        let q = self
            .q
            .inverse()
            .ok_or(Error::SingularBasis { x: self.x_to })?;
        Ok(TransferMatrix {
            x_from: self.x_to,
            x_to: self.x_from,
            q,
        })
    }

    pub fn apply(&self, f: &[Complex64]) -> Vec<Complex64> {
        self.q.mul_vec(f)
    }
}

fn check_frame(fr: &RootFrame, side: Side) -> Result<()> {
    if !(fr.gap > 0.0) || fr.roots.iter().any(|k| !(k.re.is_finite() && k.im.is_finite())) {
        return Err(Error::DegenerateFrame { side, x: fr.x });
    }
    Ok(())
}

/// `exp(-x_b K_B) D_B^{-1} D_A exp(x_a K_A)`, the general jump between
/// frames anchored at their own positions.
pub fn finite_jump(a: &RootFrame, b: &RootFrame) -> Result<TransferMatrix> {
    let q = jump_core(a, a.x, b, b.x)?;
    Ok(TransferMatrix {
        x_from: a.x,
        x_to: b.x,
        q,
    })
}

fn jump_core(a: &RootFrame, xa: f64, b: &RootFrame, xb: f64) -> Result<CMatrix> {
    check_frame(a, Side::A)?;
    check_frame(b, Side::B)?;
    if a.order() != b.order() {
        return Err(Error::Invalid(format!(
            "frames of different order ({} and {})",
            a.order(),
            b.order()
        )));
    }
    let (da, _) = vandermonde(a);
    let (db, _) = vandermonde(b);
    let y = db
        .solve(&da)
        .ok_or(Error::DegenerateFrame { side: Side::B, x: b.x })?;
    let n = a.order();
    let q = CMatrix::from_fn(n, n, |i, j| {
        (b.roots[i] * -xb).exp() * y[(i, j)] * (a.roots[j] * xa).exp()
    });
    if !q.is_finite() {
        return Err(Error::Overflow("jump matrix"));
    }
    Ok(q)
}

/// Jump across an interface at `x`: `exp(-x K_B) D_B^{-1} D_A exp(x K_A)`.
pub fn jump_matrix(a: &RootFrame, b: &RootFrame, x: f64) -> Result<TransferMatrix> {
    Ok(TransferMatrix {
        x_from: x,
        x_to: x,
        q: jump_core(a, x, b, x)?,
    })
}

/// Closed-form determinant of [`finite_jump`]:
/// `exp(x_a sum k_A - x_b sum k_B) prod_{i>j} (k_Ai - k_Aj) / (k_Bi - k_Bj)`.
pub fn finite_jump_det(a: &RootFrame, b: &RootFrame) -> Result<Complex64> {
    jump_det_core(a, a.x, b, b.x)
}

fn jump_det_core(a: &RootFrame, xa: f64, b: &RootFrame, xb: f64) -> Result<Complex64> {
    check_frame(a, Side::A)?;
    check_frame(b, Side::B)?;
    let sa: Complex64 = a.roots.iter().sum();
    let sb: Complex64 = b.roots.iter().sum();
    let mut ratio = Complex64::new(1.0, 0.0);
    let n = a.order();
    for i in 0..n {
        for j in 0..i {
            ratio *= (a.roots[i] - a.roots[j]) / (b.roots[i] - b.roots[j]);
        }
    }
    Ok((sa * xa - sb * xb).exp() * ratio)
}

/// Closed-form determinant of [`jump_matrix`].
pub fn jump_det(a: &RootFrame, b: &RootFrame, x: f64) -> Result<Complex64> {
    jump_det_core(a, x, b, x)
}

fn chained(prev: f64, next: f64) -> bool {
    (prev - next).abs() <= CHAIN_TOL * (1.0 + prev.abs().max(next.abs()))
}

/// Product of transfers listed in application order, so the last element
/// ends up leftmost.
pub fn compose_transfers(list: &[TransferMatrix]) -> Result<TransferMatrix> {
    let first = list
        .first()
        .ok_or_else(|| Error::Invalid("nothing to compose".into()))?;
    let mut q = first.q.clone();
    for (i, w) in list.windows(2).enumerate() {
        if !chained(w[0].x_to, w[1].x_from) {
            return Err(Error::Chain {
                index: i,
                to: w[0].x_to,
                from: w[1].x_from,
            });
        }
        q = &w[1].q * &q;
    }
    Ok(TransferMatrix {
        x_from: first.x_from,
        x_to: list[list.len() - 1].x_to,
        q,
    })
}

/// Transfer through a stack of contiguous layers. Envelopes are constant
/// inside each layer, so only the interface jumps contribute.
pub fn layered_transfer(layers: &[Layer]) -> Result<TransferMatrix> {
    let first = layers
        .first()
        .ok_or_else(|| Error::Invalid("no layers".into()))?;
    let n = first.frame.order();
    let mut pieces = vec![TransferMatrix::identity(n, first.x_lo, first.x_hi)];
    for (i, w) in layers.windows(2).enumerate() {
        if !chained(w[0].x_hi, w[1].x_lo) {
            return Err(Error::Chain {
                index: i,
                to: w[0].x_hi,
                from: w[1].x_lo,
            });
        }
        pieces.push(jump_matrix(&w[0].frame, &w[1].frame, w[0].x_hi)?);
        pieces.push(TransferMatrix::identity(n, w[1].x_lo, w[1].x_hi));
    }
    compose_transfers(&pieces)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn frame(x: f64, roots: Vec<Complex64>) -> RootFrame {
        let n = roots.len();
        let (gap, _) = crate::charroots::min_gap(&roots);
        RootFrame {
            x,
            roots,
            droots: vec![c(0.0, 0.0); n],
            gap,
        }
    }

    #[test]
    fn self_projection() {
        let a = frame(0.3, vec![c(0.1, -1.0), c(-0.2, 1.5), c(1.0, 0.0)]);
        let q = jump_matrix(&a, &a, 0.3).unwrap();
        assert!(q.q.max_diff(&CMatrix::identity(3)) < 1e-15);
        assert!((jump_det(&a, &a, 0.3).unwrap() - c(1.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn harmonic_step() {
        let a = frame(0.0, vec![c(0.0, -1.0), c(0.0, 1.0)]);
        let b = frame(0.0, vec![c(0.0, -2.0), c(0.0, 2.0)]);
        let q = jump_matrix(&a, &b, 0.0).unwrap();
        let want = CMatrix::from_real(&[&[0.75, 0.25], &[0.25, 0.75]]);
        assert!(q.q.max_diff(&want) < 1e-15);
        assert!((q.det() - c(0.5, 0.0)).norm() < 1e-15);
        assert!((jump_det(&a, &b, 0.0).unwrap() - c(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn quartic_step_determinant() {
        let fourth = |s: f64| -> Vec<Complex64> {
            (0..4)
                .map(|i| Complex64::from_polar(s, std::f64::consts::FRAC_PI_4 * (2 * i + 1) as f64))
                .collect()
        };
        let a = frame(0.0, fourth(1.0));
        let b = frame(0.0, fourth(2.0));
        let d = jump_det(&a, &b, 0.0).unwrap();
        assert!((d - c(0.5f64.powi(6), 0.0)).norm() < 1e-15);
        let q = jump_matrix(&a, &b, 0.0).unwrap();
        assert!((q.det() - d).norm() < 1e-14);
    }

    #[test]
    fn closed_form_determinant_off_origin() {
        let a = frame(0.7, vec![c(0.3, -1.0), c(-0.5, 0.4), c(1.0, 0.2)]);
        let b = frame(1.1, vec![c(-0.1, -1.2), c(0.6, 0.5), c(1.3, -0.7)]);
        let q = finite_jump(&a, &b).unwrap();
        let d = finite_jump_det(&a, &b).unwrap();
        assert!((q.det() - d).norm() < 1e-12 * d.norm());
    }

    #[test]
    fn composition_and_inversion() {
        let a = frame(0.0, vec![c(0.0, -1.0), c(0.0, 1.0)]);
        let b = frame(0.0, vec![c(0.0, -2.0), c(0.0, 2.0)]);
        let ab = jump_matrix(&a, &b, 0.5).unwrap();
        let ba = jump_matrix(&b, &a, 0.5).unwrap();
        let round = compose_transfers(&[ab.clone(), ba]).unwrap();
        assert!(round.q.max_diff(&CMatrix::identity(2)) < 1e-14);
        assert_eq!(compose_transfers(std::slice::from_ref(&ab)).unwrap(), ab);
        let off = TransferMatrix::identity(2, 0.7, 1.0);
        assert!(matches!(
            compose_transfers(&[ab, off]),
            Err(Error::Chain { index: 0, .. })
        ));
    }

    #[test]
    fn layers() {
        let ra = vec![c(0.0, -1.0), c(0.0, 1.0)];
        let rb = vec![c(0.0, -2.0), c(0.0, 2.0)];
        let one = Layer::new(0.0, 1.0, ra.clone()).unwrap();
        assert_eq!(layered_transfer(&[one.clone()]).unwrap().q, CMatrix::identity(2));
        let two = Layer::new(1.0, 2.0, rb.clone()).unwrap();
        let q = layered_transfer(&[one.clone(), two.clone()]).unwrap();
        let direct = jump_matrix(&one.frame, &two.frame, 1.0).unwrap();
        assert!(q.q.max_diff(&direct.q) < 1e-15);
        assert_eq!((q.x_from, q.x_to), (0.0, 2.0));
        let same = [
            Layer::new(0.0, 1.0, ra.clone()).unwrap(),
            Layer::new(1.0, 2.0, ra.clone()).unwrap(),
            Layer::new(2.0, 3.0, ra).unwrap(),
        ];
        assert!(layered_transfer(&same).unwrap().q.max_diff(&CMatrix::identity(2)) < 1e-15);
        let gap = Layer::new(1.5, 2.0, rb).unwrap();
        assert!(matches!(layered_transfer(&[one, gap]), Err(Error::Chain { .. })));
    }

    #[test]
    fn degenerate_sides_are_named() {
        let good = frame(0.0, vec![c(0.0, -1.0), c(0.0, 1.0)]);
        let bad = frame(0.0, vec![c(0.5, 0.0), c(0.5, 0.0)]);
        assert!(matches!(
            jump_matrix(&bad, &good, 0.0),
            Err(Error::DegenerateFrame { side: Side::A, .. })
        ));
        assert!(matches!(
            jump_matrix(&good, &bad, 0.0),
            Err(Error::DegenerateFrame { side: Side::B, .. })
        ));
    }
}
