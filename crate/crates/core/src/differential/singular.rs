use num_complex::Complex64;

use super::check_in_domain;
use super::sweep::{advance, band_containing, bands, bare_frame, Cursor};
use crate::charroots::{lex_order, min_gap, relative_gap, roots_at, track_frame, RootFrame};
use crate::coeffs::Problem;
use crate::error::{Error, Result};
use crate::jump::{compose_transfers, finite_jump, TransferMatrix};
use crate::linalg::CMatrix;

/// Second-order classification by the sign change of `a_0 - a_1^2 / 4`
/// across the singular point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SingularityKind {
    /// Negative before, positive after.
    A,
    /// Positive before, negative after.
    B,
    /// No sign change.
    C,
    Unclassified,
}

impl std::fmt::Display for SingularityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SingularityKind::A => "A",
            SingularityKind::B => "B",
            SingularityKind::C => "C",
            SingularityKind::Unclassified => "unclassified",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SingularityReport {
    pub xi: f64,
    pub kind: SingularityKind,
    /// Minimum root distance at `xi`.
    pub gap_at_xi: f64,
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

fn gaps(p: &Problem, x: f64) -> Result<(f64, f64)> {
    let a = p.eval_coeffs(Complex64::new(x, 0.0))?;
    let roots = roots_at(&a).map_err(|_| Error::RootNonConvergence { x })?;
    Ok((relative_gap(&roots).0, min_gap(&roots).0))
}

/// Golden-section search for the minimum of the relative gap on `[a, b]`.
fn refine(p: &Problem, mut a: f64, mut b: f64, seed: (f64, f64)) -> Result<(f64, f64)> {
    let mut best = seed;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut gc = gaps(p, c)?.0;
    let mut gd = gaps(p, d)?.0;
    for _ in 0..200 {
        if gc < best.1 {
            best = (c, gc);
        }
        if gd < best.1 {
            best = (d, gd);
        }
        if (b - a).abs() <= 4.0 * f64::EPSILON * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if gc < gd {
            b = d;
            d = c;
            gd = gc;
            c = b - INV_PHI * (b - a);
            gc = gaps(p, c)?.0;
        } else {
            a = c;
            c = d;
            gc = gd;
            d = a + INV_PHI * (b - a);
            gd = gaps(p, d)?.0;
        }
    }
    Ok(best)
}

fn discriminant(p: &Problem, x: f64) -> Result<Complex64> {
    let a = p.eval_coeffs(Complex64::new(x, 0.0))?;
    Ok(a[0] - a[1] * a[1] * 0.25)
}

fn classify(p: &Problem, xi: f64) -> Result<SingularityKind> {
    if p.order() != 2 {
        return Ok(SingularityKind::Unclassified);
    }
    let dx = p.options.jump_half_width;
    let before = discriminant(p, xi - dx)?;
    let after = discriminant(p, xi + dx)?;
    let real = |q: Complex64| q.im.abs() <= 1e-9 * q.norm() && q.re != 0.0;
    if !(real(before) && real(after)) {
        return Ok(SingularityKind::Unclassified);
    }
    Ok(match (before.re < 0.0, after.re < 0.0) {
        (true, false) => SingularityKind::A,
        (false, true) => SingularityKind::B,
        _ => SingularityKind::C,
    })
}

/// Isolated points in `[lo, hi]` where two roots coincide, located by a
/// grid scan of the relative root gap and golden-section refinement.
pub fn find_singularities(p: &Problem, lo: f64, hi: f64) -> Result<Vec<SingularityReport>> {
    check_in_domain(p, &[lo, hi])?;
    if !(lo < hi) {
        return Err(Error::EmptyDomain { lo, hi });
    }
    let eps = p.options.degeneracy_eps;
    let count = ((hi - lo) / p.options.step).ceil().max(2.0) as usize;
    let xs: Vec<f64> = (0..=count)
        .map(|i| {
            if i == count {
                hi
            } else {
                lo + (hi - lo) * i as f64 / count as f64
            }
        })
        .collect();
    let gs = xs
        .iter()
        .map(|&x| gaps(p, x).map(|g| g.0))
        .collect::<Result<Vec<f64>>>()?;

    let mut run = 0;
    for (i, &g) in gs.iter().enumerate() {
        run = if g < eps { run + 1 } else { 0 };
        if run >= 3 {
            let start = i + 1 - run;
            let mut end = i;
            while end + 1 < gs.len() && gs[end + 1] < eps {
                end += 1;
            }
            return Err(Error::EntirelyDegenerate {
                lo: xs[start],
                hi: xs[end],
            });
        }
    }

    let mut found: Vec<(f64, f64)> = Vec::new();
    for i in 0..gs.len() {
        let left = if i > 0 { Some(gs[i - 1]) } else { None };
        let right = gs.get(i + 1).copied();
        let le = left.is_none_or(|l| gs[i] <= l);
        let re = right.is_none_or(|r| gs[i] <= r);
        let strict = left.is_some_and(|l| gs[i] < l) || right.is_some_and(|r| gs[i] < r);
        if !(le && re && strict) {
            continue;
        }
        let a = xs[i.saturating_sub(1)];
        let b = xs[(i + 1).min(xs.len() - 1)];
        let (xi, g) = refine(p, a, b, (xs[i], gs[i]))?;
        if g < eps {
            found.push((xi, g));
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (x, g) in found {
        match merged.last_mut() {
            Some(last) if x - last.0 <= 0.5 * p.options.step => {
                if g < last.1 {
                    *last = (x, g);
                }
            }
            _ => merged.push((x, g)),
        }
    }
    merged
        .into_iter()
        .map(|(xi, _)| {
            Ok(SingularityReport {
                xi,
                kind: classify(p, xi)?,
                gap_at_xi: gaps(p, xi)?.1,
            })
        })
        .collect()
}

/// Limiting jump matrices of a simple turning point, in the ordering
/// `k_1 = -a_1/2 - j sqrt(q)`, `k_2 = -a_1/2 + j sqrt(q)`.
pub fn canonical_jump(kind: SingularityKind) -> Option<CMatrix> {
    let p = Complex64::new(0.5, 0.5);
    let m = Complex64::new(0.5, -0.5);
    match kind {
        SingularityKind::A => Some(CMatrix::from_rows(&[vec![p, m], vec![m, p]])),
        SingularityKind::B => Some(CMatrix::from_rows(&[vec![m, p], vec![p, m]])),
        SingularityKind::C => Some(CMatrix::identity(2)),
        SingularityKind::Unclassified => None,
    }
}

fn turning_point_frame(p: &Problem, x: f64) -> Result<RootFrame> {
    let a = p.eval_coeffs(Complex64::new(x, 0.0))?;
    let k = (a[0] - a[1] * a[1] * 0.25).sqrt();
    let centre = -a[1] * 0.5;
    let j = Complex64::new(0.0, 1.0);
    let roots = vec![centre - j * k, centre + j * k];
    if relative_gap(&roots).0 < p.options.degeneracy_eps {
        return Err(Error::JumpTooNarrow { x });
    }
    Ok(RootFrame {
        x,
        gap: min_gap(&roots).0,
        roots,
        droots: vec![Complex64::new(0.0, 0.0); 2],
    })
}

/// Finite jump from `xi - dx` to `xi + dx`. Second-order problems use the
/// turning-point ordering of [`canonical_jump`]; higher orders use the
/// lexicographic order on both sides.
pub fn singular_jump(p: &Problem, s: &SingularityReport) -> Result<TransferMatrix> {
    let dx = p.options.jump_half_width;
    let (xa, xb) = (s.xi - dx, s.xi + dx);
    check_in_domain(p, &[xa, xb])?;
    let (fa, fb) = if p.order() == 2 {
        (turning_point_frame(p, xa)?, turning_point_frame(p, xb)?)
    } else {
        (bare_frame(p, xa)?, bare_frame(p, xb)?)
    };
    finite_jump(&fa, &fb)
}

/// Transfer matrix over an interval that may contain isolated singular
/// points, composed of smooth propagation and finite jumps. Endpoint bases
/// are the lexicographically ordered frames.
pub fn propagate_robust(p: &Problem, x1: f64, x2: f64) -> Result<TransferMatrix> {
    check_in_domain(p, &[x1, x2])?;
    let n = p.order();
    if x1 == x2 {
        return Ok(TransferMatrix::identity(n, x1, x2));
    }
    let (dlo, dhi) = p.domain();
    let margin = 2.0 * p.options.jump_half_width;
    let lo = (x1.min(x2) - margin).max(dlo);
    let hi = (x1.max(x2) + margin).min(dhi);
    let bands = bands(p, lo, hi)?;
    for x in [x1, x2] {
        if let Some(b) = band_containing(&bands, x) {
            return Err(Error::Invalid(format!(
                "x = {x} lies within the jump band around the singular point {}",
                bands[b].report.xi
            )));
        }
    }
    let mut cur = Cursor {
        frame: track_frame(None, p, x1)?,
        state: CMatrix::identity(n),
    };
    let mut pieces = Vec::new();
    advance(p, &mut cur, x2, &bands, &mut pieces, &mut Vec::new())?;
    let total = compose_transfers(&pieces)?;
    Ok(TransferMatrix {
        x_from: x1,
        x_to: x2,
        q: total.q.permute_rows(&lex_order(&cur.frame.roots)),
    })
}
