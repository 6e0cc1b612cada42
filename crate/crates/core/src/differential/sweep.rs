//! Propagation of envelope states through smooth segments and across the
//! jump bands that surround singular points.

use num_complex::Complex64;

use super::{find_singularities, segment, SingularityReport};
use crate::charroots::{ordered_roots, relative_gap, track_frame, RootFrame};
use crate::coeffs::Problem;
use crate::error::{Error, Result};
use crate::jump::{finite_jump, TransferMatrix};
use crate::linalg::CMatrix;

/// `[xi - dx, xi + dx]` around one singular point.
#[derive(Debug, Clone)]
pub(crate) struct Band {
    pub lo: f64,
    pub hi: f64,
    pub report: SingularityReport,
}

/// Current frame and envelope columns expressed in its slots.
#[derive(Debug, Clone)]
pub(crate) struct Cursor {
    pub frame: RootFrame,
    pub state: CMatrix,
}

/// Both sides of one band crossing.
#[derive(Debug, Clone)]
pub(crate) struct Crossing {
    pub band: usize,
    pub near: Cursor,
    pub far: Cursor,
}

/// Bands for the singular points in `[lo, hi]`, checked for overlap.
pub(crate) fn bands(p: &Problem, lo: f64, hi: f64) -> Result<Vec<Band>> {
    let dx = p.options.jump_half_width;
    let reports = find_singularities(p, lo, hi)?;
    for w in reports.windows(2) {
        if w[1].xi - w[0].xi < 2.0 * dx {
            return Err(Error::Overlapping {
                first: w[0].xi,
                second: w[1].xi,
            });
        }
    }
    Ok(reports
        .into_iter()
        .map(|report| Band {
            lo: report.xi - dx,
            hi: report.xi + dx,
            report,
        })
        .collect())
}

/// Index of the band whose open interior contains `x`.
pub(crate) fn band_containing(bands: &[Band], x: f64) -> Option<usize> {
    bands.iter().position(|b| b.lo < x && x < b.hi)
}

/// Frame at the far side of a band, in lexicographic order.
pub(crate) fn fresh_frame(p: &Problem, x: f64) -> Result<RootFrame> {
    track_frame(None, p, x).map_err(|e| match e {
        Error::Degenerate { .. } => Error::JumpTooNarrow { x },
        other => other,
    })
}

/// Lexicographic frame without root derivatives, for jumps only.
pub(crate) fn bare_frame(p: &Problem, x: f64) -> Result<RootFrame> {
    let roots = ordered_roots(None, p, x)?;
    let (rel, _) = relative_gap(&roots);
    if rel < p.options.degeneracy_eps {
        return Err(Error::JumpTooNarrow { x });
    }
    let (gap, _) = crate::charroots::min_gap(&roots);
    let n = roots.len();
    Ok(RootFrame {
        x,
        roots,
        droots: vec![Complex64::new(0.0, 0.0); n],
        gap,
    })
}

/// Moves `cur` to `target`, jumping over every band on the way. Each
/// smooth segment and jump is appended to `pieces`.
pub(crate) fn advance(
    p: &Problem,
    cur: &mut Cursor,
    target: f64,
    bands: &[Band],
    pieces: &mut Vec<TransferMatrix>,
    crossings: &mut Vec<Crossing>,
) -> Result<()> {
    loop {
        let x = cur.frame.x;
        if x == target {
            return Ok(());
        }
        let forward = target > x;
        let next = bands
            .iter()
            .enumerate()
            .filter(|(_, b)| {
                if forward {
                    b.lo >= x && b.lo < target
                } else {
                    b.hi <= x && b.hi > target
                }
            })
            .min_by(|(_, a), (_, b)| {
                if forward {
                    a.lo.total_cmp(&b.lo)
                } else {
                    b.hi.total_cmp(&a.hi)
                }
            });
        let Some((index, band)) = next else {
            smooth(p, cur, target, pieces)?;
            return Ok(());
        };
        let (near, far) = if forward {
            (band.lo, band.hi)
        } else {
            (band.hi, band.lo)
        };
        if (forward && target < far) || (!forward && target > far) {
            return Err(Error::Invalid(format!(
                "x = {target} lies within the jump band around the singular point {}",
                band.report.xi
            )));
        }
        smooth(p, cur, near, pieces)?;
        if relative_gap(&cur.frame.roots).0 < p.options.degeneracy_eps {
            return Err(Error::JumpTooNarrow { x: near });
        }
        let far_frame = fresh_frame(p, far)?;
        let jump = finite_jump(&cur.frame, &far_frame)?;
        let before = cur.clone();
        cur.state = &jump.q * &cur.state;
        cur.frame = far_frame;
        pieces.push(jump);
        crossings.push(Crossing {
            band: index,
            near: before,
            far: cur.clone(),
        });
    }
}

fn smooth(p: &Problem, cur: &mut Cursor, to: f64, pieces: &mut Vec<TransferMatrix>) -> Result<()> {
    if cur.frame.x == to {
        return Ok(());
    }
    let from = cur.frame.x;
    let (y, end) = segment(p, &cur.frame, to)?;
    cur.state = &y * &cur.state;
    cur.frame = end;
    pieces.push(TransferMatrix {
        x_from: from,
        x_to: to,
        q: y,
    });
    Ok(())
}
