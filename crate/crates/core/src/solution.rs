//! Envelopes, reconstruction of `f` and its derivatives, sampled solutions,
//! fundamental bases and the Abel check on their Wronskian.

use num_complex::Complex64;

use crate::charroots::{lex_order, min_gap, roots_at, track_frame, RootFrame};
use crate::coeffs::Problem;
use crate::differential::sweep::{advance, band_containing, bands, Band, Crossing, Cursor};
use crate::differential::{check_in_domain, integrate_leading, SingularityKind, SingularityReport};
use crate::error::{Error, Result};
use crate::linalg::{vandermonde_inverse, CMatrix};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Envelope amplitudes at `x`, relative to the lexicographically ordered
/// roots there.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope {
    pub x: f64,
    pub f: Vec<Complex64>,
}

/// Mismatch of `f` at a singular point when extrapolated from both edges
/// of its jump band.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpDiagnostic {
    pub xi: f64,
    pub kind: SingularityKind,
    pub discontinuity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleInfo {
    pub step: f64,
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Diagnostics {
    /// Minimum root distance at each sample.
    pub gaps: Vec<f64>,
    /// Finite-difference residual of the equation, relative to
    /// `sum_m |a_m f^(m)|`, at interior samples.
    pub residuals: Vec<Option<f64>>,
    pub singularities: Vec<SingularityReport>,
    pub jumps: Vec<JumpDiagnostic>,
    pub oracle: Option<OracleInfo>,
}

impl Diagnostics {
    pub fn max_residual(&self) -> Option<f64> {
        self.residuals.iter().flatten().copied().reduce(f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolutionGrid {
    pub xs: Vec<f64>,
    pub values: Vec<Complex64>,
    /// `derivs[m - 1][i] = f^(m)(xs[i])` for `m = 1 .. n-1`.
    pub derivs: Option<Vec<Vec<Complex64>>>,
    /// `None` inside jump bands, where no envelope exists.
    pub envelopes: Option<Vec<Option<Envelope>>>,
    pub diagnostics: Diagnostics,
}

impl SolutionGrid {
    /// `f^(m)` at sample `i`, with `m = 0` the value.
    pub fn derivative(&self, m: usize, i: usize) -> Option<Complex64> {
        if m == 0 {
            return self.values.get(i).copied();
        }
        self.derivs.as_ref()?.get(m - 1)?.get(i).copied()
    }
}

/// Deviation of a Wronskian from the Abel prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct AbelReport {
    pub xs: Vec<f64>,
    pub wronskian: Vec<Complex64>,
    pub predicted: Vec<Complex64>,
    /// The sample used as reference.
    pub x_ref: f64,
    pub max_rel_deviation: f64,
}

pub(crate) fn check_grid(p: &Problem, x0: f64, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::Invalid("empty sample grid".into()));
    }
    if xs.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::Invalid("sample points must be strictly increasing".into()));
    }
    check_in_domain(p, &[x0, xs[0], xs[xs.len() - 1]])
}

/// Frame at the starting point. A degenerate start is an input error
/// unless the whole domain is degenerate.
fn start_frame(p: &Problem, x0: f64) -> Result<RootFrame> {
    match track_frame(None, p, x0) {
        Err(Error::Degenerate { x, .. }) => {
            let (lo, hi) = p.domain();
            if let Err(e @ Error::EntirelyDegenerate { .. }) =
                crate::differential::find_singularities(p, lo, hi)
            {
                return Err(e);
            }
            Err(Error::Invalid(format!(
                "roots are degenerate at x0 = {x}; choose a different starting point"
            )))
        }
        other => other,
    }
}

/// Envelope at `x0` reproducing `derivs = (f, f', ..., f^(n-1))`, found by
/// solving `D exp(x0 K) F = derivs` with the Lagrange form of `D^{-1}`.
pub fn ic_to_envelope(p: &Problem, x0: f64, derivs: &[Complex64]) -> Result<Envelope> {
    let n = p.order();
    if derivs.len() != n {
        return Err(Error::Invalid(format!(
            "initial data needs {n} values, got {}",
            derivs.len()
        )));
    }
    check_in_domain(p, &[x0])?;
    let fr = start_frame(p, x0)?;
    Ok(Envelope {
        x: x0,
        f: envelope_from_derivs(&fr, derivs)?,
    })
}

fn envelope_from_derivs(fr: &RootFrame, derivs: &[Complex64]) -> Result<Vec<Complex64>> {
    let g = vandermonde_inverse(fr)?;
    Ok(g.mul_vec(derivs)
        .into_iter()
        .zip(&fr.roots)
        .map(|(v, k)| v * (-k * fr.x).exp())
        .collect())
}

/// `f^(m)(x) = exp(Phi)^t K^m F`.
pub fn reconstruct(e: &Envelope, fr: &RootFrame, m: usize) -> Result<Complex64> {
    let n = fr.order();
    if m >= n {
        return Err(Error::Invalid(format!(
            "derivative order {m} out of range for order {n}"
        )));
    }
    if e.f.len() != n {
        return Err(Error::Invalid("envelope and frame differ in size".into()));
    }
    Ok(column_deriv(fr, &e.f, m))
}

fn column_deriv(fr: &RootFrame, f: &[Complex64], m: usize) -> Complex64 {
    fr.roots
        .iter()
        .zip(f)
        .map(|(k, fi)| (k * fr.x).exp() * k.powu(m as u32) * fi)
        .sum()
}

/// All derivatives `0..=n` at a non-degenerate point, the last from the
/// equation itself.
fn full_derivs(p: &Problem, fr: &RootFrame, f: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = fr.order();
    let mut d: Vec<Complex64> = (0..n).map(|m| column_deriv(fr, f, m)).collect();
    let a = p.eval_coeffs(Complex64::new(fr.x, 0.0))?;
    let top: Complex64 = a.iter().zip(&d).map(|(am, dm)| am * dm).sum();
    d.push(-top);
    Ok(d)
}

/// Taylor expansion of `f^(m)` from derivatives `d` at `x_e` to `x`.
fn taylor(d: &[Complex64], x_e: f64, x: f64, m: usize) -> Complex64 {
    let h = x - x_e;
    let mut acc = ZERO;
    let mut term = 1.0;
    for (r, dr) in d[m..].iter().enumerate() {
        if r > 0 {
            term *= h / r as f64;
        }
        acc += dr * term;
    }
    acc
}

struct Sample {
    /// `[column][m]` for `m = 0 .. n-1`.
    derivs: Vec<Vec<Complex64>>,
    envelopes: Option<Vec<Vec<Complex64>>>,
}

struct Sweep {
    samples: Vec<Sample>,
    gaps: Vec<f64>,
    singularities: Vec<SingularityReport>,
    jumps: Vec<JumpDiagnostic>,
}

fn column(state: &CMatrix, c: usize) -> Vec<Complex64> {
    (0..state.rows()).map(|i| state[(i, c)]).collect()
}

fn sample_at(cur: &Cursor) -> Sample {
    let n = cur.frame.order();
    let perm = lex_order(&cur.frame.roots);
    let cols = cur.state.cols();
    Sample {
        derivs: (0..cols)
            .map(|c| {
                let f = column(&cur.state, c);
                (0..n).map(|m| column_deriv(&cur.frame, &f, m)).collect()
            })
            .collect(),
        envelopes: Some(
            (0..cols)
                .map(|c| perm.iter().map(|&i| cur.state[(i, c)]).collect())
                .collect(),
        ),
    }
}

fn sample_in_band(p: &Problem, crossing: &Crossing, x: f64) -> Result<Sample> {
    let edge = if (crossing.near.frame.x - x).abs() <= (crossing.far.frame.x - x).abs() {
        &crossing.near
    } else {
        &crossing.far
    };
    let n = edge.frame.order();
    let derivs = (0..edge.state.cols())
        .map(|c| {
            let d = full_derivs(p, &edge.frame, &column(&edge.state, c))?;
            Ok((0..n).map(|m| taylor(&d, edge.frame.x, x, m)).collect())
        })
        .collect::<Result<Vec<Vec<Complex64>>>>()?;
    Ok(Sample {
        derivs,
        envelopes: None,
    })
}

fn jump_mismatch(p: &Problem, crossing: &Crossing, xi: f64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for c in 0..crossing.near.state.cols() {
        let a = full_derivs(p, &crossing.near.frame, &column(&crossing.near.state, c))?;
        let b = full_derivs(p, &crossing.far.frame, &column(&crossing.far.state, c))?;
        let fa = taylor(&a, crossing.near.frame.x, xi, 0);
        let fb = taylor(&b, crossing.far.frame.x, xi, 0);
        let scale = fa.norm().max(fb.norm()).max(f64::MIN_POSITIVE);
        worst = worst.max((fa - fb).norm() / scale);
    }
    Ok(worst)
}

/// Carries the envelope columns `start` (lexicographic slots at `x0`) to
/// every sample in `xs`.
fn sweep_grid(p: &Problem, x0: f64, start: CMatrix, xs: &[f64]) -> Result<Sweep> {
    check_grid(p, x0, xs)?;
    let (dlo, dhi) = p.domain();
    let margin = 2.0 * p.options.jump_half_width;
    let lo = (xs[0].min(x0) - margin).max(dlo);
    let hi = (xs[xs.len() - 1].max(x0) + margin).min(dhi);
    let bands: Vec<Band> = bands(p, lo, hi)?;
    if let Some(b) = band_containing(&bands, x0) {
        return Err(Error::Invalid(format!(
            "x0 = {x0} lies within the jump band around the singular point {}; choose a different starting point",
            bands[b].report.xi
        )));
    }
    let frame = start_frame(p, x0)?;

    let mut samples: Vec<Option<Sample>> = (0..xs.len()).map(|_| None).collect();
    let mut all_crossings: Vec<Crossing> = Vec::new();
    let split = xs.partition_point(|&x| x < x0);
    let legs: [Vec<usize>; 2] = [(split..xs.len()).collect(), (0..split).rev().collect()];
    for order in &legs {
        let mut cur = Cursor {
            frame: frame.clone(),
            state: start.clone(),
        };
        let mut crossings: Vec<Crossing> = Vec::new();
        let mut pieces = Vec::new();
        for &i in order {
            let x = xs[i];
            let sample = match band_containing(&bands, x) {
                Some(b) => {
                    if !crossings.iter().any(|c| c.band == b) {
                        let forward = x > x0;
                        let far = if forward { bands[b].hi } else { bands[b].lo };
                        advance(p, &mut cur, far, &bands, &mut pieces, &mut crossings)?;
                    }
                    let crossing = crossings
                        .iter()
                        .find(|c| c.band == b)
                        .ok_or_else(|| Error::Invalid("band was not crossed".into()))?;
                    sample_in_band(p, crossing, x)?
                }
                None => {
                    advance(p, &mut cur, x, &bands, &mut pieces, &mut crossings)?;
                    sample_at(&cur)
                }
            };
            samples[i] = Some(sample);
            pieces.clear();
        }
        all_crossings.extend(crossings);
    }

    let mut jumps = Vec::new();
    for c in &all_crossings {
        let report = &bands[c.band].report;
        jumps.push(JumpDiagnostic {
            xi: report.xi,
            kind: report.kind,
            discontinuity: jump_mismatch(p, c, report.xi)?,
        });
    }
    jumps.sort_by(|a, b| a.xi.total_cmp(&b.xi));
    let gaps = xs
        .iter()
        .map(|&x| {
            let a = p.eval_coeffs(Complex64::new(x, 0.0))?;
            let r = roots_at(&a).map_err(|_| Error::RootNonConvergence { x })?;
            Ok(min_gap(&r).0)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(Sweep {
        samples: samples
            .into_iter()
            .map(|s| s.ok_or_else(|| Error::Invalid("sample was skipped".into())))
            .collect::<Result<Vec<_>>>()?,
        gaps,
        singularities: bands.into_iter().map(|b| b.report).collect(),
        jumps,
    })
}

/// Finite-difference weights for derivatives `0..=m` at `z` on `nodes`.
fn fd_weights(z: f64, nodes: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = nodes.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - z;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c
}

/// Relative residual of the equation from centred finite differences of
/// the sampled values. Interior samples only.
pub fn fd_residuals(p: &Problem, xs: &[f64], values: &[Complex64]) -> Result<Vec<Option<f64>>> {
    let n = p.order();
    let r = n.div_ceil(2);
    let mut out = vec![None; xs.len()];
    if xs.len() < 2 * r + 1 {
        return Ok(out);
    }
    for i in r..xs.len() - r {
        let nodes = &xs[i - r..=i + r];
        let w = fd_weights(xs[i], nodes, n);
        let d: Vec<Complex64> = (0..=n)
            .map(|m| (0..nodes.len()).map(|s| values[i - r + s] * w[s][m]).sum())
            .collect();
        let a = p.eval_coeffs(Complex64::new(xs[i], 0.0))?;
        let mut total = d[n];
        let mut scale = d[n].norm();
        for m in 0..n {
            total += a[m] * d[m];
            scale += (a[m] * d[m]).norm();
        }
        out[i] = Some(if scale > 0.0 { total.norm() / scale } else { 0.0 });
    }
    Ok(out)
}

fn grids_from_sweep(
    p: &Problem,
    xs: &[f64],
    sweep: Sweep,
    with_derivs: bool,
) -> Result<Vec<SolutionGrid>> {
    let n = p.order();
    let cols = sweep.samples[0].derivs.len();
    let mut out = Vec::with_capacity(cols);
    for c in 0..cols {
        let values: Vec<Complex64> = sweep.samples.iter().map(|s| s.derivs[c][0]).collect();
        let derivs = with_derivs.then(|| {
            (1..n)
                .map(|m| sweep.samples.iter().map(|s| s.derivs[c][m]).collect())
                .collect()
        });
        let envelopes = Some(
            sweep
                .samples
                .iter()
                .zip(xs)
                .map(|(s, &x)| {
                    s.envelopes.as_ref().map(|e| Envelope {
                        x,
                        f: e[c].clone(),
                    })
                })
                .collect(),
        );
        let residuals = fd_residuals(p, xs, &values)?;
        out.push(SolutionGrid {
            xs: xs.to_vec(),
            values,
            derivs,
            envelopes,
            diagnostics: Diagnostics {
                gaps: sweep.gaps.clone(),
                residuals,
                singularities: sweep.singularities.clone(),
                jumps: sweep.jumps.clone(),
                oracle: None,
            },
        });
    }
    Ok(out)
}

/// Solution sampled on `xs` for initial data `(f, f', ..., f^(n-1))` at
/// `x0`. Derivatives up to `n-1` are kept when `with_derivs` is set.
pub fn solve_grid(
    p: &Problem,
    x0: f64,
    derivs: &[Complex64],
    xs: &[f64],
    with_derivs: bool,
) -> Result<SolutionGrid> {
    let e = ic_to_envelope(p, x0, derivs)?;
    solve_from_envelope(p, &e, xs, with_derivs)
}

/// As [`solve_grid`], starting from an envelope.
pub fn solve_from_envelope(
    p: &Problem,
    e: &Envelope,
    xs: &[f64],
    with_derivs: bool,
) -> Result<SolutionGrid> {
    let n = p.order();
    if e.f.len() != n {
        return Err(Error::Invalid("envelope size differs from the order".into()));
    }
    let start = CMatrix::from_fn(n, 1, |i, _| e.f[i]);
    let sweep = sweep_grid(p, e.x, start, xs)?;
    Ok(grids_from_sweep(p, xs, sweep, with_derivs)?.remove(0))
}

/// The `n` solutions whose envelopes at `x0` are the unit vectors, with
/// derivatives. Fails if their Wronskian vanishes on the grid.
pub fn fundamental_basis(p: &Problem, x0: f64, xs: &[f64]) -> Result<Vec<SolutionGrid>> {
    let n = p.order();
    let sweep = sweep_grid(p, x0, CMatrix::identity(n), xs)?;
    let basis = grids_from_sweep(p, xs, sweep, true)?;
    let w = wronskian(&basis)?;
    for (i, wi) in w.iter().enumerate() {
        let scale: f64 = (0..n)
            .map(|c| {
                (0..n)
                    .map(|m| basis[c].derivative(m, i).map_or(0.0, |z| z.norm()))
                    .fold(0.0, f64::max)
            })
            .product();
        if !(wi.norm() > 1e-14 * scale) {
            return Err(Error::SingularBasis { x: xs[i] });
        }
    }
    Ok(basis)
}

/// `W(x) = det[g_i^(m)(x)]` on the common grid.
pub fn wronskian(basis: &[SolutionGrid]) -> Result<Vec<Complex64>> {
    let n = basis.len();
    let first = basis
        .first()
        .ok_or_else(|| Error::Invalid("empty basis".into()))?;
    if n > 1 && basis.iter().any(|g| g.derivs.is_none()) {
        return Err(Error::MissingDerivatives);
    }
    (0..first.xs.len())
        .map(|i| {
            let mut w = CMatrix::zeros(n, n);
            for (c, g) in basis.iter().enumerate() {
                for m in 0..n {
                    w[(m, c)] = g.derivative(m, i).ok_or(Error::MissingDerivatives)?;
                }
            }
            Ok(w.det())
        })
        .collect()
}

/// Compares the basis Wronskian with `W(x_r) exp(-integral_{x_r}^x a_{n-1})`,
/// where `x_r` is the sample nearest to `x_ref`.
pub fn wronskian_abel(p: &Problem, basis: &[SolutionGrid], x_ref: f64) -> Result<AbelReport> {
    if basis.len() != p.order() {
        return Err(Error::Invalid(format!(
            "basis has {} solutions, order is {}",
            basis.len(),
            p.order()
        )));
    }
    let w = wronskian(basis)?;
    let xs = basis[0].xs.clone();
    let r = (0..xs.len())
        .min_by(|&a, &b| (xs[a] - x_ref).abs().total_cmp(&(xs[b] - x_ref).abs()))
        .unwrap_or(0);
    let mut predicted = vec![ZERO; xs.len()];
    predicted[r] = w[r];
    let legs: [Vec<usize>; 2] = [(r + 1..xs.len()).collect(), (0..r).rev().collect()];
    for order in &legs {
        let mut acc = ZERO;
        let mut x = xs[r];
        for &i in order {
            acc += integrate_leading(p, x, xs[i])?;
            x = xs[i];
            predicted[i] = w[r] * (-acc).exp();
        }
    }
    let max_rel_deviation = w
        .iter()
        .zip(&predicted)
        .map(|(a, b)| (a - b).norm() / b.norm().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max);
    Ok(AbelReport {
        xs,
        wronskian: w,
        predicted,
        x_ref: basis[0].xs[r],
        max_rel_deviation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn r(v: f64) -> Complex64 {
        c(v, 0.0)
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| if i + 1 == n { b } else { a + (b - a) * i as f64 / (n - 1) as f64 })
            .collect()
    }

    #[test]
    fn sine_envelope() {
        let p = Problem::from_strs(&["1", "0"], (0.0, 2.0 * PI)).unwrap();
        let e = ic_to_envelope(&p, 0.0, &[r(0.0), r(1.0)]).unwrap();
        assert!((e.f[0] - c(0.0, 0.5)).norm() < 1e-16);
        assert!((e.f[1] - c(0.0, -0.5)).norm() < 1e-16);
        let fr = track_frame(None, &p, 0.0).unwrap();
        assert!((reconstruct(&e, &fr, 1).unwrap() - r(1.0)).norm() < 1e-16);
        let moved = RootFrame { x: PI / 2.0, ..fr.clone() };
        let e2 = Envelope { x: PI / 2.0, ..e };
        assert!((reconstruct(&e2, &moved, 0).unwrap() - r(1.0)).norm() < 1e-15);
        assert!(reconstruct(&e2, &moved, 2).is_err());
    }

    #[test]
    fn zero_and_scalar_envelopes() {
        let p = Problem::from_strs(&["1", "0"], (0.0, 1.0)).unwrap();
        let e = ic_to_envelope(&p, 0.3, &[r(0.0), r(0.0)]).unwrap();
        assert!(e.f.iter().all(|z| z.norm() == 0.0));
        let q = Problem::from_strs(&["x"], (0.0, 2.0)).unwrap();
        let e = ic_to_envelope(&q, 1.5, &[r(1.0)]).unwrap();
        // k = -x, F = exp(-x0 k) = exp(x0^2).
        assert!((e.f[0] - r((1.5f64 * 1.5).exp())).norm() < 1e-13);
    }

    #[test]
    fn harmonic_grid() {
        let p = Problem::from_strs(&["1", "0"], (0.0, 2.0 * PI)).unwrap();
        let xs = linspace(0.0, 2.0 * PI, 101);
        let g = solve_grid(&p, 0.0, &[r(0.0), r(1.0)], &xs, true).unwrap();
        for (i, &x) in xs.iter().enumerate() {
            assert!((g.values[i] - r(x.sin())).norm() < 1e-13);
            assert!((g.derivative(1, i).unwrap() - r(x.cos())).norm() < 1e-13);
        }
    }

    #[test]
    fn first_order_closed_form() {
        let p = Problem::from_strs(&["x"], (0.0, 1.0)).unwrap();
        let g = solve_grid(&p, 0.0, &[r(1.0)], &[0.0, 0.5, 1.0], false).unwrap();
        assert!((g.values[2] - r((-0.5f64).exp())).norm() < 1e-12);
        assert!(g.derivs.is_none());
    }

    #[test]
    fn backward_from_interior_start() {
        let p = Problem::from_strs(&["2+sin(x)", "0"], (0.0, 2.0)).unwrap();
        let xs = linspace(0.0, 2.0, 21);
        let ic = [r(0.4), r(-1.0)];
        let g = solve_grid(&p, 1.3, &ic, &xs, false).unwrap();
        let o = crate::oracle::oracle_solve(&p, 1.3, &ic, &xs).unwrap();
        for i in 0..xs.len() {
            assert!((g.values[i] - o.values[i]).norm() < 1e-9);
        }
    }

    #[test]
    fn airy_grid_crosses_turning_point() {
        let p = Problem::from_strs(&["x", "0"], (-2.0, 2.0)).unwrap();
        let xs = linspace(-2.0, 2.0, 81);
        let ic = [r(1.0), r(0.0)];
        let g = solve_grid(&p, -2.0, &ic, &xs, true).unwrap();
        assert_eq!(g.diagnostics.singularities.len(), 1);
        assert_eq!(g.diagnostics.jumps.len(), 1);
        let o = crate::oracle::oracle_solve(&p, -2.0, &ic, &xs).unwrap();
        let last = xs.len() - 1;
        let rel = (g.values[last] - o.values[last]).norm() / o.values[last].norm();
        assert!(rel < 1e-2, "rel={rel}");
        // x = 0 is inside the band and comes from a Taylor expansion.
        let mid = 40;
        assert!(g.envelopes.as_ref().unwrap()[mid].is_none());
        assert!((g.values[mid] - o.values[mid]).norm() < 1e-2 * o.values[mid].norm());
    }

    #[test]
    fn harmonic_basis_spans_sine_and_cosine() {
        let p = Problem::from_strs(&["1", "0"], (0.0, 3.0)).unwrap();
        let xs = linspace(0.0, 3.0, 31);
        let b = fundamental_basis(&p, 0.0, &xs).unwrap();
        // g_1 = exp(-jx), g_2 = exp(jx).
        for (i, &x) in xs.iter().enumerate() {
            assert!((b[0].values[i] - c(0.0, -x).exp()).norm() < 1e-14);
            assert!((b[1].values[i] - c(0.0, x).exp()).norm() < 1e-14);
        }
        let abel = wronskian_abel(&p, &b, 0.0).unwrap();
        assert!(abel.max_rel_deviation < 1e-13);
        assert!((abel.wronskian[0] - c(0.0, 2.0)).norm() < 1e-14);
    }

    #[test]
    fn damped_abel_law() {
        let p = Problem::from_strs(&["2+sin(x)", "1"], (0.0, 2.0)).unwrap();
        let xs = linspace(0.0, 2.0, 21);
        let b = fundamental_basis(&p, 0.0, &xs).unwrap();
        let abel = wronskian_abel(&p, &b, 0.0).unwrap();
        assert!(abel.max_rel_deviation < 1e-6, "{}", abel.max_rel_deviation);
        for (i, &x) in xs.iter().enumerate() {
            let want = abel.wronskian[0] * (-x).exp();
            assert!((abel.wronskian[i] - want).norm() < 1e-6 * want.norm());
        }
    }

    #[test]
    fn missing_derivatives() {
        let p = Problem::from_strs(&["1", "0"], (0.0, 1.0)).unwrap();
        let xs = linspace(0.0, 1.0, 5);
        let g = solve_grid(&p, 0.0, &[r(1.0), r(0.0)], &xs, false).unwrap();
        assert!(matches!(
            wronskian_abel(&p, &[g.clone(), g], 0.0),
            Err(Error::MissingDerivatives)
        ));
    }

    #[test]
    fn fd_weights_are_exact_on_polynomials() {
        let nodes = [0.0, 0.1, 0.25, 0.4, 0.6];
        let w = fd_weights(0.25, &nodes, 4);
        for deg in 0..5 {
            for m in 0..=4 {
                let approx: f64 = nodes
                    .iter()
                    .zip(&w)
                    .map(|(x, ws)| x.powi(deg) * ws[m])
                    .sum();
                let exact = if m as i32 > deg {
                    0.0
                } else {
                    (0..m).map(|k| (deg - k as i32) as f64).product::<f64>()
                        * 0.25f64.powi(deg - m as i32)
                };
                assert!((approx - exact).abs() < 1e-8, "deg={deg} m={m}");
            }
        }
    }

    #[test]
    fn grid_checks() {
        let p = Problem::from_strs(&["1", "0"], (0.0, 1.0)).unwrap();
        let ic = [r(1.0), r(0.0)];
        assert!(solve_grid(&p, 0.0, &ic, &[0.5, 0.2], false).is_err());
        assert!(solve_grid(&p, 0.0, &ic, &[], false).is_err());
        assert!(solve_grid(&p, 0.0, &ic, &[0.5, 1.5], false).is_err());
    }
}
