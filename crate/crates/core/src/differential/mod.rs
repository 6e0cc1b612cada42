//! The differential transfer matrix: kernel, propagation over smooth
//! segments, closed-form determinants and the treatment of singular points.

mod singular;
pub(crate) mod sweep;

use num_complex::Complex64;

use crate::charroots::{lex_order, relative_gap, track_frame, RootFrame};
use crate::coeffs::{Method, Problem};
use crate::error::{Error, Result};
use crate::jump::TransferMatrix;
use crate::linalg::{mat_exp, vandermonde, vandermonde_inverse, CMatrix};
use crate::quad::{composite, GaussLegendre};

pub use singular::{
    canonical_jump, find_singularities, propagate_robust, singular_jump, SingularityKind,
    SingularityReport,
};

/// Kernel-norm budget per RK4 step.
const THETA: f64 = 0.01;
/// Phase advance budget of the off-diagonal kernel factors per step.
const PHASE_BUDGET: f64 = 0.5;
const MAX_SUBSTEPS: f64 = 1e7;

/// `M = integral of U` over `[x_from, x_to]` and its split into the jump part
/// `J` and the diagonal propagation part `T = integral of K`.
#[derive(Debug, Clone)]
pub struct TransferExponent {
    pub m: CMatrix,
    pub j: CMatrix,
    pub t: CMatrix,
    pub x_from: f64,
    pub x_to: f64,
}

pub(crate) fn check_in_domain(p: &Problem, xs: &[f64]) -> Result<()> {
    let (lo, hi) = p.domain();
    let slack = 1e-12 * (hi - lo);
    for &x in xs {
        if !(x >= lo - slack && x <= hi + slack) {
            return Err(Error::Invalid(format!("x = {x} lies outside the domain [{lo}, {hi}]")));
        }
    }
    Ok(())
}

fn check_gap(p: &Problem, fr: &RootFrame) -> Result<()> {
    let (rel, pair) = relative_gap(&fr.roots);
    if rel < p.options.degeneracy_eps {
        return Err(Error::Degenerate {
            x: fr.x,
            pair,
            gap: fr.gap,
        });
    }
    Ok(())
}

/// `exp(-xK) D^{-1} C K' exp(xK)`.
fn coupling(fr: &RootFrame) -> Result<CMatrix> {
    let n = fr.order();
    let (_, c) = vandermonde(fr);
    let g = vandermonde_inverse(fr)?;
    let gc = &g * &c;
    let x = fr.x;
    Ok(CMatrix::from_fn(n, n, |i, j| {
        gc[(i, j)] * fr.droots[j] * ((fr.roots[j] - fr.roots[i]) * x).exp()
    }))
}

/// `U = -x K' - exp(-xK) D^{-1} C K' exp(xK)` for any order.
pub fn kernel_general(fr: &RootFrame) -> Result<CMatrix> {
    let mut u = coupling(fr)?.scale(Complex64::new(-1.0, 0.0));
    for i in 0..fr.order() {
        u[(i, i)] -= fr.droots[i] * fr.x;
    }
    Ok(u)
}

fn kernel_2x2(fr: &RootFrame) -> CMatrix {
    let (k1, k2) = (fr.roots[0], fr.roots[1]);
    let (d1, d2) = (fr.droots[0], fr.droots[1]);
    let x = fr.x;
    let diff = k1 - k2;
    let one = Complex64::new(1.0, 0.0);
    CMatrix::from_rows(&[
        vec![-(one * x + one / diff) * d1, d2 / -diff * (-diff * x).exp()],
        vec![d1 / diff * (diff * x).exp(), -(one * x - one / diff) * d2],
    ])
}

/// Kernel matrix at a tracked frame. Order two uses the explicit 2×2 form.
pub fn kernel_at(p: &Problem, fr: &RootFrame) -> Result<CMatrix> {
    check_gap(p, fr)?;
    let u = match fr.order() {
        1 => CMatrix::diag(&[-fr.droots[0] * fr.x]),
        2 => kernel_2x2(fr),
        _ => kernel_general(fr)?,
    };
    if !u.is_finite() {
        return Err(Error::Overflow("kernel matrix"));
    }
    Ok(u)
}

/// Integrand of `J`: `-exp(-xK) D^{-1} C K' exp(xK) - (K + x K')`.
fn j_integrand(fr: &RootFrame) -> Result<CMatrix> {
    let mut j = coupling(fr)?.scale(Complex64::new(-1.0, 0.0));
    for i in 0..fr.order() {
        j[(i, i)] -= fr.roots[i] + fr.droots[i] * fr.x;
    }
    Ok(j)
}

/// Largest `|d/dx [x (k_i - k_j)]|`, the oscillation rate of the kernel.
fn phase_rate(fr: &RootFrame) -> f64 {
    let mut rate: f64 = 0.0;
    for i in 0..fr.order() {
        for j in 0..i {
            let d = fr.roots[i] - fr.roots[j] + (fr.droots[i] - fr.droots[j]) * fr.x;
            rate = rate.max(d.norm());
        }
    }
    rate
}

/// RK4 for `dY/dx = U Y` from `start` to `x2`, tracking frames. Returns the
/// propagated state in the tracked basis and the frame at `x2`.
pub(crate) fn ode_segment(
    p: &Problem,
    start: &RootFrame,
    x2: f64,
    state: &CMatrix,
) -> Result<(CMatrix, RootFrame)> {
    let mut frame = start.clone();
    let mut y = state.clone();
    let span = x2 - start.x;
    if span == 0.0 {
        return Ok((y, frame));
    }
    let nominal = (span.abs() / p.options.step).ceil().max(1.0) as usize;
    let mut u0 = kernel_at(p, &frame)?;
    for s in 0..nominal {
        let xa = frame.x;
        let xb = if s + 1 == nominal {
            x2
        } else {
            start.x + span * (s + 1) as f64 / nominal as f64
        };
        let len = xb - xa;
        let rate = (u0.norm_inf() / THETA).max(phase_rate(&frame) / PHASE_BUDGET);
        let subs = (len.abs() * rate).ceil().max(1.0);
        if subs > MAX_SUBSTEPS {
            return Err(Error::StepUnderflow { x: xa });
        }
        let subs = subs as usize;
        for r in 0..subs {
            let x = frame.x;
            let xe = if r + 1 == subs {
                xb
            } else {
                xa + len * (r + 1) as f64 / subs as f64
            };
            let h = xe - x;
            let fm = track_frame(Some(&frame), p, x + 0.5 * h)?;
            let um = kernel_at(p, &fm)?;
            let f1 = track_frame(Some(&fm), p, xe)?;
            let u1 = kernel_at(p, &f1)?;
            let hc = Complex64::new(h, 0.0);
            let k1 = &u0 * &y;
            let k2 = &um * &(&y + &k1.scale(hc * 0.5));
            let k3 = &um * &(&y + &k2.scale(hc * 0.5));
            let k4 = &u1 * &(&y + &k3.scale(hc));
            let incr = &(&k1 + &k4) + &(&k2 + &k3).scale(Complex64::new(2.0, 0.0));
            y = &y + &incr.scale(hc / 6.0);
            frame = f1;
            u0 = u1;
        }
    }
    if !y.is_finite() {
        return Err(Error::Overflow("transfer matrix"));
    }
    Ok((y, frame))
}

/// Exponential propagation over one segment in the tracked basis.
pub(crate) fn exp_segment(
    p: &Problem,
    start: &RootFrame,
    x2: f64,
) -> Result<(TransferExponent, RootFrame)> {
    let n = start.order();
    let mut m = CMatrix::zeros(n, n);
    let mut j = CMatrix::zeros(n, n);
    let mut t = vec![Complex64::new(0.0, 0.0); n];
    let mut frame = start.clone();
    let span = x2 - start.x;
    if span != 0.0 {
        let panels = (span.abs() / p.options.step).ceil().max(1.0) as usize;
        let rule = GaussLegendre::new(p.options.quadrature_points);
        for (x, w) in composite(&rule, start.x, x2, panels) {
            frame = track_frame(Some(&frame), p, x)?;
            let wc = Complex64::new(w, 0.0);
            m = &m + &kernel_at(p, &frame)?.scale(wc);
            j = &j + &j_integrand(&frame)?.scale(wc);
            for (ti, ki) in t.iter_mut().zip(&frame.roots) {
                *ti += ki * w;
            }
        }
        frame = track_frame(Some(&frame), p, x2)?;
    }
    let exponent = TransferExponent {
        m,
        j,
        t: CMatrix::diag(&t),
        x_from: start.x,
        x_to: x2,
    };
    Ok((exponent, frame))
}

/// Segment transfer in the tracked basis by the configured method.
pub(crate) fn segment(p: &Problem, start: &RootFrame, x2: f64) -> Result<(CMatrix, RootFrame)> {
    match p.options.method {
        Method::Ode => ode_segment(p, start, x2, &CMatrix::identity(start.order())),
        Method::Exp => {
            let (e, end) = exp_segment(p, start, x2)?;
            Ok((mat_exp(&e.m)?, end))
        }
    }
}

/// Transfer matrix from `x1` to `x2` by integrating `dQ/dx = U Q`.
/// Both endpoint bases are the lexicographically ordered frames.
pub fn propagate_ode(p: &Problem, x1: f64, x2: f64) -> Result<TransferMatrix> {
    check_in_domain(p, &[x1, x2])?;
    let start = track_frame(None, p, x1)?;
    let n = p.order();
    let (y, end) = ode_segment(p, &start, x2, &CMatrix::identity(n))?;
    Ok(TransferMatrix {
        x_from: x1,
        x_to: x2,
        q: y.permute_rows(&lex_order(&end.roots)),
    })
}

/// Transfer matrix `exp(integral of U)` with the exponent and its split.
/// The exponent is expressed in the slots continued from the ordered frame
/// at `x1`; the returned matrix maps into the ordered frame at `x2`.
pub fn propagate_exp(p: &Problem, x1: f64, x2: f64) -> Result<(TransferMatrix, TransferExponent)> {
    check_in_domain(p, &[x1, x2])?;
    let start = track_frame(None, p, x1)?;
    let (e, end) = exp_segment(p, &start, x2)?;
    let q = mat_exp(&e.m)?.permute_rows(&lex_order(&end.roots));
    Ok((
        TransferMatrix {
            x_from: x1,
            x_to: x2,
            q,
        },
        e,
    ))
}

/// `integral of a_{n-1}` over `[x1, x2]`.
pub(crate) fn integrate_leading(p: &Problem, x1: f64, x2: f64) -> Result<Complex64> {
    if p.leading_vanishes() || x1 == x2 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let lead = &p.coeffs()[p.order() - 1];
    let panels = ((x2 - x1).abs() / p.options.step).ceil().max(1.0) as usize;
    let rule = GaussLegendre::new(p.options.quadrature_points.max(8));
    let mut acc = Complex64::new(0.0, 0.0);
    for (x, w) in composite(&rule, x1, x2, panels) {
        acc += lead.eval_real(x).map_err(|e| match e {
            Error::Eval { x, message, .. } => Error::Eval {
                index: Some(p.order() - 1),
                x,
                message,
            },
            other => other,
        })? * w;
    }
    Ok(acc)
}

/// Closed-form `det Q_{x1 -> x2}`:
/// `exp(x1 sum k(x1) - x2 sum k(x2) + integral sum k) prod_{i>j} (k_i(x1) - k_j(x1)) / (k_i(x2) - k_j(x2))`,
/// with `sum k = -a_{n-1}`. Slot orders of the frames fix the sign.
pub fn transfer_det_formula(p: &Problem, fr1: &RootFrame, fr2: &RootFrame) -> Result<Complex64> {
    check_gap(p, fr1)?;
    check_gap(p, fr2)?;
    let n = fr1.order();
    let mut ratio = Complex64::new(1.0, 0.0);
    for i in 0..n {
        for j in 0..i {
            ratio *= (fr1.roots[i] - fr1.roots[j]) / (fr2.roots[i] - fr2.roots[j]);
        }
    }
    if p.leading_vanishes() {
        return Ok(ratio);
    }
    let integral = -integrate_leading(p, fr1.x, fr2.x)?;
    let exponent = fr1.root_sum() * fr1.x - fr2.root_sum() * fr2.x + integral;
    Ok(exponent.exp() * ratio)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn constant_coefficients_have_zero_kernel() {
        let p = Problem::from_strs(&["1", "0"], (0.0, 1.0)).unwrap();
        let fr = track_frame(None, &p, 0.4).unwrap();
        assert_eq!(kernel_at(&p, &fr).unwrap().max_abs(), 0.0);
        let q = propagate_ode(&p, 0.0, 1.0).unwrap();
        assert!(q.q.max_diff(&CMatrix::identity(2)) < 1e-15);
    }

    #[test]
    fn scalar_kernel_and_exponent() {
        // k = -x, U = -x k' = x, integral over [0, 1] is 1/2.
        let p = Problem::from_strs(&["x"], (0.0, 1.0)).unwrap();
        let fr = track_frame(None, &p, 0.3).unwrap();
        assert!((kernel_at(&p, &fr).unwrap()[(0, 0)] - c(0.3, 0.0)).norm() < 1e-15);
        let (q, e) = propagate_exp(&p, 0.0, 1.0).unwrap();
        assert!((e.m[(0, 0)] - c(0.5, 0.0)).norm() < 1e-13);
        assert!((q.q[(0, 0)] - c(0.5f64.exp(), 0.0)).norm() < 1e-12);
        let ode = propagate_ode(&p, 0.0, 1.0).unwrap();
        assert!(ode.q.max_diff(&q.q) < 1e-9);
    }

    #[test]
    fn two_by_two_path_matches_general_form() {
        let p = Problem::from_strs(&["2+sin(x)", "0.3*cos(x)"], (0.0, 3.0)).unwrap();
        for i in 0..10 {
            let fr = track_frame(None, &p, 0.3 * i as f64).unwrap();
            let a = kernel_2x2(&fr);
            let b = kernel_general(&fr).unwrap();
            assert!(a.max_diff(&b) < 1e-12 * (1.0 + b.max_abs()));
        }
    }

    #[test]
    fn euler_cauchy_kernel_at_one() {
        // a0 = -1/x^4: at x = 1, K' = -K and U = 1.5 I + N with N traceless.
        let p = Problem::from_strs(&["-1/x^4", "0", "0", "0"], (1.0, 2.0)).unwrap();
        let fr = track_frame(None, &p, 1.0).unwrap();
        let u = kernel_at(&p, &fr).unwrap();
        assert!((u.trace() - c(6.0, 0.0)).norm() < 1e-13);
        for i in 0..4 {
            assert!((fr.droots[i] + fr.roots[i]).norm() < 1e-14);
        }
    }

    #[test]
    fn ode_determinant_matches_formula() {
        let p = Problem::from_strs(&["2+sin(x)", "0"], (0.0, 1.0)).unwrap();
        let q = propagate_ode(&p, 0.0, 1.0).unwrap();
        let want = (2.0f64 / (2.0 + 1f64.sin())).sqrt();
        assert!((q.det() - c(want, 0.0)).norm() < 1e-9);
        let f1 = track_frame(None, &p, 0.0).unwrap();
        let f2 = track_frame(None, &p, 1.0).unwrap();
        let d = transfer_det_formula(&p, &f1, &f2).unwrap();
        assert!((d - c(want, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn damped_determinant_formula() {
        let p = Problem::from_strs(&["3+x", "1+0.5*x", "0.2*x"], (0.0, 1.0)).unwrap();
        let q = propagate_ode(&p, 0.1, 0.9).unwrap();
        let f1 = track_frame(None, &p, 0.1).unwrap();
        let f2 = track_frame(None, &p, 0.9).unwrap();
        let d = transfer_det_formula(&p, &f1, &f2).unwrap();
        assert!((q.det() - d).norm() < 1e-8 * d.norm(), "{} vs {}", q.det(), d);
    }

    #[test]
    fn split_exponent_adds_up() {
        let p = Problem::from_strs(&["2+sin(x)", "x*0.2"], (0.0, 1.0)).unwrap();
        let (_, e) = propagate_exp(&p, 0.0, 1.0).unwrap();
        assert!((&e.j + &e.t).max_diff(&e.m) < 1e-12);
        let off_diag = (0..2).flat_map(|i| (0..2).map(move |j| (i, j))).filter(|(i, j)| i != j);
        for (i, j) in off_diag {
            assert_eq!(e.t[(i, j)], c(0.0, 0.0));
        }
    }

    #[test]
    fn turning_point_is_refused() {
        let p = Problem::from_strs(&["x", "0"], (-1.0, 1.0)).unwrap();
        assert!(matches!(propagate_ode(&p, 0.0, 0.5), Err(Error::Degenerate { .. })));
    }

    #[test]
    fn identity_for_empty_span() {
        let p = Problem::from_strs(&["2+sin(x)", "0"], (0.0, 1.0)).unwrap();
        assert_eq!(propagate_ode(&p, 0.5, 0.5).unwrap().q, CMatrix::identity(2));
    }
}
