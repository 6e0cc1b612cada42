//! Removal of the `a_{n-1}` term by the substitution `f = w h`.

use num_complex::Complex64;

use super::expr::{CoeffFn, Expr};
use super::Problem;
use crate::error::{Error, Result};

const WEIGHT_PANELS: f64 = 256.0;

fn binomial(m: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (m - i) as f64 / (i + 1) as f64)
}

/// Returns the problem satisfied by `h` together with the weight `w`, where
/// `f = w h` and `w'/w = -a_{n-1}/n`.
///
/// With `P_0 = 1` and `P_{j+1} = P_j' + phi P_j` the derivatives of `w` are
/// `w P_j`, so the new coefficients are
/// `b_k = sum_{m>=k} C(m, k) a_m P_{m-k}`. The weight is anchored at the
/// lower end of the domain, `w(x_lo) = 1`.
pub fn normalize_form(p: &Problem) -> Result<(Problem, CoeffFn)> {
    let n = p.order();
    if n < 2 {
        return Err(Error::Invalid("normalize_form needs order at least 2".into()));
    }
    let one = CoeffFn::constant(Complex64::new(1.0, 0.0));
    if p.leading_vanishes() {
        return Ok((p.clone(), one));
    }
    let (lo, hi) = p.domain();
    let lead = p.coeffs()[n - 1].expr().clone();
    let phi = Expr::mul(Expr::real(-1.0 / n as f64), lead.clone());

    let mut ps = vec![Expr::real(1.0)];
    for j in 0..n {
        let next = Expr::add(ps[j].derivative()?, Expr::mul(phi.clone(), ps[j].clone()));
        ps.push(next);
    }

    let a = |m: usize| -> Expr {
        if m == n {
            Expr::real(1.0)
        } else {
            p.coeffs()[m].expr().clone()
        }
    };
    let mut coeffs = Vec::with_capacity(n);
    for k in 0..n {
        if k == n - 1 {
            // b_{n-1} = a_{n-1} + n phi vanishes identically.
            coeffs.push(CoeffFn::constant(Complex64::new(0.0, 0.0)));
            continue;
        }
        let mut b = Expr::zero();
        for m in k..=n {
            let term = Expr::mul(Expr::real(binomial(m, k)), Expr::mul(a(m), ps[m - k].clone()));
            b = Expr::add(b, term);
        }
        coeffs.push(CoeffFn::from_expr(b));
    }

    let exponent = if lead.depends_on_x() {
        Expr::integral(phi, lo, (hi - lo) / WEIGHT_PANELS)
    } else {
        Expr::mul(phi, Expr::sub(Expr::X, Expr::real(lo)))
    };
    let weight = CoeffFn::from_expr(Expr::call(super::Func::Exp, exponent));

    let mut q = Problem::new(n, coeffs, (lo, hi))?.with_options(p.options.clone())?;
    if let Some(g) = p.grid() {
        q = q.with_grid(g)?;
    }
    Ok((q, weight))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn already_normal_is_unchanged() {
        let p = Problem::from_strs(&["2+sin(x)", "0"], (0.0, 1.0)).unwrap();
        let (q, w) = normalize_form(&p).unwrap();
        assert_eq!(q.coeffs(), p.coeffs());
        assert_eq!(w.eval_real(0.7).unwrap(), r(1.0));
    }

    #[test]
    fn critically_damped_constant_case() {
        let c = 0.8;
        let p = Problem::from_strs(&[&format!("{}", c * c), &format!("{}", 2.0 * c)], (0.0, 2.0))
            .unwrap();
        let (q, w) = normalize_form(&p).unwrap();
        for i in 0..=20 {
            let x = 0.1 * i as f64;
            let v = q.eval_coeffs(r(x)).unwrap();
            assert!(v[0].norm() < 1e-14 && v[1].norm() == 0.0);
            assert!((w.eval_real(x).unwrap() - r((-c * x).exp())).norm() < 1e-14);
        }
    }

    #[test]
    fn variable_leading_coefficient() {
        // f'' + x f' + f = 0: phi = -x/2, P1 = -x/2, P2 = -1/2 + x^2/4,
        // b0 = 1 + x P1 + P2 = 1/2 - x^2/4.
        let p = Problem::from_strs(&["1", "x"], (0.0, 1.0)).unwrap();
        let (q, w) = normalize_form(&p).unwrap();
        for i in 0..100 {
            let x = i as f64 / 99.0;
            let v = q.eval_coeffs(r(x)).unwrap();
            assert!(v[1].norm() < 1e-12);
            assert!((v[0] - r(0.5 - x * x / 4.0)).norm() < 1e-13);
            assert!((w.eval_real(x).unwrap() - r((-x * x / 4.0).exp())).norm() < 1e-13);
        }
    }

    #[test]
    fn third_order_coefficients() {
        // a2 = 3 constant, phi = -1: b1 = a1 + 2 a2 P1 + 3 P2 = a1 - 6 + 3,
        // b0 = a0 + a1 P1 + a2 P2 + P3 = a0 - a1 + 3 - 1.
        let p = Problem::from_strs(&["x", "2", "3"], (0.0, 1.0)).unwrap();
        let (q, _) = normalize_form(&p).unwrap();
        let v = q.eval_coeffs(r(0.5)).unwrap();
        assert!((v[0] - r(0.5 - 2.0 + 2.0)).norm() < 1e-14);
        assert!((v[1] - r(2.0 - 3.0)).norm() < 1e-14);
    }

    #[test]
    fn unsupported_leading_coefficient() {
        let p = Problem::from_strs(&["1", "1", "abs(x)"], (0.0, 1.0)).unwrap();
        assert!(matches!(normalize_form(&p), Err(Error::Unsupported(_))));
    }
}
