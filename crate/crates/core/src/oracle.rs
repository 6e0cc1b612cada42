//! Reference solutions from the first-order companion system, integrated
//! with classical RK4 and refined by step halving. Shares nothing with the
//! transfer-matrix path except coefficient evaluation.

use num_complex::Complex64;

use crate::coeffs::Problem;
use crate::error::{Error, Result};
use crate::solution::{Diagnostics, OracleInfo, SolutionGrid};

const TARGET: f64 = 1e-10;
const MAX_HALVINGS: usize = 14;

/// `(f, f', ..., f^(n-1))` at `x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionState {
    pub x: f64,
    pub y: Vec<Complex64>,
}

/// `y_i' = y_{i+1}` for `i < n`, `y_n' = -sum_m a_m(x) y_{m+1}`.
pub fn companion_rhs(p: &Problem, s: &CompanionState) -> Result<Vec<Complex64>> {
    let a = p.eval_coeffs(Complex64::new(s.x, 0.0))?;
    let n = s.y.len();
    let mut out: Vec<Complex64> = s.y[1..].to_vec();
    let last: Complex64 = a.iter().zip(&s.y).map(|(am, ym)| am * ym).sum();
    out.push(-last);
    debug_assert_eq!(out.len(), n);
    Ok(out)
}

fn rk4_step(p: &Problem, x: f64, y: &[Complex64], h: f64) -> Result<Vec<Complex64>> {
    let eval = |x: f64, y: Vec<Complex64>| companion_rhs(p, &CompanionState { x, y });
    let axpy = |a: &[Complex64], s: f64, b: &[Complex64]| -> Vec<Complex64> {
        a.iter().zip(b).map(|(u, v)| u + v * s).collect()
    };
    let k1 = eval(x, y.to_vec())?;
    let k2 = eval(x + 0.5 * h, axpy(y, 0.5 * h, &k1))?;
    let k3 = eval(x + 0.5 * h, axpy(y, 0.5 * h, &k2))?;
    let k4 = eval(x + h, axpy(y, h, &k3))?;
    Ok((0..y.len())
        .map(|i| y[i] + (k1[i] + (k2[i] + k3[i]) * 2.0 + k4[i]) * (h / 6.0))
        .collect())
}

fn march(p: &Problem, x0: f64, y0: &[Complex64], xs: &[f64], h: f64) -> Result<Vec<Vec<Complex64>>> {
    let mut out = vec![Vec::new(); xs.len()];
    let split = xs.partition_point(|&x| x < x0);
    let legs: [Vec<usize>; 2] = [(split..xs.len()).collect(), (0..split).rev().collect()];
    for order in &legs {
        let mut x = x0;
        let mut y = y0.to_vec();
        for &i in order.iter() {
            let span = xs[i] - x;
            let steps = (span.abs() / h).ceil() as usize;
            for s in 0..steps {
                let xe = if s + 1 == steps {
                    xs[i]
                } else {
                    x + (xs[i] - x) / (steps - s) as f64
                };
                y = rk4_step(p, x, &y, xe - x)?;
                x = xe;
            }
            x = xs[i];
            out[i] = y.clone();
        }
    }
    Ok(out)
}

fn deviation(a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(u, v)| {
            let diff = u.iter().zip(v).map(|(s, t)| (s - t).norm()).fold(0.0, f64::max);
            let scale = v.iter().map(|t| t.norm()).fold(0.0, f64::max);
            diff / scale.max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max)
}

/// Companion-system solution on `xs` with initial data
/// `(f, f', ..., f^(n-1))` at `x0`. The step is halved until two successive
/// results agree to relative `1e-10`.
pub fn oracle_solve(p: &Problem, x0: f64, derivs: &[Complex64], xs: &[f64]) -> Result<SolutionGrid> {
    let n = p.order();
    if derivs.len() != n {
        return Err(Error::Invalid(format!(
            "initial data needs {n} values, got {}",
            derivs.len()
        )));
    }
    crate::solution::check_grid(p, x0, xs)?;
    let extent = xs
        .iter()
        .map(|x| (x - x0).abs())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let mut h = (extent / 512.0).min(1e-2);
    let mut prev = march(p, x0, derivs, xs, h)?;
    let mut dev = f64::INFINITY;
    for _ in 0..MAX_HALVINGS {
        h *= 0.5;
        let next = march(p, x0, derivs, xs, h)?;
        dev = deviation(&prev, &next);
        prev = next;
        if dev < TARGET {
            break;
        }
    }
    if !(dev < TARGET) {
        return Err(Error::OracleNonConvergence {
            step: h,
            deviation: dev,
        });
    }
    let values = prev.iter().map(|y| y[0]).collect();
    let derivs = (1..n).map(|m| prev.iter().map(|y| y[m]).collect()).collect();
    Ok(SolutionGrid {
        xs: xs.to_vec(),
        values,
        derivs: Some(derivs),
        envelopes: None,
        diagnostics: Diagnostics {
            oracle: Some(OracleInfo {
                step: h,
                deviation: dev,
            }),
            ..Diagnostics::default()
        },
    })
}
