//! Roots of the pointwise characteristic polynomial `sum_m a_m(x) k^m` and
//! their continuation along `x`.

use num_complex::Complex64;

use crate::coeffs::Problem;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

const MAX_ITER: usize = 500;
const RESIDUAL_TOL: f64 = 1e-10;
const DERIV_FLOOR: f64 = 1e-14;

/// The tracked roots `k_i(x)` and their derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct RootFrame {
    pub x: f64,
    pub roots: Vec<Complex64>,
    pub droots: Vec<Complex64>,
    /// Minimum pairwise distance of the roots; infinite for `n = 1`.
    pub gap: f64,
}

impl RootFrame {
    pub fn order(&self) -> usize {
        self.roots.len()
    }

    /// `gap / (1 + max |k_i|)`, the quantity compared to `degeneracy_eps`.
    pub fn relative_gap(&self) -> f64 {
        relative_gap(&self.roots).0
    }

    pub fn root_sum(&self) -> Complex64 {
        self.roots.iter().sum()
    }

    /// Frame with slots reordered: slot `i` of the result is slot `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> RootFrame {
        RootFrame {
            x: self.x,
            roots: perm.iter().map(|&i| self.roots[i]).collect(),
            droots: perm.iter().map(|&i| self.droots[i]).collect(),
            gap: self.gap,
        }
    }
}

/// Evaluates `sum_m a_m k^m` with `a_n = 1` and its `k`-derivative.
fn poly_and_deriv(a: &[Complex64], k: Complex64) -> (Complex64, Complex64) {
    let mut p = ONE;
    let mut dp = ZERO;
    for &am in a.iter().rev() {
        dp = dp * k + p;
        p = p * k + am;
    }
    (p, dp)
}

fn residual_ok(a: &[Complex64], k: Complex64) -> bool {
    let (p, _) = poly_and_deriv(a, k);
    let n = a.len();
    let mut scale = k.norm().powi(n as i32);
    let mut km = ONE;
    for &am in a {
        scale = scale.max((am * km).norm());
        km *= k;
    }
    p.norm() <= RESIDUAL_TOL * (1.0 + scale)
}

/// All roots of the monic polynomial `k^n + a_{n-1} k^{n-1} + ... + a_0`,
/// with multiplicities. The error carries `x = NaN`; callers that know the
/// location substitute it.
pub fn roots_at(a: &[Complex64]) -> Result<Vec<Complex64>> {
    let fail = || Error::RootNonConvergence { x: f64::NAN };
    if a.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(fail());
    }
    let roots = match a.len() {
        0 => Vec::new(),
        1 => vec![-a[0]],
        2 => quadratic(a[1], a[0]),
        _ => aberth(a).ok_or_else(fail)?,
    };
    Ok(roots)
}

fn quadratic(b: Complex64, c: Complex64) -> Vec<Complex64> {
    let s = (b * b - c * 4.0).sqrt();
    let plus = -b + s;
    let minus = -b - s;
    let q = if plus.norm() >= minus.norm() { plus } else { minus } * 0.5;
    if q == ZERO {
        vec![ZERO, ZERO]
    } else {
        vec![q, c / q]
    }
}

fn aberth(a: &[Complex64]) -> Option<Vec<Complex64>> {
    let n = a.len();
    // Cauchy-type bound on the root moduli.
    let radius = a
        .iter()
        .enumerate()
        .map(|(m, z)| z.norm().powf(1.0 / (n - m) as f64))
        .fold(0.0, f64::max)
        .max(1e-300);
    let mut z: Vec<Complex64> = (0..n)
        .map(|i| {
            let t = 2.0 * std::f64::consts::PI * i as f64 / n as f64 + 0.4;
            Complex64::from_polar(radius, t)
        })
        .collect();
    let mut converged = vec![false; n];
    for _ in 0..MAX_ITER {
        let mut all = true;
        for i in 0..n {
            if converged[i] {
                continue;
            }
            let (p, dp) = poly_and_deriv(a, z[i]);
            if p == ZERO {
                converged[i] = true;
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let d = z[i] - z[j];
                    if d == ZERO {
                        ZERO
                    } else {
                        ONE / d
                    }
                })
                .sum();
            let w = ratio / (ONE - ratio * repulsion);
            if !(w.re.is_finite() && w.im.is_finite()) {
                all = false;
                continue;
            }
            z[i] -= w;
            if w.norm() <= 4.0 * f64::EPSILON * z[i].norm().max(f64::MIN_POSITIVE) {
                converged[i] = true;
            } else {
                all = false;
            }
        }
        if all {
            break;
        }
    }
    for zi in z.iter_mut() {
        for _ in 0..2 {
            let (p, dp) = poly_and_deriv(a, *zi);
            if dp == ZERO || p == ZERO {
                break;
            }
            let next = *zi - p / dp;
            if poly_and_deriv(a, next).0.norm() < p.norm() {
                *zi = next;
            } else {
                break;
            }
        }
    }
    z.iter().all(|&k| residual_ok(a, k)).then_some(z)
}

/// Minimum pairwise distance and the pair attaining it.
pub fn min_gap(roots: &[Complex64]) -> (f64, (usize, usize)) {
    let mut best = (f64::INFINITY, (0, 0));
    for i in 0..roots.len() {
        for j in i + 1..roots.len() {
            let d = (roots[i] - roots[j]).norm();
            if d < best.0 {
                best = (d, (i, j));
            }
        }
    }
    best
}

/// Minimum gap scaled by `1 + max |k_i|`, with the attaining pair.
pub fn relative_gap(roots: &[Complex64]) -> (f64, (usize, usize)) {
    let (g, pair) = min_gap(roots);
    let scale = 1.0 + roots.iter().map(|k| k.norm()).fold(0.0, f64::max);
    (g / scale, pair)
}

/// Permutation sorting roots by real part, then imaginary part. Real parts
/// within a small relative tolerance count as equal.
pub fn lex_order(roots: &[Complex64]) -> Vec<usize> {
    let scale = 1.0 + roots.iter().map(|k| k.norm()).fold(0.0, f64::max);
    let tol = 1e-9 * scale;
    let mut idx: Vec<usize> = (0..roots.len()).collect();
    idx.sort_by(|&i, &j| roots[i].re.total_cmp(&roots[j].re));
    let mut out = Vec::with_capacity(idx.len());
    let mut start = 0;
    while start < idx.len() {
        let base = roots[idx[start]].re;
        let mut end = start + 1;
        while end < idx.len() && roots[idx[end]].re - base <= tol {
            end += 1;
        }
        let mut group = idx[start..end].to_vec();
        group.sort_by(|&i, &j| roots[i].im.total_cmp(&roots[j].im));
        out.extend(group);
        start = end;
    }
    out
}

/// Permutation `perm` with `perm[i]` the index in `roots` assigned to slot
/// `i` of `targets`, minimising the total distance.
pub fn match_roots(targets: &[Complex64], roots: &[Complex64]) -> Vec<usize> {
    let n = targets.len();
    let mut pairs: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n);
    for (i, t) in targets.iter().enumerate() {
        for (j, r) in roots.iter().enumerate() {
            pairs.push(((t - r).norm(), i, j));
        }
    }
    // Nearest neighbours first; accept when no conflict arises.
    let nearest: Vec<usize> = (0..n)
        .map(|i| {
            (0..n)
                .min_by(|&a, &b| pairs[i * n + a].0.total_cmp(&pairs[i * n + b].0))
                .unwrap_or(0)
        })
        .collect();
    let mut taken = vec![false; n];
    let mut conflict = false;
    for &j in &nearest {
        conflict |= taken[j];
        taken[j] = true;
    }
    if !conflict {
        return nearest;
    }
    if n <= 8 {
        return best_permutation(n, |i, j| pairs[i * n + j].0);
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut perm = vec![usize::MAX; n];
    let mut used = vec![false; n];
    for (_, i, j) in pairs {
        if perm[i] == usize::MAX && !used[j] {
            perm[i] = j;
            used[j] = true;
        }
    }
    perm
}

fn best_permutation(n: usize, cost: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    fn walk(
        slot: usize,
        n: usize,
        cost: &dyn Fn(usize, usize) -> f64,
        used: &mut [bool],
        cur: &mut Vec<usize>,
        acc: f64,
        best: &mut (f64, Vec<usize>),
    ) {
        if acc >= best.0 {
            return;
        }
        if slot == n {
            *best = (acc, cur.clone());
            return;
        }
        for j in 0..n {
            if !used[j] {
                used[j] = true;
                cur.push(j);
                walk(slot + 1, n, cost, used, cur, acc + cost(slot, j), best);
                cur.pop();
                used[j] = false;
            }
        }
    }
    let mut best = (f64::INFINITY, (0..n).collect());
    walk(0, n, &cost, &mut vec![false; n], &mut Vec::new(), 0.0, &mut best);
    best.1
}

/// Roots at `x`, ordered lexicographically when `prev` is `None` and
/// otherwise matched to the slots of `prev` continued linearly to `x`.
/// Does not check for degeneracy.
pub fn ordered_roots(prev: Option<&RootFrame>, p: &Problem, x: f64) -> Result<Vec<Complex64>> {
    let a = p.eval_coeffs(Complex64::new(x, 0.0))?;
    let roots = roots_at(&a).map_err(|e| match e {
        Error::RootNonConvergence { .. } => Error::RootNonConvergence { x },
        other => other,
    })?;
    let perm = match prev {
        None => lex_order(&roots),
        Some(fr) => {
            let dx = x - fr.x;
            let pred: Vec<Complex64> = fr
                .roots
                .iter()
                .zip(&fr.droots)
                .map(|(k, dk)| k + dk * dx)
                .collect();
            match_roots(&pred, &roots)
        }
    };
    Ok(perm.into_iter().map(|i| roots[i]).collect())
}

/// Tracked frame at `x`. Fails with [`Error::Degenerate`] when the relative
/// gap is below `degeneracy_eps` or a root derivative cannot be formed.
pub fn track_frame(prev: Option<&RootFrame>, p: &Problem, x: f64) -> Result<RootFrame> {
    let roots = ordered_roots(prev, p, x)?;
    let (gap, pair) = min_gap(&roots);
    let (rel, _) = relative_gap(&roots);
    if rel < p.options.degeneracy_eps {
        return Err(Error::Degenerate { x, pair, gap });
    }
    let xc = Complex64::new(x, 0.0);
    let a = p.eval_coeffs(xc)?;
    let da = p.eval_coeff_derivs(xc)?;
    let mut droots = Vec::with_capacity(roots.len());
    for (i, &k) in roots.iter().enumerate() {
        let (_, dp) = poly_and_deriv(&a, k);
        if dp.norm() < DERIV_FLOOR {
            let j = (0..roots.len())
                .filter(|&j| j != i)
                .min_by(|&u, &v| (roots[u] - k).norm().total_cmp(&(roots[v] - k).norm()))
                .unwrap_or(i);
            return Err(Error::Degenerate {
                x,
                pair: (i.min(j), i.max(j)),
                gap,
            });
        }
        let mut num = ZERO;
        let mut km = ONE;
        for &dam in &da {
            num += dam * km;
            km *= k;
        }
        droots.push(-num / dp);
    }
    Ok(RootFrame {
        x,
        roots,
        droots,
        gap,
    })
}

/// `Phi_i = x k_i(x)`.
pub fn phase_vector(fr: &RootFrame) -> Vec<Complex64> {
    fr.roots.iter().map(|k| k * fr.x).collect()
}
