//! Line-oriented `key = value` problem files.
//!
//! ```text
//! # Airy-type equation f'' + x f = 0
//! order = 2
//! a0 = x
//! domain = [-2, 2]
//! ic = [1, 0]
//! grid = 401
//! ```
//!
//! `#` starts a comment and `;` separates statements on one line. Omitted
//! coefficients are zero.

use std::collections::BTreeMap;

use num_complex::Complex64;

use super::expr::{parse_expr, CoeffFn};
use super::{Method, Problem, SolverOptions};
use crate::error::{Error, Result};

struct Stmt<'a> {
    line: usize,
    key: &'a str,
    key_col: usize,
    value: &'a str,
    value_col: usize,
}

fn syntax(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Syntax {
        line,
        column,
        message: message.into(),
    }
}

fn statements(text: &str) -> Result<Vec<Stmt<'_>>> {
    let mut out = Vec::new();
    for (li, raw) in text.lines().enumerate() {
        let line = li + 1;
        let body = raw.split('#').next().unwrap_or("");
        let mut start = 0;
        for piece in body.split(';') {
            let piece_start = start;
            start += piece.len() + 1;
            if piece.trim().is_empty() {
                continue;
            }
            let col_of = |byte: usize| body[..byte].chars().count() + 1;
            let lead = piece.len() - piece.trim_start().len();
            let Some(eq) = piece.find('=') else {
                return Err(syntax(line, col_of(piece_start + lead), "expected 'key = value'"));
            };
            let key_raw = &piece[..eq];
            let key = key_raw.trim();
            if key.is_empty() {
                return Err(syntax(line, col_of(piece_start + eq), "missing key before '='"));
            }
            let value_raw = &piece[eq + 1..];
            let value_lead = value_raw.len() - value_raw.trim_start().len();
            out.push(Stmt {
                line,
                key,
                key_col: col_of(piece_start + lead),
                value: value_raw.trim(),
                value_col: col_of(piece_start + eq + 1 + value_lead),
            });
        }
    }
    Ok(out)
}

fn expr_at(s: &Stmt<'_>, text: &str, offset: usize) -> Result<super::Expr> {
    parse_expr(text).map_err(|e| syntax(s.line, s.value_col + offset + e.column - 1, e.message))
}

fn constant(s: &Stmt<'_>, text: &str, offset: usize) -> Result<Complex64> {
    let e = expr_at(s, text, offset)?;
    if e.depends_on_x() {
        return Err(syntax(s.line, s.value_col + offset, "constant expected, found x"));
    }
    e.eval(Complex64::new(0.0, 0.0))
        .map_err(|m| syntax(s.line, s.value_col + offset, m))
}

fn real_constant(s: &Stmt<'_>, text: &str, offset: usize) -> Result<f64> {
    let z = constant(s, text, offset)?;
    if z.im != 0.0 {
        return Err(syntax(s.line, s.value_col + offset, "real value expected"));
    }
    Ok(z.re)
}

fn positive(s: &Stmt<'_>) -> Result<f64> {
    let v = real_constant(s, s.value, 0)?;
    if !(v > 0.0) {
        return Err(syntax(s.line, s.value_col, format!("{} must be positive", s.key)));
    }
    Ok(v)
}

fn integer(s: &Stmt<'_>, min: usize) -> Result<usize> {
    let v: usize = s
        .value
        .parse()
        .map_err(|_| syntax(s.line, s.value_col, format!("{} expects an integer", s.key)))?;
    if v < min {
        return Err(syntax(s.line, s.value_col, format!("{} must be at least {min}", s.key)));
    }
    Ok(v)
}

/// Splits `[a, b, ...]` into items with their character offsets inside the value.
fn list_items<'a>(s: &Stmt<'a>) -> Result<Vec<(&'a str, usize)>> {
    let v = s.value;
    if !(v.starts_with('[') && v.ends_with(']')) || v.len() < 2 {
        return Err(syntax(s.line, s.value_col, "expected a bracketed list"));
    }
    let inner = &v[1..v.len() - 1];
    let mut items = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    let push = |items: &mut Vec<(&'a str, usize)>, from: usize, to: usize| {
        let raw = &inner[from..to];
        let lead = raw.len() - raw.trim_start().len();
        let offset = v[..1 + from + lead].chars().count();
        items.push((raw.trim(), offset));
    };
    for (i, ch) in inner.char_indices() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                push(&mut items, start, i);
                start = i + 1;
            }
            _ => {}
        }
    }
    if !inner.trim().is_empty() {
        push(&mut items, start, inner.len());
    }
    if items.iter().any(|(t, _)| t.is_empty()) {
        return Err(syntax(s.line, s.value_col, "empty list item"));
    }
    Ok(items)
}

/// Parses a problem file.
pub fn parse_problem(text: &str) -> Result<Problem> {
    let stmts = statements(text)?;
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    let mut order: Option<usize> = None;
    let mut coeffs: BTreeMap<usize, CoeffFn> = BTreeMap::new();
    let mut domain: Option<(f64, f64)> = None;
    let mut ic: Option<(Vec<Complex64>, usize)> = None;
    let mut step = None;
    let mut method = None;
    let mut eps = None;
    let mut half_width = None;
    let mut grid = None;
    let mut quad_points = None;

    for s in &stmts {
        if let Some(prev) = seen.insert(s.key, s.line) {
            return Err(syntax(
                s.line,
                s.key_col,
                format!("duplicate key '{}' (first on line {prev})", s.key),
            ));
        }
        match s.key {
            "order" => order = Some(integer(s, 1)?),
            "domain" => {
                let items = list_items(s)?;
                if items.len() != 2 {
                    return Err(syntax(s.line, s.value_col, "domain needs exactly two bounds"));
                }
                let lo = real_constant(s, items[0].0, items[0].1)?;
                let hi = real_constant(s, items[1].0, items[1].1)?;
                domain = Some((lo, hi));
            }
            "ic" => {
                let values = list_items(s)?
                    .into_iter()
                    .map(|(t, off)| constant(s, t, off))
                    .collect::<Result<Vec<_>>>()?;
                ic = Some((values, s.line));
            }
            "step" => step = Some(positive(s)?),
            "degeneracy_eps" => eps = Some(positive(s)?),
            "jump_half_width" => half_width = Some(positive(s)?),
            "method" => {
                method = Some(
                    s.value
                        .parse::<Method>()
                        .map_err(|m| syntax(s.line, s.value_col, m))?,
                )
            }
            "grid" => grid = Some(integer(s, 2)?),
            "quadrature_points" => quad_points = Some(integer(s, 2)?),
            key => {
                let index = key
                    .strip_prefix('a')
                    .filter(|d| !d.is_empty() && d.chars().all(|c| c.is_ascii_digit()))
                    .and_then(|d| d.parse::<usize>().ok());
                let Some(m) = index else {
                    return Err(syntax(s.line, s.key_col, format!("unknown key '{key}'")));
                };
                let expr = expr_at(s, s.value, 0)?;
                coeffs.insert(m, CoeffFn::from_parts(expr, s.value));
            }
        }
    }

    let Some(n) = order else {
        return Err(syntax(1, 1, "missing 'order'"));
    };
    if let Some((&max_m, _)) = coeffs.iter().next_back() {
        if max_m >= n {
            return Err(Error::OrderMismatch {
                order: n,
                found: max_m + 1,
            });
        }
    }
    let Some((lo, hi)) = domain else {
        return Err(syntax(1, 1, "missing 'domain'"));
    };
    let all: Vec<CoeffFn> = (0..n)
        .map(|m| {
            coeffs
                .remove(&m)
                .unwrap_or_else(|| CoeffFn::constant(Complex64::new(0.0, 0.0)))
        })
        .collect();
    let mut problem = Problem::new(n, all, (lo, hi))?;

    let mut options = SolverOptions::for_domain(lo, hi);
    if let Some(v) = step {
        options.step = v;
    }
    if let Some(v) = eps {
        options.degeneracy_eps = v;
    }
    if let Some(v) = half_width {
        options.jump_half_width = v;
    }
    if let Some(v) = method {
        options.method = v;
    }
    if let Some(v) = quad_points {
        options.quadrature_points = v;
    }
    problem = problem.with_options(options)?;
    if let Some((values, line)) = ic {
        if values.len() != n {
            return Err(syntax(
                line,
                1,
                format!("ic needs {n} values (f, f', ...), got {}", values.len()),
            ));
        }
        problem = problem.with_ic(values)?;
    }
    if let Some(g) = grid {
        problem = problem.with_grid(g)?;
    }
    Ok(problem)
}
