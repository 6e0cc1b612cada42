//! Variable coefficients `a_0(x) .. a_{n-1}(x)` of the monic operator
//! `f^(n) + a_{n-1} f^(n-1) + ... + a_0 f`, problem definitions, and the
//! transform that removes the `a_{n-1}` term.

mod expr;
mod normalize;
mod parse;

use std::sync::OnceLock;

use num_complex::Complex64;

pub use expr::{parse_expr, CoeffFn, Expr, Func, ParseFailure};
pub use normalize::normalize_form;
pub use parse::parse_problem;

use crate::error::{Error, Result};

/// How the transfer matrix over a smooth segment is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Method {
    /// Integrate `dQ/dx = U(x) Q` directly.
    #[default]
    Ode,
    /// Exponentiate the integrated kernel.
    Exp,
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim() {
            "ode" => Ok(Method::Ode),
            "exp" => Ok(Method::Exp),
            other => Err(format!("unknown method '{other}' (expected ode or exp)")),
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Ode => "ode",
            Method::Exp => "exp",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    /// Nominal propagation step.
    pub step: f64,
    /// Relative root-gap threshold: a frame is degenerate when its minimum
    /// pairwise root distance falls below `degeneracy_eps * (1 + max |k_i|)`.
    pub degeneracy_eps: f64,
    /// Half-width of the finite jump used to cross a singular point.
    pub jump_half_width: f64,
    pub method: Method,
    /// Gauss-Legendre nodes per quadrature panel.
    pub quadrature_points: usize,
}

impl SolverOptions {
    /// Defaults scaled to the width of `[lo, hi]`.
    pub fn for_domain(lo: f64, hi: f64) -> Self {
        SolverOptions {
            step: 1e-3 * (hi - lo),
            degeneracy_eps: 1e-6,
            jump_half_width: 1e-3,
            method: Method::Ode,
            quadrature_points: 4,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("step", self.step),
            ("degeneracy_eps", self.degeneracy_eps),
            ("jump_half_width", self.jump_half_width),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.quadrature_points < 2 {
            return Err(Error::Invalid("quadrature_points must be at least 2".into()));
        }
        Ok(())
    }
}

/// A homogeneous linear ODE of order `n` on a real interval.
#[derive(Debug, Clone)]
pub struct Problem {
    order: usize,
    coeffs: Vec<CoeffFn>,
    domain: (f64, f64),
    pub options: SolverOptions,
    ic: Option<Vec<Complex64>>,
    grid: Option<usize>,
    derivs: OnceLock<std::result::Result<Vec<CoeffFn>, String>>,
}

impl Problem {
    pub fn new(order: usize, coeffs: Vec<CoeffFn>, domain: (f64, f64)) -> Result<Problem> {
        if order == 0 {
            return Err(Error::Invalid("order must be at least 1".into()));
        }
        if coeffs.len() != order {
            return Err(Error::OrderMismatch {
                order,
                found: coeffs.len(),
            });
        }
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::EmptyDomain { lo, hi });
        }
        Ok(Problem {
            order,
            coeffs,
            domain,
            options: SolverOptions::for_domain(lo, hi),
            ic: None,
            grid: None,
            derivs: OnceLock::new(),
        })
    }

    /// Convenience constructor from coefficient source strings.
    pub fn from_strs(coeffs: &[&str], domain: (f64, f64)) -> Result<Problem> {
        let parsed = coeffs
            .iter()
            .map(|s| CoeffFn::parse(s))
            .collect::<Result<Vec<_>>>()?;
        Problem::new(parsed.len(), parsed, domain)
    }

    pub fn with_options(mut self, options: SolverOptions) -> Result<Problem> {
        options.validate()?;
        self.options = options;
        Ok(self)
    }

    pub fn with_ic(mut self, ic: Vec<Complex64>) -> Result<Problem> {
        if ic.len() != self.order {
            return Err(Error::Invalid(format!(
                "initial conditions need {} values, got {}",
                self.order,
                ic.len()
            )));
        }
        self.ic = Some(ic);
        Ok(self)
    }

    pub fn with_grid(mut self, grid: usize) -> Result<Problem> {
        if grid < 2 {
            return Err(Error::Invalid("grid needs at least 2 samples".into()));
        }
        self.grid = Some(grid);
        Ok(self)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[CoeffFn] {
        &self.coeffs
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    pub fn options(&self) -> &SolverOptions {
        &self.options
    }

    pub fn ic(&self) -> Option<&[Complex64]> {
        self.ic.as_deref()
    }

    pub fn grid(&self) -> Option<usize> {
        self.grid
    }

    /// Evenly spaced sample points over the domain, if `grid` is set.
    pub fn grid_points(&self) -> Option<Vec<f64>> {
        let n = self.grid?;
        let (lo, hi) = self.domain;
        Some(
            (0..n)
                .map(|i| {
                    if i + 1 == n {
                        hi
                    } else {
                        lo + (hi - lo) * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        )
    }

    /// `(a_0(x), ..., a_{n-1}(x))`; `a_n = 1` is implicit.
    pub fn eval_coeffs(&self, x: Complex64) -> Result<Vec<Complex64>> {
        eval_all(&self.coeffs, x)
    }

    /// Symbolic derivatives `a_m'(x)`, built on first use.
    pub fn coeff_derivatives(&self) -> Result<&[CoeffFn]> {
        self.derivs
            .get_or_init(|| {
                self.coeffs
                    .iter()
                    .map(|c| c.derivative().map_err(|e| e.to_string()))
                    .collect()
            })
            .as_deref()
            .map_err(|msg| Error::Unsupported(msg.clone()))
    }

    pub fn eval_coeff_derivs(&self, x: Complex64) -> Result<Vec<Complex64>> {
        eval_all(self.coeff_derivatives()?, x)
    }

    /// Whether `a_{n-1}` is the literal constant zero.
    pub fn leading_vanishes(&self) -> bool {
        self.coeffs[self.order - 1].is_identically_zero()
    }
}

fn eval_all(coeffs: &[CoeffFn], x: Complex64) -> Result<Vec<Complex64>> {
    coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| {
            c.eval(x).map_err(|e| match e {
                Error::Eval { x, message, .. } => Error::Eval {
                    index: Some(m),
                    x,
                    message,
                },
                other => other,
            })
        })
        .collect()
}

/// Free-function form of [`Problem::eval_coeffs`].
pub fn eval_coeffs(p: &Problem, x: Complex64) -> Result<Vec<Complex64>> {
    p.eval_coeffs(x)
}
