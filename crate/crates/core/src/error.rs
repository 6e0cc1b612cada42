use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Which side of a jump a frame belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    A,
    B,
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Side::A => f.write_str("A"),
            Side::B => f.write_str("B"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("order mismatch: order is {order} but {found} coefficient(s) were given")]
    OrderMismatch { order: usize, found: usize },

    #[error("empty domain [{lo}, {hi}]")]
    EmptyDomain { lo: f64, hi: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("{}", eval_message(.index, .x, .message))]
    Eval {
        index: Option<usize>,
        x: Complex64,
        message: String,
    },

    #[error("unsupported coefficient: {0}")]
    Unsupported(String),

    #[error("root finder did not converge at x = {x}")]
    RootNonConvergence { x: f64 },

    #[error("degenerate roots at x = {x}: k{} and k{} are {gap:e} apart", .pair.0 + 1, .pair.1 + 1)]
    Degenerate {
        x: f64,
        pair: (usize, usize),
        gap: f64,
    },

    #[error("degenerate frame on side {side} at x = {x}")]
    DegenerateFrame { side: Side, x: f64 },

    #[error("transfer chain broken between elements {index} and {}: {to} != {from}", .index + 1)]
    Chain { index: usize, to: f64, from: f64 },

    #[error("entirely degenerate interval [{lo}, {hi}]")]
    EntirelyDegenerate { lo: f64, hi: f64 },

    #[error("singularities at {first} and {second} are closer than twice the jump half-width")]
    Overlapping { first: f64, second: f64 },

    #[error("frame at {x} is still degenerate after the jump; try a larger jump_half_width")]
    JumpTooNarrow { x: f64 },

    #[error("numeric overflow in {0}")]
    Overflow(&'static str),

    #[error("propagation step underflow near x = {x}")]
    StepUnderflow { x: f64 },

    #[error("oracle did not converge (last step {step:e}, deviation {deviation:e})")]
    OracleNonConvergence { step: f64, deviation: f64 },

    #[error("solution basis lacks derivatives")]
    MissingDerivatives,

    #[error("Wronskian vanishes at x = {x}")]
    SingularBasis { x: f64 },
}

fn eval_message(index: &Option<usize>, x: &Complex64, message: &str) -> String {
    match index {
        Some(m) => format!("coefficient a{m} cannot be evaluated at x = {x}: {message}"),
        None => format!("expression cannot be evaluated at x = {x}: {message}"),
    }
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Syntax { .. }
            | Error::OrderMismatch { .. }
            | Error::EmptyDomain { .. }
            | Error::Invalid(_) => 1,
            Error::EntirelyDegenerate { .. } => 3,
            _ => 2,
        }
    }
}
