//! Command-line front end. Problems come from `key = value` files, tables
//! go out as CSV and every run ends with a JSON [`RunReport`].
//!
//! With `--out PATH` the table is written to `PATH` and the report to
//! stdout. Without it the table goes to stdout and the report to stderr.

pub mod verify;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::charroots::track_frame;
use crate::coeffs::{parse_problem, Method, Problem};
use crate::differential::{find_singularities, propagate_robust, transfer_det_formula};
use crate::error::{Error, Result};
use crate::oracle::oracle_solve;
use crate::solution::{fundamental_basis, solve_grid, wronskian_abel, SolutionGrid};

#[derive(Debug, Parser)]
#[command(name = "dtmm", version, about = "Differential transfer matrix solver")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Propagation method, overriding the problem file.
    #[arg(long, global = true)]
    pub method: Option<Method>,
    /// Nominal propagation step, overriding the problem file.
    #[arg(long, global = true)]
    pub step: Option<f64>,
    /// Also run the companion-system oracle and report its deviation.
    #[arg(long, global = true)]
    pub oracle: bool,
    /// Write the CSV table here instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample the solution for the file's `ic` on its `grid`.
    Solve {
        problem: PathBuf,
        /// Add derivative columns up to order n-1.
        #[arg(long)]
        derivs: bool,
    },
    /// Transfer matrix between two points with its determinant check.
    Transfer {
        problem: PathBuf,
        #[arg(allow_negative_numbers = true)]
        x1: f64,
        #[arg(allow_negative_numbers = true)]
        x2: f64,
    },
    /// Fundamental solutions anchored at `x0` and their Wronskian.
    Basis {
        problem: PathBuf,
        /// Anchor point, defaults to the lower end of the domain.
        #[arg(long, allow_negative_numbers = true)]
        x0: Option<f64>,
    },
    /// Locate and classify singular points in the domain.
    Singularities { problem: PathBuf },
    /// Run the identity and oracle checks on the problem.
    Verify { problem: PathBuf },
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunReport {
    pub command: String,
    pub inputs_digest: String,
    pub outputs: Vec<String>,
    pub diagnostics: Map<String, Value>,
}

/// Error carrying its exit code, for failures outside [`Error`].
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

struct Output {
    table: String,
    diagnostics: Map<String, Value>,
    /// Verification failure to report after the table is written.
    failed: Option<String>,
}

/// Parses `args` and runs the command, returning the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok((report, failed)) => {
            let text = serde_json::to_string_pretty(&report).unwrap_or_default();
            if cli.out.is_some() {
                println!("{text}");
            } else {
                eprintln!("{text}");
            }
            match failed {
                Some(name) => {
                    eprintln!("error: check '{name}' failed");
                    2
                }
                None => 0,
            }
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}

/// Runs one parsed command. The table is written before returning.
pub fn execute(cli: &Cli) -> std::result::Result<(RunReport, Option<String>), Failure> {
    let (path, name) = match &cli.command {
        Command::Solve { problem, .. } => (problem, "solve"),
        Command::Transfer { problem, .. } => (problem, "transfer"),
        Command::Basis { problem, .. } => (problem, "basis"),
        Command::Singularities { problem } => (problem, "singularities"),
        Command::Verify { problem } => (problem, "verify"),
    };
    let text = std::fs::read_to_string(path).map_err(|e| Failure {
        code: 1,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    let p = load(&text, cli)?;
    let out = match &cli.command {
        Command::Solve { derivs, .. } => cmd_solve(&p, *derivs, cli.oracle)?,
        Command::Transfer { x1, x2, .. } => cmd_transfer(&p, *x1, *x2)?,
        Command::Basis { x0, .. } => cmd_basis(&p, *x0)?,
        Command::Singularities { .. } => cmd_singularities(&p)?,
        Command::Verify { .. } => cmd_verify(&p)?,
    };
    let mut outputs = Vec::new();
    match &cli.out {
        Some(file) => {
            write_file(file, &out.table)?;
            outputs.push(file.display().to_string());
        }
        None => print!("{}", out.table),
    }
    let report = RunReport {
        command: name.to_string(),
        inputs_digest: digest(&text, &cli_key(cli)),
        outputs,
        diagnostics: out.diagnostics,
    };
    Ok((report, out.failed))
}

fn load(text: &str, cli: &Cli) -> Result<Problem> {
    let mut p = parse_problem(text)?;
    let mut opts = p.options.clone();
    if let Some(m) = cli.method {
        opts.method = m;
    }
    if let Some(s) = cli.step {
        opts.step = s;
    }
    p = p.with_options(opts)?;
    Ok(p)
}

fn write_file(path: &Path, body: &str) -> std::result::Result<(), Failure> {
    std::fs::write(path, body).map_err(|e| Failure {
        code: 2,
        message: format!("cannot write {}: {e}", path.display()),
    })
}

/// Everything besides the file contents that changes the output.
fn cli_key(cli: &Cli) -> String {
    let command = match &cli.command {
        Command::Solve { derivs, .. } => format!("solve derivs={derivs}"),
        Command::Transfer { x1, x2, .. } => format!("transfer {x1:e} {x2:e}"),
        Command::Basis { x0, .. } => format!("basis {x0:?}"),
        Command::Singularities { .. } => "singularities".into(),
        Command::Verify { .. } => "verify".into(),
    };
    format!(
        "{command} method={:?} step={:?} oracle={}",
        cli.method.map(|m| m.to_string()),
        cli.step,
        cli.oracle
    )
}

/// Hex SHA-256 of the problem text and the effective flags.
pub fn digest(problem_text: &str, key: &str) -> String {
    let mut h = Sha256::new();
    h.update(problem_text.as_bytes());
    h.update([0u8]);
    h.update(key.as_bytes());
    hex::encode(h.finalize())
}

/// 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn push_complex(row: &mut Vec<String>, z: Complex64) {
    row.push(fmt_num(z.re));
    row.push(fmt_num(z.im));
}

fn complex_json(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn pair_header(name: &str) -> [String; 2] {
    [format!("re_{name}"), format!("im_{name}")]
}

fn require_grid(p: &Problem) -> Result<Vec<f64>> {
    p.grid_points()
        .ok_or_else(|| Error::Invalid("the problem file needs a 'grid' entry".into()))
}

fn singularity_json(g: &SolutionGrid) -> Value {
    Value::Array(
        g.diagnostics
            .singularities
            .iter()
            .map(|s| json!({ "xi": s.xi, "kind": s.kind.to_string(), "gap": s.gap_at_xi }))
            .collect(),
    )
}

fn cmd_solve(p: &Problem, with_derivs: bool, oracle: bool) -> Result<Output> {
    let ic = p
        .ic()
        .ok_or_else(|| Error::Invalid("the problem file needs an 'ic' entry".into()))?
        .to_vec();
    let xs = require_grid(p)?;
    let n = p.order();
    let x0 = p.domain().0;
    let g = solve_grid(p, x0, &ic, &xs, with_derivs)?;
    let reference = if oracle {
        Some(oracle_solve(p, x0, &ic, &xs)?)
    } else {
        None
    };

    let mut header = vec!["x".to_string()];
    header.extend(pair_header("f"));
    if with_derivs {
        for m in 1..n {
            header.extend(pair_header(&format!("f{m}")));
        }
    }
    if reference.is_some() {
        header.extend(pair_header("f_oracle"));
    }
    header.push("gap".into());
    let rows: Vec<Vec<String>> = (0..xs.len())
        .map(|i| {
            let mut row = vec![fmt_num(xs[i])];
            push_complex(&mut row, g.values[i]);
            if with_derivs {
                for m in 1..n {
                    push_complex(&mut row, g.derivative(m, i).unwrap_or_default());
                }
            }
            if let Some(o) = &reference {
                push_complex(&mut row, o.values[i]);
            }
            row.push(fmt_num(g.diagnostics.gaps[i]));
            row
        })
        .collect();

    let mut d = Map::new();
    d.insert("order".into(), json!(n));
    d.insert("method".into(), json!(p.options.method.to_string()));
    d.insert("points".into(), json!(xs.len()));
    d.insert("max_residual".into(), json!(g.diagnostics.max_residual()));
    d.insert(
        "min_gap".into(),
        json!(g.diagnostics.gaps.iter().copied().fold(f64::INFINITY, f64::min)),
    );
    d.insert("singularities".into(), singularity_json(&g));
    d.insert(
        "jumps".into(),
        Value::Array(
            g.diagnostics
                .jumps
                .iter()
                .map(|j| json!({ "xi": j.xi, "kind": j.kind.to_string(), "discontinuity": j.discontinuity }))
                .collect(),
        ),
    );
    if let Some(o) = &reference {
        let scale = o.values.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let err = g
            .values
            .iter()
            .zip(&o.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        d.insert(
            "max_oracle_rel_err".into(),
            json!(err / scale.max(f64::MIN_POSITIVE)),
        );
        if let Some(info) = &o.diagnostics.oracle {
            d.insert("oracle_step".into(), json!(info.step));
            d.insert("oracle_self_deviation".into(), json!(info.deviation));
        }
    }
    Ok(Output {
        table: table(&header, &rows),
        diagnostics: d,
        failed: None,
    })
}

fn cmd_transfer(p: &Problem, x1: f64, x2: f64) -> Result<Output> {
    let q = propagate_robust(p, x1, x2)?;
    let fr1 = track_frame(None, p, x1)?;
    let fr2 = track_frame(None, p, x2)?;
    let det = q.det();
    let formula = transfer_det_formula(p, &fr1, &fr2)?;
    let deviation = (det - formula).norm() / formula.norm().max(f64::MIN_POSITIVE);

    let header: Vec<String> = ["row", "col", "re_q", "im_q"].map(String::from).to_vec();
    let n = q.order();
    let mut rows = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let mut row = vec![i.to_string(), j.to_string()];
            push_complex(&mut row, q.q[(i, j)]);
            rows.push(row);
        }
    }
    let mut d = Map::new();
    d.insert("x1".into(), json!(x1));
    d.insert("x2".into(), json!(x2));
    d.insert("method".into(), json!(p.options.method.to_string()));
    d.insert("det".into(), complex_json(det));
    d.insert("det_formula".into(), complex_json(formula));
    d.insert("det_deviation".into(), json!(deviation));
    Ok(Output {
        table: table(&header, &rows),
        diagnostics: d,
        failed: None,
    })
}

fn cmd_basis(p: &Problem, x0: Option<f64>) -> Result<Output> {
    let xs = require_grid(p)?;
    let x0 = x0.unwrap_or(p.domain().0);
    let basis = fundamental_basis(p, x0, &xs)?;
    let abel = wronskian_abel(p, &basis, x0)?;
    let mut header = vec!["x".to_string()];
    for i in 1..=basis.len() {
        header.extend(pair_header(&format!("g{i}")));
    }
    header.extend(pair_header("w"));
    header.extend(pair_header("w_abel"));
    let rows: Vec<Vec<String>> = (0..xs.len())
        .map(|i| {
            let mut row = vec![fmt_num(xs[i])];
            for g in &basis {
                push_complex(&mut row, g.values[i]);
            }
            push_complex(&mut row, abel.wronskian[i]);
            push_complex(&mut row, abel.predicted[i]);
            row
        })
        .collect();
    let mut d = Map::new();
    d.insert("x0".into(), json!(x0));
    d.insert("x_ref".into(), json!(abel.x_ref));
    d.insert("abel_max_rel_deviation".into(), json!(abel.max_rel_deviation));
    d.insert(
        "max_residual".into(),
        json!(basis
            .iter()
            .filter_map(|g| g.diagnostics.max_residual())
            .reduce(f64::max)),
    );
    d.insert("singularities".into(), singularity_json(&basis[0]));
    Ok(Output {
        table: table(&header, &rows),
        diagnostics: d,
        failed: None,
    })
}

fn cmd_singularities(p: &Problem) -> Result<Output> {
    let (lo, hi) = p.domain();
    let reports = find_singularities(p, lo, hi)?;
    let header: Vec<String> = ["xi", "kind", "gap"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|s| vec![fmt_num(s.xi), s.kind.to_string(), fmt_num(s.gap_at_xi)])
        .collect();
    let mut d = Map::new();
    d.insert("count".into(), json!(reports.len()));
    d.insert(
        "singularities".into(),
        Value::Array(
            reports
                .iter()
                .map(|s| json!({ "xi": s.xi, "kind": s.kind.to_string(), "gap": s.gap_at_xi }))
                .collect(),
        ),
    );
    Ok(Output {
        table: table(&header, &rows),
        diagnostics: d,
        failed: None,
    })
}

fn cmd_verify(p: &Problem) -> Result<Output> {
    let checks = verify::run_checks(p)?;
    let header: Vec<String> = ["check", "status", "deviation", "tolerance", "note"]
        .map(String::from)
        .to_vec();
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| {
            vec![
                c.name.to_string(),
                if c.passed { "pass" } else { "fail" }.to_string(),
                fmt_num(c.deviation),
                fmt_num(c.tolerance),
                csv_text(&c.note),
            ]
        })
        .collect();
    let mut d = Map::new();
    for c in &checks {
        d.insert(
            c.name.to_string(),
            json!({
                "passed": c.passed,
                "deviation": c.deviation,
                "tolerance": c.tolerance,
                "note": c.note,
            }),
        );
    }
    let failed = checks.iter().find(|c| !c.passed).map(|c| c.name.to_string());
    d.insert("all_passed".into(), json!(failed.is_none()));
    Ok(Output {
        table: table(&header, &rows),
        diagnostics: d,
        failed,
    })
}

fn csv_text(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        let mut out = String::from("\"");
        for ch in s.chars() {
            if ch == '"' {
                out.push('"');
            }
            let _ = out.write_char(ch);
        }
        out.push('"');
        out
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_has_seventeen_digits() {
        assert_eq!(fmt_num(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_num(-2.0), "-2.0000000000000000e0");
        assert_eq!(fmt_num(0.1).parse::<f64>().unwrap(), 0.1);
    }

    #[test]
    fn digest_depends_on_flags() {
        assert_ne!(digest("order = 1", "a"), digest("order = 1", "b"));
        assert_eq!(digest("order = 1", "a").len(), 64);
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_text("plain"), "plain");
        assert_eq!(csv_text("a, \"b\""), "\"a, \"\"b\"\"\"");
    }

    #[test]
    fn usage_errors_map_to_one() {
        assert_eq!(run(["dtmm", "frobnicate"]), 1);
        assert_eq!(run(["dtmm", "solve", "/nonexistent/file.txt"]), 1);
    }
}
