//! Plain-text interchange format.
//!
//! ```text
//! # irs-conic program v1
//! size <n> <m> <nnz>
//! offset <value>
//! c <n values>
//! b <m values>
//! cone <zero|nonneg|soc|rsoc|psd> <dimension, or order for psd>
//! name <index> <name>
//! a <row> <col> <value>
//! ```
//!
//! The header line must come first. Other lines may appear in any order;
//! `cone` lines are kept in file order, `name` lines are optional and names
//! may not contain whitespace. Blank lines and further `#` lines are
//! ignored. Values use Rust's shortest round-trip float formatting, so a
//! write/read cycle is exact.
//!
//! Solutions use the same style:
//!
//! ```text
//! # irs-conic solution v1
//! status <optimal|primal-infeasible|...>
//! x <n values>
//! y <m values>
//! ```

use std::fmt::Write as _;
use std::io::{BufRead, Write};
use std::time::Duration;

use crate::error::ConicError;
use crate::program::{Cone, ConicProgram, CscMatrix};
use crate::solver::{SolveResult, Status};

pub const PROGRAM_HEADER: &str = "# irs-conic program v1";
pub const SOLUTION_HEADER: &str = "# irs-conic solution v1";

fn join(v: &[f64]) -> String {
    let mut out = String::new();
    for x in v {
        let _ = write!(out, " {x}");
    }
    out
}

pub fn program_to_string(prog: &ConicProgram) -> String {
    let mut out = String::new();
    let trip = prog.a.to_triplets();
    let _ = writeln!(out, "{PROGRAM_HEADER}");
    let _ = writeln!(out, "size {} {} {}", prog.num_vars(), prog.num_rows(), trip.len());
    let _ = writeln!(out, "offset {}", prog.offset);
    let _ = writeln!(out, "c{}", join(&prog.c));
    let _ = writeln!(out, "b{}", join(&prog.b));
    for cone in &prog.cones {
        let d = match *cone {
            Cone::Psd(order) => order,
            other => other.dim(),
        };
        let _ = writeln!(out, "cone {} {d}", cone.tag());
    }
    for (i, name) in prog.var_names.iter().enumerate() {
        let _ = writeln!(out, "name {i} {name}");
    }
    for (r, c, v) in trip {
        let _ = writeln!(out, "a {r} {c} {v}");
    }
    out
}

pub fn write_program<W: Write>(prog: &ConicProgram, mut w: W) -> Result<(), ConicError> {
    w.write_all(program_to_string(prog).as_bytes())?;
    Ok(())
}

fn perr(line: usize, msg: impl Into<String>) -> ConicError {
    ConicError::Parse { line, msg: msg.into() }
}

fn parse_f64(tok: &str, line: usize) -> Result<f64, ConicError> {
    tok.parse::<f64>()
        .map_err(|_| perr(line, format!("bad number {tok:?}")))
}

fn parse_usize(tok: Option<&str>, line: usize) -> Result<usize, ConicError> {
    let tok = tok.ok_or_else(|| perr(line, "missing integer"))?;
    tok.parse::<usize>()
        .map_err(|_| perr(line, format!("bad integer {tok:?}")))
}

fn lines_of<R: BufRead>(r: R) -> Result<Vec<String>, ConicError> {
    Ok(r.lines().collect::<Result<Vec<_>, _>>()?)
}

pub fn program_from_str(text: &str) -> Result<ConicProgram, ConicError> {
    parse_program(text.lines().map(str::to_owned).collect())
}

pub fn read_program<R: BufRead>(r: R) -> Result<ConicProgram, ConicError> {
    parse_program(lines_of(r)?)
}

fn parse_program(lines: Vec<String>) -> Result<ConicProgram, ConicError> {
    match lines.first() {
        Some(h) if h.trim() == PROGRAM_HEADER => {}
        _ => return Err(perr(1, format!("expected header {PROGRAM_HEADER:?}"))),
    }
    let mut size = None;
    let mut offset = 0.0;
    let mut c = None;
    let mut b = None;
    let mut cones = Vec::new();
    let mut names: Vec<(usize, String)> = Vec::new();
    let mut trip = Vec::new();
    for (idx, raw) in lines.iter().enumerate().skip(1) {
        let ln = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let key = toks.next().unwrap();
        match key {
            "size" => {
                let n = parse_usize(toks.next(), ln)?;
                let m = parse_usize(toks.next(), ln)?;
                let nnz = parse_usize(toks.next(), ln)?;
                size = Some((n, m, nnz));
            }
            "offset" => offset = parse_f64(toks.next().unwrap_or(""), ln)?,
            "c" => c = Some(toks.map(|t| parse_f64(t, ln)).collect::<Result<Vec<_>, _>>()?),
            "b" => b = Some(toks.map(|t| parse_f64(t, ln)).collect::<Result<Vec<_>, _>>()?),
            "cone" => {
                let tag = toks.next().ok_or_else(|| perr(ln, "missing cone type"))?;
                let d = parse_usize(toks.next(), ln)?;
                cones.push(match tag {
                    "zero" => Cone::Zero(d),
                    "nonneg" => Cone::NonNeg(d),
                    "soc" => Cone::Soc(d),
                    "rsoc" => Cone::RotatedSoc(d),
                    "psd" => Cone::Psd(d),
                    other => return Err(perr(ln, format!("unknown cone {other:?}"))),
                });
            }
            "name" => {
                let i = parse_usize(toks.next(), ln)?;
                let name = toks.next().ok_or_else(|| perr(ln, "missing name"))?;
                names.push((i, name.to_owned()));
            }
            "a" => {
                let r = parse_usize(toks.next(), ln)?;
                let col = parse_usize(toks.next(), ln)?;
                let v = parse_f64(toks.next().unwrap_or(""), ln)?;
                trip.push((r, col, v));
            }
            other => return Err(perr(ln, format!("unknown record {other:?}"))),
        }
    }
    let (n, m, nnz) = size.ok_or_else(|| perr(0, "missing size record"))?;
    let c = c.unwrap_or_else(|| vec![0.0; n]);
    let b = b.unwrap_or_else(|| vec![0.0; m]);
    if c.len() != n || b.len() != m {
        return Err(ConicError::Dimension(format!(
            "size says n={n}, m={m}, found {} and {} values",
            c.len(),
            b.len()
        )));
    }
    if trip.len() != nnz {
        return Err(ConicError::Dimension(format!(
            "size says {nnz} entries, found {}",
            trip.len()
        )));
    }
    let mut var_names = Vec::new();
    if !names.is_empty() {
        var_names = vec![String::new(); n];
        for (i, name) in names {
            if i >= n {
                return Err(ConicError::Dimension(format!("name index {i} out of range")));
            }
            var_names[i] = name;
        }
    }
    let prog = ConicProgram {
        c,
        offset,
        a: CscMatrix::from_triplets(m, n, &trip)?,
        b,
        cones,
        var_names,
    };
    prog.validate()?;
    Ok(prog)
}

pub fn solution_to_string(result: &SolveResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SOLUTION_HEADER}");
    let _ = writeln!(out, "status {}", result.status);
    let _ = writeln!(out, "x{}", join(&result.x));
    let _ = writeln!(out, "y{}", join(&result.y));
    out
}

/// Reads a solution produced by an external backend. Residual fields are
/// recomputed against `prog`; timing is zero.
pub fn read_solution<R: BufRead>(prog: &ConicProgram, r: R) -> Result<SolveResult, ConicError> {
    let lines = lines_of(r)?;
    match lines.first() {
        Some(h) if h.trim() == SOLUTION_HEADER => {}
        _ => return Err(perr(1, format!("expected header {SOLUTION_HEADER:?}"))),
    }
    let mut status = None;
    let mut x = None;
    let mut y = None;
    for (idx, raw) in lines.iter().enumerate().skip(1) {
        let ln = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        match toks.next().unwrap() {
            "status" => {
                status = Some(match toks.next().unwrap_or("") {
                    "optimal" => Status::Optimal,
                    "primal-infeasible" => Status::PrimalInfeasible,
                    "dual-infeasible" => Status::DualInfeasible,
                    "max-iters" => Status::MaxIters,
                    "numerical-failure" => Status::NumericalFailure,
                    other => return Err(perr(ln, format!("unknown status {other:?}"))),
                })
            }
            "x" => x = Some(toks.map(|t| parse_f64(t, ln)).collect::<Result<Vec<_>, _>>()?),
            "y" => y = Some(toks.map(|t| parse_f64(t, ln)).collect::<Result<Vec<_>, _>>()?),
            other => return Err(perr(ln, format!("unknown record {other:?}"))),
        }
    }
    let status = status.ok_or_else(|| perr(0, "missing status"))?;
    let x = x.unwrap_or_else(|| vec![0.0; prog.num_vars()]);
    let y = y.unwrap_or_else(|| vec![0.0; prog.num_rows()]);
    if x.len() != prog.num_vars() || y.len() != prog.num_rows() {
        return Err(ConicError::Dimension("solution does not match program".into()));
    }
    let s = prog.slack(&x);
    let mut r = prog.c.clone();
    prog.a.tr_mul_add(1.0, &y, &mut r);
    let dual_residual = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    let objective = prog.objective(&x);
    let dual_objective = -prog.b.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>() + prog.offset;
    Ok(SolveResult {
        status,
        primal_residual: prog.max_violation(&x),
        dual_residual,
        gap: s.iter().zip(&y).map(|(a, b)| a * b).sum(),
        s,
        x,
        y,
        objective,
        dual_objective,
        iterations: 0,
        solve_time: Duration::ZERO,
    })
}
