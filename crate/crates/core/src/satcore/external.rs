//! Optional hook that delegates a CNF to an external solver binary speaking
//! the standard DIMACS / `s ... v ...` protocol.

use super::{to_dimacs, Cnf};
use std::io::Write;
use std::process::Command;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExternalError {
    #[error("failed to run `{cmd}`: {source}")]
    Spawn {
        cmd: String,
        source: std::io::Error,
    },
    #[error("could not write DIMACS input: {0}")]
    Io(#[from] std::io::Error),
    #[error("solver output had no `s` status line")]
    NoStatus,
    #[error("malformed model line: {0}")]
    BadModel(String),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExternalResult {
    /// Satisfying assignment indexed by variable, padded with `false`.
    Sat(Vec<bool>),
    Unsat,
    /// The solver reported `s UNKNOWN`.
    Unknown,
}

/// Run `cmd` (split on whitespace into program and arguments) on the CNF.
/// The DIMACS file path is appended as the last argument.
pub fn run_external(cmd: &str, cnf: &Cnf) -> Result<ExternalResult, ExternalError> {
    let mut file = tempfile::Builder::new()
        .prefix("accelbmc")
        .suffix(".cnf")
        .tempfile()?;
    file.write_all(to_dimacs(cnf).as_bytes())?;
    file.flush()?;

    let mut parts = cmd.split_whitespace();
    let prog = parts.next().unwrap_or(cmd);
    let output = Command::new(prog)
        .args(parts)
        .arg(file.path())
        .output()
        .map_err(|source| ExternalError::Spawn {
            cmd: cmd.to_string(),
            source,
        })?;
    let stdout = String::from_utf8_lossy(&output.stdout);
    parse_solver_output(&stdout, cnf.n_vars)
}

/// Parse `s SATISFIABLE` / `s UNSATISFIABLE` plus `v` model lines.
pub fn parse_solver_output(text: &str, n_vars: u32) -> Result<ExternalResult, ExternalError> {
    let mut status: Option<&str> = None;
    let mut model = vec![false; n_vars as usize];
    for line in text.lines() {
        let t = line.trim();
        if let Some(rest) = t.strip_prefix("s ") {
            status = Some(rest.trim());
        } else if let Some(rest) = t.strip_prefix("v ") {
            for tok in rest.split_whitespace() {
                let n: i64 = tok
                    .parse()
                    .map_err(|_| ExternalError::BadModel(tok.to_string()))?;
                if n == 0 {
                    continue;
                }
                let idx = (n.unsigned_abs() - 1) as usize;
                if idx < model.len() {
                    model[idx] = n > 0;
                }
            }
        }
    }
    match status {
        Some("SATISFIABLE") => Ok(ExternalResult::Sat(model)),
        Some("UNSATISFIABLE") => Ok(ExternalResult::Unsat),
        Some(_) => Ok(ExternalResult::Unknown),
        None => Err(ExternalError::NoStatus),
    }
}
