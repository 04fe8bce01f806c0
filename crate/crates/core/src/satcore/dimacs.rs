//! DIMACS CNF serialization and parsing.

use super::{Cnf, Lit};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DimacsError {
    #[error("missing `p cnf` header")]
    MissingHeader,
    #[error("malformed header: {0}")]
    BadHeader(String),
    #[error("malformed literal `{0}`")]
    BadLiteral(String),
    #[error("clause not terminated by 0")]
    UnterminatedClause,
    #[error("literal {0} exceeds declared variable count {1}")]
    VarOutOfRange(i64, u32),
    #[error("declared {0} clauses but found {1}")]
    ClauseCountMismatch(usize, usize),
}

/// Serialize to DIMACS. Clauses appear in insertion order, each terminated
/// by `0` on its own line.
pub fn to_dimacs(cnf: &Cnf) -> String {
    let mut s = String::new();
    s.push_str(&format!("p cnf {} {}\n", cnf.n_vars, cnf.clauses.len()));
    for c in &cnf.clauses {
        for l in c {
            s.push_str(&format!("{} ", l.to_dimacs()));
        }
        s.push_str("0\n");
    }
    s
}

pub fn parse_dimacs(text: &str) -> Result<Cnf, DimacsError> {
    let mut n_vars: Option<u32> = None;
    let mut n_clauses = 0usize;
    let mut clauses: Vec<Vec<Lit>> = Vec::new();
    let mut cur: Vec<Lit> = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('c') {
            continue;
        }
        if t.starts_with('p') {
            let parts: Vec<&str> = t.split_whitespace().collect();
            if parts.len() != 4 || parts[1] != "cnf" {
                return Err(DimacsError::BadHeader(t.to_string()));
            }
            let v = parts[2]
                .parse::<u32>()
                .map_err(|_| DimacsError::BadHeader(t.to_string()))?;
            n_clauses = parts[3]
                .parse::<usize>()
                .map_err(|_| DimacsError::BadHeader(t.to_string()))?;
            n_vars = Some(v);
            continue;
        }
        let declared = n_vars.ok_or(DimacsError::MissingHeader)?;
        for tok in t.split_whitespace() {
            let n: i64 = tok
                .parse()
                .map_err(|_| DimacsError::BadLiteral(tok.to_string()))?;
            match Lit::from_dimacs(n) {
                None => {
                    clauses.push(std::mem::take(&mut cur));
                }
                Some(l) => {
                    if l.var().0 >= declared {
                        return Err(DimacsError::VarOutOfRange(n, declared));
                    }
                    cur.push(l);
                }
            }
        }
    }
    let n_vars = n_vars.ok_or(DimacsError::MissingHeader)?;
    if !cur.is_empty() {
        return Err(DimacsError::UnterminatedClause);
    }
    if clauses.len() != n_clauses {
        return Err(DimacsError::ClauseCountMismatch(n_clauses, clauses.len()));
    }
    Ok(Cnf { n_vars, clauses })
}
