//! Concrete interpreter over CFA edges, used by the enumeration oracle and
//! to validate counterexamples.

use crate::ir::{BExpr, Cfa, Edge, Expr, FlagRef, OccId, Stmt, VarId, Vertex};
use crate::semantics::{eval_expr_at, State};
use thiserror::Error;

/// Evaluate a guard in a concrete state. Comparisons use masked values; the
/// overflow atom reads the state's flag.
pub fn eval_guard(cfa: &Cfa, b: &BExpr<VarId>, st: &State) -> bool {
    let val = |v: &VarId| st.vals[*v];
    match b {
        BExpr::True => true,
        BExpr::False => false,
        BExpr::Cmp(op, a, e) => {
            let w = cfa.cmp_width(a, e);
            op.eval(eval_expr_at(a, w, &val).0, eval_expr_at(e, w, &val).0)
        }
        BExpr::And(xs) => xs.iter().all(|x| eval_guard(cfa, x, st)),
        BExpr::Or(xs) => xs.iter().any(|x| eval_guard(cfa, x, st)),
        BExpr::Not(x) => !eval_guard(cfa, x, st),
        BExpr::Ovf(FlagRef::Cur) => st.ovf,
        BExpr::Ovf(_) => panic!("guards may only mention the current-state flag"),
        BExpr::Wraps(e) => {
            let w = cfa.expr_width(e);
            eval_expr_at(e, w, &val).1
        }
        BExpr::BoolVar(_) => panic!("free booleans have no concrete value"),
    }
}

/// Execute one statement. `havoc` supplies the value for a havoc statement
/// and must be `None` otherwise. Returns `None` when a guard blocks.
pub fn step_stmt(cfa: &Cfa, stmt: &Stmt, st: &State, havoc: Option<u64>) -> Option<State> {
    match stmt {
        Stmt::Skip => {
            debug_assert!(havoc.is_none());
            Some(st.clone())
        }
        Stmt::Assume(b) => {
            debug_assert!(havoc.is_none());
            if eval_guard(cfa, b, st) {
                Some(st.clone())
            } else {
                None
            }
        }
        Stmt::Assign(x, e) => {
            debug_assert!(havoc.is_none());
            let w = cfa.expr_width(e);
            let val = |v: &VarId| st.vals[*v];
            let (value, wrapped) = eval_expr_at(e, w, &val);
            let mut out = st.clone();
            out.vals[*x] = value & Cfa::mask(cfa.width_of(*x));
            out.ovf = st.ovf || wrapped;
            Some(out)
        }
        Stmt::Havoc(x) => {
            let v = havoc.expect("havoc requires a value");
            let mut out = st.clone();
            out.vals[*x] = v & Cfa::mask(cfa.width_of(*x));
            Some(out)
        }
        Stmt::ClearOvf => {
            debug_assert!(havoc.is_none());
            let mut out = st.clone();
            out.ovf = false;
            Some(out)
        }
        Stmt::Guarded { guard, inner, set } => {
            if !eval_guard(cfa, guard, st) {
                return None;
            }
            let mut out = step_stmt(cfa, inner, st, havoc)?;
            if let Some((g, m)) = set {
                out.vals[*g] = m & Cfa::mask(cfa.width_of(*g));
            }
            Some(out)
        }
    }
}

/// All successor states of a state under one edge, enumerating the havoc
/// domain where needed. Only usable at small widths.
pub fn step_all(cfa: &Cfa, edge: &Edge, st: &State) -> Vec<State> {
    match edge.stmt.havoc_var() {
        Some(x) => {
            let m = Cfa::mask(cfa.width_of(x));
            assert!(m < 1 << 24, "havoc domain too large to enumerate");
            (0..=m)
                .filter_map(|v| step_stmt(cfa, &edge.stmt, st, Some(v)))
                .collect()
        }
        None => step_stmt(cfa, &edge.stmt, st, None).into_iter().collect(),
    }
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("unknown edge occurrence {0}")]
    UnknownEdge(OccId),
    #[error("edge {0} starts at vertex {1} but control is at {2}")]
    Discontiguous(OccId, Vertex, Vertex),
    #[error("guard of edge {0} blocked")]
    Blocked(OccId),
    #[error("havoc value list exhausted at edge {0}")]
    MissingHavoc(OccId),
}

/// Re-execute a path given by edge occurrence ids from an initial state,
/// consuming havoc values in order. Returns the vertex reached and the
/// final state.
pub fn replay(
    cfa: &Cfa,
    init: &State,
    path: &[OccId],
    havocs: &[u64],
) -> Result<(Vertex, State), ReplayError> {
    let mut st = init.clone();
    let mut at = cfa.v0;
    let mut h = havocs.iter();
    for &occ in path {
        let edge = cfa.edge_by_id(occ).ok_or(ReplayError::UnknownEdge(occ))?;
        if edge.src != at {
            return Err(ReplayError::Discontiguous(occ, edge.src, at));
        }
        let hv = match edge.stmt.havoc_var() {
            Some(_) => Some(*h.next().ok_or(ReplayError::MissingHavoc(occ))?),
            None => None,
        };
        st = step_stmt(cfa, &edge.stmt, &st, hv).ok_or(ReplayError::Blocked(occ))?;
        at = edge.tgt;
    }
    Ok((at, st))
}

/// Execute a statement sequence from a state, enumerating havocs; returns
/// every reachable final state. Guard-blocked branches drop out.
pub fn run_stmts_all(cfa: &Cfa, stmts: &[Stmt], st: &State) -> Vec<State> {
    let mut cur = vec![st.clone()];
    for stmt in stmts {
        let mut nxt = Vec::new();
        for s in &cur {
            match stmt.havoc_var() {
                Some(x) => {
                    let m = Cfa::mask(cfa.width_of(x));
                    assert!(m < 1 << 24, "havoc domain too large to enumerate");
                    for v in 0..=m {
                        if let Some(n) = step_stmt(cfa, stmt, s, Some(v)) {
                            nxt.push(n);
                        }
                    }
                }
                None => {
                    if let Some(n) = step_stmt(cfa, stmt, s, None) {
                        nxt.push(n);
                    }
                }
            }
        }
        cur = nxt;
    }
    cur.sort();
    cur.dedup();
    cur
}

/// Deterministic evaluation of an expression in a state (no havoc), masked
/// to the assignment convention used by [`step_stmt`].
pub fn eval_expr(cfa: &Cfa, e: &Expr<VarId>, st: &State) -> u64 {
    let w = cfa.expr_width(e);
    eval_expr_at(e, w, &|v: &VarId| st.vals[*v]).0
}
