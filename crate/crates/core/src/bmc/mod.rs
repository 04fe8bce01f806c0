//! Bounded model checking over the (possibly accelerated and instrumented)
//! CFA. Two satisfiability queries are posed per bound: one for reachable
//! error vertices, one for exhausted unwinding bounds. An unsatisfiable
//! error query together with an unsatisfiable bound query is a proof of
//! safety.

mod encode;
mod unwind;

pub use encode::Encoding;
pub use unwind::{unwind, UEdge, UNode, UnwoundDag};

use crate::interp::{replay, ReplayError};
use crate::ir::{Cfa, OccId, Vertex};
use crate::satcore::{
    run_external, to_dimacs, Cnf, ExternalError, ExternalResult, Lit, SolveResult, Solver,
    SolverConfig,
};
use crate::semantics::State;
use std::path::PathBuf;
use std::time::Instant;
use thiserror::Error;

/// A validated error path.
#[derive(Clone, Debug)]
pub struct Cex {
    /// Edge occurrence ids from the initial vertex to an error vertex.
    pub path: Vec<OccId>,
    /// Havoc values consumed along the path, in order.
    pub havocs: Vec<u64>,
    /// States at each visited vertex, starting with the initial state.
    pub states: Vec<State>,
    pub error_vertex: Vertex,
}

#[derive(Clone, Debug)]
pub enum Verdict {
    /// No error vertex reachable and no unwinding bound exhausted.
    Safe { k: u32 },
    Unsafe { cex: Box<Cex> },
    /// No error found but some back edge still had traversals beyond the
    /// bound, so nothing is proved.
    Unknown { k: u32, live_back_edges: Vec<OccId> },
    /// Conflict budget or deadline exhausted.
    Timeout,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Safe { .. } => "SAFE",
            Verdict::Unsafe { .. } => "UNSAFE",
            Verdict::Unknown { .. } => "UNKNOWN",
            Verdict::Timeout => "TIMEOUT",
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct BmcConfig {
    pub conflict_budget: Option<u64>,
    pub deadline: Option<Instant>,
    /// External DIMACS solver command; the embedded solver is used if
    /// absent.
    pub external_solver: Option<String>,
    /// Dump the error-query CNF here.
    pub dimacs_path: Option<PathBuf>,
}

#[derive(Debug, Error)]
pub enum BmcError {
    #[error("counterexample failed to replay: {0}")]
    Replay(#[from] ReplayError),
    #[error("counterexample path ends at vertex {0}, which is not an error vertex")]
    NotAtError(Vertex),
    #[error("external solver: {0}")]
    External(#[from] ExternalError),
    #[error("could not write DIMACS dump: {0}")]
    DimacsDump(std::io::Error),
}

enum QueryOutcome {
    Sat(Vec<bool>),
    Unsat,
    Budget,
}

fn solve_query(cnf: &Cnf, config: &BmcConfig) -> Result<QueryOutcome, BmcError> {
    if let Some(cmd) = &config.external_solver {
        return Ok(match run_external(cmd, cnf)? {
            ExternalResult::Sat(model) => QueryOutcome::Sat(model),
            ExternalResult::Unsat => QueryOutcome::Unsat,
            ExternalResult::Unknown => QueryOutcome::Budget,
        });
    }
    let mut sc = SolverConfig {
        deadline: config.deadline,
        ..SolverConfig::default()
    };
    if let Some(b) = config.conflict_budget {
        sc.conflict_budget = b;
    }
    let mut solver = Solver::from_cnf(cnf, sc);
    Ok(match solver.solve() {
        SolveResult::Sat => QueryOutcome::Sat(solver.model().to_vec()),
        SolveResult::Unsat => QueryOutcome::Unsat,
        SolveResult::BudgetExhausted => QueryOutcome::Budget,
    })
}

/// Check the CFA at unwinding bound `k`.
pub fn check_safety(cfa: &Cfa, k: u32, config: &BmcConfig) -> Result<Verdict, BmcError> {
    let dag = unwind(cfa, k);
    let mut enc = Encoding::build(cfa, &dag);
    let error_lits: Vec<Lit> = dag
        .error_nodes
        .iter()
        .map(|&n| enc.guard_lit(n))
        .collect();
    let marker_lits: Vec<Lit> = dag
        .markers
        .values()
        .map(|&n| enc.guard_lit(n))
        .collect();
    let base = enc.blaster.cnf.clone();

    if !error_lits.is_empty() {
        let mut q1 = base.clone();
        q1.add_clause(error_lits);
        if let Some(path) = &config.dimacs_path {
            std::fs::write(path, to_dimacs(&q1)).map_err(BmcError::DimacsDump)?;
        }
        match solve_query(&q1, config)? {
            QueryOutcome::Budget => return Ok(Verdict::Timeout),
            QueryOutcome::Sat(model) => {
                let (path, havocs, states, _) = enc.decode_path(&model);
                let init = State::zeroed(cfa.vars.len());
                let (at, _) = replay(cfa, &init, &path, &havocs)?;
                if !cfa.errors.contains(&at) {
                    return Err(BmcError::NotAtError(at));
                }
                return Ok(Verdict::Unsafe {
                    cex: Box::new(Cex {
                        path,
                        havocs,
                        states,
                        error_vertex: at,
                    }),
                });
            }
            QueryOutcome::Unsat => {}
        }
    } else if let Some(path) = &config.dimacs_path {
        std::fs::write(path, to_dimacs(&base)).map_err(BmcError::DimacsDump)?;
    }

    if marker_lits.is_empty() {
        return Ok(Verdict::Safe { k });
    }
    let mut q2 = base;
    q2.add_clause(marker_lits);
    Ok(match solve_query(&q2, config)? {
        QueryOutcome::Budget => Verdict::Timeout,
        QueryOutcome::Sat(_) => Verdict::Unknown {
            k,
            live_back_edges: dag.live_back_edges(cfa),
        },
        QueryOutcome::Unsat => Verdict::Safe { k },
    })
}

/// Increase the bound until the verdict is conclusive or `k_max` is hit.
pub fn find_proof_bound(cfa: &Cfa, k_max: u32, config: &BmcConfig) -> Result<Verdict, BmcError> {
    let mut last = Verdict::Unknown {
        k: 0,
        live_back_edges: Vec::new(),
    };
    for k in 0..=k_max {
        match check_safety(cfa, k, config)? {
            v @ (Verdict::Safe { .. } | Verdict::Unsafe { .. } | Verdict::Timeout) => {
                return Ok(v)
            }
            v => last = v,
        }
        if let Some(d) = config.deadline {
            if Instant::now() >= d {
                return Ok(Verdict::Timeout);
            }
        }
    }
    Ok(last)
}
