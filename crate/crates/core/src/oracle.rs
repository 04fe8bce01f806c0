//! Enumeration oracle: exhaustive forward exploration of the concrete state
//! space at small bit widths. Used to cross-check the symbolic engine and to
//! compute exact reachability diameters.

use crate::interp::{run_stmts_all, step_all};
use crate::ir::{Cfa, Stmt, Vertex};
use crate::semantics::State;
use std::collections::BTreeSet;

#[derive(Clone, Debug)]
pub struct OracleLimits {
    /// Abort once this many (vertex, state) pairs have been discovered.
    pub max_states: usize,
}

impl Default for OracleLimits {
    fn default() -> Self {
        OracleLimits {
            max_states: 1 << 18,
        }
    }
}

#[derive(Clone, Debug)]
pub struct OracleReport {
    pub reachable: BTreeSet<(Vertex, State)>,
    /// First error configuration encountered, if any.
    pub error: Option<(Vertex, State)>,
    /// Number of BFS levels (edge traversals) until saturation: the length
    /// of the longest shortest path in the reachable configuration graph.
    pub diameter: u32,
    /// True if `max_states` stopped the exploration early; every other
    /// field is then a lower bound only.
    pub truncated: bool,
}

/// Exhaustive breadth-first exploration from the all-zeroes initial state.
pub fn explore(cfa: &Cfa, limits: &OracleLimits) -> OracleReport {
    let out_edges = cfa.out_edges();
    let init = (cfa.v0, State::zeroed(cfa.vars.len()));
    let mut reachable: BTreeSet<(Vertex, State)> = BTreeSet::new();
    reachable.insert(init.clone());
    let mut error = None;
    if cfa.errors.contains(&cfa.v0) {
        error = Some(init.clone());
    }
    let mut frontier = vec![init];
    let mut diameter = 0u32;
    let mut truncated = false;
    let mut level = 0u32;
    while !frontier.is_empty() && !truncated {
        level += 1;
        let mut next = Vec::new();
        for (v, st) in frontier.drain(..) {
            for &ei in &out_edges[v] {
                let e = &cfa.edges[ei];
                for succ in step_all(cfa, e, &st) {
                    let cfg = (e.tgt, succ);
                    if reachable.insert(cfg.clone()) {
                        diameter = level;
                        if cfa.errors.contains(&e.tgt) && error.is_none() {
                            error = Some(cfg.clone());
                        }
                        if reachable.len() >= limits.max_states {
                            truncated = true;
                        }
                        next.push(cfg);
                    }
                }
            }
        }
        frontier = next;
    }
    OracleReport {
        reachable,
        error,
        diameter,
        truncated,
    }
}

/// The exact reachability diameter, or `None` if the state cap was hit.
pub fn exact_diameter(cfa: &Cfa, limits: &OracleLimits) -> Option<u32> {
    let r = explore(cfa, limits);
    if r.truncated {
        None
    } else {
        Some(r.diameter)
    }
}

/// The concrete relation of a statement sequence over the full domain
/// product, starting from a clear flag. Intended for tiny widths only.
pub fn enum_relation(cfa: &Cfa, stmts: &[Stmt], limits: &OracleLimits) -> BTreeSet<(State, State)> {
    let mut domain_size = 1u128;
    for d in &cfa.vars {
        domain_size = domain_size.saturating_mul(Cfa::mask(d.width) as u128 + 1);
    }
    assert!(
        domain_size <= limits.max_states as u128,
        "domain product {} exceeds the oracle cap",
        domain_size
    );
    let mut out = BTreeSet::new();
    let mut st = State::zeroed(cfa.vars.len());
    loop {
        for fin in run_stmts_all(cfa, stmts, &st) {
            out.insert((st.clone(), fin));
        }
        // Odometer over the variable domains.
        let mut carried = false;
        for v in 0..cfa.vars.len() {
            let m = Cfa::mask(cfa.width_of(v));
            if st.vals[v] < m {
                st.vals[v] += 1;
                carried = true;
                break;
            }
            st.vals[v] = 0;
        }
        if !carried {
            break;
        }
    }
    out
}

/// Iterate a relation to its reflexive-transitive closure over the states
/// appearing in it, by repeated composition with itself. Used to compute
/// the exact set of pairs reachable by one or more iterations of a loop
/// body.
pub fn transitive_iterations(pairs: &BTreeSet<(State, State)>) -> BTreeSet<(State, State)> {
    let mut closure = pairs.clone();
    loop {
        let mut grew = false;
        let additions: Vec<(State, State)> = closure
            .iter()
            .flat_map(|(a, b)| {
                pairs
                    .iter()
                    .filter(move |(c, _)| c == b)
                    .map(move |(_, d)| (a.clone(), d.clone()))
            })
            .collect();
        for p in additions {
            grew |= closure.insert(p);
        }
        if !grew {
            return closure;
        }
    }
}
