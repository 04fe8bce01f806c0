//! Trace automata restricting which edge sequences the model checker
//! explores: once a loop path has an accelerator, concrete laps of that path
//! and immediate repetitions of the accelerator are redundant, and the
//! automaton rules them out. The automaton is determinized and then inlined
//! into the CFA as a small state variable with guard and update edges.

use crate::accel::AttachedAccel;
use crate::ir::{BExpr, Cfa, CmpOp, Expr, OccId, Stmt, VarId, VarRole, Vertex};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Alphabet symbol: one whole accelerator path treated as a single atomic
/// symbol, or an ordinary edge occurrence. Accelerators order first so the
/// subset construction discovers their successor states first, which keeps
/// the state numbering compact and stable.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sym {
    Accel(usize),
    Stmt(OccId),
}

#[derive(Debug, Error)]
pub enum TaError {
    #[error("determinization exceeded {0} states")]
    TooManyStates(usize),
}

/// Nondeterministic factor-matching automaton. Accepts exactly the words
/// containing some forbidden factor: an accelerated loop path, or an
/// accelerator applied twice in a row.
#[derive(Clone, Debug)]
pub struct Nfa {
    pub n_states: usize,
    pub start: usize,
    pub accepting: usize,
    pub alphabet: BTreeSet<Sym>,
    pub trans: BTreeSet<(usize, Sym, usize)>,
}

impl Nfa {
    pub fn accepts(&self, word: &[Sym]) -> bool {
        let mut cur: BTreeSet<usize> = [self.start].into_iter().collect();
        for s in word {
            let mut next = BTreeSet::new();
            for &(p, t, q) in &self.trans {
                if cur.contains(&p) && t == *s {
                    next.insert(q);
                }
            }
            cur = next;
        }
        cur.contains(&self.accepting)
    }
}

/// Build the restriction automaton over the accelerated CFA's alphabet.
pub fn build_restriction_nfa(cfa: &Cfa, accels: &[AttachedAccel]) -> Nfa {
    let accel_edges: BTreeSet<OccId> = accels
        .iter()
        .flat_map(|a| a.path.iter().copied())
        .collect();
    let mut alphabet: BTreeSet<Sym> = cfa
        .edges
        .iter()
        .filter(|e| !accel_edges.contains(&e.id))
        .map(|e| Sym::Stmt(e.id))
        .collect();
    for k in 0..accels.len() {
        alphabet.insert(Sym::Accel(k));
    }

    let mut n_states = 2;
    let start = 0;
    let accepting = 1;
    let mut trans: BTreeSet<(usize, Sym, usize)> = BTreeSet::new();
    for &s in &alphabet {
        trans.insert((start, s, start));
        trans.insert((accepting, s, accepting));
    }
    for (k, a) in accels.iter().enumerate() {
        // Pattern chain for the loop path.
        let mut cur = start;
        for (j, &occ) in a.pattern.iter().enumerate() {
            let next = if j + 1 == a.pattern.len() {
                accepting
            } else {
                let s = n_states;
                n_states += 1;
                s
            };
            trans.insert((cur, Sym::Stmt(occ), next));
            cur = next;
        }
        // Two consecutive applications of the accelerator.
        let mid = n_states;
        n_states += 1;
        trans.insert((start, Sym::Accel(k), mid));
        trans.insert((mid, Sym::Accel(k), accepting));
    }
    Nfa {
        n_states,
        start,
        accepting,
        alphabet,
        trans,
    }
}

/// Deterministic automaton; all accepting subsets are collapsed into one
/// absorbing sink state.
#[derive(Clone, Debug)]
pub struct Dfa {
    pub n_states: usize,
    pub start: usize,
    pub accepting: Option<usize>,
    pub alphabet: BTreeSet<Sym>,
    pub trans: BTreeMap<(usize, Sym), usize>,
}

impl Dfa {
    pub fn step(&self, q: usize, s: Sym) -> usize {
        *self
            .trans
            .get(&(q, s))
            .expect("dfa is total over its alphabet")
    }

    pub fn accepts(&self, word: &[Sym]) -> bool {
        let mut q = self.start;
        for &s in word {
            q = self.step(q, s);
        }
        Some(q) == self.accepting
    }
}

/// Render the DFA as a GraphViz digraph. Transitions with the same source
/// and target are merged into one edge with a comma-joined label.
pub fn dfa_to_dot(dfa: &Dfa) -> String {
    let mut out = String::new();
    out.push_str("digraph ta {\n  rankdir=LR;\n  node [shape=circle];\n");
    out.push_str("  __start [shape=point];\n");
    for q in 0..dfa.n_states {
        if Some(q) == dfa.accepting {
            out.push_str(&format!("  q{} [shape=doublecircle];\n", q));
        } else {
            out.push_str(&format!("  q{};\n", q));
        }
    }
    out.push_str(&format!("  __start -> q{};\n", dfa.start));
    let mut merged: BTreeMap<(usize, usize), Vec<String>> = BTreeMap::new();
    for (&(q, s), &m) in &dfa.trans {
        let label = match s {
            Sym::Stmt(o) => format!("occ{}", o),
            Sym::Accel(k) => format!("acc{}", k),
        };
        merged.entry((q, m)).or_default().push(label);
    }
    for ((q, m), labels) in merged {
        out.push_str(&format!(
            "  q{} -> q{} [label=\"{}\"];\n",
            q,
            m,
            labels.join(",")
        ));
    }
    out.push_str("}\n");
    out
}

pub const DETERMINIZE_CAP: usize = 1 << 16;

/// Subset construction. States are numbered in breadth-first discovery
/// order; no minimization is applied.
pub fn determinize(nfa: &Nfa) -> Result<Dfa, TaError> {
    // Transition map by (state, symbol) for fast subset stepping.
    let mut by_src: BTreeMap<(usize, Sym), Vec<usize>> = BTreeMap::new();
    for &(p, s, q) in &nfa.trans {
        by_src.entry((p, s)).or_default().push(q);
    }
    let mut ids: BTreeMap<BTreeSet<usize>, usize> = BTreeMap::new();
    let mut subsets: Vec<BTreeSet<usize>> = Vec::new();
    let mut trans: BTreeMap<(usize, Sym), usize> = BTreeMap::new();
    let mut accepting: Option<usize> = None;

    let start_set: BTreeSet<usize> = [nfa.start].into_iter().collect();
    ids.insert(start_set.clone(), 0);
    subsets.push(start_set);
    let mut queue: VecDeque<usize> = [0].into_iter().collect();
    while let Some(i) = queue.pop_front() {
        if Some(i) == accepting {
            for &s in &nfa.alphabet {
                trans.insert((i, s), i);
            }
            continue;
        }
        let subset = subsets[i].clone();
        for &s in &nfa.alphabet {
            let mut next: BTreeSet<usize> = BTreeSet::new();
            for &p in &subset {
                if let Some(qs) = by_src.get(&(p, s)) {
                    next.extend(qs.iter().copied());
                }
            }
            let is_acc = next.contains(&nfa.accepting);
            let key = if is_acc {
                // All accepting subsets share one absorbing sink.
                [nfa.accepting].into_iter().collect()
            } else {
                next
            };
            let j = match ids.get(&key) {
                Some(&j) => j,
                None => {
                    let j = subsets.len();
                    if j >= DETERMINIZE_CAP {
                        return Err(TaError::TooManyStates(DETERMINIZE_CAP));
                    }
                    ids.insert(key.clone(), j);
                    subsets.push(key);
                    queue.push_back(j);
                    if is_acc {
                        accepting = Some(j);
                    }
                    j
                }
            };
            trans.insert((i, s), j);
        }
    }
    Ok(Dfa {
        n_states: subsets.len(),
        start: 0,
        accepting,
        alphabet: nfa.alphabet.clone(),
        trans,
    })
}

/// The CFA with the automaton folded in as a state variable.
#[derive(Clone, Debug)]
pub struct InstrumentedCfa {
    pub cfa: Cfa,
    /// The automaton-state variable.
    pub g: VarId,
    pub n_dfa_states: usize,
    /// Symbol carried by each re-emitted statement edge.
    pub edge_sym: BTreeMap<OccId, Sym>,
}

/// Guard formula for "g is in `states`". Collapses to a range comparison
/// when the set is contiguous; elided entirely only when the set covers
/// every non-sink automaton state, since g can never hold the sink value.
fn state_set_guard(g: VarId, states: &BTreeSet<usize>, non_sink: &BTreeSet<usize>) -> BExpr<VarId> {
    let gv = Expr::Var(g);
    let c = |n: usize| Expr::Const(n as u64);
    if states == non_sink {
        return BExpr::True;
    }
    if states.len() == 1 {
        let n = *states.iter().next().unwrap();
        return BExpr::cmp(CmpOp::Eq, gv, c(n));
    }
    let lo = *states.iter().next().unwrap();
    let hi = *states.iter().last().unwrap();
    if states.len() == hi - lo + 1 {
        if lo == 0 {
            return BExpr::cmp(CmpOp::Le, gv, c(hi));
        }
        return BExpr::and(vec![
            BExpr::cmp(CmpOp::Ge, gv.clone(), c(lo)),
            BExpr::cmp(CmpOp::Le, gv, c(hi)),
        ]);
    }
    BExpr::or(
        states
            .iter()
            .map(|&n| BExpr::cmp(CmpOp::Eq, gv.clone(), c(n)))
            .collect(),
    )
}

/// Inline the determinized restriction automaton into the accelerated CFA.
///
/// A product liveness pass first computes which automaton states can be
/// live at each vertex (transitions into the accepting sink count as
/// blocked). Edges whose live transitions are all self-loops are copied
/// verbatim; the rest get the guard and state update fused onto the
/// statement, one copy per distinct successor state. Transitions into the
/// sink produce no edge at all, which is what prunes the redundant paths.
pub fn inline(cfa: &Cfa, accels: &[AttachedAccel], dfa: &Dfa) -> InstrumentedCfa {
    let accel_edge_of: BTreeMap<OccId, usize> = accels
        .iter()
        .enumerate()
        .flat_map(|(k, a)| a.path.iter().map(move |&o| (o, k)))
        .collect();
    let out_edges = cfa.out_edges();

    // Product liveness over (vertex, dfa state).
    let mut live: BTreeSet<(Vertex, usize)> = BTreeSet::new();
    let mut queue: VecDeque<(Vertex, usize)> = VecDeque::new();
    live.insert((cfa.v0, dfa.start));
    queue.push_back((cfa.v0, dfa.start));
    while let Some((v, q)) = queue.pop_front() {
        for &ei in &out_edges[v] {
            let e = &cfa.edges[ei];
            if accel_edge_of.contains_key(&e.id) {
                continue;
            }
            let m = dfa.step(q, Sym::Stmt(e.id));
            if Some(m) != dfa.accepting && live.insert((e.tgt, m)) {
                queue.push_back((e.tgt, m));
            }
        }
        for (k, a) in accels.iter().enumerate() {
            if a.head != v {
                continue;
            }
            let m = dfa.step(q, Sym::Accel(k));
            if Some(m) != dfa.accepting && live.insert((v, m)) {
                queue.push_back((v, m));
            }
        }
    }
    let mut live_at: BTreeMap<Vertex, BTreeSet<usize>> = BTreeMap::new();
    for &(v, q) in &live {
        live_at.entry(v).or_default().insert(q);
    }

    let non_sink: BTreeSet<usize> = (0..dfa.n_states)
        .filter(|&q| Some(q) != dfa.accepting)
        .collect();

    // Rebuild the CFA with the automaton variable. The subset construction
    // numbers the start state 0 and fresh variables start out zeroed, so g
    // needs no initialization edge.
    let g_bits = (usize::BITS - (dfa.n_states.saturating_sub(1)).leading_zeros()).max(1);
    let mut new = cfa.shell();
    let g = new.add_var("g", g_bits, VarRole::AutomatonState);
    assert_eq!(dfa.start, 0, "determinize numbers the start state 0");
    let mut edge_sym: BTreeMap<OccId, Sym> = BTreeMap::new();

    // Fuse guard and update onto a statement; plain copy when both are
    // trivial. Keeping every occurrence a single edge means the
    // instrumented program never takes more steps than the original.
    let fuse = |st: &Stmt, guard: BExpr<VarId>, set: Option<(VarId, u64)>| -> Stmt {
        if matches!(guard, BExpr::True) && set.is_none() {
            st.clone()
        } else {
            Stmt::Guarded {
                guard,
                inner: Box::new(st.clone()),
                set,
            }
        }
    };

    // Ordinary edges.
    for e in &cfa.edges {
        if accel_edge_of.contains_key(&e.id) {
            continue;
        }
        let empty = BTreeSet::new();
        let live_here = live_at.get(&e.src).unwrap_or(&empty);
        if live_here.is_empty() {
            continue;
        }
        let sym = Sym::Stmt(e.id);
        let kept: Vec<(usize, usize)> = live_here
            .iter()
            .map(|&q| (q, dfa.step(q, sym)))
            .filter(|&(_, m)| Some(m) != dfa.accepting)
            .collect();
        if kept.is_empty() {
            continue;
        }
        if kept.len() == live_here.len() && kept.iter().all(|&(q, m)| q == m) {
            let occ = new.add_edge(e.src, e.stmt.clone(), e.tgt);
            edge_sym.insert(occ, sym);
            continue;
        }
        let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for (q, m) in kept {
            groups.entry(m).or_default().insert(q);
        }
        for (m, qs) in groups {
            let guard = state_set_guard(g, &qs, &non_sink);
            let set =
                (qs != BTreeSet::from([m])).then_some((g, m as u64));
            let occ = new.add_edge(e.src, fuse(&e.stmt, guard, set), e.tgt);
            edge_sym.insert(occ, sym);
        }
    }

    // Accelerator paths, atomically: the guard fuses onto the first path
    // edge and the state update onto the last.
    for (k, a) in accels.iter().enumerate() {
        let empty = BTreeSet::new();
        let live_here = live_at.get(&a.head).unwrap_or(&empty);
        if live_here.is_empty() {
            continue;
        }
        let sym = Sym::Accel(k);
        let kept: Vec<(usize, usize)> = live_here
            .iter()
            .map(|&q| (q, dfa.step(q, sym)))
            .filter(|&(_, m)| Some(m) != dfa.accepting)
            .collect();
        if kept.is_empty() {
            continue;
        }
        let path_stmts: Vec<Stmt> = a
            .path
            .iter()
            .map(|&o| cfa.edge_by_id(o).expect("accel path edge").stmt.clone())
            .collect();
        let identity = kept.len() == live_here.len() && kept.iter().all(|&(q, m)| q == m);
        let mut groups: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        if identity {
            // One verbatim copy of the path, no guard or update.
            groups.insert(usize::MAX, BTreeSet::new());
        } else {
            for (q, m) in kept {
                groups.entry(m).or_default().insert(q);
            }
        }
        for (m, qs) in groups {
            let (guard, set) = if qs.is_empty() {
                (BExpr::True, None)
            } else {
                (
                    state_set_guard(g, &qs, &non_sink),
                    (qs != BTreeSet::from([m])).then_some((g, m as u64)),
                )
            };
            let mut cur = a.head;
            let last = path_stmts.len() - 1;
            for (j, st) in path_stmts.iter().enumerate() {
                let tgt = if j == last { a.head } else { new.fresh_vertex() };
                let eg = if j == 0 { guard.clone() } else { BExpr::True };
                let es = if j == last { set } else { None };
                let occ = new.add_edge(cur, fuse(st, eg, es), tgt);
                edge_sym.insert(occ, sym);
                cur = tgt;
            }
        }
    }

    InstrumentedCfa {
        cfa: new,
        g,
        n_dfa_states: dfa.n_states,
        edge_sym,
    }
}
