//! Under-approximating loop acceleration.
//!
//! For each innermost loop path whose updates have affine closed forms and
//! whose guards are monotone, a single accelerator path is attached at the
//! loop head: it havocs an iteration counter `i > 0`, assumes the guards at
//! the first and last iteration, applies the closed-form updates, and bounds
//! `i` by requiring the overflow flag to stay clear. Back edges of
//! accelerated loops are forked on the flag so that the flag is known to be
//! clear at the loop head; the union of the fork branches is a no-op on the
//! program variables.

use crate::ir::{BExpr, Cfa, CmpOp, Expr, FlagRef, OccId, Stmt, VarId, VarRole, Vertex};
use std::collections::{BTreeMap, BTreeSet, VecDeque};
use thiserror::Error;

/// Why a loop path could not be accelerated.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum AccelError {
    #[error("loop body havocs variable {0}")]
    HavocInLoop(VarId),
    #[error("variable {0} assigned more than once per iteration")]
    AssignedTwice(VarId),
    #[error("update of variable {0} is not of the form x := x +- d or x := k")]
    NonAffineUpdate(VarId),
    #[error("delta of variable {0} is itself modified by the loop")]
    MovingDelta(VarId),
    #[error("guard is not a conjunction of comparisons")]
    DisjunctiveGuard,
    #[error("guard compares a modified variable non-monotonically")]
    NonMonotoneGuard,
    #[error("loop body carries trace-automaton instrumentation")]
    InstrumentedStmt,
    #[error("loop body resets the overflow flag")]
    FlagResetInLoop,
}

/// One looping path: a simple path from the loop head back to itself whose
/// final edge is a back edge. `edges` are indices into `cfa.edges`, back
/// edge last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LoopTrace {
    pub head: Vertex,
    pub edges: Vec<usize>,
    pub back_edge: usize,
}

impl LoopTrace {
    pub fn stmts(&self, cfa: &Cfa) -> Vec<Stmt> {
        self.edges.iter().map(|&i| cfa.edges[i].stmt.clone()).collect()
    }

    pub fn occs(&self, cfa: &Cfa) -> Vec<OccId> {
        self.edges.iter().map(|&i| cfa.edges[i].id).collect()
    }
}

/// Per-iteration change of an affine variable.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Delta {
    Const(u64),
    /// A variable the loop leaves untouched.
    Var(VarId),
}

impl Delta {
    pub fn to_expr(&self) -> Expr<VarId> {
        match self {
            Delta::Const(c) => Expr::Const(*c),
            Delta::Var(v) => Expr::Var(*v),
        }
    }
}

/// Closed form of one variable over the iterations of a loop path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ClosedForm {
    /// `x := x + d` or `x := x - d` once per iteration.
    Affine { delta: Delta, increasing: bool },
    /// `x := k` once per iteration.
    ResetTo(u64),
}

/// A loop path together with everything needed to emit its accelerator.
#[derive(Clone, Debug)]
pub struct CertifiedTrace {
    pub trace: LoopTrace,
    /// Closed forms for the assigned variables; untouched variables are
    /// implicitly frozen.
    pub forms: BTreeMap<VarId, ClosedForm>,
    /// Position in the statement sequence at which each variable is
    /// assigned.
    pub assign_pos: BTreeMap<VarId, usize>,
    /// Guards (position in the statement sequence, guard formula).
    pub guards: Vec<(usize, BExpr<VarId>)>,
    /// Whether any update can set the overflow flag. Reset-only loops
    /// cannot, and then neither the fork nor the flag guards are needed.
    pub wrappable: bool,
}

/// Closed forms of every assigned variable, or the reason there are none.
pub fn solve_recurrence(
    stmts: &[Stmt],
) -> Result<(BTreeMap<VarId, ClosedForm>, BTreeMap<VarId, usize>), AccelError> {
    let mut forms: BTreeMap<VarId, ClosedForm> = BTreeMap::new();
    let mut pos: BTreeMap<VarId, usize> = BTreeMap::new();
    for (p, st) in stmts.iter().enumerate() {
        match st {
            Stmt::Skip | Stmt::Assume(_) => {}
            Stmt::Guarded { .. } => return Err(AccelError::InstrumentedStmt),
            Stmt::ClearOvf => return Err(AccelError::FlagResetInLoop),
            Stmt::Havoc(x) => return Err(AccelError::HavocInLoop(*x)),
            Stmt::Assign(x, e) => {
                if forms.contains_key(x) {
                    return Err(AccelError::AssignedTwice(*x));
                }
                forms.insert(*x, classify_update(*x, e)?);
                pos.insert(*x, p);
            }
        }
    }
    // A delta variable must be frozen by the loop.
    for form in forms.values() {
        if let ClosedForm::Affine {
            delta: Delta::Var(v),
            ..
        } = form
        {
            if forms.contains_key(v) {
                return Err(AccelError::MovingDelta(*v));
            }
        }
    }
    Ok((forms, pos))
}

fn classify_update(x: VarId, e: &Expr<VarId>) -> Result<ClosedForm, AccelError> {
    let delta_of = |d: &Expr<VarId>| match d {
        Expr::Const(c) => Some(Delta::Const(*c)),
        Expr::Var(v) if *v != x => Some(Delta::Var(*v)),
        _ => None,
    };
    match e {
        Expr::Const(k) => Ok(ClosedForm::ResetTo(*k)),
        Expr::Add(a, b) => {
            let d = match (a.as_ref(), b.as_ref()) {
                (Expr::Var(v), d) if *v == x => delta_of(d),
                (d, Expr::Var(v)) if *v == x => delta_of(d),
                _ => None,
            };
            d.map(|delta| ClosedForm::Affine {
                delta,
                increasing: true,
            })
            .ok_or(AccelError::NonAffineUpdate(x))
        }
        Expr::Sub(a, b) => match a.as_ref() {
            Expr::Var(v) if *v == x => delta_of(b)
                .map(|delta| ClosedForm::Affine {
                    delta,
                    increasing: false,
                })
                .ok_or(AccelError::NonAffineUpdate(x)),
            _ => Err(AccelError::NonAffineUpdate(x)),
        },
        Expr::Var(v) if *v == x => Ok(ClosedForm::Affine {
            delta: Delta::Const(0),
            increasing: true,
        }),
        _ => Err(AccelError::NonAffineUpdate(x)),
    }
}

/// Check every guard of the trace is a conjunction of comparisons that are
/// monotone along the loop: each comparison either mentions only frozen
/// variables, or has a single affine variable on one side, an invariant
/// expression on the other, and an order (not equality) operator.
fn check_guards(
    forms: &BTreeMap<VarId, ClosedForm>,
    stmts: &[Stmt],
) -> Result<Vec<(usize, BExpr<VarId>)>, AccelError> {
    let mut out = Vec::new();
    for (p, st) in stmts.iter().enumerate() {
        if let Stmt::Assume(g) = st {
            for c in conjuncts(g)? {
                check_cmp(forms, c)?;
            }
            out.push((p, g.clone()));
        }
    }
    Ok(out)
}

fn conjuncts(g: &BExpr<VarId>) -> Result<Vec<&BExpr<VarId>>, AccelError> {
    match g {
        BExpr::And(xs) => {
            let mut out = Vec::new();
            for x in xs {
                out.extend(conjuncts(x)?);
            }
            Ok(out)
        }
        BExpr::Cmp(..) | BExpr::True => Ok(vec![g]),
        _ => Err(AccelError::DisjunctiveGuard),
    }
}

fn check_cmp(forms: &BTreeMap<VarId, ClosedForm>, c: &BExpr<VarId>) -> Result<(), AccelError> {
    let (op, a, b) = match c {
        BExpr::True => return Ok(()),
        BExpr::Cmp(op, a, b) => (op, a, b),
        _ => return Err(AccelError::DisjunctiveGuard),
    };
    let invariant = |e: &Expr<VarId>| {
        let mut inv = true;
        e.for_each_var(&mut |v| inv &= !forms.contains_key(v));
        inv
    };
    let moving_var = |e: &Expr<VarId>| match e {
        Expr::Var(v) => match forms.get(v) {
            Some(ClosedForm::Affine { .. }) => Some(*v),
            _ => None,
        },
        _ => None,
    };
    match (invariant(a), invariant(b)) {
        (true, true) => Ok(()),
        (false, true) if moving_var(a).is_some() => match op {
            CmpOp::Eq | CmpOp::Ne => Err(AccelError::NonMonotoneGuard),
            _ => Ok(()),
        },
        (true, false) if moving_var(b).is_some() => match op {
            CmpOp::Eq | CmpOp::Ne => Err(AccelError::NonMonotoneGuard),
            _ => Ok(()),
        },
        _ => Err(AccelError::NonMonotoneGuard),
    }
}

fn update_can_wrap(e: &Expr<VarId>) -> bool {
    match e {
        Expr::Var(_) | Expr::Const(_) | Expr::Nondet => false,
        Expr::Add(..) | Expr::Sub(..) | Expr::Mul(..) => true,
    }
}

/// Certify a loop trace for acceleration.
pub fn certify(cfa: &Cfa, trace: &LoopTrace) -> Result<CertifiedTrace, AccelError> {
    let stmts = trace.stmts(cfa);
    let (forms, assign_pos) = solve_recurrence(&stmts)?;
    let guards = check_guards(&forms, &stmts)?;
    let wrappable = stmts.iter().any(|st| match st {
        Stmt::Assign(_, e) => update_can_wrap(e),
        _ => false,
    });
    Ok(CertifiedTrace {
        trace: trace.clone(),
        forms,
        assign_pos,
        guards,
        wrappable,
    })
}

/// Natural loop of a back edge `u -> h`: `h`, `u` and every vertex that
/// reaches `u` without passing through `h`.
pub fn natural_loop(cfa: &Cfa, back_edge: usize) -> BTreeSet<Vertex> {
    let u = cfa.edges[back_edge].src;
    let h = cfa.edges[back_edge].tgt;
    let mut set: BTreeSet<Vertex> = [h, u].into_iter().collect();
    let inc = cfa.in_edges();
    let mut queue: VecDeque<Vertex> = VecDeque::new();
    if u != h {
        queue.push_back(u);
    }
    while let Some(v) = queue.pop_front() {
        for &ei in &inc[v] {
            let s = cfa.edges[ei].src;
            if s != h && set.insert(s) {
                queue.push_back(s);
            }
        }
    }
    set
}

/// Back edges whose natural loop strictly contains no other loop.
pub fn innermost_back_edges(cfa: &Cfa) -> Vec<usize> {
    let back = cfa.back_edges();
    let loops: Vec<(usize, BTreeSet<Vertex>)> = back
        .iter()
        .map(|&b| (b, natural_loop(cfa, b)))
        .collect();
    loops
        .iter()
        .filter(|(b, l)| {
            !loops.iter().any(|(b2, l2)| {
                b2 != b
                    && cfa.edges[*b2].tgt != cfa.edges[*b].tgt
                    && l2.is_subset(l)
            })
        })
        .map(|(b, _)| *b)
        .collect()
}

/// All simple looping paths through innermost back edges, capped at
/// `max_paths` per back edge.
pub fn enumerate_looping_traces(cfa: &Cfa, max_paths: usize) -> Vec<LoopTrace> {
    let out_edges = cfa.out_edges();
    let mut traces = Vec::new();
    for b in innermost_back_edges(cfa) {
        let h = cfa.edges[b].tgt;
        let u = cfa.edges[b].src;
        let scope = natural_loop(cfa, b);
        let mut found = 0usize;
        // Depth-first enumeration of simple paths h -> u inside the loop.
        let mut path: Vec<usize> = Vec::new();
        let mut visited: BTreeSet<Vertex> = [h].into_iter().collect();
        // Stack of (vertex, iterator position over its out edges).
        let mut stack: Vec<(Vertex, usize)> = vec![(h, 0)];
        while let Some(top) = stack.last_mut() {
            let v = top.0;
            if top.1 < out_edges[v].len() {
                let ei = out_edges[v][top.1];
                top.1 += 1;
                if ei == b {
                    continue;
                }
                let t = cfa.edges[ei].tgt;
                if !scope.contains(&t) || visited.contains(&t) {
                    continue;
                }
                path.push(ei);
                if t == u {
                    let mut edges = path.clone();
                    edges.push(b);
                    traces.push(LoopTrace {
                        head: h,
                        edges,
                        back_edge: b,
                    });
                    found += 1;
                    if found >= max_paths {
                        break;
                    }
                    path.pop();
                    continue;
                }
                visited.insert(t);
                stack.push((t, 0));
            } else {
                stack.pop();
                if !stack.is_empty() {
                    let back = path.pop().expect("path tracks stack");
                    visited.remove(&cfa.edges[back].tgt);
                }
            }
        }
        if u == h {
            // Self-loop: the looping path is the back edge alone.
            traces.push(LoopTrace {
                head: h,
                edges: vec![b],
                back_edge: b,
            });
        }
    }
    traces.sort_by_key(|t| (t.back_edge, t.edges.clone()));
    traces
}

/// Value of `x` as seen at position `p` of iteration `j`, as an expression
/// over the head-state variables and the counter.
fn value_at(
    cert: &CertifiedTrace,
    x: VarId,
    p: usize,
    counter: VarId,
    last_iteration: bool,
) -> Expr<VarId> {
    let assigned_before = cert.assign_pos.get(&x).is_some_and(|&ap| ap < p);
    match cert.forms.get(&x) {
        None => Expr::Var(x),
        Some(ClosedForm::ResetTo(k)) => {
            if assigned_before {
                Expr::Const(*k)
            } else {
                // Only reachable for invariant-side occurrences, which the
                // guard check rules out for reset variables.
                Expr::Var(x)
            }
        }
        Some(ClosedForm::Affine { delta, increasing }) => {
            // Iteration j starts from x + delta*j; an update before p adds
            // one more delta. For j = 0 that is x or x + delta; for the
            // last iteration j = i - 1 it is x + delta*(i-1) or x + delta*i.
            let steps: Expr<VarId> = if last_iteration {
                if assigned_before {
                    Expr::mul(delta.to_expr(), Expr::Var(counter))
                } else {
                    Expr::mul(
                        delta.to_expr(),
                        Expr::sub(Expr::Var(counter), Expr::Const(1)),
                    )
                }
            } else {
                if assigned_before {
                    delta.to_expr()
                } else {
                    return Expr::Var(x);
                }
            };
            if *increasing {
                Expr::add(Expr::Var(x), steps)
            } else {
                Expr::sub(Expr::Var(x), steps)
            }
        }
    }
}

fn instantiate_guard(
    cert: &CertifiedTrace,
    g: &BExpr<VarId>,
    p: usize,
    counter: VarId,
    last_iteration: bool,
) -> BExpr<VarId> {
    g.map_vars(&mut |&v| value_at(cert, v, p, counter, last_iteration))
}

/// Build the accelerator statement sequence for a certified trace, given a
/// fresh counter variable.
pub fn synth_accelerator(cert: &CertifiedTrace, counter: VarId) -> Vec<Stmt> {
    let mut out = Vec::new();
    out.push(Stmt::Havoc(counter));
    out.push(Stmt::Assume(BExpr::cmp(
        CmpOp::Gt,
        Expr::Var(counter),
        Expr::Const(0),
    )));
    if cert.wrappable {
        out.push(Stmt::Assume(BExpr::not(BExpr::Ovf(FlagRef::Cur))));
    }
    for (p, g) in &cert.guards {
        out.push(Stmt::Assume(instantiate_guard(cert, g, *p, counter, false)));
        out.push(Stmt::Assume(instantiate_guard(cert, g, *p, counter, true)));
    }
    // Closed-form updates, in trace order. Each right-hand side only reads
    // the variable itself and frozen variables, so the order is immaterial.
    let mut by_pos: Vec<(usize, VarId)> =
        cert.assign_pos.iter().map(|(&v, &p)| (p, v)).collect();
    by_pos.sort();
    for (_, x) in by_pos {
        let st = match &cert.forms[&x] {
            ClosedForm::ResetTo(k) => Stmt::Assign(x, Expr::Const(*k)),
            ClosedForm::Affine { delta, increasing } => {
                let step = Expr::mul(delta.to_expr(), Expr::Var(counter));
                let rhs = if *increasing {
                    Expr::add(Expr::Var(x), step)
                } else {
                    Expr::sub(Expr::Var(x), step)
                };
                Stmt::Assign(x, rhs)
            }
        };
        out.push(st);
    }
    // Iteration bound: the accelerated updates must not have wrapped.
    if cert.wrappable {
        out.push(Stmt::Assume(BExpr::not(BExpr::Ovf(FlagRef::Cur))));
    }
    out
}

/// An accelerator attached to the CFA, with the occurrence ids needed to
/// build the trace automaton.
#[derive(Clone, Debug)]
pub struct AttachedAccel {
    pub head: Vertex,
    pub counter: VarId,
    /// Occurrence ids of the loop path the accelerator subsumes, including
    /// the fork's flag-guard edge when present.
    pub pattern: Vec<OccId>,
    /// Occurrence ids of the accelerator's own edges, in path order.
    pub path: Vec<OccId>,
}

#[derive(Clone, Debug)]
pub struct AccelOutcome {
    pub cfa: Cfa,
    pub accels: Vec<AttachedAccel>,
    pub rejected: Vec<(LoopTrace, AccelError)>,
}

#[derive(Clone, Debug)]
pub struct AccelOptions {
    pub max_loop_paths: usize,
}

impl Default for AccelOptions {
    fn default() -> Self {
        AccelOptions { max_loop_paths: 8 }
    }
}

/// Accelerate every certifiable innermost loop path of the CFA.
pub fn accelerate_cfa(cfa: &Cfa, opts: &AccelOptions) -> AccelOutcome {
    let mut out = cfa.clone();
    let traces = enumerate_looping_traces(cfa, opts.max_loop_paths);
    let mut certified = Vec::new();
    let mut rejected = Vec::new();
    for t in traces {
        match certify(cfa, &t) {
            Ok(c) => certified.push(c),
            Err(e) => rejected.push((t, e)),
        }
    }

    // Fork each back edge that carries a wrappable certified trace: after
    // the fork the flag is clear whenever a concrete lap completes without
    // wrapping, and a wrapping lap resets it. Heads of forked loops also get
    // their entry edges rerouted through a flag reset so the flag is clear
    // at the head invariantly.
    let pre_existing: BTreeSet<OccId> = out.edges.iter().map(|e| e.id).collect();
    let mut fork_guard: BTreeMap<usize, OccId> = BTreeMap::new();
    let mut forked_heads: BTreeSet<Vertex> = BTreeSet::new();
    for c in &certified {
        let b = c.trace.back_edge;
        if !c.wrappable || fork_guard.contains_key(&b) {
            continue;
        }
        let h = out.edges[b].tgt;
        let u = out.fresh_vertex();
        out.edges[b].tgt = u;
        let guard_occ = out.add_edge(u, Stmt::Assume(BExpr::not(BExpr::Ovf(FlagRef::Cur))), h);
        let r = out.fresh_vertex();
        out.add_edge(u, Stmt::Assume(BExpr::Ovf(FlagRef::Cur)), r);
        out.add_edge(r, Stmt::ClearOvf, h);
        fork_guard.insert(b, guard_occ);
        forked_heads.insert(h);
    }
    for &h in &forked_heads {
        let entries: Vec<usize> = out
            .edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.tgt == h && pre_existing.contains(&e.id))
            .map(|(i, _)| i)
            .collect();
        if entries.is_empty() {
            continue;
        }
        let rv = out.fresh_vertex();
        for ei in entries {
            out.edges[ei].tgt = rv;
        }
        out.add_edge(rv, Stmt::ClearOvf, h);
    }

    // Attach one accelerator path per certified trace.
    let mut accels = Vec::new();
    for (idx, c) in certified.iter().enumerate() {
        let counter = out.add_var(format!("i{}", idx), cfa.max_width(), VarRole::Counter);
        let stmts = synth_accelerator(c, counter);
        let h = c.trace.head;
        let mut path = Vec::new();
        let mut cur = h;
        for (k, st) in stmts.iter().enumerate() {
            let tgt = if k + 1 == stmts.len() {
                h
            } else {
                out.fresh_vertex()
            };
            path.push(out.add_edge(cur, st.clone(), tgt));
            cur = tgt;
        }
        let mut pattern = c.trace.occs(cfa);
        if let Some(&g) = fork_guard.get(&c.trace.back_edge) {
            pattern.push(g);
        }
        accels.push(AttachedAccel {
            head: h,
            counter,
            pattern,
            path,
        });
    }
    AccelOutcome {
        cfa: out,
        accels,
        rejected,
    }
}
