//! SSA-style propositional encoding of an unwound DAG. Every node gets a
//! fresh copy of all program variables plus a flag bit and a reachability
//! guard; every DAG edge gets an activation bit implying the edge's guard
//! and data constraints. A satisfying assignment therefore describes one
//! feasible path from the root.

use super::unwind::UnwoundDag;
use crate::ir::{BExpr, Cfa, CmpOp, Expr, FlagRef, Stmt, VarId};
use crate::satcore::{BitBlaster, Lit};
use crate::semantics::State;

type NV = (usize, VarId);

pub struct Encoding<'a> {
    pub cfa: &'a Cfa,
    pub dag: &'a UnwoundDag,
    pub blaster: BitBlaster<NV>,
    n_nodes: usize,
    /// Representative node per (node, variable): a copy that an edge leaves
    /// unchanged into a single-predecessor node shares its predecessor's
    /// bits instead of getting fresh ones plus an equality constraint.
    var_rep: Vec<Vec<usize>>,
    /// Representative node for each node's overflow flag, likewise.
    flag_rep: Vec<usize>,
}

/// Split a statement into its executable core and the fused automaton
/// update, if any. The fused guard is handled separately by the caller.
fn split_fused(stmt: &Stmt) -> (&Stmt, Option<VarId>) {
    match stmt {
        Stmt::Guarded { inner, set, .. } => (inner, set.map(|(g, _)| g)),
        s => (s, None),
    }
}

fn biff<V>(a: BExpr<V>, b: BExpr<V>) -> BExpr<V>
where
    V: Clone,
{
    BExpr::or(vec![
        BExpr::and(vec![a.clone(), b.clone()]),
        BExpr::and(vec![BExpr::not(a), BExpr::not(b)]),
    ])
}

impl<'a> Encoding<'a> {
    fn guard_bool(&self, n: usize) -> BExpr<NV> {
        BExpr::BoolVar(n as u32)
    }
    fn flag_bool(&self, n: usize) -> BExpr<NV> {
        BExpr::BoolVar((self.n_nodes + self.flag_rep[n]) as u32)
    }
    fn node_var(&self, n: usize, v: VarId) -> NV {
        (self.var_rep[n][v], v)
    }
    fn act_bool(&self, j: usize) -> BExpr<NV> {
        BExpr::BoolVar((2 * self.n_nodes + j) as u32)
    }

    pub fn guard_lit(&mut self, n: usize) -> Lit {
        let id = n as u32;
        self.blaster.bool_lit(id)
    }
    fn act_lit_id(&self, j: usize) -> u32 {
        (2 * self.n_nodes + j) as u32
    }

    pub fn build(cfa: &'a Cfa, dag: &'a UnwoundDag) -> Encoding<'a> {
        let n_nodes = dag.nodes.len();
        let widths: Vec<u32> = cfa.vars.iter().map(|d| d.width).collect();
        let fallback = cfa.max_width();
        let blaster =
            BitBlaster::new(move |(_, v): &NV| widths[*v], fallback);
        let n_vars = cfa.vars.len();
        let mut enc = Encoding {
            cfa,
            dag,
            blaster,
            n_nodes,
            var_rep: (0..n_nodes).map(|n| vec![n; n_vars]).collect(),
            flag_rep: (0..n_nodes).collect(),
        };
        enc.compute_reps();
        enc.emit();
        enc
    }

    /// Share variable and flag copies through nodes with a single incoming
    /// edge, for everything that edge's statement leaves unchanged. Single
    /// predecessors always have a smaller discovery index, so chasing
    /// representatives at assignment time fully resolves them.
    fn compute_reps(&mut self) {
        let mut incoming = vec![0usize; self.n_nodes];
        let mut only_in = vec![usize::MAX; self.n_nodes];
        for (j, ue) in self.dag.edges.iter().enumerate() {
            incoming[ue.to] += 1;
            only_in[ue.to] = j;
        }
        for n in 0..self.n_nodes {
            if n == self.dag.root
                || incoming[n] != 1
                || self.dag.nodes[n].vertex.is_none()
            {
                continue;
            }
            let ue = &self.dag.edges[only_in[n]];
            let from = ue.from;
            debug_assert!(from < n);
            let (inner, set_var) = split_fused(&self.cfa.edges[ue.cfa_edge].stmt);
            let written = match inner {
                Stmt::Assign(x, _) | Stmt::Havoc(x) => Some(*x),
                _ => None,
            };
            for v in 0..self.cfa.vars.len() {
                if Some(v) != written && Some(v) != set_var {
                    self.var_rep[n][v] = self.var_rep[from][v];
                }
            }
            // Havoc keeps fresh bits for the havocked variable; assignments
            // and flag updates get explicit constraints instead.
            if matches!(inner, Stmt::Assume(_) | Stmt::Skip | Stmt::Havoc(_)) {
                self.flag_rep[n] = self.flag_rep[from];
            }
        }
    }

    fn lift_expr(&self, n: usize, e: &Expr<VarId>) -> Expr<NV> {
        e.map_vars(&mut |&v| Expr::Var(self.node_var(n, v)))
    }

    fn lift_guard(&self, n: usize, g: &BExpr<VarId>) -> BExpr<NV> {
        g.map_atoms(
            &mut |&v| Expr::Var(self.node_var(n, v)),
            &mut |fl| match fl {
                FlagRef::Cur => self.flag_bool(n),
                _ => panic!("edge guards only read the current flag"),
            },
            &mut |_| panic!("edge guards contain no free booleans"),
        )
    }

    fn var_eq(&self, a: usize, b: usize, v: VarId) -> BExpr<NV> {
        BExpr::cmp(
            CmpOp::Eq,
            Expr::Var(self.node_var(b, v)),
            Expr::Var(self.node_var(a, v)),
        )
    }

    fn emit(&mut self) {
        let cfa = self.cfa;
        let dag = self.dag;

        // Root: reachable, all variables zero, flag clear.
        let root = dag.root;
        let mut asserts: Vec<BExpr<NV>> = vec![self.guard_bool(root)];
        for v in 0..cfa.vars.len() {
            asserts.push(BExpr::cmp(
                CmpOp::Eq,
                Expr::Var((root, v)),
                Expr::Const(0),
            ));
        }
        asserts.push(BExpr::not(self.flag_bool(root)));

        // Edge activation constraints. Copies into a single-predecessor
        // node were already shared via representatives, so only the parts
        // the statement actually changes need constraints there.
        let mut n_incoming = vec![0usize; dag.nodes.len()];
        for ue in &dag.edges {
            n_incoming[ue.to] += 1;
        }
        for (j, ue) in dag.edges.iter().enumerate() {
            let e = &cfa.edges[ue.cfa_edge];
            let from = ue.from;
            let to = ue.to;
            let mut body: Vec<BExpr<NV>> = vec![self.guard_bool(from)];
            let to_is_marker = dag.nodes[to].vertex.is_none();
            let shared = !to_is_marker && to != root && n_incoming[to] == 1;
            if let Stmt::Guarded { guard, .. } = &e.stmt {
                if !matches!(guard, BExpr::True) {
                    body.push(self.lift_guard(from, guard));
                }
            }
            let (inner, set_var) = split_fused(&e.stmt);
            if let Stmt::Assume(g) = inner {
                body.push(self.lift_guard(from, g));
            }
            if !to_is_marker {
                let written = match inner {
                    Stmt::Assign(x, _) | Stmt::Havoc(x) => Some(*x),
                    _ => None,
                };
                if let Stmt::Assign(x, rhs) = inner {
                    let rhs_l = self.lift_expr(from, rhs);
                    body.push(BExpr::cmp(
                        CmpOp::Eq,
                        Expr::Var(self.node_var(to, *x)),
                        rhs_l.clone(),
                    ));
                    body.push(biff(
                        self.flag_bool(to),
                        BExpr::or(vec![self.flag_bool(from), BExpr::Wraps(rhs_l)]),
                    ));
                }
                if let Stmt::Guarded { set: Some((g, m)), .. } = &e.stmt {
                    body.push(BExpr::cmp(
                        CmpOp::Eq,
                        Expr::Var(self.node_var(to, *g)),
                        Expr::Const(*m),
                    ));
                }
                if !shared {
                    for v in 0..cfa.vars.len() {
                        if Some(v) != written && Some(v) != set_var {
                            body.push(self.var_eq(from, to, v));
                        }
                    }
                    if matches!(inner, Stmt::Assume(_) | Stmt::Skip | Stmt::Havoc(_)) {
                        body.push(biff(self.flag_bool(to), self.flag_bool(from)));
                    }
                }
                if let Stmt::ClearOvf = inner {
                    body.push(BExpr::not(self.flag_bool(to)));
                }
            }
            asserts.push(BExpr::or(vec![
                BExpr::not(self.act_bool(j)),
                BExpr::and(body),
            ]));
        }

        // Node guards: reachable iff some incoming edge is active.
        let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); dag.nodes.len()];
        let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); dag.nodes.len()];
        for (j, ue) in dag.edges.iter().enumerate() {
            incoming[ue.to].push(j);
            outgoing[ue.from].push(j);
        }
        for n in 0..dag.nodes.len() {
            if n != root {
                let acts: Vec<BExpr<NV>> =
                    incoming[n].iter().map(|&j| self.act_bool(j)).collect();
                asserts.push(biff(self.guard_bool(n), BExpr::or(acts)));
            }
            // At most one outgoing edge is taken per node.
            for a in 0..outgoing[n].len() {
                for b in a + 1..outgoing[n].len() {
                    asserts.push(BExpr::or(vec![
                        BExpr::not(self.act_bool(outgoing[n][a])),
                        BExpr::not(self.act_bool(outgoing[n][b])),
                    ]));
                }
            }
        }
        for a in asserts {
            self.blaster.assert_true(&a);
        }
    }

    /// Walk the active path of a model from the root. Returns the traversed
    /// CFA edge occurrence ids, havoc values in order, the state at each
    /// visited node, and the final DAG node.
    pub fn decode_path(
        &self,
        model: &[bool],
    ) -> (Vec<crate::ir::OccId>, Vec<u64>, Vec<State>, usize) {
        let cfa = self.cfa;
        let dag = self.dag;
        let mut outgoing: Vec<Vec<usize>> = vec![Vec::new(); dag.nodes.len()];
        for (j, ue) in dag.edges.iter().enumerate() {
            outgoing[ue.from].push(j);
        }
        let decode_state = |n: usize| State {
            vals: (0..cfa.vars.len())
                .map(|v| self.blaster.decode(&self.node_var(n, v), model))
                .collect(),
            ovf: self
                .blaster
                .decode_bool((self.n_nodes + self.flag_rep[n]) as u32, model),
        };
        let mut path = Vec::new();
        let mut havocs = Vec::new();
        let mut states = vec![decode_state(dag.root)];
        let mut n = dag.root;
        loop {
            let next = outgoing[n]
                .iter()
                .find(|&&j| self.blaster.decode_bool(self.act_lit_id(j), model));
            let Some(&j) = next else { break };
            let ue = &dag.edges[j];
            let e = &cfa.edges[ue.cfa_edge];
            path.push(e.id);
            if dag.nodes[ue.to].vertex.is_none() {
                n = ue.to;
                break;
            }
            if let Some(x) = e.stmt.havoc_var() {
                havocs.push(self.blaster.decode(&self.node_var(ue.to, x), model));
            }
            states.push(decode_state(ue.to));
            n = ue.to;
        }
        (path, havocs, states, n)
    }
}
