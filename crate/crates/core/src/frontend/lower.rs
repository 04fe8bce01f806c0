use super::{Ast, AstBExpr, AstExpr, AstStmt, FrontendError, Pos};
use crate::ir::{BExpr, Cfa, Expr, Stmt, VarDecl, VarId, VarRole, Vertex};
use std::collections::BTreeMap;

/// Non-fatal observations made while lowering.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LowerWarning {
    /// `assert` with a condition that is true regardless of state.
    AssertAlwaysTrue(Pos),
    /// `assert(false)` or equivalent.
    AssertAlwaysFalse(Pos),
}

/// Lower a resolved AST to a control flow automaton.
///
/// Assertions become a guarded branch to a fresh error vertex. Guards are
/// negated by pushing negation down to the comparisons, so edge labels stay
/// in negation normal form. Trivially true guards lower to `skip` edges and
/// trivially false guards are dropped entirely; unreachable vertices are
/// pruned afterwards.
pub fn lower(ast: &Ast) -> Result<(Cfa, Vec<LowerWarning>), FrontendError> {
    let vars: Vec<VarDecl> = ast
        .decls
        .iter()
        .map(|d| VarDecl {
            name: d.name.clone(),
            width: ast.width,
            role: VarRole::User,
        })
        .collect();
    let mut cfa = Cfa::new(vars);
    let mut warnings = Vec::new();
    let mut cur = cfa.v0;

    for (x, d) in ast.decls.iter().enumerate() {
        let next = cfa.fresh_vertex();
        let stmt = match &d.init {
            None => Stmt::Havoc(x),
            Some(AstExpr::Nondet) => Stmt::Havoc(x),
            Some(e) => Stmt::Assign(x, lower_expr(&cfa, e)?),
        };
        cfa.add_edge(cur, stmt, next);
        cur = next;
    }

    let exit = cfa.fresh_vertex();
    lower_seq(&mut cfa, &mut warnings, &ast.body, cur, exit)?;
    prune_unreachable(&mut cfa);
    Ok((cfa, warnings))
}

fn lower_seq(
    cfa: &mut Cfa,
    warnings: &mut Vec<LowerWarning>,
    stmts: &[AstStmt],
    entry: Vertex,
    exit: Vertex,
) -> Result<(), FrontendError> {
    if stmts.is_empty() {
        cfa.add_edge(entry, Stmt::Skip, exit);
        return Ok(());
    }
    let mut cur = entry;
    for (i, s) in stmts.iter().enumerate() {
        let tgt = if i + 1 == stmts.len() {
            exit
        } else {
            cfa.fresh_vertex()
        };
        lower_stmt(cfa, warnings, s, cur, tgt)?;
        cur = tgt;
    }
    Ok(())
}

fn lower_stmt(
    cfa: &mut Cfa,
    warnings: &mut Vec<LowerWarning>,
    s: &AstStmt,
    entry: Vertex,
    exit: Vertex,
) -> Result<(), FrontendError> {
    match s {
        AstStmt::Skip(_) => {
            cfa.add_edge(entry, Stmt::Skip, exit);
        }
        AstStmt::Assign(name, e, _) => {
            let x = cfa.var_named(name).expect("resolved by the parser");
            let stmt = match e {
                AstExpr::Nondet => Stmt::Havoc(x),
                _ => Stmt::Assign(x, lower_expr(cfa, e)?),
            };
            cfa.add_edge(entry, stmt, exit);
        }
        AstStmt::Assume(b, _) => {
            let g = lower_bexpr(cfa, b, false)?;
            add_guard_edge(cfa, entry, g, exit);
        }
        AstStmt::Assert(b, pos) => {
            let g = lower_bexpr(cfa, b, false)?;
            let ng = lower_bexpr(cfa, b, true)?;
            match (&g, &ng) {
                (_, BExpr::False) => warnings.push(LowerWarning::AssertAlwaysTrue(*pos)),
                (BExpr::False, _) => warnings.push(LowerWarning::AssertAlwaysFalse(*pos)),
                _ => {}
            }
            if !matches!(ng, BExpr::False) {
                let err = cfa.fresh_vertex();
                cfa.errors.insert(err);
                add_guard_edge(cfa, entry, ng, err);
            }
            add_guard_edge(cfa, entry, g, exit);
        }
        AstStmt::If(b, then, els, _) => {
            let g = lower_bexpr(cfa, b, false)?;
            let ng = lower_bexpr(cfa, b, true)?;
            match (&g, &ng) {
                (BExpr::True, _) => lower_seq(cfa, warnings, then, entry, exit)?,
                (_, BExpr::True) => lower_seq(cfa, warnings, els, entry, exit)?,
                _ => {
                    let tv = cfa.fresh_vertex();
                    cfa.add_edge(entry, Stmt::Assume(g), tv);
                    lower_seq(cfa, warnings, then, tv, exit)?;
                    let ev = cfa.fresh_vertex();
                    cfa.add_edge(entry, Stmt::Assume(ng), ev);
                    lower_seq(cfa, warnings, els, ev, exit)?;
                }
            }
        }
        AstStmt::While(b, body, _) => {
            let g = lower_bexpr(cfa, b, false)?;
            let ng = lower_bexpr(cfa, b, true)?;
            match (&g, &ng) {
                // `while (true)` lowers to a bare cycle on the head vertex;
                // the loop exit is left unreachable and pruned later.
                (BExpr::True, _) => lower_seq(cfa, warnings, body, entry, entry)?,
                (_, BExpr::True) => {
                    cfa.add_edge(entry, Stmt::Skip, exit);
                }
                _ => {
                    let bv = cfa.fresh_vertex();
                    cfa.add_edge(entry, Stmt::Assume(g), bv);
                    lower_seq(cfa, warnings, body, bv, entry)?;
                    cfa.add_edge(entry, Stmt::Assume(ng), exit);
                }
            }
        }
    }
    Ok(())
}

fn add_guard_edge(cfa: &mut Cfa, src: Vertex, g: BExpr<VarId>, tgt: Vertex) {
    match g {
        BExpr::False => {}
        BExpr::True => {
            cfa.add_edge(src, Stmt::Skip, tgt);
        }
        g => {
            cfa.add_edge(src, Stmt::Assume(g), tgt);
        }
    }
}

fn lower_expr(cfa: &Cfa, e: &AstExpr) -> Result<Expr<VarId>, FrontendError> {
    match e {
        AstExpr::Var(n, _) => Ok(Expr::Var(cfa.var_named(n).expect("resolved"))),
        AstExpr::Const(c) => Ok(Expr::Const(*c)),
        AstExpr::Add(a, b) => Ok(Expr::add(lower_expr(cfa, a)?, lower_expr(cfa, b)?)),
        AstExpr::Sub(a, b) => Ok(Expr::sub(lower_expr(cfa, a)?, lower_expr(cfa, b)?)),
        AstExpr::Mul(a, b) => Ok(Expr::mul(lower_expr(cfa, a)?, lower_expr(cfa, b)?)),
        AstExpr::Nondet => Err(FrontendError::Syntax {
            pos: Pos { line: 0, col: 0 },
            msg: "`*` is only allowed as the whole right-hand side of an assignment".to_string(),
        }),
    }
}

/// Lower a boolean expression, pushing `neg` down to the comparisons so the
/// result contains no `Not` nodes.
fn lower_bexpr(cfa: &Cfa, b: &AstBExpr, neg: bool) -> Result<BExpr<VarId>, FrontendError> {
    Ok(match b {
        AstBExpr::True => {
            if neg {
                BExpr::False
            } else {
                BExpr::True
            }
        }
        AstBExpr::False => {
            if neg {
                BExpr::True
            } else {
                BExpr::False
            }
        }
        AstBExpr::Cmp(op, a, e) => {
            let op = if neg { op.negated() } else { *op };
            BExpr::Cmp(op, lower_expr(cfa, a)?, lower_expr(cfa, e)?)
        }
        AstBExpr::And(a, e) => {
            let l = lower_bexpr(cfa, a, neg)?;
            let r = lower_bexpr(cfa, e, neg)?;
            if neg {
                bor(l, r)
            } else {
                band(l, r)
            }
        }
        AstBExpr::Or(a, e) => {
            let l = lower_bexpr(cfa, a, neg)?;
            let r = lower_bexpr(cfa, e, neg)?;
            if neg {
                band(l, r)
            } else {
                bor(l, r)
            }
        }
        AstBExpr::Not(x) => lower_bexpr(cfa, x, !neg)?,
    })
}

fn band(l: BExpr<VarId>, r: BExpr<VarId>) -> BExpr<VarId> {
    match (l, r) {
        (BExpr::False, _) | (_, BExpr::False) => BExpr::False,
        (BExpr::True, r) => r,
        (l, BExpr::True) => l,
        (BExpr::And(mut xs), BExpr::And(ys)) => {
            xs.extend(ys);
            BExpr::And(xs)
        }
        (BExpr::And(mut xs), r) => {
            xs.push(r);
            BExpr::And(xs)
        }
        (l, BExpr::And(mut ys)) => {
            ys.insert(0, l);
            BExpr::And(ys)
        }
        (l, r) => BExpr::And(vec![l, r]),
    }
}

fn bor(l: BExpr<VarId>, r: BExpr<VarId>) -> BExpr<VarId> {
    match (l, r) {
        (BExpr::True, _) | (_, BExpr::True) => BExpr::True,
        (BExpr::False, r) => r,
        (l, BExpr::False) => l,
        (BExpr::Or(mut xs), BExpr::Or(ys)) => {
            xs.extend(ys);
            BExpr::Or(xs)
        }
        (BExpr::Or(mut xs), r) => {
            xs.push(r);
            BExpr::Or(xs)
        }
        (l, BExpr::Or(mut ys)) => {
            ys.insert(0, l);
            BExpr::Or(ys)
        }
        (l, r) => BExpr::Or(vec![l, r]),
    }
}

/// Drop vertices unreachable from the initial vertex and renumber the rest in
/// discovery order so vertex ids stay dense.
fn prune_unreachable(cfa: &mut Cfa) {
    let out = cfa.out_edges();
    let mut map: BTreeMap<Vertex, Vertex> = BTreeMap::new();
    let mut order = Vec::new();
    let mut queue = std::collections::VecDeque::new();
    map.insert(cfa.v0, 0);
    order.push(cfa.v0);
    queue.push_back(cfa.v0);
    while let Some(v) = queue.pop_front() {
        for &ei in &out[v] {
            let t = cfa.edges[ei].tgt;
            if !map.contains_key(&t) {
                map.insert(t, order.len());
                order.push(t);
                queue.push_back(t);
            }
        }
    }
    cfa.edges.retain(|e| map.contains_key(&e.src));
    for e in &mut cfa.edges {
        e.src = map[&e.src];
        e.tgt = map[&e.tgt];
    }
    cfa.errors = cfa
        .errors
        .iter()
        .filter_map(|v| map.get(v).copied())
        .collect();
    cfa.v0 = 0;
    cfa.n_vertices = order.len();
}
