use accelbmc_core::ir::{BExpr, Cfa, CmpOp, Expr, Stmt, VarDecl, VarRole};
use accelbmc_core::interp::step_stmt;
use accelbmc_core::semantics::{
    compose, identity_rel, lift_cur, trace_rel, trans_rel, wlp, Fresh, Relation, State, SymVar,
};
use std::collections::BTreeSet;

/// A variable-only CFA shell for relation tests: `n` variables of width `w`.
fn arena(n: usize, w: u32) -> Cfa {
    let names = ["x", "y", "z"];
    Cfa::new(
        (0..n)
            .map(|i| VarDecl {
                name: names[i].to_string(),
                width: w,
                role: VarRole::User,
            })
            .collect(),
    )
}

fn all_states(cfa: &Cfa) -> Vec<State> {
    let mut out = vec![State::zeroed(cfa.vars.len())];
    let mut cur = State::zeroed(cfa.vars.len());
    loop {
        let mut carried = false;
        for v in 0..cfa.vars.len() {
            if cur.vals[v] < Cfa::mask(cfa.width_of(v)) {
                cur.vals[v] += 1;
                carried = true;
                break;
            }
            cur.vals[v] = 0;
        }
        if !carried {
            if !cur.ovf {
                cur.ovf = true;
                carried = true;
            } else {
                break;
            }
        }
        out.push(cur.clone());
    }
    out
}

/// Concrete successor set of one statement, havoc fanned out.
fn successors(cfa: &Cfa, st: &Stmt, s: &State) -> Vec<State> {
    match st {
        Stmt::Havoc(x) => (0..=Cfa::mask(cfa.width_of(*x)))
            .filter_map(|v| step_stmt(cfa, st, s, Some(v)))
            .collect(),
        _ => step_stmt(cfa, st, s, None).into_iter().collect(),
    }
}

fn enum_pairs(cfa: &Cfa, r: &Relation) -> BTreeSet<(State, State)> {
    let states = all_states(cfa);
    let mut out = BTreeSet::new();
    for a in &states {
        for b in &states {
            if r.holds(cfa, a, b) {
                out.insert((a.clone(), b.clone()));
            }
        }
    }
    out
}

fn interp_pairs(cfa: &Cfa, st: &Stmt) -> BTreeSet<(State, State)> {
    let states = all_states(cfa);
    let mut out = BTreeSet::new();
    for a in &states {
        for b in successors(cfa, st, a) {
            out.insert((a.clone(), b));
        }
    }
    out
}

#[test]
fn wlp_assign_substitutes() {
    let cfa = arena(1, 4);
    let post = lift_cur(&BExpr::cmp(CmpOp::Gt, Expr::Var(0usize), Expr::Const(0)));
    let mut fresh = Fresh::default();
    let got = wlp(
        &cfa,
        &Stmt::Assign(0, Expr::add(Expr::Var(0), Expr::Const(1))),
        &post,
        &mut fresh,
    );
    let want = BExpr::cmp(
        CmpOp::Gt,
        Expr::add(Expr::Var(SymVar::Cur(0)), Expr::Const(1)),
        Expr::Const(0),
    );
    assert_eq!(format!("{:?}", got), format!("{:?}", want));
}

#[test]
fn wlp_assume_is_implication_and_skip_is_identity() {
    let cfa = arena(1, 4);
    let post = lift_cur(&BExpr::cmp(CmpOp::Eq, Expr::Var(0usize), Expr::Const(2)));
    let mut fresh = Fresh::default();
    let skip = wlp(&cfa, &Stmt::Skip, &post, &mut fresh);
    assert_eq!(format!("{:?}", skip), format!("{:?}", post));
    let guard = BExpr::cmp(CmpOp::Gt, Expr::Var(0usize), Expr::Const(0));
    let got = wlp(&cfa, &Stmt::Assume(guard.clone()), &post, &mut fresh);
    let want = BExpr::implies(lift_cur(&guard), post.clone());
    assert_eq!(format!("{:?}", got), format!("{:?}", want));
}

#[test]
fn trans_rel_matches_interpreter_per_statement() {
    let cfa = arena(2, 2);
    let stmts = vec![
        Stmt::Skip,
        Stmt::ClearOvf,
        Stmt::Assign(0, Expr::add(Expr::Var(0), Expr::Const(1))),
        Stmt::Assign(0, Expr::sub(Expr::Var(0), Expr::Var(1))),
        Stmt::Assign(1, Expr::mul(Expr::Var(1), Expr::Const(3))),
        Stmt::Assign(0, Expr::Const(2)),
        Stmt::Assume(BExpr::cmp(CmpOp::Gt, Expr::Var(0), Expr::Const(0))),
        Stmt::Assume(BExpr::cmp(CmpOp::Le, Expr::Var(0), Expr::Var(1))),
        Stmt::Havoc(1),
    ];
    for st in &stmts {
        let r = trans_rel(&cfa, st);
        assert_eq!(
            enum_pairs(&cfa, &r),
            interp_pairs(&cfa, st),
            "mismatch for {:?}",
            st
        );
    }
}

#[test]
fn guard_relation_pair_count() {
    // [x > 0] over two 4-bit variables: 15 choices of x, 16 of y, flag
    // clear on both sides, identity on everything.
    let cfa = arena(2, 4);
    let r = trans_rel(
        &cfa,
        &Stmt::Assume(BExpr::cmp(CmpOp::Gt, Expr::Var(0), Expr::Const(0))),
    );
    let pairs = enum_pairs(&cfa, &r);
    let flagless: Vec<_> = pairs
        .iter()
        .filter(|(a, b)| !a.ovf && !b.ovf)
        .collect();
    assert_eq!(flagless.len(), 15 * 16);
    // The flag is carried through unchanged, so the full count doubles.
    assert_eq!(pairs.len(), 2 * 15 * 16);
}

#[test]
fn compose_identity_laws() {
    let cfa = arena(2, 2);
    let id = identity_rel(&cfa);
    let r = trans_rel(&cfa, &Stmt::Assign(0, Expr::add(Expr::Var(0), Expr::Var(1))));
    let base = enum_pairs(&cfa, &r);
    assert_eq!(enum_pairs(&cfa, &compose(&cfa, &id, &r)), base);
    assert_eq!(enum_pairs(&cfa, &compose(&cfa, &r, &id)), base);
}

#[test]
fn compose_is_associative_on_enumerated_relations() {
    let cfa = arena(2, 2);
    let a = trans_rel(&cfa, &Stmt::Assign(0, Expr::add(Expr::Var(0), Expr::Const(1))));
    let b = trans_rel(
        &cfa,
        &Stmt::Assume(BExpr::cmp(CmpOp::Lt, Expr::Var(0), Expr::Var(1))),
    );
    let c = trans_rel(&cfa, &Stmt::Havoc(1));
    let left = compose(&cfa, &compose(&cfa, &a, &b), &c);
    let right = compose(&cfa, &a, &compose(&cfa, &b, &c));
    assert_eq!(enum_pairs(&cfa, &left), enum_pairs(&cfa, &right));
}

#[test]
fn trace_rel_of_empty_trace_is_identity() {
    let cfa = arena(2, 2);
    assert_eq!(
        enum_pairs(&cfa, &trace_rel(&cfa, &[])),
        enum_pairs(&cfa, &identity_rel(&cfa))
    );
}

#[test]
fn trace_rel_of_false_guard_is_empty() {
    let cfa = arena(1, 2);
    let r = trace_rel(&cfa, &[Stmt::Assume(BExpr::False)]);
    assert!(enum_pairs(&cfa, &r).is_empty());
}

#[test]
fn trace_rel_matches_stepwise_interpretation() {
    let cfa = arena(2, 2);
    let stmts = vec![
        Stmt::Assign(0, Expr::sub(Expr::Var(0), Expr::Const(1))),
        Stmt::Assign(1, Expr::add(Expr::Var(1), Expr::Const(1))),
    ];
    let r = trace_rel(&cfa, &stmts);
    let mut want = BTreeSet::new();
    for a in all_states(&cfa) {
        let mut frontier = vec![a.clone()];
        for st in &stmts {
            frontier = frontier
                .iter()
                .flat_map(|s| successors(&cfa, st, s))
                .collect();
        }
        for b in frontier {
            want.insert((a.clone(), b));
        }
    }
    assert_eq!(enum_pairs(&cfa, &r), want);
}

#[test]
fn assignment_sets_sticky_flag_on_wrap() {
    let cfa = arena(1, 2);
    let r = trans_rel(&cfa, &Stmt::Assign(0, Expr::add(Expr::Var(0), Expr::Const(1))));
    // 3 + 1 wraps at width 2: the flag must be set afterwards.
    let pre = State {
        vals: vec![3],
        ovf: false,
    };
    let post_wrapped = State {
        vals: vec![0],
        ovf: true,
    };
    let post_clean = State {
        vals: vec![0],
        ovf: false,
    };
    assert!(r.holds(&cfa, &pre, &post_wrapped));
    assert!(!r.holds(&cfa, &pre, &post_clean));
}
