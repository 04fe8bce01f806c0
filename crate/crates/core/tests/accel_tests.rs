use accelbmc_core::accel::{
    accelerate_cfa, certify, enumerate_looping_traces, solve_recurrence, AccelError, AccelOptions,
    ClosedForm, Delta,
};
use accelbmc_core::frontend::{lower, parse, SourceProgram};
use accelbmc_core::ir::{Cfa, Stmt, VarRole};
use accelbmc_core::oracle::{enum_relation, explore, transitive_iterations, OracleLimits};
use accelbmc_core::semantics::State;
use std::collections::BTreeSet;

fn load(text: &str) -> Cfa {
    let src = SourceProgram::new(text, "test.imp");
    let ast = parse(&src).expect("parse");
    lower(&ast).expect("lower").0
}

const COUNT_UP: &str = r#"
// WIDTH: 4
unsigned x := 0, y, n := *;
y := n;
while (x < n) {
    x := x + 1;
    y := y - 1;
}
assert(y == 0);
"#;

const COUNT_DOWN_BODY: &str = r#"
// WIDTH: 4
unsigned x, y, n;
while (x > 0) {
    x := x - 1;
    y := y + 1;
}
"#;

#[test]
fn count_down_body_has_expected_closed_forms() {
    let cfa = load(COUNT_DOWN_BODY);
    let traces = enumerate_looping_traces(&cfa, 8);
    assert_eq!(traces.len(), 1);
    let (forms, _) = solve_recurrence(&traces[0].stmts(&cfa)).unwrap();
    let x = cfa.var_named("x").unwrap();
    let y = cfa.var_named("y").unwrap();
    let n = cfa.var_named("n").unwrap();
    assert_eq!(
        forms.get(&x),
        Some(&ClosedForm::Affine {
            delta: Delta::Const(1),
            increasing: false
        })
    );
    assert_eq!(
        forms.get(&y),
        Some(&ClosedForm::Affine {
            delta: Delta::Const(1),
            increasing: true
        })
    );
    // Untouched variables are implicitly frozen.
    assert_eq!(forms.get(&n), None);
}

#[test]
fn constant_reset_is_a_closed_form() {
    let cfa = load("// WIDTH: 4\nunsigned x := 1;\nwhile (x > 0) { x := 5; }");
    let traces = enumerate_looping_traces(&cfa, 8);
    let (forms, _) = solve_recurrence(&traces[0].stmts(&cfa)).unwrap();
    let x = cfa.var_named("x").unwrap();
    assert_eq!(forms.get(&x), Some(&ClosedForm::ResetTo(5)));
}

#[test]
fn rejection_reasons_are_reported() {
    let cases: &[(&str, fn(&AccelError) -> bool)] = &[
        // Multiplicative update has no affine closed form.
        ("unsigned x := 1;\nwhile (x < 5) { x := x * 2; }", |e| {
            matches!(e, AccelError::NonAffineUpdate(_))
        }),
        // Havoc in the body.
        ("unsigned x := 0;\nwhile (x < 5) { x := *; }", |e| {
            matches!(e, AccelError::HavocInLoop(_))
        }),
        // Same variable assigned twice per iteration.
        (
            "unsigned x := 0;\nwhile (x < 5) { x := x + 1; x := x + 1; }",
            |e| matches!(e, AccelError::AssignedTwice(_)),
        ),
        // Delta variable modified by the loop itself.
        (
            "unsigned x := 0, d := 1;\nwhile (x < 5) { x := x + d; d := d + 1; }",
            |e| matches!(e, AccelError::MovingDelta(_)),
        ),
        // Disjunctive guard.
        (
            "unsigned x := 0, y := 0;\nwhile (x < 5 || y < 5) { x := x + 1; }",
            |e| matches!(e, AccelError::DisjunctiveGuard),
        ),
        // Disequality guard on a moving variable.
        (
            "unsigned x := 0;\nwhile (x != 5) { x := x + 1; }",
            |e| matches!(e, AccelError::NonMonotoneGuard),
        ),
        // Guard on a variable that is reset, not affine.
        (
            "unsigned x := 0;\nwhile (x < 5) { x := 3; }",
            |e| matches!(e, AccelError::NonMonotoneGuard),
        ),
    ];
    for (text, pred) in cases {
        let cfa = load(&format!("// WIDTH: 4\n{}", text));
        let out = accelerate_cfa(&cfa, &AccelOptions::default());
        assert!(out.accels.is_empty(), "unexpected accelerator for:\n{text}");
        assert_eq!(out.rejected.len(), 1, "expected one rejection for:\n{text}");
        assert!(pred(&out.rejected[0].1), "wrong reason {:?} for:\n{text}", out.rejected[0].1);
    }
}

#[test]
fn branching_body_yields_one_trace_per_branch() {
    let cfa = load(
        "// WIDTH: 4\nunsigned x := 0, y := 0;\nwhile (x < 8) { if (y < 4) { y := y + 1; } x := x + 1; }",
    );
    let traces = enumerate_looping_traces(&cfa, 8);
    assert_eq!(traces.len(), 2);
    for t in &traces {
        assert_eq!(t.head, traces[0].head);
    }
}

#[test]
fn loop_free_cfa_has_no_traces_and_is_unchanged() {
    let cfa = load("// WIDTH: 4\nunsigned x := 1;\nx := x + 1;\nassert(x == 2);");
    assert!(enumerate_looping_traces(&cfa, 8).is_empty());
    let out = accelerate_cfa(&cfa, &AccelOptions::default());
    assert_eq!(out.cfa.edges.len(), cfa.edges.len());
    assert!(out.accels.is_empty());
}

#[test]
fn max_loop_paths_truncates() {
    // Three branches in the body give three looping paths; a cap of 2 keeps
    // only the first two in deterministic order.
    let cfa = load(
        "// WIDTH: 4\nunsigned x := 0, y := 0;\nwhile (x < 8) { if (y < 2) { y := y + 1; } else { if (y < 4) { y := y + 2; } } x := x + 1; }",
    );
    assert_eq!(enumerate_looping_traces(&cfa, 8).len(), 3);
    assert_eq!(enumerate_looping_traces(&cfa, 2).len(), 2);
}

/// Project a full-state pair onto the first `n` variable columns.
fn project(pairs: &BTreeSet<(State, State)>, n: usize) -> BTreeSet<(Vec<u64>, Vec<u64>)> {
    pairs
        .iter()
        .map(|(a, b)| (a.vals[..n].to_vec(), b.vals[..n].to_vec()))
        .collect()
}

/// The accelerator relation and the union of wrap-free body iterations,
/// both projected to the original program variables.
fn accel_vs_iterated(
    text: &str,
) -> Vec<(BTreeSet<(Vec<u64>, Vec<u64>)>, BTreeSet<(Vec<u64>, Vec<u64>)>, BTreeSet<(State, State)>)>
{
    let cfa = load(text);
    let n_orig = cfa.vars.len();
    let out = accelerate_cfa(&cfa, &AccelOptions::default());
    let limits = OracleLimits::default();
    let mut results = Vec::new();
    for a in &out.accels {
        let accel_stmts: Vec<Stmt> = a
            .path
            .iter()
            .map(|&o| out.cfa.edge_by_id(o).unwrap().stmt.clone())
            .collect();
        let u_hat = enum_relation(&out.cfa, &accel_stmts, &limits);
        // Body relation in the original CFA, iterated one or more times;
        // a clear final flag means no step wrapped.
        let body_stmts: Vec<Stmt> = a
            .pattern
            .iter()
            .filter_map(|&o| cfa.edge_by_id(o).map(|e| e.stmt.clone()))
            .collect();
        let body = enum_relation(&cfa, &body_stmts, &limits);
        let iterated: BTreeSet<(State, State)> = transitive_iterations(&body)
            .into_iter()
            .filter(|(_, b)| !b.ovf)
            .collect();
        results.push((project(&u_hat, n_orig), project(&iterated, n_orig), u_hat));
    }
    results
}

#[test]
fn accelerator_equals_union_of_wrap_free_iterations() {
    for text in [COUNT_UP, "// WIDTH: 4\nunsigned x := 0;\nwhile (x < 9) { x := x + 2; }"] {
        let results = accel_vs_iterated(text);
        assert!(!results.is_empty(), "no accelerator for:\n{text}");
        for (u_hat, iterated, _) in results {
            assert_eq!(u_hat, iterated, "relation mismatch for:\n{text}");
        }
    }
}

#[test]
fn accelerator_composed_with_itself_is_contained_in_itself() {
    // Checked on the projection to program variables: the internal counter
    // records only the last application's iteration count, and the
    // accelerator ignores its incoming value.
    for (u_hat, _, _) in accel_vs_iterated(COUNT_UP) {
        let by_src: std::collections::BTreeMap<Vec<u64>, Vec<Vec<u64>>> = {
            let mut m: std::collections::BTreeMap<Vec<u64>, Vec<Vec<u64>>> =
                std::collections::BTreeMap::new();
            for (a, b) in &u_hat {
                m.entry(a.clone()).or_default().push(b.clone());
            }
            m
        };
        for (a, b) in &u_hat {
            if let Some(ds) = by_src.get(b) {
                for d in ds {
                    assert!(
                        u_hat.contains(&(a.clone(), d.clone())),
                        "composition escapes the accelerator"
                    );
                }
            }
        }
    }
}

#[test]
fn accelerator_at_one_iteration_is_the_body_relation() {
    let cfa = load(COUNT_UP);
    let n_orig = cfa.vars.len();
    let out = accelerate_cfa(&cfa, &AccelOptions::default());
    let a = &out.accels[0];
    let limits = OracleLimits::default();
    let accel_stmts: Vec<Stmt> = a
        .path
        .iter()
        .map(|&o| out.cfa.edge_by_id(o).unwrap().stmt.clone())
        .collect();
    // The counter keeps its havocked value, so pairs ending with counter 1
    // are exactly the one-iteration slice.
    let u_hat = enum_relation(&out.cfa, &accel_stmts, &limits);
    let one: BTreeSet<_> = u_hat
        .iter()
        .filter(|(_, b)| b.vals[a.counter] == 1)
        .cloned()
        .collect();
    let body_stmts: Vec<Stmt> = a
        .pattern
        .iter()
        .filter_map(|&o| cfa.edge_by_id(o).map(|e| e.stmt.clone()))
        .collect();
    let body: BTreeSet<(State, State)> = enum_relation(&cfa, &body_stmts, &limits)
        .into_iter()
        .filter(|(_, b)| !b.ovf)
        .collect();
    assert_eq!(project(&one, n_orig), project(&body, n_orig));
}

/// Per-vertex reachable value sets over the original variables.
fn reach_profile(cfa: &Cfa, n_orig: usize, n_vertices: usize) -> Vec<BTreeSet<Vec<u64>>> {
    let report = explore(cfa, &OracleLimits::default());
    assert!(!report.truncated);
    let mut out = vec![BTreeSet::new(); n_vertices];
    for (v, st) in &report.reachable {
        if *v < n_vertices {
            out[*v].insert(st.vals[..n_orig].to_vec());
        }
    }
    out
}

#[test]
fn acceleration_preserves_reachability_per_vertex() {
    for text in [
        COUNT_UP,
        "// WIDTH: 4\nunsigned x := 0;\nwhile (x < 9) { x := x + 2; }\nassert(x == 10);",
        "// WIDTH: 4\nunsigned x := 0, y := 5;\nwhile (x < 12) { x := x + 1; y := 0; }\nassert(y == 0);",
    ] {
        let cfa = load(text);
        let out = accelerate_cfa(&cfa, &AccelOptions::default());
        let base = reach_profile(&cfa, cfa.vars.len(), cfa.n_vertices);
        let accel = reach_profile(&out.cfa, cfa.vars.len(), cfa.n_vertices);
        assert_eq!(base, accel, "reachability changed for:\n{text}");
    }
}

#[test]
fn counter_variables_are_marked() {
    let cfa = load(COUNT_UP);
    let out = accelerate_cfa(&cfa, &AccelOptions::default());
    for a in &out.accels {
        assert_eq!(out.cfa.vars[a.counter].role, VarRole::Counter);
    }
}

#[test]
fn wrappable_loops_are_forked_on_the_flag() {
    let cfa = load(COUNT_UP);
    let out = accelerate_cfa(&cfa, &AccelOptions::default());
    // The fork adds a flag-clearing edge on the wrap branch and on rerouted
    // loop entries.
    let clears = out
        .cfa
        .edges
        .iter()
        .filter(|e| matches!(e.stmt, Stmt::ClearOvf))
        .count();
    assert_eq!(clears, 2);
    // The pattern ends with the fork's flag guard.
    assert_eq!(out.accels.len(), 1);
    let last = *out.accels[0].pattern.last().unwrap();
    let e = out.cfa.edge_by_id(last).unwrap();
    assert!(matches!(e.stmt, Stmt::Assume(_)));
}

#[test]
fn certify_reports_wrappability() {
    let cfa = load(COUNT_UP);
    let traces = enumerate_looping_traces(&cfa, 8);
    assert!(certify(&cfa, &traces[0]).unwrap().wrappable);
    // A reset-only body cannot set the flag; the guard reads an untouched
    // variable so certification still succeeds.
    let reset = load("// WIDTH: 4\nunsigned x := 1, n := *;\nwhile (n > 0) { x := 5; }");
    let traces = enumerate_looping_traces(&reset, 8);
    assert!(!certify(&reset, &traces[0]).unwrap().wrappable);
}
