//! Acceptance gate: one end-to-end check per release criterion, each
//! reported as a single PASS/FAIL line. Run with `-- --nocapture` to see
//! the lines as the gate executes.

use accelbmc_core::accel::{accelerate_cfa, AccelOptions};
use accelbmc_core::bmc::{check_safety, BmcConfig, Verdict};
use accelbmc_core::frontend::{dump_dot, lower, parse, DotStyle, SourceProgram};
use accelbmc_core::interp::{eval_guard, replay, step_all};
use accelbmc_core::ir::{BExpr, Cfa, CmpOp, Expr, Stmt, VarDecl, VarRole};
use accelbmc_core::oracle::{
    enum_relation, exact_diameter, explore, transitive_iterations, OracleLimits,
};
use accelbmc_core::pipeline::{prepare, Mode};
use accelbmc_core::satcore::{BitBlaster, Cnf, Lit, SolveResult, Solver, SolverConfig, Var};
use accelbmc_core::semantics::State;
use accelbmc_core::testgen::{Gen, GenConfig};
use accelbmc_core::trace_automata::{dfa_to_dot, Sym};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::time::{Duration, Instant};

const DEEP_BUG: &str = r#"
// WIDTH: 32
unsigned x := 0;
while (x < 1000000) {
    x := x + 1;
}
assert(x != 1000000);
"#;

const NONDET_SAFE: &str = r#"
// WIDTH: 32
unsigned x := 0, y, n := *;
y := n;
while (x < n) {
    x := x + 1;
    y := y - 1;
}
assert(y == 0);
"#;

const SHALLOW_BUG: &str = "// WIDTH: 32\nunsigned x := *;\nassert(x != 12345);";

const COUNT_UP_W4: &str = r#"
// WIDTH: 4
unsigned x := 0, y, n := *;
y := n;
while (x < n) {
    x := x + 1;
    y := y - 1;
}
assert(y == 0);
"#;

const STRIDE_W4: &str = "// WIDTH: 4\nunsigned x := 0;\nwhile (x < 9) { x := x + 2; }";

const SELF_LOOP: &str = "// WIDTH: 4\nunsigned x;\nwhile (true) { x := x + 1; }";

fn load(text: &str) -> Cfa {
    let src = SourceProgram::new(text, "acceptance.imp");
    let ast = parse(&src).expect("parse");
    lower(&ast).expect("lower").0
}

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/goldens")
}

/// Corpus programs whose full state space the oracle can enumerate.
fn in_bounds_corpus() -> Vec<(String, Cfa)> {
    let mut out = Vec::new();
    for sub in ["safe", "unsafe"] {
        let mut paths: Vec<_> = std::fs::read_dir(corpus_dir().join(sub))
            .expect("corpus directory")
            .map(|e| e.unwrap().path())
            .collect();
        paths.sort();
        for p in paths {
            let text = std::fs::read_to_string(&p).unwrap();
            let src = SourceProgram::new(&text, p.to_str().unwrap());
            let ast = parse(&src).unwrap();
            let (cfa, _) = lower(&ast).unwrap();
            let bits: u32 = cfa.vars.iter().map(|v| v.width).sum();
            if bits <= 20 {
                out.push((p.file_name().unwrap().to_string_lossy().into_owned(), cfa));
            }
        }
    }
    out
}

fn check(cfa: &Cfa, mode: Mode, k: u32) -> Verdict {
    let p = prepare(cfa, mode, &AccelOptions::default()).unwrap();
    check_safety(&p.check_cfa, k, &BmcConfig::default()).unwrap()
}

/// UNSAFE with a counterexample that replays to an error vertex.
fn assert_unsafe_with_replay(cfa: &Cfa, mode: Mode, k: u32) {
    let p = prepare(cfa, mode, &AccelOptions::default()).unwrap();
    match check_safety(&p.check_cfa, k, &BmcConfig::default()).unwrap() {
        Verdict::Unsafe { cex } => {
            let init = State::zeroed(p.check_cfa.vars.len());
            let (at, _) = replay(&p.check_cfa, &init, &cex.path, &cex.havocs).unwrap();
            assert!(p.check_cfa.errors.contains(&at));
        }
        other => panic!("{:?} at k={}: expected UNSAFE, got {:?}", mode, k, other),
    }
}

fn within(budget: Duration, f: impl FnOnce()) {
    let t0 = Instant::now();
    f();
    let dt = t0.elapsed();
    assert!(dt < budget, "took {:?}, budget {:?}", dt, budget);
}

fn criterion_1_deep_bug() {
    let cfa = load(DEEP_BUG);
    within(Duration::from_secs(10), || {
        assert!(matches!(
            check(&cfa, Mode::Plain, 100),
            Verdict::Unknown { .. }
        ));
    });
    within(Duration::from_secs(10), || {
        assert_unsafe_with_replay(&cfa, Mode::Accel, 3);
    });
    within(Duration::from_secs(10), || {
        assert_unsafe_with_replay(&cfa, Mode::AccelTa, 3);
    });
}

fn criterion_2_nondet_safe() {
    let cfa = load(NONDET_SAFE);
    within(Duration::from_secs(30), || {
        assert!(matches!(
            check(&cfa, Mode::Plain, 100),
            Verdict::Unknown { .. }
        ));
        assert!(matches!(
            check(&cfa, Mode::AccelTa, 3),
            Verdict::Safe { .. }
        ));
    });
}

fn criterion_3_shallow_bug() {
    let cfa = load(SHALLOW_BUG);
    within(Duration::from_secs(2), || {
        assert_unsafe_with_replay(&cfa, Mode::Plain, 1);
    });
}

fn criterion_4_accel_alone_is_inconclusive() {
    // Without the trace automaton the concrete loop edges keep the bound
    // markers alive, so no safety proof is possible at a small bound.
    let cfa = load(NONDET_SAFE);
    assert!(matches!(
        check(&cfa, Mode::Accel, 3),
        Verdict::Unknown { .. }
    ));
}

/// Per-vertex reachable value sets over the first `n_vars` variables at the
/// first `n_vertices` vertices; `None` if enumeration was truncated.
fn reach_profile(cfa: &Cfa, n_vars: usize, n_vertices: usize) -> Option<Vec<BTreeSet<Vec<u64>>>> {
    let r = explore(cfa, &OracleLimits::default());
    if r.truncated {
        return None;
    }
    let mut out = vec![BTreeSet::new(); n_vertices];
    for (v, st) in &r.reachable {
        if *v < n_vertices {
            out[*v].insert(st.vals[..n_vars].to_vec());
        }
    }
    Some(out)
}

fn preserves_reachability(cfa: &Cfa) -> Option<bool> {
    let base = reach_profile(cfa, cfa.vars.len(), cfa.n_vertices)?;
    for mode in [Mode::Accel, Mode::AccelTa] {
        let p = prepare(cfa, mode, &AccelOptions::default()).unwrap();
        let got = reach_profile(&p.check_cfa, cfa.vars.len(), cfa.n_vertices)?;
        if got != base {
            return Some(false);
        }
    }
    Some(true)
}

fn criterion_5_reachability_preservation() {
    for (name, cfa) in in_bounds_corpus() {
        assert_eq!(
            preserves_reachability(&cfa),
            Some(true),
            "reachability drift on corpus file {}",
            name
        );
    }
    let mut checked = 0;
    for seed in 0..60u64 {
        if checked >= 20 {
            break;
        }
        let text = Gen::new(seed, GenConfig::default()).program();
        let src = SourceProgram::new(&text, "gen.imp");
        let (cfa, _) = lower(&parse(&src).unwrap()).unwrap();
        match preserves_reachability(&cfa) {
            Some(ok) => {
                assert!(ok, "reachability drift on seed {}:\n{}", seed, text);
                checked += 1;
            }
            None => continue,
        }
    }
    assert!(checked >= 20, "only {} random programs checkable", checked);
}

fn project(pairs: &BTreeSet<(State, State)>, n: usize) -> BTreeSet<(Vec<u64>, Vec<u64>)> {
    pairs
        .iter()
        .map(|(a, b)| (a.vals[..n].to_vec(), b.vals[..n].to_vec()))
        .collect()
}

fn criterion_6_accelerator_relation_laws() {
    let limits = OracleLimits::default();
    for text in [COUNT_UP_W4, STRIDE_W4] {
        let cfa = load(text);
        let n_orig = cfa.vars.len();
        let out = accelerate_cfa(&cfa, &AccelOptions::default());
        assert!(!out.accels.is_empty(), "no accelerator for:\n{text}");
        for a in &out.accels {
            let accel_stmts: Vec<Stmt> = a
                .path
                .iter()
                .map(|&o| out.cfa.edge_by_id(o).unwrap().stmt.clone())
                .collect();
            let u_hat = project(&enum_relation(&out.cfa, &accel_stmts, &limits), n_orig);
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
            // The accelerator is exactly the union of wrap-free body
            // iterations, one or more times.
            assert_eq!(u_hat, project(&iterated, n_orig), "for:\n{text}");
            // Composing the accelerator with itself stays inside it.
            let mut by_src: BTreeMap<Vec<u64>, Vec<Vec<u64>>> = BTreeMap::new();
            for (s, t) in &u_hat {
                by_src.entry(s.clone()).or_default().push(t.clone());
            }
            for (s, t) in &u_hat {
                for u in by_src.get(t).map(|v| v.as_slice()).unwrap_or(&[]) {
                    assert!(
                        u_hat.contains(&(s.clone(), u.clone())),
                        "composition escapes for:\n{text}"
                    );
                }
            }
        }
    }
}

fn criterion_7_restricted_traces_are_infeasible() {
    for text in [SELF_LOOP, COUNT_UP_W4] {
        let cfa = load(text);
        let p = prepare(&cfa, Mode::AccelTa, &AccelOptions::default()).unwrap();
        let inst = p.instrumented.as_ref().unwrap();
        let dfa = p.dfa.as_ref().unwrap();
        let icfa = &inst.cfa;
        let out_edges = icfa.out_edges();
        let init = State::zeroed(icfa.vars.len());

        // The symbol of an accelerator-path copy is projected on the last
        // edge of the copy only, so a word contains it only after a full
        // traversal.
        let mut emit: BTreeMap<u32, Sym> = BTreeMap::new();
        let by_occ: Vec<(u32, Sym)> = inst.edge_sym.iter().map(|(&o, &s)| (o, s)).collect();
        for (idx, &(occ, sym)) in by_occ.iter().enumerate() {
            match sym {
                Sym::Stmt(_) => {
                    emit.insert(occ, sym);
                }
                Sym::Accel(_) => {
                    let chain_continues = by_occ.get(idx + 1).is_some_and(|&(o2, s2)| {
                        o2 == occ + 1
                            && s2 == sym
                            && icfa.edge_by_id(occ).unwrap().tgt
                                == icfa.edge_by_id(o2).unwrap().src
                    });
                    if !chain_continues {
                        emit.insert(occ, sym);
                    }
                }
            }
        }

        let mut frontier: Vec<(usize, Vec<Sym>, Vec<State>)> =
            vec![(icfa.v0, Vec::new(), vec![init])];
        for _ in 0..6 {
            let mut next = Vec::new();
            for (v, word, states) in &frontier {
                for &ei in &out_edges[*v] {
                    let e = &icfa.edges[ei];
                    let mut word2 = word.clone();
                    if let Some(&sym) = emit.get(&e.id) {
                        word2.push(sym);
                    }
                    let mut reached = Vec::new();
                    for st in states {
                        reached.extend(step_all(icfa, e, st));
                    }
                    reached.sort();
                    reached.dedup();
                    if dfa.accepts(&word2) {
                        assert!(reached.is_empty(), "feasible restricted trace in:\n{text}");
                        continue;
                    }
                    next.push((e.tgt, word2, reached));
                }
            }
            frontier = next;
        }
    }
}

fn criterion_8_diameter_reduction() {
    let limits = OracleLimits::default();
    for (name, cfa) in in_bounds_corpus() {
        let plain = exact_diameter(&cfa, &limits);
        let p = prepare(&cfa, Mode::AccelTa, &AccelOptions::default()).unwrap();
        let inst = exact_diameter(&p.check_cfa, &limits);
        if let (Some(d0), Some(d1)) = (plain, inst) {
            assert!(d1 <= d0, "{}: diameter grew from {} to {}", name, d0, d1);
        }
    }
    // The nondeterministic-bound counting loop must shrink strictly.
    let cfa = load(COUNT_UP_W4);
    let d0 = exact_diameter(&cfa, &limits).unwrap();
    let p = prepare(&cfa, Mode::AccelTa, &AccelOptions::default()).unwrap();
    let d1 = exact_diameter(&p.check_cfa, &limits).unwrap();
    assert!(d0 >= 15, "plain diameter unexpectedly small: {}", d0);
    assert!(d1 < d0, "no strict reduction: {} vs {}", d1, d0);
}

fn criterion_9_golden_pipeline() {
    let cfa = load(SELF_LOOP);
    let p = prepare(&cfa, Mode::AccelTa, &AccelOptions::default()).unwrap();
    let accel = p.accel.as_ref().unwrap();
    let dfa = p.dfa.as_ref().unwrap();
    let inst = p.instrumented.as_ref().unwrap();
    assert_eq!(dfa.n_states, 4);
    for (name, got) in [
        ("self_loop_accel.dot", dump_dot(&accel.cfa, &DotStyle::default())),
        ("self_loop_dfa.dot", dfa_to_dot(dfa)),
        (
            "self_loop_instrumented.dot",
            dump_dot(&inst.cfa, &DotStyle::default()),
        ),
    ] {
        let want = std::fs::read_to_string(golden_dir().join(name)).unwrap();
        assert_eq!(want, got, "golden {} drifted", name);
    }
    // Shape of the instrumentation: a collapsed range guard on the loop
    // body and an automaton reset on the overflow edge.
    let texts: Vec<String> = inst
        .cfa
        .edges
        .iter()
        .map(|e| accelbmc_core::ir::stmt_to_string(&inst.cfa, &e.stmt))
        .collect();
    assert!(texts.iter().any(|t| t.contains("g <= 1")));
    assert!(texts
        .iter()
        .any(|t| t.contains("overflow") && t.contains("g := 0")));
}

fn criterion_10_sat_core() {
    // Random 3-CNF against a truth table.
    let mut rng = ChaCha8Rng::seed_from_u64(0x3c4f);
    for round in 0..200 {
        let n_vars = 3 + round % 18;
        let n_clauses = 2 + (round * 7) % (4 * n_vars);
        let mut cnf = Cnf::new();
        for _ in 0..n_vars {
            cnf.new_var();
        }
        for _ in 0..n_clauses {
            let c: Vec<Lit> = (0..3)
                .map(|_| Lit::new(Var(rng.gen_range(0..n_vars as u32)), rng.gen_bool(0.5)))
                .collect();
            cnf.add_clause(c);
        }
        let brute = (0..1u64 << n_vars).any(|bits| {
            let model: Vec<bool> = (0..n_vars).map(|i| (bits >> i) & 1 == 1).collect();
            cnf.eval(&model)
        });
        let mut s = Solver::from_cnf(&cnf, SolverConfig::default());
        let got = s.solve() == SolveResult::Sat;
        assert_eq!(got, brute, "3-CNF round {}", round);
        if got {
            assert!(cnf.eval(s.model()));
        }
    }

    // Random width-4 bit-vector formulas against exhaustive evaluation, and
    // determinism of the whole stack under a fixed seed.
    let arena = Cfa::new(
        ["x", "y"]
            .iter()
            .map(|n| VarDecl {
                name: n.to_string(),
                width: 4,
                role: VarRole::User,
            })
            .collect(),
    );
    let mut rng = ChaCha8Rng::seed_from_u64(0xb17);
    for round in 0..200 {
        let formula = rand_bexpr(&mut rng, 2);
        let solve_once = || {
            let mut blaster: BitBlaster<usize> = BitBlaster::new(|_| 4, 4);
            blaster.assert_true(&formula);
            let mut solver = Solver::from_cnf(&blaster.cnf, SolverConfig::default());
            let r = solver.solve();
            let decoded = if r == SolveResult::Sat {
                (0..2usize)
                    .map(|v| blaster.decode(&v, solver.model()))
                    .collect::<Vec<u64>>()
            } else {
                Vec::new()
            };
            (r, decoded, solver.n_conflicts())
        };
        let (r, decoded, conflicts) = solve_once();
        assert_eq!(
            (r.clone(), decoded.clone(), conflicts),
            solve_once(),
            "round {}",
            round
        );
        let witnesses: Vec<Vec<u64>> = (0..256u64)
            .map(|bits| vec![bits & 15, bits >> 4])
            .filter(|vals| {
                let st = State {
                    vals: vals.clone(),
                    ovf: false,
                };
                eval_guard(&arena, &formula, &st)
            })
            .collect();
        match r {
            SolveResult::Sat => assert!(
                witnesses.contains(&decoded),
                "round {}: bad model {:?} for {:?}",
                round,
                decoded,
                formula
            ),
            SolveResult::Unsat => assert!(
                witnesses.is_empty(),
                "round {}: missed witness for {:?}",
                round,
                formula
            ),
            SolveResult::BudgetExhausted => panic!("round {}: budget exhausted", round),
        }
    }
}

fn rand_expr(rng: &mut ChaCha8Rng, depth: u32) -> Expr<usize> {
    if depth == 0 || rng.gen_bool(0.4) {
        if rng.gen_bool(0.5) {
            Expr::Var(rng.gen_range(0..2))
        } else {
            Expr::Const(rng.gen_range(0..16))
        }
    } else {
        let a = Box::new(rand_expr(rng, depth - 1));
        let b = Box::new(rand_expr(rng, depth - 1));
        match rng.gen_range(0..3) {
            0 => Expr::Add(a, b),
            1 => Expr::Sub(a, b),
            _ => Expr::Mul(a, b),
        }
    }
}

fn rand_bexpr(rng: &mut ChaCha8Rng, depth: u32) -> BExpr<usize> {
    if depth == 0 || rng.gen_bool(0.5) {
        let op = [
            CmpOp::Eq,
            CmpOp::Ne,
            CmpOp::Lt,
            CmpOp::Le,
            CmpOp::Gt,
            CmpOp::Ge,
        ][rng.gen_range(0..6)];
        return BExpr::Cmp(op, rand_expr(rng, 2), rand_expr(rng, 2));
    }
    match rng.gen_range(0..3) {
        0 => BExpr::And(vec![rand_bexpr(rng, depth - 1), rand_bexpr(rng, depth - 1)]),
        1 => BExpr::Or(vec![rand_bexpr(rng, depth - 1), rand_bexpr(rng, depth - 1)]),
        _ => BExpr::Not(Box::new(rand_bexpr(rng, depth - 1))),
    }
}

#[test]
fn acceptance_gate() {
    let criteria: Vec<(&str, fn())> = vec![
        ("deep counting bug found at small bound", criterion_1_deep_bug),
        ("nondeterministic-bound loop proved safe", criterion_2_nondet_safe),
        ("shallow bug found by plain unwinding", criterion_3_shallow_bug),
        ("acceleration alone stays inconclusive", criterion_4_accel_alone_is_inconclusive),
        ("reachability preserved through the pipeline", criterion_5_reachability_preservation),
        ("accelerator relation laws", criterion_6_accelerator_relation_laws),
        ("restricted traces are infeasible", criterion_7_restricted_traces_are_infeasible),
        ("reachability diameter does not grow", criterion_8_diameter_reduction),
        ("golden pipeline artifacts", criterion_9_golden_pipeline),
        ("embedded SAT engine", criterion_10_sat_core),
    ];
    let mut failures = Vec::new();
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let ok = catch_unwind(AssertUnwindSafe(f)).is_ok();
        println!(
            "criterion {}: {} ({})",
            i + 1,
            if ok { "PASS" } else { "FAIL" },
            name
        );
        if !ok {
            failures.push(i + 1);
        }
    }
    assert!(failures.is_empty(), "failing criteria: {:?}", failures);
}
