use accelbmc_core::accel::AccelOptions;
use accelbmc_core::bmc::{check_safety, find_proof_bound, unwind, BmcConfig, Verdict};
use accelbmc_core::frontend::{lower, parse, SourceProgram};
use accelbmc_core::interp::replay;
use accelbmc_core::ir::Cfa;
use accelbmc_core::pipeline::{prepare, Mode};
use accelbmc_core::satcore::parse_dimacs;
use accelbmc_core::semantics::State;

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

const COUNT_UP_BUG: &str = r#"
// WIDTH: 4
unsigned x := 0, y, n := *;
y := n;
while (x < n) {
    x := x + 1;
    y := y - 1;
}
assert(y == 1);
"#;

#[test]
fn unwind_at_zero_routes_every_back_edge_into_a_marker() {
    let cfa = load(COUNT_UP);
    let dag = unwind(&cfa, 0);
    assert_eq!(dag.back_edges.len(), 1);
    // The loop head is reachable, so the single back edge must have been
    // redirected into its violation marker.
    assert_eq!(dag.markers.len(), 1);
    assert_eq!(dag.live_back_edges(&cfa).len(), 1);
    // No CFA vertex may appear twice with identical traversal counts.
    let mut seen = std::collections::BTreeSet::new();
    for n in &dag.nodes {
        if let Some(v) = n.vertex {
            assert!(seen.insert((v, n.counts.clone())));
        }
    }
}

#[test]
fn unwinding_a_loop_free_cfa_is_the_identity_up_to_renaming() {
    let cfa = load("unsigned x := 1, y := 2;\nx := x + y;\nassert(x == 3);");
    assert!(cfa.back_edges().is_empty());
    for k in [0, 3] {
        let dag = unwind(&cfa, k);
        assert_eq!(dag.nodes.len(), cfa.n_vertices);
        assert_eq!(dag.edges.len(), cfa.edges.len());
        assert!(dag.markers.is_empty());
    }
}

#[test]
fn unwound_dag_is_acyclic() {
    for text in [COUNT_UP, COUNT_UP_BUG] {
        let cfa = load(text);
        for k in [0, 1, 3] {
            let dag = unwind(&cfa, k);
            // Kahn's algorithm must consume every node.
            let mut indeg = vec![0usize; dag.nodes.len()];
            for e in &dag.edges {
                indeg[e.to] += 1;
            }
            let mut queue: Vec<usize> = (0..dag.nodes.len())
                .filter(|&n| indeg[n] == 0)
                .collect();
            let mut removed = 0;
            while let Some(n) = queue.pop() {
                removed += 1;
                for e in dag.edges.iter().filter(|e| e.from == n) {
                    indeg[e.to] -= 1;
                    if indeg[e.to] == 0 {
                        queue.push(e.to);
                    }
                }
            }
            assert_eq!(removed, dag.nodes.len(), "cycle at k={k}");
        }
    }
}

#[test]
fn unwinding_grows_monotonically_with_the_bound() {
    let cfa = load(COUNT_UP);
    let mut last = 0;
    for k in 0..5 {
        let n = unwind(&cfa, k).nodes.len();
        assert!(n >= last);
        last = n;
    }
    assert!(last > unwind(&cfa, 0).nodes.len());
}

#[test]
fn loop_free_violation_is_found_at_bound_zero() {
    let cfa = load("// WIDTH: 4\nunsigned x := *;\nassert(x != 3);");
    let v = check_safety(&cfa, 0, &BmcConfig::default()).unwrap();
    match v {
        Verdict::Unsafe { cex } => {
            assert!(cfa.errors.contains(&cex.error_vertex));
            assert_eq!(cex.states.len(), cex.path.len() + 1);
            assert_eq!(cex.states.last().unwrap().vals[0], 3);
        }
        other => panic!("expected Unsafe, got {:?}", other),
    }
}

#[test]
fn loop_free_safe_program_is_proved_at_bound_zero() {
    let cfa = load("// WIDTH: 4\nunsigned x := 1, y := 2;\nx := x + y;\nassert(x == 3);");
    let v = check_safety(&cfa, 0, &BmcConfig::default()).unwrap();
    assert!(matches!(v, Verdict::Safe { k: 0 }), "got {:?}", v);
}

#[test]
fn insufficient_bound_reports_unknown_with_the_live_back_edge() {
    let cfa = load(COUNT_UP);
    let v = check_safety(&cfa, 2, &BmcConfig::default()).unwrap();
    match v {
        Verdict::Unknown { k, live_back_edges } => {
            assert_eq!(k, 2);
            assert_eq!(live_back_edges.len(), 1);
        }
        other => panic!("expected Unknown, got {:?}", other),
    }
}

#[test]
fn counterexamples_replay_on_the_checked_cfa() {
    let cfa = load(COUNT_UP_BUG);
    for mode in [Mode::Plain, Mode::Accel, Mode::AccelTa] {
        let p = prepare(&cfa, mode, &AccelOptions::default()).unwrap();
        let k = if mode == Mode::Plain { 16 } else { 2 };
        let v = check_safety(&p.check_cfa, k, &BmcConfig::default()).unwrap();
        match v {
            Verdict::Unsafe { cex } => {
                let init = State::zeroed(p.check_cfa.vars.len());
                let (at, end) =
                    replay(&p.check_cfa, &init, &cex.path, &cex.havocs).unwrap();
                assert!(p.check_cfa.errors.contains(&at));
                assert_eq!(Some(&end), cex.states.last());
            }
            other => panic!("{:?}: expected Unsafe, got {:?}", mode, other),
        }
    }
}

#[test]
fn verdicts_are_monotone_in_the_bound_once_unsafe() {
    // An unsafe instance stays unsafe at every larger bound.
    let cfa = load(COUNT_UP_BUG);
    for k in 16..19 {
        let v = check_safety(&cfa, k, &BmcConfig::default()).unwrap();
        assert!(matches!(v, Verdict::Unsafe { .. }), "k={k}: {:?}", v);
    }
}

#[test]
fn accelerated_safe_loop_is_proved_at_a_small_bound() {
    let cfa = load(COUNT_UP);
    let p = prepare(&cfa, Mode::AccelTa, &AccelOptions::default()).unwrap();
    let v = find_proof_bound(&p.check_cfa, 3, &BmcConfig::default()).unwrap();
    match v {
        Verdict::Safe { k } => assert!(k <= 3),
        other => panic!("expected Safe, got {:?}", other),
    }
}

#[test]
fn find_proof_bound_returns_unknown_when_the_cap_is_too_small() {
    let cfa = load(COUNT_UP);
    let v = find_proof_bound(&cfa, 2, &BmcConfig::default()).unwrap();
    assert!(matches!(v, Verdict::Unknown { .. }), "got {:?}", v);
}

#[test]
fn exhausted_conflict_budget_reports_timeout() {
    let cfa = load(COUNT_UP_BUG);
    let config = BmcConfig {
        conflict_budget: Some(1),
        ..BmcConfig::default()
    };
    let v = check_safety(&cfa, 16, &config).unwrap();
    assert!(matches!(v, Verdict::Timeout), "got {:?}", v);
}

#[test]
fn dimacs_dump_is_parseable() {
    let cfa = load(COUNT_UP_BUG);
    let dir = std::env::temp_dir().join("accelbmc-test-dimacs");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("q1.cnf");
    let config = BmcConfig {
        dimacs_path: Some(path.clone()),
        ..BmcConfig::default()
    };
    check_safety(&cfa, 4, &config).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let cnf = parse_dimacs(&text).unwrap();
    assert!(cnf.n_vars > 0);
    assert!(!cnf.clauses.is_empty());
    std::fs::remove_file(&path).ok();
}
