use accelbmc_core::frontend::{
    check_dot, dump_dot, lower, parse, parse_with_width, AstStmt, DotStyle, FrontendError,
    SourceProgram,
};
use accelbmc_core::ir::{stmt_to_string, Cfa, Stmt};

fn src(text: &str) -> SourceProgram {
    SourceProgram::new(text, "test.imp")
}

fn load(text: &str) -> Cfa {
    let ast = parse(&src(text)).expect("parse");
    lower(&ast).expect("lower").0
}

const COUNT_UP: &str = r#"
unsigned x := 0, y, n := *;
y := n;
while (x < n) {
    x := x + 1;
    y := y - 1;
}
assert(y == 0);
"#;

#[test]
fn parses_loop_program_shape() {
    let ast = parse(&src(COUNT_UP)).unwrap();
    assert_eq!(ast.decls.len(), 3);
    assert_eq!(ast.width, 32);
    let n_while = ast
        .body
        .iter()
        .filter(|s| matches!(s, AstStmt::While(..)))
        .count();
    let n_assert = ast
        .body
        .iter()
        .filter(|s| matches!(s, AstStmt::Assert(..)))
        .count();
    assert_eq!(n_while, 1);
    assert_eq!(n_assert, 1);
}

#[test]
fn parses_minimal_program() {
    let ast = parse(&src("unsigned x := 0; skip;")).unwrap();
    assert_eq!(ast.decls.len(), 1);
    assert_eq!(ast.body.len(), 1);
    assert!(matches!(ast.body[0], AstStmt::Skip(_)));
}

#[test]
fn width_pragma_is_honored_and_overridable() {
    let s = src("// WIDTH: 4\nunsigned x;\nskip;");
    assert_eq!(parse(&s).unwrap().width, 4);
    assert_eq!(parse_with_width(&s, Some(7)).unwrap().width, 7);
}

#[test]
fn rejects_unclosed_block() {
    let e = parse(&src("unsigned x;\nwhile (x > 0) {")).unwrap_err();
    assert!(matches!(e, FrontendError::Syntax { .. }), "got {e}");
}

#[test]
fn rejects_undeclared_and_duplicate_variables() {
    let e = parse(&src("unsigned x;\ny := 1;")).unwrap_err();
    assert!(matches!(e, FrontendError::Undeclared { .. }), "got {e}");
    let e = parse(&src("unsigned x, x;\nskip;")).unwrap_err();
    assert!(matches!(e, FrontendError::Duplicate { .. }), "got {e}");
}

#[test]
fn rejects_empty_program_and_bad_width() {
    assert!(matches!(
        parse(&src("// nothing here")).unwrap_err(),
        FrontendError::Empty
    ));
    assert!(matches!(
        parse(&src("// WIDTH: 0\nunsigned x;\nskip;")).unwrap_err(),
        FrontendError::BadWidth(0)
    ));
    assert!(matches!(
        parse(&src("// WIDTH: 65\nunsigned x;\nskip;")).unwrap_err(),
        FrontendError::BadWidth(65)
    ));
}

#[test]
fn straight_line_lowering_has_no_error_vertices() {
    // Three declarations with initializers plus two body statements: one
    // edge per lowered statement, no branching, no error vertices.
    let cfa = load("unsigned x := 0, y := 1, z := 2;\nx := y + z;\ny := x;");
    assert!(cfa.errors.is_empty());
    assert_eq!(cfa.edges.len(), 5);
    assert_eq!(cfa.n_vertices, 6);
    assert!(cfa.back_edges().is_empty());
}

#[test]
fn assert_lowers_to_guarded_error_vertex() {
    let cfa = load("unsigned x := *;\nassert(x != 3);");
    assert_eq!(cfa.errors.len(), 1);
    let err = *cfa.errors.iter().next().unwrap();
    // Exactly one edge enters the error vertex; its guard is the negation
    // of the asserted condition.
    let into_err: Vec<_> = cfa.edges.iter().filter(|e| e.tgt == err).collect();
    assert_eq!(into_err.len(), 1);
    assert_eq!(stmt_to_string(&cfa, &into_err[0].stmt), "[x == 3]");
}

#[test]
fn loop_and_assert_counts() {
    let cfa = load(COUNT_UP);
    assert_eq!(cfa.errors.len(), 1);
    assert_eq!(cfa.back_edges().len(), 1);
}

#[test]
fn lowering_is_deterministic() {
    let a = load(COUNT_UP);
    let b = load(COUNT_UP);
    assert_eq!(a.n_vertices, b.n_vertices);
    assert_eq!(a.edges.len(), b.edges.len());
    for (x, y) in a.edges.iter().zip(b.edges.iter()) {
        assert_eq!(x.id, y.id);
        assert_eq!(x.src, y.src);
        assert_eq!(x.tgt, y.tgt);
        assert_eq!(stmt_to_string(&a, &x.stmt), stmt_to_string(&b, &y.stmt));
    }
}

#[test]
fn while_true_lowers_to_bare_cycle() {
    let cfa = load("unsigned x := 0;\nwhile (true) { x := x + 1; }");
    // No exit guard exists, so everything after the loop is pruned; the
    // loop body cycles back to its own entry.
    assert_eq!(cfa.back_edges().len(), 1);
    assert!(cfa
        .edges
        .iter()
        .all(|e| !matches!(e.stmt, Stmt::Assume(_)) || cfa.errors.contains(&e.tgt)));
}

#[test]
fn trivially_false_assert_warns() {
    let ast = parse(&src("unsigned x;\nassert(false);")).unwrap();
    let (_, warnings) = lower(&ast).unwrap();
    assert!(!warnings.is_empty());
}

#[test]
fn nondet_only_at_top_level_of_rhs() {
    let e = parse(&src("unsigned x;\nx := * + 1;"))
        .and_then(|ast| lower(&ast).map(|_| ()));
    assert!(e.is_err());
}

#[test]
fn dot_output_is_well_formed() {
    for text in [
        "unsigned x;\nskip;",
        COUNT_UP,
        "unsigned x := 0;\nwhile (true) { x := x + 1; }",
    ] {
        let cfa = load(text);
        let dot = dump_dot(&cfa, &DotStyle::default());
        check_dot(&dot).expect("dot check");
    }
}

#[test]
fn dot_self_loop_carries_statement_label() {
    let cfa = load("unsigned x := 0;\nwhile (true) { x := x + 1; }");
    let dot = dump_dot(&cfa, &DotStyle::default());
    assert!(dot.contains("x := (x + 1)"), "dot was:\n{dot}");
}

#[test]
fn comparison_operators_parse_and_negate() {
    for (opstr, negated) in [
        ("==", "!="),
        ("!=", "=="),
        ("<", ">="),
        ("<=", ">"),
        (">", "<="),
        (">=", "<"),
    ] {
        let cfa = load(&format!("unsigned x := *;\nassert(x {} 3);", opstr));
        let err = *cfa.errors.iter().next().unwrap();
        let into_err: Vec<_> = cfa.edges.iter().filter(|e| e.tgt == err).collect();
        assert_eq!(
            stmt_to_string(&cfa, &into_err[0].stmt),
            format!("[x {} 3]", negated)
        );
    }
}
