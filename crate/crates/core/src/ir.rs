//! Shared intermediate representation: expressions, statements and control
//! flow automata over fixed-width unsigned bit-vector variables.

use std::collections::BTreeSet;
use std::fmt;

/// Index into [`Cfa::vars`].
pub type VarId = usize;

/// Vertex of a control flow automaton.
pub type Vertex = usize;

/// Unique identifier for a statement occurrence (one per CFA edge).
pub type OccId = u32;

/// Comparison operator over unsigned bit-vector values.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn eval(self, a: u64, b: u64) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }

    /// The operator denoting the negated comparison.
    pub fn negated(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }
}

impl fmt::Display for CmpOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        };
        f.write_str(s)
    }
}

/// Arithmetic expression, generic over the variable reference type.
///
/// Programs use `Expr<VarId>`; symbolic transition relations use
/// [`Expr<SymVar>`](SymVar) so the same machinery covers primed copies and
/// fresh symbols.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expr<V> {
    Var(V),
    Const(u64),
    Add(Box<Expr<V>>, Box<Expr<V>>),
    Sub(Box<Expr<V>>, Box<Expr<V>>),
    Mul(Box<Expr<V>>, Box<Expr<V>>),
    /// Nondeterministic value; only valid as the right-hand side of an
    /// assignment (sugar for havoc).
    Nondet,
}

impl<V> Expr<V> {
    pub fn var(v: V) -> Self {
        Expr::Var(v)
    }
    pub fn add(a: Expr<V>, b: Expr<V>) -> Self {
        Expr::Add(Box::new(a), Box::new(b))
    }
    pub fn sub(a: Expr<V>, b: Expr<V>) -> Self {
        Expr::Sub(Box::new(a), Box::new(b))
    }
    pub fn mul(a: Expr<V>, b: Expr<V>) -> Self {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn contains_nondet(&self) -> bool {
        match self {
            Expr::Nondet => true,
            Expr::Var(_) | Expr::Const(_) => false,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.contains_nondet() || b.contains_nondet()
            }
        }
    }

    pub fn for_each_var(&self, f: &mut impl FnMut(&V)) {
        match self {
            Expr::Var(v) => f(v),
            Expr::Const(_) | Expr::Nondet => {}
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
        }
    }

    pub fn map_vars<W>(&self, f: &mut impl FnMut(&V) -> Expr<W>) -> Expr<W> {
        match self {
            Expr::Var(v) => f(v),
            Expr::Const(c) => Expr::Const(*c),
            Expr::Nondet => Expr::Nondet,
            Expr::Add(a, b) => Expr::add(a.map_vars(f), b.map_vars(f)),
            Expr::Sub(a, b) => Expr::sub(a.map_vars(f), b.map_vars(f)),
            Expr::Mul(a, b) => Expr::mul(a.map_vars(f), b.map_vars(f)),
        }
    }
}

/// Reference to the overflow flag inside a formula.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FlagRef {
    /// Flag of the current state.
    Cur,
    /// Flag of the successor state.
    Next,
    /// Free boolean symbol (existential at the SAT level).
    Free(u32),
}

/// Boolean expression, generic over the variable reference type.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum BExpr<V> {
    True,
    False,
    Cmp(CmpOp, Expr<V>, Expr<V>),
    And(Vec<BExpr<V>>),
    Or(Vec<BExpr<V>>),
    Not(Box<BExpr<V>>),
    /// Reference to the overflow flag. Source programs only ever refer to the
    /// current-state flag.
    Ovf(FlagRef),
    /// True iff evaluating the expression wraps: some operation's exact result
    /// falls outside `[0, 2^w)`.
    Wraps(Expr<V>),
    /// Free boolean symbol (used by composed relations and SSA encodings).
    BoolVar(u32),
}

impl<V> BExpr<V> {
    pub fn not(b: BExpr<V>) -> Self {
        BExpr::Not(Box::new(b))
    }

    pub fn and(mut parts: Vec<BExpr<V>>) -> Self {
        match parts.len() {
            0 => BExpr::True,
            1 => parts.pop().unwrap(),
            _ => BExpr::And(parts),
        }
    }

    pub fn or(mut parts: Vec<BExpr<V>>) -> Self {
        match parts.len() {
            0 => BExpr::False,
            1 => parts.pop().unwrap(),
            _ => BExpr::Or(parts),
        }
    }

    pub fn implies(a: BExpr<V>, b: BExpr<V>) -> Self {
        BExpr::Or(vec![BExpr::not(a), b])
    }

    pub fn cmp(op: CmpOp, a: Expr<V>, b: Expr<V>) -> Self {
        BExpr::Cmp(op, a, b)
    }

    pub fn for_each_var(&self, f: &mut impl FnMut(&V)) {
        match self {
            BExpr::True | BExpr::False | BExpr::Ovf(_) | BExpr::BoolVar(_) => {}
            BExpr::Cmp(_, a, b) => {
                a.for_each_var(f);
                b.for_each_var(f);
            }
            BExpr::And(xs) | BExpr::Or(xs) => {
                for x in xs {
                    x.for_each_var(f);
                }
            }
            BExpr::Not(x) => x.for_each_var(f),
            BExpr::Wraps(e) => e.for_each_var(f),
        }
    }

    pub fn map_vars<W>(&self, f: &mut impl FnMut(&V) -> Expr<W>) -> BExpr<W> {
        self.map_atoms(f, &mut |fl| BExpr::Ovf(fl), &mut |b| BExpr::BoolVar(b))
    }

    /// Structure-preserving map over the three kinds of atoms.
    pub fn map_atoms<W>(
        &self,
        fv: &mut impl FnMut(&V) -> Expr<W>,
        ff: &mut impl FnMut(FlagRef) -> BExpr<W>,
        fb: &mut impl FnMut(u32) -> BExpr<W>,
    ) -> BExpr<W> {
        match self {
            BExpr::True => BExpr::True,
            BExpr::False => BExpr::False,
            BExpr::Cmp(op, a, b) => BExpr::Cmp(*op, a.map_vars(fv), b.map_vars(fv)),
            BExpr::And(xs) => BExpr::And(xs.iter().map(|x| x.map_atoms(fv, ff, fb)).collect()),
            BExpr::Or(xs) => BExpr::Or(xs.iter().map(|x| x.map_atoms(fv, ff, fb)).collect()),
            BExpr::Not(x) => BExpr::not(x.map_atoms(fv, ff, fb)),
            BExpr::Ovf(fl) => ff(*fl),
            BExpr::Wraps(e) => BExpr::Wraps(e.map_vars(fv)),
            BExpr::BoolVar(b) => fb(*b),
        }
    }
}

/// A program statement. One extra internal variant, [`Stmt::ClearOvf`],
/// resets the overflow flag; it is produced by the overflow-fork
/// transformation and never by the parser.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Stmt {
    Assign(VarId, Expr<VarId>),
    Havoc(VarId),
    Assume(BExpr<VarId>),
    Skip,
    ClearOvf,
    /// Statement fused with trace-automaton bookkeeping: a guard over the
    /// automaton variable, the underlying statement and the automaton-state
    /// update execute as one atomic step, so instrumentation never
    /// lengthens executions. `inner` is never itself `Guarded`.
    Guarded {
        guard: BExpr<VarId>,
        inner: Box<Stmt>,
        /// Automaton update `g := m`. The constant always fits the
        /// variable's width, so it cannot set the overflow flag.
        set: Option<(VarId, u64)>,
    },
}

impl Stmt {
    /// The variable receiving a nondeterministic value, looking through
    /// instrumentation fusion.
    pub fn havoc_var(&self) -> Option<VarId> {
        match self {
            Stmt::Havoc(x) => Some(*x),
            Stmt::Guarded { inner, .. } => inner.havoc_var(),
            _ => None,
        }
    }
}

/// How a variable came to exist.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum VarRole {
    /// Declared in the source program.
    User,
    /// Accelerator iteration counter.
    Counter,
    /// Trace-automaton state variable.
    AutomatonState,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub width: u32,
    pub role: VarRole,
}

/// Statement-labelled CFA edge carrying a unique occurrence id.
#[derive(Clone, Debug)]
pub struct Edge {
    pub id: OccId,
    pub src: Vertex,
    pub stmt: Stmt,
    pub tgt: Vertex,
}

/// Control flow automaton: a directed graph of statement-labelled edges with
/// one initial vertex and a set of error vertices encoding assertion
/// failures.
#[derive(Clone, Debug)]
pub struct Cfa {
    pub vars: Vec<VarDecl>,
    pub n_vertices: usize,
    pub v0: Vertex,
    pub errors: BTreeSet<Vertex>,
    pub edges: Vec<Edge>,
    next_occ: OccId,
}

impl Cfa {
    pub fn new(vars: Vec<VarDecl>) -> Self {
        Cfa {
            vars,
            n_vertices: 1,
            v0: 0,
            errors: BTreeSet::new(),
            edges: Vec::new(),
            next_occ: 0,
        }
    }

    /// Copy of this CFA's vertices, variables and error set with no edges,
    /// for rebuilding transformations.
    pub fn shell(&self) -> Cfa {
        Cfa {
            vars: self.vars.clone(),
            n_vertices: self.n_vertices,
            v0: self.v0,
            errors: self.errors.clone(),
            edges: Vec::new(),
            next_occ: 0,
        }
    }

    pub fn fresh_vertex(&mut self) -> Vertex {
        let v = self.n_vertices;
        self.n_vertices += 1;
        v
    }

    pub fn add_edge(&mut self, src: Vertex, stmt: Stmt, tgt: Vertex) -> OccId {
        let id = self.next_occ;
        self.next_occ += 1;
        self.edges.push(Edge { id, src, stmt, tgt });
        id
    }

    pub fn add_var(&mut self, name: impl Into<String>, width: u32, role: VarRole) -> VarId {
        self.vars.push(VarDecl {
            name: name.into(),
            width,
            role,
        });
        self.vars.len() - 1
    }

    pub fn width_of(&self, v: VarId) -> u32 {
        self.vars[v].width
    }

    pub fn var_named(&self, name: &str) -> Option<VarId> {
        self.vars.iter().position(|d| d.name == name)
    }

    pub fn edge_by_id(&self, id: OccId) -> Option<&Edge> {
        self.edges.iter().find(|e| e.id == id)
    }

    /// Outgoing edge indices per vertex, ordered by occurrence id.
    pub fn out_edges(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_vertices];
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by_key(|&i| self.edges[i].id);
        for i in order {
            out[self.edges[i].src].push(i);
        }
        out
    }

    /// Incoming edge indices per vertex, ordered by occurrence id.
    pub fn in_edges(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.n_vertices];
        let mut order: Vec<usize> = (0..self.edges.len()).collect();
        order.sort_by_key(|&i| self.edges[i].id);
        for i in order {
            inc[self.edges[i].tgt].push(i);
        }
        inc
    }

    /// Widest declared variable; 32 if there are no variables.
    pub fn max_width(&self) -> u32 {
        self.vars.iter().map(|d| d.width).max().unwrap_or(32)
    }

    /// Mask for width-w values.
    pub fn mask(width: u32) -> u64 {
        if width >= 64 {
            u64::MAX
        } else {
            (1u64 << width) - 1
        }
    }

    /// Width an expression is evaluated at: the widest variable mentioned,
    /// falling back to the program's maximal variable width for pure-constant
    /// expressions.
    pub fn expr_width(&self, e: &Expr<VarId>) -> u32 {
        let mut w = 0;
        e.for_each_var(&mut |&v| w = w.max(self.vars[v].width));
        if w == 0 {
            self.vars.iter().map(|d| d.width).max().unwrap_or(32)
        } else {
            w
        }
    }

    /// Width a comparison is evaluated at.
    pub fn cmp_width(&self, a: &Expr<VarId>, b: &Expr<VarId>) -> u32 {
        let mut w = 0;
        a.for_each_var(&mut |&v| w = w.max(self.vars[v].width));
        b.for_each_var(&mut |&v| w = w.max(self.vars[v].width));
        if w == 0 {
            self.vars.iter().map(|d| d.width).max().unwrap_or(32)
        } else {
            w
        }
    }

    /// Edges whose target is on the DFS stack when visited, in deterministic
    /// (occurrence-id ordered) DFS from `v0`. Returns edge indices.
    pub fn back_edges(&self) -> Vec<usize> {
        #[derive(Copy, Clone, PartialEq)]
        enum Color {
            White,
            Gray,
            Black,
        }
        let out = self.out_edges();
        let mut color = vec![Color::White; self.n_vertices];
        let mut back = Vec::new();
        // Explicit-stack DFS: (vertex, next out-edge position).
        let mut stack: Vec<(Vertex, usize)> = vec![(self.v0, 0)];
        color[self.v0] = Color::Gray;
        while let Some(top) = stack.last_mut() {
            let v = top.0;
            if top.1 < out[v].len() {
                let ei = out[v][top.1];
                top.1 += 1;
                let t = self.edges[ei].tgt;
                match color[t] {
                    Color::Gray => back.push(ei),
                    Color::White => {
                        color[t] = Color::Gray;
                        stack.push((t, 0));
                    }
                    Color::Black => {}
                }
            } else {
                color[v] = Color::Black;
                stack.pop();
            }
        }
        back.sort_by_key(|&i| self.edges[i].id);
        back
    }
}

/// Render a statement roughly the way the surface language writes it.
pub fn stmt_to_string(cfa: &Cfa, st: &Stmt) -> String {
    match st {
        Stmt::Assign(x, e) => format!("{} := {}", cfa.vars[*x].name, expr_to_string(cfa, e)),
        Stmt::Havoc(x) => format!("{} := *", cfa.vars[*x].name),
        Stmt::Assume(b) => format!("[{}]", bexpr_to_string(cfa, b)),
        Stmt::Skip => "skip".to_string(),
        Stmt::ClearOvf => "ovf := 0".to_string(),
        Stmt::Guarded { guard, inner, set } => {
            let mut parts = Vec::new();
            if !matches!(guard, BExpr::True) {
                parts.push(format!("[{}]", bexpr_to_string(cfa, guard)));
            }
            parts.push(stmt_to_string(cfa, inner));
            if let Some((g, m)) = set {
                parts.push(format!("{} := {}", cfa.vars[*g].name, m));
            }
            parts.join("; ")
        }
    }
}

pub fn expr_to_string(cfa: &Cfa, e: &Expr<VarId>) -> String {
    match e {
        Expr::Var(v) => cfa.vars[*v].name.clone(),
        Expr::Const(c) => c.to_string(),
        Expr::Add(a, b) => format!("({} + {})", expr_to_string(cfa, a), expr_to_string(cfa, b)),
        Expr::Sub(a, b) => format!("({} - {})", expr_to_string(cfa, a), expr_to_string(cfa, b)),
        Expr::Mul(a, b) => format!("({} * {})", expr_to_string(cfa, a), expr_to_string(cfa, b)),
        Expr::Nondet => "*".to_string(),
    }
}

pub fn bexpr_to_string(cfa: &Cfa, b: &BExpr<VarId>) -> String {
    match b {
        BExpr::True => "true".to_string(),
        BExpr::False => "false".to_string(),
        BExpr::Cmp(op, a, e) => format!(
            "{} {} {}",
            expr_to_string(cfa, a),
            op,
            expr_to_string(cfa, e)
        ),
        BExpr::And(xs) => xs
            .iter()
            .map(|x| format!("({})", bexpr_to_string(cfa, x)))
            .collect::<Vec<_>>()
            .join(" && "),
        BExpr::Or(xs) => xs
            .iter()
            .map(|x| format!("({})", bexpr_to_string(cfa, x)))
            .collect::<Vec<_>>()
            .join(" || "),
        BExpr::Not(x) => format!("!({})", bexpr_to_string(cfa, x)),
        BExpr::Ovf(FlagRef::Cur) => "overflow".to_string(),
        BExpr::Ovf(_) => "overflow'".to_string(),
        BExpr::Wraps(e) => format!("wraps({})", expr_to_string(cfa, e)),
        BExpr::BoolVar(i) => format!("b{}", i),
    }
}
