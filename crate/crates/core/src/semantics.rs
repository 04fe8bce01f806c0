//! Symbolic statement semantics: weakest liberal preconditions, transition
//! relations derived from them, and relational composition over fresh
//! intermediate symbols.
//!
//! Relations are formulas over [`SymVar`]: current-state variables,
//! next-state variables and free symbols. Free symbols are existentially
//! quantified at evaluation time. Inside `wlp` the symbol introduced for a
//! havoc is universal, but transition relations negate the `wlp` result, so
//! by the time a [`Relation`] is built every free symbol is existential.

use crate::ir::{BExpr, Cfa, CmpOp, Expr, FlagRef, Stmt, VarId};
use std::collections::{BTreeMap, BTreeSet};

/// Variable reference inside a relation formula.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SymVar {
    /// Program variable in the pre-state.
    Cur(VarId),
    /// Program variable in the post-state.
    Next(VarId),
    /// Free symbol (havoc values, composition intermediates).
    Free(u32),
}

impl std::fmt::Display for SymVar {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SymVar::Cur(v) => write!(f, "x{}", v),
            SymVar::Next(v) => write!(f, "x{}'", v),
            SymVar::Free(i) => write!(f, "f{}", i),
        }
    }
}

/// Generator for fresh free symbols, recording the width of each numeric one.
#[derive(Clone, Debug, Default)]
pub struct Fresh {
    pub next: u32,
    pub widths: BTreeMap<u32, u32>,
    pub flags: BTreeSet<u32>,
}

impl Fresh {
    pub fn numeric(&mut self, width: u32) -> u32 {
        let id = self.next;
        self.next += 1;
        self.widths.insert(id, width);
        id
    }

    pub fn flag(&mut self) -> u32 {
        let id = self.next;
        self.next += 1;
        self.flags.insert(id);
        id
    }
}

/// Binary relation over program states, as a formula plus bookkeeping for
/// its free symbols.
#[derive(Clone, Debug)]
pub struct Relation {
    pub formula: BExpr<SymVar>,
    /// Width of each free numeric symbol.
    pub free_widths: BTreeMap<u32, u32>,
    /// Ids of free boolean symbols (referenced via `FlagRef::Free`).
    pub free_flags: BTreeSet<u32>,
    /// First unused free-symbol id; kept so composition can rename apart.
    pub next_free: u32,
}

/// Lift a program-variable formula to one over pre-state symbols.
pub fn lift_cur(b: &BExpr<VarId>) -> BExpr<SymVar> {
    b.map_vars(&mut |&v| Expr::Var(SymVar::Cur(v)))
}

pub fn lift_expr_cur(e: &Expr<VarId>) -> Expr<SymVar> {
    e.map_vars(&mut |&v| Expr::Var(SymVar::Cur(v)))
}

/// Weakest liberal precondition of a statement with respect to `post`.
///
/// The flag component follows the statement semantics: an assignment may
/// set the (sticky) overflow flag, `ClearOvf` resets it, everything else
/// leaves it alone. The symbol introduced for a havoc is universally
/// quantified; callers that need an existential reading must negate.
pub fn wlp(cfa: &Cfa, st: &Stmt, post: &BExpr<SymVar>, fresh: &mut Fresh) -> BExpr<SymVar> {
    match st {
        Stmt::Skip => post.clone(),
        Stmt::Assume(b) => BExpr::implies(lift_cur(b), post.clone()),
        Stmt::Assign(x, e) => {
            debug_assert!(!e.contains_nondet(), "nondet rhs must lower to havoc");
            let e_cur = lift_expr_cur(e);
            post.map_atoms(
                &mut |sv| {
                    if *sv == SymVar::Cur(*x) {
                        e_cur.clone()
                    } else {
                        Expr::Var(*sv)
                    }
                },
                &mut |fl| match fl {
                    FlagRef::Cur => BExpr::or(vec![
                        BExpr::Ovf(FlagRef::Cur),
                        BExpr::Wraps(e_cur.clone()),
                    ]),
                    other => BExpr::Ovf(other),
                },
                &mut BExpr::BoolVar,
            )
        }
        Stmt::Havoc(x) => {
            let f = fresh.numeric(cfa.width_of(*x));
            post.map_atoms(
                &mut |sv| {
                    if *sv == SymVar::Cur(*x) {
                        Expr::Var(SymVar::Free(f))
                    } else {
                        Expr::Var(*sv)
                    }
                },
                &mut |fl| BExpr::Ovf(fl),
                &mut BExpr::BoolVar,
            )
        }
        Stmt::ClearOvf => post.map_atoms(
            &mut |sv| Expr::Var(*sv),
            &mut |fl| match fl {
                FlagRef::Cur => BExpr::False,
                other => BExpr::Ovf(other),
            },
            &mut BExpr::BoolVar,
        ),
        Stmt::Guarded { guard, inner, set } => {
            // `g := m` never wraps, so the update is plain substitution.
            let post = match set {
                None => post.clone(),
                Some((g, m)) => post.map_atoms(
                    &mut |sv| {
                        if *sv == SymVar::Cur(*g) {
                            Expr::Const(*m)
                        } else {
                            Expr::Var(*sv)
                        }
                    },
                    &mut |fl| BExpr::Ovf(fl),
                    &mut BExpr::BoolVar,
                ),
            };
            let p = wlp(cfa, inner, &post, fresh);
            BExpr::implies(lift_cur(guard), p)
        }
    }
}

fn flag_differs() -> BExpr<SymVar> {
    BExpr::or(vec![
        BExpr::and(vec![
            BExpr::Ovf(FlagRef::Cur),
            BExpr::not(BExpr::Ovf(FlagRef::Next)),
        ]),
        BExpr::and(vec![
            BExpr::not(BExpr::Ovf(FlagRef::Cur)),
            BExpr::Ovf(FlagRef::Next),
        ]),
    ])
}

/// Formula stating that pre- and post-state differ in some component.
fn some_var_differs(cfa: &Cfa) -> BExpr<SymVar> {
    let mut parts: Vec<BExpr<SymVar>> = (0..cfa.vars.len())
        .map(|v| {
            BExpr::cmp(
                CmpOp::Ne,
                Expr::Var(SymVar::Cur(v)),
                Expr::Var(SymVar::Next(v)),
            )
        })
        .collect();
    parts.push(flag_differs());
    BExpr::or(parts)
}

/// Transition relation of a single statement: the negated weakest liberal
/// precondition of state inequality.
pub fn trans_rel(cfa: &Cfa, st: &Stmt) -> Relation {
    let mut fresh = Fresh::default();
    let diff = some_var_differs(cfa);
    let formula = BExpr::not(wlp(cfa, st, &diff, &mut fresh));
    Relation {
        formula,
        free_widths: fresh.widths,
        free_flags: fresh.flags,
        next_free: fresh.next,
    }
}

/// The identity relation (the semantics of `skip`).
pub fn identity_rel(cfa: &Cfa) -> Relation {
    trans_rel(cfa, &Stmt::Skip)
}

fn shift_frees(b: &BExpr<SymVar>, by: u32) -> BExpr<SymVar> {
    b.map_atoms(
        &mut |sv| match sv {
            SymVar::Free(i) => Expr::Var(SymVar::Free(i + by)),
            other => Expr::Var(*other),
        },
        &mut |fl| match fl {
            FlagRef::Free(i) => BExpr::Ovf(FlagRef::Free(i + by)),
            other => BExpr::Ovf(other),
        },
        &mut |i| BExpr::BoolVar(i + by),
    )
}

/// Relational composition: `a` then `b`, joined on fresh intermediate
/// symbols for every variable and for the overflow flag.
pub fn compose(cfa: &Cfa, a: &Relation, b: &Relation) -> Relation {
    let shift = a.next_free;
    let b_formula = shift_frees(&b.formula, shift);
    let mut fresh = Fresh {
        next: shift + b.next_free,
        widths: a.free_widths.clone(),
        flags: a.free_flags.clone(),
    };
    for (&i, &w) in &b.free_widths {
        fresh.widths.insert(i + shift, w);
    }
    for &i in &b.free_flags {
        fresh.flags.insert(i + shift);
    }
    let mids: Vec<u32> = (0..cfa.vars.len())
        .map(|v| fresh.numeric(cfa.width_of(v)))
        .collect();
    let mid_flag = fresh.flag();

    let a_joined = a.formula.map_atoms(
        &mut |sv| match sv {
            SymVar::Next(v) => Expr::Var(SymVar::Free(mids[*v])),
            other => Expr::Var(*other),
        },
        &mut |fl| match fl {
            FlagRef::Next => BExpr::Ovf(FlagRef::Free(mid_flag)),
            other => BExpr::Ovf(other),
        },
        &mut BExpr::BoolVar,
    );
    let b_joined = b_formula.map_atoms(
        &mut |sv| match sv {
            SymVar::Cur(v) => Expr::Var(SymVar::Free(mids[*v])),
            other => Expr::Var(*other),
        },
        &mut |fl| match fl {
            FlagRef::Cur => BExpr::Ovf(FlagRef::Free(mid_flag)),
            other => BExpr::Ovf(other),
        },
        &mut BExpr::BoolVar,
    );
    Relation {
        formula: BExpr::and(vec![a_joined, b_joined]),
        free_widths: fresh.widths,
        free_flags: fresh.flags,
        next_free: fresh.next,
    }
}

/// Transition relation of a statement sequence.
pub fn trace_rel(cfa: &Cfa, stmts: &[Stmt]) -> Relation {
    let mut acc = match stmts.first() {
        None => return identity_rel(cfa),
        Some(st) => trans_rel(cfa, st),
    };
    for st in &stmts[1..] {
        acc = compose(cfa, &acc, &trans_rel(cfa, st));
    }
    acc
}

/// A concrete program state: one value per variable plus the overflow flag.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct State {
    pub vals: Vec<u64>,
    pub ovf: bool,
}

impl State {
    pub fn zeroed(n: usize) -> Self {
        State {
            vals: vec![0; n],
            ovf: false,
        }
    }
}

/// Evaluate an expression at the given width, reporting whether any
/// operation's exact result left `[0, 2^w)`.
pub fn eval_expr_at<V>(e: &Expr<V>, width: u32, val: &impl Fn(&V) -> u64) -> (u64, bool) {
    let m = Cfa::mask(width);
    match e {
        Expr::Var(v) => (val(v) & m, false),
        Expr::Const(c) => (c & m, false),
        Expr::Nondet => panic!("nondet has no value; lower to havoc first"),
        Expr::Add(a, b) => {
            let (x, wa) = eval_expr_at(a, width, val);
            let (y, wb) = eval_expr_at(b, width, val);
            let exact = x as u128 + y as u128;
            (exact as u64 & m, wa || wb || exact > m as u128)
        }
        Expr::Sub(a, b) => {
            let (x, wa) = eval_expr_at(a, width, val);
            let (y, wb) = eval_expr_at(b, width, val);
            (x.wrapping_sub(y) & m, wa || wb || x < y)
        }
        Expr::Mul(a, b) => {
            let (x, wa) = eval_expr_at(a, width, val);
            let (y, wb) = eval_expr_at(b, width, val);
            let exact = x as u128 * y as u128;
            (exact as u64 & m, wa || wb || exact > m as u128)
        }
    }
}

impl Relation {
    fn sym_width(&self, cfa: &Cfa, sv: &SymVar) -> u32 {
        match sv {
            SymVar::Cur(v) | SymVar::Next(v) => cfa.width_of(*v),
            SymVar::Free(i) => *self.free_widths.get(i).unwrap_or(&cfa.max_width()),
        }
    }

    fn formula_expr_width(&self, cfa: &Cfa, e: &Expr<SymVar>) -> u32 {
        let mut w = 0;
        e.for_each_var(&mut |sv| w = w.max(self.sym_width(cfa, sv)));
        if w == 0 {
            cfa.max_width()
        } else {
            w
        }
    }

    fn eval(
        &self,
        cfa: &Cfa,
        b: &BExpr<SymVar>,
        cur: &State,
        next: &State,
        frees: &BTreeMap<u32, u64>,
        flag_frees: &BTreeMap<u32, bool>,
    ) -> bool {
        let val = |sv: &SymVar| match sv {
            SymVar::Cur(v) => cur.vals[*v],
            SymVar::Next(v) => next.vals[*v],
            SymVar::Free(i) => frees[i],
        };
        match b {
            BExpr::True => true,
            BExpr::False => false,
            BExpr::Cmp(op, a, e) => {
                let w = self
                    .formula_expr_width(cfa, a)
                    .max(self.formula_expr_width(cfa, e));
                let (x, _) = eval_expr_at(a, w, &val);
                let (y, _) = eval_expr_at(e, w, &val);
                op.eval(x, y)
            }
            BExpr::And(xs) => xs
                .iter()
                .all(|x| self.eval(cfa, x, cur, next, frees, flag_frees)),
            BExpr::Or(xs) => xs
                .iter()
                .any(|x| self.eval(cfa, x, cur, next, frees, flag_frees)),
            BExpr::Not(x) => !self.eval(cfa, x, cur, next, frees, flag_frees),
            BExpr::Ovf(FlagRef::Cur) => cur.ovf,
            BExpr::Ovf(FlagRef::Next) => next.ovf,
            BExpr::Ovf(FlagRef::Free(i)) => flag_frees[i],
            BExpr::Wraps(e) => {
                let w = self.formula_expr_width(cfa, e);
                eval_expr_at(e, w, &val).1
            }
            BExpr::BoolVar(i) => flag_frees[i],
        }
    }

    /// Does `(cur, next)` belong to the relation? Free symbols are
    /// enumerated existentially, so this is exponential in their number and
    /// meant for small oracle checks only.
    pub fn holds(&self, cfa: &Cfa, cur: &State, next: &State) -> bool {
        let num_ids: Vec<u32> = self.free_widths.keys().copied().collect();
        let flag_ids: Vec<u32> = self.free_flags.iter().copied().collect();
        let mut frees: BTreeMap<u32, u64> = num_ids.iter().map(|&i| (i, 0)).collect();
        let mut flags: BTreeMap<u32, bool> = flag_ids.iter().map(|&i| (i, false)).collect();
        loop {
            if self.eval(cfa, &self.formula, cur, next, &frees, &flags) {
                return true;
            }
            // Advance the combined odometer over all free assignments.
            let mut carried = false;
            for &i in &flag_ids {
                let f = flags.get_mut(&i).unwrap();
                if !*f {
                    *f = true;
                    carried = true;
                    break;
                }
                *f = false;
            }
            if carried {
                continue;
            }
            for &i in &num_ids {
                let limit = Cfa::mask(self.free_widths[&i]);
                let v = frees.get_mut(&i).unwrap();
                if *v < limit {
                    *v += 1;
                    carried = true;
                    break;
                }
                *v = 0;
            }
            if !carried {
                return false;
            }
        }
    }
}
