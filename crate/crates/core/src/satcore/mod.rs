//! Embedded SAT engine: CNF representation, a CDCL solver, Tseitin
//! bit-blasting of bit-vector formulas, DIMACS import/export and an optional
//! external-solver subprocess hook.

mod bitblast;
mod cdcl;
mod dimacs;
mod external;

pub use bitblast::BitBlaster;
pub use cdcl::{Solver, SolverConfig, SolveResult};
pub use dimacs::{parse_dimacs, to_dimacs, DimacsError};
pub use external::{run_external, ExternalError, ExternalResult};

/// Propositional variable, numbered from 0.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub u32);

/// Literal: a variable with a sign. Encoded as `2*var + neg`.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Lit(u32);

impl Lit {
    pub fn new(v: Var, negated: bool) -> Lit {
        Lit(v.0 * 2 + negated as u32)
    }
    pub fn pos(v: Var) -> Lit {
        Lit::new(v, false)
    }
    pub fn var(self) -> Var {
        Var(self.0 / 2)
    }
    pub fn is_neg(self) -> bool {
        self.0 & 1 == 1
    }
    /// The complementary literal.
    pub fn negate(self) -> Lit {
        Lit(self.0 ^ 1)
    }
    /// Dense index usable for watch lists.
    pub fn index(self) -> usize {
        self.0 as usize
    }
    /// DIMACS convention: 1-based, negative for negated literals.
    pub fn to_dimacs(self) -> i64 {
        let v = self.var().0 as i64 + 1;
        if self.is_neg() {
            -v
        } else {
            v
        }
    }
    pub fn from_dimacs(n: i64) -> Option<Lit> {
        if n == 0 {
            return None;
        }
        let v = Var(n.unsigned_abs() as u32 - 1);
        Some(Lit::new(v, n < 0))
    }
}

/// A CNF formula under construction.
#[derive(Clone, Debug, Default)]
pub struct Cnf {
    pub n_vars: u32,
    pub clauses: Vec<Vec<Lit>>,
}

impl Cnf {
    pub fn new() -> Cnf {
        Cnf::default()
    }

    pub fn new_var(&mut self) -> Var {
        let v = Var(self.n_vars);
        self.n_vars += 1;
        v
    }

    pub fn add_clause(&mut self, lits: impl Into<Vec<Lit>>) {
        self.clauses.push(lits.into());
    }

    /// Evaluate the formula under a full assignment (index by variable).
    pub fn eval(&self, model: &[bool]) -> bool {
        self.clauses.iter().all(|c| {
            c.iter()
                .any(|l| model[l.var().0 as usize] != l.is_neg())
        })
    }
}
