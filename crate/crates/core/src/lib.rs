//! Bounded model checking with loop acceleration and trace-automaton
//! instrumentation for a small unsigned integer language.

pub mod accel;
pub mod bmc;
pub mod frontend;
pub mod interp;
pub mod ir;
pub mod oracle;
pub mod pipeline;
pub mod satcore;
pub mod semantics;
pub mod testgen;
pub mod trace_automata;

pub use ir::{BExpr, Cfa, CmpOp, Edge, Expr, FlagRef, OccId, Stmt, VarDecl, VarId, VarRole, Vertex};
