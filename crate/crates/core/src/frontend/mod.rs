//! Parsing of the mini-language and lowering to a CFA.

mod dot;
mod lexer;
mod lower;
mod parser;

pub use dot::{check_dot, dump_dot, DotStyle};
pub use lower::{lower, LowerWarning};
pub use parser::{parse, parse_with_width};

use thiserror::Error;

/// A source file handed to the frontend.
#[derive(Clone, Debug)]
pub struct SourceProgram {
    pub text: String,
    pub path: String,
}

impl SourceProgram {
    pub fn new(text: impl Into<String>, path: impl Into<String>) -> Self {
        SourceProgram {
            text: text.into(),
            path: path.into(),
        }
    }

    /// Bit width requested by a `// WIDTH: n` pragma, if any.
    pub fn width_pragma(&self) -> Option<u32> {
        for line in self.text.lines() {
            let t = line.trim();
            if let Some(rest) = t.strip_prefix("// WIDTH:") {
                if let Ok(w) = rest.trim().parse::<u32>() {
                    return Some(w);
                }
            }
        }
        None
    }

    /// `// EXPECT: safe|unsafe` header used by the benchmark harness.
    pub fn expect_header(&self) -> Option<&str> {
        for line in self.text.lines() {
            let t = line.trim();
            if let Some(rest) = t.strip_prefix("// EXPECT:") {
                return Some(rest.trim());
            }
        }
        None
    }
}

/// Position in a source file (1-based).
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl std::fmt::Display for Pos {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("{pos}: lexical error: {msg}")]
    Lex { pos: Pos, msg: String },
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: undeclared variable `{name}`")]
    Undeclared { pos: Pos, name: String },
    #[error("{pos}: duplicate declaration of `{name}`")]
    Duplicate { pos: Pos, name: String },
    #[error("program is empty after comment stripping")]
    Empty,
    #[error("bit width {0} out of range 1..=64")]
    BadWidth(u32),
}

/// Abstract syntax tree of a source program.
#[derive(Clone, Debug)]
pub struct Ast {
    pub decls: Vec<AstDecl>,
    pub body: Vec<AstStmt>,
    pub width: u32,
}

#[derive(Clone, Debug)]
pub struct AstDecl {
    pub name: String,
    pub init: Option<AstExpr>,
    pub pos: Pos,
}

#[derive(Clone, Debug)]
pub enum AstStmt {
    Assign(String, AstExpr, Pos),
    Assume(AstBExpr, Pos),
    Assert(AstBExpr, Pos),
    If(AstBExpr, Vec<AstStmt>, Vec<AstStmt>, Pos),
    While(AstBExpr, Vec<AstStmt>, Pos),
    Skip(Pos),
}

#[derive(Clone, Debug)]
pub enum AstExpr {
    Var(String, Pos),
    Const(u64),
    Add(Box<AstExpr>, Box<AstExpr>),
    Sub(Box<AstExpr>, Box<AstExpr>),
    Mul(Box<AstExpr>, Box<AstExpr>),
    Nondet,
}

#[derive(Clone, Debug)]
pub enum AstBExpr {
    True,
    False,
    Cmp(crate::ir::CmpOp, AstExpr, AstExpr),
    And(Box<AstBExpr>, Box<AstBExpr>),
    Or(Box<AstBExpr>, Box<AstBExpr>),
    Not(Box<AstBExpr>),
}
