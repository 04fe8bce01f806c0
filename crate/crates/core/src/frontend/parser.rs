use super::lexer::{lex, Spanned, Tok};
use super::{
    Ast, AstBExpr, AstDecl, AstExpr, AstStmt, FrontendError, Pos, SourceProgram,
};
use crate::ir::CmpOp;
use std::collections::HashSet;

/// Parse a source program into an AST with identifiers resolved and the
/// global bit width attached.
///
/// `width_override` takes precedence over a `// WIDTH:` pragma; the default
/// is 32 bits.
pub fn parse(src: &SourceProgram) -> Result<Ast, FrontendError> {
    parse_with_width(src, None)
}

pub fn parse_with_width(
    src: &SourceProgram,
    width_override: Option<u32>,
) -> Result<Ast, FrontendError> {
    let width = width_override.or_else(|| src.width_pragma()).unwrap_or(32);
    if width == 0 || width > 64 {
        return Err(FrontendError::BadWidth(width));
    }
    let toks = lex(&src.text)?;
    if toks.len() <= 1 {
        return Err(FrontendError::Empty);
    }
    let mut p = Parser { toks, at: 0 };
    let mut decls = Vec::new();
    while p.peek() == &Tok::KwUnsigned {
        p.bump();
        loop {
            let pos = p.pos();
            let name = p.expect_ident()?;
            let init = if p.peek() == &Tok::Assign {
                p.bump();
                Some(p.expr()?)
            } else {
                None
            };
            decls.push(AstDecl { name, init, pos });
            if p.peek() == &Tok::Comma {
                p.bump();
            } else {
                break;
            }
        }
        p.expect(Tok::Semi)?;
    }
    let mut body = Vec::new();
    while p.peek() != &Tok::Eof {
        body.push(p.stmt()?);
    }
    let ast = Ast { decls, body, width };
    resolve(&ast)?;
    Ok(ast)
}

/// Check declarations are unique and every referenced identifier is declared.
fn resolve(ast: &Ast) -> Result<(), FrontendError> {
    let mut seen: HashSet<&str> = HashSet::new();
    for d in &ast.decls {
        if !seen.insert(&d.name) {
            return Err(FrontendError::Duplicate {
                pos: d.pos,
                name: d.name.clone(),
            });
        }
    }
    fn check_expr(e: &AstExpr, seen: &HashSet<&str>) -> Result<(), FrontendError> {
        match e {
            AstExpr::Var(n, pos) => {
                if !seen.contains(n.as_str()) {
                    return Err(FrontendError::Undeclared {
                        pos: *pos,
                        name: n.clone(),
                    });
                }
                Ok(())
            }
            AstExpr::Const(_) | AstExpr::Nondet => Ok(()),
            AstExpr::Add(a, b) | AstExpr::Sub(a, b) | AstExpr::Mul(a, b) => {
                check_expr(a, seen)?;
                check_expr(b, seen)
            }
        }
    }
    fn check_bexpr(b: &AstBExpr, seen: &HashSet<&str>) -> Result<(), FrontendError> {
        match b {
            AstBExpr::True | AstBExpr::False => Ok(()),
            AstBExpr::Cmp(_, a, e) => {
                check_expr(a, seen)?;
                check_expr(e, seen)
            }
            AstBExpr::And(a, b) | AstBExpr::Or(a, b) => {
                check_bexpr(a, seen)?;
                check_bexpr(b, seen)
            }
            AstBExpr::Not(x) => check_bexpr(x, seen),
        }
    }
    fn check_stmt(s: &AstStmt, seen: &HashSet<&str>) -> Result<(), FrontendError> {
        match s {
            AstStmt::Assign(n, e, pos) => {
                if !seen.contains(n.as_str()) {
                    return Err(FrontendError::Undeclared {
                        pos: *pos,
                        name: n.clone(),
                    });
                }
                check_expr(e, seen)
            }
            AstStmt::Assume(b, _) | AstStmt::Assert(b, _) => check_bexpr(b, seen),
            AstStmt::If(b, t, e, _) => {
                check_bexpr(b, seen)?;
                for s in t.iter().chain(e) {
                    check_stmt(s, seen)?;
                }
                Ok(())
            }
            AstStmt::While(b, body, _) => {
                check_bexpr(b, seen)?;
                for s in body {
                    check_stmt(s, seen)?;
                }
                Ok(())
            }
            AstStmt::Skip(_) => Ok(()),
        }
    }
    for d in &ast.decls {
        if let Some(e) = &d.init {
            check_expr(e, &seen)?;
        }
    }
    for s in &ast.body {
        check_stmt(s, &seen)?;
    }
    Ok(())
}

struct Parser {
    toks: Vec<Spanned>,
    at: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].tok
    }
    fn pos(&self) -> Pos {
        self.toks[self.at].pos
    }
    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].tok.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }
    fn expect(&mut self, t: Tok) -> Result<(), FrontendError> {
        if self.peek() == &t {
            self.bump();
            Ok(())
        } else {
            Err(FrontendError::Syntax {
                pos: self.pos(),
                msg: format!("expected {:?}, found {:?}", t, self.peek()),
            })
        }
    }
    fn expect_ident(&mut self) -> Result<String, FrontendError> {
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(s)
            }
            other => Err(FrontendError::Syntax {
                pos: self.pos(),
                msg: format!("expected identifier, found {:?}", other),
            }),
        }
    }

    fn block(&mut self) -> Result<Vec<AstStmt>, FrontendError> {
        self.expect(Tok::LBrace)?;
        let mut out = Vec::new();
        while self.peek() != &Tok::RBrace {
            if self.peek() == &Tok::Eof {
                return Err(FrontendError::Syntax {
                    pos: self.pos(),
                    msg: "unexpected end of file inside block".to_string(),
                });
            }
            out.push(self.stmt()?);
        }
        self.bump();
        Ok(out)
    }

    fn stmt(&mut self) -> Result<AstStmt, FrontendError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::KwSkip => {
                self.bump();
                self.expect(Tok::Semi)?;
                Ok(AstStmt::Skip(pos))
            }
            Tok::KwAssume => {
                self.bump();
                self.expect(Tok::LParen)?;
                let b = self.bexpr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                Ok(AstStmt::Assume(b, pos))
            }
            Tok::KwAssert => {
                self.bump();
                self.expect(Tok::LParen)?;
                let b = self.bexpr()?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::Semi)?;
                Ok(AstStmt::Assert(b, pos))
            }
            Tok::KwIf => {
                self.bump();
                self.expect(Tok::LParen)?;
                let b = self.bexpr()?;
                self.expect(Tok::RParen)?;
                let then = self.block()?;
                let els = if self.peek() == &Tok::KwElse {
                    self.bump();
                    self.block()?
                } else {
                    Vec::new()
                };
                Ok(AstStmt::If(b, then, els, pos))
            }
            Tok::KwWhile => {
                self.bump();
                self.expect(Tok::LParen)?;
                let b = self.bexpr()?;
                self.expect(Tok::RParen)?;
                let body = self.block()?;
                Ok(AstStmt::While(b, body, pos))
            }
            Tok::Ident(name) => {
                self.bump();
                self.expect(Tok::Assign)?;
                let e = self.expr()?;
                self.expect(Tok::Semi)?;
                Ok(AstStmt::Assign(name, e, pos))
            }
            other => Err(FrontendError::Syntax {
                pos,
                msg: format!("expected statement, found {:?}", other),
            }),
        }
    }

    // expr := term (("+"|"-") term)*
    fn expr(&mut self) -> Result<AstExpr, FrontendError> {
        let mut e = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let t = self.term()?;
                    e = AstExpr::Add(Box::new(e), Box::new(t));
                }
                Tok::Minus => {
                    self.bump();
                    let t = self.term()?;
                    e = AstExpr::Sub(Box::new(e), Box::new(t));
                }
                _ => break,
            }
        }
        Ok(e)
    }

    // term := atom ("*" const)?
    fn term(&mut self) -> Result<AstExpr, FrontendError> {
        let a = self.atom()?;
        if self.peek() == &Tok::Star {
            // Lookahead: `*` followed by a number is multiplication by a
            // constant; anything else leaves the star for the caller (it
            // would be a syntax error here anyway).
            if let Tok::Num(_) = self.toks[self.at + 1].tok {
                self.bump();
                if let Tok::Num(n) = self.bump() {
                    return Ok(AstExpr::Mul(Box::new(a), Box::new(AstExpr::Const(n))));
                }
            }
        }
        Ok(a)
    }

    // atom := id | const | "*" | "(" expr ")"
    fn atom(&mut self) -> Result<AstExpr, FrontendError> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Ident(s) => {
                self.bump();
                Ok(AstExpr::Var(s, pos))
            }
            Tok::Num(n) => {
                self.bump();
                Ok(AstExpr::Const(n))
            }
            Tok::Star => {
                self.bump();
                Ok(AstExpr::Nondet)
            }
            Tok::LParen => {
                self.bump();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            other => Err(FrontendError::Syntax {
                pos,
                msg: format!("expected expression, found {:?}", other),
            }),
        }
    }

    // bexpr := bterm ("||" bterm)*
    fn bexpr(&mut self) -> Result<AstBExpr, FrontendError> {
        let mut b = self.bterm()?;
        while self.peek() == &Tok::OrOr {
            self.bump();
            let r = self.bterm()?;
            b = AstBExpr::Or(Box::new(b), Box::new(r));
        }
        Ok(b)
    }

    // bterm := bfactor ("&&" bfactor)*
    fn bterm(&mut self) -> Result<AstBExpr, FrontendError> {
        let mut b = self.bfactor()?;
        while self.peek() == &Tok::AndAnd {
            self.bump();
            let r = self.bfactor()?;
            b = AstBExpr::And(Box::new(b), Box::new(r));
        }
        Ok(b)
    }

    fn bfactor(&mut self) -> Result<AstBExpr, FrontendError> {
        match self.peek().clone() {
            Tok::Bang => {
                self.bump();
                let b = self.bfactor()?;
                Ok(AstBExpr::Not(Box::new(b)))
            }
            Tok::KwTrue => {
                self.bump();
                Ok(AstBExpr::True)
            }
            Tok::KwFalse => {
                self.bump();
                Ok(AstBExpr::False)
            }
            Tok::LParen => {
                // Could be a parenthesised bexpr or a parenthesised
                // arithmetic expression starting a comparison; try bexpr
                // first and fall back on comparison parsing.
                let save = self.at;
                self.bump();
                match self.bexpr() {
                    Ok(b) if self.peek() == &Tok::RParen => {
                        self.bump();
                        // A comparison operator after `)` means the parens
                        // belonged to an arithmetic operand.
                        if self.cmp_op().is_none() {
                            return Ok(b);
                        }
                        self.at = save;
                        self.comparison()
                    }
                    _ => {
                        self.at = save;
                        self.comparison()
                    }
                }
            }
            _ => self.comparison(),
        }
    }

    fn cmp_op(&self) -> Option<CmpOp> {
        match self.peek() {
            Tok::EqEq => Some(CmpOp::Eq),
            Tok::NotEq => Some(CmpOp::Ne),
            Tok::Lt => Some(CmpOp::Lt),
            Tok::Le => Some(CmpOp::Le),
            Tok::Gt => Some(CmpOp::Gt),
            Tok::Ge => Some(CmpOp::Ge),
            _ => None,
        }
    }

    fn comparison(&mut self) -> Result<AstBExpr, FrontendError> {
        let a = self.expr()?;
        let op = self.cmp_op().ok_or_else(|| FrontendError::Syntax {
            pos: self.pos(),
            msg: format!("expected comparison operator, found {:?}", self.peek()),
        })?;
        self.bump();
        let b = self.expr()?;
        Ok(AstBExpr::Cmp(op, a, b))
    }
}
