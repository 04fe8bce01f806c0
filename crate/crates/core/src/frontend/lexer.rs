use super::{FrontendError, Pos};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Num(u64),
    KwUnsigned,
    KwAssume,
    KwAssert,
    KwIf,
    KwElse,
    KwWhile,
    KwSkip,
    KwTrue,
    KwFalse,
    Assign, // :=
    Plus,
    Minus,
    Star,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Semi,
    Comma,
    EqEq,
    NotEq,
    Lt,
    Le,
    Gt,
    Ge,
    AndAnd,
    OrOr,
    Bang,
    Eof,
}

#[derive(Clone, Debug)]
pub struct Spanned {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn lex(text: &str) -> Result<Vec<Spanned>, FrontendError> {
    let mut toks = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;
    macro_rules! pos {
        () => {
            Pos { line, col }
        };
    }
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && i + 1 < bytes.len() && bytes[i + 1] == b'/' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = pos!();
        let two = |a: u8, b: u8| i + 1 < bytes.len() && bytes[i] == a && bytes[i + 1] == b;
        let (tok, len) = if two(b':', b'=') {
            (Tok::Assign, 2)
        } else if two(b'=', b'=') {
            (Tok::EqEq, 2)
        } else if two(b'!', b'=') {
            (Tok::NotEq, 2)
        } else if two(b'<', b'=') {
            (Tok::Le, 2)
        } else if two(b'>', b'=') {
            (Tok::Ge, 2)
        } else if two(b'&', b'&') {
            (Tok::AndAnd, 2)
        } else if two(b'|', b'|') {
            (Tok::OrOr, 2)
        } else {
            match c {
                '+' => (Tok::Plus, 1),
                '-' => (Tok::Minus, 1),
                '*' => (Tok::Star, 1),
                '(' => (Tok::LParen, 1),
                ')' => (Tok::RParen, 1),
                '{' => (Tok::LBrace, 1),
                '}' => (Tok::RBrace, 1),
                ';' => (Tok::Semi, 1),
                ',' => (Tok::Comma, 1),
                '<' => (Tok::Lt, 1),
                '>' => (Tok::Gt, 1),
                '!' => (Tok::Bang, 1),
                c if c.is_ascii_digit() => {
                    let mut j = i;
                    while j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                        j += 1;
                    }
                    let s = &text[i..j];
                    let n: u64 = s.parse().map_err(|_| FrontendError::Lex {
                        pos: start,
                        msg: format!("numeric literal `{}` out of range", s),
                    })?;
                    (Tok::Num(n), j - i)
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let mut j = i;
                    while j < bytes.len()
                        && ((bytes[j] as char).is_ascii_alphanumeric() || bytes[j] == b'_')
                    {
                        j += 1;
                    }
                    let s = &text[i..j];
                    let t = match s {
                        "unsigned" => Tok::KwUnsigned,
                        "assume" => Tok::KwAssume,
                        "assert" => Tok::KwAssert,
                        "if" => Tok::KwIf,
                        "else" => Tok::KwElse,
                        "while" => Tok::KwWhile,
                        "skip" => Tok::KwSkip,
                        "true" => Tok::KwTrue,
                        "false" => Tok::KwFalse,
                        _ => Tok::Ident(s.to_string()),
                    };
                    (t, j - i)
                }
                other => {
                    return Err(FrontendError::Lex {
                        pos: start,
                        msg: format!("unexpected character `{}`", other),
                    })
                }
            }
        };
        toks.push(Spanned { tok, pos: start });
        i += len;
        col += len as u32;
    }
    toks.push(Spanned {
        tok: Tok::Eof,
        pos: pos!(),
    });
    Ok(toks)
}
