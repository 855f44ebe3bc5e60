//! Expression grammar:
//! identifiers `x0..x<n>` (coordinates), `u` (dependent variable),
//! `u_0..u_<n>` (first derivatives), any other `[A-Za-z][A-Za-z0-9]*` a
//! symbolic constant; operators `+ - * / ^` with standard precedence, `^`
//! right-associative; functions `sin cos exp ln`; parentheses. Whitespace is
//! insignificant. Exponents are integers, symbolic constants, or a
//! parenthesized constant expression (printed output uses the latter for
//! rational and affine exponents, so printing round-trips).

use num::BigInt;

use super::ast::{Dim, Expr, Func};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigInt),
    Ident(String),
    Deriv(usize),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    offset: usize,
}

struct Lexer<'a> {
    text: &'a [u8],
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str) -> Self {
        Lexer {
            text: text.as_bytes(),
            pos: 0,
        }
    }

    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    fn tokenize(mut self) -> Result<Vec<Spanned>> {
        let mut out = Vec::new();
        loop {
            while self.pos < self.text.len() && self.text[self.pos].is_ascii_whitespace() {
                self.pos += 1;
            }
            if self.pos >= self.text.len() {
                out.push(Spanned {
                    tok: Tok::Eof,
                    offset: self.text.len(),
                });
                return Ok(out);
            }
            let start = self.pos;
            let c = self.text[self.pos];
            let tok = match c {
                b'+' => {
                    self.pos += 1;
                    Tok::Plus
                }
                b'-' => {
                    self.pos += 1;
                    Tok::Minus
                }
                b'*' => {
                    self.pos += 1;
                    Tok::Star
                }
                b'/' => {
                    self.pos += 1;
                    Tok::Slash
                }
                b'^' => {
                    self.pos += 1;
                    Tok::Caret
                }
                b'(' => {
                    self.pos += 1;
                    Tok::LParen
                }
                b')' => {
                    self.pos += 1;
                    Tok::RParen
                }
                b'0'..=b'9' => {
                    while self.pos < self.text.len() && self.text[self.pos].is_ascii_digit() {
                        self.pos += 1;
                    }
                    let digits = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
                    Tok::Num(digits.parse().unwrap())
                }
                c if c.is_ascii_alphabetic() => {
                    while self.pos < self.text.len()
                        && self.text[self.pos].is_ascii_alphanumeric()
                    {
                        self.pos += 1;
                    }
                    let ident = std::str::from_utf8(&self.text[start..self.pos]).unwrap();
                    if ident == "u"
                        && self.pos < self.text.len()
                        && self.text[self.pos] == b'_'
                    {
                        let under = self.pos;
                        self.pos += 1;
                        let dstart = self.pos;
                        while self.pos < self.text.len() && self.text[self.pos].is_ascii_digit() {
                            self.pos += 1;
                        }
                        if dstart == self.pos {
                            return Err(
                                self.error(under, "expected derivative index after 'u_'")
                            );
                        }
                        let digits =
                            std::str::from_utf8(&self.text[dstart..self.pos]).unwrap();
                        let idx: usize = digits.parse().map_err(|_| {
                            self.error(dstart, "derivative index out of range")
                        })?;
                        Tok::Deriv(idx)
                    } else {
                        Tok::Ident(ident.to_string())
                    }
                }
                other => {
                    return Err(self.error(
                        start,
                        format!("unexpected character '{}'", other as char),
                    ))
                }
            };
            out.push(Spanned { tok, offset: start });
        }
    }
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    dim: Dim,
}

impl Parser {
    fn peek(&self) -> &Spanned {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            offset,
            message: message.into(),
        }
    }

    fn classify_ident(&self, name: &str, offset: usize) -> Result<Expr> {
        if let Some(rest) = name.strip_prefix('x') {
            if !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()) {
                let idx: usize = rest
                    .parse()
                    .map_err(|_| self.error(offset, "coordinate index out of range"))?;
                self.dim.check_index(idx).map_err(|_| Error::Parse {
                    offset,
                    message: format!(
                        "variable index {idx} out of range for dimension {}",
                        self.dim.n()
                    ),
                })?;
                return Ok(Expr::coord(idx));
            }
        }
        if name == "u" {
            return Ok(Expr::u());
        }
        Ok(Expr::sym(name))
    }

    fn parse_primary(&mut self) -> Result<Expr> {
        let t = self.next();
        match t.tok {
            Tok::Num(n) => Ok(Expr::Rat(num::BigRational::from(n))),
            Tok::Deriv(idx) => {
                self.dim.check_index(idx).map_err(|_| Error::Parse {
                    offset: t.offset,
                    message: format!(
                        "variable index {idx} out of range for dimension {}",
                        self.dim.n()
                    ),
                })?;
                Ok(Expr::du(idx))
            }
            Tok::Ident(name) => {
                if let Some(f) = Func::from_name(&name) {
                    let open = self.next();
                    if open.tok != Tok::LParen {
                        return Err(
                            self.error(open.offset, format!("expected '(' after '{name}'"))
                        );
                    }
                    let arg = self.parse_expr(0)?;
                    let close = self.next();
                    if close.tok != Tok::RParen {
                        return Err(self.error(close.offset, "expected ')'"));
                    }
                    return Ok(Expr::Fun(f, Box::new(arg)));
                }
                self.classify_ident(&name, t.offset)
            }
            Tok::LParen => {
                let inner = self.parse_expr(0)?;
                let close = self.next();
                if close.tok != Tok::RParen {
                    return Err(self.error(close.offset, "expected ')'"));
                }
                Ok(inner)
            }
            Tok::Minus => {
                let operand = self.parse_expr(25)?;
                Ok(-operand)
            }
            Tok::Eof => Err(self.error(t.offset, "unexpected end of input")),
            other => Err(self.error(t.offset, format!("unexpected token {other:?}"))),
        }
    }

    /// Exponent position: integer, symbolic constant, or parenthesized
    /// constant expression, with an optional leading minus.
    fn parse_exponent(&mut self) -> Result<Expr> {
        let t = self.next();
        match t.tok {
            Tok::Num(n) => Ok(Expr::Rat(num::BigRational::from(n))),
            Tok::Ident(name) => {
                if Func::from_name(&name).is_some() {
                    return Err(self.error(
                        t.offset,
                        "exponent must be an integer or symbolic constant",
                    ));
                }
                let e = self.classify_ident(&name, t.offset)?;
                match e {
                    Expr::Sym(_) => Ok(e),
                    _ => Err(self.error(
                        t.offset,
                        "exponent must be an integer or symbolic constant",
                    )),
                }
            }
            Tok::Minus => {
                let inner = self.parse_exponent()?;
                Ok(-inner)
            }
            Tok::LParen => {
                let inner = self.parse_expr(0)?;
                let close = self.next();
                if close.tok != Tok::RParen {
                    return Err(self.error(close.offset, "expected ')'"));
                }
                Ok(inner)
            }
            _ => Err(self.error(
                t.offset,
                "exponent must be an integer or symbolic constant",
            )),
        }
    }

    fn parse_expr(&mut self, min_bp: u8) -> Result<Expr> {
        let mut lhs = self.parse_primary()?;
        loop {
            let (bp, tok) = match self.peek().tok {
                Tok::Plus => (10, Tok::Plus),
                Tok::Minus => (10, Tok::Minus),
                Tok::Star => (20, Tok::Star),
                Tok::Slash => (20, Tok::Slash),
                Tok::Caret => (30, Tok::Caret),
                _ => break,
            };
            if bp < min_bp {
                break;
            }
            self.next();
            lhs = match tok {
                Tok::Plus => lhs + self.parse_expr(bp + 1)?,
                Tok::Minus => lhs - self.parse_expr(bp + 1)?,
                Tok::Star => lhs * self.parse_expr(bp + 1)?,
                Tok::Slash => lhs / self.parse_expr(bp + 1)?,
                Tok::Caret => {
                    // right-associative, restricted exponent grammar
                    let exp = self.parse_exponent()?;
                    let exp = if self.peek().tok == Tok::Caret {
                        self.next();
                        let inner = self.parse_exponent()?;
                        exp.pow(inner)
                    } else {
                        exp
                    };
                    lhs.pow(exp)
                }
                _ => unreachable!(),
            };
        }
        Ok(lhs)
    }
}

/// Parses and normalizes an expression for dimension `n`.
pub fn parse(text: &str, dim: Dim) -> Result<Expr> {
    let toks = Lexer::new(text).tokenize()?;
    let mut p = Parser { toks, pos: 0, dim };
    let e = p.parse_expr(0)?;
    let end = p.next();
    if end.tok != Tok::Eof {
        return Err(Error::Parse {
            offset: end.offset,
            message: "unexpected trailing input".into(),
        });
    }
    super::normalize(&e)
}
