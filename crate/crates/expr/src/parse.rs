//! Recursive-descent parser for the metric expression language.
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = "-" unary | "+" unary | power ;
//! power   = atom [ "^" exponent ] ;
//! exponent = [ "-" | "+" ] exponent | power ;   (must fold to an integer constant)
//! atom    = number | ident | func "(" expr ")" | "(" expr ")" ;
//! ```
//!
//! Precedence from tightest to loosest is `^`, unary minus, `* /`, `+ -`; so
//! `-x^2` is `-(x^2)` and `x^2^3` is `x^8`.

use crate::ast::{Expr, Func};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("exponent at offset {offset} is not an integer constant")]
    NonIntegerExponent { offset: usize },
    #[error("empty expression")]
    Empty,
}

impl ParseError {
    pub fn offset(&self) -> Option<usize> {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::NonIntegerExponent { offset } => Some(*offset),
            ParseError::Empty => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn tokens(src: &'a str) -> Result<Vec<(Tok, usize)>, ParseError> {
        let mut lx = Lexer { src, pos: 0 };
        let mut out = Vec::new();
        loop {
            let (tok, at) = lx.next()?;
            let end = tok == Tok::End;
            out.push((tok, at));
            if end {
                return Ok(out);
            }
        }
    }

    fn peek_byte(&self) -> Option<u8> {
        self.src.as_bytes().get(self.pos).copied()
    }

    fn next(&mut self) -> Result<(Tok, usize), ParseError> {
        while matches!(self.peek_byte(), Some(b) if b.is_ascii_whitespace()) {
            self.pos += 1;
        }
        let start = self.pos;
        let Some(b) = self.peek_byte() else {
            return Ok((Tok::End, start));
        };
        if b.is_ascii_digit() || b == b'.' {
            return self.number(start);
        }
        if b.is_ascii_alphabetic() || b == b'_' {
            while matches!(self.peek_byte(), Some(c) if c.is_ascii_alphanumeric() || c == b'_') {
                self.pos += 1;
            }
            return Ok((Tok::Ident(self.src[start..self.pos].to_string()), start));
        }
        if b"+-*/^(),".contains(&b) {
            self.pos += 1;
            return Ok((Tok::Op(b as char), start));
        }
        let ch = self.src[start..].chars().next().unwrap_or('?');
        Err(ParseError::Syntax {
            offset: start,
            message: format!("unexpected character `{ch}`"),
        })
    }

    fn number(&mut self, start: usize) -> Result<(Tok, usize), ParseError> {
        let bytes = self.src.as_bytes();
        while matches!(self.peek_byte(), Some(c) if c.is_ascii_digit() || c == b'.') {
            self.pos += 1;
        }
        if matches!(self.peek_byte(), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.peek_byte(), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if matches!(bytes.get(self.pos), Some(c) if c.is_ascii_digit()) {
                while matches!(self.peek_byte(), Some(c) if c.is_ascii_digit()) {
                    self.pos += 1;
                }
            } else {
                // `2e` followed by something else: leave the `e` for the identifier lexer.
                self.pos = save;
            }
        }
        let text = &self.src[start..self.pos];
        text.parse::<f64>()
            .map(|v| (Tok::Num(v), start))
            .map_err(|_| ParseError::Syntax {
                offset: start,
                message: format!("malformed number `{text}`"),
            })
    }
}

struct Parser<'c> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    coords: &'c [&'c str],
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn offset(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if t != Tok::End {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, op: char) -> Result<(), ParseError> {
        if *self.peek() == Tok::Op(op) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("expected `{op}`")))
        }
    }

    fn unexpected(&self, what: &str) -> ParseError {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            Tok::Num(v) => format!("number {v}"),
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Op(c) => format!("`{c}`"),
        };
        ParseError::Syntax {
            offset: self.offset(),
            message: format!("{what}, found {found}"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Op('+') => {
                    self.bump();
                    lhs = Expr::add(lhs, self.term()?);
                }
                Tok::Op('-') => {
                    self.bump();
                    lhs = Expr::sub(lhs, self.term()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Op('*') => {
                    self.bump();
                    lhs = Expr::mul(lhs, self.unary()?);
                }
                Tok::Op('/') => {
                    self.bump();
                    lhs = Expr::div(lhs, self.unary()?);
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::neg(self.unary()?))
            }
            Tok::Op('+') => {
                self.bump();
                self.unary()
            }
            _ => self.power(),
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.atom()?;
        if *self.peek() != Tok::Op('^') {
            return Ok(base);
        }
        self.bump();
        let at = self.offset();
        let exponent = self.exponent()?;
        let k = exponent
            .as_constant()
            .filter(|v| v.fract() == 0.0 && v.abs() <= i32::MAX as f64)
            .ok_or(ParseError::NonIntegerExponent { offset: at })?;
        Ok(Expr::pow(base, k as i32))
    }

    fn exponent(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Tok::Op('-') => {
                self.bump();
                Ok(Expr::neg(self.exponent()?))
            }
            Tok::Op('+') => {
                self.bump();
                self.exponent()
            }
            _ => self.power(),
        }
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let at = self.offset();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::constant(v)),
            Tok::Op('(') => {
                let inner = self.expr()?;
                self.expect(')')?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                if let Some(i) = self.coords.iter().position(|c| *c == name) {
                    return Ok(Expr::var(i, name.as_str()));
                }
                if let Some(func) = Func::from_name(&name) {
                    self.expect('(')?;
                    let arg = self.expr()?;
                    self.expect(')')?;
                    return Ok(Expr::call(func, arg));
                }
                if name == "pi" {
                    return Ok(Expr::constant(std::f64::consts::PI));
                }
                Err(ParseError::UnknownIdentifier { name, offset: at })
            }
            Tok::End => {
                self.at = self.toks.len() - 1;
                Err(ParseError::Syntax {
                    offset: at,
                    message: "unexpected end of input".into(),
                })
            }
            Tok::Op(c) => Err(ParseError::Syntax {
                offset: at,
                message: format!("unexpected `{c}`"),
            }),
        }
    }
}

/// Parses `src` with `coords` as the only admissible variables; variable slot
/// `i` refers to `coords[i]`.
pub fn parse_expression(src: &str, coords: &[&str]) -> Result<Expr, ParseError> {
    if src.trim().is_empty() {
        return Err(ParseError::Empty);
    }
    let toks = Lexer::tokens(src)?;
    let mut p = Parser {
        toks,
        at: 0,
        coords,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::End {
        return Err(p.unexpected("expected operator or end of input"));
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ast::{Node, NodeKind};

    #[test]
    fn squared_sine_shape() {
        let e = parse_expression("sin(theta)^2", &["theta", "phi"]).unwrap();
        match e.node() {
            Node::Pow(base, 2) => {
                assert_eq!(base.kind(), NodeKind::Call);
                match base.node() {
                    Node::Call(Func::Sin, arg) => {
                        assert!(matches!(arg.node(), Node::Var { index: 0, .. }))
                    }
                    other => panic!("{other:?}"),
                }
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn dangling_operator_reports_offset() {
        let err = parse_expression("2*", &[]).unwrap_err();
        assert_eq!(err.offset(), Some(2));
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn unknown_identifier() {
        let err = parse_expression("x + y", &["x"]).unwrap_err();
        assert_eq!(
            err,
            ParseError::UnknownIdentifier {
                name: "y".into(),
                offset: 4
            }
        );
    }

    #[test]
    fn fractional_exponent_rejected() {
        assert!(matches!(
            parse_expression("x^0.5", &["x"]),
            Err(ParseError::NonIntegerExponent { offset: 2 })
        ));
        assert!(matches!(
            parse_expression("x^x", &["x"]),
            Err(ParseError::NonIntegerExponent { .. })
        ));
        assert!(parse_expression("x^(4/2)", &["x"]).is_ok());
    }

    #[test]
    fn precedence() {
        let e = parse_expression("-x^2", &["x"]).unwrap();
        assert_eq!(e.eval(&[3.0]).unwrap(), -9.0);
        let e = parse_expression("2^3^2", &[]).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), 512.0);
        let e = parse_expression("1 - 2 - 3", &[]).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), -4.0);
        let e = parse_expression("8/2/2", &[]).unwrap();
        assert_eq!(e.eval(&[]).unwrap(), 2.0);
        let e = parse_expression("2*x^-1", &["x"]).unwrap();
        assert_eq!(e.eval(&[4.0]).unwrap(), 0.5);
        let e = parse_expression("1.5e-1*x + 2E2", &["x"]).unwrap();
        assert_eq!(e.eval(&[2.0]).unwrap(), 200.3);
    }

    #[test]
    fn misc_errors() {
        assert_eq!(parse_expression("   ", &[]), Err(ParseError::Empty));
        assert!(parse_expression("sin x", &["x"]).is_err());
        assert!(parse_expression("(x", &["x"]).is_err());
        assert!(parse_expression("x)", &["x"]).is_err());
        assert!(parse_expression("x # 2", &["x"]).is_err());
    }
}
