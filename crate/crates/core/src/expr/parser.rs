//! Recursive-descent parser for the expression language.

use super::ast::{call, neg, Expr, Func};
use super::ExprError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Comma,
    End,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Ident(s) => format!("identifier '{s}'"),
        Tok::Plus => "'+'".into(),
        Tok::Minus => "'-'".into(),
        Tok::Star => "'*'".into(),
        Tok::Slash => "'/'".into(),
        Tok::Caret => "'^'".into(),
        Tok::LParen => "'('".into(),
        Tok::RParen => "')'".into(),
        Tok::Comma => "','".into(),
        Tok::End => "end of input".into(),
    }
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ExprError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let ch = bytes[i];
        let start = i;
        match ch {
            b' ' | b'\t' | b'\n' | b'\r' => {
                i += 1;
                continue;
            }
            b'+' => out.push((Tok::Plus, i)),
            b'-' => out.push((Tok::Minus, i)),
            b'*' => out.push((Tok::Star, i)),
            b'/' => out.push((Tok::Slash, i)),
            b'^' => out.push((Tok::Caret, i)),
            b'(' => out.push((Tok::LParen, i)),
            b')' => out.push((Tok::RParen, i)),
            b',' => out.push((Tok::Comma, i)),
            b'0'..=b'9' | b'.' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                if i < bytes.len() && bytes[i] == b'.' {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                    let mut k = i + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        i = k;
                    }
                }
                let text = &src[start..i];
                let v: f64 = text.parse().map_err(|_| ExprError::Syntax {
                    pos: start,
                    msg: format!("malformed number '{text}'"),
                })?;
                out.push((Tok::Num(v), start));
                continue;
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                    i += 1;
                }
                out.push((Tok::Ident(src[start..i].to_string()), start));
                continue;
            }
            _ => {
                let c = src[i..].chars().next().unwrap_or('?');
                return Err(ExprError::Syntax {
                    pos: i,
                    msg: format!("unexpected character '{c}'"),
                });
            }
        }
        i += 1;
    }
    out.push((Tok::End, src.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    at: usize,
    vars: &'a [String],
}

/// Parse `src` with the variable slots `vars` (slot k is `Expr::Var(k)`).
pub(crate) fn parse(src: &str, vars: &[String]) -> Result<Expr, ExprError> {
    let toks = lex(src)?;
    let mut p = Parser { toks, at: 0, vars };
    let e = p.expr()?;
    match p.peek() {
        Tok::End => Ok(e),
        t => Err(ExprError::Syntax {
            pos: p.pos(),
            msg: format!("unexpected {}", describe(t)),
        }),
    }
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn pos(&self) -> usize {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn expect(&mut self, want: Tok) -> Result<(), ExprError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            Err(ExprError::Syntax {
                pos: self.pos(),
                msg: format!("expected {}, found {}", describe(&want), describe(self.peek())),
            })
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Add(Box::new(lhs), Box::new(rhs));
                }
                Tok::Minus => {
                    self.bump();
                    let rhs = self.term()?;
                    lhs = Expr::Sub(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Mul(Box::new(lhs), Box::new(rhs));
                }
                Tok::Slash => {
                    self.bump();
                    let rhs = self.unary()?;
                    lhs = Expr::Div(Box::new(lhs), Box::new(rhs));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if *self.peek() == Tok::Minus {
            self.bump();
            let inner = self.unary()?;
            // a negated literal is a literal
            return Ok(match inner {
                Expr::Const(_) => neg(inner),
                other => Expr::Neg(Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let pos = self.pos();
        let n = match self.bump() {
            Tok::Num(v) => self.integer(v, pos)?,
            Tok::Minus => match self.bump() {
                Tok::Num(v) => -self.integer(v, pos)?,
                _ => return Err(integer_expected(pos)),
            },
            Tok::LParen => {
                let sign = match self.peek() {
                    Tok::Minus => {
                        self.bump();
                        -1
                    }
                    Tok::Plus => {
                        self.bump();
                        1
                    }
                    _ => 1,
                };
                let n = match self.bump() {
                    Tok::Num(v) => self.integer(v, pos)?,
                    _ => return Err(integer_expected(pos)),
                };
                self.expect(Tok::RParen)?;
                sign * n
            }
            _ => return Err(integer_expected(pos)),
        };
        if *self.peek() == Tok::Caret {
            return Err(ExprError::Syntax {
                pos: self.pos(),
                msg: "chained '^' is ambiguous; add parentheses".into(),
            });
        }
        Ok(Expr::Pow(Box::new(base), n))
    }

    fn integer(&self, v: f64, pos: usize) -> Result<i32, ExprError> {
        if v.fract() == 0.0 && v.abs() <= 1024.0 {
            Ok(v as i32)
        } else {
            Err(integer_expected(pos))
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let pos = self.pos();
        match self.bump() {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::LParen => {
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(name) => self.identifier(name, pos),
            t => Err(ExprError::Syntax {
                pos,
                msg: format!("expected an operand, found {}", describe(&t)),
            }),
        }
    }

    fn identifier(&mut self, name: String, pos: usize) -> Result<Expr, ExprError> {
        if let Some(k) = self.vars.iter().position(|v| *v == name) {
            return Ok(Expr::Var(k));
        }
        match name.as_str() {
            "pi" => return Ok(Expr::Const(std::f64::consts::PI)),
            "e" => return Ok(Expr::Const(std::f64::consts::E)),
            _ => {}
        }
        let Some(func) = Func::from_name(&name) else {
            return Err(ExprError::UnknownIdentifier { name, pos });
        };
        if *self.peek() != Tok::LParen {
            return Err(ExprError::WrongArity { name, expected: 1, found: 0, pos });
        }
        self.bump();
        if *self.peek() == Tok::RParen {
            return Err(ExprError::WrongArity { name, expected: 1, found: 0, pos });
        }
        let mut args = vec![self.expr()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            args.push(self.expr()?);
        }
        self.expect(Tok::RParen)?;
        if args.len() != 1 {
            return Err(ExprError::WrongArity { name, expected: 1, found: args.len(), pos });
        }
        Ok(call(func, args.pop().unwrap()))
    }
}

fn integer_expected(pos: usize) -> ExprError {
    ExprError::Syntax { pos, msg: "'^' takes an integer exponent".into() }
}
