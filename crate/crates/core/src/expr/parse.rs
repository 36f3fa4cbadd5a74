//! Recursive-descent parser for function-spec text.
//!
//! ```text
//! file   := [ "dim" INT ";" ] sum
//! sum    := term { ("+" | "-") term }
//! term   := "-" term | rational [ "*" term ] | atom
//! atom   := "x" INT | "(" sum ")" | ("max" | "min") "(" sum "," sum ")"
//!         | ("abs" | "relu") "(" sum ")"
//! ```
//! `#` starts a comment that runs to the end of the line.

use std::fmt;

use super::{Expr, ExprBuilder, NodeId, NodeKind};
use crate::rational::{parse_rational, Rational};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{column}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    UnexpectedChar(char),
    Expected { expected: String, found: String },
    UnknownIdentifier(String),
    VariableOutOfRange { index: usize, dim: usize },
    InvalidNumber(String),
    DimensionConflict { header: usize, requested: usize },
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseErrorKind::UnexpectedChar(c) => write!(f, "unexpected character `{c}`"),
            ParseErrorKind::Expected { expected, found } => write!(f, "expected {expected}, found {found}"),
            ParseErrorKind::UnknownIdentifier(s) => write!(f, "unknown identifier `{s}`"),
            ParseErrorKind::VariableOutOfRange { index, dim } => {
                write!(f, "variable x{index} out of range for dimension {dim}")
            }
            ParseErrorKind::InvalidNumber(s) => write!(f, "invalid number `{s}`"),
            ParseErrorKind::DimensionConflict { header, requested } => {
                write!(f, "header declares dim {header} but dimension {requested} was requested")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    LParen,
    RParen,
    Comma,
    Plus,
    Minus,
    Star,
    Semi,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(q) => write!(f, "number `{q}`"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Spanned {
    tok: Tok,
    line: usize,
    column: usize,
}

fn lex(text: &str) -> Result<Vec<Spanned>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    while i < chars.len() {
        let c = chars[i];
        let (l0, c0) = (line, col);
        let single = |tok| Spanned { tok, line: l0, column: c0 };
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            c if c.is_whitespace() => {}
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '(' => out.push(single(Tok::LParen)),
            ')' => out.push(single(Tok::RParen)),
            ',' => out.push(single(Tok::Comma)),
            '+' => out.push(single(Tok::Plus)),
            '-' => out.push(single(Tok::Minus)),
            '*' => out.push(single(Tok::Star)),
            ';' => out.push(single(Tok::Semi)),
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() {
                    let d = chars[i];
                    let exp_sign = (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                    if d.is_ascii_digit() || d == '.' || d == '/' || d == 'e' || d == 'E' || exp_sign {
                        i += 1;
                    } else {
                        break;
                    }
                }
                let s: String = chars[start..i].iter().collect();
                let q = parse_rational(&s).map_err(|_| ParseError {
                    line: l0,
                    column: c0,
                    kind: ParseErrorKind::InvalidNumber(s.clone()),
                })?;
                col += i - start;
                out.push(Spanned { tok: Tok::Num(q), line: l0, column: c0 });
                continue;
            }
            c if c.is_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let s: String = chars[start..i].iter().collect();
                col += i - start;
                out.push(Spanned { tok: Tok::Ident(s), line: l0, column: c0 });
                continue;
            }
            other => {
                return Err(ParseError { line, column: col, kind: ParseErrorKind::UnexpectedChar(other) });
            }
        }
        i += 1;
        col += 1;
    }
    out.push(Spanned { tok: Tok::Eof, line, column: col });
    Ok(out)
}

struct Parser {
    toks: Vec<Spanned>,
    pos: usize,
    dim: Option<usize>,
    max_var: Option<usize>,
    builder: ExprBuilder,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, k: usize) -> &Tok {
        &self.toks[(self.pos + k).min(self.toks.len() - 1)].tok
    }

    fn next(&mut self) -> Spanned {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error_here(&self, kind: ParseErrorKind) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError { line: t.line, column: t.column, kind }
    }

    fn expected(&self, what: &str) -> ParseError {
        self.error_here(ParseErrorKind::Expected { expected: what.to_string(), found: self.peek().to_string() })
    }

    fn expect(&mut self, tok: Tok, what: &str) -> Result<(), ParseError> {
        if *self.peek() == tok {
            self.next();
            Ok(())
        } else {
            Err(self.expected(what))
        }
    }

    fn header(&mut self) -> Result<(), ParseError> {
        if !matches!(self.peek(), Tok::Ident(s) if s == "dim") {
            return Ok(());
        }
        self.next();
        let n = match self.peek().clone() {
            Tok::Num(q) if q.is_integer() && q >= Rational::from_integer(0.into()) => {
                self.next();
                q.to_integer().try_into().map_err(|_| self.expected("a dimension"))?
            }
            _ => return Err(self.expected("a nonnegative integer dimension")),
        };
        self.expect(Tok::Semi, "`;` after dim header")?;
        self.dim = Some(n);
        Ok(())
    }

    fn sum(&mut self) -> Result<NodeId, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let kind = match self.peek() {
                Tok::Plus => NodeKind::Add,
                Tok::Minus => NodeKind::Sub,
                _ => return Ok(lhs),
            };
            self.next();
            let rhs = self.term()?;
            lhs = self.builder.binary(kind, lhs, rhs);
        }
    }

    fn term(&mut self) -> Result<NodeId, ParseError> {
        match self.peek().clone() {
            Tok::Minus => {
                if let Tok::Num(q) = self.peek_at(1).clone() {
                    self.next();
                    self.next();
                    return self.number_led(-q);
                }
                self.next();
                let inner = self.term()?;
                Ok(self.builder.unary(NodeKind::Neg, inner))
            }
            Tok::Num(q) => {
                self.next();
                self.number_led(q)
            }
            _ => {
                let a = self.atom()?;
                if *self.peek() == Tok::Star {
                    return Err(self.error_here(ParseErrorKind::Expected {
                        expected: "scalar factor as a rational literal on the left of `*`".into(),
                        found: "`*` after a non-constant expression".into(),
                    }));
                }
                Ok(a)
            }
        }
    }

    fn number_led(&mut self, q: Rational) -> Result<NodeId, ParseError> {
        if *self.peek() == Tok::Star {
            self.next();
            let inner = self.term()?;
            Ok(self.builder.unary(NodeKind::Scale(q), inner))
        } else {
            Ok(self.builder.constant(q))
        }
    }

    fn atom(&mut self) -> Result<NodeId, ParseError> {
        let here = self.pos;
        match self.peek().clone() {
            Tok::LParen => {
                self.next();
                let e = self.sum()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                self.next();
                if let Some(index) = variable_index(&name) {
                    if let Some(dim) = self.dim {
                        if index >= dim {
                            let t = &self.toks[here];
                            return Err(ParseError {
                                line: t.line,
                                column: t.column,
                                kind: ParseErrorKind::VariableOutOfRange { index, dim },
                            });
                        }
                    }
                    self.max_var = Some(self.max_var.map_or(index, |m| m.max(index)));
                    return Ok(self.builder.var(index));
                }
                let kind = match name.as_str() {
                    "max" => NodeKind::Max,
                    "min" => NodeKind::Min,
                    "abs" => NodeKind::Abs,
                    "relu" => NodeKind::Relu,
                    _ => {
                        let t = &self.toks[here];
                        return Err(ParseError {
                            line: t.line,
                            column: t.column,
                            kind: ParseErrorKind::UnknownIdentifier(name),
                        });
                    }
                };
                self.expect(Tok::LParen, "`(`")?;
                let a = self.sum()?;
                let node = if kind.arity() == 2 {
                    self.expect(Tok::Comma, "`,`")?;
                    let b = self.sum()?;
                    self.builder.binary(kind, a, b)
                } else {
                    self.builder.unary(kind, a)
                };
                self.expect(Tok::RParen, "`)`")?;
                Ok(node)
            }
            _ => Err(self.expected("an expression")),
        }
    }
}

fn variable_index(name: &str) -> Option<usize> {
    let digits = name.strip_prefix('x')?;
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    digits.parse().ok()
}

fn parse_inner(text: &str, requested: Option<usize>) -> Result<Expr, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser { toks, pos: 0, dim: None, max_var: None, builder: ExprBuilder::new() };
    p.header()?;
    match (p.dim, requested) {
        (Some(h), Some(r)) if h != r => {
            return Err(ParseError {
                line: 1,
                column: 1,
                kind: ParseErrorKind::DimensionConflict { header: h, requested: r },
            })
        }
        (None, Some(r)) => p.dim = Some(r),
        _ => {}
    }
    let root = p.sum()?;
    if *p.peek() != Tok::Eof {
        return Err(p.expected("end of input"));
    }
    let dim = p.dim.unwrap_or_else(|| p.max_var.map_or(1, |m| m + 1));
    Ok(p.builder.finish(dim, root).expect("parser builds a valid arena"))
}

/// Parses function-spec text. Without a `dim n;` header the dimension is one
/// more than the largest variable index used (1 for constant expressions).
pub fn parse(text: &str) -> Result<Expr, ParseError> {
    parse_inner(text, None)
}

/// Parses with a required dimension; a conflicting header is an error.
pub fn parse_with_dim(text: &str, dim: usize) -> Result<Expr, ParseError> {
    parse_inner(text, Some(dim))
}
