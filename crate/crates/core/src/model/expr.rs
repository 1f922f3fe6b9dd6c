//! The linear-expression mini-language used inside model files.
//!
//! Grammar (whitespace is free):
//!
//! ```text
//! chain  := expr (cmp expr)+          cmp := < | <= | > | >=
//! eqn    := expr '=' expr
//! expr   := ['+'|'-'] term (('+'|'-') term)*
//! term   := factor (('*'|'/') factor)*
//! factor := number | name | '(' expr ')' | '-' factor
//! ```
//!
//! A product is only accepted when at least one side is a constant, and a
//! divisor must be a nonzero constant.

use std::fmt;

use crate::expcalc::{Constraint, LinExpr, VarId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn symbol(self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
        }
    }
}

/// `lhs op rhs`, kept in source form so that a model prints back as written.
#[derive(Debug, Clone, PartialEq)]
pub struct Inequality {
    pub lhs: LinExpr,
    pub op: CmpOp,
    pub rhs: LinExpr,
}

impl Inequality {
    pub fn to_constraint(&self) -> Constraint {
        match self.op {
            CmpOp::Lt => Constraint::le(self.lhs.clone(), self.rhs.clone(), true),
            CmpOp::Le => Constraint::le(self.lhs.clone(), self.rhs.clone(), false),
            CmpOp::Gt => Constraint::le(self.rhs.clone(), self.lhs.clone(), true),
            CmpOp::Ge => Constraint::le(self.rhs.clone(), self.lhs.clone(), false),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum ExprErrorKind {
    Syntax(String),
    Unknown(String),
    Nonlinear(String),
}

/// A failure with its byte offset into the expression text.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct ExprError {
    pub offset: usize,
    pub kind: ExprErrorKind,
}

impl fmt::Display for ExprError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprErrorKind::Syntax(m) | ExprErrorKind::Nonlinear(m) => write!(f, "{m}"),
            ExprErrorKind::Unknown(name) => write!(f, "unknown variable {name:?}"),
        }
    }
}

type Parsed<T> = std::result::Result<T, ExprError>;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Name(String),
    Plus,
    Minus,
    Star,
    Slash,
    Open,
    Close,
    Cmp(CmpOp),
    Eq,
    Other(char),
    End,
}

fn syntax(offset: usize, msg: impl Into<String>) -> ExprError {
    ExprError {
        offset,
        kind: ExprErrorKind::Syntax(msg.into()),
    }
}

fn tokenize(text: &str) -> Parsed<Vec<(Tok, usize)>> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        let tok = if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && bytes[j].is_ascii_digit() {
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let lexeme = &text[start..i];
            let x: f64 = lexeme
                .parse()
                .map_err(|_| syntax(start, format!("malformed number {lexeme:?}")))?;
            Tok::Num(x)
        } else if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            Tok::Name(text[start..i].to_string())
        } else {
            i += 1;
            let next_eq = i < bytes.len() && bytes[i] == b'=';
            match c {
                '+' => Tok::Plus,
                '-' => Tok::Minus,
                '*' => Tok::Star,
                '/' => Tok::Slash,
                '(' => Tok::Open,
                ')' => Tok::Close,
                '<' | '>' | '=' if next_eq => {
                    i += 1;
                    match c {
                        '<' => Tok::Cmp(CmpOp::Le),
                        '>' => Tok::Cmp(CmpOp::Ge),
                        _ => Tok::Eq,
                    }
                }
                '<' => Tok::Cmp(CmpOp::Lt),
                '>' => Tok::Cmp(CmpOp::Gt),
                '=' => Tok::Eq,
                other => {
                    // Multi-byte characters: step over the whole code point.
                    let ch = text[start..].chars().next().unwrap_or(other);
                    i = start + ch.len_utf8();
                    Tok::Other(ch)
                }
            }
        };
        out.push((tok, start));
    }
    out.push((Tok::End, text.len()));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    resolve: &'a dyn Fn(&str) -> Option<VarId>,
}

impl Parser<'_> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].0.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ExprError {
        let found = match self.peek() {
            Tok::End => "end of input".to_string(),
            Tok::Num(x) => format!("number {x}"),
            Tok::Name(n) => format!("name {n:?}"),
            Tok::Other(c) => format!("{c:?}"),
            t => format!("{t:?}"),
        };
        syntax(self.offset(), format!("expected {wanted}, found {found}"))
    }

    fn expr(&mut self) -> Parsed<LinExpr> {
        let mut acc = match self.peek() {
            Tok::Plus => {
                self.bump();
                self.term()?
            }
            Tok::Minus => {
                self.bump();
                self.term()?.scale(-1.0)
            }
            _ => self.term()?,
        };
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = acc.add(&self.term()?);
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc.sub(&self.term()?);
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Parsed<LinExpr> {
        let mut acc = self.factor()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    let at = self.offset();
                    self.bump();
                    let rhs = self.factor()?;
                    acc = if acc.is_constant() {
                        rhs.scale(acc.constant_term())
                    } else if rhs.is_constant() {
                        acc.scale(rhs.constant_term())
                    } else {
                        return Err(ExprError {
                            offset: at,
                            kind: ExprErrorKind::Nonlinear("product of two variable terms".into()),
                        });
                    };
                }
                Tok::Slash => {
                    let at = self.offset();
                    self.bump();
                    let rhs = self.factor()?;
                    if !rhs.is_constant() {
                        return Err(ExprError {
                            offset: at,
                            kind: ExprErrorKind::Nonlinear("division by a variable term".into()),
                        });
                    }
                    let d = rhs.constant_term();
                    if d == 0.0 {
                        return Err(syntax(at, "division by zero"));
                    }
                    acc = acc.scale(1.0 / d);
                }
                Tok::Other('^') => {
                    return Err(ExprError {
                        offset: self.offset(),
                        kind: ExprErrorKind::Nonlinear("powers are not linear".into()),
                    })
                }
                _ => return Ok(acc),
            }
        }
    }

    fn factor(&mut self) -> Parsed<LinExpr> {
        let at = self.offset();
        match self.peek().clone() {
            Tok::Num(x) => {
                self.bump();
                Ok(LinExpr::constant(x))
            }
            Tok::Name(name) => {
                self.bump();
                if *self.peek() == Tok::Open {
                    return Err(ExprError {
                        offset: at,
                        kind: ExprErrorKind::Nonlinear(format!("function call {name}(...)")),
                    });
                }
                match (self.resolve)(&name) {
                    Some(v) => Ok(LinExpr::var(v)),
                    None => Err(ExprError {
                        offset: at,
                        kind: ExprErrorKind::Unknown(name),
                    }),
                }
            }
            Tok::Open => {
                self.bump();
                let e = self.expr()?;
                if *self.peek() != Tok::Close {
                    return Err(self.unexpected("')'"));
                }
                self.bump();
                Ok(e)
            }
            Tok::Minus => {
                self.bump();
                Ok(self.factor()?.scale(-1.0))
            }
            _ => Err(self.unexpected("a number, a name or '('")),
        }
    }

    fn finish(&self) -> Parsed<()> {
        match self.peek() {
            Tok::End => Ok(()),
            _ => Err(self.unexpected("end of input")),
        }
    }
}

fn parser<'a>(text: &str, resolve: &'a dyn Fn(&str) -> Option<VarId>) -> Parsed<Parser<'a>> {
    Ok(Parser {
        toks: tokenize(text)?,
        pos: 0,
        resolve,
    })
}

pub(crate) fn parse_linear(text: &str, resolve: &dyn Fn(&str) -> Option<VarId>) -> Parsed<LinExpr> {
    let mut p = parser(text, resolve)?;
    let e = p.expr()?;
    p.finish()?;
    Ok(e)
}

/// `lhs = rhs`.
pub(crate) fn parse_equation(text: &str, resolve: &dyn Fn(&str) -> Option<VarId>) -> Parsed<(LinExpr, LinExpr)> {
    let mut p = parser(text, resolve)?;
    let lhs = p.expr()?;
    if *p.peek() != Tok::Eq {
        return Err(p.unexpected("'='"));
    }
    p.bump();
    let rhs = p.expr()?;
    p.finish()?;
    Ok((lhs, rhs))
}

/// `a < b <= c ...`, one inequality per adjacent pair.
pub(crate) fn parse_inequalities(text: &str, resolve: &dyn Fn(&str) -> Option<VarId>) -> Parsed<Vec<Inequality>> {
    let mut p = parser(text, resolve)?;
    let mut lhs = p.expr()?;
    let mut out = Vec::new();
    while let Tok::Cmp(op) = *p.peek() {
        p.bump();
        let rhs = p.expr()?;
        out.push(Inequality {
            lhs: lhs.clone(),
            op,
            rhs: rhs.clone(),
        });
        lhs = rhs;
    }
    if out.is_empty() {
        return Err(p.unexpected("a comparison"));
    }
    p.finish()?;
    Ok(out)
}
