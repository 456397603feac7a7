//! Guard predicates over markings.
//!
//! Grammar (keywords are case-insensitive, Unicode operators accepted):
//!
//! ```text
//! or    := and (("||" | "∨" | "OR") and)*
//! and   := unary (("&&" | "∧" | "AND") unary)*
//! unary := ("!" | "¬" | "NOT") unary | "(" or ")" | atom
//! atom  := "#" IDENT cmp rhs
//! cmp   := "=" | "==" | "!=" | "≠" | "<" | "<=" | "≤" | ">" | ">=" | "≥"
//! rhs   := INT | IDENT | "#" IDENT
//! ```
//!
//! A bare identifier on the right is a parameter; `#NAME` is the token count
//! of place `NAME`, or the parameter `NAME` when no such place exists.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Cmp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Cmp {
    pub fn holds<T: PartialOrd>(self, lhs: T, rhs: T) -> bool {
        match self {
            Cmp::Eq => lhs == rhs,
            Cmp::Ne => lhs != rhs,
            Cmp::Lt => lhs < rhs,
            Cmp::Le => lhs <= rhs,
            Cmp::Gt => lhs > rhs,
            Cmp::Ge => lhs >= rhs,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Cmp::Eq => "=",
            Cmp::Ne => "!=",
            Cmp::Lt => "<",
            Cmp::Le => "<=",
            Cmp::Gt => ">",
            Cmp::Ge => ">=",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Operand {
    Int(i64),
    Param(String),
    Tokens(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Predicate {
    Compare {
        place: String,
        cmp: Cmp,
        rhs: Operand,
    },
    And(Vec<Predicate>),
    Or(Vec<Predicate>),
    Not(Box<Predicate>),
}

impl Predicate {
    pub fn compare(place: impl Into<String>, cmp: Cmp, rhs: Operand) -> Self {
        Predicate::Compare {
            place: place.into(),
            cmp,
            rhs,
        }
    }

    /// `#place <cmp> value`
    pub fn tokens(place: impl Into<String>, cmp: Cmp, value: i64) -> Self {
        Self::compare(place, cmp, Operand::Int(value))
    }

    pub fn and(parts: impl IntoIterator<Item = Predicate>) -> Self {
        Predicate::And(parts.into_iter().collect())
    }

    pub fn or(parts: impl IntoIterator<Item = Predicate>) -> Self {
        Predicate::Or(parts.into_iter().collect())
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(inner: Predicate) -> Self {
        Predicate::Not(Box::new(inner))
    }

    pub fn parse(text: &str) -> Result<Predicate, PredicateParseError> {
        let tokens = lex(text)?;
        let mut parser = Parser {
            tokens: &tokens,
            pos: 0,
            len: text.len(),
        };
        let pred = parser.or()?;
        if let Some(tok) = parser.peek() {
            return Err(PredicateParseError {
                offset: tok.offset,
                message: format!("unexpected {}", tok.kind),
            });
        }
        Ok(pred)
    }

    /// Every place or parameter name the predicate mentions.
    pub fn visit_names<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            Predicate::Compare { place, rhs, .. } => {
                out.push(place);
                match rhs {
                    Operand::Param(n) | Operand::Tokens(n) => out.push(n),
                    Operand::Int(_) => {}
                }
            }
            Predicate::And(ps) | Predicate::Or(ps) => ps.iter().for_each(|p| p.visit_names(out)),
            Predicate::Not(p) => p.visit_names(out),
        }
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Compare { place, cmp, rhs } => {
                write!(f, "#{place} {} ", cmp.symbol())?;
                match rhs {
                    Operand::Int(v) => write!(f, "{v}"),
                    Operand::Param(n) => write!(f, "{n}"),
                    Operand::Tokens(n) => write!(f, "#{n}"),
                }
            }
            Predicate::And(ps) | Predicate::Or(ps) => {
                let sep = if matches!(self, Predicate::And(_)) {
                    " && "
                } else {
                    " || "
                };
                write!(f, "(")?;
                for (i, p) in ps.iter().enumerate() {
                    if i > 0 {
                        f.write_str(sep)?;
                    }
                    write!(f, "{p}")?;
                }
                write!(f, ")")
            }
            Predicate::Not(p) => write!(f, "!{p}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("guard syntax error at offset {offset}: {message}")]
pub struct PredicateParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum TokKind {
    Hash,
    Ident(String),
    Int(i64),
    Cmp(Cmp),
    And,
    Or,
    Not,
    LParen,
    RParen,
}

impl fmt::Display for TokKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokKind::Hash => write!(f, "'#'"),
            TokKind::Ident(s) => write!(f, "identifier '{s}'"),
            TokKind::Int(v) => write!(f, "integer {v}"),
            TokKind::Cmp(c) => write!(f, "'{}'", c.symbol()),
            TokKind::And => write!(f, "'&&'"),
            TokKind::Or => write!(f, "'||'"),
            TokKind::Not => write!(f, "'!'"),
            TokKind::LParen => write!(f, "'('"),
            TokKind::RParen => write!(f, "')'"),
        }
    }
}

struct Tok {
    kind: TokKind,
    offset: usize,
}

fn lex(text: &str) -> Result<Vec<Tok>, PredicateParseError> {
    let mut out = Vec::new();
    let mut chars = text.char_indices().peekable();
    while let Some(&(i, c)) = chars.peek() {
        let err = |message: String| PredicateParseError { offset: i, message };
        if c.is_whitespace() {
            chars.next();
            continue;
        }
        let mut two = |second: char| {
            chars.next();
            if chars.peek().map(|&(_, c)| c) == Some(second) {
                chars.next();
                true
            } else {
                false
            }
        };
        let kind = match c {
            '#' => {
                chars.next();
                TokKind::Hash
            }
            '(' => {
                chars.next();
                TokKind::LParen
            }
            ')' => {
                chars.next();
                TokKind::RParen
            }
            '∧' => {
                chars.next();
                TokKind::And
            }
            '∨' => {
                chars.next();
                TokKind::Or
            }
            '¬' => {
                chars.next();
                TokKind::Not
            }
            '≠' => {
                chars.next();
                TokKind::Cmp(Cmp::Ne)
            }
            '≤' => {
                chars.next();
                TokKind::Cmp(Cmp::Le)
            }
            '≥' => {
                chars.next();
                TokKind::Cmp(Cmp::Ge)
            }
            '=' => {
                two('=');
                TokKind::Cmp(Cmp::Eq)
            }
            '!' => {
                if two('=') {
                    TokKind::Cmp(Cmp::Ne)
                } else {
                    TokKind::Not
                }
            }
            '<' => {
                if two('=') {
                    TokKind::Cmp(Cmp::Le)
                } else {
                    TokKind::Cmp(Cmp::Lt)
                }
            }
            '>' => {
                if two('=') {
                    TokKind::Cmp(Cmp::Ge)
                } else {
                    TokKind::Cmp(Cmp::Gt)
                }
            }
            '&' => {
                if !two('&') {
                    return Err(err("expected '&&'".into()));
                }
                TokKind::And
            }
            '|' => {
                if !two('|') {
                    return Err(err("expected '||'".into()));
                }
                TokKind::Or
            }
            c if c.is_ascii_digit() || c == '-' => {
                let mut s = String::new();
                s.push(c);
                chars.next();
                while let Some(&(_, d)) = chars.peek() {
                    if d.is_ascii_digit() {
                        s.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                TokKind::Int(
                    s.parse()
                        .map_err(|_| err(format!("invalid integer '{s}'")))?,
                )
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut s = String::new();
                while let Some(&(_, d)) = chars.peek() {
                    if d.is_alphanumeric() || d == '_' {
                        s.push(d);
                        chars.next();
                    } else {
                        break;
                    }
                }
                match s.to_ascii_uppercase().as_str() {
                    "AND" => TokKind::And,
                    "OR" => TokKind::Or,
                    "NOT" => TokKind::Not,
                    _ => TokKind::Ident(s),
                }
            }
            other => return Err(err(format!("unexpected character '{other}'"))),
        };
        out.push(Tok { kind, offset: i });
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Tok],
    pos: usize,
    len: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Result<&Tok, PredicateParseError> {
        let tok = self.tokens.get(self.pos).ok_or(PredicateParseError {
            offset: self.len,
            message: "unexpected end of guard".into(),
        })?;
        self.pos += 1;
        Ok(tok)
    }

    fn or(&mut self) -> Result<Predicate, PredicateParseError> {
        let mut parts = vec![self.and()?];
        while matches!(self.peek().map(|t| &t.kind), Some(TokKind::Or)) {
            self.pos += 1;
            parts.push(self.and()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Predicate::Or(parts)
        })
    }

    fn and(&mut self) -> Result<Predicate, PredicateParseError> {
        let mut parts = vec![self.unary()?];
        while matches!(self.peek().map(|t| &t.kind), Some(TokKind::And)) {
            self.pos += 1;
            parts.push(self.unary()?);
        }
        Ok(if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            Predicate::And(parts)
        })
    }

    fn unary(&mut self) -> Result<Predicate, PredicateParseError> {
        let tok = self.next()?;
        let offset = tok.offset;
        match &tok.kind {
            TokKind::Not => Ok(Predicate::Not(Box::new(self.unary()?))),
            TokKind::LParen => {
                let inner = self.or()?;
                match self.next()? {
                    Tok {
                        kind: TokKind::RParen,
                        ..
                    } => Ok(inner),
                    t => Err(PredicateParseError {
                        offset: t.offset,
                        message: format!("expected ')', found {}", t.kind),
                    }),
                }
            }
            TokKind::Hash => {
                let place = self.ident()?;
                let cmp = match self.next()? {
                    Tok {
                        kind: TokKind::Cmp(c),
                        ..
                    } => *c,
                    t => {
                        return Err(PredicateParseError {
                            offset: t.offset,
                            message: format!("expected comparison, found {}", t.kind),
                        })
                    }
                };
                let rhs = match self.next()? {
                    Tok {
                        kind: TokKind::Int(v),
                        ..
                    } => Operand::Int(*v),
                    Tok {
                        kind: TokKind::Ident(s),
                        ..
                    } => Operand::Param(s.clone()),
                    Tok {
                        kind: TokKind::Hash,
                        ..
                    } => Operand::Tokens(self.ident()?),
                    t => {
                        return Err(PredicateParseError {
                            offset: t.offset,
                            message: format!(
                                "expected integer, parameter or #place, found {}",
                                t.kind
                            ),
                        })
                    }
                };
                Ok(Predicate::Compare { place, cmp, rhs })
            }
            other => Err(PredicateParseError {
                offset,
                message: format!("expected '#place', found {other}"),
            }),
        }
    }

    fn ident(&mut self) -> Result<String, PredicateParseError> {
        match self.next()? {
            Tok {
                kind: TokKind::Ident(s),
                ..
            } => Ok(s.clone()),
            t => Err(PredicateParseError {
                offset: t.offset,
                message: format!("expected identifier, found {}", t.kind),
            }),
        }
    }
}
