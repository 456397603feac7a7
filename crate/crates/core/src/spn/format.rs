//! Line-oriented text format for nets.
//!
//! ```text
//! # full-line comment
//! net mm1
//! param BLOCK = 10
//! place FREE 3
//! transition ARR exponential 1.0 single
//! transition T6 immediate priority=2 weight=1
//!   guard #OPF3_1 >= BLOCK
//!   in OPF3_1 BLOCK
//!   out PARTTX_1 *OPF3_1
//! ```
//!
//! Arc counts are an integer, a parameter name, `*` (FlushAll on inputs,
//! Flushed on outputs) or `*SOURCE` (Flushed from a named FlushAll input).
//! Timed transitions take `single` or `infinite` and deterministic ones may
//! add `zero-ok`. Delays may name a real or integer parameter.

use std::fmt::Write as _;

use thiserror::Error;

use super::net::{CountExpr, ParamValue, PetriNet, ServerSemantics, Transition, TransitionKind};
use super::predicate::Predicate;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, column {column}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl PetriNet {
    pub fn from_text(text: &str) -> Result<PetriNet, FormatError> {
        parse(text)
    }

    pub fn to_text(&self) -> String {
        write(self)
    }
}

struct Words<'a> {
    line: usize,
    items: Vec<(usize, &'a str)>,
}

impl<'a> Words<'a> {
    fn split(line_no: usize, line: &'a str) -> Self {
        let mut items = Vec::new();
        let mut start = None;
        for (i, ch) in line.char_indices() {
            if ch.is_whitespace() {
                if let Some(s) = start.take() {
                    items.push((s, &line[s..i]));
                }
            } else if start.is_none() {
                start = Some(i);
            }
        }
        if let Some(s) = start {
            items.push((s, &line[s..]));
        }
        Words {
            line: line_no,
            items,
        }
    }

    fn err(&self, idx: usize, message: impl Into<String>) -> FormatError {
        let column = self.items.get(idx).map_or_else(
            || self.items.last().map_or(1, |(c, w)| c + w.len() + 1),
            |(c, _)| c + 1,
        );
        FormatError {
            line: self.line,
            column,
            message: message.into(),
        }
    }

    fn get(&self, idx: usize, what: &str) -> Result<&'a str, FormatError> {
        self.items
            .get(idx)
            .map(|(_, w)| *w)
            .ok_or_else(|| self.err(idx, format!("expected {what}")))
    }

    fn expect_end(&self, idx: usize) -> Result<(), FormatError> {
        match self.items.get(idx) {
            None => Ok(()),
            Some((_, w)) => Err(self.err(idx, format!("unexpected '{w}'"))),
        }
    }
}

fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.' || c == '-')
}

fn parse(text: &str) -> Result<PetriNet, FormatError> {
    let mut net = PetriNet::new("net");
    let mut current: Option<Transition> = None;
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = match raw.find('#') {
            // only whole-line comments; '#' also marks places in guards
            Some(i) if raw[..i].trim().is_empty() => &raw[..i],
            _ => raw,
        };
        let w = Words::split(line_no, line);
        let Some(&(_, keyword)) = w.items.first() else {
            continue;
        };
        match keyword {
            "net" => {
                net.name = w.get(1, "net name")?.to_string();
                w.expect_end(2)?;
            }
            "param" => {
                let name = w.get(1, "parameter name")?;
                if !is_ident(name) {
                    return Err(w.err(1, format!("invalid parameter name '{name}'")));
                }
                if w.get(2, "'='")? != "=" {
                    return Err(w.err(2, "expected '='"));
                }
                let v = w.get(3, "parameter value")?;
                let value = if let Ok(i) = v.parse::<i64>() {
                    ParamValue::Int(i)
                } else if let Ok(f) = v.parse::<f64>() {
                    ParamValue::Real(f)
                } else {
                    return Err(w.err(3, format!("invalid number '{v}'")));
                };
                w.expect_end(4)?;
                net.set_param(name, value);
            }
            "place" => {
                flush(&mut net, &mut current);
                let name = w.get(1, "place name")?;
                if !is_ident(name) {
                    return Err(w.err(1, format!("invalid place name '{name}'")));
                }
                let tokens = match w.items.get(2) {
                    None => 0,
                    Some((_, t)) => t
                        .parse::<u64>()
                        .map_err(|_| w.err(2, format!("invalid token count '{t}'")))?,
                };
                w.expect_end(3)?;
                net.add_place(name, tokens);
            }
            "transition" => {
                flush(&mut net, &mut current);
                current = Some(parse_transition(&w, &net)?);
            }
            "guard" | "in" | "out" => {
                let Some(t) = current.as_mut() else {
                    return Err(w.err(0, format!("'{keyword}' outside a transition")));
                };
                match keyword {
                    "guard" => {
                        let start = w.items[1..]
                            .first()
                            .map(|(c, _)| *c)
                            .ok_or_else(|| w.err(1, "expected predicate"))?;
                        let body = raw[start..].trim_end();
                        let pred = Predicate::parse(body).map_err(|e| FormatError {
                            line: line_no,
                            column: start + e.offset + 1,
                            message: e.message,
                        })?;
                        t.guard = Some(pred);
                    }
                    _ => {
                        let place = w.get(1, "place name")?.to_string();
                        let input = keyword == "in";
                        let count = match w.items.get(2) {
                            None => CountExpr::Constant(1),
                            Some((_, c)) => parse_count(c, input).map_err(|m| w.err(2, m))?,
                        };
                        w.expect_end(3)?;
                        let arc = super::net::Arc { place, count };
                        if input {
                            t.inputs.push(arc);
                        } else {
                            t.outputs.push(arc);
                        }
                    }
                }
            }
            other => return Err(w.err(0, format!("unknown keyword '{other}'"))),
        }
    }
    flush(&mut net, &mut current);
    Ok(net)
}

fn flush(net: &mut PetriNet, current: &mut Option<Transition>) {
    if let Some(t) = current.take() {
        net.add_transition(t);
    }
}

fn parse_count(c: &str, input: bool) -> Result<CountExpr, String> {
    if let Some(rest) = c.strip_prefix('*') {
        return match (input, rest) {
            (true, "") => Ok(CountExpr::FlushAll),
            (true, _) => Err("input arcs take '*' without a source".into()),
            (false, "") => Ok(CountExpr::Flushed(None)),
            (false, src) if is_ident(src) => Ok(CountExpr::Flushed(Some(src.to_string()))),
            (false, src) => Err(format!("invalid flush source '{src}'")),
        };
    }
    if let Ok(k) = c.parse::<u64>() {
        return Ok(CountExpr::Constant(k));
    }
    if is_ident(c) {
        return Ok(CountExpr::Param(c.to_string()));
    }
    Err(format!("invalid arc count '{c}'"))
}

fn parse_transition(w: &Words<'_>, net: &PetriNet) -> Result<Transition, FormatError> {
    let name = w.get(1, "transition name")?;
    if !is_ident(name) {
        return Err(w.err(1, format!("invalid transition name '{name}'")));
    }
    let kind = w.get(2, "transition kind")?;
    let mut t;
    let mut idx;
    match kind {
        "immediate" => {
            t = Transition::immediate(name);
            idx = 3;
            while let Some((_, opt)) = w.items.get(idx) {
                let (key, value) = opt
                    .split_once('=')
                    .ok_or_else(|| w.err(idx, format!("expected key=value, got '{opt}'")))?;
                match key {
                    "priority" => {
                        t = t.priority(
                            value
                                .parse()
                                .map_err(|_| w.err(idx, format!("invalid priority '{value}'")))?,
                        )
                    }
                    "weight" => {
                        t = t.weight(
                            value
                                .parse()
                                .map_err(|_| w.err(idx, format!("invalid weight '{value}'")))?,
                        )
                    }
                    _ => return Err(w.err(idx, format!("unknown option '{key}'"))),
                }
                idx += 1;
            }
            return Ok(t);
        }
        "exponential" | "deterministic" => {
            let d = w.get(3, "delay")?;
            let delay = match d.parse::<f64>() {
                Ok(v) => v,
                Err(_) => match net.parameters.get(d) {
                    Some(v) => v.as_f64(),
                    None => return Err(w.err(3, format!("invalid delay '{d}'"))),
                },
            };
            t = if kind == "exponential" {
                Transition::exponential(name, delay)
            } else {
                Transition::deterministic(name, delay)
            };
            idx = 4;
        }
        other => return Err(w.err(2, format!("unknown transition kind '{other}'"))),
    }
    while let Some((_, opt)) = w.items.get(idx) {
        t = match *opt {
            "single" => t.single_server(),
            "infinite" => t.infinite_server(),
            "zero-ok" if kind == "deterministic" => t.allow_zero_delay(),
            _ => return Err(w.err(idx, format!("unknown option '{opt}'"))),
        };
        idx += 1;
    }
    Ok(t)
}

fn count_text(c: &CountExpr) -> Option<String> {
    match c {
        CountExpr::Constant(1) => None,
        CountExpr::Constant(k) => Some(k.to_string()),
        CountExpr::Param(p) => Some(p.clone()),
        CountExpr::FlushAll | CountExpr::Flushed(None) => Some("*".into()),
        CountExpr::Flushed(Some(src)) => Some(format!("*{src}")),
    }
}

fn write(net: &PetriNet) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "net {}", net.name);
    for (name, v) in &net.parameters {
        let text = match v {
            ParamValue::Int(i) => i.to_string(),
            // keep a decimal point so the value reads back as real
            ParamValue::Real(f) if f.fract() == 0.0 && f.is_finite() => format!("{f:.1}"),
            ParamValue::Real(f) => format!("{f:?}"),
        };
        let _ = writeln!(s, "param {name} = {text}");
    }
    for p in &net.places {
        let _ = writeln!(s, "place {} {}", p.name, p.initial_tokens);
    }
    for t in &net.transitions {
        let server = match t.server {
            ServerSemantics::SingleServer => "single",
            ServerSemantics::InfiniteServer => "infinite",
        };
        match t.kind {
            TransitionKind::Immediate { priority, weight } => {
                let _ = writeln!(
                    s,
                    "transition {} immediate priority={priority} weight={weight:?}",
                    t.name
                );
            }
            TransitionKind::Exponential { mean_delay } => {
                let _ = writeln!(
                    s,
                    "transition {} exponential {mean_delay:?} {server}",
                    t.name
                );
            }
            TransitionKind::Deterministic { delay, allow_zero } => {
                let zero = if allow_zero { " zero-ok" } else { "" };
                let _ = writeln!(
                    s,
                    "transition {} deterministic {delay:?} {server}{zero}",
                    t.name
                );
            }
        }
        if let Some(g) = &t.guard {
            let _ = writeln!(s, "  guard {g}");
        }
        for (kw, arcs) in [("in", &t.inputs), ("out", &t.outputs)] {
            for a in arcs {
                match count_text(&a.count) {
                    None => {
                        let _ = writeln!(s, "  {kw} {}", a.place);
                    }
                    Some(c) => {
                        let _ = writeln!(s, "  {kw} {} {c}", a.place);
                    }
                }
            }
        }
    }
    s
}
