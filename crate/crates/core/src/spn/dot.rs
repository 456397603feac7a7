//! Graphviz export.

use std::fmt::Write as _;

use super::net::{CountExpr, PetriNet, TransitionKind};

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for ch in s.chars() {
        match ch {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}

fn arc_label(c: &CountExpr) -> Option<String> {
    match c {
        CountExpr::Constant(1) => None,
        CountExpr::Constant(k) => Some(k.to_string()),
        CountExpr::Param(p) => Some(p.clone()),
        CountExpr::FlushAll => Some("all".into()),
        CountExpr::Flushed(None) => Some("flushed".into()),
        CountExpr::Flushed(Some(src)) => Some(format!("flushed({src})")),
    }
}

impl PetriNet {
    /// Places are circles, immediate transitions thin black bars,
    /// exponential ones white boxes and deterministic ones grey boxes.
    pub fn to_dot(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "digraph {} {{", quote(&self.name));
        let _ = writeln!(s, "  rankdir=LR;");
        for p in &self.places {
            let label = if p.initial_tokens > 0 {
                format!("{}\n{}", p.name, p.initial_tokens)
            } else {
                p.name.clone()
            };
            let _ = writeln!(
                s,
                "  {} [shape=circle, label={}];",
                quote(&format!("p:{}", p.name)),
                quote(&label)
            );
        }
        for t in &self.transitions {
            let mut label = match t.kind {
                TransitionKind::Immediate { priority, weight }
                    if priority != 1 || weight != 1.0 =>
                {
                    format!("{} (p={priority}, w={weight})", t.name)
                }
                TransitionKind::Immediate { .. } => t.name.clone(),
                TransitionKind::Exponential { mean_delay } => {
                    format!("{}\nexp {mean_delay}", t.name)
                }
                TransitionKind::Deterministic { delay, .. } => format!("{}\ndet {delay}", t.name),
            };
            if let Some(g) = &t.guard {
                let _ = write!(label, "\n[{g}]");
            }
            let style = match t.kind {
                TransitionKind::Immediate { .. } => "shape=box, style=filled, fillcolor=black, width=0.08, height=0.5, fixedsize=true",
                TransitionKind::Exponential { .. } => "shape=box",
                TransitionKind::Deterministic { .. } => "shape=box, style=filled, fillcolor=gray70",
            };
            let id = quote(&format!("t:{}", t.name));
            if t.kind.is_immediate() {
                let _ = writeln!(s, "  {id} [{style}, label=\"\", xlabel={}];", quote(&label));
            } else {
                let _ = writeln!(s, "  {id} [{style}, label={}];", quote(&label));
            }
            for a in &t.inputs {
                let from = quote(&format!("p:{}", a.place));
                match arc_label(&a.count) {
                    Some(l) => writeln!(s, "  {from} -> {id} [label={}];", quote(&l)),
                    None => writeln!(s, "  {from} -> {id};"),
                }
                .ok();
            }
            for a in &t.outputs {
                let to = quote(&format!("p:{}", a.place));
                match arc_label(&a.count) {
                    Some(l) => writeln!(s, "  {id} -> {to} [label={}];", quote(&l)),
                    None => writeln!(s, "  {id} -> {to};"),
                }
                .ok();
            }
        }
        s.push_str("}\n");
        s
    }
}
