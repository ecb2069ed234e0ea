//! Canonical text form for machines and uncertainty descriptions.
//!
//! The printer is the inverse of the parser: printing any parsed or
//! generated entity yields text that parses back to the same entity, and
//! printing is idempotent (`print ∘ parse ∘ print = print`). Comparisons
//! are rendered with `<`/`<=` only, parentheses are derived from
//! precedence, and guards or actions with more than two top-level
//! conjuncts are wrapped one conjunct per line.

use std::fmt::Write as _;

use crate::model::expr::{ArithOp, BoolOp, CmpOp, Expr, ExprKind, QuantKind};
use crate::model::{Clause, Domain, EventKind, Machine, Radius, SymbolTable, UncertaintySpec};

/// Binding strength used to decide parenthesisation; larger binds tighter.
fn level(e: &Expr) -> u8 {
    match &e.kind {
        ExprKind::Bin(BoolOp::Iff, _, _) => 1,
        ExprKind::Bin(BoolOp::Implies, _, _) => 2,
        ExprKind::Bin(BoolOp::Or, _, _) => 3,
        ExprKind::Bin(BoolOp::And, _, _) => 4,
        ExprKind::Not(_) => 5,
        ExprKind::Quant { .. } => 0,
        ExprKind::Cmp(..) => 6,
        ExprKind::Arith(ArithOp::Add | ArithOp::Sub, _, _) => 7,
        ExprKind::Arith(ArithOp::Mul, _, _) => 8,
        ExprKind::Int(n) if *n < 0 => 8,
        _ => 9,
    }
}

fn write_child(out: &mut String, e: &Expr, min_level: u8) {
    if level(e) < min_level {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::Int(n) => {
            let _ = write!(out, "{n}");
        }
        ExprKind::Bool(b) => {
            let _ = write!(out, "{b}");
        }
        ExprKind::Bot => out.push_str("bot"),
        ExprKind::Ref { name, primed } => {
            out.push_str(name);
            if *primed {
                out.push('\'');
            }
        }
        ExprKind::Cmp(op, a, b) => {
            write_child(out, a, 7);
            out.push_str(match op {
                CmpOp::Eq => " = ",
                CmpOp::Ne => " != ",
                CmpOp::Lt => " < ",
                CmpOp::Le => " <= ",
            });
            write_child(out, b, 7);
        }
        ExprKind::Arith(op, a, b) => match op {
            ArithOp::Add => {
                write_child(out, a, 7);
                out.push_str(" + ");
                write_child(out, b, 8);
            }
            ArithOp::Sub => {
                write_child(out, a, 7);
                out.push_str(" - ");
                write_child(out, b, 8);
            }
            ArithOp::Mul => {
                write_child(out, a, 8);
                out.push_str(" * ");
                write_child(out, b, 9);
            }
        },
        ExprKind::Not(a) => {
            out.push_str("not ");
            write_child(out, a, 6);
        }
        ExprKind::Bin(op, a, b) => match op {
            BoolOp::And => {
                write_child(out, a, 4);
                out.push_str(" and ");
                write_child(out, b, 5);
            }
            BoolOp::Or => {
                write_child(out, a, 3);
                out.push_str(" or ");
                write_child(out, b, 4);
            }
            BoolOp::Implies => {
                write_child(out, a, 3);
                out.push_str(" => ");
                write_child(out, b, 2);
            }
            BoolOp::Iff => {
                write_child(out, a, 1);
                out.push_str(" <=> ");
                write_child(out, b, 2);
            }
        },
        ExprKind::Quant { kind, var, lo, hi, body } => {
            out.push_str(match kind {
                QuantKind::Forall => "forall ",
                QuantKind::Exists => "exists ",
            });
            out.push_str(var);
            out.push_str(" in [");
            write_expr(out, lo);
            out.push_str("..");
            write_expr(out, hi);
            out.push_str("] . ");
            write_expr(out, body);
        }
    }
}

/// Renders an expression on one line.
pub fn print_expr(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

fn write_domain(out: &mut String, d: &Domain, symbols: &SymbolTable) {
    match d {
        Domain::Int { lo, hi } => {
            let _ = write!(out, "int[{lo}..{hi}]");
        }
        Domain::Enum(vals) => {
            out.push_str("{ ");
            for (i, v) in vals.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                out.push_str(symbols.name(*v));
            }
            out.push_str(" }");
        }
    }
}

/// Renders a section whose body is an expression, splitting long
/// conjunctions one conjunct per line.
fn write_section(out: &mut String, indent: &str, keyword: &str, e: &Expr) {
    let parts = e.conjuncts();
    if parts.len() > 2 {
        let mut first = String::new();
        write_child(&mut first, parts[0], 5);
        let _ = writeln!(out, "{indent}{keyword} {first}");
        let pad = " ".repeat(keyword.len() - 3);
        for p in &parts[1..] {
            // A conjunct that is itself an `or` (or weaker) would not
            // re-parse into the same tree without parentheses.
            let mut rendered = String::new();
            write_child(&mut rendered, p, 5);
            let _ = writeln!(out, "{indent}{pad}and {rendered}");
        }
    } else {
        let _ = writeln!(out, "{indent}{keyword} {}", print_expr(e));
    }
}

/// Canonical text of a machine.
pub fn print_machine(m: &Machine) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "machine {}", m.name);
    for c in &m.consts {
        let _ = writeln!(out, "  const {} : int[{}..{}]", c.name, c.lo, c.hi);
    }
    for v in &m.vars {
        let mut d = String::new();
        write_domain(&mut d, &v.domain, &m.symbols);
        let _ = writeln!(out, "  var {} : {}", v.name, d);
    }
    out.push('\n');
    write_section(&mut out, "  ", "init", &m.init);
    write_section(&mut out, "  ", "safety", &m.safety);
    if let Some(u) = &m.uncertain {
        write_section(&mut out, "  ", "uncertain", u);
    }
    for ev in &m.events {
        out.push('\n');
        let kind = match ev.kind {
            EventKind::Plant => "plant",
            EventKind::Ctrl => "ctrl",
        };
        let _ = writeln!(out, "  {kind} event {}", ev.name);
        for p in &ev.params {
            let mut d = String::new();
            write_domain(&mut d, &p.domain, &m.symbols);
            let bot = if p.with_bot { " | bot" } else { "" };
            let _ = writeln!(out, "    param {} : {}{}", p.name, d, bot);
        }
        write_section(&mut out, "    ", "guard", &ev.guard);
        write_section(&mut out, "    ", "action", &ev.action);
        let _ = writeln!(out, "  end");
    }
    let _ = writeln!(out, "end");
    out
}

/// Canonical text of an uncertainty description.
pub fn print_uncertainty(u: &UncertaintySpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "uncertainty {} for {}", u.name, u.machine);
    for c in &u.consts {
        let _ = writeln!(out, "  const {} : int[{}..{}]", c.name, c.lo, c.hi);
    }
    for (var, clause) in &u.clauses {
        match clause {
            Clause::Exact => {
                let _ = writeln!(out, "  perceives {var} exactly");
            }
            Clause::Within(Radius::Lit(k)) => {
                let _ = writeln!(out, "  perceives {var} within {k}");
            }
            Clause::Within(Radius::Const(name)) => {
                let _ = writeln!(out, "  perceives {var} within {name}");
            }
        }
    }
    if let Some(rel) = &u.relation {
        write_section(&mut out, "  ", "relation", rel);
    }
    let _ = writeln!(out, "end");
    out
}
