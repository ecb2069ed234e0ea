//! Event-B-flavoured rendering of a machine, for people who read that
//! notation. Export only — nothing parses this back.

use std::fmt::Write as _;

use crate::model::expr::{ArithOp, BoolOp, CmpOp, Expr, ExprKind, QuantKind};
use crate::model::{Domain, EventKind, Machine, SymbolTable};

fn write_expr(out: &mut String, e: &Expr, symbols: &SymbolTable) {
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
    fn child(out: &mut String, e: &Expr, min: u8, symbols: &SymbolTable) {
        if level(e) < min {
            out.push('(');
            write_expr(out, e, symbols);
            out.push(')');
        } else {
            write_expr(out, e, symbols);
        }
    }
    match &e.kind {
        ExprKind::Int(n) => {
            let _ = write!(out, "{n}");
        }
        ExprKind::Bool(true) => out.push('⊤'),
        ExprKind::Bool(false) => out.push('⊥'),
        ExprKind::Bot => out.push('⊥'),
        ExprKind::Ref { name, primed } => {
            out.push_str(name);
            if *primed {
                out.push('′');
            }
        }
        ExprKind::Cmp(op, a, b) => {
            child(out, a, 7, symbols);
            out.push_str(match op {
                CmpOp::Eq => " = ",
                CmpOp::Ne => " ≠ ",
                CmpOp::Lt => " < ",
                CmpOp::Le => " ≤ ",
            });
            child(out, b, 7, symbols);
        }
        ExprKind::Arith(op, a, b) => {
            let (min_a, sym, min_b) = match op {
                ArithOp::Add => (7, " + ", 8),
                ArithOp::Sub => (7, " − ", 8),
                ArithOp::Mul => (8, " · ", 9),
            };
            child(out, a, min_a, symbols);
            out.push_str(sym);
            child(out, b, min_b, symbols);
        }
        ExprKind::Not(a) => {
            out.push('¬');
            child(out, a, 6, symbols);
        }
        ExprKind::Bin(op, a, b) => {
            let (min_a, sym, min_b) = match op {
                BoolOp::And => (4, " ∧ ", 5),
                BoolOp::Or => (3, " ∨ ", 4),
                BoolOp::Implies => (3, " ⇒ ", 2),
                BoolOp::Iff => (1, " ⇔ ", 2),
            };
            child(out, a, min_a, symbols);
            out.push_str(sym);
            child(out, b, min_b, symbols);
        }
        ExprKind::Quant { kind, var, lo, hi, body } => {
            out.push(match kind {
                QuantKind::Forall => '∀',
                QuantKind::Exists => '∃',
            });
            let bare = var.trim_start_matches('~');
            let _ = write!(out, "{bare} · {bare} ∈ ");
            child(out, lo, 8, symbols);
            out.push('‥');
            child(out, hi, 8, symbols);
            out.push_str(match kind {
                QuantKind::Forall => " ⇒ ",
                QuantKind::Exists => " ∧ ",
            });
            let mut rendered = String::new();
            write_expr(&mut rendered, body, symbols);
            let rendered = rendered.replace(var.as_str(), bare);
            out.push_str(&rendered);
        }
    }
}

fn render(e: &Expr, symbols: &SymbolTable) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, symbols);
    s
}

fn domain_set(d: &Domain, symbols: &SymbolTable) -> String {
    match d {
        Domain::Int { lo, hi } => format!("{lo}‥{hi}"),
        Domain::Enum(vals) => {
            let names: Vec<&str> = vals.iter().map(|&v| symbols.name(v)).collect();
            format!("{{{}}}", names.join(", "))
        }
    }
}

/// Renders the whole machine in an Event-B-like layout.
pub fn print_eventb(m: &Machine) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "MACHINE {}", m.name);
    if !m.consts.is_empty() {
        let _ = writeln!(out, "CONSTANTS");
        for c in &m.consts {
            let _ = writeln!(out, "  {} ∈ {}‥{}", c.name, c.lo, c.hi);
        }
    }
    let _ = writeln!(out, "VARIABLES");
    let names: Vec<&str> = m.vars.iter().map(|v| v.name.as_str()).collect();
    let _ = writeln!(out, "  {}", names.join(", "));
    let _ = writeln!(out, "INVARIANTS");
    let mut inv = 0;
    for v in &m.vars {
        inv += 1;
        let _ = writeln!(out, "  inv{inv}: {} ∈ {}", v.name, domain_set(&v.domain, &m.symbols));
    }
    for part in m.safety.conjuncts() {
        inv += 1;
        let _ = writeln!(out, "  inv{inv}: {}", render(part, &m.symbols));
    }
    if let Some(u) = &m.uncertain {
        for part in u.conjuncts() {
            inv += 1;
            let _ = writeln!(out, "  inv{inv}: {}", render(part, &m.symbols));
        }
    }
    let _ = writeln!(out, "EVENTS");
    let _ = writeln!(out, "  INITIALISATION ≙");
    let _ = writeln!(out, "    BEGIN");
    let primed_init = m.init.subst(&|name, primed| {
        if !primed && m.var_index(name).is_some() {
            Some(Expr::primed(name))
        } else {
            None
        }
    });
    let _ = writeln!(out, "      act1: {} :∣ {}", names.join(", "), render(&primed_init, &m.symbols));
    let _ = writeln!(out, "    END");
    for ev in &m.events {
        let tag = match ev.kind {
            EventKind::Plant => "plant",
            EventKind::Ctrl => "ctrl",
        };
        let _ = writeln!(out, "  {} ≙  ⟨{}⟩", ev.name, tag);
        if ev.params.is_empty() {
            let _ = writeln!(out, "    WHEN");
        } else {
            let pnames: Vec<&str> = ev.params.iter().map(|p| p.name.as_str()).collect();
            let _ = writeln!(out, "    ANY {} WHERE", pnames.join(", "));
        }
        let mut grd = 0;
        for p in &ev.params {
            grd += 1;
            let set = domain_set(&p.domain, &m.symbols);
            let set = if p.with_bot { format!("{set} ∪ {{⊥}}") } else { set };
            let _ = writeln!(out, "      grd{grd}: {} ∈ {}", p.name, set);
        }
        for part in ev.guard.conjuncts() {
            grd += 1;
            let _ = writeln!(out, "      grd{grd}: {}", render(part, &m.symbols));
        }
        let _ = writeln!(out, "    THEN");
        let _ = writeln!(out, "      act1: {} :∣ {}", names.join(", "), render(&ev.action, &m.symbols));
        let _ = writeln!(out, "    END");
    }
    let _ = writeln!(out, "END");
    out
}
