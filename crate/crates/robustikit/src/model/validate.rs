//! Static well-formedness and type checks for machines and uncertainty
//! descriptions.
//!
//! Validation never evaluates anything; it reports name, namespace, typing,
//! and shape problems as a list of diagnostics sorted by source position.

use std::collections::HashSet;
use std::fmt;

use serde::Serialize;

use super::expr::{BoolOp, CmpOp, Expr, ExprKind, Span};
use super::{Clause, Domain, EventDef, EventKind, Machine, Radius, UncertaintySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub span: Span,
    pub message: String,
}

impl Diagnostic {
    pub fn error(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Error, span, message: message.into() }
    }

    pub fn warning(span: Span, message: impl Into<String>) -> Self {
        Diagnostic { severity: Severity::Warning, span, message: message.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {}: {}", self.span.line, self.span.col, sev, self.message)
    }
}

pub fn sort_diagnostics(ds: &mut Vec<Diagnostic>) {
    ds.sort_by(|a, b| {
        (a.span.line, a.span.col, &a.message).cmp(&(b.span.line, b.span.col, &b.message))
    });
    ds.dedup();
}

pub fn has_errors(ds: &[Diagnostic]) -> bool {
    ds.iter().any(|d| d.severity == Severity::Error)
}

/// Value kinds tracked by the static checker.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Ty {
    Int,
    Bool,
    Sym,
    /// The `bot` literal; comparable with anything via `=` / `!=`.
    BotLit,
}

impl fmt::Display for Ty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Ty::Int => "int",
            Ty::Bool => "bool",
            Ty::Sym => "enum value",
            Ty::BotLit => "bot",
        })
    }
}

fn domain_ty(d: &Domain) -> Ty {
    match d {
        Domain::Int { .. } => Ty::Int,
        Domain::Enum(_) => Ty::Sym,
    }
}

/// Where an expression sits, which determines the names it may use.
#[derive(Clone, Copy)]
struct ExprPlace<'a> {
    what: &'a str,
    params: Option<&'a EventDef>,
    allow_primed: bool,
}

struct Checker<'a> {
    machine: &'a Machine,
    /// Extra constants in scope (from an uncertainty block).
    extra_consts: &'a [String],
    /// Extra value names in scope (perceived-copy names in a relation).
    extra_values: &'a [(String, Ty)],
    diags: Vec<Diagnostic>,
    bound: Vec<String>,
}

impl<'a> Checker<'a> {
    fn new(machine: &'a Machine) -> Self {
        Checker { machine, extra_consts: &[], extra_values: &[], diags: Vec::new(), bound: Vec::new() }
    }

    fn error(&mut self, span: Span, msg: impl Into<String>) {
        self.diags.push(Diagnostic::error(span, msg));
    }

    fn resolve(&mut self, name: &str, primed: bool, span: Span, place: ExprPlace) -> Option<Ty> {
        if primed {
            if !place.allow_primed {
                self.error(
                    span,
                    format!("primed reference `{name}'` is only allowed in event actions, not in {}", place.what),
                );
                return None;
            }
            return match self.machine.var_index(name) {
                Some(i) => Some(domain_ty(&self.machine.vars[i].domain)),
                None => {
                    self.error(span, format!("primed reference to unknown variable `{name}`"));
                    None
                }
            };
        }
        if self.bound.iter().rev().any(|b| b == name) {
            return Some(Ty::Int);
        }
        if let Some(ev) = place.params {
            if let Some(p) = ev.params.iter().find(|p| p.name == name) {
                return Some(domain_ty(&p.domain));
            }
        }
        if let Some((_, ty)) = self.extra_values.iter().find(|(n, _)| n == name) {
            return Some(*ty);
        }
        if let Some(i) = self.machine.var_index(name) {
            return Some(domain_ty(&self.machine.vars[i].domain));
        }
        if self.machine.const_decl(name).is_some() || self.extra_consts.iter().any(|c| c == name) {
            return Some(Ty::Int);
        }
        if self.machine.symbols.lookup(name).is_some() {
            return Some(Ty::Sym);
        }
        self.error(span, format!("unknown name `{name}` in {}", place.what));
        None
    }

    fn check(&mut self, e: &Expr, place: ExprPlace) -> Option<Ty> {
        match &e.kind {
            ExprKind::Int(_) => Some(Ty::Int),
            ExprKind::Bool(_) => Some(Ty::Bool),
            ExprKind::Bot => Some(Ty::BotLit),
            ExprKind::Ref { name, primed } => self.resolve(name, *primed, e.span, place),
            ExprKind::Cmp(op, a, b) => {
                let ta = self.check(a, place);
                let tb = self.check(b, place);
                if let (Some(ta), Some(tb)) = (ta, tb) {
                    match op {
                        CmpOp::Eq | CmpOp::Ne => {
                            let compatible = ta == tb
                                || ta == Ty::BotLit
                                || tb == Ty::BotLit;
                            if !compatible || ta == Ty::Bool {
                                self.error(
                                    e.span,
                                    format!("cannot compare {ta} with {tb} using `=`/`!="),
                                );
                            }
                        }
                        CmpOp::Lt | CmpOp::Le => {
                            if ta != Ty::Int || tb != Ty::Int {
                                self.error(
                                    e.span,
                                    format!("ordering comparison needs integers, found {ta} and {tb}"),
                                );
                            }
                        }
                    }
                }
                Some(Ty::Bool)
            }
            ExprKind::Arith(_, a, b) => {
                for side in [a, b] {
                    if let Some(t) = self.check(side, place) {
                        if t != Ty::Int {
                            self.error(side.span, format!("arithmetic needs integers, found {t}"));
                        }
                    }
                }
                Some(Ty::Int)
            }
            ExprKind::Not(a) => {
                if let Some(t) = self.check(a, place) {
                    if t != Ty::Bool {
                        self.error(a.span, format!("`not` needs a boolean, found {t}"));
                    }
                }
                Some(Ty::Bool)
            }
            ExprKind::Bin(op, a, b) => {
                let _: BoolOp = *op;
                for side in [a, b] {
                    if let Some(t) = self.check(side, place) {
                        if t != Ty::Bool {
                            self.error(side.span, format!("logical connective needs booleans, found {t}"));
                        }
                    }
                }
                Some(Ty::Bool)
            }
            ExprKind::Quant { var, lo, hi, body, .. } => {
                for bound_expr in [lo, hi] {
                    if let Some(t) = self.check(bound_expr, place) {
                        if t != Ty::Int {
                            self.error(bound_expr.span, format!("quantifier range needs integers, found {t}"));
                        }
                    }
                }
                let shadows = self.bound.iter().any(|b| b == var)
                    || place.params.map_or(false, |ev| ev.params.iter().any(|p| p.name == *var))
                    || self.machine.var_index(var).is_some()
                    || self.machine.const_decl(var).is_some()
                    || self.extra_consts.iter().any(|c| c == var)
                    || self.extra_values.iter().any(|(n, _)| n == var)
                    || self.machine.symbols.lookup(var).is_some();
                if shadows {
                    self.error(e.span, format!("quantified variable `~{var}` shadows a declared name"));
                }
                self.bound.push(var.clone());
                if let Some(t) = self.check(body, place) {
                    if t != Ty::Bool {
                        self.error(body.span, format!("quantifier body needs a boolean, found {t}"));
                    }
                }
                self.bound.pop();
                Some(Ty::Bool)
            }
        }
    }

    fn check_bool(&mut self, e: &Expr, place: ExprPlace) {
        if let Some(t) = self.check(e, place) {
            if t != Ty::Bool {
                self.error(e.span, format!("{} must be a boolean condition, found {t}", place.what));
            }
        }
    }
}

fn check_domain(d: &Domain, span: Span, what: &str, diags: &mut Vec<Diagnostic>) {
    match d {
        Domain::Int { lo, hi } => {
            if lo > hi {
                diags.push(Diagnostic::error(span, format!("empty integer range [{lo}..{hi}] for {what}")));
            }
        }
        Domain::Enum(vs) => {
            if vs.is_empty() {
                diags.push(Diagnostic::error(span, format!("empty enumeration for {what}")));
            }
            let mut seen = HashSet::new();
            for v in vs {
                if !seen.insert(*v) {
                    diags.push(Diagnostic::error(span, format!("duplicate enumeration value in {what}")));
                }
            }
        }
    }
}

/// Validates a machine. An empty error set means the machine is safe to
/// enumerate and evaluate.
pub fn validate_machine(m: &Machine) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    // Name uniqueness and namespace separation.
    let mut named: Vec<(&str, &str, Span)> = Vec::new();
    for v in &m.vars {
        named.push((v.name.as_str(), "variable", v.span));
    }
    for c in &m.consts {
        named.push((c.name.as_str(), "constant", c.span));
    }
    for v in &m.vars {
        if let Domain::Enum(vals) = &v.domain {
            for s in vals {
                named.push((m.symbols.name(*s), "enumeration value", v.span));
            }
        }
    }
    {
        let mut seen: HashSet<&str> = HashSet::new();
        // Enumeration values may repeat across domains (same symbol); dedup
        // identical (name, kind) pairs first.
        let mut uniq: Vec<(&str, &str, Span)> = Vec::new();
        let mut seen_pair: HashSet<(&str, &str)> = HashSet::new();
        for (n, k, sp) in named {
            if k == "enumeration value" && !seen_pair.insert((n, k)) {
                continue;
            }
            uniq.push((n, k, sp));
        }
        for (n, k, sp) in uniq {
            if !seen.insert(n) {
                diags.push(Diagnostic::error(sp, format!("name `{n}` ({k}) collides with an earlier declaration")));
            }
        }
    }

    for v in &m.vars {
        check_domain(&v.domain, v.span, &format!("variable `{}`", v.name), &mut diags);
    }
    for c in &m.consts {
        if c.lo > c.hi {
            diags.push(Diagnostic::error(c.span, format!("empty integer range [{}..{}] for constant `{}`", c.lo, c.hi, c.name)));
        }
    }

    {
        let mut seen: HashSet<&str> = HashSet::new();
        for ev in &m.events {
            if !seen.insert(ev.name.as_str()) {
                diags.push(Diagnostic::error(ev.span, format!("duplicate event name `{}`", ev.name)));
            }
        }
    }
    if !m.events.iter().any(|e| e.kind == EventKind::Ctrl) {
        diags.push(Diagnostic::error(Span::SYNTH, format!("machine `{}` declares no controller events", m.name)));
    }

    let mut checker = Checker::new(m);

    for ev in &m.events {
        let mut seen: HashSet<&str> = HashSet::new();
        for p in &ev.params {
            if !seen.insert(p.name.as_str()) {
                diags.push(Diagnostic::error(p.span, format!("duplicate parameter `{}` in event `{}`", p.name, ev.name)));
            }
            if m.var_index(&p.name).is_some()
                || m.const_decl(&p.name).is_some()
                || m.symbols.lookup(&p.name).is_some()
            {
                diags.push(Diagnostic::error(
                    p.span,
                    format!("parameter `{}` of event `{}` shadows a declared name", p.name, ev.name),
                ));
            }
            check_domain(&p.domain, p.span, &format!("parameter `{}` of event `{}`", p.name, ev.name), &mut diags);
        }

        checker.check_bool(
            &ev.guard,
            ExprPlace { what: &format!("the guard of event `{}`", ev.name), params: Some(ev), allow_primed: false },
        );
        checker.check_bool(
            &ev.action,
            ExprPlace { what: &format!("the action of event `{}`", ev.name), params: Some(ev), allow_primed: true },
        );

        // Every variable's post-value must be constrained in every branch of
        // the action, textually: each top-level disjunct mentions `v'`.
        for (bi, branch) in ev.action.disjuncts().iter().enumerate() {
            let mut mentioned: HashSet<String> = HashSet::new();
            branch.for_each_free_ref(&mut |name, primed| {
                if primed {
                    mentioned.insert(name.to_string());
                }
            });
            for v in &m.vars {
                if !mentioned.contains(&v.name) {
                    let which = if ev.action.disjuncts().len() > 1 {
                        format!(" (branch {})", bi + 1)
                    } else {
                        String::new()
                    };
                    diags.push(Diagnostic::error(
                        ev.span,
                        format!("action of event `{}`{which} leaves `{}'` unconstrained", ev.name, v.name),
                    ));
                }
            }
        }
    }

    checker.check_bool(&m.init, ExprPlace { what: "the initial condition", params: None, allow_primed: false });
    checker.check_bool(&m.safety, ExprPlace { what: "the safety condition", params: None, allow_primed: false });
    if let Some(u) = &m.uncertain {
        checker.check_bool(u, ExprPlace { what: "the uncertainty invariant", params: None, allow_primed: false });
    }

    diags.extend(checker.diags);
    sort_diagnostics(&mut diags);
    diags
}

/// Validates an uncertainty description against the machine it refers to.
pub fn validate_spec(spec: &UncertaintySpec, m: &Machine) -> Vec<Diagnostic> {
    let mut diags = Vec::new();

    if spec.machine != m.name {
        diags.push(Diagnostic::error(
            spec.span,
            format!("uncertainty `{}` is declared for machine `{}`, not `{}`", spec.name, spec.machine, m.name),
        ));
    }

    for c in &spec.consts {
        if c.lo > c.hi {
            diags.push(Diagnostic::error(c.span, format!("empty integer range [{}..{}] for constant `{}`", c.lo, c.hi, c.name)));
        }
        if m.var_index(&c.name).is_some() || m.const_decl(&c.name).is_some() || m.symbols.lookup(&c.name).is_some() {
            diags.push(Diagnostic::error(c.span, format!("constant `{}` shadows a name declared by machine `{}`", c.name, m.name)));
        }
    }
    {
        let mut seen: HashSet<&str> = HashSet::new();
        for c in &spec.consts {
            if !seen.insert(c.name.as_str()) {
                diags.push(Diagnostic::error(c.span, format!("duplicate constant `{}`", c.name)));
            }
        }
    }

    let mut seen_clause: HashSet<&str> = HashSet::new();
    for (var, clause) in &spec.clauses {
        let Some(i) = m.var_index(var) else {
            diags.push(Diagnostic::error(spec.span, format!("perception clause for unknown variable `{var}`")));
            continue;
        };
        if !seen_clause.insert(var.as_str()) {
            diags.push(Diagnostic::error(spec.span, format!("duplicate perception clause for variable `{var}`")));
        }
        if let Clause::Within(r) = clause {
            if !matches!(m.vars[i].domain, Domain::Int { .. }) {
                diags.push(Diagnostic::error(
                    spec.span,
                    format!("`within` clause on non-integer variable `{var}`"),
                ));
            }
            match r {
                Radius::Lit(k) if *k < 0 => {
                    diags.push(Diagnostic::error(spec.span, format!("negative radius {k} for variable `{var}`")));
                }
                Radius::Const(name) => {
                    let declared = spec.consts.iter().any(|c| &c.name == name) || m.const_decl(name).is_some();
                    if !declared {
                        diags.push(Diagnostic::error(
                            spec.span,
                            format!("radius constant `{name}` for variable `{var}` is not declared"),
                        ));
                    }
                }
                _ => {}
            }
        }
    }

    if let Some(rel) = &spec.relation {
        let extra_consts: Vec<String> = spec.consts.iter().map(|c| c.name.clone()).collect();
        let extra_values: Vec<(String, Ty)> = m
            .vars
            .iter()
            .map(|v| (super::hat_name(&v.name), domain_ty(&v.domain)))
            .collect();
        let mut checker = Checker::new(m);
        checker.extra_consts = &extra_consts;
        checker.extra_values = &extra_values;
        checker.check_bool(rel, ExprPlace { what: "the perception relation", params: None, allow_primed: false });
        diags.extend(checker.diags);
    }

    sort_diagnostics(&mut diags);
    diags
}
