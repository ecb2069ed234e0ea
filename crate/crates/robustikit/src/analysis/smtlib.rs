//! SMT-LIB v2 emission for the exhaustive checks, as quantified
//! linear-integer-arithmetic queries.
//!
//! Every query is a *violation* encoding: `sat` means a counterexample (or,
//! for subset realization, a witnessing perceived state) exists; `unsat`
//! means the property holds. Variables become integer constants with
//! bounded-domain assertions (`v_<name>` for plain variables, `h_<name>` for
//! perceived copies, `..._next` for post-state values); enumeration values
//! use their global symbol indices; lifted parameters carry an extra
//! `..._isbot` Boolean.
//!
//! One known divergence from the evaluator: arithmetic over an absent
//! (`bot`) parameter makes the surrounding *atom* false here, while the
//! evaluator fails the whole guard conjunct. The two agree everywhere an
//! atom with `bot` arithmetic is not nested under a negation — which holds
//! for every guard this tool emits.

use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{
    unhat, ArithOp, Clause, CmpOp, ConstBinding, ConstDecl, Domain, EventDef, EventKind, Expr,
    ExprKind, Machine, QuantKind, Radius, UncertaintySpec,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum SmtError {
    #[error("the `vacuity` query needs an uncertainty description")]
    MissingSpec,
    #[error("controller event index {index} is out of range 1..={count}")]
    BadIndex { index: usize, count: usize },
    #[error("the subset for the `vacuity` query must not be empty")]
    EmptySubset,
}

/// Which property to encode.
#[derive(Debug, Clone, PartialEq)]
pub enum SmtQuery {
    /// sat: some state enables zero or several controller events.
    Partitioning,
    /// sat: some invariant (or initial) state steps outside the invariant.
    Preservation,
    /// sat: some admitted controller guard valuation has no successor.
    Feasibility,
    /// sat: some perceived state realizes exactly this set of 1-based
    /// controller indices (the subset is *not* vacuous).
    Vacuity { subset: Vec<usize> },
}

impl SmtQuery {
    fn describe(&self) -> String {
        match self {
            SmtQuery::Partitioning => {
                "partitioning violation query (sat: a state enables zero or several controller events)".to_string()
            }
            SmtQuery::Preservation => {
                "invariant preservation violation query (sat: a step from an invariant or initial state leaves the invariant)".to_string()
            }
            SmtQuery::Feasibility => {
                "feasibility violation query (sat: an admitted controller guard valuation has no successor)".to_string()
            }
            SmtQuery::Vacuity { subset } => format!(
                "subset realization query for controller events {{{}}} (sat: some perceived state sees exactly this set of enabled controller events; assumes the base machine is partitioned)",
                subset.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(", ")
            ),
        }
    }
}

/// A translated integer expression: the SMT term, side conditions that must
/// hold for the term to mean anything (absence errors inside compound
/// arithmetic), and — for terms that can *be* the absent value — a Boolean
/// term for that.
struct TInt {
    term: String,
    guards: Vec<String>,
    bot: Option<String>,
}

struct Env<'a> {
    m: &'a Machine,
    consts: &'a ConstBinding,
    extra_consts: &'a [ConstDecl],
    event: Option<(&'a EventDef, &'a str)>,
    map_var: &'a dyn Fn(&str, bool) -> Option<String>,
}

fn sand(parts: Vec<String>) -> String {
    let kept: Vec<String> = parts.into_iter().filter(|p| p != "true").collect();
    if kept.iter().any(|p| p == "false") {
        return "false".to_string();
    }
    match kept.len() {
        0 => "true".to_string(),
        1 => kept.into_iter().next().unwrap(),
        _ => format!("(and {})", kept.join(" ")),
    }
}

fn sor(parts: Vec<String>) -> String {
    let kept: Vec<String> = parts.into_iter().filter(|p| p != "false").collect();
    if kept.iter().any(|p| p == "true") {
        return "true".to_string();
    }
    match kept.len() {
        0 => "false".to_string(),
        1 => kept.into_iter().next().unwrap(),
        _ => format!("(or {})", kept.join(" ")),
    }
}

fn snot(p: String) -> String {
    match p.as_str() {
        "true" => "false".to_string(),
        "false" => "true".to_string(),
        _ => format!("(not {p})"),
    }
}

fn numeral(v: i64) -> String {
    if v < 0 {
        format!("(- {})", v.unsigned_abs())
    } else {
        v.to_string()
    }
}

fn smt_var(name: &str, primed: bool) -> String {
    let (prefix, base) = match unhat(name) {
        Some(base) => ("h_", base),
        None => ("v_", name),
    };
    if primed {
        format!("{prefix}{base}_next")
    } else {
        format!("{prefix}{base}")
    }
}

fn domain_assertion(term: &str, d: &Domain) -> String {
    match d {
        Domain::Int { lo, hi } => sand(vec![
            format!("(<= {} {term})", numeral(*lo)),
            format!("(<= {term} {})", numeral(*hi)),
        ]),
        Domain::Enum(vs) => sor(
            vs.iter()
                .map(|&s| format!("(= {term} {})", numeral(s as i64)))
                .collect(),
        ),
    }
}

fn tint(e: &Expr, env: &Env, bound: &mut Vec<String>) -> TInt {
    match &e.kind {
        ExprKind::Int(v) => TInt { term: numeral(*v), guards: vec![], bot: None },
        ExprKind::Bot => TInt { term: "0".to_string(), guards: vec![], bot: Some("true".to_string()) },
        ExprKind::Ref { name, primed } => {
            if !primed {
                if let Some(base) = name.strip_prefix('~') {
                    if bound.iter().any(|b| b == name) {
                        return TInt { term: format!("q_{base}"), guards: vec![], bot: None };
                    }
                }
                if let Some((ev, prefix)) = env.event {
                    if let Some(p) = ev.params.iter().find(|p| p.name == *name) {
                        let term = format!("{prefix}{name}");
                        let bot = p.with_bot.then(|| format!("{term}_isbot"));
                        return TInt { term, guards: vec![], bot };
                    }
                }
            }
            if let Some(term) = (env.map_var)(name, *primed) {
                return TInt { term, guards: vec![], bot: None };
            }
            if let Some(decl) = env
                .m
                .const_decl(name)
                .or_else(|| env.extra_consts.iter().find(|c| c.name == *name))
            {
                let term = match env.consts.get(&decl.name) {
                    Some(v) => numeral(*v),
                    None => format!("c_{name}"),
                };
                return TInt { term, guards: vec![], bot: None };
            }
            if let Some(id) = env.m.symbols.lookup(name) {
                return TInt { term: numeral(id as i64), guards: vec![], bot: None };
            }
            // Unknown names never survive validation; emit something visible.
            TInt { term: format!("unknown_{name}"), guards: vec![], bot: None }
        }
        ExprKind::Arith(op, a, b) => {
            let ta = tint(a, env, bound);
            let tb = tint(b, env, bound);
            let mut guards = ta.guards;
            guards.extend(tb.guards);
            if let Some(ba) = ta.bot {
                guards.push(snot(ba));
            }
            if let Some(bb) = tb.bot {
                guards.push(snot(bb));
            }
            let sym = match op {
                ArithOp::Add => "+",
                ArithOp::Sub => "-",
                ArithOp::Mul => "*",
            };
            TInt { term: format!("({sym} {} {})", ta.term, tb.term), guards, bot: None }
        }
        _ => TInt { term: "0".to_string(), guards: vec!["false".to_string()], bot: None },
    }
}

fn tbool(e: &Expr, env: &Env, bound: &mut Vec<String>) -> String {
    match &e.kind {
        ExprKind::Bool(v) => v.to_string(),
        ExprKind::Not(a) => snot(tbool(a, env, bound)),
        ExprKind::Bin(op, a, b) => {
            let ta = tbool(a, env, bound);
            let tb = tbool(b, env, bound);
            use crate::model::BoolOp::*;
            match op {
                And => sand(vec![ta, tb]),
                Or => sor(vec![ta, tb]),
                Implies => sor(vec![snot(ta), tb]),
                Iff => format!("(= {ta} {tb})"),
            }
        }
        ExprKind::Cmp(op, a, b) => {
            let ta = tint(a, env, bound);
            let tb = tint(b, env, bound);
            let mut guards = ta.guards.clone();
            guards.extend(tb.guards.clone());
            match op {
                CmpOp::Le | CmpOp::Lt => {
                    let sym = if *op == CmpOp::Le { "<=" } else { "<" };
                    if let Some(ba) = ta.bot {
                        guards.push(snot(ba));
                    }
                    if let Some(bb) = tb.bot {
                        guards.push(snot(bb));
                    }
                    guards.push(format!("({sym} {} {})", ta.term, tb.term));
                    sand(guards)
                }
                CmpOp::Eq | CmpOp::Ne => {
                    let ba = ta.bot.unwrap_or_else(|| "false".to_string());
                    let bb = tb.bot.unwrap_or_else(|| "false".to_string());
                    let core = sor(vec![
                        sand(vec![ba.clone(), bb.clone()]),
                        sand(vec![
                            snot(ba),
                            snot(bb),
                            format!("(= {} {})", ta.term, tb.term),
                        ]),
                    ]);
                    let core = if *op == CmpOp::Eq { core } else { snot(core) };
                    guards.push(core);
                    sand(guards)
                }
            }
        }
        ExprKind::Quant { kind, var, lo, hi, body } => {
            let tlo = tint(lo, env, bound);
            let thi = tint(hi, env, bound);
            bound.push(var.clone());
            let tb = tbool(body, env, bound);
            bound.pop();
            let base = var.strip_prefix('~').unwrap_or(var);
            let mut range = tlo.guards;
            range.extend(thi.guards);
            range.push(format!("(<= {} q_{base})", tlo.term));
            range.push(format!("(<= q_{base} {})", thi.term));
            let range = sand(range);
            match kind {
                QuantKind::Forall => {
                    format!("(forall ((q_{base} Int)) {})", sor(vec![snot(range), tb]))
                }
                QuantKind::Exists => {
                    format!("(exists ((q_{base} Int)) {})", sand(vec![range, tb]))
                }
            }
        }
        // Bare references and arithmetic never appear in Boolean positions
        // after validation.
        _ => "false".to_string(),
    }
}

/// `exists params . domains /\ guard`, with the parameters bound inside the
/// formula (used where the same event appears several times in one query).
fn enabled_formula(m: &Machine, ev: &EventDef, env_vars: &dyn Fn(&str, bool) -> Option<String>, consts: &ConstBinding, extra: &[ConstDecl]) -> String {
    let prefix = format!("pq_{}_", ev.name);
    let env = Env { m, consts, extra_consts: extra, event: Some((ev, &prefix)), map_var: env_vars };
    let mut bound = Vec::new();
    let guard = tbool(&ev.guard, &env, &mut bound);
    if ev.params.is_empty() {
        return guard;
    }
    let mut binders = Vec::new();
    let mut doms = Vec::new();
    for p in &ev.params {
        let t = format!("{prefix}{}", p.name);
        binders.push(format!("({t} Int)"));
        if p.with_bot {
            binders.push(format!("({t}_isbot Bool)"));
        }
        doms.push(domain_assertion(&t, &p.domain));
    }
    doms.push(guard);
    format!("(exists ({}) {})", binders.join(" "), sand(doms))
}

/// Declarations for one event's free parameter constants, plus their domain
/// assertions.
fn declare_params(out: &mut String, ev: &EventDef, prefix: &str) {
    for p in &ev.params {
        let t = format!("{prefix}{}", p.name);
        let _ = writeln!(out, "(declare-const {t} Int)");
        if p.with_bot {
            let _ = writeln!(out, "(declare-const {t}_isbot Bool)");
        }
        let _ = writeln!(out, "(assert {})", domain_assertion(&t, &p.domain));
    }
}

fn declare_unbound_consts(out: &mut String, decls: &[&ConstDecl], consts: &ConstBinding) {
    for d in decls {
        if consts.contains_key(&d.name) {
            continue;
        }
        let _ = writeln!(out, "(declare-const c_{} Int)", d.name);
        let _ = writeln!(
            out,
            "(assert {})",
            domain_assertion(&format!("c_{}", d.name), &Domain::Int { lo: d.lo, hi: d.hi })
        );
    }
}

/// Emits one self-contained SMT-LIB v2 script for `query` over `m`.
pub fn emit_smtlib(
    m: &Machine,
    spec: Option<&UncertaintySpec>,
    query: &SmtQuery,
    consts: &ConstBinding,
) -> Result<String, SmtError> {
    let mut out = String::new();
    let _ = writeln!(out, "; {} for machine `{}`", query.describe(), m.name);
    let _ = writeln!(out, "; plain variables: v_<name>; perceived copies: h_<name>; post-state: ..._next");
    let _ = writeln!(out, "; enumeration values are encoded as their global symbol indices");
    let _ = writeln!(out, "(set-logic LIA)");

    let extra: Vec<ConstDecl> = spec.map(|s| s.consts.clone()).unwrap_or_default();
    let all_consts: Vec<&ConstDecl> = m.consts.iter().chain(extra.iter()).collect();
    declare_unbound_consts(&mut out, &all_consts, consts);

    let plain_env = |name: &str, primed: bool| -> Option<String> {
        m.var_index(name).map(|_| smt_var(name, primed))
    };

    match query {
        SmtQuery::Partitioning => {
            for v in &m.vars {
                let t = smt_var(&v.name, false);
                let _ = writeln!(out, "(declare-const {t} Int)");
                let _ = writeln!(out, "(assert {})", domain_assertion(&t, &v.domain));
            }
            let enabled: Vec<String> = m
                .events
                .iter()
                .filter(|e| e.kind == EventKind::Ctrl)
                .map(|e| enabled_formula(m, e, &plain_env, consts, &extra))
                .collect();
            let exactly_one = sor(
                (0..enabled.len())
                    .map(|i| {
                        sand(
                            enabled
                                .iter()
                                .enumerate()
                                .map(|(j, e)| if i == j { e.clone() } else { snot(e.clone()) })
                                .collect(),
                        )
                    })
                    .collect(),
            );
            let _ = writeln!(out, "(assert {})", snot(exactly_one));
        }
        SmtQuery::Preservation => {
            for v in &m.vars {
                for primed in [false, true] {
                    let t = smt_var(&v.name, primed);
                    let _ = writeln!(out, "(declare-const {t} Int)");
                    let _ = writeln!(out, "(assert {})", domain_assertion(&t, &v.domain));
                }
            }
            for e in &m.events {
                declare_params(&mut out, e, &format!("p_{}_", e.name));
            }
            let mut bound = Vec::new();
            let env = Env { m, consts, extra_consts: &extra, event: None, map_var: &plain_env };
            let inv = sand(m.invariants().iter().map(|e| tbool(e, &env, &mut bound)).collect());
            let inv_next = {
                let next_env = |name: &str, _primed: bool| -> Option<String> {
                    m.var_index(name).map(|_| smt_var(name, true))
                };
                let env = Env { m, consts, extra_consts: &extra, event: None, map_var: &next_env };
                sand(m.invariants().iter().map(|e| tbool(e, &env, &mut bound)).collect())
            };
            let init = tbool(&m.init, &env, &mut bound);
            let steps: Vec<String> = m
                .events
                .iter()
                .map(|e| {
                    let prefix = format!("p_{}_", e.name);
                    let env = Env { m, consts, extra_consts: &extra, event: Some((e, &prefix)), map_var: &plain_env };
                    let mut bound = Vec::new();
                    sand(vec![tbool(&e.guard, &env, &mut bound), tbool(&e.action, &env, &mut bound)])
                })
                .collect();
            let step_violation = sand(vec![inv.clone(), sor(steps), snot(inv_next)]);
            let init_violation = sand(vec![init, snot(inv)]);
            let _ = writeln!(out, "(assert {})", sor(vec![step_violation, init_violation]));
        }
        SmtQuery::Feasibility => {
            for v in &m.vars {
                let t = smt_var(&v.name, false);
                let _ = writeln!(out, "(declare-const {t} Int)");
                let _ = writeln!(out, "(assert {})", domain_assertion(&t, &v.domain));
            }
            for e in m.events.iter().filter(|e| e.kind == EventKind::Ctrl) {
                declare_params(&mut out, e, &format!("p_{}_", e.name));
            }
            let mut bound = Vec::new();
            let env = Env { m, consts, extra_consts: &extra, event: None, map_var: &plain_env };
            let inv = sand(m.invariants().iter().map(|e| tbool(e, &env, &mut bound)).collect());
            let _ = writeln!(out, "(assert {inv})");
            let cases: Vec<String> = m
                .events
                .iter()
                .filter(|e| e.kind == EventKind::Ctrl)
                .map(|e| {
                    let prefix = format!("p_{}_", e.name);
                    let env = Env { m, consts, extra_consts: &extra, event: Some((e, &prefix)), map_var: &plain_env };
                    let mut bound = Vec::new();
                    let guard = tbool(&e.guard, &env, &mut bound);
                    let action = tbool(&e.action, &env, &mut bound);
                    let mut binders = Vec::new();
                    let mut doms = Vec::new();
                    for v in &m.vars {
                        let t = smt_var(&v.name, true);
                        binders.push(format!("({t} Int)"));
                        doms.push(domain_assertion(&t, &v.domain));
                    }
                    let no_succ = format!(
                        "(forall ({}) {})",
                        binders.join(" "),
                        sor(vec![snot(sand(doms)), snot(action)])
                    );
                    sand(vec![guard, no_succ])
                })
                .collect();
            let _ = writeln!(out, "(assert {})", sor(cases));
        }
        SmtQuery::Vacuity { subset } => {
            let spec = spec.ok_or(SmtError::MissingSpec)?;
            let ctrl: Vec<&EventDef> =
                m.events.iter().filter(|e| e.kind == EventKind::Ctrl).collect();
            if subset.is_empty() {
                return Err(SmtError::EmptySubset);
            }
            for &i in subset {
                if i == 0 || i > ctrl.len() {
                    return Err(SmtError::BadIndex { index: i, count: ctrl.len() });
                }
            }
            for v in &m.vars {
                let t = format!("h_{}", v.name);
                let _ = writeln!(out, "(declare-const {t} Int)");
                let _ = writeln!(out, "(assert {})", domain_assertion(&t, &v.domain));
            }

            // The considered true state is bound as s_<name> inside each
            // quantifier; the perceived one is the free h_<name> above.
            let s_env = |name: &str, _primed: bool| -> Option<String> {
                match unhat(name) {
                    Some(base) => m.var_index(base).map(|_| format!("h_{base}")),
                    None => m.var_index(name).map(|_| format!("s_{name}")),
                }
            };

            let mut binders = Vec::new();
            let mut ball = Vec::new();
            for v in &m.vars {
                binders.push(format!("(s_{} Int)", v.name));
                ball.push(domain_assertion(&format!("s_{}", v.name), &v.domain));
                match spec.clause_for(&v.name) {
                    Clause::Exact => ball.push(format!("(= s_{0} h_{0})", v.name)),
                    Clause::Within(r) => {
                        let r = match r {
                            Radius::Lit(k) => numeral(*k),
                            Radius::Const(name) => match consts.get(name) {
                                Some(v) => numeral(*v),
                                None => format!("c_{name}"),
                            },
                        };
                        ball.push(format!("(<= (- h_{0} {r}) s_{0})", v.name));
                        ball.push(format!("(<= s_{0} (+ h_{0} {r}))", v.name));
                    }
                }
            }
            if let Some(rel) = &spec.relation {
                let env = Env { m, consts, extra_consts: &extra, event: None, map_var: &s_env };
                let mut bound = Vec::new();
                ball.push(tbool(rel, &env, &mut bound));
            }
            let ball = sand(ball);

            let enabled: Vec<String> = subset
                .iter()
                .map(|&i| enabled_formula(m, ctrl[i - 1], &s_env, consts, &extra))
                .collect();

            let mut parts = vec![format!(
                "(forall ({}) {})",
                binders.join(" "),
                sor(vec![snot(ball.clone()), sor(enabled.clone())])
            )];
            for e in &enabled {
                parts.push(format!(
                    "(exists ({}) {})",
                    binders.join(" "),
                    sand(vec![ball.clone(), e.clone()])
                ));
            }
            let _ = writeln!(out, "(assert {})", sand(parts));
        }
    }

    let _ = writeln!(out, "(check-sat)");
    if matches!(query, SmtQuery::Preservation) {
        let _ = writeln!(out, "(get-model)");
    }
    Ok(out)
}
