//! Expression builders shared by uncertainty injection and controller
//! robustification.
//!
//! Every quantified formula produced here follows one convention for ranging
//! over a perceived-state neighbourhood ("ball"): each inexactly perceived
//! variable is bound to a fresh `~`-name over the raw hull
//! `[^v - r, ^v + r]`, and the side conditions — domain containment plus the
//! extra perception relation, when one is declared — stay inside the body, as
//! an antecedent under `forall` and as a conjunct under `exists`. Exactly
//! perceived variables are not quantified at all; the perceived copy `^v`
//! itself stands for the true value. Enumeration-domain quantifications
//! (parameters, successor slots) are expanded into finite or/and chains.

use crate::analysis::funcs::SafparMode;
use crate::model::{
    hat_name, Clause, Domain, EventDef, Expr, ExprKind, Machine, QuantKind, Radius,
    UncertaintySpec,
};
use std::collections::BTreeSet;

/// Deterministic allocator for quantifier variable names (`~base`,
/// `~base_1`, ...). Seeded with every name already bound by a quantifier in
/// the expressions a construction will embed, so substitution into their
/// bodies can never be captured.
pub(crate) struct FreshNames {
    used: BTreeSet<String>,
}

impl FreshNames {
    pub(crate) fn avoiding<'a>(exprs: impl IntoIterator<Item = &'a Expr>) -> FreshNames {
        let mut used = BTreeSet::new();
        for e in exprs {
            collect_bound_names(e, &mut used);
        }
        FreshNames { used }
    }

    /// Returns the first unused `~base`-style name and reserves it.
    pub(crate) fn fresh(&mut self, base: &str) -> String {
        let plain = format!("~{base}");
        if self.used.insert(plain.clone()) {
            return plain;
        }
        for k in 1u32.. {
            let cand = format!("~{base}_{k}");
            if self.used.insert(cand.clone()) {
                return cand;
            }
        }
        unreachable!("ran out of fresh names")
    }
}

fn collect_bound_names(e: &Expr, out: &mut BTreeSet<String>) {
    match &e.kind {
        ExprKind::Int(_) | ExprKind::Bool(_) | ExprKind::Bot | ExprKind::Ref { .. } => {}
        ExprKind::Cmp(_, a, b) | ExprKind::Arith(_, a, b) | ExprKind::Bin(_, a, b) => {
            collect_bound_names(a, out);
            collect_bound_names(b, out);
        }
        ExprKind::Not(a) => collect_bound_names(a, out),
        ExprKind::Quant { var, lo, hi, body, .. } => {
            out.insert(var.clone());
            collect_bound_names(lo, out);
            collect_bound_names(hi, out);
            collect_bound_names(body, out);
        }
    }
}

fn radius_expr(r: &Radius) -> Expr {
    match r {
        Radius::Lit(k) => Expr::int(*k),
        Radius::Const(name) => Expr::var(name),
    }
}

/// Constrains the perceived copies *after* a step: an exactly perceived
/// variable copies the new true value, an inexact one lands within the radius
/// of it. Conjoined onto every event action of a paired machine.
pub(crate) fn reperception_expr(original: &Machine, spec: &UncertaintySpec) -> Expr {
    let mut parts = Vec::new();
    for v in &original.vars {
        let hat = hat_name(&v.name);
        match spec.clause_for(&v.name) {
            Clause::Exact => {
                parts.push(Expr::eq(Expr::primed(&hat), Expr::primed(&v.name)));
            }
            Clause::Within(r) => {
                let r = radius_expr(r);
                parts.push(Expr::le(
                    Expr::sub(Expr::primed(&v.name), r.clone()),
                    Expr::primed(&hat),
                ));
                parts.push(Expr::le(Expr::primed(&hat), Expr::add(Expr::primed(&v.name), r)));
            }
        }
    }
    Expr::and_all(parts)
}

/// How true-state variable references are rendered under a ball
/// quantification: one expression per variable of the plain machine, aligned
/// with its `vars`.
pub(crate) struct BallScope {
    refs: Vec<Expr>,
}

impl BallScope {
    fn lookup(&self, m: &Machine, name: &str) -> Option<Expr> {
        m.var_index(name).map(|i| self.refs[i].clone())
    }
}

fn quant_node(kind: QuantKind, var: String, lo: Expr, hi: Expr, body: Expr) -> Expr {
    match kind {
        QuantKind::Forall => Expr::forall(var, lo, hi, body),
        QuantKind::Exists => Expr::exists(var, lo, hi, body),
    }
}

/// Quantifies over the ball around the perceived state (read from the `^v`
/// copies) and builds the body through `body`, which receives the rendering
/// of each true variable.
pub(crate) fn ball_quant(
    kind: QuantKind,
    m: &Machine,
    spec: &UncertaintySpec,
    fresh: &mut FreshNames,
    body: impl FnOnce(&BallScope, &mut FreshNames) -> Expr,
) -> Expr {
    struct BoundVar {
        name: String,
        lo: Expr,
        hi: Expr,
        dom_lo: i64,
        dom_hi: i64,
    }
    let mut refs = Vec::new();
    let mut bound = Vec::new();
    for v in &m.vars {
        match spec.clause_for(&v.name) {
            Clause::Exact => refs.push(Expr::var(hat_name(&v.name))),
            Clause::Within(r) => {
                let (dom_lo, dom_hi) = match &v.domain {
                    Domain::Int { lo, hi } => (*lo, *hi),
                    // validation rejects `within` clauses on enumeration vars
                    Domain::Enum(_) => unreachable!("within-clause on enumeration variable"),
                };
                let name = fresh.fresh(&v.name);
                let r = radius_expr(r);
                let hat = Expr::var(hat_name(&v.name));
                bound.push(BoundVar {
                    name: name.clone(),
                    lo: Expr::sub(hat.clone(), r.clone()),
                    hi: Expr::add(hat, r),
                    dom_lo,
                    dom_hi,
                });
                refs.push(Expr::var(name));
            }
        }
    }
    let scope = BallScope { refs };
    let raw = body(&scope, fresh);
    let mut side = Vec::new();
    for b in &bound {
        side.push(Expr::le(Expr::int(b.dom_lo), Expr::var(&b.name)));
        side.push(Expr::le(Expr::var(&b.name), Expr::int(b.dom_hi)));
    }
    if let Some(rel) = &spec.relation {
        side.push(rel.subst(&|name, primed| {
            if primed {
                return None;
            }
            scope.lookup(m, name)
        }));
    }
    let mut out = if side.is_empty() {
        raw
    } else {
        let side = Expr::and_all(side);
        match kind {
            QuantKind::Forall => Expr::implies(side, raw),
            QuantKind::Exists => Expr::and(side, raw),
        }
    };
    for b in bound.into_iter().rev() {
        out = quant_node(kind, b.name, b.lo, b.hi, out);
    }
    out
}

/// Nested quantification of named slots over their domains: integer slots
/// become quantifier bindings on fresh `~`-names, enumeration slots are
/// expanded into or/and chains over their values. `build` receives the
/// expression standing for each slot, in order.
pub(crate) fn quant_slots(
    kind: QuantKind,
    m: &Machine,
    slots: &[(String, Domain)],
    fresh: &mut FreshNames,
    build: &mut dyn FnMut(&[Expr], &mut FreshNames) -> Expr,
) -> Expr {
    let names: Vec<Option<String>> = slots
        .iter()
        .map(|(base, d)| match d {
            Domain::Int { .. } => Some(fresh.fresh(base)),
            Domain::Enum(_) => None,
        })
        .collect();

    fn go(
        kind: QuantKind,
        m: &Machine,
        slots: &[(String, Domain)],
        names: &[Option<String>],
        k: usize,
        acc: &mut Vec<Expr>,
        fresh: &mut FreshNames,
        build: &mut dyn FnMut(&[Expr], &mut FreshNames) -> Expr,
    ) -> Expr {
        if k == slots.len() {
            return build(acc, fresh);
        }
        match &slots[k].1 {
            Domain::Int { lo, hi } => {
                let name = names[k].clone().expect("int slot has a name");
                acc.push(Expr::var(&name));
                let inner = go(kind, m, slots, names, k + 1, acc, fresh, build);
                acc.pop();
                quant_node(kind, name, Expr::int(*lo), Expr::int(*hi), inner)
            }
            Domain::Enum(vs) => {
                let parts = vs
                    .iter()
                    .map(|s| {
                        acc.push(Expr::var(m.symbols.name(*s)));
                        let inner = go(kind, m, slots, names, k + 1, acc, fresh, build);
                        acc.pop();
                        inner
                    })
                    .collect();
                match kind {
                    QuantKind::Forall => Expr::and_all(parts),
                    QuantKind::Exists => Expr::or_all(parts),
                }
            }
        }
    }

    let mut acc = Vec::new();
    go(kind, m, slots, &names, 0, &mut acc, fresh, build)
}

/// Slot list for quantifying over successor states: one slot per machine
/// variable, named `<var>_next`.
pub(crate) fn successor_slots(m: &Machine) -> Vec<(String, Domain)> {
    m.vars.iter().map(|v| (format!("{}_next", v.name), v.domain.clone())).collect()
}

/// Slot list for quantifying over an event's real parameter tuples.
pub(crate) fn param_slots(ev: &EventDef) -> Vec<(String, Domain)> {
    ev.params.iter().map(|p| (p.name.clone(), p.domain.clone())).collect()
}

/// Instantiates a guard at a ball member: unprimed variable references take
/// their ball rendering; the event's own parameter names take the paired
/// expressions.
pub(crate) fn subst_guard(
    m: &Machine,
    g: &Expr,
    params: &[(String, Expr)],
    scope: &BallScope,
) -> Expr {
    g.subst(&|name, primed| {
        if primed {
            return None;
        }
        if let Some((_, e)) = params.iter().find(|(n, _)| n == name) {
            return Some(e.clone());
        }
        scope.lookup(m, name)
    })
}

/// Instantiates an action at a ball member with explicit successor
/// renderings: unprimed references follow the ball, primed references take
/// the successor expression of their variable.
pub(crate) fn subst_action(
    m: &Machine,
    a: &Expr,
    params: &[(String, Expr)],
    scope: &BallScope,
    succ: &[Expr],
) -> Expr {
    a.subst(&|name, primed| {
        if primed {
            return m.var_index(name).map(|i| succ[i].clone());
        }
        if let Some((_, e)) = params.iter().find(|(n, _)| n == name) {
            return Some(e.clone());
        }
        scope.lookup(m, name)
    })
}

/// The guard of controller event `ev` is satisfiable at the ball member for
/// *some* real parameter tuple. The lifted "no parameter" value is never
/// considered here.
pub(crate) fn region_expr(
    m: &Machine,
    ev: &EventDef,
    scope: &BallScope,
    fresh: &mut FreshNames,
) -> Expr {
    quant_slots(QuantKind::Exists, m, &param_slots(ev), fresh, &mut |qs, _| {
        let params = pair_params(ev, qs);
        subst_guard(m, &ev.guard, &params, scope)
    })
}

fn pair_params(ev: &EventDef, exprs: &[Expr]) -> Vec<(String, Expr)> {
    ev.params.iter().zip(exprs).map(|(p, e)| (p.name.clone(), e.clone())).collect()
}

/// Membership of the rendered tuple in the robust parameter set of
/// controller event `ev`: wherever in the ball the guard of `ev` is
/// satisfiable at all, it must accept this tuple. A ball with no such member
/// leaves the tuple unconstrained, matching the convention that an empty
/// intersection family yields the full parameter domain.
pub(crate) fn member_eps_expr(
    m: &Machine,
    spec: &UncertaintySpec,
    ev: &EventDef,
    slots: &[(String, Expr)],
    fresh: &mut FreshNames,
) -> Expr {
    ball_quant(QuantKind::Forall, m, spec, fresh, |scope, fresh| {
        let reg = region_expr(m, ev, scope, fresh);
        let g = subst_guard(m, &ev.guard, slots, scope);
        Expr::implies(reg, g)
    })
}

/// Membership of the rendered tuple in the safe parameter set of `ev`
/// relative to the invariant `inv`: at every ball member the action must
/// have at least one successor, and all of its successors must satisfy
/// `inv`. Under [`SafparMode::Prose`] both requirements apply only at ball
/// members where `ev`'s guard is satisfiable.
pub(crate) fn member_safpar_expr(
    m: &Machine,
    spec: &UncertaintySpec,
    ev: &EventDef,
    slots: &[(String, Expr)],
    inv: &Expr,
    mode: SafparMode,
    fresh: &mut FreshNames,
) -> Expr {
    ball_quant(QuantKind::Forall, m, spec, fresh, |scope, fresh| {
        let succ_slots = successor_slots(m);
        let nonempty = quant_slots(QuantKind::Exists, m, &succ_slots, fresh, &mut |succ, _| {
            subst_action(m, &ev.action, slots, scope, succ)
        });
        let contained = quant_slots(QuantKind::Forall, m, &succ_slots, fresh, &mut |succ, _| {
            let a = subst_action(m, &ev.action, slots, scope, succ);
            let inv_next = inv.subst(&|name, primed| {
                if primed {
                    return None;
                }
                m.var_index(name).map(|i| succ[i].clone())
            });
            Expr::implies(a, inv_next)
        });
        let core = Expr::and(nonempty, contained);
        match mode {
            SafparMode::Formula => core,
            SafparMode::Prose => Expr::implies(region_expr(m, ev, scope, fresh), core),
        }
    })
}

/// Existence of a real parameter tuple of `ev` satisfying `member` — used to
/// decide whether the "no parameter" fallback is the admitted choice.
pub(crate) fn exists_real_tuple(
    m: &Machine,
    ev: &EventDef,
    fresh: &mut FreshNames,
    member: &mut dyn FnMut(&[(String, Expr)], &mut FreshNames) -> Expr,
) -> Expr {
    quant_slots(QuantKind::Exists, m, &param_slots(ev), fresh, &mut |qs, fresh| {
        let pairs = pair_params(ev, qs);
        member(&pairs, fresh)
    })
}

/// Joint-step requirement of the action-preserving construction: at every
/// ball member there is one successor on which the actions of all the given
/// events (instantiated with their slot expressions) agree.
pub(crate) fn joint_step_expr(
    m: &Machine,
    spec: &UncertaintySpec,
    events: &[(&EventDef, Vec<(String, Expr)>)],
    fresh: &mut FreshNames,
) -> Expr {
    ball_quant(QuantKind::Forall, m, spec, fresh, |scope, fresh| {
        let succ_slots = successor_slots(m);
        quant_slots(QuantKind::Exists, m, &succ_slots, fresh, &mut |succ, _| {
            Expr::and_all(
                events
                    .iter()
                    .map(|(ev, slots)| subst_action(m, &ev.action, slots, scope, succ))
                    .collect(),
            )
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::load_source;
    use crate::dsl::printer::print_expr;

    const HEATER: &str = r#"
machine ht0
  var tn : { p, c }
  var temp : int[-20..80]

  init tn = p and temp = 20
  safety temp >= -20 and temp <= 80

  plant event plant_change_temp
    param dt : int[-15..15]
    guard true
    action tn' = p and temp' = temp + dt
  end

  ctrl event ctrl_heat
    param dh : int[0..60]
    guard tn = c and temp < 30
    action tn' = c and temp' = temp + dh
  end

  ctrl event ctrl_keep_safe
    param dt : int[-10..10]
    guard tn = c and temp >= 30 and temp <= 40
    action tn' = c and temp' = temp + dt
  end

  ctrl event ctrl_cool
    param dc : int[0..60]
    guard tn = c and temp > 40
    action tn' = c and temp' = temp - dc
  end
end

uncertainty eps0 for ht0
  perceives tn exactly
  perceives temp within 3
end
"#;

    fn heater() -> (Machine, UncertaintySpec) {
        let src = load_source(HEATER).expect("heater parses");
        (src.machines[0].clone(), src.uncertainties[0].clone())
    }

    #[test]
    fn fresh_names_avoid_bound_quantifier_vars() {
        let e = Expr::forall("~temp", Expr::int(0), Expr::int(1), Expr::bool(true));
        let mut fresh = FreshNames::avoiding([&e]);
        assert_eq!(fresh.fresh("temp"), "~temp_1");
        assert_eq!(fresh.fresh("temp"), "~temp_2");
        assert_eq!(fresh.fresh("tn"), "~tn");
    }

    #[test]
    fn reperception_text() {
        let (m, spec) = heater();
        let e = reperception_expr(&m, &spec);
        assert_eq!(
            print_expr(&e),
            "^tn' = tn' and (temp' - 3 <= ^temp' and ^temp' <= temp' + 3)"
        );
    }

    #[test]
    fn ball_forall_binds_hull_with_domain_guard() {
        let (m, spec) = heater();
        let mut fresh = FreshNames::avoiding([]);
        let e = ball_quant(QuantKind::Forall, &m, &spec, &mut fresh, |scope, _| {
            Expr::lt(scope.lookup(&m, "temp").unwrap(), Expr::int(30))
        });
        assert_eq!(
            print_expr(&e),
            "forall ~temp in [^temp - 3..^temp + 3] . \
             -20 <= ~temp and ~temp <= 80 => ~temp < 30"
        );
    }

    #[test]
    fn region_quantifies_real_params_only() {
        let (m, spec) = heater();
        let mut fresh = FreshNames::avoiding([]);
        let heat = m.controller_events()[0];
        let e = ball_quant(QuantKind::Exists, &m, &spec, &mut fresh, |scope, fresh| {
            region_expr(&m, heat, scope, fresh)
        });
        let text = print_expr(&e);
        assert!(text.starts_with("exists ~temp in [^temp - 3..^temp + 3] . "));
        assert!(text.contains("(exists ~dh in [0..60] . ^tn = c and ~temp < 30)"));
        assert!(!text.contains("bot"));
    }

    #[test]
    fn member_eps_is_guarded_by_region() {
        let (m, spec) = heater();
        let mut fresh = FreshNames::avoiding([]);
        let heat = m.controller_events()[0];
        let slots = vec![("dh".to_string(), Expr::var("dh"))];
        let e = member_eps_expr(&m, &spec, heat, &slots, &mut fresh);
        let text = print_expr(&e);
        // forall ball member: domain => region => guard-at-tuple
        assert!(text.starts_with("forall ~temp in [^temp - 3..^temp + 3] . "));
        assert!(text.contains("(exists ~dh in [0..60] . ^tn = c and ~temp < 30)"));
        assert!(text.ends_with("=> ^tn = c and ~temp < 30"));
    }

    #[test]
    fn enum_successor_slots_expand_to_finite_chains() {
        let (m, spec) = heater();
        let mut fresh = FreshNames::avoiding([]);
        let heat = m.controller_events()[0];
        let slots = vec![("dh".to_string(), Expr::var("dh"))];
        let e = member_safpar_expr(
            &m,
            &spec,
            heat,
            &slots,
            &m.safety,
            SafparMode::Formula,
            &mut fresh,
        );
        let text = print_expr(&e);
        // the tn successor slot is an enumeration: it shows up as an or/and
        // chain over p and c, not as a quantifier
        assert!(text.contains("p = c"));
        assert!(text.contains("c = c"));
        assert!(text.contains("exists ~temp_next in [-20..80]"));
        assert!(text.contains("forall ~temp_next"));
        assert!(!text.contains("~tn_next"));
    }
}
