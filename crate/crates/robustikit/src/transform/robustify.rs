//! Controller robustification: replaces the controller events of a paired
//! machine with heterogeneous events, one per subset of controller indices.
//!
//! Each heterogeneous event `E_u` fires exactly at perceptions whose
//! compartment — the set of controller indices enabled somewhere in the
//! ball — is `u`. Its parameters are the source events' parameters, lifted
//! with the "no parameter" value `bot`; its guard has three conjunct groups:
//!
//! 1. compartment pinning: for every controller index, the ball does (for
//!    members of `u`) or does not (for the rest) contain a state where that
//!    event's guard is satisfiable;
//! 2. per source event, either all of its slots carry real values admitted
//!    by the event's robust (action-preserving) or safe (action-repurposing)
//!    parameter set, or all of them are `bot` because that set is empty;
//! 3. action-preserving: every slot is real and the instantiated source
//!    actions share a successor at every ball member; action-repurposing: at
//!    least one slot group is real.
//!
//! The action either conjoins all source actions (preserving — the step is
//! one every source event could take) or fires exactly the source actions
//! whose slots are real (repurposing). Either way the re-perception
//! constraint of the paired machine is kept, so the perceived copies stay
//! consistent after the step.
//!
//! Subsets whose compartment no perception realizes yield events that can
//! never fire; they are pruned by default and reported.

use std::collections::BTreeSet;

use serde::Serialize;

use super::conditions::{compartment_table, preserving_condition, repurposing_condition};
use super::emit::{
    ball_quant, exists_real_tuple, joint_step_expr, member_eps_expr, member_safpar_expr,
    region_expr, reperception_expr, FreshNames,
};
use super::{PairedMachine, TransformError};
use crate::analysis::checks::{CheckOptions, CheckReport};
use crate::analysis::funcs::SafparMode;
use crate::model::{
    ConstBinding, Domain, EventDef, EventKind, Expr, Machine, ParamDecl, QuantKind, Span,
    UncertaintySpec,
};

/// Which heterogeneous-event construction to synthesize.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RobustMethod {
    /// Keep the source actions: the heterogeneous action is their
    /// conjunction, so every robust step is a step of the plain machine.
    Preserving,
    /// Repurpose the source actions: fire those whose parameters are proven
    /// safe for every state in the ball, regardless of their home region.
    Repurposing,
}

impl RobustMethod {
    /// Machine-name suffix for the construction.
    pub fn suffix(self) -> &'static str {
        match self {
            RobustMethod::Preserving => "pr",
            RobustMethod::Repurposing => "rr",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RobustifyOptions {
    /// Drop heterogeneous events whose compartment no perception realizes.
    pub prune: bool,
    /// Safe-parameter reading used by the repurposing construction.
    pub safpar_mode: SafparMode,
    pub check: CheckOptions,
}

impl Default for RobustifyOptions {
    fn default() -> Self {
        RobustifyOptions {
            prune: true,
            safpar_mode: SafparMode::Formula,
            check: CheckOptions::default(),
        }
    }
}

/// Result of one robustification: the usability report for the chosen
/// construction, the synthesized machine (only when the condition holds),
/// and the draft machine regardless, for inspection of the synthesized
/// events even when the construction is not usable everywhere.
#[derive(Debug, Clone)]
pub struct RobustifyOutcome {
    pub method: RobustMethod,
    /// The construction's usability condition, checked over every perceived
    /// state.
    pub condition: CheckReport,
    /// The robustified machine; `Some` exactly when `condition` holds.
    pub machine: Option<Machine>,
    /// The synthesized machine whether or not the condition holds.
    pub draft: Machine,
    /// Retained subsets with their event names, in subset order.
    pub retained: Vec<(Vec<usize>, String)>,
    /// Pruned subsets with the event names they would have had.
    pub pruned: Vec<(Vec<usize>, String)>,
}

/// One source controller event inside a heterogeneous event: its renamed
/// parameter slots, or a synthetic marker slot when it has no parameters
/// (so the "fires or not" choice stays representable).
struct SlotGroup<'a> {
    ev: &'a EventDef,
    slots: Vec<ParamDecl>,
    marker: bool,
}

impl SlotGroup<'_> {
    /// Pairs of (source parameter name, slot reference) for substitution
    /// into the source guard or action; empty for marker groups.
    fn slot_pairs(&self) -> Vec<(String, Expr)> {
        if self.marker {
            return Vec::new();
        }
        self.ev
            .params
            .iter()
            .zip(&self.slots)
            .map(|(p, s)| (p.name.clone(), Expr::var(&s.name)))
            .collect()
    }
}

/// Builds the robustified machine for the paired machine `pm`: checks the
/// construction's usability condition, synthesizes one heterogeneous event
/// per (realized, unless pruning is off) controller-index subset, and keeps
/// the paired machine's plant events, variables, and invariants.
pub fn robustify(
    pm: &PairedMachine,
    method: RobustMethod,
    consts: &ConstBinding,
    opts: &RobustifyOptions,
) -> Result<RobustifyOutcome, TransformError> {
    let m = &pm.original;
    let spec = &pm.spec;
    let ctrl = m.controller_events();

    let condition = match method {
        RobustMethod::Preserving => preserving_condition(m, spec, consts, &opts.check)?,
        RobustMethod::Repurposing => {
            repurposing_condition(m, spec, consts, &opts.check, opts.safpar_mode)?
        }
    };

    let realized: BTreeSet<Vec<usize>> =
        compartment_table(m, spec, consts, &opts.check)?.into_keys().collect();

    // Names that must survive into the draft: plant events are kept as-is.
    let mut taken_names: BTreeSet<String> = pm
        .machine
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Plant)
        .map(|e| e.name.clone())
        .collect();

    let mut retained = Vec::new();
    let mut pruned = Vec::new();
    let mut hetero: Vec<EventDef> = Vec::new();
    for u in subsets_lex(ctrl.len()) {
        // Names are assigned to every subset in subset order, so they do not
        // depend on what pruning keeps.
        let mut name = hetero_base_name(&u.iter().map(|&i| ctrl[i - 1].name.as_str()).collect::<Vec<_>>());
        while taken_names.contains(&name) {
            name.push('_');
        }
        taken_names.insert(name.clone());

        if opts.prune && !realized.contains(&u) {
            pruned.push((u, name));
            continue;
        }

        let groups = slot_groups(pm, &ctrl, &u);
        let guard = hetero_guard(m, spec, &ctrl, &u, &groups, method, opts.safpar_mode);
        let action = hetero_action(m, spec, &groups, method);
        hetero.push(EventDef {
            kind: EventKind::Ctrl,
            name: name.clone(),
            params: groups.into_iter().flat_map(|g| g.slots).collect(),
            guard,
            action,
            span: Span::SYNTH,
        });
        retained.push((u, name));
    }

    let mut events: Vec<EventDef> = pm
        .machine
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Plant)
        .cloned()
        .collect();
    events.extend(hetero);

    let draft = Machine {
        name: format!("{}_{}", pm.machine.name, method.suffix()),
        vars: pm.machine.vars.clone(),
        consts: pm.machine.consts.clone(),
        init: pm.machine.init.clone(),
        safety: pm.machine.safety.clone(),
        uncertain: pm.machine.uncertain.clone(),
        events,
        symbols: pm.machine.symbols.clone(),
    };

    let machine = condition.verdict.holds().then(|| draft.clone());
    Ok(RobustifyOutcome { method, condition, machine, draft, retained, pruned })
}

/// Nonempty subsets of `1..=n` in lexicographic order of their ascending
/// index vectors.
fn subsets_lex(n: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        for i in start..=n {
            cur.push(i);
            out.push(cur.clone());
            go(i + 1, n, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(1, n, &mut Vec::new(), &mut out);
    out
}

/// Joins the source event names (sorted) into the heterogeneous event name,
/// deduplicating the shared prefix of adjacent names at an underscore
/// boundary: `ctrl_heat` + `ctrl_keep_safe` → `ctrl_heat_keep_safe_hetero`.
fn hetero_base_name(sources: &[&str]) -> String {
    let mut sorted = sources.to_vec();
    sorted.sort_unstable();
    let mut out = String::from(sorted[0]);
    for w in sorted.windows(2) {
        let common = w[0]
            .bytes()
            .zip(w[1].bytes())
            .take_while(|(a, b)| a == b)
            .count();
        let cut = match w[0][..common].rfind('_') {
            Some(k) => k + 1,
            None => 0,
        };
        out.push('_');
        out.push_str(&w[1][cut..]);
    }
    out.push_str("_hetero");
    out
}

/// Allocates the parameter slots of a heterogeneous event for subset `u`:
/// source parameter names are kept when unambiguous, suffixed with the
/// source's controller index when shared or shadowing a variable, constant,
/// or symbol, and trailing-underscored as a last resort. Parameter-less
/// source events get a synthetic always-1 marker slot. All slots are lifted
/// with `bot`.
fn slot_groups<'a>(
    pm: &PairedMachine,
    ctrl: &[&'a EventDef],
    u: &[usize],
) -> Vec<SlotGroup<'a>> {
    let mut reserved: BTreeSet<String> = BTreeSet::new();
    for v in &pm.machine.vars {
        reserved.insert(v.name.clone());
    }
    for c in &pm.machine.consts {
        reserved.insert(c.name.clone());
    }
    for id in 0..pm.machine.symbols.len() as u32 {
        reserved.insert(pm.machine.symbols.name(id).to_string());
    }

    // Raw name per slot, marker slots included, to find cross-event shares.
    let raw: Vec<(usize, Vec<String>)> = u
        .iter()
        .map(|&i| {
            let ev = ctrl[i - 1];
            let names = if ev.params.is_empty() {
                vec![format!("go_i{i}")]
            } else {
                ev.params.iter().map(|p| p.name.clone()).collect()
            };
            (i, names)
        })
        .collect();
    let mut counts: std::collections::BTreeMap<&str, usize> = Default::default();
    for (_, names) in &raw {
        for n in names {
            *counts.entry(n.as_str()).or_default() += 1;
        }
    }

    let mut used = reserved.clone();
    let mut groups = Vec::new();
    for (i, names) in &raw {
        let ev = ctrl[i - 1];
        let marker = ev.params.is_empty();
        let mut slots = Vec::new();
        for (k, n) in names.iter().enumerate() {
            let mut name = if counts[n.as_str()] > 1 || reserved.contains(n) {
                format!("{n}_i{i}")
            } else {
                n.clone()
            };
            while used.contains(&name) {
                name.push('_');
            }
            used.insert(name.clone());
            let domain = if marker {
                Domain::Int { lo: 1, hi: 1 }
            } else {
                ev.params[k].domain.clone()
            };
            slots.push(ParamDecl { name, domain, with_bot: true, span: Span::SYNTH });
        }
        groups.push(SlotGroup { ev, slots, marker });
    }
    groups
}

fn hetero_guard(
    m: &Machine,
    spec: &UncertaintySpec,
    ctrl: &[&EventDef],
    u: &[usize],
    groups: &[SlotGroup<'_>],
    method: RobustMethod,
    mode: SafparMode,
) -> Expr {
    let mut seeds: Vec<&Expr> = Vec::new();
    for ev in ctrl {
        seeds.push(&ev.guard);
        seeds.push(&ev.action);
    }
    seeds.push(&m.safety);
    if let Some(rel) = &spec.relation {
        seeds.push(rel);
    }
    let fresh = || FreshNames::avoiding(seeds.iter().copied());

    let member = |g: &SlotGroup<'_>, pairs: &[(String, Expr)], fr: &mut FreshNames| match method {
        RobustMethod::Preserving => member_eps_expr(m, spec, g.ev, pairs, fr),
        RobustMethod::Repurposing => {
            member_safpar_expr(m, spec, g.ev, pairs, &m.safety, mode, fr)
        }
    };

    let mut conjuncts = Vec::new();

    // 1. the ball's compartment is exactly `u`
    for (j, ev) in ctrl.iter().enumerate() {
        let mut fr = fresh();
        let e = if u.contains(&(j + 1)) {
            ball_quant(QuantKind::Exists, m, spec, &mut fr, |scope, fr| {
                region_expr(m, ev, scope, fr)
            })
        } else {
            ball_quant(QuantKind::Forall, m, spec, &mut fr, |scope, fr| {
                Expr::not(region_expr(m, ev, scope, fr))
            })
        };
        conjuncts.push(e);
    }

    // 2. per source event: real admitted slots, or all-bot when nothing is
    //    admitted
    for g in groups {
        let mut fr = fresh();
        let with_slots = member(g, &g.slot_pairs(), &mut fr);
        let all_real = Expr::and_all(
            g.slots.iter().map(|s| Expr::ne(Expr::var(&s.name), Expr::bot())).collect(),
        );
        let all_bot = Expr::and_all(
            g.slots.iter().map(|s| Expr::eq(Expr::var(&s.name), Expr::bot())).collect(),
        );
        let mut fr = fresh();
        let none_admitted = Expr::not(exists_real_tuple(m, g.ev, &mut fr, &mut |pairs, fr| {
            member(g, pairs, fr)
        }));
        conjuncts.push(Expr::or(
            Expr::and(all_real, with_slots),
            Expr::and(all_bot, none_admitted),
        ));
    }

    // 3. the construction's firing requirement
    match method {
        RobustMethod::Preserving => {
            for g in groups {
                for s in &g.slots {
                    conjuncts.push(Expr::ne(Expr::var(&s.name), Expr::bot()));
                }
            }
            let events: Vec<(&EventDef, Vec<(String, Expr)>)> =
                groups.iter().map(|g| (g.ev, g.slot_pairs())).collect();
            let mut fr = fresh();
            conjuncts.push(joint_step_expr(m, spec, &events, &mut fr));
        }
        RobustMethod::Repurposing => {
            conjuncts.push(Expr::or_all(
                groups
                    .iter()
                    .map(|g| Expr::ne(Expr::var(&g.slots[0].name), Expr::bot()))
                    .collect(),
            ));
        }
    }

    Expr::and_all(conjuncts).simplify()
}

fn hetero_action(
    m: &Machine,
    spec: &UncertaintySpec,
    groups: &[SlotGroup<'_>],
    method: RobustMethod,
) -> Expr {
    let rep = reperception_expr(m, spec);
    let instantiated = |g: &SlotGroup<'_>| {
        let pairs = g.slot_pairs();
        g.ev.action.subst(&|name, primed| {
            if primed {
                return None;
            }
            pairs.iter().find(|(n, _)| n == name).map(|(_, e)| e.clone())
        })
    };
    match method {
        RobustMethod::Preserving => {
            let mut parts: Vec<Expr> = groups.iter().map(instantiated).collect();
            parts.push(rep);
            Expr::and_all(parts).simplify()
        }
        RobustMethod::Repurposing => Expr::or_all(
            groups
                .iter()
                .map(|g| {
                    Expr::and_all(vec![
                        Expr::ne(Expr::var(&g.slots[0].name), Expr::bot()),
                        instantiated(g),
                        rep.clone(),
                    ])
                })
                .collect(),
        )
        .simplify(),
    }
}
