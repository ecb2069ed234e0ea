//! State-space enumeration, uncertainty balls, and successor computation.
//!
//! The canonical state order is lexicographic by variable declaration order
//! (integer domains ascending, enumeration domains in declaration order).
//! Every state has a rank in `[0, size)` under that order; checks iterate by
//! rank so results and reported witnesses are deterministic regardless of
//! parallel scheduling.

use std::collections::BTreeSet;

use thiserror::Error;

use super::eval::{eval_bool, eval_value, EvalCtx, EvalError, EvalLimits};
use super::expr::{CmpOp, Expr, ExprKind};
use super::{Clause, ConstBinding, Domain, EventDef, Machine, State, UncertaintySpec, Value};

/// Default cap on the number of states a check is willing to enumerate.
pub const DEFAULT_STATE_CAP: u128 = 10_000_000;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ModelError {
    #[error("state space too large: {size} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { size: u128, cap: u128 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Values of a domain in canonical order.
pub fn domain_values(d: &Domain) -> Vec<Value> {
    match d {
        Domain::Int { lo, hi } => (*lo..=*hi).map(Value::Int).collect(),
        Domain::Enum(vs) => vs.iter().map(|&s| Value::Sym(s)).collect(),
    }
}

/// Values admitted for a parameter: its domain, then the `bot` sentinel for
/// lifted domains.
pub fn param_values(p: &super::ParamDecl) -> Vec<Value> {
    let mut vs = domain_values(&p.domain);
    if p.with_bot {
        vs.push(Value::Bot);
    }
    vs
}

/// Number of states in the machine's full variable product.
pub fn state_space_size(m: &Machine) -> u128 {
    m.vars.iter().map(|v| v.domain.size()).product()
}

/// Position of a value inside its domain's canonical order.
pub(crate) fn value_pos(d: &Domain, v: &Value) -> u128 {
    match (d, v) {
        (Domain::Int { lo, .. }, Value::Int(x)) => (*x as i128 - *lo as i128) as u128,
        (Domain::Enum(vs), Value::Sym(s)) => {
            vs.iter().position(|x| x == s).expect("value outside domain") as u128
        }
        _ => panic!("value kind does not match domain"),
    }
}

/// Rank of a state under the canonical order (first variable most
/// significant).
pub fn state_rank(m: &Machine, s: &State) -> u128 {
    let mut rank: u128 = 0;
    for (decl, v) in m.vars.iter().zip(&s.0) {
        rank = rank * decl.domain.size() + value_pos(&decl.domain, v);
    }
    rank
}

/// Inverse of [`state_rank`].
pub fn state_unrank(m: &Machine, mut rank: u128) -> State {
    let mut vals = vec![Value::Bot; m.vars.len()];
    for (i, decl) in m.vars.iter().enumerate().rev() {
        let size = decl.domain.size();
        let pos = (rank % size) as usize;
        rank /= size;
        vals[i] = match &decl.domain {
            Domain::Int { lo, .. } => Value::Int(lo + pos as i64),
            Domain::Enum(vs) => Value::Sym(vs[pos]),
        };
    }
    State(vals)
}

/// Iterator over all states in canonical order.
#[derive(Debug)]
pub struct StateIter<'m> {
    machine: &'m Machine,
    next: u128,
    size: u128,
}

impl Iterator for StateIter<'_> {
    type Item = State;

    fn next(&mut self) -> Option<State> {
        if self.next >= self.size {
            return None;
        }
        let s = state_unrank(self.machine, self.next);
        self.next += 1;
        Some(s)
    }
}

/// Enumerates all states, refusing state spaces beyond `cap`.
pub fn enumerate_states(m: &Machine, cap: u128) -> Result<StateIter<'_>, ModelError> {
    let size = state_space_size(m);
    if size > cap {
        return Err(ModelError::StateSpaceTooLarge { size, cap });
    }
    Ok(StateIter { machine: m, next: 0, size })
}

/// Odometer over per-slot candidate value lists.
pub struct Odometer<'a> {
    lists: &'a [Vec<Value>],
    idx: Vec<usize>,
    started: bool,
    exhausted: bool,
}

impl<'a> Odometer<'a> {
    pub fn new(lists: &'a [Vec<Value>]) -> Self {
        let exhausted = lists.iter().any(|l| l.is_empty());
        Odometer { lists, idx: vec![0; lists.len()], started: false, exhausted }
    }

    /// Advances to the next combination, writing it into `buf`.
    /// Returns false when exhausted. An empty list set yields one empty
    /// combination.
    pub fn next_into(&mut self, buf: &mut Vec<Value>) -> bool {
        if self.exhausted {
            return false;
        }
        if self.started {
            let mut k = self.lists.len();
            loop {
                if k == 0 {
                    self.exhausted = true;
                    return false;
                }
                k -= 1;
                self.idx[k] += 1;
                if self.idx[k] < self.lists[k].len() {
                    break;
                }
                self.idx[k] = 0;
            }
        }
        self.started = true;
        buf.clear();
        buf.extend(self.idx.iter().zip(self.lists).map(|(&i, l)| l[i]));
        true
    }
}

/// Number of parameter combinations of an event.
pub fn param_tuple_count(ev: &EventDef) -> u128 {
    ev.params
        .iter()
        .map(|p| p.domain.size() + if p.with_bot { 1 } else { 0 })
        .product()
}

/// The set of true states consistent with perceiving `perceived`:
/// per-variable clauses (exact, or within a radius clipped to the declared
/// domain) intersected with the optional general relation. The perceived
/// state itself is always a member for well-formed descriptions.
pub fn ball(
    m: &Machine,
    spec: &UncertaintySpec,
    perceived: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<Vec<State>, EvalError> {
    let mut lists: Vec<Vec<Value>> = Vec::with_capacity(m.vars.len());
    for (i, decl) in m.vars.iter().enumerate() {
        let v = perceived.0[i];
        match spec.clause_for(&decl.name) {
            Clause::Exact => lists.push(vec![v]),
            Clause::Within(r) => {
                let r = r.resolve(consts)?;
                if r < 0 {
                    return Err(EvalError::Type {
                        context: format!("negative radius for `{}`", decl.name),
                    });
                }
                match (&decl.domain, v) {
                    (Domain::Int { lo, hi }, Value::Int(x)) => {
                        let a = (x.saturating_sub(r)).max(*lo);
                        let b = (x.saturating_add(r)).min(*hi);
                        lists.push((a..=b).map(Value::Int).collect());
                    }
                    _ => {
                        return Err(EvalError::Type {
                            context: format!("`within` clause on non-integer variable `{}`", decl.name),
                        })
                    }
                }
            }
        }
    }

    let hat_names: Vec<String> = m.vars.iter().map(|v| super::hat_name(&v.name)).collect();
    let extra: Vec<(&str, Value)> = hat_names
        .iter()
        .zip(&perceived.0)
        .map(|(n, &v)| (n.as_str(), v))
        .collect();

    let mut out = Vec::new();
    let mut odo = Odometer::new(&lists);
    let mut buf = Vec::new();
    while odo.next_into(&mut buf) {
        let candidate = State(buf.clone());
        if let Some(rel) = &spec.relation {
            let mut ctx = EvalCtx::new(m, consts).with_state(&candidate).with_extra(&extra);
            ctx.limits = limits;
            if !eval_bool(&mut ctx, rel)? {
                continue;
            }
        }
        out.push(candidate);
    }
    Ok(out)
}

/// Precomputed execution strategy for an event action.
///
/// The action is split at top-level disjunctions into branches; within a
/// branch, conjuncts of the form `v' = e` become direct assignments (when `e`
/// mentions only already-assigned primed variables), conjuncts bounding an
/// unassigned primed integer variable become interval constraints, and
/// everything else is re-checked against each candidate post-state. Branches
/// that assign a value outside the declared domain produce no successors, so
/// the post-state always lies in the variable product.
#[derive(Debug, Clone)]
pub struct ActionPlan {
    branches: Vec<Branch>,
}

#[derive(Debug, Clone)]
struct Branch {
    assigns: Vec<(usize, Expr)>,
    lowers: Vec<(usize, Expr, bool)>,
    uppers: Vec<(usize, Expr, bool)>,
    residual: Vec<Expr>,
    open_slots: Vec<usize>,
}

fn primed_refs_within(e: &Expr, m: &Machine, assigned: &[bool]) -> bool {
    let mut ok = true;
    e.for_each_free_ref(&mut |name, primed| {
        if primed {
            match m.var_index(name) {
                Some(i) => ok &= assigned[i],
                None => ok = false,
            }
        }
    });
    ok
}

impl ActionPlan {
    pub fn build(m: &Machine, ev: &EventDef) -> ActionPlan {
        let branches = ev
            .action
            .disjuncts()
            .into_iter()
            .map(|branch| Self::build_branch(m, branch))
            .collect();
        ActionPlan { branches }
    }

    fn build_branch(m: &Machine, branch: &Expr) -> Branch {
        let conjuncts = branch.conjuncts();
        let mut assigned = vec![false; m.vars.len()];
        let mut taken = vec![false; conjuncts.len()];
        let mut assigns = Vec::new();

        // Assignment extraction to a fixpoint, so `v' = w' + 1` can follow
        // `w' = e`.
        loop {
            let mut progressed = false;
            for (ci, c) in conjuncts.iter().enumerate() {
                if taken[ci] {
                    continue;
                }
                if let ExprKind::Cmp(CmpOp::Eq, a, b) = &c.kind {
                    let target = |side: &Expr, other: &Expr| -> Option<(usize, Expr)> {
                        if let ExprKind::Ref { name, primed: true } = &side.kind {
                            let i = m.var_index(name)?;
                            if !assigned[i] && primed_refs_within(other, m, &assigned) {
                                return Some((i, other.clone()));
                            }
                        }
                        None
                    };
                    if let Some((i, rhs)) = target(a, b).or_else(|| target(b, a)) {
                        assigned[i] = true;
                        taken[ci] = true;
                        assigns.push((i, rhs));
                        progressed = true;
                    }
                }
            }
            if !progressed {
                break;
            }
        }

        let mut lowers = Vec::new();
        let mut uppers = Vec::new();
        let mut residual = Vec::new();
        for (ci, c) in conjuncts.iter().enumerate() {
            if taken[ci] {
                continue;
            }
            let mut classified = false;
            if let ExprKind::Cmp(op @ (CmpOp::Le | CmpOp::Lt), a, b) = &c.kind {
                let inclusive = *op == CmpOp::Le;
                // v' <= e  (upper) or e <= v' (lower) on an unassigned
                // integer slot, with e free of unassigned primed refs.
                if let ExprKind::Ref { name, primed: true } = &a.kind {
                    if let Some(i) = m.var_index(name) {
                        if !assigned[i]
                            && matches!(m.vars[i].domain, Domain::Int { .. })
                            && primed_refs_within(b, m, &assigned)
                        {
                            uppers.push((i, (**b).clone(), inclusive));
                            classified = true;
                        }
                    }
                }
                if !classified {
                    if let ExprKind::Ref { name, primed: true } = &b.kind {
                        if let Some(i) = m.var_index(name) {
                            if !assigned[i]
                                && matches!(m.vars[i].domain, Domain::Int { .. })
                                && primed_refs_within(a, m, &assigned)
                            {
                                lowers.push((i, (**a).clone(), inclusive));
                                classified = true;
                            }
                        }
                    }
                }
            }
            if !classified {
                residual.push((*c).clone());
            }
        }

        let open_slots = (0..m.vars.len()).filter(|&i| !assigned[i]).collect();
        Branch { assigns, lowers, uppers, residual, open_slots }
    }

    /// Computes the post-states of one branch-execution for `(state, params)`,
    /// appending them to `out`.
    pub fn run(
        &self,
        m: &Machine,
        state: &State,
        params: &[(&str, Value)],
        consts: &ConstBinding,
        limits: EvalLimits,
        out: &mut BTreeSet<State>,
    ) -> Result<(), EvalError> {
        'branches: for br in &self.branches {
            // Seed the candidate with domain minima; assignment order
            // guarantees bound/assign expressions only read assigned slots.
            let mut candidate = State(
                m.vars
                    .iter()
                    .map(|v| match &v.domain {
                        Domain::Int { lo, .. } => Value::Int(*lo),
                        Domain::Enum(vs) => Value::Sym(vs[0]),
                    })
                    .collect(),
            );
            for (slot, rhs) in &br.assigns {
                let mut ctx = EvalCtx::new(m, consts)
                    .with_state(state)
                    .with_primed(&candidate)
                    .with_params(params);
                ctx.limits = limits;
                let v = match eval_value(&mut ctx, rhs) {
                    Ok(v) => v,
                    Err(EvalError::BotArith) => continue 'branches,
                    Err(e) => return Err(e),
                };
                if !m.vars[*slot].domain.contains(&v) {
                    continue 'branches;
                }
                candidate.0[*slot] = v;
            }

            // Interval-narrow the open integer slots.
            let mut lists: Vec<Vec<Value>> = Vec::with_capacity(br.open_slots.len());
            for &slot in &br.open_slots {
                match &m.vars[slot].domain {
                    Domain::Enum(vs) => lists.push(vs.iter().map(|&s| Value::Sym(s)).collect()),
                    Domain::Int { lo, hi } => {
                        let (mut a, mut b) = (*lo, *hi);
                        for (_, e, inclusive) in br.lowers.iter().filter(|(s2, _, _)| *s2 == slot) {
                            let mut ctx = EvalCtx::new(m, consts)
                                .with_state(state)
                                .with_primed(&candidate)
                                .with_params(params);
                            ctx.limits = limits;
                            match eval_value(&mut ctx, e) {
                                Ok(Value::Int(v)) => {
                                    a = a.max(if *inclusive { v } else { v.saturating_add(1) })
                                }
                                Ok(_) => {
                                    return Err(EvalError::Type {
                                        context: "action bound".to_string(),
                                    })
                                }
                                Err(EvalError::BotArith) => continue 'branches,
                                Err(e) => return Err(e),
                            }
                        }
                        for (_, e, inclusive) in br.uppers.iter().filter(|(s2, _, _)| *s2 == slot) {
                            let mut ctx = EvalCtx::new(m, consts)
                                .with_state(state)
                                .with_primed(&candidate)
                                .with_params(params);
                            ctx.limits = limits;
                            match eval_value(&mut ctx, e) {
                                Ok(Value::Int(v)) => {
                                    b = b.min(if *inclusive { v } else { v.saturating_sub(1) })
                                }
                                Ok(_) => {
                                    return Err(EvalError::Type {
                                        context: "action bound".to_string(),
                                    })
                                }
                                Err(EvalError::BotArith) => continue 'branches,
                                Err(e) => return Err(e),
                            }
                        }
                        lists.push((a..=b).map(Value::Int).collect());
                    }
                }
            }

            let mut odo = Odometer::new(&lists);
            let mut buf = Vec::new();
            while odo.next_into(&mut buf) {
                for (k, &slot) in br.open_slots.iter().enumerate() {
                    candidate.0[slot] = buf[k];
                }
                let mut ok = true;
                for r in &br.residual {
                    let mut ctx = EvalCtx::new(m, consts)
                        .with_state(state)
                        .with_primed(&candidate)
                        .with_params(params);
                    ctx.limits = limits;
                    match eval_bool(&mut ctx, r) {
                        Ok(true) => {}
                        Ok(false) | Err(EvalError::BotArith) => {
                            ok = false;
                            break;
                        }
                        Err(e) => return Err(e),
                    }
                }
                if ok {
                    out.insert(candidate.clone());
                }
            }
        }
        Ok(())
    }
}

/// Binds parameter names to tuple values for evaluation.
pub fn bind_params<'a>(ev: &'a EventDef, tuple: &[Value]) -> Vec<(&'a str, Value)> {
    ev.params
        .iter()
        .zip(tuple)
        .map(|(p, &v)| (p.name.as_str(), v))
        .collect()
}

/// All post-states of `state` across every event and parameter combination
/// whose guard holds.
pub fn successors(
    m: &Machine,
    state: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<BTreeSet<State>, EvalError> {
    let mut out = BTreeSet::new();
    for ev in &m.events {
        let plan = ActionPlan::build(m, ev);
        let lists: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();
        let mut odo = Odometer::new(&lists);
        let mut tuple = Vec::new();
        while odo.next_into(&mut tuple) {
            let params = bind_params(ev, &tuple);
            let mut ctx = EvalCtx::new(m, consts).with_state(state).with_params(&params);
            ctx.limits = limits;
            if eval_bool(&mut ctx, &ev.guard)? {
                plan.run(m, state, &params, consts, limits, &mut out)?;
            }
        }
    }
    Ok(out)
}

/// 1-based indices of the controller events enabled at `state` (an event is
/// enabled when some parameter combination satisfies its guard).
pub fn enabled_controller_events(
    m: &Machine,
    state: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<Vec<usize>, EvalError> {
    let mut out = Vec::new();
    for (i, ev) in m.controller_events().into_iter().enumerate() {
        let lists: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();
        let mut odo = Odometer::new(&lists);
        let mut tuple = Vec::new();
        let mut enabled = false;
        while odo.next_into(&mut tuple) {
            let params = bind_params(ev, &tuple);
            let mut ctx = EvalCtx::new(m, consts).with_state(state).with_params(&params);
            ctx.limits = limits;
            if eval_bool(&mut ctx, &ev.guard)? {
                enabled = true;
                break;
            }
        }
        if enabled {
            out.push(i + 1);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::expr::Span;
    use crate::model::{EventKind, ParamDecl, Radius, VarDecl};

    fn heater_like() -> Machine {
        let mut symbols = super::super::SymbolTable::new();
        let p = symbols.intern("p");
        let c = symbols.intern("c");
        Machine {
            name: "m".into(),
            vars: vec![
                VarDecl { name: "tn".into(), domain: Domain::Enum(vec![p, c]), span: Span::SYNTH },
                VarDecl { name: "temp".into(), domain: Domain::Int { lo: -20, hi: 80 }, span: Span::SYNTH },
            ],
            consts: vec![],
            init: Expr::bool(true),
            safety: Expr::bool(true),
            uncertain: None,
            events: vec![EventDef {
                kind: EventKind::Ctrl,
                name: "ctrl_heat".into(),
                params: vec![ParamDecl {
                    name: "dh".into(),
                    domain: Domain::Int { lo: 0, hi: 60 },
                    with_bot: false,
                    span: Span::SYNTH,
                }],
                guard: Expr::and_all(vec![
                    Expr::lt(Expr::var("temp"), Expr::int(30)),
                    Expr::le(Expr::int(30), Expr::add(Expr::var("temp"), Expr::var("dh"))),
                    Expr::le(Expr::add(Expr::var("temp"), Expr::var("dh")), Expr::int(40)),
                ]),
                action: Expr::and(
                    Expr::eq(Expr::primed("tn"), Expr::var("c")),
                    Expr::eq(Expr::primed("temp"), Expr::add(Expr::var("temp"), Expr::var("dh"))),
                ),
                span: Span::SYNTH,
            }],
            symbols,
        }
    }

    #[test]
    fn state_space_size_and_order() {
        let m = heater_like();
        assert_eq!(state_space_size(&m), 202);
        let states: Vec<State> = enumerate_states(&m, DEFAULT_STATE_CAP).unwrap().collect();
        assert_eq!(states.len(), 202);
        // First states: tn=p (declared first), temp ascending.
        assert_eq!(states[0], State(vec![Value::Sym(0), Value::Int(-20)]));
        assert_eq!(states[1], State(vec![Value::Sym(0), Value::Int(-19)]));
        assert_eq!(states[101], State(vec![Value::Sym(1), Value::Int(-20)]));
        for (i, s) in states.iter().enumerate() {
            assert_eq!(state_rank(&m, s), i as u128);
            assert_eq!(&state_unrank(&m, i as u128), s);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let m = heater_like();
        match enumerate_states(&m, 100) {
            Err(ModelError::StateSpaceTooLarge { size: 202, cap: 100 }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn ball_clips_to_domain() {
        let m = heater_like();
        let spec = UncertaintySpec {
            name: "eps".into(),
            machine: "m".into(),
            consts: vec![],
            clauses: vec![
                ("tn".into(), Clause::Exact),
                ("temp".into(), Clause::Within(Radius::Lit(3))),
            ],
            relation: None,
            span: Span::SYNTH,
        };
        let consts = ConstBinding::new();
        let perceived = State(vec![Value::Sym(1), Value::Int(-19)]);
        let b = ball(&m, &spec, &perceived, &consts, EvalLimits::default()).unwrap();
        let temps: Vec<i64> = b
            .iter()
            .map(|s| match s.0[1] {
                Value::Int(t) => t,
                _ => unreachable!(),
            })
            .collect();
        assert_eq!(temps, vec![-20, -19, -18, -17, -16]);
        assert!(b.iter().all(|s| s.0[0] == Value::Sym(1)));
    }

    #[test]
    fn successors_respect_guard_and_domain() {
        let m = heater_like();
        let consts = ConstBinding::new();
        let s = State(vec![Value::Sym(0), Value::Int(29)]);
        let succ = successors(&m, &s, &consts, EvalLimits::default()).unwrap();
        // dh in [1..11] -> temp' in [30..40], tn'=c.
        assert_eq!(succ.len(), 11);
        assert!(succ.contains(&State(vec![Value::Sym(1), Value::Int(30)])));
        assert!(succ.contains(&State(vec![Value::Sym(1), Value::Int(40)])));
        assert!(!succ.contains(&State(vec![Value::Sym(1), Value::Int(41)])));

        // Guard disabled above 30.
        let s = State(vec![Value::Sym(0), Value::Int(35)]);
        assert!(successors(&m, &s, &consts, EvalLimits::default()).unwrap().is_empty());
    }

    #[test]
    fn enabled_events_are_one_based() {
        let m = heater_like();
        let consts = ConstBinding::new();
        let s = State(vec![Value::Sym(0), Value::Int(25)]);
        assert_eq!(enabled_controller_events(&m, &s, &consts, EvalLimits::default()).unwrap(), vec![1]);
        let s = State(vec![Value::Sym(0), Value::Int(35)]);
        assert!(enabled_controller_events(&m, &s, &consts, EvalLimits::default()).unwrap().is_empty());
    }

    #[test]
    fn relational_bound_extraction() {
        // action: tn' = c and temp' = temp and ^temp-ish bounds via residual:
        // model a paired-style bound: x' between temp-1 and temp+1 with an
        // extra residual inequality.
        let mut symbols = super::super::SymbolTable::new();
        let _ = symbols.intern("p");
        let m = Machine {
            name: "b".into(),
            vars: vec![
                VarDecl { name: "x".into(), domain: Domain::Int { lo: 0, hi: 10 }, span: Span::SYNTH },
                VarDecl { name: "y".into(), domain: Domain::Int { lo: 0, hi: 10 }, span: Span::SYNTH },
            ],
            consts: vec![],
            init: Expr::bool(true),
            safety: Expr::bool(true),
            uncertain: None,
            events: vec![EventDef {
                kind: EventKind::Ctrl,
                name: "step".into(),
                params: vec![],
                guard: Expr::bool(true),
                action: Expr::and_all(vec![
                    Expr::eq(Expr::primed("x"), Expr::add(Expr::var("x"), Expr::int(1))),
                    Expr::le(Expr::sub(Expr::primed("x"), Expr::int(1)), Expr::primed("y")),
                    Expr::le(Expr::primed("y"), Expr::add(Expr::primed("x"), Expr::int(1))),
                    Expr::ne(Expr::primed("y"), Expr::primed("x")),
                ]),
                span: Span::SYNTH,
            }],
            symbols,
        };
        let consts = ConstBinding::new();
        let s = State(vec![Value::Int(4), Value::Int(0)]);
        let succ = successors(&m, &s, &consts, EvalLimits::default()).unwrap();
        // x'=5, y' in [4..6] minus y'=5.
        let expected: BTreeSet<State> = [
            State(vec![Value::Int(5), Value::Int(4)]),
            State(vec![Value::Int(5), Value::Int(6)]),
        ]
        .into_iter()
        .collect();
        assert_eq!(succ, expected);
    }
}
