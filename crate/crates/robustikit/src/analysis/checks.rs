//! Exhaustive property checks over the full state space, each producing a
//! structured report with a verdict, counterexample witnesses, and
//! deterministic statistics.
//!
//! Every check scans the complete domain product (never just the reachable
//! fragment), so verdicts and witness sets are independent of exploration
//! order. Scans run in parallel; witnesses are ranked by
//! (state, event, parameter tuple, successor) position in the canonical
//! enumeration order and the reported first witness is the least-ranked one,
//! making parallel and sequential runs indistinguishable.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use super::funcs::guard_holds;
use crate::model::enumerate::{bind_params, param_values, value_pos, ActionPlan, ModelError};
use crate::model::{
    eval_bool, state_rank, state_space_size, state_unrank, successors, ConstBinding, Domain,
    EvalCtx, EvalError, EvalLimits, EventDef, EventKind, Expr, Machine, State, SymbolTable,
    UncertaintySpec, Value, DEFAULT_STATE_CAP,
};

#[derive(Debug, Error)]
pub enum CheckError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("machine `{robust}` has no variable `{var}` matching machine `{original}`")]
    MissingVar {
        robust: String,
        original: String,
        var: String,
    },
    #[error("variable `{var}` has different domains in `{robust}` and `{original}`")]
    DomainMismatch {
        robust: String,
        original: String,
        var: String,
    },
}

/// How many counterexamples a check should report: just the least-ranked
/// one, or every violation found.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessPolicy {
    First,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Fails,
    Unknown { reason: String },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Verdict::Holds)
    }
}

/// One counterexample. `state`/`successor` carry the plain variables;
/// machines with perceived copies (`^v`) get those split into the
/// `perceived`/`successor_perceived` maps with the marker stripped.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub state: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub perceived: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub event: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub successor: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub successor_perceived: Option<BTreeMap<String, String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub indices: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Witness {
    pub(crate) fn at(m: &Machine, s: &State) -> Witness {
        let (state, perceived) = split_state(m, s);
        Witness {
            state,
            perceived,
            event: None,
            params: None,
            successor: None,
            successor_perceived: None,
            indices: None,
            note: None,
        }
    }
}

/// Deterministic scan statistics: identical on every run of the same check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckStats {
    pub states_visited: u64,
    pub violations: u64,
}

/// Wall-clock measurements; everything volatile lives under this key so
/// consumers can strip it when comparing reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub kind: String,
    pub machine: String,
    pub verdict: Verdict,
    pub witnesses: Vec<Witness>,
    pub stats: CheckStats,
    pub timing: Timing,
}

impl CheckReport {
    pub(crate) fn new(kind: &str, machine: &str, n: u64, sink: Sink, start: Instant) -> CheckReport {
        let (violations, witnesses) = sink.finish();
        CheckReport {
            kind: kind.to_string(),
            machine: machine.to_string(),
            verdict: if violations == 0 { Verdict::Holds } else { Verdict::Fails },
            witnesses,
            stats: CheckStats { states_visited: n, violations },
            timing: Timing { elapsed_ms: start.elapsed().as_millis() as u64 },
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct CheckOptions {
    pub policy: WitnessPolicy,
    pub cap: u128,
    pub limits: EvalLimits,
    /// Upper bound on reported witnesses under [`WitnessPolicy::All`]; the
    /// least-ranked ones are kept. `None` keeps everything.
    pub max_witnesses: Option<usize>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            policy: WitnessPolicy::First,
            cap: DEFAULT_STATE_CAP,
            limits: EvalLimits::default(),
            max_witnesses: None,
        }
    }
}

fn split_state(
    m: &Machine,
    s: &State,
) -> (BTreeMap<String, String>, Option<BTreeMap<String, String>>) {
    let mut plain = BTreeMap::new();
    let mut hat = BTreeMap::new();
    for (decl, v) in m.vars.iter().zip(&s.0) {
        let text = v.display(&m.symbols);
        match decl.name.strip_prefix('^') {
            Some(base) => {
                hat.insert(base.to_string(), text);
            }
            None => {
                plain.insert(decl.name.clone(), text);
            }
        }
    }
    (plain, if hat.is_empty() { None } else { Some(hat) })
}

fn param_map(ev: &EventDef, tuple: &[Value], symbols: &SymbolTable) -> BTreeMap<String, String> {
    ev.params
        .iter()
        .zip(tuple)
        .map(|(p, v)| (p.name.clone(), v.display(symbols)))
        .collect()
}

/// Witness rank: position in the canonical enumeration order, as
/// (state, event, parameter tuple, successor).
pub(crate) type Key = (u128, u64, u128, u128);

/// Accumulates witnesses during a parallel scan: tracks the total violation
/// count and either the least-ranked witness or all of them.
pub(crate) struct Sink {
    policy: WitnessPolicy,
    max: Option<usize>,
    count: u64,
    best: Option<(Key, Witness)>,
    all: Vec<(Key, Witness)>,
}

impl Sink {
    pub(crate) fn new(opts: &CheckOptions) -> Sink {
        Sink {
            policy: opts.policy,
            max: opts.max_witnesses,
            count: 0,
            best: None,
            all: Vec::new(),
        }
    }

    pub(crate) fn push_with(&mut self, key: Key, make: impl FnOnce() -> Witness) {
        self.count += 1;
        match self.policy {
            WitnessPolicy::First => {
                if self.best.as_ref().map_or(true, |(k, _)| key < *k) {
                    self.best = Some((key, make()));
                }
            }
            WitnessPolicy::All => {
                self.all.push((key, make()));
                self.prune();
            }
        }
    }

    /// Keeping the locally least `max` witnesses is lossless: anything in
    /// the globally least `max` is also in the local least `max` of its
    /// chunk.
    fn prune(&mut self) {
        if let Some(max) = self.max {
            if self.all.len() > max.saturating_mul(4).saturating_add(64) {
                self.all.sort_by(|a, b| a.0.cmp(&b.0));
                self.all.truncate(max);
            }
        }
    }

    fn merge(mut a: Sink, mut b: Sink) -> Sink {
        a.count += b.count;
        match a.policy {
            WitnessPolicy::First => {
                if let Some((k, w)) = b.best {
                    if a.best.as_ref().map_or(true, |(ka, _)| k < *ka) {
                        a.best = Some((k, w));
                    }
                }
            }
            WitnessPolicy::All => {
                a.all.append(&mut b.all);
                a.prune();
            }
        }
        a
    }

    pub(crate) fn finish(self) -> (u64, Vec<Witness>) {
        let witnesses = match self.policy {
            WitnessPolicy::First => self.best.map(|(_, w)| vec![w]).unwrap_or_default(),
            WitnessPolicy::All => {
                let mut all = self.all;
                all.sort_by(|a, b| a.0.cmp(&b.0));
                if let Some(max) = self.max {
                    all.truncate(max);
                }
                all.into_iter().map(|(_, w)| w).collect()
            }
        };
        (self.count, witnesses)
    }
}

fn value_at(d: &Domain, pos: usize) -> Value {
    match d {
        Domain::Int { lo, .. } => Value::Int(lo + pos as i64),
        Domain::Enum(vs) => Value::Sym(vs[pos]),
    }
}

/// A guard split by parameter footprint so a state scan does the minimum
/// work per parameter tuple: conjuncts reading no parameter gate the whole
/// event, single-parameter conjuncts filter one slot's candidate values,
/// and only conjuncts coupling several parameters run per tuple.
struct GuardPlan<'a> {
    ev: &'a EventDef,
    state_only: Vec<&'a Expr>,
    per_slot: Vec<Vec<&'a Expr>>,
    residual: Vec<&'a Expr>,
    values: Vec<Vec<Value>>,
    /// weights[i] = product of later slots' domain sizes, for tuple ranking.
    weights: Vec<u128>,
    tuple_count: u128,
}

impl<'a> GuardPlan<'a> {
    fn build(ev: &'a EventDef) -> GuardPlan<'a> {
        let values: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();
        let mut state_only = Vec::new();
        let mut per_slot = vec![Vec::new(); ev.params.len()];
        let mut residual = Vec::new();
        for c in ev.guard.conjuncts() {
            let mut slots = BTreeSet::new();
            c.for_each_free_ref(&mut |name, _| {
                if let Some(i) = ev.params.iter().position(|p| p.name == name) {
                    slots.insert(i);
                }
            });
            match slots.len() {
                0 => state_only.push(c),
                1 => per_slot[*slots.iter().next().unwrap()].push(c),
                _ => residual.push(c),
            }
        }
        let mut weights = vec![1u128; values.len()];
        for i in (0..values.len()).rev() {
            if i + 1 < values.len() {
                weights[i] = weights[i + 1].saturating_mul(values[i + 1].len() as u128);
            }
        }
        let tuple_count = values
            .iter()
            .fold(1u128, |acc, v| acc.saturating_mul(v.len() as u128));
        GuardPlan { ev, state_only, per_slot, residual, values, weights, tuple_count }
    }

    /// Parameter tuples admitted by the guard at `s`, each with its rank in
    /// the full tuple enumeration, in ascending rank order.
    fn admitted_impl(
        &self,
        m: &Machine,
        s: &State,
        consts: &ConstBinding,
        limits: EvalLimits,
        first_only: bool,
    ) -> Result<Vec<(u128, Vec<Value>)>, EvalError> {
        {
            let mut ctx = EvalCtx::new(m, consts).with_state(s);
            ctx.limits = limits;
            for c in &self.state_only {
                if !guard_holds(&mut ctx, c)? {
                    return Ok(Vec::new());
                }
            }
        }
        if self.values.is_empty() {
            return Ok(vec![(0, Vec::new())]);
        }

        // Per-slot candidate filtering; positions kept for tuple ranking.
        let mut admitted: Vec<Vec<(usize, Value)>> = Vec::with_capacity(self.values.len());
        for (slot, vals) in self.values.iter().enumerate() {
            let mut keep = Vec::new();
            'vals: for (pos, v) in vals.iter().enumerate() {
                let pair = [(self.ev.params[slot].name.as_str(), *v)];
                let mut ctx = EvalCtx::new(m, consts).with_state(s).with_params(&pair);
                ctx.limits = limits;
                for c in &self.per_slot[slot] {
                    if !guard_holds(&mut ctx, c)? {
                        continue 'vals;
                    }
                }
                keep.push((pos, *v));
            }
            if keep.is_empty() {
                return Ok(Vec::new());
            }
            admitted.push(keep);
        }

        let mut out = Vec::new();
        let mut idx = vec![0usize; admitted.len()];
        let mut tuple: Vec<Value> = admitted.iter().map(|l| l[0].1).collect();
        'combos: loop {
            let mut rank = 0u128;
            for (i, &k) in idx.iter().enumerate() {
                let (pos, v) = admitted[i][k];
                tuple[i] = v;
                rank += pos as u128 * self.weights[i];
            }
            let ok = if self.residual.is_empty() {
                true
            } else {
                let params = bind_params(self.ev, &tuple);
                let mut ctx = EvalCtx::new(m, consts).with_state(s).with_params(&params);
                ctx.limits = limits;
                let mut all = true;
                for c in &self.residual {
                    if !guard_holds(&mut ctx, c)? {
                        all = false;
                        break;
                    }
                }
                all
            };
            if ok {
                out.push((rank, tuple.clone()));
                if first_only {
                    return Ok(out);
                }
            }
            let mut i = admitted.len() - 1;
            loop {
                idx[i] += 1;
                if idx[i] < admitted[i].len() {
                    continue 'combos;
                }
                idx[i] = 0;
                if i == 0 {
                    break 'combos;
                }
                i -= 1;
            }
        }
        Ok(out)
    }
}

const MEMO_KEY_LIMIT: u128 = 65_536;
const MEMO_TUPLE_BUDGET: u128 = 8_000_000;

/// One event prepared for a state-space scan: its guard plan, its compiled
/// action, and — when the guard reads only a small slice of the state — a
/// table of admitted parameter tuples per slice value, shared across all
/// states agreeing on that slice.
pub(crate) struct EventScan<'a> {
    plan: GuardPlan<'a>,
    pub(crate) action: ActionPlan,
    pub(crate) event_index: usize,
    footprint: Vec<usize>,
    memo: Option<Vec<Vec<(u128, Vec<Value>)>>>,
}

enum Admitted<'s> {
    Memo(&'s [(u128, Vec<Value>)]),
    Fresh(Vec<(u128, Vec<Value>)>),
}

impl Admitted<'_> {
    fn as_slice(&self) -> &[(u128, Vec<Value>)] {
        match self {
            Admitted::Memo(s) => s,
            Admitted::Fresh(v) => v,
        }
    }
}

impl<'a> EventScan<'a> {
    pub(crate) fn build(
        m: &'a Machine,
        ev: &'a EventDef,
        event_index: usize,
        consts: &ConstBinding,
        limits: EvalLimits,
        state_count: u128,
    ) -> Result<EventScan<'a>, EvalError> {
        let plan = GuardPlan::build(ev);

        let mut foot_set = BTreeSet::new();
        ev.guard.for_each_free_ref(&mut |name, _| {
            if ev.params.iter().any(|p| p.name == name) {
                return;
            }
            if let Some(i) = m.var_index(name) {
                foot_set.insert(i);
            }
        });
        let footprint: Vec<usize> = foot_set.into_iter().collect();
        let foot_space: u128 = footprint
            .iter()
            .map(|&i| m.vars[i].domain.size())
            .product();

        let worth_memoizing = foot_space <= MEMO_KEY_LIMIT
            && foot_space.saturating_mul(2) <= state_count
            && foot_space.saturating_mul(plan.tuple_count) <= MEMO_TUPLE_BUDGET;
        let memo = if worth_memoizing {
            let keys = foot_space as usize;
            let table: Vec<Vec<(u128, Vec<Value>)>> = (0..keys)
                .into_par_iter()
                .map(|key| {
                    let s = foot_state(m, &footprint, key);
                    plan.admitted_impl(m, &s, consts, limits, false)
                })
                .collect::<Result<_, _>>()?;
            Some(table)
        } else {
            None
        };

        Ok(EventScan { plan, action: ActionPlan::build(m, ev), event_index, footprint, memo })
    }

    pub(crate) fn event(&self) -> &'a EventDef {
        self.plan.ev
    }

    fn foot_rank(&self, m: &Machine, s: &State) -> usize {
        let mut r: u128 = 0;
        for &i in &self.footprint {
            r = r * m.vars[i].domain.size() + value_pos(&m.vars[i].domain, &s.0[i]);
        }
        r as usize
    }

    fn admitted(
        &self,
        m: &Machine,
        s: &State,
        consts: &ConstBinding,
        limits: EvalLimits,
    ) -> Result<Admitted<'_>, EvalError> {
        match &self.memo {
            Some(table) => Ok(Admitted::Memo(&table[self.foot_rank(m, s)])),
            None => Ok(Admitted::Fresh(self.plan.admitted_impl(m, s, consts, limits, false)?)),
        }
    }

    fn enabled(
        &self,
        m: &Machine,
        s: &State,
        consts: &ConstBinding,
        limits: EvalLimits,
    ) -> Result<bool, EvalError> {
        match &self.memo {
            Some(table) => Ok(!table[self.foot_rank(m, s)].is_empty()),
            None => Ok(!self.plan.admitted_impl(m, s, consts, limits, true)?.is_empty()),
        }
    }
}

/// A state whose footprint slots are set by unranking `key`; the rest sit at
/// their domain minimum (the guard never reads them).
fn foot_state(m: &Machine, footprint: &[usize], mut key: usize) -> State {
    let mut vals: Vec<Value> = m
        .vars
        .iter()
        .map(|v| value_at(&v.domain, 0))
        .collect();
    for &i in footprint.iter().rev() {
        let size = m.vars[i].domain.size() as usize;
        vals[i] = value_at(&m.vars[i].domain, key % size);
        key /= size;
    }
    State(vals)
}

pub(crate) fn checked_size(m: &Machine, cap: u128) -> Result<usize, CheckError> {
    let size = state_space_size(m);
    if size > cap || size > usize::MAX as u128 {
        return Err(ModelError::StateSpaceTooLarge { size, cap }.into());
    }
    Ok(size as usize)
}

fn build_scans<'a>(
    m: &'a Machine,
    consts: &ConstBinding,
    limits: EvalLimits,
    ctrl_only: bool,
    state_count: u128,
) -> Result<Vec<EventScan<'a>>, EvalError> {
    m.events
        .iter()
        .enumerate()
        .filter(|(_, e)| !ctrl_only || e.kind == EventKind::Ctrl)
        .map(|(i, e)| EventScan::build(m, e, i, consts, limits, state_count))
        .collect()
}

/// Truth table of `exprs` (conjoined) over the whole state space, indexed
/// by state rank.
fn truth_table(
    m: &Machine,
    exprs: &[&Expr],
    consts: &ConstBinding,
    limits: EvalLimits,
    n: usize,
) -> Result<Vec<bool>, EvalError> {
    (0..n)
        .into_par_iter()
        .map(|r| {
            let s = state_unrank(m, r as u128);
            let mut ctx = EvalCtx::new(m, consts).with_state(&s);
            ctx.limits = limits;
            for e in exprs {
                if !eval_bool(&mut ctx, e)? {
                    return Ok(false);
                }
            }
            Ok(true)
        })
        .collect()
}

pub(crate) fn run_sink_scan<E, F>(n: usize, opts: &CheckOptions, per_state: F) -> Result<Sink, E>
where
    E: Send,
    F: Fn(usize, &mut Sink) -> Result<(), E> + Sync,
{
    (0..n)
        .into_par_iter()
        .try_fold(
            || Sink::new(opts),
            |mut sink, r| {
                per_state(r, &mut sink)?;
                Ok(sink)
            },
        )
        .try_reduce(|| Sink::new(opts), |a, b| Ok(Sink::merge(a, b)))
}

/// Checks that every state enables exactly one controller event (for some
/// parameter choice). Witnesses carry the 1-based indices of the enabled
/// controller events — several, or none.
pub fn check_partitioning(
    m: &Machine,
    consts: &ConstBinding,
    opts: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    let start = Instant::now();
    let n = checked_size(m, opts.cap)?;
    let scans = build_scans(m, consts, opts.limits, true, n as u128)?;

    let sink = run_sink_scan::<CheckError, _>(n, opts, |r, sink| {
        let s = state_unrank(m, r as u128);
        let mut enabled = Vec::new();
        for (pos, scan) in scans.iter().enumerate() {
            if scan.enabled(m, &s, consts, opts.limits)? {
                enabled.push(pos + 1);
            }
        }
        if enabled.len() != 1 {
            sink.push_with((r as u128, 0, 0, 0), || {
                let mut w = Witness::at(m, &s);
                w.indices = Some(enabled.clone());
                w
            });
        }
        Ok(())
    })?;

    Ok(CheckReport::new("partitioning", &m.name, n as u64, sink, start))
}

/// Checks that every event step from an invariant state lands back inside
/// the invariant, and that every initial state satisfies it (witnessed with
/// the pseudo-event `init`).
pub fn check_invariant_preservation(
    m: &Machine,
    consts: &ConstBinding,
    opts: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    let start = Instant::now();
    let n = checked_size(m, opts.cap)?;
    let inv = truth_table(m, &m.invariants(), consts, opts.limits, n)?;
    let scans = build_scans(m, consts, opts.limits, false, n as u128)?;
    let init_event_index = m.events.len() as u64;

    let sink = run_sink_scan::<CheckError, _>(n, opts, |r, sink| {
        let s = state_unrank(m, r as u128);
        if !inv[r] {
            let mut ctx = EvalCtx::new(m, consts).with_state(&s);
            ctx.limits = opts.limits;
            if eval_bool(&mut ctx, &m.init)? {
                sink.push_with((r as u128, init_event_index, 0, 0), || {
                    let mut w = Witness::at(m, &s);
                    w.event = Some("init".to_string());
                    w.note = Some("initial state outside the invariant".to_string());
                    w
                });
            }
            return Ok(());
        }
        for scan in &scans {
            let admitted = scan.admitted(m, &s, consts, opts.limits)?;
            for (trank, tuple) in admitted.as_slice() {
                let params = bind_params(scan.event(), tuple);
                let mut succ = BTreeSet::new();
                scan.action.run(m, &s, &params, consts, opts.limits, &mut succ)?;
                for s2 in &succ {
                    let r2 = state_rank(m, s2);
                    if !inv[r2 as usize] {
                        sink.push_with((r as u128, scan.event_index as u64, *trank, r2), || {
                            let mut w = Witness::at(m, &s);
                            w.event = Some(scan.event().name.clone());
                            w.params = Some(param_map(scan.event(), tuple, &m.symbols));
                            let (succ_plain, succ_hat) = split_state(m, s2);
                            w.successor = Some(succ_plain);
                            w.successor_perceived = succ_hat;
                            w
                        });
                    }
                }
            }
        }
        Ok(())
    })?;

    Ok(CheckReport::new("invariant_preservation", &m.name, n as u64, sink, start))
}

/// Checks that in every invariant state, each admitted controller guard
/// valuation has at least one successor (its action is satisfiable).
pub fn check_feasibility(
    m: &Machine,
    consts: &ConstBinding,
    opts: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    let start = Instant::now();
    let n = checked_size(m, opts.cap)?;
    let inv = truth_table(m, &m.invariants(), consts, opts.limits, n)?;
    let scans = build_scans(m, consts, opts.limits, true, n as u128)?;

    let sink = run_sink_scan::<CheckError, _>(n, opts, |r, sink| {
        if !inv[r] {
            return Ok(());
        }
        let s = state_unrank(m, r as u128);
        for scan in &scans {
            let admitted = scan.admitted(m, &s, consts, opts.limits)?;
            for (trank, tuple) in admitted.as_slice() {
                let params = bind_params(scan.event(), tuple);
                let mut succ = BTreeSet::new();
                scan.action.run(m, &s, &params, consts, opts.limits, &mut succ)?;
                if succ.is_empty() {
                    sink.push_with((r as u128, scan.event_index as u64, *trank, 0), || {
                        let mut w = Witness::at(m, &s);
                        w.event = Some(scan.event().name.clone());
                        w.params = Some(param_map(scan.event(), tuple, &m.symbols));
                        w.note = Some("guard admits the parameters but the action has no successor".to_string());
                        w
                    });
                }
            }
        }
        Ok(())
    })?;

    Ok(CheckReport::new("feasibility", &m.name, n as u64, sink, start))
}

/// Checks that `robust` refines `original` step-by-step: from every paired
/// state consistent with the perception description, the plain-variable part
/// of each `robust` transition is a transition `original` could take.
pub fn check_forward_simulation(
    robust: &Machine,
    spec: &UncertaintySpec,
    original: &Machine,
    consts: &ConstBinding,
    opts: &CheckOptions,
) -> Result<CheckReport, CheckError> {
    let start = Instant::now();
    let n = checked_size(robust, opts.cap)?;
    let n_orig = checked_size(original, opts.cap)?;

    let proj: Vec<usize> = original
        .vars
        .iter()
        .map(|v| {
            let i = robust.var_index(&v.name).ok_or_else(|| CheckError::MissingVar {
                robust: robust.name.clone(),
                original: original.name.clone(),
                var: v.name.clone(),
            })?;
            if robust.vars[i].domain != v.domain {
                return Err(CheckError::DomainMismatch {
                    robust: robust.name.clone(),
                    original: original.name.clone(),
                    var: v.name.clone(),
                });
            }
            Ok(i)
        })
        .collect::<Result<_, _>>()?;

    let pairing = spec.invariant_expr(original);

    let base_succ: Vec<BTreeSet<State>> = (0..n_orig)
        .into_par_iter()
        .map(|r| successors(original, &state_unrank(original, r as u128), consts, opts.limits))
        .collect::<Result<_, _>>()?;

    let scans = build_scans(robust, consts, opts.limits, false, n as u128)?;

    let sink = run_sink_scan::<CheckError, _>(n, opts, |r, sink| {
        let s = state_unrank(robust, r as u128);
        {
            let mut ctx = EvalCtx::new(robust, consts).with_state(&s);
            ctx.limits = opts.limits;
            if !eval_bool(&mut ctx, &pairing)? {
                return Ok(());
            }
        }
        let plain = State(proj.iter().map(|&i| s.0[i]).collect());
        let allowed = &base_succ[state_rank(original, &plain) as usize];
        for scan in &scans {
            let admitted = scan.admitted(robust, &s, consts, opts.limits)?;
            for (trank, tuple) in admitted.as_slice() {
                let params = bind_params(scan.event(), tuple);
                let mut succ = BTreeSet::new();
                scan.action.run(robust, &s, &params, consts, opts.limits, &mut succ)?;
                for s2 in &succ {
                    let plain2 = State(proj.iter().map(|&i| s2.0[i]).collect());
                    if !allowed.contains(&plain2) {
                        let r2 = state_rank(robust, s2);
                        sink.push_with((r as u128, scan.event_index as u64, *trank, r2), || {
                            let mut w = Witness::at(robust, &s);
                            w.event = Some(scan.event().name.clone());
                            w.params = Some(param_map(scan.event(), tuple, &robust.symbols));
                            let (succ_plain, succ_hat) = split_state(robust, s2);
                            w.successor = Some(succ_plain);
                            w.successor_perceived = succ_hat;
                            w.note = Some(format!(
                                "the plain-variable step is not a transition of `{}`",
                                original.name
                            ));
                            w
                        });
                    }
                }
            }
        }
        Ok(())
    })?;

    Ok(CheckReport::new("forward_simulation", &robust.name, n as u64, sink, start))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::load_source;

    fn machine(text: &str) -> Machine {
        load_source(text).unwrap().machines[0].clone()
    }

    fn opts_all() -> CheckOptions {
        CheckOptions { policy: WitnessPolicy::All, ..CheckOptions::default() }
    }

    const TINY: &str = "\
machine tiny
  var x : int[0..3]
  init x = 0
  safety x <= 1
  plant event step
    param d : int[0..2]
    guard true
    action x' = x + d
  end
  ctrl event hold
    guard true
    action x' = x
  end
end
";

    #[test]
    fn preservation_least_witness_and_count() {
        let m = machine(TINY);
        let c = ConstBinding::new();
        let rep = check_invariant_preservation(&m, &c, &opts_all()).unwrap();
        assert!(!rep.verdict.holds());
        // Violating steps: 0 --d=2--> 2, 1 --d=1--> 2, 1 --d=2--> 3.
        assert_eq!(rep.stats.violations, 3);
        assert_eq!(rep.stats.states_visited, 4);
        let w = &rep.witnesses[0];
        assert_eq!(w.state["x"], "0");
        assert_eq!(w.event.as_deref(), Some("step"));
        assert_eq!(w.params.as_ref().unwrap()["d"], "2");
        assert_eq!(w.successor.as_ref().unwrap()["x"], "2");
        // First-witness policy agrees with the least-ranked of the full set.
        let first = check_invariant_preservation(&m, &c, &CheckOptions::default()).unwrap();
        assert_eq!(first.witnesses.len(), 1);
        assert_eq!(first.witnesses[0], rep.witnesses[0]);
        assert_eq!(first.stats.violations, 3);
    }

    #[test]
    fn init_outside_invariant_is_reported() {
        let m = machine(
            "machine bad
  var x : int[0..3]
  init x = 3
  safety x <= 1
  ctrl event hold
    guard true
    action x' = x
  end
end
",
        );
        let c = ConstBinding::new();
        let rep = check_invariant_preservation(&m, &c, &opts_all()).unwrap();
        assert_eq!(rep.stats.violations, 1);
        let w = &rep.witnesses[0];
        assert_eq!(w.event.as_deref(), Some("init"));
        assert_eq!(w.state["x"], "3");
    }

    #[test]
    fn partitioning_overlap_and_gap() {
        let m = machine(
            "machine overlap
  var x : int[0..3]
  init x = 0
  safety true
  ctrl event low
    guard x <= 1
    action x' = x
  end
  ctrl event high
    guard x >= 1
    action x' = x
  end
end
",
        );
        let c = ConstBinding::new();
        let rep = check_partitioning(&m, &c, &opts_all()).unwrap();
        assert!(!rep.verdict.holds());
        // x = 1 enables both; other states enable exactly one.
        assert_eq!(rep.stats.violations, 1);
        assert_eq!(rep.witnesses[0].indices, Some(vec![1, 2]));
        assert_eq!(rep.witnesses[0].state["x"], "1");

        let gap = machine(
            "machine gap
  var x : int[0..3]
  init x = 0
  safety true
  ctrl event low
    guard x <= 1
    action x' = x
  end
end
",
        );
        let rep = check_partitioning(&gap, &c, &opts_all()).unwrap();
        assert_eq!(rep.stats.violations, 2);
        assert_eq!(rep.witnesses[0].indices, Some(vec![]));
        assert_eq!(rep.witnesses[0].state["x"], "2");
    }

    #[test]
    fn feasibility_empty_action() {
        let m = machine(
            "machine stuck
  var x : int[0..3]
  init x = 0
  safety true
  ctrl event jump
    guard true
    action x' = x + 10
  end
end
",
        );
        let c = ConstBinding::new();
        let rep = check_feasibility(&m, &c, &opts_all()).unwrap();
        assert_eq!(rep.stats.violations, 4);
        assert_eq!(rep.witnesses[0].state["x"], "0");
        assert_eq!(rep.witnesses[0].event.as_deref(), Some("jump"));
    }

    const PAIRED: &str = "\
machine base
  var x : int[0..3]
  init x = 0
  safety true
  plant event env
    param d : int[-1..1]
    guard true
    action x' = x + d
  end
  ctrl event act
    guard true
    action x' = x
  end
end

machine base_pair
  var x : int[0..3]
  var ^x : int[0..3]
  init x = 0 and ^x = x
  safety true
  uncertain x = ^x
  plant event env
    param d : int[-1..1]
    guard true
    action x' = x + d and ^x' = x'
  end
  ctrl event act
    guard true
    action x' = x and ^x' = x'
  end
end

uncertainty ex for base
  perceives x exactly
end
";

    #[test]
    fn forward_simulation_holds_for_faithful_pairing() {
        let f = load_source(PAIRED).unwrap();
        let base = f.machines[0].clone();
        let pair = f.machines[1].clone();
        let spec = f.uncertainties[0].clone();
        let c = ConstBinding::new();
        let rep = check_forward_simulation(&pair, &spec, &base, &c, &opts_all()).unwrap();
        assert!(rep.verdict.holds(), "{:?}", rep.witnesses.first());
        assert_eq!(rep.stats.states_visited, 16);
    }

    #[test]
    fn forward_simulation_catches_new_behaviour() {
        let f = load_source(PAIRED).unwrap();
        let base = f.machines[0].clone();
        let mut pair = f.machines[1].clone();
        let spec = f.uncertainties[0].clone();
        // Make the paired controller jump to 3 — the base machine can't.
        let idx = pair.events.iter().position(|e| e.name == "act").unwrap();
        pair.events[idx].action =
            crate::dsl::parser::parse_expr("x' = 3 and ^x' = x'").unwrap();
        let c = ConstBinding::new();
        let rep = check_forward_simulation(&pair, &spec, &base, &c, &opts_all()).unwrap();
        assert!(!rep.verdict.holds());
        let w = &rep.witnesses[0];
        assert_eq!(w.state["x"], "0");
        assert_eq!(w.perceived.as_ref().unwrap()["x"], "0");
        assert_eq!(w.event.as_deref(), Some("act"));
        assert_eq!(w.successor.as_ref().unwrap()["x"], "3");
        // Reaching 3 is legal from x in {2, 3} (an env move could do it),
        // so exactly the pairs at x in {0, 1} violate.
        assert_eq!(rep.stats.violations, 2);
    }

    #[test]
    fn heater_all_checks_hold() {
        let m = machine(
            "machine ht0
  var tn : { p, c }
  var temp : int[-20..80]
  init tn = c and 30 <= temp and temp <= 40
  safety tn = c => 30 <= temp and temp <= 40
  plant event plant_change_temp
    param dt : int[-15..15]
    guard true
    action tn' = p and temp' = temp + dt
  end
  ctrl event ctrl_heat
    param dh : int[0..60]
    guard temp < 30 and 30 <= temp + dh and temp + dh <= 40
    action tn' = c and temp' = temp + dh
  end
  ctrl event ctrl_keep_safe
    param dt : int[-10..10]
    guard 30 <= temp and temp <= 40 and 30 <= temp + dt and temp + dt <= 40
    action tn' = c and temp' = temp + dt
  end
  ctrl event ctrl_cool
    param dc : int[0..60]
    guard temp > 40 and 30 <= temp - dc and temp - dc <= 40
    action tn' = c and temp' = temp - dc
  end
end
",
        );
        let c = ConstBinding::new();
        let o = CheckOptions::default();
        assert!(check_partitioning(&m, &c, &o).unwrap().verdict.holds());
        assert!(check_invariant_preservation(&m, &c, &o).unwrap().verdict.holds());
        assert!(check_feasibility(&m, &c, &o).unwrap().verdict.holds());
    }
}
