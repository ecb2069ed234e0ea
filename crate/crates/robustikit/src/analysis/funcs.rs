//! Observation-aware semantic functions over machines: the unique enabled
//! controller index, compatible parameter sets, their robust (ball-wide)
//! counterparts, safety-preserving parameter sets, and compartments.
//!
//! All of these are defined pointwise and computed by enumeration; the
//! test suite checks them against an independent set-comprehension oracle.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::model::enumerate::{ball, bind_params, param_values, ActionPlan, Odometer};
use crate::model::{
    eval_bool, ConstBinding, EvalCtx, EvalError, EvalLimits, Expr, Machine, State, UncertaintySpec,
    Value,
};

#[derive(Debug, Clone, Error, PartialEq)]
pub enum FuncError {
    #[error("partitioning violated at state {state_text}: enabled controller events {enabled:?}")]
    Partitioning {
        state_text: String,
        state: State,
        enabled: Vec<usize>,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Which reading of the safety-preserving parameter set to use.
///
/// The set is an intersection over true states consistent with the
/// perception. `Formula` intersects over every such state; `Prose`
/// restricts to the states where the event is enabled at all. The two
/// differ only when some consistent state disables the event; both are
/// kept so the difference can be observed experimentally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SafparMode {
    #[default]
    Formula,
    Prose,
}

/// A parameter valuation, ordered for deterministic set iteration.
pub type ParamTuple = Vec<Value>;

/// The set of true states consistent with perceiving `perceived`.
pub fn eps_ball(
    m: &Machine,
    spec: &UncertaintySpec,
    perceived: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<Vec<State>, FuncError> {
    Ok(ball(m, spec, perceived, consts, limits)?)
}

/// True iff some parameter valuation of controller event `i` (1-based)
/// satisfies its guard at `s`.
pub fn region_holds(
    m: &Machine,
    i: usize,
    s: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<bool, FuncError> {
    let ev = m.controller_events()[i - 1];
    let lists: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();
    let mut odo = Odometer::new(&lists);
    let mut tuple = Vec::new();
    while odo.next_into(&mut tuple) {
        let params = bind_params(ev, &tuple);
        let mut ctx = EvalCtx::new(m, consts).with_state(s).with_params(&params);
        ctx.limits = limits;
        if guard_holds(&mut ctx, &ev.guard)? {
            return Ok(true);
        }
    }
    Ok(false)
}

/// Guard evaluation: arithmetic on an absent (`bot`) parameter value that
/// the expression fails to shield simply means the valuation does not
/// satisfy the guard.
pub(crate) fn guard_holds(ctx: &mut EvalCtx, guard: &Expr) -> Result<bool, EvalError> {
    match eval_bool(ctx, guard) {
        Ok(b) => Ok(b),
        Err(EvalError::BotArith) => Ok(false),
        Err(e) => Err(e),
    }
}

/// Index (1-based, declaration order) of the unique controller event whose
/// guard is satisfiable at `s`. Errors when the count differs from one.
pub fn idx_c(
    m: &Machine,
    s: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<usize, FuncError> {
    let n = m.controller_events().len();
    let mut enabled = Vec::new();
    for i in 1..=n {
        if region_holds(m, i, s, consts, limits)? {
            enabled.push(i);
        }
    }
    if enabled.len() == 1 {
        Ok(enabled[0])
    } else {
        let state_text = s
            .to_named(m)
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(", ");
        Err(FuncError::Partitioning { state_text, state: s.clone(), enabled })
    }
}

/// Parameter valuations of controller event `i` compatible with `s`
/// (those satisfying the guard).
pub fn par_c_for(
    m: &Machine,
    i: usize,
    s: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<BTreeSet<ParamTuple>, FuncError> {
    let ev = m.controller_events()[i - 1];
    let lists: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();
    let mut out = BTreeSet::new();
    let mut odo = Odometer::new(&lists);
    let mut tuple = Vec::new();
    while odo.next_into(&mut tuple) {
        let params = bind_params(ev, &tuple);
        let mut ctx = EvalCtx::new(m, consts).with_state(s).with_params(&params);
        ctx.limits = limits;
        if guard_holds(&mut ctx, &ev.guard)? {
            out.insert(tuple.clone());
        }
    }
    Ok(out)
}

/// Parameter valuations compatible with `s` for the unique event enabled
/// there; the partitioning assumption is checked on the way.
pub fn par_c(
    m: &Machine,
    s: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<(usize, BTreeSet<ParamTuple>), FuncError> {
    let i = idx_c(m, s, consts, limits)?;
    Ok((i, par_c_for(m, i, s, consts, limits)?))
}

fn all_tuples(m: &Machine, i: usize) -> BTreeSet<ParamTuple> {
    let ev = m.controller_events()[i - 1];
    let lists: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();
    let mut out = BTreeSet::new();
    let mut odo = Odometer::new(&lists);
    let mut tuple = Vec::new();
    while odo.next_into(&mut tuple) {
        out.insert(tuple.clone());
    }
    out
}

/// Parameter valuations for event `i` compatible with *every* state in the
/// ball around `perceived` whose unique enabled event is `i`.
///
/// When no such state exists the function returns the full parameter
/// domain (empty-family intersection); callers that pass an
/// `i ∈ compartment(perceived)` never hit that case.
pub fn par_c_eps(
    m: &Machine,
    spec: &UncertaintySpec,
    i: usize,
    perceived: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<BTreeSet<ParamTuple>, FuncError> {
    let mut acc: Option<BTreeSet<ParamTuple>> = None;
    for s in eps_ball(m, spec, perceived, consts, limits)? {
        if idx_c(m, &s, consts, limits)? != i {
            continue;
        }
        let here = par_c_for(m, i, &s, consts, limits)?;
        acc = Some(match acc {
            None => here,
            Some(prev) => prev.intersection(&here).cloned().collect(),
        });
    }
    Ok(acc.unwrap_or_else(|| all_tuples(m, i)))
}

/// Successor states of event `i` at `s` under `tuple`.
pub fn event_action_states(
    m: &Machine,
    i: usize,
    s: &State,
    tuple: &[Value],
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<BTreeSet<State>, FuncError> {
    let ev = m.controller_events()[i - 1];
    let plan = ActionPlan::build(m, ev);
    let params = bind_params(ev, tuple);
    let mut out = BTreeSet::new();
    plan.run(m, s, &params, consts, limits, &mut out)?;
    Ok(out)
}

/// Parameter valuations for event `i` whose action, at every state
/// consistent with `perceived`, is nonempty and lands inside `inv`.
pub fn safpar(
    m: &Machine,
    spec: &UncertaintySpec,
    i: usize,
    perceived: &State,
    inv: &Expr,
    mode: SafparMode,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<BTreeSet<ParamTuple>, FuncError> {
    let ev = m.controller_events()[i - 1];
    let plan = ActionPlan::build(m, ev);
    let lists: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();

    let mut members: Vec<State> = Vec::new();
    for s in eps_ball(m, spec, perceived, consts, limits)? {
        if mode == SafparMode::Prose && !region_holds(m, i, &s, consts, limits)? {
            continue;
        }
        members.push(s);
    }

    let mut out = BTreeSet::new();
    let mut odo = Odometer::new(&lists);
    let mut tuple = Vec::new();
    'tuples: while odo.next_into(&mut tuple) {
        let params = bind_params(ev, &tuple);
        for s in &members {
            let mut succ = BTreeSet::new();
            plan.run(m, s, &params, consts, limits, &mut succ)?;
            if succ.is_empty() {
                continue 'tuples;
            }
            for s2 in &succ {
                let mut ctx = EvalCtx::new(m, consts).with_state(s2);
                ctx.limits = limits;
                if !eval_bool(&mut ctx, inv)? {
                    continue 'tuples;
                }
            }
        }
        out.insert(tuple.clone());
    }
    Ok(out)
}

/// The exact set of controller indices enabled at some state consistent
/// with `perceived` — the refined partition cell the perception falls in.
pub fn compartment(
    m: &Machine,
    spec: &UncertaintySpec,
    perceived: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<BTreeSet<usize>, FuncError> {
    let mut out = BTreeSet::new();
    for s in eps_ball(m, spec, perceived, consts, limits)? {
        out.insert(idx_c(m, &s, consts, limits)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parser::load_source;

    const HEATER: &str = "\
machine ht0
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

uncertainty eps0 for ht0
  perceives tn exactly
  perceives temp within 3
end
";

    fn heater() -> (Machine, UncertaintySpec) {
        let f = load_source(HEATER).unwrap();
        (f.machines[0].clone(), f.uncertainties[0].clone())
    }

    fn st(m: &Machine, tn: &str, temp: i64) -> State {
        let sym = m.symbols.lookup(tn).unwrap();
        State(vec![Value::Sym(sym), Value::Int(temp)])
    }

    fn ints(set: &BTreeSet<ParamTuple>) -> Vec<i64> {
        set.iter()
            .map(|t| match t[0] {
                Value::Int(v) => v,
                _ => panic!("not an int tuple"),
            })
            .collect()
    }

    #[test]
    fn idx_matches_guard_regions() {
        let (m, _) = heater();
        let c = ConstBinding::new();
        let l = EvalLimits::default();
        assert_eq!(idx_c(&m, &st(&m, "c", 25), &c, l).unwrap(), 1);
        assert_eq!(idx_c(&m, &st(&m, "c", 40), &c, l).unwrap(), 2);
        assert_eq!(idx_c(&m, &st(&m, "c", 41), &c, l).unwrap(), 3);
    }

    #[test]
    fn compatible_parameters() {
        let (m, _) = heater();
        let c = ConstBinding::new();
        let l = EvalLimits::default();
        let (i, set) = par_c(&m, &st(&m, "c", 25), &c, l).unwrap();
        assert_eq!(i, 1);
        assert_eq!(ints(&set), (5..=15).collect::<Vec<_>>());
        let (i, set) = par_c(&m, &st(&m, "c", 30), &c, l).unwrap();
        assert_eq!(i, 2);
        assert_eq!(ints(&set), (0..=10).collect::<Vec<_>>());
    }

    #[test]
    fn robust_parameters_at_29() {
        let (m, spec) = heater();
        let c = ConstBinding::new();
        let l = EvalLimits::default();
        let hat = st(&m, "c", 29);
        let heat = par_c_eps(&m, &spec, 1, &hat, &c, l).unwrap();
        assert_eq!(ints(&heat), (4..=11).collect::<Vec<_>>());
        let keep = par_c_eps(&m, &spec, 2, &hat, &c, l).unwrap();
        assert_eq!(ints(&keep), (0..=8).collect::<Vec<_>>());
    }

    #[test]
    fn safe_parameters_at_29() {
        let (m, spec) = heater();
        let c = ConstBinding::new();
        let l = EvalLimits::default();
        let hat = st(&m, "c", 29);
        let set = safpar(&m, &spec, 1, &hat, &m.safety.clone(), SafparMode::Formula, &c, l).unwrap();
        assert_eq!(ints(&set), (4..=8).collect::<Vec<_>>());
        // The enabled-states-only reading widens the window: states 30..32
        // no longer constrain dh from above.
        let prose = safpar(&m, &spec, 1, &hat, &m.safety.clone(), SafparMode::Prose, &c, l).unwrap();
        assert_eq!(ints(&prose), (4..=11).collect::<Vec<_>>());
    }

    #[test]
    fn compartments_match_regions() {
        let (m, spec) = heater();
        let c = ConstBinding::new();
        let l = EvalLimits::default();
        let comp = |t: i64| {
            compartment(&m, &spec, &st(&m, "c", t), &c, l)
                .unwrap()
                .into_iter()
                .collect::<Vec<_>>()
        };
        assert_eq!(comp(26), vec![1]);
        assert_eq!(comp(27), vec![1, 2]);
        assert_eq!(comp(29), vec![1, 2]);
        assert_eq!(comp(32), vec![1, 2]);
        assert_eq!(comp(33), vec![2]);
        assert_eq!(comp(37), vec![2]);
        assert_eq!(comp(38), vec![2, 3]);
        assert_eq!(comp(43), vec![2, 3]);
        assert_eq!(comp(44), vec![3]);
    }

    #[test]
    fn partitioning_violation_reported() {
        let (mut m, _) = heater();
        // Remove the cooling controller: states above 40 enable nothing.
        m.events.retain(|e| e.name != "ctrl_cool");
        let c = ConstBinding::new();
        let l = EvalLimits::default();
        match idx_c(&m, &st(&m, "c", 45), &c, l) {
            Err(FuncError::Partitioning { enabled, .. }) => assert!(enabled.is_empty()),
            other => panic!("unexpected: {other:?}"),
        }
    }
}
