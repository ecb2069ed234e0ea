//! Seeded random walks: a cheap smoke check that complements the exhaustive
//! analyses. The walk alternates environment and controller turns — the
//! plant moves first, the controller answers — picking uniformly among the
//! enabled (event, parameters, successor) triples of the side whose turn it
//! is. A fixed seed reproduces the walk exactly.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::checks::Timing;
use crate::analysis::funcs::guard_holds;
use crate::model::enumerate::{bind_params, param_values, Odometer};
use crate::model::{
    enumerate_states, eval_bool, ActionPlan, ConstBinding, EvalCtx, EvalError, EvalLimits,
    EventKind, Expr, Machine, ModelError, State, Value, DEFAULT_STATE_CAP,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("machine `{machine}` has no state satisfying its initial condition")]
    NoInitialState { machine: String },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct SimOptions {
    pub seed: u64,
    pub steps: u64,
    pub cap: u128,
    pub limits: EvalLimits,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            seed: 0,
            steps: 100,
            cap: DEFAULT_STATE_CAP,
            limits: EvalLimits::default(),
        }
    }
}

/// How a walk ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SimOutcome {
    /// All requested steps taken, every visited state within the invariants.
    Completed,
    /// The side whose turn it was had no enabled event; `step` is the index
    /// the stuck state has in the trace.
    Deadlock { step: u64 },
    /// A visited state violates an invariant; `step` indexes the trace
    /// (0 is the initial state) and `invariant` names the violated section.
    Violation { step: u64, invariant: String },
}

#[derive(Debug, Clone, Serialize)]
pub struct SimStep {
    pub event: String,
    pub params: BTreeMap<String, String>,
    pub state: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub machine: String,
    pub seed: u64,
    pub steps_requested: u64,
    pub initial: BTreeMap<String, String>,
    /// One entry per taken step; entry `i` leads to trace index `i + 1`.
    pub steps: Vec<SimStep>,
    pub outcome: SimOutcome,
    pub timing: Timing,
}

fn named(m: &Machine, s: &State) -> BTreeMap<String, String> {
    m.vars
        .iter()
        .zip(&s.0)
        .map(|(v, val)| (v.name.clone(), val.display(&m.symbols)))
        .collect()
}

/// Name of the first violated invariant at `s`, if any.
fn violated(
    m: &Machine,
    s: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<Option<&'static str>, EvalError> {
    let sections: [(&'static str, Option<&Expr>); 2] =
        [("safety", Some(&m.safety)), ("uncertain", m.uncertain.as_ref())];
    for (name, expr) in sections {
        let Some(expr) = expr else { continue };
        let mut ctx = EvalCtx::new(m, consts).with_state(s);
        ctx.limits = limits;
        if !eval_bool(&mut ctx, expr)? {
            return Ok(Some(name));
        }
    }
    Ok(None)
}

/// All (event, params, successor) moves of the given side at `s`.
fn moves(
    m: &Machine,
    kind: EventKind,
    s: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<Vec<(String, Vec<(String, String)>, State)>, EvalError> {
    let mut out = Vec::new();
    for ev in m.events.iter().filter(|e| e.kind == kind) {
        let plan = ActionPlan::build(m, ev);
        let lists: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();
        let mut odo = Odometer::new(&lists);
        let mut tuple = Vec::new();
        while odo.next_into(&mut tuple) {
            let params = bind_params(ev, &tuple);
            let mut ctx = EvalCtx::new(m, consts).with_state(s).with_params(&params);
            ctx.limits = limits;
            if !guard_holds(&mut ctx, &ev.guard)? {
                continue;
            }
            let mut succs = std::collections::BTreeSet::new();
            plan.run(m, s, &params, consts, limits, &mut succs)?;
            let shown: Vec<(String, String)> = ev
                .params
                .iter()
                .zip(&tuple)
                .map(|(p, v)| (p.name.clone(), v.display(&m.symbols)))
                .collect();
            for succ in succs {
                out.push((ev.name.clone(), shown.clone(), succ));
            }
        }
    }
    Ok(out)
}

/// Runs a seeded alternating walk from a random initial state.
pub fn simulate(
    m: &Machine,
    consts: &ConstBinding,
    opts: &SimOptions,
) -> Result<SimReport, SimError> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    let mut initials = Vec::new();
    for s in enumerate_states(m, opts.cap)? {
        let mut ctx = EvalCtx::new(m, consts).with_state(&s);
        ctx.limits = opts.limits;
        if eval_bool(&mut ctx, &m.init)? {
            initials.push(s);
        }
    }
    if initials.is_empty() {
        return Err(SimError::NoInitialState { machine: m.name.clone() });
    }
    let mut state = initials[rng.gen_range(0..initials.len())].clone();
    let initial = named(m, &state);

    let mut steps = Vec::new();
    let mut outcome = SimOutcome::Completed;
    if let Some(inv) = violated(m, &state, consts, opts.limits)? {
        outcome = SimOutcome::Violation { step: 0, invariant: inv.to_string() };
    } else {
        for i in 0..opts.steps {
            let kind = if i % 2 == 0 { EventKind::Plant } else { EventKind::Ctrl };
            let mut options = moves(m, kind, &state, consts, opts.limits)?;
            if options.is_empty() {
                outcome = SimOutcome::Deadlock { step: i };
                break;
            }
            let (event, params, succ) = options.swap_remove(rng.gen_range(0..options.len()));
            state = succ;
            steps.push(SimStep {
                event,
                params: params.into_iter().collect(),
                state: named(m, &state),
            });
            if let Some(inv) = violated(m, &state, consts, opts.limits)? {
                outcome = SimOutcome::Violation { step: i + 1, invariant: inv.to_string() };
                break;
            }
        }
    }

    Ok(SimReport {
        machine: m.name.clone(),
        seed: opts.seed,
        steps_requested: opts.steps,
        initial,
        steps,
        outcome,
        timing: Timing { elapsed_ms: start.elapsed().as_millis() as u64 },
    })
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
";

    fn heater() -> Machine {
        load_source(HEATER).expect("heater parses").machines[0].clone()
    }

    #[test]
    fn walks_are_reproducible_and_safe() {
        let m = heater();
        let consts = ConstBinding::new();
        let opts = SimOptions { seed: 7, steps: 200, ..Default::default() };
        let a = simulate(&m, &consts, &opts).unwrap();
        let b = simulate(&m, &consts, &opts).unwrap();
        assert_eq!(a.outcome, SimOutcome::Completed);
        assert_eq!(a.steps.len(), 200);
        assert_eq!(serde_json::to_string(&a).ok().map(strip_ms), serde_json::to_string(&b).ok().map(strip_ms));
        // alternation: plant moves on even steps, a controller answers
        assert_eq!(a.steps[0].event, "plant_change_temp");
        assert_ne!(a.steps[1].event, "plant_change_temp");
    }

    fn strip_ms(s: String) -> String {
        let mut v: serde_json::Value = serde_json::from_str(&s).unwrap();
        crate::report::strip_timing(&mut v);
        v.to_string()
    }

    #[test]
    fn zero_steps_is_a_noop() {
        let m = heater();
        let rep = simulate(&m, &ConstBinding::new(), &SimOptions { steps: 0, ..Default::default() })
            .unwrap();
        assert!(rep.steps.is_empty());
        assert_eq!(rep.outcome, SimOutcome::Completed);
    }

    #[test]
    fn deadlock_is_reported_not_crashed() {
        let text = "\
machine stuck
  var x : int[0..3]
  init x = 0
  safety x <= 3
  plant event step
    guard x < 1
    action x' = x + 1
  end
  ctrl event hold
    guard true
    action x' = x
  end
end
";
        let m = load_source(text).unwrap().machines[0].clone();
        let rep = simulate(&m, &ConstBinding::new(), &SimOptions { steps: 10, ..Default::default() })
            .unwrap();
        // plant: 0 -> 1, ctrl holds, then the plant is stuck at step 2
        assert_eq!(rep.outcome, SimOutcome::Deadlock { step: 2 });
        assert_eq!(rep.steps.len(), 2);
    }
}
