//! Shared helpers for the integration suites: bundled model loading, witness
//! re-validation, a deterministic random machine generator, and a
//! brute-force oracle that recomputes every analysis set by direct
//! comprehension over the state space.

#![allow(dead_code)] // each test binary uses its own subset

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use robustikit::analysis::SafparMode;
use robustikit::analysis::checks::Witness;
use robustikit::dsl::{load_source, SourceFile};
use robustikit::model::{
    bind_params, enumerate_states, eval_bool, param_values, ActionPlan, Clause, ConstBinding,
    EvalCtx, EvalError, EvalLimits, Expr, Machine, Odometer, State, UncertaintySpec, Value,
    DEFAULT_STATE_CAP,
};

pub fn models_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../models")
}

pub fn load_model(file: &str) -> SourceFile {
    let path = models_dir().join(file);
    let text = std::fs::read_to_string(&path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    load_source(&text).unwrap_or_else(|diags| {
        panic!("{file} does not load: {:?}", diags.iter().map(|d| d.to_string()).collect::<Vec<_>>())
    })
}

pub fn machine<'a>(src: &'a SourceFile, name: &str) -> &'a Machine {
    src.machines.iter().find(|m| m.name == name).unwrap_or_else(|| panic!("machine {name}"))
}

pub fn spec<'a>(src: &'a SourceFile, name: &str) -> &'a UncertaintySpec {
    src.uncertainties.iter().find(|u| u.name == name).unwrap_or_else(|| panic!("spec {name}"))
}

// ---------------------------------------------------------------------------
// States and witnesses
// ---------------------------------------------------------------------------

pub fn parse_value(m: &Machine, text: &str) -> Value {
    if text == "bot" {
        Value::Bot
    } else if let Ok(i) = text.parse::<i64>() {
        Value::Int(i)
    } else {
        Value::Sym(m.symbols.lookup(text).unwrap_or_else(|| panic!("unknown symbol `{text}`")))
    }
}

/// Rebuilds a full machine state from a witness's plain/perceived maps
/// (perceived keys are stored without their `^` prefix).
pub fn state_from_parts(
    m: &Machine,
    plain: &BTreeMap<String, String>,
    hat: Option<&BTreeMap<String, String>>,
) -> State {
    State(
        m.vars
            .iter()
            .map(|v| match v.name.strip_prefix('^') {
                Some(stripped) => parse_value(m, &hat.expect("witness has a perceived part")[stripped]),
                None => parse_value(m, &plain[&v.name]),
            })
            .collect(),
    )
}

pub fn holds_at(m: &Machine, s: &State, consts: &ConstBinding, e: &Expr) -> bool {
    let mut ctx = EvalCtx::new(m, consts).with_state(s);
    match eval_bool(&mut ctx, e) {
        Ok(b) => b,
        Err(EvalError::BotArith) => false,
        Err(e) => panic!("evaluation failed: {e}"),
    }
}

fn guard_admits(m: &Machine, ev_idx: usize, s: &State, tuple: &[Value], consts: &ConstBinding) -> bool {
    let ev = &m.events[ev_idx];
    let args = bind_params(ev, tuple);
    let mut ctx = EvalCtx::new(m, consts).with_state(s).with_params(&args);
    match eval_bool(&mut ctx, &ev.guard) {
        Ok(b) => b,
        Err(EvalError::BotArith) => false,
        Err(e) => panic!("guard evaluation failed: {e}"),
    }
}

/// Re-checks an invariant-preservation witness from scratch: the pre-state
/// satisfies every invariant, the guard admits the parameters, the successor
/// really is an outcome of the action, and it breaks an invariant.
pub fn revalidate_preservation_witness(m: &Machine, consts: &ConstBinding, w: &Witness) {
    let limits = EvalLimits::default();
    let s = state_from_parts(m, &w.state, w.perceived.as_ref());
    for inv in m.invariants() {
        assert!(holds_at(m, &s, consts, inv), "witness pre-state breaks an invariant: {w:?}");
    }

    let name = w.event.as_deref().expect("witness names an event");
    let (idx, ev) = m
        .events
        .iter()
        .enumerate()
        .find(|(_, e)| e.name == name)
        .unwrap_or_else(|| panic!("unknown event `{name}`"));
    let params = w.params.as_ref().expect("witness carries parameters");
    let tuple: Vec<Value> = ev.params.iter().map(|p| parse_value(m, &params[&p.name])).collect();
    assert!(guard_admits(m, idx, &s, &tuple, consts), "guard rejects the witness: {w:?}");

    let succ = state_from_parts(
        m,
        w.successor.as_ref().expect("witness has a successor"),
        w.successor_perceived.as_ref(),
    );
    let plan = ActionPlan::build(m, ev);
    let args = bind_params(ev, &tuple);
    let mut out = BTreeSet::new();
    plan.run(m, &s, &args, consts, limits, &mut out).expect("action runs");
    assert!(out.contains(&succ), "successor is not an action outcome: {w:?}");

    assert!(
        m.invariants().iter().any(|inv| !holds_at(m, &succ, consts, inv)),
        "witness successor satisfies all invariants: {w:?}"
    );
}

// ---------------------------------------------------------------------------
// Random machine generator
// ---------------------------------------------------------------------------

pub struct GenCase {
    pub text: String,
    pub machine: Machine,
    pub spec: UncertaintySpec,
}

/// Deterministically generates a small valid machine plus an uncertainty
/// description for it. Controller guards are bands over a selector variable,
/// so the events partition the state space by construction.
///
/// The envelope stays within: ≤ 3 variables, integer domains ≤ 20 wide,
/// ≤ 4 controller events, ≤ 60 plain states.
pub fn generate(seed: u64) -> GenCase {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..64 {
        if let Some(case) = try_generate(&mut rng, seed) {
            return case;
        }
    }
    panic!("generator failed to produce a machine for seed {seed}");
}

fn try_generate(rng: &mut ChaCha8Rng, seed: u64) -> Option<GenCase> {
    let has_enum = rng.gen_bool(0.5);
    let v_lo: i64 = rng.gen_range(-6..=6);
    let v_w: i64 = rng.gen_range(4..=10);
    let v_hi = v_lo + v_w - 1;
    let has_u = rng.gen_bool(0.3);
    let u_lo: i64 = rng.gen_range(-2..=2);
    let u_w: i64 = rng.gen_range(2..=3);
    let u_hi = u_lo + u_w - 1;

    let space = v_w * (if has_enum { 2 } else { 1 }) * (if has_u { u_w } else { 1 });
    if space > 60 {
        return None;
    }

    // Band cut points: k contiguous, non-empty, covering intervals over v.
    let four_events = rng.gen_bool(0.15);
    let k_max = (if four_events { 4 } else { 3 }).min(v_w) as usize;
    let k = rng.gen_range(1..=k_max);
    let mut cuts: BTreeSet<i64> = BTreeSet::new();
    while cuts.len() < k - 1 {
        cuts.insert(rng.gen_range(v_lo + 1..=v_hi));
    }
    let mut bounds = vec![v_lo];
    bounds.extend(&cuts);
    bounds.push(v_hi + 1);

    let mut text = String::new();
    text.push_str(&format!("machine g{seed}\n"));
    if has_enum {
        text.push_str("  var mo : { a, b }\n");
    }
    text.push_str(&format!("  var v : int[{v_lo}..{v_hi}]\n"));
    if has_u {
        text.push_str(&format!("  var u : int[{u_lo}..{u_hi}]\n"));
    }
    text.push_str("  init true\n");
    let safety = match rng.gen_range(0..3) {
        0 => "true".to_string(),
        1 => format!("v <= {}", rng.gen_range(v_lo..=v_hi)),
        _ => format!("v >= {}", rng.gen_range(v_lo..=v_hi)),
    };
    text.push_str(&format!("  safety {safety}\n"));

    // One plant event that can move the selector anywhere in a subrange.
    let q_hi = v_hi.min(v_lo + 4);
    text.push_str("  plant event drift\n");
    text.push_str(&format!("    param q : int[{v_lo}..{q_hi}]\n"));
    text.push_str("    guard true\n");
    let mut plant_action = vec!["v' = q".to_string()];
    if has_enum {
        plant_action.push("mo' = mo".to_string());
    }
    if has_u {
        plant_action.push("u' = u".to_string());
    }
    text.push_str(&format!("    action {}\n  end\n", plant_action.join(" and ")));

    for j in 0..k {
        let (band_lo, band_hi) = (bounds[j], bounds[j + 1] - 1);
        // Four-event machines keep their events parameterless so the
        // synthesized compartment events stay small.
        let has_param = k < 4 && rng.gen_bool(0.7);
        let p_lo: i64 = rng.gen_range(-3..=1);
        let p_w: i64 = rng.gen_range(3..=6);
        let p_hi = p_lo + p_w - 1;
        let lifted = has_param && rng.gen_bool(0.25);

        text.push_str(&format!("  ctrl event act{j}\n"));
        if has_param {
            let bot = if lifted { " | bot" } else { "" };
            text.push_str(&format!("    param p : int[{p_lo}..{p_hi}]{bot}\n"));
        }
        let mut guard = format!("{band_lo} <= v and v <= {band_hi}");
        if has_param && rng.gen_bool(0.4) {
            // Satisfiable at every band state: p = p_lo always works.
            let cap = band_hi + p_lo + rng.gen_range(0..=2);
            guard.push_str(&format!(" and v + p <= {cap}"));
        }
        text.push_str(&format!("    guard {guard}\n"));

        let mut action = Vec::new();
        match rng.gen_range(0..10) {
            0 => {} // leave v unconstrained: every domain value is a successor
            1..=4 if has_param => action.push("v' = p".to_string()),
            _ => action.push(format!("v' = {}", rng.gen_range(v_lo..=v_hi))),
        }
        if has_enum && rng.gen_bool(0.9) {
            action.push(format!("mo' = {}", if rng.gen_bool(0.5) { "a" } else { "b" }));
        }
        if has_u {
            action.push(if rng.gen_bool(0.5) {
                "u' = u".to_string()
            } else {
                format!("u' = {}", rng.gen_range(u_lo..=u_hi))
            });
        }
        if action.is_empty() {
            action.push("true".to_string());
        }
        text.push_str(&format!("    action {}\n  end\n", action.join(" and ")));
    }
    text.push_str("end\n\n");

    text.push_str(&format!("uncertainty z{seed} for g{seed}\n"));
    if has_enum && rng.gen_bool(0.5) {
        text.push_str("  perceives mo exactly\n");
    }
    text.push_str(&format!("  perceives v within {}\n", rng.gen_range(0..=3)));
    if has_u && rng.gen_bool(0.6) {
        text.push_str("  perceives u exactly\n");
    }
    text.push_str("end\n");

    let src = match load_source(&text) {
        Ok(src) => src,
        Err(diags) => panic!(
            "generator produced an invalid model (seed {seed}):\n{text}\n{:?}",
            diags.iter().map(|d| d.to_string()).collect::<Vec<_>>()
        ),
    };
    let machine = src.machines.into_iter().next()?;
    let spec = src.uncertainties.into_iter().next()?;
    Some(GenCase { text, machine, spec })
}

// ---------------------------------------------------------------------------
// Brute-force oracle
// ---------------------------------------------------------------------------

pub fn all_states(m: &Machine) -> Vec<State> {
    enumerate_states(m, DEFAULT_STATE_CAP).expect("within cap").collect()
}

/// Parameter tuples of controller event `i` (1-based), by domain product.
pub fn o_tuples(m: &Machine, i: usize) -> Vec<Vec<Value>> {
    let ev = m.controller_events()[i - 1];
    let lists: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();
    let mut odo = Odometer::new(&lists);
    let mut buf = Vec::new();
    let mut out = Vec::new();
    while odo.next_into(&mut buf) {
        out.push(buf.clone());
    }
    out
}

fn ctrl_event_index(m: &Machine, i: usize) -> usize {
    let target = &m.controller_events()[i - 1].name;
    m.events.iter().position(|e| &e.name == target).expect("controller event present")
}

/// True states consistent with perceiving `perceived`, by direct clause
/// interpretation (no support for general relations).
pub fn o_ball(
    m: &Machine,
    spec: &UncertaintySpec,
    perceived: &State,
    consts: &ConstBinding,
) -> Vec<State> {
    assert!(spec.relation.is_none(), "oracle interprets per-variable clauses only");
    all_states(m)
        .into_iter()
        .filter(|s| {
            m.vars.iter().enumerate().all(|(ix, decl)| match spec.clause_for(&decl.name) {
                Clause::Exact => s.0[ix] == perceived.0[ix],
                Clause::Within(r) => {
                    let r = r.resolve(consts).expect("radius resolves");
                    match (s.0[ix], perceived.0[ix]) {
                        (Value::Int(a), Value::Int(b)) => (a - b).abs() <= r,
                        _ => panic!("within clause on non-integer"),
                    }
                }
            })
        })
        .collect()
}

pub fn o_region(m: &Machine, i: usize, s: &State, consts: &ConstBinding) -> bool {
    let ev_idx = ctrl_event_index(m, i);
    o_tuples(m, i).iter().any(|t| guard_admits(m, ev_idx, s, t, consts))
}

/// The unique enabled controller index, if it is unique.
pub fn o_idx(m: &Machine, s: &State, consts: &ConstBinding) -> Option<usize> {
    let nc = m.controller_events().len();
    let enabled: Vec<usize> = (1..=nc).filter(|&i| o_region(m, i, s, consts)).collect();
    match enabled.as_slice() {
        [one] => Some(*one),
        _ => None,
    }
}

pub fn o_par_for(m: &Machine, i: usize, s: &State, consts: &ConstBinding) -> BTreeSet<Vec<Value>> {
    let ev_idx = ctrl_event_index(m, i);
    o_tuples(m, i).into_iter().filter(|t| guard_admits(m, ev_idx, s, t, consts)).collect()
}

/// Parameters of `i` valid at every ball member where `i` is the controller
/// choice: {p | ∀s ∈ ball. idx(s) = i ⇒ guard_i(s, p)}.
pub fn o_par_eps(
    m: &Machine,
    spec: &UncertaintySpec,
    i: usize,
    perceived: &State,
    consts: &ConstBinding,
) -> BTreeSet<Vec<Value>> {
    let ev_idx = ctrl_event_index(m, i);
    let members: Vec<State> = o_ball(m, spec, perceived, consts)
        .into_iter()
        .filter(|s| o_idx(m, s, consts) == Some(i))
        .collect();
    o_tuples(m, i)
        .into_iter()
        .filter(|t| members.iter().all(|s| guard_admits(m, ev_idx, s, t, consts)))
        .collect()
}

/// Successors of applying event `ev_idx` with `tuple` at `s`, by checking
/// the action predicate against every candidate post-state.
pub fn o_action_states(
    m: &Machine,
    ev_idx: usize,
    s: &State,
    tuple: &[Value],
    consts: &ConstBinding,
) -> BTreeSet<State> {
    let ev = &m.events[ev_idx];
    let args = bind_params(ev, tuple);
    all_states(m)
        .into_iter()
        .filter(|cand| {
            let mut ctx =
                EvalCtx::new(m, consts).with_state(s).with_primed(cand).with_params(&args);
            match eval_bool(&mut ctx, &ev.action) {
                Ok(b) => b,
                Err(EvalError::BotArith) => false,
                Err(e) => panic!("action evaluation failed: {e}"),
            }
        })
        .collect()
}

/// Parameters of `i` whose action is applicable and lands inside `inv` at
/// every relevant ball member.
pub fn o_safpar(
    m: &Machine,
    spec: &UncertaintySpec,
    i: usize,
    perceived: &State,
    inv: &Expr,
    mode: SafparMode,
    consts: &ConstBinding,
) -> BTreeSet<Vec<Value>> {
    let ev_idx = ctrl_event_index(m, i);
    let members: Vec<State> = o_ball(m, spec, perceived, consts)
        .into_iter()
        .filter(|s| mode == SafparMode::Formula || o_region(m, i, s, consts))
        .collect();
    o_tuples(m, i)
        .into_iter()
        .filter(|t| {
            members.iter().all(|s| {
                let succ = o_action_states(m, ev_idx, s, t, consts);
                !succ.is_empty() && succ.iter().all(|s2| holds_at(m, s2, consts, inv))
            })
        })
        .collect()
}

pub fn o_compartment(
    m: &Machine,
    spec: &UncertaintySpec,
    perceived: &State,
    consts: &ConstBinding,
) -> BTreeSet<usize> {
    let nc = m.controller_events().len();
    let ball = o_ball(m, spec, perceived, consts);
    (1..=nc).filter(|&i| ball.iter().any(|s| o_region(m, i, s, consts))).collect()
}
