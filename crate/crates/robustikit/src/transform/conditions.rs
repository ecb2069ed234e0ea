//! Decision procedures for the two robustification constructions.
//!
//! Both conditions quantify over every perceived state in the full variable
//! product of the plain machine. Witness states in the reports are therefore
//! *perceived* states; their compartment is attached under `indices`.
//!
//! - [`preserving_condition`]: at every perceived state, some all-real
//!   parameter tuple drawn from the robust parameter sets of the compartment
//!   events is jointly executable — at each ball member the actions of all
//!   compartment events share at least one successor. This is exactly the
//!   satisfiability of the action-preserving heterogeneous guard.
//! - [`repurposing_condition`]: at every perceived state, at least one
//!   compartment event has a nonempty safe parameter set relative to the
//!   plain safety invariant. Were every set empty, the "no parameter"
//!   fallback would be forced on every index and the action-repurposing
//!   event could never fire.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use super::TransformError;
use crate::analysis::checks::{checked_size, run_sink_scan, CheckOptions, CheckReport, Witness};
use crate::analysis::funcs::{compartment, eps_ball, idx_c, par_c_for, region_holds, SafparMode};
use crate::model::enumerate::{bind_params, param_values, Odometer};
use crate::model::{
    eval_bool, state_rank, state_unrank, ActionPlan, ConstBinding, EvalCtx, EvalLimits, EventDef,
    Machine, State, UncertaintySpec, Value,
};

/// Ball members of a perceived state annotated with the index of their
/// unique enabled controller event.
fn indexed_ball(
    m: &Machine,
    spec: &UncertaintySpec,
    perceived: &State,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<Vec<(State, usize)>, TransformError> {
    eps_ball(m, spec, perceived, consts, limits)?
        .into_iter()
        .map(|s| {
            let i = idx_c(m, &s, consts, limits)?;
            Ok((s, i))
        })
        .collect()
}

fn witness_perceived(m: &Machine, s: &State, comp: &BTreeSet<usize>, note: String) -> Witness {
    let mut w = Witness::at(m, s);
    w.indices = Some(comp.iter().copied().collect());
    w.note = Some(note);
    w
}

/// Checks that the action-preserving construction yields a usable controller
/// everywhere: for every perceived state there is a parameter tuple, one
/// real entry per compartment event, that each event's robust parameter set
/// admits and whose actions agree on a successor at every ball member.
pub fn preserving_condition(
    m: &Machine,
    spec: &UncertaintySpec,
    consts: &ConstBinding,
    opts: &CheckOptions,
) -> Result<CheckReport, TransformError> {
    let start = Instant::now();
    let n = checked_size(m, opts.cap)?;
    let ctrl = m.controller_events();
    let plans: Vec<ActionPlan> = ctrl.iter().map(|ev| ActionPlan::build(m, ev)).collect();
    let limits = opts.limits;

    let sink = run_sink_scan(n, opts, |r, sink| {
        let perceived = state_unrank(m, r as u128);
        let members = indexed_ball(m, spec, &perceived, consts, limits)?;
        let comp: BTreeSet<usize> = members.iter().map(|(_, i)| *i).collect();

        // robust parameter set per compartment event: intersection of the
        // admitted tuples over the ball members it is enabled at
        let mut sets: Vec<(usize, Vec<Vec<Value>>)> = Vec::new();
        let mut empty_at: Option<usize> = None;
        for &i in &comp {
            let mut acc: Option<BTreeSet<Vec<Value>>> = None;
            for (s, idx) in &members {
                if *idx != i {
                    continue;
                }
                let ps = par_c_for(m, i, s, consts, limits)?;
                acc = Some(match acc {
                    None => ps,
                    Some(prev) => prev.intersection(&ps).cloned().collect(),
                });
            }
            let set = acc.expect("compartment index has a member");
            if set.is_empty() {
                empty_at = Some(i);
                break;
            }
            sets.push((i, set.into_iter().collect()));
        }

        if let Some(i) = empty_at {
            sink.push_with((r as u128, 0, 0, 0), || {
                witness_perceived(
                    m,
                    &perceived,
                    &comp,
                    format!(
                        "perceived state: the robust parameter set of `{}` is empty",
                        ctrl[i - 1].name
                    ),
                )
            });
            return Ok(());
        }

        // search for a jointly executable tuple
        let lists: Vec<Vec<Vec<Value>>> = sets.iter().map(|(_, s)| s.clone()).collect();
        let mut found = false;
        'tuples: for combo in product(&lists) {
            for (s, _) in &members {
                let mut joint: Option<BTreeSet<State>> = None;
                for (k, (i, _)) in sets.iter().enumerate() {
                    let ev = ctrl[*i - 1];
                    let mut out = BTreeSet::new();
                    plans[*i - 1].run(m, s, &bind_params(ev, combo[k]), consts, limits, &mut out)?;
                    joint = Some(match joint {
                        None => out,
                        Some(prev) => prev.intersection(&out).cloned().collect(),
                    });
                    if joint.as_ref().is_some_and(|j| j.is_empty()) {
                        continue 'tuples;
                    }
                }
            }
            found = true;
            break;
        }

        if !found {
            sink.push_with((r as u128, 0, 0, 0), || {
                witness_perceived(
                    m,
                    &perceived,
                    &comp,
                    "perceived state: no parameter tuple of the compartment events is \
                     jointly executable over the ball"
                        .to_string(),
                )
            });
        }
        Ok::<_, TransformError>(())
    })?;

    Ok(CheckReport::new("preserving_condition", &m.name, n as u64, sink, start))
}

/// Checks that the action-repurposing construction yields a usable
/// controller everywhere: for every perceived state, some compartment event
/// has a nonempty safe parameter set relative to the plain safety invariant.
pub fn repurposing_condition(
    m: &Machine,
    spec: &UncertaintySpec,
    consts: &ConstBinding,
    opts: &CheckOptions,
    mode: SafparMode,
) -> Result<CheckReport, TransformError> {
    let start = Instant::now();
    let n = checked_size(m, opts.cap)?;
    let ctrl = m.controller_events();
    let plans: Vec<ActionPlan> = ctrl.iter().map(|ev| ActionPlan::build(m, ev)).collect();
    let limits = opts.limits;

    let sink = run_sink_scan(n, opts, |r, sink| {
        let perceived = state_unrank(m, r as u128);
        let members = indexed_ball(m, spec, &perceived, consts, limits)?;
        let comp: BTreeSet<usize> = members.iter().map(|(_, i)| *i).collect();

        let mut any = false;
        for &i in &comp {
            if has_safe_tuple(m, ctrl[i - 1], &plans[i - 1], &members, i, mode, consts, limits)? {
                any = true;
                break;
            }
        }

        if !any {
            sink.push_with((r as u128, 0, 0, 0), || {
                witness_perceived(
                    m,
                    &perceived,
                    &comp,
                    "perceived state: every compartment event has an empty safe parameter set"
                        .to_string(),
                )
            });
        }
        Ok::<_, TransformError>(())
    })?;

    Ok(CheckReport::new("repurposing_condition", &m.name, n as u64, sink, start))
}

/// Nonemptiness of the safe parameter set of `ev` over the given ball, with
/// early exit on the first safe tuple.
#[allow(clippy::too_many_arguments)]
fn has_safe_tuple(
    m: &Machine,
    ev: &EventDef,
    plan: &ActionPlan,
    members: &[(State, usize)],
    i: usize,
    mode: SafparMode,
    consts: &ConstBinding,
    limits: EvalLimits,
) -> Result<bool, TransformError> {
    // under the enabled-states reading, only ball members whose guard is
    // satisfiable constrain the tuple
    let considered: Vec<&State> = match mode {
        SafparMode::Formula => members.iter().map(|(s, _)| s).collect(),
        SafparMode::Prose => {
            let mut v = Vec::new();
            for (s, _) in members {
                if region_holds(m, i, s, consts, limits)? {
                    v.push(s);
                }
            }
            v
        }
    };
    let lists: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();
    let mut odo = Odometer::new(&lists);
    let mut tuple = Vec::new();
    'tuples: while odo.next_into(&mut tuple) {
        for s in &considered {
            let mut out = BTreeSet::new();
            plan.run(m, s, &bind_params(ev, &tuple), consts, limits, &mut out)?;
            if out.is_empty() {
                continue 'tuples;
            }
            for succ in &out {
                let mut ctx = EvalCtx::new(m, consts).with_state(succ);
                ctx.limits = limits;
                if !eval_bool(&mut ctx, &m.safety)? {
                    continue 'tuples;
                }
            }
        }
        return Ok(true);
    }
    Ok(false)
}

/// Cartesian product over tuple lists, yielding one vector of slice views
/// per combination; a single empty combination when `lists` is empty.
fn product(lists: &[Vec<Vec<Value>>]) -> impl Iterator<Item = Vec<&[Value]>> {
    let mut idx = vec![0usize; lists.len()];
    let mut done = lists.iter().any(|l| l.is_empty());
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let combo: Vec<&[Value]> = lists.iter().zip(&idx).map(|(l, &k)| l[k].as_slice()).collect();
        let mut k = lists.len();
        loop {
            if k == 0 {
                done = true;
                break;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                break;
            }
            idx[k] = 0;
        }
        Some(combo)
    })
}

/// Map from each realized compartment (ascending controller indices) to the
/// least perceived state realizing it, over the full perceived-state
/// product.
pub fn compartment_table(
    m: &Machine,
    spec: &UncertaintySpec,
    consts: &ConstBinding,
    opts: &CheckOptions,
) -> Result<BTreeMap<Vec<usize>, State>, TransformError> {
    use rayon::prelude::*;
    let n = checked_size(m, opts.cap)?;
    let limits = opts.limits;
    (0..n)
        .into_par_iter()
        .try_fold(BTreeMap::<Vec<usize>, State>::new, |mut map, r| {
            let perceived = state_unrank(m, r as u128);
            let comp: Vec<usize> =
                compartment(m, spec, &perceived, consts, limits)?.into_iter().collect();
            // ranks ascend within a fold chunk, so the first hit is least
            map.entry(comp).or_insert(perceived);
            Ok::<_, TransformError>(map)
        })
        .try_reduce(BTreeMap::new, |mut a, b| {
            for (k, v) in b {
                match a.get(&k) {
                    Some(cur) if state_rank(m, cur) <= state_rank(m, &v) => {}
                    _ => {
                        a.insert(k, v);
                    }
                }
            }
            Ok(a)
        })
}
