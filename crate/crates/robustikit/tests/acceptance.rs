//! Acceptance suite: one test per pinned behavior, numbered so the harness
//! output itself reads as a checklist. Expected values are computed from
//! first principles in each test (or by the brute-force oracle in
//! `common`), never from the library's own answers.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use common::*;
use robustikit::analysis::{
    check_feasibility, check_forward_simulation, check_invariant_preservation,
    check_partitioning, compartment, eps_ball, idx_c, par_c, par_c_eps, region_holds, safpar,
    CheckOptions, SafparMode, WitnessPolicy,
};
use robustikit::explore::sweep;
use robustikit::model::{
    enumerate_states, eval_bool, successors, ConstBinding, EvalCtx, EvalLimits, Machine, State,
    UncertaintySpec, Value, DEFAULT_STATE_CAP,
};
use robustikit::report::{render, strip_timing, to_value};
use robustikit::transform::{
    inject, robustify, subset_realization, RobustMethod, RobustifyOptions,
};

fn no_consts() -> ConstBinding {
    ConstBinding::new()
}

fn i(v: i64) -> Value {
    Value::Int(v)
}

/// Admitted parameter tuples of `event_name` at `state`, by guard
/// enumeration over the full parameter domain product.
fn admitted(m: &Machine, event_name: &str, state: &State, consts: &ConstBinding) -> BTreeSet<Vec<Value>> {
    use robustikit::model::{bind_params, param_values, Odometer};
    let ev = m
        .events
        .iter()
        .find(|e| e.name == event_name)
        .unwrap_or_else(|| panic!("event {event_name} missing"));
    let lists: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();
    let mut odo = Odometer::new(&lists);
    let mut buf = Vec::new();
    let mut out = BTreeSet::new();
    while odo.next_into(&mut buf) {
        let args = bind_params(ev, &buf);
        let mut ctx = EvalCtx::new(m, consts).with_state(state).with_params(&args);
        if let Ok(true) = eval_bool(&mut ctx, &ev.guard) {
            out.insert(buf.clone());
        }
    }
    out
}

/// Paired probe state (v = reading for every variable): always consistent,
/// and hetero guards only read the perceived half anyway.
fn doubled(pm: &Machine, tn: &str, temp: i64) -> State {
    let tn_sym = Value::Sym(pm.symbols.lookup(tn).unwrap());
    State(vec![tn_sym, i(temp), tn_sym, i(temp)])
}

// ---------------------------------------------------------------------------
// 1. The base heater passes every exhaustive check.
// ---------------------------------------------------------------------------

#[test]
fn criterion_1_base_heater_passes_all_checks() {
    let src = load_model("ht0.cpm");
    let m = machine(&src, "ht0");
    let consts = no_consts();
    let opts = CheckOptions::default();

    let start = Instant::now();
    let part = check_partitioning(m, &consts, &opts).unwrap();
    let pres = check_invariant_preservation(m, &consts, &opts).unwrap();
    let feas = check_feasibility(m, &consts, &opts).unwrap();
    let elapsed = start.elapsed();

    assert!(part.verdict.holds(), "partitioning: {:?}", part.witnesses.first());
    assert!(pres.verdict.holds(), "preservation: {:?}", pres.witnesses.first());
    assert!(feas.verdict.holds(), "feasibility: {:?}", feas.witnesses.first());
    assert!(elapsed < Duration::from_secs(5), "checks took {elapsed:?}");
}

// ---------------------------------------------------------------------------
// 2. Injecting a radius-3 sensor error makes invariant preservation fail,
//    with an overshoot counterexample among the reported witnesses.
// ---------------------------------------------------------------------------

#[test]
fn criterion_2_injected_heater_fails_preservation_with_overshoot() {
    let src = load_model("ht0.cpm");
    let m = machine(&src, "ht0");
    let spec = spec(&src, "eps0");
    let consts = no_consts();

    let pm = inject(m, spec, &consts, &CheckOptions::default()).unwrap();
    let opts = CheckOptions { policy: WitnessPolicy::All, ..CheckOptions::default() };
    let report = check_invariant_preservation(&pm.machine, &consts, &opts).unwrap();
    assert!(!report.verdict.holds(), "injection should break preservation");
    assert!(!report.witnesses.is_empty());

    // Every reported witness re-validates from scratch.
    for w in &report.witnesses {
        revalidate_preservation_witness(&pm.machine, &consts, w);
    }

    // The overshoot shape is among them: the room is genuinely comfortable,
    // the sensor reads cold, and the commanded heat exits the safe band.
    let temp = |map: &BTreeMap<String, String>| map["temp"].parse::<i64>().unwrap();
    let overshoots = report
        .witnesses
        .iter()
        .filter(|w| {
            let t = temp(&w.state);
            let t_hat = temp(w.perceived.as_ref().unwrap());
            let t_next = temp(w.successor.as_ref().unwrap());
            (30..=40).contains(&t) && t_hat < 30 && t_next > 40
        })
        .count();
    assert!(overshoots > 0, "no comfortable-but-read-cold overshoot witness");

    let narrative = report.witnesses.iter().any(|w| {
        temp(&w.state) == 32
            && temp(w.perceived.as_ref().unwrap()) == 29
            && w.params.as_ref().unwrap()["dh"] == "11"
            && temp(w.successor.as_ref().unwrap()) == 43
    });
    assert!(narrative, "witness (temp=32, reading 29, dh=11 -> 43) not found");
}

// ---------------------------------------------------------------------------
// 3. The action-preserving construction passes preservation, feasibility,
//    partitioning, and refines the original machine.
// ---------------------------------------------------------------------------

#[test]
fn criterion_3_preserving_machine_passes_all_checks_and_refines_original() {
    let src = load_model("ht0.cpm");
    let m = machine(&src, "ht0");
    let sp = spec(&src, "eps0");
    let consts = no_consts();
    let check = CheckOptions::default();

    let start = Instant::now();
    let pm = inject(m, sp, &consts, &check).unwrap();
    let out = robustify(&pm, RobustMethod::Preserving, &consts, &RobustifyOptions::default()).unwrap();
    assert!(out.condition.verdict.holds(), "preserving condition should hold at radius 3");
    let robust = out.machine.as_ref().expect("usable construction yields a machine");

    let pres = check_invariant_preservation(robust, &consts, &check).unwrap();
    let feas = check_feasibility(robust, &consts, &check).unwrap();
    let part = check_partitioning(robust, &consts, &check).unwrap();
    let fsim = check_forward_simulation(robust, sp, m, &consts, &check).unwrap();
    let elapsed = start.elapsed();

    assert!(pres.verdict.holds(), "preservation: {:?}", pres.witnesses.first());
    assert!(feas.verdict.holds(), "feasibility: {:?}", feas.witnesses.first());
    assert!(part.verdict.holds(), "partitioning: {:?}", part.witnesses.first());
    assert!(fsim.verdict.holds(), "forward simulation: {:?}", fsim.witnesses.first());
    assert!(elapsed < Duration::from_secs(60), "construction + checks took {elapsed:?}");
}

// ---------------------------------------------------------------------------
// 4. At a reading of 29 the joint heat/keep-safe event admits exactly the
//    diagonal tuples dh = dt ∈ [4, 8].
// ---------------------------------------------------------------------------

#[test]
fn criterion_4_preserving_joint_event_admits_exact_diagonal() {
    let src = load_model("ht0.cpm");
    let m = machine(&src, "ht0");
    let sp = spec(&src, "eps0");
    let consts = no_consts();

    let pm = inject(m, sp, &consts, &CheckOptions::default()).unwrap();
    let out = robustify(&pm, RobustMethod::Preserving, &consts, &RobustifyOptions::default()).unwrap();
    let robust = out.machine.as_ref().unwrap();

    let ev = robust
        .events
        .iter()
        .find(|e| e.name == "ctrl_heat_keep_safe_hetero")
        .expect("joint heat/keep-safe event");
    let names: Vec<&str> = ev.params.iter().map(|p| p.name.as_str()).collect();
    assert_eq!(names, ["dh", "dt"], "joint event carries both members' parameters");

    let got = admitted(robust, "ctrl_heat_keep_safe_hetero", &doubled(robust, "c", 29), &consts);
    let want: BTreeSet<Vec<Value>> = (4..=8).map(|v| vec![i(v), i(v)]).collect();
    assert_eq!(got, want, "admitted tuples at reading 29");
}

// ---------------------------------------------------------------------------
// 5. The all-three-regions compartment is vacuous at radius 3 but realized
//    at radius 7, where a reading of 35 spans cold, comfortable, and hot.
// ---------------------------------------------------------------------------

#[test]
fn criterion_5_three_region_compartment_vacuous_at_3_realized_at_7() {
    let src = load_model("ht0.cpm");
    let m = machine(&src, "ht0");
    let consts = no_consts();
    let opts = CheckOptions { policy: WitnessPolicy::All, ..CheckOptions::default() };
    let limits = EvalLimits::default();

    let narrow = subset_realization(m, spec(&src, "eps0"), &[1, 2, 3], &consts, &opts).unwrap();
    assert!(narrow.vacuous, "radius 3 cannot span all three regions");
    assert_eq!(narrow.realized_count, 0);
    assert!(narrow.witnesses.is_empty());

    let wide = subset_realization(m, spec(&src, "eps7"), &[1, 2, 3], &consts, &opts).unwrap();
    assert!(!wide.vacuous, "radius 7 spans all three regions");
    assert!(wide.realized_count > 0);

    let readings: BTreeSet<i64> =
        wide.witnesses.iter().map(|w| w.state["temp"].parse().unwrap()).collect();
    assert!(readings.contains(&35), "reading 35 should realize the subset, got {readings:?}");

    // At a reading of 35 the radius-7 ball really does contain a state in
    // each controller region.
    for w in wide.witnesses.iter().filter(|w| w.state["temp"] == "35") {
        let perceived = state_from_parts(m, &w.state, None);
        let ball = eps_ball(m, spec(&src, "eps7"), &perceived, &consts, limits).unwrap();
        for region in 1..=3 {
            assert!(
                ball.iter().any(|s| region_holds(m, region, s, &consts, limits).unwrap()),
                "ball of reading 35 misses region {region}"
            );
        }
    }
}

// ---------------------------------------------------------------------------
// 6. The action-repurposing construction is safe, and its joint event's
//    guard admits a heat amount exactly when that amount is safe for every
//    temperature consistent with the reading.
// ---------------------------------------------------------------------------

#[test]
fn criterion_6_repurposing_machine_safe_and_guard_matches_consistency_window() {
    let src = load_model("ht0.cpm");
    let m = machine(&src, "ht0");
    let sp = spec(&src, "eps0");
    let consts = no_consts();
    let check = CheckOptions::default();
    let limits = EvalLimits::default();

    let pm = inject(m, sp, &consts, &check).unwrap();
    let out = robustify(&pm, RobustMethod::Repurposing, &consts, &RobustifyOptions::default()).unwrap();
    assert!(out.condition.verdict.holds(), "repurposing condition should hold at radius 3");
    let robust = out.machine.as_ref().unwrap();

    let pres = check_invariant_preservation(robust, &consts, &check).unwrap();
    let feas = check_feasibility(robust, &consts, &check).unwrap();
    assert!(pres.verdict.holds(), "preservation: {:?}", pres.witnesses.first());
    assert!(feas.verdict.holds(), "feasibility: {:?}", feas.witnesses.first());

    // For every reading whose compartment is {heat, keep-safe}: dh is
    // admitted (with some dt) exactly when 30 <= t + dh <= 40 for every
    // temperature t within 3 of the reading.
    let mut readings_checked = 0u32;
    for reading in all_states(m) {
        let comp = compartment(m, sp, &reading, &consts, limits).unwrap();
        if comp != BTreeSet::from([1usize, 2]) {
            continue;
        }
        readings_checked += 1;
        let (tn_hat, t_hat) = match (&reading.0[0], &reading.0[1]) {
            (Value::Sym(s), Value::Int(t)) => (m.symbols.name(*s).to_string(), *t),
            other => panic!("unexpected reading {other:?}"),
        };

        let probe = doubled(robust, &tn_hat, t_hat);
        let joint = admitted(robust, "ctrl_heat_keep_safe_hetero", &probe, &consts);
        let got: BTreeSet<i64> = joint
            .iter()
            .map(|t| match t[0] {
                Value::Int(v) => v,
                _ => panic!("dh should be an integer"),
            })
            .collect();

        let lo = (t_hat - 3).max(-20);
        let hi = (t_hat + 3).min(80);
        let want: BTreeSet<i64> =
            (0..=60).filter(|dh| (lo..=hi).all(|t| (30..=40).contains(&(t + dh)))).collect();
        assert_eq!(got, want, "heat window at reading ({tn_hat}, {t_hat})");
    }
    assert!(readings_checked >= 2, "expected several {{1,2}} readings");
}

// ---------------------------------------------------------------------------
// 7. Sweeping the symbolic sensor bound on the eco heater: the preserving
//    construction tolerates up to 2, the repurposing one up to 5.
// ---------------------------------------------------------------------------

#[test]
fn criterion_7_tolerance_sweep_maxima() {
    let src = load_model("ht1.cpm");
    let m = machine(&src, "ht1");
    let sp = spec(&src, "epsdt");
    let consts = no_consts();

    let start = Instant::now();
    let report =
        sweep(m, sp, Some("Delta"), 0, 10, &consts, &RobustifyOptions::default()).unwrap();
    let elapsed = start.elapsed();

    assert_eq!(report.max_preserving, Some(2));
    assert_eq!(report.max_repurposing, Some(5));
    assert!(!report.non_monotone);
    assert_eq!(report.points.len(), 11);
    for p in &report.points {
        assert_eq!(p.preserving, p.value <= 2, "preserving at {}", p.value);
        assert_eq!(p.repurposing, p.value <= 5, "repurposing at {}", p.value);
    }
    assert!(elapsed < Duration::from_secs(300), "sweep took {elapsed:?}");
}

// ---------------------------------------------------------------------------
// 8. On randomly generated small machines, every analysis agrees with a
//    brute-force comprehension oracle; injection maintains the pairing
//    condition across all transitions; pruning never changes behavior.
// ---------------------------------------------------------------------------

#[test]
fn criterion_8_random_machines_agree_with_oracle() {
    let consts = no_consts();
    let limits = EvalLimits::default();
    let check = CheckOptions::default();

    for seed in 0..120u64 {
        let case = generate(seed);
        let m = &case.machine;
        let sp = &case.spec;
        let nc = m.controller_events().len();
        let states = all_states(m);
        let ctx = |s: &State| format!("seed {seed}, state {s:?}\n{}", case.text);

        // Pointwise functions against the oracle.
        for s in &states {
            let want_idx = o_idx(m, s, &consts)
                .unwrap_or_else(|| panic!("generator broke partitioning: {}", ctx(s)));
            assert_eq!(idx_c(m, s, &consts, limits).unwrap(), want_idx, "idx: {}", ctx(s));
            let (pi, ptuples) = par_c(m, s, &consts, limits).unwrap();
            assert_eq!(pi, want_idx, "par index: {}", ctx(s));
            assert_eq!(ptuples, o_par_for(m, want_idx, s, &consts), "par tuples: {}", ctx(s));
            for i in 1..=nc {
                assert_eq!(
                    region_holds(m, i, s, &consts, limits).unwrap(),
                    o_region(m, i, s, &consts),
                    "region {i}: {}",
                    ctx(s)
                );
                assert_eq!(
                    robustikit::analysis::par_c_for(m, i, s, &consts, limits).unwrap(),
                    o_par_for(m, i, s, &consts),
                    "par_for {i}: {}",
                    ctx(s)
                );
            }
        }

        // Perception-indexed sets against the oracle.
        for reading in &states {
            let ball: BTreeSet<State> =
                eps_ball(m, sp, reading, &consts, limits).unwrap().into_iter().collect();
            let want_ball: BTreeSet<State> = o_ball(m, sp, reading, &consts).into_iter().collect();
            assert_eq!(ball, want_ball, "ball: {}", ctx(reading));

            assert_eq!(
                compartment(m, sp, reading, &consts, limits).unwrap(),
                o_compartment(m, sp, reading, &consts),
                "compartment: {}",
                ctx(reading)
            );
            for i in 1..=nc {
                assert_eq!(
                    par_c_eps(m, sp, i, reading, &consts, limits).unwrap(),
                    o_par_eps(m, sp, i, reading, &consts),
                    "par_eps {i}: {}",
                    ctx(reading)
                );
                assert_eq!(
                    safpar(m, sp, i, reading, &m.safety, SafparMode::Formula, &consts, limits)
                        .unwrap(),
                    o_safpar(m, sp, i, reading, &m.safety, SafparMode::Formula, &consts),
                    "safpar formula {i}: {}",
                    ctx(reading)
                );
                if seed % 2 == 0 {
                    assert_eq!(
                        safpar(m, sp, i, reading, &m.safety, SafparMode::Prose, &consts, limits)
                            .unwrap(),
                        o_safpar(m, sp, i, reading, &m.safety, SafparMode::Prose, &consts),
                        "safpar prose {i}: {}",
                        ctx(reading)
                    );
                }
            }
        }

        // Injection: every transition out of a pairing-consistent state
        // lands in a pairing-consistent state.
        let pm = inject(m, sp, &consts, &check).unwrap();
        let paired = &pm.machine;
        let pairing = paired.uncertain.as_ref().expect("paired machine has a pairing condition");
        let consistent: Vec<State> = enumerate_states(paired, DEFAULT_STATE_CAP)
            .unwrap()
            .filter(|q| holds_at(paired, q, &consts, pairing))
            .collect();
        assert!(!consistent.is_empty(), "seed {seed}: no consistent paired state");
        for q in &consistent {
            for q2 in successors(paired, q, &consts, limits).unwrap() {
                assert!(
                    holds_at(paired, &q2, &consts, pairing),
                    "seed {seed}: transition out of {q:?} breaks pairing at {q2:?}\n{}",
                    case.text
                );
            }
        }

        // Pruning: dropped subsets are never realized, and the pruned and
        // unpruned drafts have identical transitions from every consistent
        // state.
        for method in [RobustMethod::Preserving, RobustMethod::Repurposing] {
            let kept =
                robustify(&pm, method, &consts, &RobustifyOptions::default()).unwrap();
            let full = robustify(
                &pm,
                method,
                &consts,
                &RobustifyOptions { prune: false, ..RobustifyOptions::default() },
            )
            .unwrap();
            for (subset, name) in &kept.pruned {
                assert!(
                    !states.iter().any(|r| o_compartment(m, sp, r, &consts) == subset.iter().copied().collect()),
                    "seed {seed}: pruned {name} ({subset:?}) is realized"
                );
            }
            for q in &consistent {
                assert_eq!(
                    successors(&kept.draft, q, &consts, limits).unwrap(),
                    successors(&full.draft, q, &consts, limits).unwrap(),
                    "seed {seed}: pruning changed behavior at {q:?}\n{}",
                    case.text
                );
            }
        }
    }
}

// ---------------------------------------------------------------------------
// 9. Every report is byte-identical across runs once timing is stripped.
// ---------------------------------------------------------------------------

#[test]
fn criterion_9_reports_are_byte_identical_across_runs() {
    let one = pipeline_reports();
    let two = pipeline_reports();
    assert_eq!(one, two, "reports differ between identical runs");
    assert!(!one.contains("elapsed_ms"), "timing survived stripping");
}

/// Runs the checks, constructions, vacuity queries, and the sweep end to
/// end, and renders every report into one JSON document with timing
/// removed. Loads everything from disk afresh so no state is shared
/// between invocations.
fn pipeline_reports() -> String {
    let src = load_model("ht0.cpm");
    let m = machine(&src, "ht0");
    let eps0 = spec(&src, "eps0");
    let eps7 = spec(&src, "eps7");
    let src1 = load_model("ht1.cpm");
    let m1 = machine(&src1, "ht1");
    let epsdt = spec(&src1, "epsdt");
    let consts = no_consts();
    let check = CheckOptions::default();
    let all = CheckOptions { policy: WitnessPolicy::All, ..CheckOptions::default() };

    let mut parts: Vec<serde_json::Value> = Vec::new();

    // Base obligations.
    parts.push(to_value(&check_partitioning(m, &consts, &check).unwrap()));
    parts.push(to_value(&check_invariant_preservation(m, &consts, &check).unwrap()));
    parts.push(to_value(&check_feasibility(m, &consts, &check).unwrap()));

    // Injection failure with every witness.
    let pm = inject(m, eps0, &consts, &check).unwrap();
    parts.push(to_value(&check_invariant_preservation(&pm.machine, &consts, &all).unwrap()));

    // Both constructions and their check reports.
    let pr = robustify(&pm, RobustMethod::Preserving, &consts, &RobustifyOptions::default()).unwrap();
    let robust = pr.machine.as_ref().unwrap();
    parts.push(to_value(&check_invariant_preservation(robust, &consts, &check).unwrap()));
    parts.push(to_value(&check_feasibility(robust, &consts, &check).unwrap()));
    parts.push(to_value(&check_partitioning(robust, &consts, &check).unwrap()));
    parts.push(to_value(&check_forward_simulation(robust, eps0, m, &consts, &check).unwrap()));

    let joint = admitted(robust, "ctrl_heat_keep_safe_hetero", &doubled(robust, "c", 29), &consts);
    parts.push(serde_json::json!(joint
        .iter()
        .map(|t| t.iter().map(|v| v.display(&robust.symbols)).collect::<Vec<_>>())
        .collect::<Vec<_>>()));

    let rr = robustify(&pm, RobustMethod::Repurposing, &consts, &RobustifyOptions::default()).unwrap();
    let robust_rr = rr.machine.as_ref().unwrap();
    parts.push(to_value(&check_invariant_preservation(robust_rr, &consts, &check).unwrap()));
    parts.push(to_value(&check_feasibility(robust_rr, &consts, &check).unwrap()));

    // Vacuity at both radii.
    parts.push(to_value(&subset_realization(m, eps0, &[1, 2, 3], &consts, &all).unwrap()));
    parts.push(to_value(&subset_realization(m, eps7, &[1, 2, 3], &consts, &all).unwrap()));

    // The sweep.
    parts.push(to_value(
        &sweep(m1, epsdt, Some("Delta"), 0, 10, &consts, &RobustifyOptions::default()).unwrap(),
    ));

    let mut doc = serde_json::Value::Array(parts);
    strip_timing(&mut doc);
    render(&doc)
}
