//! Build the action-preserving robustification of the heater under a
//! three-degree sensor error, then prove it correct exhaustively.
//!
//! The construction replaces the controller events with one event per set of
//! original events the controller cannot tell apart. Where several originals
//! overlap, the synthesized event performs a step every overlapping action
//! agrees on — so each robust transition projects onto a transition of the
//! original machine (checked here as forward simulation).
//!
//! ```text
//! cargo run --example robustify_preserving
//! ```

use std::time::Instant;

use robustikit::analysis::checks::{
    check_feasibility, check_forward_simulation, check_invariant_preservation,
    check_partitioning, CheckOptions,
};
use robustikit::dsl::load_source;
use robustikit::model::ConstBinding;
use robustikit::transform::{inject, robustify, RobustMethod, RobustifyOptions};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ht0.cpm");
    let text = std::fs::read_to_string(path).expect("bundled model");
    let src = load_source(&text).expect("ht0.cpm loads");
    let m = &src.machines[0];
    let eps0 = src.uncertainties.iter().find(|u| u.name == "eps0").unwrap();

    let consts = ConstBinding::new();
    let opts = RobustifyOptions::default();
    let start = Instant::now();

    let paired = inject(m, eps0, &consts, &opts.check).unwrap();
    let out = robustify(&paired, RobustMethod::Preserving, &consts, &opts).unwrap();

    println!("usability condition: {:?}", out.condition.verdict);
    for (indices, name) in &out.retained {
        println!("  kept   {indices:?} -> {name}");
    }
    for (indices, name) in &out.pruned {
        println!("  pruned {indices:?} -> {name} (no perception realizes it)");
    }

    let robust = out.machine.expect("condition holds at radius 3");

    // The full correctness package, each check exhaustive over the paired
    // state space.
    let check = CheckOptions::default();
    for report in [
        check_partitioning(&robust, &consts, &check).unwrap(),
        check_invariant_preservation(&robust, &consts, &check).unwrap(),
        check_feasibility(&robust, &consts, &check).unwrap(),
        check_forward_simulation(&robust, eps0, m, &consts, &check).unwrap(),
    ] {
        println!(
            "{:<24} {:?}  ({} states, {} ms)",
            report.kind, report.verdict, report.stats.states_visited, report.timing.elapsed_ms,
        );
        assert!(report.verdict.holds());
    }

    println!("total: {} ms", start.elapsed().as_millis());
}
