//! Take a seeded random walk through the heater, alternating plant and
//! controller moves, and watch the invariants along the way.
//!
//! The walk is a sanity tool, not a proof — but it is deterministic for a
//! fixed seed, so a trace can be shared and replayed exactly.
//!
//! ```text
//! cargo run --example random_walk
//! ```

use robustikit::dsl::load_source;
use robustikit::model::ConstBinding;
use robustikit::sim::{simulate, SimOptions, SimOutcome};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ht0.cpm");
    let text = std::fs::read_to_string(path).expect("bundled model");
    let src = load_source(&text).expect("ht0.cpm loads");
    let m = &src.machines[0];

    let consts = ConstBinding::new();
    let opts = SimOptions { seed: 2024, steps: 12, ..SimOptions::default() };
    let report = simulate(m, &consts, &opts).unwrap();

    let shown = |vals: &std::collections::BTreeMap<String, String>| {
        vals.iter().map(|(k, v)| format!("{k}={v}")).collect::<Vec<_>>().join(" ")
    };
    println!("seed {}: start at {}", report.seed, shown(&report.initial));
    for (i, step) in report.steps.iter().enumerate() {
        println!("  {i:>2}. {:<20} -> {}", step.event, shown(&step.state));
    }
    match report.outcome {
        SimOutcome::Completed => println!("all {} steps stayed safe", report.steps.len()),
        SimOutcome::Deadlock { step } => println!("deadlocked at step {step}"),
        SimOutcome::Violation { step, ref invariant } => {
            println!("violated `{invariant}` at step {step}")
        }
    }
}
