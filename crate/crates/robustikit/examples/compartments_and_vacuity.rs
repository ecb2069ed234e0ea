//! See which sets of controller events a noisy reading can confuse, and
//! which combinations never actually occur.
//!
//! A compartment is the set of controller events enabled somewhere inside
//! the ball of true states consistent with a perceived state. The
//! robustification constructions synthesize one event per compartment —
//! so compartments that no perceived state realizes are dead weight, and
//! pruning them is behavior-preserving.
//!
//! With a three-degree sensor the heater's three controller regions are too
//! far apart for one reading to touch all of them; at seven degrees the
//! triple overlap becomes real.
//!
//! ```text
//! cargo run --example compartments_and_vacuity
//! ```

use robustikit::analysis::checks::{CheckOptions, WitnessPolicy};
use robustikit::dsl::load_source;
use robustikit::model::ConstBinding;
use robustikit::transform::{compartment_table, subset_realization};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ht0.cpm");
    let text = std::fs::read_to_string(path).expect("bundled model");
    let src = load_source(&text).expect("ht0.cpm loads");
    let m = &src.machines[0];

    let consts = ConstBinding::new();
    let opts = CheckOptions::default();

    for spec_name in ["eps0", "eps7"] {
        let spec = src.uncertainties.iter().find(|u| u.name == spec_name).unwrap();
        println!("== {spec_name} ==");

        let table = compartment_table(m, spec, &consts, &opts).unwrap();
        for (subset, least) in &table {
            let shown: Vec<String> =
                least.0.iter().map(|v| v.display(&m.symbols).to_string()).collect();
            println!("  compartment {subset:?} first realized at ({})", shown.join(", "));
        }

        // Is there a reading that keeps all three controller responses in
        // play at once?
        let all_three = CheckOptions { policy: WitnessPolicy::All, ..CheckOptions::default() };
        let report = subset_realization(m, spec, &[1, 2, 3], &consts, &all_three).unwrap();
        if report.vacuous {
            println!("  {{1,2,3}} is vacuous: its synthesized event would never fire");
        } else {
            let readings: std::collections::BTreeSet<i64> = report
                .witnesses
                .iter()
                .map(|w| w.state["temp"].parse().unwrap())
                .collect();
            println!(
                "  {{1,2,3}} realized by {} perceived states (readings: {:?})",
                report.realized_count, readings,
            );
        }
        println!();
    }
}
