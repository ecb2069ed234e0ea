//! Run the three exhaustive base checks on the heater model: controller
//! partitioning, invariant preservation, and feasibility.
//!
//! Every state in the (finite) domain product is visited, so a "holds"
//! verdict is a proof over the model, not a sample.
//!
//! ```text
//! cargo run --example exhaustive_checks
//! ```

use robustikit::analysis::checks::{
    check_feasibility, check_invariant_preservation, check_partitioning, CheckOptions,
};
use robustikit::dsl::load_source;
use robustikit::model::ConstBinding;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ht0.cpm");
    let text = std::fs::read_to_string(path).expect("bundled model");
    let src = load_source(&text).expect("ht0.cpm loads");
    let m = &src.machines[0];

    let consts = ConstBinding::new();
    let opts = CheckOptions::default();

    for report in [
        check_partitioning(m, &consts, &opts).unwrap(),
        check_invariant_preservation(m, &consts, &opts).unwrap(),
        check_feasibility(m, &consts, &opts).unwrap(),
    ] {
        println!(
            "{:<24} {:?}  ({} states, {} violations, {} ms)",
            report.kind,
            report.verdict,
            report.stats.states_visited,
            report.stats.violations,
            report.timing.elapsed_ms,
        );
        for w in &report.witnesses {
            println!("  witness: {w:?}");
        }
    }
}
