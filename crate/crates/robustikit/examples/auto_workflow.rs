//! Run the automatic pipeline end to end at two sensor qualities.
//!
//! The pipeline checks the base machine, injects the uncertainty, and tries
//! the action-preserving construction first; when its usability condition
//! fails it falls back to action-repurposing, and when that fails too it
//! declares the combination infeasible — with the failing witnesses from
//! both attempts and a recommendation.
//!
//! On `ht1` a sensor error of 5 is too much for the preserving construction
//! but fine for the repurposing one; an error of 6 defeats both.
//!
//! ```text
//! cargo run --example auto_workflow
//! ```

use robustikit::explore::run_workflow;
use robustikit::model::ConstBinding;
use robustikit::dsl::load_source;
use robustikit::transform::RobustifyOptions;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ht1.cpm");
    let text = std::fs::read_to_string(path).expect("bundled model");
    let src = load_source(&text).expect("ht1.cpm loads");
    let m = &src.machines[0];
    let spec = &src.uncertainties[0];

    for delta in [5, 6] {
        let mut consts = ConstBinding::new();
        consts.insert("Delta".to_string(), delta);
        let report = run_workflow(m, spec, &consts, &RobustifyOptions::default()).unwrap();

        println!("Delta = {delta}: stage {:?}", report.stage);
        match &report.result {
            Some(machine) => println!("  result: {}", machine.name),
            None => {
                // Condition checks scan perceived states, so the witness
                // state *is* the offending reading.
                let pw = &report.preserving.condition.witnesses[0];
                println!(
                    "  preserving fails at reading {:?}: {}",
                    pw.state,
                    pw.note.as_deref().unwrap_or(""),
                );
                let rr = report.repurposing.as_ref().unwrap();
                let rw = &rr.condition.witnesses[0];
                println!(
                    "  repurposing fails at reading {:?}: {}",
                    rw.state,
                    rw.note.as_deref().unwrap_or(""),
                );
                println!("  recommendation: {}", report.recommendation.unwrap());
            }
        }
    }
}
