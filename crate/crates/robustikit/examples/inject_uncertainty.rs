//! Pair a machine with an uncertainty description and watch the safety
//! argument break.
//!
//! The paired machine tracks true state and perceived state side by side:
//! controller guards read the perceived copies (`^temp`), actions update the
//! true ones, and every event re-perceives afterwards. The original
//! controller was correct against the true temperature — against a reading
//! that can be off by three degrees it drives the plant out of the safe
//! band, and the checker produces a concrete run that does so.
//!
//! ```text
//! cargo run --example inject_uncertainty
//! ```

use robustikit::analysis::checks::{check_invariant_preservation, CheckOptions, WitnessPolicy};
use robustikit::dsl::load_source;
use robustikit::model::ConstBinding;
use robustikit::transform::{inject, render_paired};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ht0.cpm");
    let text = std::fs::read_to_string(path).expect("bundled model");
    let src = load_source(&text).expect("ht0.cpm loads");
    let m = &src.machines[0];
    let eps0 = src.uncertainties.iter().find(|u| u.name == "eps0").unwrap();

    let consts = ConstBinding::new();
    let opts = CheckOptions::default();
    let paired = inject(m, eps0, &consts, &opts).expect("ht0 is partitioned and reflexive");

    println!("{}", render_paired(&paired));

    // Collect every offending transition, then show one where a comfortable
    // room plus a cold reading overshoots the safe band.
    let all = CheckOptions { policy: WitnessPolicy::All, ..CheckOptions::default() };
    let report = check_invariant_preservation(&paired.machine, &consts, &all).unwrap();
    println!("invariant preservation: {:?}", report.verdict);
    println!("offending transitions:  {}", report.witnesses.len());

    let temp_of = |vals: &Option<std::collections::BTreeMap<String, String>>| {
        vals.as_ref().unwrap()["temp"].parse::<i64>().unwrap()
    };
    let overshoot = report
        .witnesses
        .iter()
        .find(|w| {
            w.state["temp"].parse::<i64>().unwrap() >= 30
                && temp_of(&w.perceived) < 30
                && temp_of(&w.successor) > 40
        })
        .expect("a warm room misread as cold gets overheated");
    println!(
        "e.g. true temp {} read as {}: {} fires with {:?} and lands at {}",
        overshoot.state["temp"],
        temp_of(&overshoot.perceived),
        overshoot.event.as_deref().unwrap_or("?"),
        overshoot.params.as_ref().unwrap(),
        temp_of(&overshoot.successor),
    );
}
