//! How bad can the sensor get before each robustification stops working?
//!
//! The uncertainty description in `ht1.cpm` leaves its error bound `Delta`
//! symbolic. The sweep binds it to every value in the range, evaluates both
//! usability conditions at each point, and reports the largest prefix of
//! values for which each construction works.
//!
//! ```text
//! cargo run --example sweep_tolerance
//! ```

use robustikit::dsl::load_source;
use robustikit::explore::sweep;
use robustikit::model::ConstBinding;
use robustikit::transform::RobustifyOptions;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ht1.cpm");
    let text = std::fs::read_to_string(path).expect("bundled model");
    let src = load_source(&text).expect("ht1.cpm loads");
    let m = &src.machines[0];
    let spec = &src.uncertainties[0];

    let consts = ConstBinding::new();
    let report = sweep(m, spec, Some("Delta"), 0, 10, &consts, &RobustifyOptions::default())
        .expect("Delta is the only unbound constant");

    print!("{}", report.render_table());

    // A sensor package promising at most two degrees of error keeps the
    // original actions; anything up to five degrees still admits the
    // repurposing construction.
    assert_eq!(report.max_preserving, Some(2));
    assert_eq!(report.max_repurposing, Some(5));
    assert!(!report.non_monotone);
}
