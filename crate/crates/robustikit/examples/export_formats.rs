//! Emit the heater in the other supported output formats: the textual
//! Event-B rendering and an SMT-LIB v2 query.
//!
//! The SMT script below asks whether any perceived state sees exactly the
//! controller events {1, 2, 3} enabled inside its uncertainty ball — the
//! same question `subset_realization` answers by enumeration, phrased for a
//! solver. For the three-degree sensor the script is unsatisfiable.
//!
//! ```text
//! cargo run --example export_formats
//! ```

use robustikit::analysis::smtlib::{emit_smtlib, SmtQuery};
use robustikit::dsl::{load_source, print_eventb};
use robustikit::model::ConstBinding;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ht0.cpm");
    let text = std::fs::read_to_string(path).expect("bundled model");
    let src = load_source(&text).expect("ht0.cpm loads");
    let m = &src.machines[0];
    let eps0 = src.uncertainties.iter().find(|u| u.name == "eps0").unwrap();

    println!("==== Event-B text ====");
    println!("{}", print_eventb(m));

    println!("==== SMT-LIB v2: is {{1,2,3}} ever the exact compartment? ====");
    let consts = ConstBinding::new();
    let query = SmtQuery::Vacuity { subset: vec![1, 2, 3] };
    let script = emit_smtlib(m, Some(eps0), &query, &consts).unwrap();
    println!("{script}");
}
