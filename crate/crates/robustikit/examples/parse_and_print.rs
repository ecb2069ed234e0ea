//! Load a model file, then print every machine and uncertainty description
//! back in canonical form.
//!
//! ```text
//! cargo run --example parse_and_print
//! ```

use robustikit::dsl::{load_source, print_machine, print_uncertainty};

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ht0.cpm");
    let text = std::fs::read_to_string(path).expect("bundled model");

    let src = match load_source(&text) {
        Ok(src) => src,
        Err(diags) => {
            for d in diags {
                eprintln!("{d}");
            }
            std::process::exit(2);
        }
    };

    for m in &src.machines {
        println!("{}", print_machine(m));
    }
    for u in &src.uncertainties {
        println!("{}", print_uncertainty(u));
    }
    for d in &src.diagnostics {
        eprintln!("warning: {d}");
    }
}
