//! Tour the per-state analysis primitives that the robustification
//! constructions are built from, at one interesting reading.
//!
//! A reading of 29 with a three-degree sensor means the room is really
//! somewhere in [26, 32] — possibly below the safe band, possibly inside
//! it. The functions below answer, for that single perceived state: which
//! true states are possible, which controller events they enable, and which
//! parameter choices survive the ambiguity.
//!
//! ```text
//! cargo run --example analysis_functions
//! ```

use robustikit::analysis::{compartment, eps_ball, idx_c, par_c, par_c_eps, safpar, SafparMode};
use robustikit::model::{ConstBinding, EvalLimits, State, Value};
use robustikit::dsl::load_source;

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ht0.cpm");
    let text = std::fs::read_to_string(path).expect("bundled model");
    let src = load_source(&text).expect("ht0.cpm loads");
    let m = &src.machines[0];
    let eps0 = src.uncertainties.iter().find(|u| u.name == "eps0").unwrap();

    let consts = ConstBinding::new();
    let limits = EvalLimits::default();
    let phase = m.symbols.lookup("c").unwrap();
    let perceived = State(vec![Value::Sym(phase), Value::Int(29)]);

    let ball = eps_ball(m, eps0, &perceived, &consts, limits).unwrap();
    let temps: Vec<String> = ball.iter().map(|s| s.0[1].display(&m.symbols).to_string()).collect();
    println!("reading 29 -> true temp in {{{}}}", temps.join(", "));

    for s in &ball {
        let i = idx_c(m, s, &consts, limits).unwrap();
        let name = &m.controller_events()[i - 1].name;
        println!("  at true temp {} the controller would run #{i} ({name})", s.0[1].display(&m.symbols));
    }

    let (i, tuples) = par_c(m, &ball[0], &consts, limits).unwrap();
    println!(
        "par_c at the coldest candidate: event #{i}, {} parameter tuples, e.g. {:?}",
        tuples.len(),
        tuples.iter().next().unwrap(),
    );

    let comp = compartment(m, eps0, &perceived, &consts, limits).unwrap();
    println!("compartment of the reading: {comp:?}");

    let robust_heat = par_c_eps(m, eps0, 1, &perceived, &consts, limits).unwrap();
    println!(
        "heat parameters valid wherever heating applies: {} tuples ({:?}..{:?})",
        robust_heat.len(),
        robust_heat.iter().next().unwrap(),
        robust_heat.iter().last().unwrap(),
    );

    let safe_heat =
        safpar(m, eps0, 1, &perceived, &m.safety, SafparMode::Formula, &consts, limits).unwrap();
    println!(
        "heat parameters safe at every candidate temp: {} tuples ({:?}..{:?})",
        safe_heat.len(),
        safe_heat.iter().next().unwrap(),
        safe_heat.iter().last().unwrap(),
    );
}
