//! Build the action-repurposing robustification and compare its boundary
//! event with the action-preserving one.
//!
//! Both constructions synthesize an event for the perceived states where
//! `ctrl_heat` and `ctrl_keep_safe` are indistinguishable. The preserving
//! event must pick parameters every source action agrees on, locking
//! `dh = dt`; the repurposing event fires one source action with parameters
//! proven safe for every temperature the reading allows, so `dh` and `dt`
//! range independently.
//!
//! ```text
//! cargo run --example robustify_repurposing
//! ```

use robustikit::dsl::{load_source, print_expr};
use robustikit::model::{
    bind_params, eval_bool, param_values, ConstBinding, EvalCtx, EvalError, Machine, Odometer,
    State, Value,
};
use robustikit::transform::{inject, robustify, RobustMethod, RobustifyOptions};

/// Parameter tuples accepted by `event` of `m` at the paired state with
/// `temp = t` and a reading that happens to agree.
fn admitted(m: &Machine, event: &str, t: i64, consts: &ConstBinding) -> Vec<Vec<Value>> {
    let phase = m.symbols.lookup("c").expect("symbol c");
    let state =
        State(vec![Value::Sym(phase), Value::Int(t), Value::Sym(phase), Value::Int(t)]);
    let ev = m.events.iter().find(|e| e.name == event).expect("event exists");
    let lists: Vec<Vec<Value>> = ev.params.iter().map(param_values).collect();
    let mut odo = Odometer::new(&lists);
    let mut tuple = Vec::new();
    let mut hits = Vec::new();
    while odo.next_into(&mut tuple) {
        let args = bind_params(ev, &tuple);
        let mut ctx = EvalCtx::new(m, consts).with_state(&state).with_params(&args);
        let enabled = match eval_bool(&mut ctx, &ev.guard) {
            Ok(b) => b,
            Err(EvalError::BotArith) => false,
            Err(e) => panic!("guard evaluation failed: {e}"),
        };
        if enabled {
            hits.push(tuple.clone());
        }
    }
    hits
}

fn main() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/ht0.cpm");
    let text = std::fs::read_to_string(path).expect("bundled model");
    let src = load_source(&text).expect("ht0.cpm loads");
    let m = &src.machines[0];
    let eps0 = src.uncertainties.iter().find(|u| u.name == "eps0").unwrap();

    let consts = ConstBinding::new();
    let opts = RobustifyOptions::default();
    let paired = inject(m, eps0, &consts, &opts.check).unwrap();

    let boundary = "ctrl_heat_keep_safe_hetero";
    for method in [RobustMethod::Preserving, RobustMethod::Repurposing] {
        let out = robustify(&paired, method, &consts, &opts).unwrap();
        let robust = out.machine.expect("condition holds at radius 3");
        let ev = robust.events.iter().find(|e| e.name == boundary).unwrap();

        println!("== {} ({}) ==", robust.name, boundary);
        println!("guard: {}", print_expr(&ev.guard));

        // At a reading of 29 the room may be anywhere in [26, 32]: possibly
        // below the safe band (heat territory) or inside it (keep-safe
        // territory).
        let hits = admitted(&robust, boundary, 29, &consts);
        println!("admitted parameter tuples at temp = ^temp = 29: {}", hits.len());
        for tuple in hits.iter().take(6) {
            let shown: Vec<String> =
                tuple.iter().map(|v| v.display(&robust.symbols).to_string()).collect();
            println!("  ({})", shown.join(", "));
        }
        if hits.len() > 6 {
            println!("  ...");
        }
        println!();
    }
}
