//! Serialisable result envelopes shared by the CLI and library consumers.
//!
//! Every JSON document the tool emits is wrapped in an [`Envelope`] carrying
//! a schema version, so downstream parsers can detect format changes. All
//! wall-clock data lives under keys named exactly `"timing"`; stripping
//! those (see [`strip_timing`]) must make repeated runs byte-identical.

use serde::Serialize;
use serde_json::{json, Value};

use crate::analysis::checks::CheckReport;
use crate::dsl::printer::{print_expr, print_machine, print_uncertainty};
use crate::explore::{SweepReport, WorkflowReport};
use crate::model::{Domain, EventKind, Machine};
use crate::transform::{PairedMachine, RobustifyOutcome};

/// Version of every JSON document shape this module produces.
pub const SCHEMA_VERSION: u32 = 1;

/// Wraps a result in the versioned envelope: `{schema_version, generator,
/// command, result}`.
pub fn envelope(command: &str, result: Value) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "generator": {
            "name": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
        },
        "command": command,
        "result": result,
    })
}

/// Serializes any `Serialize` report to a `Value` (never fails for the types
/// in this crate: all maps are string-keyed).
pub fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("report types serialize to JSON")
}

/// Removes every `"timing"` key, recursively. Reports stripped this way are
/// byte-identical across runs of the same command on the same input.
pub fn strip_timing(v: &mut Value) {
    match v {
        Value::Object(map) => {
            map.remove("timing");
            for (_, child) in map.iter_mut() {
                strip_timing(child);
            }
        }
        Value::Array(items) => {
            for child in items {
                strip_timing(child);
            }
        }
        _ => {}
    }
}

/// Canonical one-line-per-key JSON rendering used for all CLI output.
pub fn render(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("valid JSON value");
    s.push('\n');
    s
}

/// A machine described both by name and by its canonical text, which
/// re-parses to the same machine.
pub fn machine_value(m: &Machine) -> Value {
    json!({ "name": m.name, "text": print_machine(m) })
}

/// Structured machine description for external tools: domains spelled out,
/// every expression as its canonical text. The `text` field re-parses to
/// the same machine.
pub fn machine_detail_value(m: &Machine) -> Value {
    let domain = |d: &Domain| match d {
        Domain::Int { lo, hi } => json!({ "int": { "lo": lo, "hi": hi } }),
        Domain::Enum(ids) => json!({
            "enum": ids.iter().map(|&i| m.symbols.name(i)).collect::<Vec<_>>()
        }),
    };
    json!({
        "name": m.name,
        "text": print_machine(m),
        "consts": m.consts.iter().map(|c| json!({
            "name": c.name, "lo": c.lo, "hi": c.hi,
        })).collect::<Vec<_>>(),
        "vars": m.vars.iter().map(|v| json!({
            "name": v.name, "domain": domain(&v.domain),
        })).collect::<Vec<_>>(),
        "init": print_expr(&m.init),
        "safety": print_expr(&m.safety),
        "uncertain": m.uncertain.as_ref().map(print_expr),
        "events": m.events.iter().map(|e| json!({
            "kind": if e.kind == EventKind::Ctrl { "ctrl" } else { "plant" },
            "name": e.name,
            "params": e.params.iter().map(|p| json!({
                "name": p.name, "domain": domain(&p.domain), "lifted": p.with_bot,
            })).collect::<Vec<_>>(),
            "guard": print_expr(&e.guard),
            "action": print_expr(&e.action),
        })).collect::<Vec<_>>(),
    })
}

pub fn paired_value(pm: &PairedMachine) -> Value {
    json!({
        "machine": machine_value(&pm.machine),
        "original": pm.original.name,
        "uncertainty": print_uncertainty(&pm.spec),
    })
}

pub fn robustify_value(out: &RobustifyOutcome) -> Value {
    let subsets = |v: &[(Vec<usize>, String)]| -> Value {
        Value::Array(
            v.iter()
                .map(|(u, name)| json!({ "indices": u, "event": name }))
                .collect(),
        )
    };
    json!({
        "method": to_value(&out.method),
        "condition": to_value(&out.condition),
        "machine": out.machine.as_ref().map(machine_value),
        "draft": machine_value(&out.draft),
        "retained": subsets(&out.retained),
        "pruned": subsets(&out.pruned),
    })
}

pub fn workflow_value(report: &WorkflowReport) -> Value {
    json!({
        "machine": report.machine,
        "uncertainty": report.spec,
        "preconditions": report.preconditions.iter().map(to_value::<CheckReport>).collect::<Vec<_>>(),
        "paired": paired_value(&report.paired),
        "stage": to_value(&report.stage),
        "preserving": robustify_value(&report.preserving),
        "repurposing": report.repurposing.as_ref().map(robustify_value),
        "result": report.result.as_ref().map(machine_value),
        "recommendation": report.recommendation,
        "timing": to_value(&report.timing),
    })
}

pub fn sweep_value(report: &SweepReport) -> Value {
    to_value(report)
}
