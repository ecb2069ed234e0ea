//! Realization analysis for controller-index subsets.
//!
//! A heterogeneous event built for a subset `u` of controller indices only
//! ever fires at perceptions whose compartment is exactly `u`. A subset no
//! perception realizes is *vacuous*: its event is dead weight and can be
//! pruned from the robustified machine without changing its behaviour.

use std::collections::BTreeSet;
use std::time::Instant;

use serde::Serialize;

use super::TransformError;
use crate::analysis::checks::{
    checked_size, run_sink_scan, CheckOptions, Timing, Witness,
};
use crate::analysis::funcs::compartment;
use crate::model::{state_unrank, ConstBinding, Machine, UncertaintySpec};

/// Outcome of scanning every perceived state for one subset.
#[derive(Debug, Clone, Serialize)]
pub struct SubsetReport {
    /// The queried controller indices (1-based, ascending).
    pub subset: Vec<usize>,
    /// True when no perceived state has this exact compartment.
    pub vacuous: bool,
    /// Perceived states realizing the subset (least-ranked first; how many
    /// are kept follows the scan options).
    pub witnesses: Vec<Witness>,
    pub states_visited: u64,
    pub realized_count: u64,
    pub timing: Timing,
}

/// Validates `subset` against the machine's controller events: nonempty,
/// strictly ascending after sorting, every index in range.
pub(crate) fn normalize_subset(m: &Machine, subset: &[usize]) -> Result<Vec<usize>, TransformError> {
    let n = m.controller_events().len();
    if subset.is_empty() {
        return Err(TransformError::BadSubset {
            subset: subset.to_vec(),
            reason: "subset is empty".to_string(),
        });
    }
    let mut sorted = subset.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != subset.len() {
        return Err(TransformError::BadSubset {
            subset: subset.to_vec(),
            reason: "subset has repeated indices".to_string(),
        });
    }
    if let Some(&bad) = sorted.iter().find(|&&i| i == 0 || i > n) {
        return Err(TransformError::BadSubset {
            subset: subset.to_vec(),
            reason: format!("index {bad} is outside 1..={n}"),
        });
    }
    Ok(sorted)
}

/// Scans every perceived state of the plain machine and reports which ones
/// have `subset` as their exact compartment.
pub fn subset_realization(
    m: &Machine,
    spec: &UncertaintySpec,
    subset: &[usize],
    consts: &ConstBinding,
    opts: &CheckOptions,
) -> Result<SubsetReport, TransformError> {
    let start = Instant::now();
    let subset = normalize_subset(m, subset)?;
    let want: BTreeSet<usize> = subset.iter().copied().collect();
    let n = checked_size(m, opts.cap)?;
    let limits = opts.limits;

    let sink = run_sink_scan(n, opts, |r, sink| {
        let perceived = state_unrank(m, r as u128);
        let comp = compartment(m, spec, &perceived, consts, limits)?;
        if comp == want {
            sink.push_with((r as u128, 0, 0, 0), || {
                let mut w = Witness::at(m, &perceived);
                w.indices = Some(subset.clone());
                w.note = Some("perceived state realizing the subset".to_string());
                w
            });
        }
        Ok::<_, TransformError>(())
    })?;

    let (realized_count, witnesses) = sink.finish();
    Ok(SubsetReport {
        subset,
        vacuous: realized_count == 0,
        witnesses,
        states_visited: n as u64,
        realized_count,
        timing: Timing { elapsed_ms: start.elapsed().as_millis() as u64 },
    })
}
