//! End-to-end orchestration: the automatic robustification workflow and
//! sweeps over a symbolic uncertainty bound.
//!
//! [`run_workflow`] is the "just make it robust" entry point: it verifies
//! the base machine's own obligations, injects the uncertainty, tries the
//! action-preserving construction first (it keeps the controller's behaviour
//! recognisable), falls back to action-repurposing when preserving is not
//! usable everywhere, and — when neither works — reports that outcome with
//! the failing perceptions and a recommendation.
//!
//! [`sweep`] answers "how much uncertainty can this controller take": with a
//! radius left symbolic, it evaluates both constructions' usability
//! conditions at every integer value of the bound in a requested range and
//! reports the largest value below which each construction works
//! uninterruptedly. Feasibility is not assumed monotone in the bound, so
//! every point is evaluated and an out-of-order holds-point raises a flag
//! instead of being trusted away.

use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::analysis::checks::{
    check_feasibility, check_invariant_preservation, check_partitioning, CheckError, CheckReport,
    Timing, Witness,
};
use crate::model::{ConstBinding, ConstDecl, Machine, UncertaintySpec};
use crate::transform::{
    inject, preserving_condition, repurposing_condition, robustify, PairedMachine, RobustMethod,
    RobustifyOptions, RobustifyOutcome, TransformError,
};

/// What to do when neither construction is usable.
pub const INFEASIBLE_RECOMMENDATION: &str =
    "decrease the level of uncertainty or relax the safety invariant";

#[derive(Debug, Error)]
pub enum ExploreError {
    #[error("machine `{machine}` fails its `{kind}` obligation; robustification needs a machine that already satisfies it")]
    Precondition {
        machine: String,
        kind: String,
        report: Box<CheckReport>,
    },
    #[error("a sweep needs exactly one unbound symbolic constant, found {found}: [{}]", .names.join(", "))]
    SymbolicConstCount { found: usize, names: Vec<String> },
    #[error("`{name}` is not an unbound symbolic constant of the machine or its uncertainty description")]
    NoSuchParameter { name: String },
    #[error("sweep range {lo}..{hi} leaves the declared domain {dom_lo}..{dom_hi} of `{name}`")]
    RangeOutsideDomain {
        name: String,
        lo: i64,
        hi: i64,
        dom_lo: i64,
        dom_hi: i64,
    },
    #[error("sweep range {lo}..{hi} is empty")]
    EmptyRange { lo: i64, hi: i64 },
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Check(#[from] CheckError),
}

/// Terminal stage of the automatic workflow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkflowStage {
    /// The action-preserving construction is usable; its machine is the
    /// result.
    Preserving,
    /// Only the action-repurposing construction is usable; its machine is
    /// the result.
    Repurposing,
    /// Neither construction is usable at this uncertainty level.
    Infeasible,
}

#[derive(Debug)]
pub struct WorkflowReport {
    pub machine: String,
    pub spec: String,
    /// The base machine's own obligations (partitioning, invariant
    /// preservation, feasibility) — all holding, or the workflow would have
    /// refused to start.
    pub preconditions: Vec<CheckReport>,
    /// The uncertainty-injected machine the constructions start from.
    pub paired: PairedMachine,
    pub stage: WorkflowStage,
    /// The action-preserving attempt (always made).
    pub preserving: RobustifyOutcome,
    /// The action-repurposing attempt (made only when preserving failed).
    pub repurposing: Option<RobustifyOutcome>,
    /// The machine of the successful stage.
    pub result: Option<Machine>,
    pub recommendation: Option<&'static str>,
    pub timing: Timing,
}

/// Runs the automatic pipeline: base obligations, injection, preserving
/// construction, repurposing fallback, infeasibility report.
pub fn run_workflow(
    m: &Machine,
    spec: &UncertaintySpec,
    consts: &ConstBinding,
    opts: &RobustifyOptions,
) -> Result<WorkflowReport, ExploreError> {
    let start = Instant::now();
    let mut preconditions = Vec::new();
    for report in [
        check_partitioning(m, consts, &opts.check)?,
        check_invariant_preservation(m, consts, &opts.check)?,
        check_feasibility(m, consts, &opts.check)?,
    ] {
        if !report.verdict.holds() {
            return Err(ExploreError::Precondition {
                machine: m.name.clone(),
                kind: report.kind.clone(),
                report: Box::new(report),
            });
        }
        preconditions.push(report);
    }

    let paired = inject(m, spec, consts, &opts.check)?;
    let preserving = robustify(&paired, RobustMethod::Preserving, consts, opts)?;
    if preserving.condition.verdict.holds() {
        let result = preserving.machine.clone();
        return Ok(WorkflowReport {
            machine: m.name.clone(),
            spec: spec.name.clone(),
            preconditions,
            paired,
            stage: WorkflowStage::Preserving,
            preserving,
            repurposing: None,
            result,
            recommendation: None,
            timing: Timing { elapsed_ms: start.elapsed().as_millis() as u64 },
        });
    }

    let repurposing = robustify(&paired, RobustMethod::Repurposing, consts, opts)?;
    let (stage, result, recommendation) = if repurposing.condition.verdict.holds() {
        (WorkflowStage::Repurposing, repurposing.machine.clone(), None)
    } else {
        (WorkflowStage::Infeasible, None, Some(INFEASIBLE_RECOMMENDATION))
    };
    Ok(WorkflowReport {
        machine: m.name.clone(),
        spec: spec.name.clone(),
        preconditions,
        paired,
        stage,
        preserving,
        repurposing: Some(repurposing),
        result,
        recommendation,
        timing: Timing { elapsed_ms: start.elapsed().as_millis() as u64 },
    })
}

/// One evaluated value of the symbolic bound.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub value: i64,
    pub preserving: bool,
    pub repurposing: bool,
    /// First failing perception of the preserving condition, when it fails.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preserving_witness: Option<Witness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub repurposing_witness: Option<Witness>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub machine: String,
    pub spec: String,
    pub parameter: String,
    /// Every value in the requested range, ascending.
    pub points: Vec<SweepPoint>,
    /// Largest value up to which the preserving condition holds without a
    /// gap from the start of the range; absent when the first point fails.
    pub max_preserving: Option<i64>,
    pub max_repurposing: Option<i64>,
    /// True when some condition holds again after failing at a smaller
    /// value; the maxima above deliberately ignore such islands.
    pub non_monotone: bool,
    pub timing: Timing,
}

impl SweepReport {
    /// Plain-text point table, one row per value.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:>10} | {:^10} | {:^12}\n",
            self.parameter, "preserving", "repurposing"
        ));
        out.push_str(&format!("{:->10}-+-{:->10}-+-{:->12}\n", "", "", ""));
        for p in &self.points {
            out.push_str(&format!(
                "{:>10} | {:^10} | {:^12}\n",
                p.value,
                if p.preserving { "holds" } else { "fails" },
                if p.repurposing { "holds" } else { "fails" },
            ));
        }
        let fmt_max = |v: Option<i64>| match v {
            Some(v) => v.to_string(),
            None => "none".to_string(),
        };
        out.push_str(&format!(
            "max preserving: {}\nmax repurposing: {}\n",
            fmt_max(self.max_preserving),
            fmt_max(self.max_repurposing)
        ));
        if self.non_monotone {
            out.push_str("warning: verdicts are not monotone over the range\n");
        }
        out
    }
}

/// The unbound symbolic constants visible to (m, spec): declared on either,
/// not fixed by `consts`.
fn unbound_consts<'a>(
    m: &'a Machine,
    spec: &'a UncertaintySpec,
    consts: &ConstBinding,
) -> Vec<&'a ConstDecl> {
    m.consts
        .iter()
        .chain(spec.consts.iter())
        .filter(|c| !consts.contains_key(&c.name))
        .collect()
}

/// Evaluates both constructions' usability conditions at every integer
/// value of the single unbound symbolic constant in `lo..=hi`.
///
/// `parameter` optionally names the constant to sweep; it must match the
/// unbound one.
pub fn sweep(
    m: &Machine,
    spec: &UncertaintySpec,
    parameter: Option<&str>,
    lo: i64,
    hi: i64,
    consts: &ConstBinding,
    opts: &RobustifyOptions,
) -> Result<SweepReport, ExploreError> {
    let start = Instant::now();
    let unbound = unbound_consts(m, spec, consts);
    let decl = match parameter {
        Some(name) => *unbound
            .iter()
            .find(|c| c.name == name)
            .ok_or_else(|| ExploreError::NoSuchParameter { name: name.to_string() })?,
        None => match unbound.as_slice() {
            [one] => *one,
            _ => {
                return Err(ExploreError::SymbolicConstCount {
                    found: unbound.len(),
                    names: unbound.iter().map(|c| c.name.clone()).collect(),
                })
            }
        },
    };
    if unbound.len() != 1 {
        return Err(ExploreError::SymbolicConstCount {
            found: unbound.len(),
            names: unbound.iter().map(|c| c.name.clone()).collect(),
        });
    }
    if lo > hi {
        return Err(ExploreError::EmptyRange { lo, hi });
    }
    if lo < decl.lo || hi > decl.hi {
        return Err(ExploreError::RangeOutsideDomain {
            name: decl.name.clone(),
            lo,
            hi,
            dom_lo: decl.lo,
            dom_hi: decl.hi,
        });
    }

    let mut points = Vec::new();
    for value in lo..=hi {
        let mut bound = consts.clone();
        bound.insert(decl.name.clone(), value);
        let pres = preserving_condition(m, spec, &bound, &opts.check)?;
        let rep = repurposing_condition(m, spec, &bound, &opts.check, opts.safpar_mode)?;
        points.push(SweepPoint {
            value,
            preserving: pres.verdict.holds(),
            repurposing: rep.verdict.holds(),
            preserving_witness: pres.witnesses.into_iter().next(),
            repurposing_witness: rep.witnesses.into_iter().next(),
        });
    }

    let prefix_max = |holds: &dyn Fn(&SweepPoint) -> bool| -> Option<i64> {
        points.iter().take_while(|p| holds(p)).last().map(|p| p.value)
    };
    let non_monotone = |holds: &dyn Fn(&SweepPoint) -> bool| -> bool {
        points.windows(2).any(|w| !holds(&w[0]) && holds(&w[1]))
    };
    let pres: &dyn Fn(&SweepPoint) -> bool = &|p| p.preserving;
    let rep: &dyn Fn(&SweepPoint) -> bool = &|p| p.repurposing;
    Ok(SweepReport {
        machine: m.name.clone(),
        spec: spec.name.clone(),
        parameter: decl.name.clone(),
        max_preserving: prefix_max(pres),
        max_repurposing: prefix_max(rep),
        non_monotone: non_monotone(pres) || non_monotone(rep),
        points,
        timing: Timing { elapsed_ms: start.elapsed().as_millis() as u64 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::checks::CheckOptions;
    use crate::dsl::parser::load_source;

    const HEATER: &str = "\
machine ht0
  var tn : { p, c }
  var temp : int[-20..80]
  init tn = c and 30 <= temp and temp <= 40
  safety tn = c => 30 <= temp and temp <= 40
  plant event plant_change_temp
    param dt : int[-15..15]
    guard true
    action tn' = p and temp' = temp + dt
  end
  ctrl event ctrl_heat
    param dh : int[0..60]
    guard temp < 30 and 30 <= temp + dh and temp + dh <= 40
    action tn' = c and temp' = temp + dh
  end
  ctrl event ctrl_keep_safe
    param dt : int[-10..10]
    guard 30 <= temp and temp <= 40 and 30 <= temp + dt and temp + dt <= 40
    action tn' = c and temp' = temp + dt
  end
  ctrl event ctrl_cool
    param dc : int[0..60]
    guard temp > 40 and 30 <= temp - dc and temp - dc <= 40
    action tn' = c and temp' = temp - dc
  end
end

uncertainty eps0 for ht0
  perceives tn exactly
  perceives temp within 3
end

uncertainty eps7 for ht0
  perceives tn exactly
  perceives temp within 7
end

uncertainty epsd for ht0
  const Delta : int[0..10]
  perceives tn exactly
  perceives temp within Delta
end
";

    fn heater() -> (Machine, Vec<UncertaintySpec>) {
        let src = load_source(HEATER).expect("heater parses");
        (src.machines[0].clone(), src.uncertainties)
    }

    #[test]
    fn workflow_prefers_preserving() {
        let (m, specs) = heater();
        let report =
            run_workflow(&m, &specs[0], &ConstBinding::new(), &Default::default()).unwrap();
        assert_eq!(report.stage, WorkflowStage::Preserving);
        assert!(report.repurposing.is_none(), "repurposing attempted needlessly");
        assert_eq!(report.result.as_ref().unwrap().name, "ht0_eps0_pr");
        assert!(report.recommendation.is_none());
        assert_eq!(report.preconditions.len(), 3);
    }

    #[test]
    fn workflow_reports_infeasible_with_recommendation() {
        let (m, specs) = heater();
        let report =
            run_workflow(&m, &specs[1], &ConstBinding::new(), &Default::default()).unwrap();
        assert_eq!(report.stage, WorkflowStage::Infeasible);
        assert!(report.result.is_none());
        assert_eq!(report.recommendation, Some(INFEASIBLE_RECOMMENDATION));
        // both failures are reported with their first failing perception
        assert!(!report.preserving.condition.witnesses.is_empty());
        assert!(!report.repurposing.as_ref().unwrap().condition.witnesses.is_empty());
    }

    #[test]
    fn workflow_refuses_broken_base_machine() {
        let (mut m, specs) = heater();
        m.events.retain(|e| e.name != "ctrl_cool");
        let err =
            run_workflow(&m, &specs[0], &ConstBinding::new(), &Default::default()).unwrap_err();
        match err {
            ExploreError::Precondition { kind, .. } => assert_eq!(kind, "partitioning"),
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn sweep_agrees_with_single_point_conditions() {
        let (m, specs) = heater();
        let epsd = &specs[2];
        let report = sweep(
            &m,
            epsd,
            Some("Delta"),
            0,
            7,
            &ConstBinding::new(),
            &Default::default(),
        )
        .unwrap();
        assert_eq!(report.parameter, "Delta");
        assert_eq!(report.points.len(), 8);
        for p in &report.points {
            let mut bound = ConstBinding::new();
            bound.insert("Delta".into(), p.value);
            let direct =
                preserving_condition(&m, epsd, &bound, &CheckOptions::default()).unwrap();
            assert_eq!(p.preserving, direct.verdict.holds(), "at {}", p.value);
        }
        // zero uncertainty always works; both constructions stop at the same
        // ball width here because every failure is an empty parameter set
        assert!(report.points[0].preserving && report.points[0].repurposing);
        assert_eq!(report.max_preserving, Some(5));
        assert_eq!(report.max_repurposing, Some(5));
        assert!(!report.non_monotone);
        let table = report.render_table();
        assert!(table.contains("max preserving: 5"), "{table}");
    }

    #[test]
    fn sweep_rejects_bad_parameters() {
        let (m, specs) = heater();
        // eps0 has no symbolic constant at all
        let err = sweep(
            &m,
            &specs[0],
            None,
            0,
            3,
            &ConstBinding::new(),
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ExploreError::SymbolicConstCount { found: 0, .. }), "{err}");
        // range must stay inside Delta's declared domain
        let err = sweep(
            &m,
            &specs[2],
            Some("Delta"),
            0,
            11,
            &ConstBinding::new(),
            &Default::default(),
        )
        .unwrap_err();
        assert!(matches!(err, ExploreError::RangeOutsideDomain { .. }), "{err}");
        // binding Delta by hand leaves nothing to sweep
        let mut bound = ConstBinding::new();
        bound.insert("Delta".into(), 3);
        let err =
            sweep(&m, &specs[2], None, 0, 3, &bound, &Default::default()).unwrap_err();
        assert!(matches!(err, ExploreError::SymbolicConstCount { found: 0, .. }), "{err}");
    }
}
