//! Uncertainty injection: builds the paired (true ⨯ perceived) machine.
//!
//! The paired machine duplicates every variable with a perceived copy `^v`,
//! keeps plant guards on the true variables, moves controller guards onto
//! the perceived copies (the controller can only read what it perceives),
//! leaves all actions driving the true variables, and extends every action —
//! plant and controller alike — with a re-perception constraint tying the
//! new perceived values to the new true ones. The uncertainty description's
//! pairing condition becomes both a conjunct of the initial predicate and
//! the machine's `uncertain` invariant. Safety stays on the true variables,
//! which is exactly why the paired machine can now violate it: the
//! controller decides on perceived data.

use rayon::prelude::*;

use super::emit::reperception_expr;
use super::TransformError;
use crate::analysis::checks::{check_partitioning, checked_size, CheckOptions};
use crate::model::{
    eval_bool, hat_name, state_unrank, unhat, ConstBinding, EvalCtx, EventDef, EventKind, Expr,
    Machine, UncertaintySpec, Value, VarDecl,
};

/// A paired machine together with the plain machine and the uncertainty
/// description it was built from.
#[derive(Debug, Clone)]
pub struct PairedMachine {
    pub machine: Machine,
    pub original: Machine,
    pub spec: UncertaintySpec,
}

/// Builds the paired machine for `original` under `spec`.
///
/// Preconditions checked here: the description must target this machine;
/// the machine must not already be paired; its controller must be
/// partitioned (exactly one controller event enabled per state); and when
/// the description has an extra relation, that relation must be reflexive —
/// otherwise a state could fail to perceive itself and the pairing
/// condition would not be maintainable.
pub fn inject(
    original: &Machine,
    spec: &UncertaintySpec,
    consts: &ConstBinding,
    opts: &CheckOptions,
) -> Result<PairedMachine, TransformError> {
    if spec.machine != original.name {
        return Err(TransformError::SpecMachineMismatch {
            spec: spec.name.clone(),
            expected: spec.machine.clone(),
            found: original.name.clone(),
        });
    }
    if original.uncertain.is_some() || original.vars.iter().any(|v| unhat(&v.name).is_some()) {
        return Err(TransformError::AlreadyPaired { machine: original.name.clone() });
    }

    let part = check_partitioning(original, consts, opts)?;
    if !part.verdict.holds() {
        let (state, enabled) = part
            .witnesses
            .first()
            .map(|w| {
                let state = w
                    .state
                    .iter()
                    .map(|(k, v)| format!("{k}={v}"))
                    .collect::<Vec<_>>()
                    .join(", ");
                (state, w.indices.clone().unwrap_or_default().len())
            })
            .unwrap_or_default();
        return Err(TransformError::NotPartitioned {
            machine: original.name.clone(),
            state,
            enabled,
        });
    }

    check_reflexive(original, spec, consts, opts)?;

    let pairing = spec.invariant_expr(original);
    let rep = reperception_expr(original, spec);

    let mut vars: Vec<VarDecl> = original.vars.clone();
    for v in &original.vars {
        vars.push(VarDecl { name: hat_name(&v.name), domain: v.domain.clone(), span: v.span });
    }

    let mut consts_decl = original.consts.clone();
    consts_decl.extend(spec.consts.iter().cloned());

    let events = original
        .events
        .iter()
        .map(|ev| {
            let guard = match ev.kind {
                EventKind::Plant => ev.guard.clone(),
                EventKind::Ctrl => hat_substitute(original, &ev.guard),
            };
            EventDef {
                kind: ev.kind,
                name: ev.name.clone(),
                params: ev.params.clone(),
                guard,
                action: Expr::and(ev.action.clone(), rep.clone()),
                span: ev.span,
            }
        })
        .collect();

    let machine = Machine {
        name: format!("{}_{}", original.name, spec.name),
        vars,
        consts: consts_decl,
        init: Expr::and(original.init.clone(), pairing.clone()),
        safety: original.safety.clone(),
        uncertain: Some(pairing),
        events,
        symbols: original.symbols.clone(),
    };

    Ok(PairedMachine { machine, original: original.clone(), spec: spec.clone() })
}

/// Rewrites every unprimed state-variable reference onto its perceived copy.
fn hat_substitute(m: &Machine, e: &Expr) -> Expr {
    e.subst(&|name, primed| {
        if primed {
            return None;
        }
        m.var_index(name).map(|_| Expr::var(hat_name(name)))
    })
}

/// When the description declares an extra relation, every state must be
/// related to itself (with the perceived copies bound to the true values);
/// the interval clauses are reflexive by construction.
fn check_reflexive(
    m: &Machine,
    spec: &UncertaintySpec,
    consts: &ConstBinding,
    opts: &CheckOptions,
) -> Result<(), TransformError> {
    let Some(rel) = &spec.relation else {
        return Ok(());
    };
    let n = checked_size(m, opts.cap)?;
    let bad = (0..n)
        .into_par_iter()
        .map(|r| {
            let s = state_unrank(m, r as u128);
            let hats: Vec<(String, Value)> = m
                .vars
                .iter()
                .zip(&s.0)
                .map(|(v, val)| (hat_name(&v.name), *val))
                .collect();
            let extra: Vec<(&str, Value)> =
                hats.iter().map(|(n, v)| (n.as_str(), *v)).collect();
            let mut ctx = EvalCtx::new(m, consts).with_state(&s).with_extra(&extra);
            ctx.limits = opts.limits;
            match eval_bool(&mut ctx, rel) {
                Ok(true) => Ok(None),
                Ok(false) => Ok(Some(r)),
                Err(e) => Err(TransformError::from(e)),
            }
        })
        .try_reduce(|| None, |a, b| Ok(a.into_iter().chain(b).min()));
    match bad? {
        None => Ok(()),
        Some(r) => {
            let s = state_unrank(m, r as u128);
            let text = s
                .to_named(m)
                .into_iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(", ");
            Err(TransformError::NotReflexive { spec: spec.name.clone(), state: text })
        }
    }
}

/// Canonical text of the paired machine with a warning comment ahead of the
/// safety section: the paired events are free to violate it, that is the
/// point of checking it.
pub fn render_paired(pm: &PairedMachine) -> String {
    let text = crate::dsl::printer::print_machine(&pm.machine);
    let mut out = String::with_capacity(text.len() + 32);
    let mut spliced = false;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if !spliced && trimmed.starts_with("safety") {
            let indent = &line[..line.len() - trimmed.len()];
            out.push_str(indent);
            out.push_str("// events may violate this\n");
            spliced = true;
        }
        out.push_str(line);
        out.push('\n');
    }
    out
}
