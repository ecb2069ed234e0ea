//! Machine transformations: uncertainty injection and controller
//! robustification.
//!
//! The pipeline starts from a plain machine and an uncertainty description.
//! [`inject`] builds the paired machine, whose runs interleave true and
//! perceived variables and which in general violates the safety invariant —
//! the controller reads perceived data but safety constrains true data.
//! [`robustify`] then replaces the controller events with heterogeneous
//! events that quantify over every true state consistent with the current
//! perception, in one of two ways: keeping the original actions
//! ([`RobustMethod::Preserving`]) or repurposing them against the safety
//! invariant directly ([`RobustMethod::Repurposing`]). The decision
//! procedures in [`conditions`] determine, by exhaustive enumeration, whether
//! each construction yields a controller that still has somewhere to go at
//! every perception.

use thiserror::Error;

use crate::analysis::checks::CheckError;
use crate::analysis::funcs::FuncError;
use crate::model::{EvalError, ModelError};

pub mod conditions;
pub mod emit;
pub mod inject;
pub mod robustify;
pub mod vacuity;

pub use conditions::{compartment_table, preserving_condition, repurposing_condition};
pub use inject::{inject, render_paired, PairedMachine};
pub use robustify::{robustify, RobustMethod, RobustifyOptions, RobustifyOutcome};
pub use vacuity::{subset_realization, SubsetReport};

/// Errors raised by the transformation layer.
#[derive(Debug, Error)]
pub enum TransformError {
    #[error(
        "uncertainty description `{spec}` targets machine `{expected}`, \
         but was applied to `{found}`"
    )]
    SpecMachineMismatch {
        spec: String,
        expected: String,
        found: String,
    },

    #[error("machine `{machine}` already carries perceived variables; inject once only")]
    AlreadyPaired { machine: String },

    #[error(
        "machine `{machine}` is not partitioned: {enabled} controller events \
         are enabled at state {state}"
    )]
    NotPartitioned {
        machine: String,
        state: String,
        enabled: usize,
    },

    #[error(
        "uncertainty description `{spec}` has an irreflexive relation: \
         state {state} does not perceive itself"
    )]
    NotReflexive { spec: String, state: String },

    #[error("subset {subset:?} is not a valid controller-event index set: {reason}")]
    BadSubset { subset: Vec<usize>, reason: String },

    #[error(transparent)]
    Func(#[from] FuncError),

    #[error(transparent)]
    Check(#[from] CheckError),

    #[error(transparent)]
    Eval(#[from] EvalError),

    #[error(transparent)]
    Model(#[from] ModelError),
}
