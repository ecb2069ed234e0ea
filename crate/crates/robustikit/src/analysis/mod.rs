//! Semantic analysis: observation-aware functions over machines and the
//! exhaustive property checks (partitioning, invariant preservation,
//! feasibility, forward simulation) with counterexample witnesses.

pub mod checks;
pub mod funcs;
pub mod smtlib;

pub use checks::{
    check_feasibility, check_forward_simulation, check_invariant_preservation,
    check_partitioning, CheckError, CheckReport, CheckStats, Verdict, Witness, WitnessPolicy,
};
pub use funcs::{
    compartment, eps_ball, event_action_states, idx_c, par_c, par_c_eps, par_c_for, region_holds,
    safpar, FuncError, ParamTuple, SafparMode,
};
pub use smtlib::{emit_smtlib, SmtQuery};
