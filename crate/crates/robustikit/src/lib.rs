//! robustikit — modelling, analysis, and automatic robustification of
//! discrete controller–plant systems whose controllers act on imperfect
//! observations of the plant state.
//!
//! The library is organised in layers:
//!
//! * [`model`] — the core representation: finite-domain variables, guarded
//!   parametric events, expression evaluation, state enumeration.
//! * [`dsl`] — the textual model format: lexer, parser, and a canonical
//!   pretty-printer whose output re-parses to the same model.
//! * [`analysis`] — observation-aware parameter sets, exhaustive checks
//!   (safety preservation, feasibility, partitioning, forward simulation)
//!   with counterexample witnesses, and SMT-LIB export of the same
//!   obligations.
//! * [`transform`] — uncertainty injection and the two robustification
//!   constructions (action-preserving and action-repurposing), including
//!   the decidable conditions under which each is known to work.
//! * [`explore`] — the end-to-end workflow (inject, try each construction,
//!   report) and sweeps over a symbolic uncertainty bound.
//! * [`sim`] — seeded random walks through a model for quick smoke checks.
//! * [`report`] — serialisable result types shared by the CLI and library.

pub mod analysis;
pub mod cli;
pub mod dsl;
pub mod explore;
pub mod model;
pub mod report;
pub mod sim;
pub mod transform;

pub use explore::{run_workflow, sweep, WorkflowStage};
pub use model::{Machine, State, UncertaintySpec, Value};
pub use transform::{inject, robustify, PairedMachine, RobustMethod, TransformError};
