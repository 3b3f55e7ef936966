//! Budget-aware inference orchestration engine.
//!
//! Treats a language model as an improvement operator and runs three
//! inference regimes over pluggable backends:
//!
//! - **Long-CoT**: a single long trace.
//! - **SR** (sequential refinement): one artifact improved over R rounds,
//!   optionally with an error-analysis step before each revision.
//! - **PDR** (parallel-distill-refine): each round fans out parallel drafts,
//!   distills them into bounded workspaces that condition the next round,
//!   and ends with a single refined generation.
//!
//! Every model call is recorded in a [`budget::BudgetLedger`] from which the
//! sequential budget (tokens along the accepted path, a latency proxy) and
//! the total budget (all calls including discarded branches, a compute
//! proxy) are derived exactly. The [`harness`] evaluates accuracy-vs-budget
//! tradeoffs over datasets with repeated seeds, Pareto-frontier extraction,
//! and a hard-case mechanics report.

pub mod backend;
pub mod budget;
pub mod config;
pub mod distill;
pub mod error;
pub mod harness;
pub mod operators;
pub mod prompting;
pub mod runtime;
pub mod seeds;
pub mod types;
pub mod verify;

pub use budget::{per_call_allowance, BudgetLedger, CallKind, CallRecord, SeqPolicy};
pub use config::{parse_config, RunConfig};
pub use error::{Error, Result};
pub use types::{DistillMode, Draft, Outcome, Problem, RoundSchedule, Workspace, WorkspaceKind};
