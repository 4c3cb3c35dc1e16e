//! Joint compute-power scheduling for prosumer data centers.
//!
//! The library models a fleet of data-center sites that schedule rigid
//! training jobs, route elastic inference demand, dispatch batteries and
//! local generation, and trade with the grid under a horizon-wide carbon
//! budget. The whole problem is expressed as a mixed-integer linear
//! program and solved by a self-contained branch-and-bound solver on top
//! of a bounded-variable simplex oracle.
//!
//! Crate layout:
//! - [`instance`] — problem data model, validation, JSON (de)serialization
//! - [`milp`] — generic sparse MILP representation and point evaluation
//! - [`mps`] — MPS export/import for interoperability with external solvers
//! - [`build`] — translates an [`instance::Instance`] into the MILP
//! - [`simplex`] — bounded-variable two-phase simplex (LP oracle)
//! - [`bnb`] — branch-and-bound MILP solver
//! - [`validator`] — solver-independent feasibility checks and metrics
//! - [`scenario`] — seeded synthetic instance generation
//! - [`baselines`] — compute-only / energy-only / variant baselines
//! - [`harness`] — comparison and sweep drivers plus exact oracles

// Index-based loops are used deliberately throughout: most walk several
// parallel arrays (per-site, per-period tensors) where iterator zips would
// obscure the indexing that mirrors the mathematical formulation.
#![allow(clippy::needless_range_loop)]

pub mod baselines;
pub mod bnb;
pub mod build;
pub mod harness;
pub mod instance;
pub mod milp;
pub mod mps;
pub mod scenario;
pub mod sfloat;
pub mod simplex;
pub mod validator;

pub use bnb::{solve_milp, SolveReport, SolveStatus, SolverParams};
pub use build::{build, presolve, BuildOptions, VarIndex, Variant};
pub use instance::{load_instance, save_instance, validate_instance, Instance};
pub use milp::MilpModel;
pub use scenario::{generate, GenConfig, ScenarioKind};
pub use validator::{check_solution, compute_metrics, Metrics, Solution};
