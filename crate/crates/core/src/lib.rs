//! Multi-agent path finding for constant-speed agents on square grids.
//!
//! Each agent first plans a Δ-path on its own (any-angle with
//! [`planners::plan_theta_delta`] or angle-constrained with
//! [`planners::plan_lian`]). The resulting set of plans is then made
//! collision-free by [`resolution::resolve_conflicts`], which only ever
//! inserts local detours or delays take-off.

pub mod conflicts;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod harness;
pub mod planners;
pub mod resolution;

pub use conflicts::{Conflict, ConflictKind, PSolution, SafetyRadius};
pub use error::{Error, Result};
pub use geometry::{Point, Section};
pub use grid::{Cell, Grid, MapGenParams};
pub use planners::{Path, PathQuery, PlanError, PlannerConfig, PlannerKind};
pub use resolution::{ResolutionReport, ResolveError, ResolverConfig, SolutionSet};
