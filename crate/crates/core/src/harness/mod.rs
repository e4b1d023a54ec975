//! Scenario generation, the plan-then-resolve pipeline, independent
//! collision oracles and run reports.

mod io;
mod oracle;
mod report;
mod scenario;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use io::{read_solution, write_solution};
pub use oracle::{
    collision_oracle, exact_min_gap, exact_oracle, ExactViolation, OracleViolation, TimedSegment,
};
pub use report::{emit_report, MeanMetrics, Report, ReportFormat};
pub use scenario::{generate_scenario, parse_scenario, write_scenario, Allocation, ScenarioSpec};

use crate::conflicts::{conflict_stats, PSolution, SafetyRadius};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::planners::{PathQuery, PlanError, PlannerConfig, PlannerKind};
use crate::resolution::{
    resolve_conflicts_observed, solution_cost, AgentOutcome, ResolutionEvent, ResolutionReport,
    ResolverConfig, SolutionSet,
};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Copied into [`RunMetrics::run`].
    pub label: String,
    pub planner_kind: PlannerKind,
    pub planner: PlannerConfig,
    pub resolver: ResolverConfig,
    /// Sample step for [`collision_oracle`]; `None` skips it.
    pub oracle_ds: Option<f64>,
}

impl PipelineConfig {
    /// Defaults for `kind`; detours are angle-constrained iff the planner is.
    pub fn new(kind: PlannerKind) -> Self {
        PipelineConfig {
            label: String::new(),
            planner_kind: kind,
            planner: PlannerConfig::default(),
            resolver: ResolverConfig {
                angle_constrained: kind.is_angle_constrained(),
                ..ResolverConfig::default()
            },
            oracle_ds: Some(0.05),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Sets Δ, α_m, wait and r for both phases.
    pub fn with_params(
        mut self,
        delta: i32,
        alpha_max: f64,
        wait: f64,
        radius: SafetyRadius,
    ) -> Self {
        self.planner.delta = delta;
        self.planner.alpha_max = alpha_max;
        self.resolver.delta = delta;
        self.resolver.alpha_max = alpha_max;
        self.resolver.wait = wait;
        self.resolver.radius = radius;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.planner.delta != self.resolver.delta {
            return Err(Error::Config(format!(
                "planner delta {} differs from resolver delta {}",
                self.planner.delta, self.resolver.delta
            )));
        }
        if self.planner.alpha_max != self.resolver.alpha_max {
            return Err(Error::Config(format!(
                "planner alpha_max {} differs from resolver alpha_max {}",
                self.planner.alpha_max, self.resolver.alpha_max
            )));
        }
        Ok(())
    }
}

/// One row of a run report. Times in seconds, overhead in percent.
///
/// `delayed`, `replanned`, `delayed_and_replanned` and `unchanged` are
/// disjoint; the overlapping per-technique totals are `delayed +
/// delayed_and_replanned` and `replanned + delayed_and_replanned`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run: String,
    pub planner: String,
    pub n_agents: usize,
    pub plan_failures: usize,
    pub agent_conflicts: usize,
    pub section_conflicts: usize,
    pub delayed: usize,
    pub replanned: usize,
    pub delayed_and_replanned: usize,
    pub unchanged: usize,
    pub path_offset_attempts: usize,
    pub replan_attempts: usize,
    pub pf_time: f64,
    pub cr_time: f64,
    pub pf_cost: f64,
    pub cr_cost: f64,
    pub cost_overhead: f64,
    pub post_section_conflicts: usize,
    pub oracle_violations: Option<usize>,
    pub exact_violations: usize,
}

impl RunMetrics {
    pub fn without_timings(mut self) -> Self {
        self.pf_time = 0.0;
        self.cr_time = 0.0;
        self
    }
}

/// Owned record of the resolver's progress.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    Boundary {
        head: Vec<usize>,
        tail_len: usize,
    },
    Selected {
        agent_id: usize,
        tail_len: usize,
    },
    Detour {
        agent_id: usize,
        conflict_section: usize,
        new_first_conflict: Option<usize>,
        total_cost: f64,
    },
    Offset {
        agent_id: usize,
        offset: f64,
        total_cost: f64,
    },
}

impl From<&ResolutionEvent<'_>> for TraceEvent {
    fn from(e: &ResolutionEvent<'_>) -> Self {
        match *e {
            ResolutionEvent::IterationBoundary { head, tail_len } => TraceEvent::Boundary {
                head: head.iter().map(|p| p.agent_id).collect(),
                tail_len,
            },
            ResolutionEvent::Selected { agent_id, tail_len } => {
                TraceEvent::Selected { agent_id, tail_len }
            }
            ResolutionEvent::DetourAccepted {
                agent_id,
                conflict_section,
                new_first_conflict,
                total_cost,
            } => TraceEvent::Detour {
                agent_id,
                conflict_section,
                new_first_conflict,
                total_cost,
            },
            ResolutionEvent::OffsetIncreased {
                agent_id,
                offset,
                total_cost,
            } => TraceEvent::Offset {
                agent_id,
                offset,
                total_cost,
            },
        }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineRun {
    /// Conflict-free solution over the agents that could be planned.
    pub solution: SolutionSet,
    /// Independent plans before resolution.
    pub planned: SolutionSet,
    pub metrics: RunMetrics,
    pub report: ResolutionReport,
    /// Agents without a plan; they take no part in resolution.
    pub plan_failures: Vec<(usize, PlanError)>,
    pub trace: Vec<TraceEvent>,
    pub oracle_violations: Vec<OracleViolation>,
}

/// Generates the scenario for `spec` and runs [`run_pipeline`] on it.
pub fn run_scenario(grid: &Grid, spec: &ScenarioSpec, cfg: &PipelineConfig) -> Result<PipelineRun> {
    let queries = generate_scenario(grid, spec)?;
    run_pipeline(grid, &queries, cfg)
}

/// Plans every query (agent id = query index), resolves conflicts among the
/// successful plans and measures both phases.
pub fn run_pipeline(
    grid: &Grid,
    queries: &[PathQuery],
    cfg: &PipelineConfig,
) -> Result<PipelineRun> {
    run_pipeline_observed(grid, queries, cfg, |_| {})
}

/// [`run_pipeline`] that also forwards resolver events to `observe`.
pub fn run_pipeline_observed<F>(
    grid: &Grid,
    queries: &[PathQuery],
    cfg: &PipelineConfig,
    mut observe: F,
) -> Result<PipelineRun>
where
    F: FnMut(&ResolutionEvent<'_>),
{
    cfg.validate()?;
    let r = cfg.resolver.radius;

    let t0 = Instant::now();
    let mut planned = Vec::with_capacity(queries.len());
    let mut plan_failures = Vec::new();
    for (id, &q) in queries.iter().enumerate() {
        match cfg.planner_kind.plan(grid, q, &cfg.planner) {
            Ok(path) => planned.push(PSolution::new(id, path)),
            Err(e) => plan_failures.push((id, e)),
        }
    }
    let pf_time = t0.elapsed().as_secs_f64();
    let planned = SolutionSet::new(planned)?;
    let before = conflict_stats(&planned.psolutions, r);

    let mut trace = Vec::new();
    let t1 = Instant::now();
    let (solution, report) =
        resolve_conflicts_observed(grid, planned.clone(), &cfg.resolver, |e| {
            trace.push(TraceEvent::from(&e));
            observe(&e);
        })?;
    let cr_time = t1.elapsed().as_secs_f64();

    let after = conflict_stats(&solution.psolutions, r);
    let oracle_violations = match cfg.oracle_ds {
        Some(ds) => collision_oracle(&solution.psolutions, r.get(), ds)?,
        None => Vec::new(),
    };
    let exact = exact_oracle(&solution.psolutions, r.get());

    let pf_cost = solution_cost(&planned);
    let cr_cost = report.final_cost;
    let metrics = RunMetrics {
        run: cfg.label.clone(),
        planner: cfg.planner_kind.to_string(),
        n_agents: queries.len(),
        plan_failures: plan_failures.len(),
        agent_conflicts: before.agent_conflicts,
        section_conflicts: before.section_conflicts,
        delayed: report.count(AgentOutcome::Delayed),
        replanned: report.count(AgentOutcome::Replanned),
        delayed_and_replanned: report.count(AgentOutcome::DelayedAndReplanned),
        unchanged: report.count(AgentOutcome::Unchanged),
        path_offset_attempts: report.offset_attempts,
        replan_attempts: report.replan_attempts,
        pf_time,
        cr_time,
        pf_cost,
        cr_cost,
        cost_overhead: if pf_cost > 0.0 {
            (cr_cost - pf_cost) / pf_cost * 100.0
        } else {
            0.0
        },
        post_section_conflicts: after.section_conflicts,
        oracle_violations: cfg.oracle_ds.map(|_| oracle_violations.len()),
        exact_violations: exact.len(),
    };

    Ok(PipelineRun {
        solution,
        planned,
        metrics,
        report,
        plan_failures,
        trace,
        oracle_violations,
    })
}
