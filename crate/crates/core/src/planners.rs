//! Single-agent Δ-path planners.
//!
//! Both planners search over the Δ-section graph: the successors of a cell
//! are the cells of the midpoint circle of radius Δ around it whose section
//! rounds to Δ and has line of sight. A final hop shorter than Δ connects to
//! the goal once it is within reach.
//!
//! * [`plan_theta_delta`] is any-angle. It applies the Theta* parent shortcut
//!   only when the shortcut section itself is a valid Δ-section.
//! * [`plan_lian`] keeps the arrival direction in the search state and prunes
//!   successors whose heading change exceeds `alpha_max`.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{angle_between, is_delta_section, Section};
use crate::grid::{circle_offsets, dist, los_unchecked, Cell, Grid};

/// A sequence of adjacent sections from a start cell to a goal cell.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Path {
    sections: Vec<Section>,
}

impl Path {
    /// Builds a path from its section endpoints. Needs at least two distinct
    /// consecutive waypoints.
    pub fn from_waypoints(waypoints: &[Cell]) -> Result<Path> {
        if waypoints.len() < 2 {
            return Err(Error::Solution(format!(
                "a path needs at least 2 waypoints, got {}",
                waypoints.len()
            )));
        }
        let sections = waypoints
            .windows(2)
            .map(|w| Section::new(w[0], w[1]))
            .collect::<Result<Vec<_>>>()?;
        Ok(Path { sections })
    }

    /// Wraps sections without checking adjacency; see [`validate_path`].
    pub fn from_sections(sections: Vec<Section>) -> Path {
        Path { sections }
    }

    pub fn sections(&self) -> &[Section] {
        &self.sections
    }

    pub fn len(&self) -> usize {
        self.sections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sections.is_empty()
    }

    pub fn waypoints(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = self.sections.iter().map(Section::sp).collect();
        if let Some(last) = self.sections.last() {
            out.push(last.ep());
        }
        out
    }

    pub fn start(&self) -> Option<Cell> {
        self.sections.first().map(Section::sp)
    }

    pub fn goal(&self) -> Option<Cell> {
        self.sections.last().map(Section::ep)
    }

    /// Total length.
    pub fn length(&self) -> f64 {
        self.sections.iter().map(Section::length).sum()
    }

    /// Largest heading change between consecutive sections, 0 for a single section.
    pub fn max_alteration_angle(&self) -> f64 {
        self.sections
            .windows(2)
            .map(|w| angle_between(w[0].direction(), w[1].direction()))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathQuery {
    pub start: Cell,
    pub goal: Cell,
}

impl PathQuery {
    pub fn new(start: Cell, goal: Cell) -> Self {
        PathQuery { start, goal }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub delta: i32,
    /// Degrees; used by LIAN and by angle-constrained detours.
    pub alpha_max: f64,
    pub heuristic_weight: f64,
    pub max_expansions: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            delta: 5,
            alpha_max: 25.0,
            heuristic_weight: 1.0,
            max_expansions: 1_000_000,
        }
    }
}

impl PlannerConfig {
    fn check(&self) -> std::result::Result<(), PlanError> {
        if self.delta < 2 {
            return Err(PlanError::InvalidConfig(format!(
                "delta must be >= 2, got {}",
                self.delta
            )));
        }
        if !(self.alpha_max > 0.0 && self.alpha_max < 90.0) {
            return Err(PlanError::InvalidConfig(format!(
                "alpha_max must be in (0, 90), got {}",
                self.alpha_max
            )));
        }
        if self.heuristic_weight.is_nan() || self.heuristic_weight < 1.0 {
            return Err(PlanError::InvalidConfig(format!(
                "heuristic weight must be >= 1, got {}",
                self.heuristic_weight
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanError {
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error("goal unreachable (search space exhausted after {expansions} expansions)")]
    Unreachable { expansions: usize },
    #[error("expansion budget of {expansions} exhausted")]
    BudgetExhausted { expansions: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Theta,
    Lian,
}

impl PlannerKind {
    pub fn plan(
        self,
        grid: &Grid,
        query: PathQuery,
        cfg: &PlannerConfig,
    ) -> std::result::Result<Path, PlanError> {
        match self {
            PlannerKind::Theta => plan_theta_delta(grid, query, cfg),
            PlannerKind::Lian => plan_lian(grid, query, cfg),
        }
    }

    pub fn is_angle_constrained(self) -> bool {
        matches!(self, PlannerKind::Lian)
    }
}

impl fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PlannerKind::Theta => "theta",
            PlannerKind::Lian => "lian",
        })
    }
}

impl std::str::FromStr for PlannerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "theta" => Ok(PlannerKind::Theta),
            "lian" => Ok(PlannerKind::Lian),
            other => Err(format!(
                "unknown planner `{other}` (expected theta or lian)"
            )),
        }
    }
}

fn check_query(grid: &Grid, q: PathQuery) -> std::result::Result<(), PlanError> {
    for (name, c) in [("start", q.start), ("goal", q.goal)] {
        if !grid.in_bounds(c) {
            return Err(PlanError::InvalidQuery(format!(
                "{name} {c:?} outside the grid"
            )));
        }
        if !grid.is_traversable(c) {
            return Err(PlanError::InvalidQuery(format!("{name} {c:?} is blocked")));
        }
    }
    if q.start == q.goal {
        return Err(PlanError::InvalidQuery("start equals goal".into()));
    }
    Ok(())
}

/// round(dist(a, b)) <= delta, i.e. `b` can be reached by a final hop.
fn within_final_hop(a: Cell, b: Cell, delta: i32) -> bool {
    let (di, dj) = (i64::from(a.i - b.i), i64::from(a.j - b.j));
    4 * (di * di + dj * dj) < (2 * i64::from(delta) + 1).pow(2)
}

/// Circle offsets that form Δ-sections.
fn delta_offsets(delta: i32) -> Vec<(i32, i32)> {
    circle_offsets(delta)
        .expect("delta checked >= 2")
        .into_iter()
        .filter(|&(di, dj)| {
            let e = Section::new(Cell::new(0, 0), Cell::new(di, dj)).expect("non-zero offset");
            is_delta_section(&e, delta)
        })
        .collect()
}

/// Open-list entry; the heap pops the smallest f, then smallest g, then
/// the smallest state.
#[derive(Clone, Copy, Debug)]
struct OpenEntry<S> {
    f: f64,
    g: f64,
    state: S,
}

impl<S: Ord> Ord for OpenEntry<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.g.total_cmp(&self.g))
            .then_with(|| other.state.cmp(&self.state))
    }
}

impl<S: Ord> PartialOrd for OpenEntry<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<S: Ord> PartialEq for OpenEntry<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<S: Ord> Eq for OpenEntry<S> {}

struct NodeInfo<S> {
    g: f64,
    parent: Option<S>,
    closed: bool,
}

/// Best-first search shared by both planners. `expand` pushes `(successor,
/// parent, g)` candidates for a popped state.
fn best_first<S, E, C>(
    start: S,
    goal: Cell,
    cfg: &PlannerConfig,
    cell_of: C,
    mut expand: E,
) -> std::result::Result<Vec<Cell>, PlanError>
where
    S: Copy + Ord + std::hash::Hash,
    C: Fn(S) -> Cell,
    E: FnMut(S, Option<S>, &HashMap<S, NodeInfo<S>>, &mut Vec<(S, S, f64)>),
{
    let heuristic = |c: Cell| cfg.heuristic_weight * dist(c, goal);
    let mut nodes: HashMap<S, NodeInfo<S>> = HashMap::new();
    let mut open = BinaryHeap::new();
    nodes.insert(
        start,
        NodeInfo {
            g: 0.0,
            parent: None,
            closed: false,
        },
    );
    open.push(OpenEntry {
        f: heuristic(cell_of(start)),
        g: 0.0,
        state: start,
    });

    let mut expansions = 0usize;
    let mut candidates = Vec::new();
    while let Some(OpenEntry { g, state, .. }) = open.pop() {
        let info = nodes.get_mut(&state).expect("queued states are recorded");
        if info.closed || g > info.g {
            continue;
        }
        info.closed = true;
        let parent = info.parent;

        if cell_of(state) == goal {
            let mut cells = vec![cell_of(state)];
            let mut cur = parent;
            while let Some(s) = cur {
                cells.push(cell_of(s));
                cur = nodes[&s].parent;
            }
            cells.reverse();
            return Ok(cells);
        }

        expansions += 1;
        if expansions > cfg.max_expansions {
            return Err(PlanError::BudgetExhausted {
                expansions: cfg.max_expansions,
            });
        }

        candidates.clear();
        expand(state, parent, &nodes, &mut candidates);
        for &(succ, via, g_new) in &candidates {
            match nodes.entry(succ) {
                Entry::Occupied(mut e) => {
                    let n = e.get_mut();
                    if n.closed || g_new >= n.g {
                        continue;
                    }
                    n.g = g_new;
                    n.parent = Some(via);
                }
                Entry::Vacant(e) => {
                    e.insert(NodeInfo {
                        g: g_new,
                        parent: Some(via),
                        closed: false,
                    });
                }
            }
            open.push(OpenEntry {
                f: g_new + heuristic(cell_of(succ)),
                g: g_new,
                state: succ,
            });
        }
    }
    Err(PlanError::Unreachable { expansions })
}

fn into_path(cells: Vec<Cell>) -> Path {
    Path::from_waypoints(&cells).expect("search yields distinct consecutive cells")
}

/// Any-angle Δ-path search (Theta* restricted to Δ-sections).
pub fn plan_theta_delta(
    grid: &Grid,
    q: PathQuery,
    cfg: &PlannerConfig,
) -> std::result::Result<Path, PlanError> {
    cfg.check()?;
    check_query(grid, q)?;
    let delta = cfg.delta;
    let offsets = delta_offsets(delta);

    let cells = best_first(
        q.start,
        q.goal,
        cfg,
        |c| c,
        |cur, parent, nodes, out| {
            let g_of = |c: &Cell| nodes[c].g;
            let g_cur = g_of(&cur);
            let mut relax = |next: Cell, final_hop: bool| {
                if let Some(p) = parent {
                    if p != next {
                        let shortcut = Section::new(p, next).expect("p != next");
                        let ok = if final_hop {
                            within_final_hop(p, next, delta)
                        } else {
                            is_delta_section(&shortcut, delta)
                        };
                        if ok && los_unchecked(grid, p, next) {
                            out.push((next, p, g_of(&p) + shortcut.length()));
                            return;
                        }
                    }
                }
                if los_unchecked(grid, cur, next) {
                    out.push((next, cur, g_cur + dist(cur, next)));
                }
            };

            for &(di, dj) in &offsets {
                let next = cur.offset(di, dj);
                if grid.is_traversable(next) && nodes.get(&next).is_none_or(|n| !n.closed) {
                    relax(next, false);
                }
            }
            if within_final_hop(cur, q.goal, delta) {
                relax(q.goal, true);
            }
        },
    )?;
    Ok(into_path(cells))
}

/// Arrival direction of a LIAN search state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
enum Heading {
    Start,
    /// Index into the Δ-circle offsets.
    Circle(u16),
    /// Final hop onto the goal.
    Final,
}

/// Angle-constrained Δ-path search (LIAN).
pub fn plan_lian(
    grid: &Grid,
    q: PathQuery,
    cfg: &PlannerConfig,
) -> std::result::Result<Path, PlanError> {
    cfg.check()?;
    check_query(grid, q)?;
    let delta = cfg.delta;
    let alpha_max = cfg.alpha_max;
    let offsets = delta_offsets(delta);

    let cells = best_first(
        (q.start, Heading::Start),
        q.goal,
        cfg,
        |(c, _)| c,
        |state, _parent, nodes, out| {
            let (cur, heading) = state;
            let g_cur = nodes[&state].g;
            let incoming = match heading {
                Heading::Circle(k) => {
                    let (di, dj) = offsets[k as usize];
                    Some((i64::from(di), i64::from(dj)))
                }
                Heading::Start => None,
                Heading::Final => unreachable!("final-hop states are goal states"),
            };
            let turn_ok =
                |d: (i64, i64)| incoming.is_none_or(|inc| angle_between(inc, d) <= alpha_max);

            for (k, &(di, dj)) in offsets.iter().enumerate() {
                let next = cur.offset(di, dj);
                let succ = (next, Heading::Circle(k as u16));
                if !grid.is_traversable(next)
                    || nodes.get(&succ).is_some_and(|n| n.closed)
                    || !turn_ok((i64::from(di), i64::from(dj)))
                    || !los_unchecked(grid, cur, next)
                {
                    continue;
                }
                out.push((succ, state, g_cur + f64::from(di).hypot(f64::from(dj))));
            }

            let to_goal = (i64::from(q.goal.i - cur.i), i64::from(q.goal.j - cur.j));
            if within_final_hop(cur, q.goal, delta)
                && turn_ok(to_goal)
                && los_unchecked(grid, cur, q.goal)
            {
                out.push(((q.goal, Heading::Final), state, g_cur + dist(cur, q.goal)));
            }
        },
    )?;
    Ok(into_path(cells))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ViolationKind {
    EmptyPath,
    NotAdjacent,
    OutOfBounds,
    Blocked,
    NotDeltaSection { length: f64 },
    AngleExceeded { angle: f64 },
}

/// A broken path invariant at a section index. Angle violations refer to
/// the second section of the offending pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub index: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ViolationKind::EmptyPath => write!(f, "path has no sections"),
            ViolationKind::NotAdjacent => write!(
                f,
                "section {} does not start where the previous one ends",
                self.index
            ),
            ViolationKind::OutOfBounds => write!(f, "section {} leaves the grid", self.index),
            ViolationKind::Blocked => write!(f, "section {} has no line of sight", self.index),
            ViolationKind::NotDeltaSection { length } => {
                write!(
                    f,
                    "section {} has length {length:.3}, not a delta-section",
                    self.index
                )
            }
            ViolationKind::AngleExceeded { angle } => {
                write!(f, "turn into section {} is {angle:.3} degrees", self.index)
            }
        }
    }
}

/// Checks the Δ-path invariants, and the turn limit when `alpha_max` is given.
pub fn validate_path(p: &Path, grid: &Grid, delta: i32, alpha_max: Option<f64>) -> Vec<Violation> {
    let mut out = Vec::new();
    let sections = p.sections();
    if sections.is_empty() {
        out.push(Violation {
            index: 0,
            kind: ViolationKind::EmptyPath,
        });
        return out;
    }
    let last = sections.len() - 1;
    for (k, e) in sections.iter().enumerate() {
        if k > 0 && sections[k - 1].ep() != e.sp() {
            out.push(Violation {
                index: k,
                kind: ViolationKind::NotAdjacent,
            });
        }
        if !grid.in_bounds(e.sp()) || !grid.in_bounds(e.ep()) {
            out.push(Violation {
                index: k,
                kind: ViolationKind::OutOfBounds,
            });
        } else if !los_unchecked(grid, e.sp(), e.ep()) {
            out.push(Violation {
                index: k,
                kind: ViolationKind::Blocked,
            });
        }
        if k < last && !is_delta_section(e, delta) {
            out.push(Violation {
                index: k,
                kind: ViolationKind::NotDeltaSection { length: e.length() },
            });
        }
        if let (Some(limit), true) = (alpha_max, k > 0) {
            let angle = angle_between(sections[k - 1].direction(), e.direction());
            if angle > limit {
                out.push(Violation {
                    index: k,
                    kind: ViolationKind::AngleExceeded { angle },
                });
            }
        }
    }
    out
}
