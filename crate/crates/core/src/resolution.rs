//! Centralized conflict resolution over independently planned p-solutions.
//!
//! The solution set is split into HEAD (pairwise conflict-free, frozen) and
//! TAIL. TAIL members are taken one at a time, fewest conflicts first, and
//! refined against HEAD until they are conflict-free: the first conflict is
//! attacked with a local detour around the conflicting section, and if no
//! detour exists or it would move the first conflict backwards, the agent's
//! take-off is delayed by `wait` instead. Nothing is ever backtracked.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::conflicts::{
    find_first_conflict, paths_conflict, Conflict, PSolution, SafetyRadius, TimedPath,
};
use crate::geometry::{angle_between, is_delta_section, Section};
use crate::grid::{los_unchecked, midpoint_circle, Grid};
use crate::planners::Path;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolutionSet {
    pub psolutions: Vec<PSolution>,
}

impl SolutionSet {
    /// Fails on duplicate agent ids.
    pub fn new(psolutions: Vec<PSolution>) -> Result<Self, ResolveError> {
        let mut seen = HashSet::new();
        for p in &psolutions {
            if !seen.insert(p.agent_id) {
                return Err(ResolveError::InvalidInput(format!(
                    "duplicate agent id {}",
                    p.agent_id
                )));
            }
        }
        Ok(SolutionSet { psolutions })
    }

    pub fn len(&self) -> usize {
        self.psolutions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psolutions.is_empty()
    }

    pub fn get(&self, agent_id: usize) -> Option<&PSolution> {
        self.psolutions.iter().find(|p| p.agent_id == agent_id)
    }
}

/// Sum over agents of offset plus path length.
pub fn solution_cost(ps: &SolutionSet) -> f64 {
    ps.psolutions.iter().map(PSolution::cost).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolverConfig {
    pub delta: i32,
    /// Degrees.
    pub alpha_max: f64,
    /// Take-off delay added per offset adjustment.
    pub wait: f64,
    pub radius: SafetyRadius,
    /// Per-agent refinement budget.
    pub max_refinement_steps: usize,
    /// Paths are ac-paths; detours must keep every turn within `alpha_max`.
    pub angle_constrained: bool,
}

impl Default for ResolverConfig {
    fn default() -> Self {
        ResolverConfig {
            delta: 5,
            alpha_max: 25.0,
            wait: 5.0,
            radius: SafetyRadius::default(),
            max_refinement_steps: 100_000,
            angle_constrained: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentOutcome {
    Unchanged,
    Delayed,
    Replanned,
    DelayedAndReplanned,
}

impl AgentOutcome {
    fn from_flags(delayed: bool, replanned: bool) -> Self {
        match (delayed, replanned) {
            (false, false) => AgentOutcome::Unchanged,
            (true, false) => AgentOutcome::Delayed,
            (false, true) => AgentOutcome::Replanned,
            (true, true) => AgentOutcome::DelayedAndReplanned,
        }
    }

    pub fn was_delayed(self) -> bool {
        matches!(
            self,
            AgentOutcome::Delayed | AgentOutcome::DelayedAndReplanned
        )
    }

    pub fn was_replanned(self) -> bool {
        matches!(
            self,
            AgentOutcome::Replanned | AgentOutcome::DelayedAndReplanned
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolutionReport {
    /// Outcome per agent id.
    pub outcomes: BTreeMap<usize, AgentOutcome>,
    /// Offset increments applied.
    pub offset_attempts: usize,
    /// Local detour computations attempted.
    pub replan_attempts: usize,
    pub final_cost: f64,
    /// Main-loop iterations (one per initial TAIL member).
    pub iterations: usize,
}

impl ResolutionReport {
    pub fn count(&self, outcome: AgentOutcome) -> usize {
        self.outcomes.values().filter(|&&o| o == outcome).count()
    }

    /// Agents delayed at least once (includes delayed-and-replanned).
    pub fn delayed(&self) -> usize {
        self.outcomes.values().filter(|o| o.was_delayed()).count()
    }

    /// Agents with at least one accepted detour.
    pub fn replanned(&self) -> usize {
        self.outcomes.values().filter(|o| o.was_replanned()).count()
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum ResolveError {
    #[error("invalid solution set: {0}")]
    InvalidInput(String),
    #[error(
        "agent {agent_id} still conflicts after {steps} refinement steps \
         (first conflict: section {} vs agent {} section {})",
        .conflict.first.section, .conflict.second.agent_id, .conflict.second.section
    )]
    RefinementLimit {
        agent_id: usize,
        steps: usize,
        conflict: Conflict,
    },
}

/// Progress notifications from [`resolve_conflicts_observed`].
#[derive(Debug)]
pub enum ResolutionEvent<'a> {
    /// Start of a main-loop iteration, and once more after the last one.
    IterationBoundary {
        head: &'a [PSolution],
        tail_len: usize,
    },
    /// An agent was taken out of TAIL for refinement.
    Selected { agent_id: usize, tail_len: usize },
    DetourAccepted {
        agent_id: usize,
        /// Section index of the conflict the detour was built for.
        conflict_section: usize,
        /// First conflict of the new path, if any.
        new_first_conflict: Option<usize>,
        total_cost: f64,
    },
    OffsetIncreased {
        agent_id: usize,
        offset: f64,
        total_cost: f64,
    },
}

fn conflict_matrix(ps: &[PSolution], r: SafetyRadius) -> Vec<Vec<bool>> {
    let timed: Vec<TimedPath<'_>> = ps.iter().map(TimedPath::new).collect();
    let n = ps.len();
    let mut m = vec![vec![false; n]; n];
    for x in 0..n {
        for y in x + 1..n {
            let c = paths_conflict(&timed[x], &timed[y], r.get());
            m[x][y] = c;
            m[y][x] = c;
        }
    }
    m
}

/// Splits the set into HEAD and TAIL agent ids (both ascending).
///
/// Conflict-free p-solutions go to HEAD; then, in agent id order, every
/// other p-solution that conflicts with no current HEAD member joins HEAD.
pub fn form_head_and_tail(ps: &[PSolution], r: SafetyRadius) -> (Vec<usize>, Vec<usize>) {
    let (head, tail) = partition_indices(ps, r);
    let ids = |idx: Vec<usize>| {
        let mut v: Vec<usize> = idx.into_iter().map(|k| ps[k].agent_id).collect();
        v.sort_unstable();
        v
    };
    (ids(head), ids(tail))
}

fn partition_indices(ps: &[PSolution], r: SafetyRadius) -> (Vec<usize>, Vec<usize>) {
    let m = conflict_matrix(ps, r);
    let mut order: Vec<usize> = (0..ps.len()).collect();
    order.sort_by_key(|&k| ps[k].agent_id);

    let mut in_head = vec![false; ps.len()];
    for &k in &order {
        in_head[k] = !m[k].iter().any(|&c| c);
    }
    for &k in &order {
        if !in_head[k] && !(0..ps.len()).any(|h| in_head[h] && m[k][h]) {
            in_head[k] = true;
        }
    }
    order.into_iter().partition(|&k| in_head[k])
}

/// Local detour around section `v`.
///
/// Sections `v` and `v + 1` are replaced by `sp(e_v) -> a -> ep(e_{v+1})`
/// where `a` lies on the Δ-circle around `sp(e_v)`. Cells that would make
/// the path shorter are not admissible. Among the admissible cells the one
/// maximizing the heading change from the incoming section to
/// `a -> ep(e_{v+1})` is chosen, earliest in circle order on ties. Returns
/// the path unchanged when `v` is the last section or no cell qualifies.
pub fn compute_local_detour(
    grid: &Grid,
    pps: &PSolution,
    v: usize,
    cfg: &ResolverConfig,
    is_ac: bool,
) -> Path {
    let sections = pps.path.sections();
    if v + 1 >= sections.len() {
        return pps.path.clone();
    }
    let (cur, next) = (sections[v], sections[v + 1]);
    let center = cur.sp();
    let rejoin = next.ep();
    let incoming = v.checked_sub(1).map(|k| sections[k].direction());
    let following = sections.get(v + 2).map(Section::direction);
    // with no incoming section, deviation is measured from the section being replaced
    let reference = incoming.unwrap_or_else(|| cur.direction());
    let turn_ok = |a: (i64, i64), b: (i64, i64)| angle_between(a, b) <= cfg.alpha_max;
    let replaced_len = cur.length() + next.length();

    let Ok(circle) = midpoint_circle(center, cfg.delta) else {
        return pps.path.clone();
    };
    let mut best: Option<(f64, Section, Section)> = None;
    for a in circle {
        if !grid.is_traversable(a) || a == cur.ep() || a == rejoin {
            continue;
        }
        let new1 = Section::new(center, a).expect("circle cells differ from the center");
        let new2 = Section::new(a, rejoin).expect("a != rejoin");
        if !is_delta_section(&new1, cfg.delta) {
            continue;
        }
        if incoming.is_some_and(|inc| !turn_ok(inc, new1.direction())) {
            continue;
        }
        if is_ac
            && (!turn_ok(new1.direction(), new2.direction())
                || following.is_some_and(|f| !turn_ok(new2.direction(), f)))
        {
            continue;
        }
        // a shortcut would lower the cost
        if new1.length() + new2.length() < replaced_len {
            continue;
        }
        if !los_unchecked(grid, center, a) || !los_unchecked(grid, a, rejoin) {
            continue;
        }
        let deviation = angle_between(reference, new2.direction());
        if best.as_ref().is_none_or(|(d, ..)| deviation > *d) {
            best = Some((deviation, new1, new2));
        }
    }

    match best {
        Some((_, new1, new2)) => {
            let mut out = sections.to_vec();
            out.splice(v..=v + 1, [new1, new2]);
            Path::from_sections(out)
        }
        None => pps.path.clone(),
    }
}

/// Runs the resolution loop. See the module docs.
pub fn resolve_conflicts(
    grid: &Grid,
    ps: SolutionSet,
    cfg: &ResolverConfig,
) -> Result<(SolutionSet, ResolutionReport), ResolveError> {
    resolve_conflicts_observed(grid, ps, cfg, |_| {})
}

/// [`resolve_conflicts`] with a callback receiving [`ResolutionEvent`]s.
pub fn resolve_conflicts_observed<F>(
    grid: &Grid,
    ps: SolutionSet,
    cfg: &ResolverConfig,
    mut observe: F,
) -> Result<(SolutionSet, ResolutionReport), ResolveError>
where
    F: FnMut(ResolutionEvent<'_>),
{
    if cfg.wait.is_nan() || cfg.wait <= 0.0 {
        return Err(ResolveError::InvalidInput(format!(
            "wait must be positive, got {}",
            cfg.wait
        )));
    }
    let r = cfg.radius;
    let mut report = ResolutionReport::default();
    for p in &ps.psolutions {
        report.outcomes.insert(p.agent_id, AgentOutcome::Unchanged);
    }

    let (head_idx, tail_idx) = partition_indices(&ps.psolutions, r);
    let mut slots: Vec<Option<PSolution>> = ps.psolutions.into_iter().map(Some).collect();
    let mut head: Vec<PSolution> = head_idx
        .iter()
        .map(|&k| slots[k].take().expect("unique"))
        .collect();
    let mut tail: Vec<PSolution> = tail_idx
        .iter()
        .map(|&k| slots[k].take().expect("unique"))
        .collect();
    let mut total_cost: f64 = head.iter().chain(&tail).map(PSolution::cost).sum();

    while !tail.is_empty() {
        observe(ResolutionEvent::IterationBoundary {
            head: &head,
            tail_len: tail.len(),
        });
        report.iterations += 1;

        let pick = (0..tail.len())
            .min_by_key(|&k| {
                let others = head.iter().chain(tail.iter());
                let n = crate::conflicts::number_of_conflicts(&tail[k], others, r);
                (n, tail[k].agent_id)
            })
            .expect("tail is non-empty");
        let mut cur = tail.remove(pick);
        observe(ResolutionEvent::Selected {
            agent_id: cur.agent_id,
            tail_len: tail.len(),
        });

        let (mut delayed, mut replanned) = (false, false);
        let mut steps = 0usize;
        while let Some(conflict) = find_first_conflict(&cur, &head, r) {
            steps += 1;
            if steps > cfg.max_refinement_steps {
                return Err(ResolveError::RefinementLimit {
                    agent_id: cur.agent_id,
                    steps: cfg.max_refinement_steps,
                    conflict,
                });
            }
            let v = conflict.first.section;
            report.replan_attempts += 1;
            let detour = compute_local_detour(grid, &cur, v, cfg, cfg.angle_constrained);
            let accepted = if detour == cur.path {
                None
            } else {
                let candidate = PSolution {
                    path: detour,
                    ..cur.clone()
                };
                match find_first_conflict(&candidate, &head, r) {
                    None => Some((candidate, None)),
                    Some(c) if c.first.section > v => Some((candidate, Some(c.first.section))),
                    Some(_) => None,
                }
            };

            match accepted {
                Some((candidate, new_first)) => {
                    total_cost += candidate.path.length() - cur.path.length();
                    debug_assert!(detour_keeps_invariants(grid, &candidate.path, v, cfg));
                    cur = candidate;
                    replanned = true;
                    observe(ResolutionEvent::DetourAccepted {
                        agent_id: cur.agent_id,
                        conflict_section: v,
                        new_first_conflict: new_first,
                        total_cost,
                    });
                }
                None => {
                    cur.offset += cfg.wait;
                    total_cost += cfg.wait;
                    report.offset_attempts += 1;
                    delayed = true;
                    observe(ResolutionEvent::OffsetIncreased {
                        agent_id: cur.agent_id,
                        offset: cur.offset,
                        total_cost,
                    });
                }
            }
        }

        report
            .outcomes
            .insert(cur.agent_id, AgentOutcome::from_flags(delayed, replanned));
        head.push(cur);
    }
    observe(ResolutionEvent::IterationBoundary {
        head: &head,
        tail_len: 0,
    });

    head.sort_by_key(|p| p.agent_id);
    let out = SolutionSet { psolutions: head };
    report.final_cost = solution_cost(&out);
    Ok((out, report))
}

fn detour_keeps_invariants(grid: &Grid, path: &Path, v: usize, cfg: &ResolverConfig) -> bool {
    let s = path.sections();
    let adjacent = s.windows(2).all(|w| w[0].ep() == w[1].sp());
    let clear = s.iter().all(|e| los_unchecked(grid, e.sp(), e.ep()));
    adjacent && clear && is_delta_section(&s[v], cfg.delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conflicts::{conflict_stats, detect_conflict};
    use crate::grid::Cell;
    use crate::planners::{validate_path, ViolationKind};

    fn pps(id: usize, pts: &[(i32, i32)], offset: f64) -> PSolution {
        let cells: Vec<Cell> = pts.iter().copied().map(Cell::from).collect();
        PSolution::new(id, Path::from_waypoints(&cells).unwrap()).with_offset(offset)
    }

    fn straight(id: usize, row: i32, from: i32, sections: i32) -> PSolution {
        let pts: Vec<(i32, i32)> = (0..=sections).map(|k| (row, from + 5 * k)).collect();
        pps(id, &pts, 0.0)
    }

    #[test]
    fn head_and_tail_all_clean() {
        let ps: Vec<_> = (0..4).map(|k| straight(k, 10 * k as i32, 0, 3)).collect();
        let (h, t) = form_head_and_tail(&ps, SafetyRadius::default());
        assert_eq!(h, vec![0, 1, 2, 3]);
        assert!(t.is_empty());
    }

    #[test]
    fn head_and_tail_promotes_first_of_a_conflicting_pair() {
        let mut ps: Vec<_> = (0..5).map(|k| straight(k, 20 * k as i32, 0, 3)).collect();
        // agents 1 and 3 cross at (30, 7) at the same time
        ps[1] = pps(1, &[(30, 0), (30, 7), (30, 12)], 0.0);
        ps[3] = pps(3, &[(23, 7), (30, 7), (35, 7)], 0.0);
        let (h, t) = form_head_and_tail(&ps, SafetyRadius::default());
        assert_eq!(h, vec![0, 1, 2, 4]);
        assert_eq!(t, vec![3]);
    }

    #[test]
    fn detour_on_open_ground() {
        let grid = Grid::new(40, 40);
        let p = straight(0, 20, 5, 3);
        let cfg = ResolverConfig::default();
        let out = compute_local_detour(&grid, &p, 1, &cfg, false);
        assert_ne!(out, p.path);
        assert_eq!(out.len(), p.path.len());
        assert_eq!(out.sections()[0], p.path.sections()[0]);
        assert!(
            out.sections()[1] != p.path.sections()[1] && out.sections()[2] != p.path.sections()[2]
        );
        assert!(is_delta_section(&out.sections()[1], 5));
        assert_eq!((out.start(), out.goal()), (p.path.start(), p.path.goal()));
        // only the rejoining section may break the delta property
        let v = validate_path(&out, &grid, 5, None);
        assert!(v
            .iter()
            .all(|x| x.index == 2 && matches!(x.kind, ViolationKind::NotDeltaSection { .. })));
        let turn = angle_between(out.sections()[0].direction(), out.sections()[1].direction());
        assert!(turn <= 25.0);
    }

    #[test]
    fn detour_fails_on_last_section_and_when_blocked() {
        let mut grid = Grid::new(40, 40);
        let p = straight(0, 20, 5, 3);
        let cfg = ResolverConfig::default();
        assert_eq!(compute_local_detour(&grid, &p, 2, &cfg, false), p.path);
        // wall everything except the row the path is on
        for c in grid.clone().cells() {
            if c.i != 20 {
                grid.set_traversable(c, false);
            }
        }
        assert_eq!(compute_local_detour(&grid, &p, 1, &cfg, false), p.path);
    }

    #[test]
    fn detour_respects_angle_limit_for_ac_paths() {
        let grid = Grid::new(60, 60);
        let p = straight(0, 30, 5, 6);
        let cfg = ResolverConfig {
            angle_constrained: true,
            ..ResolverConfig::default()
        };
        for v in 0..5 {
            let out = compute_local_detour(&grid, &p, v, &cfg, true);
            assert!(
                out.max_alteration_angle() <= 25.0,
                "v={v}: {}",
                out.max_alteration_angle()
            );
        }
    }

    #[test]
    fn conflict_free_input_is_untouched() {
        let grid = Grid::new(60, 60);
        let ps = SolutionSet::new(
            (0..3)
                .map(|k| straight(k, 10 + 10 * k as i32, 0, 4))
                .collect(),
        )
        .unwrap();
        let (out, rep) = resolve_conflicts(&grid, ps.clone(), &ResolverConfig::default()).unwrap();
        assert_eq!(out, ps);
        assert_eq!(rep.count(AgentOutcome::Unchanged), 3);
        assert_eq!(
            (rep.offset_attempts, rep.replan_attempts, rep.iterations),
            (0, 0, 0)
        );
        assert_eq!(rep.final_cost, solution_cost(&ps));
    }

    #[test]
    fn crossing_in_a_corridor_is_delayed_once() {
        // two one-cell corridors crossing: no room for a detour
        let mut grid = Grid::new(9, 9);
        for c in grid.clone().cells() {
            grid.set_traversable(c, c.i == 4 || c.j == 4);
        }
        let a = pps(0, &[(4, 0), (4, 4), (4, 8)], 0.0);
        let b = pps(1, &[(0, 4), (4, 4), (8, 4)], 0.0);
        let r = SafetyRadius::default();
        assert!(detect_conflict(&a, 0, &b, 0, r).is_some());
        let ps = SolutionSet::new(vec![a.clone(), b.clone()]).unwrap();
        let (out, rep) = resolve_conflicts(&grid, ps, &ResolverConfig::default()).unwrap();
        assert_eq!(out.get(0).unwrap(), &a);
        assert_eq!(out.get(1).unwrap().path, b.path);
        assert_eq!(out.get(1).unwrap().offset, 5.0);
        assert_eq!(rep.outcomes[&1], AgentOutcome::Delayed);
        assert_eq!(rep.offset_attempts, 1);
        assert_eq!(conflict_stats(&out.psolutions, r).section_conflicts, 0);
        assert_eq!(solution_cost(&out), a.cost() + b.cost() + 5.0);
    }

    #[test]
    fn refinement_limit_is_reported() {
        let grid = Grid::new(9, 9);
        let a = pps(0, &[(4, 0), (4, 4), (4, 8)], 0.0);
        let b = pps(1, &[(0, 4), (4, 4), (8, 4)], 0.0);
        let cfg = ResolverConfig {
            max_refinement_steps: 0,
            ..ResolverConfig::default()
        };
        let err =
            resolve_conflicts(&grid, SolutionSet::new(vec![a, b]).unwrap(), &cfg).unwrap_err();
        assert!(
            matches!(err, ResolveError::RefinementLimit { agent_id: 1, .. }),
            "{err}"
        );
    }

    #[test]
    fn rejects_bad_input() {
        let grid = Grid::new(9, 9);
        assert!(SolutionSet::new(vec![straight(0, 1, 0, 1), straight(0, 2, 0, 1)]).is_err());
        let cfg = ResolverConfig {
            wait: 0.0,
            ..ResolverConfig::default()
        };
        assert!(resolve_conflicts(&grid, SolutionSet::default(), &cfg).is_err());
    }

    #[test]
    fn solution_cost_adds_offsets() {
        let one = SolutionSet::new(vec![straight(0, 0, 0, 16)]).unwrap();
        assert_eq!(solution_cost(&one), 80.0);
        let delayed = SolutionSet::new(vec![straight(0, 0, 0, 16).with_offset(5.0)]).unwrap();
        assert_eq!(solution_cost(&delayed), 85.0);
    }
}
