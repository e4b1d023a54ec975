//! Start/goal allocation and the plain-text scenario format.

use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Cell, Grid};
use crate::planners::PathQuery;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Allocation {
    /// Starts near a random border, goals near the opposite one.
    Type1,
    /// All starts in one square cluster at a border, all goals in the
    /// mirrored cluster on the opposite side.
    Type2,
}

impl std::fmt::Display for Allocation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Allocation::Type1 => "type1",
            Allocation::Type2 => "type2",
        })
    }
}

impl FromStr for Allocation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "type1" | "1" => Ok(Allocation::Type1),
            "type2" | "2" => Ok(Allocation::Type2),
            _ => Err(Error::Config(format!(
                "unknown allocation '{s}' (expected type1 or type2)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n_agents: usize,
    pub allocation: Allocation,
    /// Width of the border bands used by [`Allocation::Type1`].
    pub border_margin: usize,
    /// Side of the square clusters used by [`Allocation::Type2`].
    pub cluster_size: usize,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(n_agents: usize, allocation: Allocation, seed: u64) -> Self {
        ScenarioSpec {
            n_agents,
            allocation,
            border_margin: 50,
            cluster_size: 50,
            seed,
        }
    }

    pub fn with_border_margin(mut self, margin: usize) -> Self {
        self.border_margin = margin;
        self
    }

    pub fn with_cluster_size(mut self, size: usize) -> Self {
        self.cluster_size = size;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Top,
    Bottom,
    Left,
    Right,
}

impl Side {
    const ALL: [Side; 4] = [Side::Top, Side::Bottom, Side::Left, Side::Right];

    fn opposite(self) -> Side {
        match self {
            Side::Top => Side::Bottom,
            Side::Bottom => Side::Top,
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }
}

/// Draws one query per agent. Deterministic in `spec.seed`; starts are
/// pairwise distinct and so are goals.
pub fn generate_scenario(grid: &Grid, spec: &ScenarioSpec) -> Result<Vec<PathQuery>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.allocation {
        Allocation::Type1 => type1(grid, spec, &mut rng),
        Allocation::Type2 => type2(grid, spec, &mut rng),
    }
}

fn in_band(grid: &Grid, side: Side, margin: usize, c: Cell) -> bool {
    let (h, w, m) = (grid.height() as i32, grid.width() as i32, margin as i32);
    match side {
        Side::Top => c.i <= m,
        Side::Bottom => c.i >= h - 1 - m,
        Side::Left => c.j <= m,
        Side::Right => c.j >= w - 1 - m,
    }
}

fn type1(grid: &Grid, spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Result<Vec<PathQuery>> {
    let m = spec.border_margin;
    if 2 * (m + 1) > grid.height().min(grid.width()) {
        return Err(Error::Scenario(format!(
            "border margin {m} leaves no interior on a {}x{} grid",
            grid.height(),
            grid.width()
        )));
    }
    // one shuffled pool per band and role, consumed front to back
    let pool = |rng: &mut ChaCha8Rng, side: Side| {
        let mut cells: Vec<Cell> = grid
            .free_cells()
            .filter(|&c| in_band(grid, side, m, c))
            .collect();
        cells.shuffle(rng);
        cells
    };
    let mut start_pools: Vec<Vec<Cell>> = Side::ALL.iter().map(|&s| pool(rng, s)).collect();
    let mut goal_pools: Vec<Vec<Cell>> = Side::ALL.iter().map(|&s| pool(rng, s)).collect();
    let mut used_starts = std::collections::HashSet::new();
    let mut used_goals = std::collections::HashSet::new();
    let index = |s: Side| Side::ALL.iter().position(|&x| x == s).expect("listed");

    let mut out = Vec::with_capacity(spec.n_agents);
    for agent in 0..spec.n_agents {
        let side = Side::ALL[rng.gen_range(0..4)];
        let start = draw(&mut start_pools[index(side)], &mut used_starts).ok_or_else(|| {
            Error::Scenario(format!(
                "no free start cell left for agent {agent} ({side:?} band)"
            ))
        })?;
        let goal =
            draw(&mut goal_pools[index(side.opposite())], &mut used_goals).ok_or_else(|| {
                Error::Scenario(format!(
                    "no free goal cell left for agent {agent} ({:?} band)",
                    side.opposite()
                ))
            })?;
        out.push(PathQuery::new(start, goal));
    }
    Ok(out)
}

/// Pops cells until one not yet used (corner cells sit in two bands).
fn draw(pool: &mut Vec<Cell>, used: &mut std::collections::HashSet<Cell>) -> Option<Cell> {
    while let Some(c) = pool.pop() {
        if used.insert(c) {
            return Some(c);
        }
    }
    None
}

fn type2(grid: &Grid, spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Result<Vec<PathQuery>> {
    let (h, w, k) = (grid.height(), grid.width(), spec.cluster_size);
    if k == 0 || k > h || k > w {
        return Err(Error::Scenario(format!(
            "cluster size {k} does not fit a {h}x{w} grid"
        )));
    }
    let side = Side::ALL[rng.gen_range(0..4)];
    let (i0, j0) = match side {
        Side::Top => (0, rng.gen_range(0..=w - k)),
        Side::Bottom => (h - k, rng.gen_range(0..=w - k)),
        Side::Left => (rng.gen_range(0..=h - k), 0),
        Side::Right => (rng.gen_range(0..=h - k), w - k),
    };
    // point reflection through the grid center
    let (gi0, gj0) = (h - k - i0, w - k - j0);
    let window = |top: usize, left: usize| -> Vec<Cell> {
        (top..top + k)
            .flat_map(|i| (left..left + k).map(move |j| Cell::new(i as i32, j as i32)))
            .filter(|&c| grid.is_traversable(c))
            .collect()
    };
    let starts_pool = window(i0, j0);
    let goals_pool = window(gi0, gj0);
    let n = spec.n_agents;
    if starts_pool.len() < n || goals_pool.len() < n {
        return Err(Error::Scenario(format!(
            "{k}x{k} clusters hold {} free start and {} free goal cells, {n} needed",
            starts_pool.len(),
            goals_pool.len()
        )));
    }
    let starts: Vec<Cell> = starts_pool.choose_multiple(rng, n).copied().collect();
    let goals: Vec<Cell> = goals_pool.choose_multiple(rng, n).copied().collect();
    if starts.iter().any(|s| goals.contains(s)) {
        return Err(Error::Scenario("start and goal clusters overlap".into()));
    }
    Ok(starts
        .into_iter()
        .zip(goals)
        .map(|(s, g)| PathQuery::new(s, g))
        .collect())
}

/// One `start_i start_j goal_i goal_j` line per agent.
pub fn parse_scenario(text: &str) -> Result<Vec<PathQuery>> {
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: Vec<i32> = line
            .split_whitespace()
            .map(|t| t.parse::<i32>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Scenario(format!("line {}: {e}", n + 1)))?;
        let [si, sj, gi, gj] = v[..] else {
            return Err(Error::Scenario(format!(
                "line {}: expected 4 integers, got {}",
                n + 1,
                v.len()
            )));
        };
        out.push(PathQuery::new(Cell::new(si, sj), Cell::new(gi, gj)));
    }
    Ok(out)
}

pub fn write_scenario(queries: &[PathQuery]) -> String {
    let mut s = String::new();
    for q in queries {
        let _ = writeln!(s, "{} {} {} {}", q.start.i, q.start.j, q.goal.i, q.goal.j);
    }
    s
}
