//! Square occupancy grids, the text map format, Bresenham line-of-sight,
//! midpoint circles and a synthetic "city block" map generator.
//!
//! Cells are addressed by `(i, j)` = (row, column). Distances are measured
//! between cell centers in cell widths.

use std::cmp::Ordering;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Grid cell. Coordinates are signed so that circle offsets around a cell
/// near the border can be represented before they are bounds-checked.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub i: i32,
    pub j: i32,
}

impl Cell {
    pub const fn new(i: i32, j: i32) -> Self {
        Cell { i, j }
    }

    pub fn offset(self, di: i32, dj: i32) -> Self {
        Cell::new(self.i + di, self.j + dj)
    }
}

impl From<(i32, i32)> for Cell {
    fn from((i, j): (i32, i32)) -> Self {
        Cell::new(i, j)
    }
}

/// Euclidean distance between cell centers.
pub fn dist(a: Cell, b: Cell) -> f64 {
    let di = f64::from(a.i - b.i);
    let dj = f64::from(a.j - b.j);
    di.hypot(dj)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    height: usize,
    width: usize,
    traversable: Vec<bool>,
}

impl Grid {
    /// All-free grid.
    pub fn new(height: usize, width: usize) -> Self {
        assert!(
            height >= 1 && width >= 1,
            "grid dimensions must be positive"
        );
        Grid {
            height,
            width,
            traversable: vec![true; height * width],
        }
    }

    /// Builds a grid from row-major traversability flags.
    pub fn from_rows(rows: &[Vec<bool>]) -> Self {
        let height = rows.len();
        let width = rows.first().map_or(0, Vec::len);
        assert!(
            rows.iter().all(|r| r.len() == width),
            "all rows must have the same width"
        );
        let mut grid = Grid::new(height, width);
        for (i, row) in rows.iter().enumerate() {
            grid.traversable[i * width..(i + 1) * width].copy_from_slice(row);
        }
        grid
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn in_bounds(&self, c: Cell) -> bool {
        c.i >= 0 && c.j >= 0 && (c.i as usize) < self.height && (c.j as usize) < self.width
    }

    fn index(&self, c: Cell) -> usize {
        c.i as usize * self.width + c.j as usize
    }

    /// False for cells outside the grid.
    pub fn is_traversable(&self, c: Cell) -> bool {
        self.in_bounds(c) && self.traversable[self.index(c)]
    }

    pub fn set_traversable(&mut self, c: Cell, free: bool) {
        assert!(self.in_bounds(c), "cell {c:?} out of bounds");
        let idx = self.index(c);
        self.traversable[idx] = free;
    }

    pub fn blocked_count(&self) -> usize {
        self.traversable.iter().filter(|&&t| !t).count()
    }

    pub fn blocked_fraction(&self) -> f64 {
        self.blocked_count() as f64 / self.traversable.len() as f64
    }

    pub fn cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.height as i32)
            .flat_map(move |i| (0..self.width as i32).map(move |j| Cell::new(i, j)))
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells().filter(move |&c| self.is_traversable(c))
    }

    fn check_bounds(&self, c: Cell) -> Result<()> {
        if self.in_bounds(c) {
            Ok(())
        } else {
            Err(Error::OutOfBounds(c))
        }
    }
}

/// Parses the text map format:
///
/// ```text
/// height H
/// width W
/// map
/// <H rows of W characters, '.' free, '@' blocked>
/// ```
pub fn load_map(text: &str) -> Result<Grid> {
    let mut lines = text.lines().enumerate().map(|(n, l)| (n + 1, l));

    let height = parse_header(lines.next(), "height", 1)?;
    let width = parse_header(lines.next(), "width", 2)?;
    match lines.next() {
        Some((_, "map")) => {}
        Some((n, other)) => {
            return Err(Error::MapParse {
                line: n,
                message: format!("expected `map`, found `{other}`"),
            })
        }
        None => {
            return Err(Error::MapParse {
                line: 3,
                message: "missing `map` line".into(),
            })
        }
    }

    let mut grid = Grid::new(height, width);
    for i in 0..height {
        let (n, row) = lines.next().ok_or_else(|| Error::MapParse {
            line: 4 + i,
            message: format!("row count mismatch: header declares {height} rows, found {i}"),
        })?;
        let len = row.chars().count();
        if len != width {
            return Err(Error::MapParse {
                line: n,
                message: format!("dimension mismatch: expected {width} columns, found {len}"),
            });
        }
        for (j, ch) in row.chars().enumerate() {
            let free = match ch {
                '.' => true,
                '@' => false,
                other => {
                    return Err(Error::MapParse {
                        line: n,
                        message: format!("illegal character {other:?} at column {}", j + 1),
                    })
                }
            };
            grid.set_traversable(Cell::new(i as i32, j as i32), free);
        }
    }

    if let Some((n, extra)) = lines.find(|(_, l)| !l.is_empty()) {
        return Err(Error::MapParse {
            line: n,
            message: format!("row count mismatch: unexpected data after {height} rows: `{extra}`"),
        });
    }
    Ok(grid)
}

fn parse_header(line: Option<(usize, &str)>, key: &str, expected_line: usize) -> Result<usize> {
    let (n, text) = line.ok_or_else(|| Error::MapParse {
        line: expected_line,
        message: format!("missing `{key}` header"),
    })?;
    let mut parts = text.split_whitespace();
    let value = match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(v), None) if k == key => v,
        _ => {
            return Err(Error::MapParse {
                line: n,
                message: format!("malformed header, expected `{key} <N>`, found `{text}`"),
            })
        }
    };
    match value.parse::<usize>() {
        Ok(v) if v >= 1 => Ok(v),
        _ => Err(Error::MapParse {
            line: n,
            message: format!(
                "malformed header, `{key}` must be a positive integer, found `{value}`"
            ),
        }),
    }
}

/// Inverse of [`load_map`].
pub fn serialize_map(grid: &Grid) -> String {
    let mut out = String::with_capacity(grid.height * (grid.width + 1) + 32);
    let _ = writeln!(out, "height {}", grid.height);
    let _ = writeln!(out, "width {}", grid.width);
    out.push_str("map\n");
    for i in 0..grid.height {
        for j in 0..grid.width {
            let free = grid.traversable[i * grid.width + j];
            out.push(if free { '.' } else { '@' });
        }
        out.push('\n');
    }
    out
}

/// Cells visited by Bresenham's line from `a` to `b`, both endpoints included.
///
/// The endpoints are put in lexicographic order first, so the visited set does
/// not depend on the direction of travel.
pub fn bresenham(a: Cell, b: Cell) -> BresenhamLine {
    let (from, to) = if b < a { (b, a) } else { (a, b) };
    let di = (to.i - from.i).abs();
    let dj = (to.j - from.j).abs();
    let major_i = di >= dj;
    let (major, minor) = if major_i { (di, dj) } else { (dj, di) };
    BresenhamLine {
        current: from,
        step_i: (to.i - from.i).signum(),
        step_j: (to.j - from.j).signum(),
        major_i,
        major,
        minor,
        err: 2 * minor - major,
        remaining: major + 1,
    }
}

#[derive(Clone, Debug)]
pub struct BresenhamLine {
    current: Cell,
    step_i: i32,
    step_j: i32,
    major_i: bool,
    major: i32,
    minor: i32,
    err: i32,
    remaining: i32,
}

impl Iterator for BresenhamLine {
    type Item = Cell;

    fn next(&mut self) -> Option<Cell> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        let out = self.current;
        let minor_step = self.err > 0;
        if minor_step {
            self.err -= 2 * self.major;
        }
        self.err += 2 * self.minor;
        if self.major_i {
            self.current.i += self.step_i;
            if minor_step {
                self.current.j += self.step_j;
            }
        } else {
            self.current.j += self.step_j;
            if minor_step {
                self.current.i += self.step_i;
            }
        }
        Some(out)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.remaining as usize;
        (n, Some(n))
    }
}

impl ExactSizeIterator for BresenhamLine {}

/// True iff every cell of the (symmetric) Bresenham line is traversable.
pub fn line_of_sight(grid: &Grid, a: Cell, b: Cell) -> Result<bool> {
    grid.check_bounds(a)?;
    grid.check_bounds(b)?;
    Ok(los_unchecked(grid, a, b))
}

/// [`line_of_sight`] for callers that already know both endpoints are on the grid.
pub(crate) fn los_unchecked(grid: &Grid, a: Cell, b: Cell) -> bool {
    bresenham(a, b).all(|c| grid.traversable[grid.index(c)])
}

/// Midpoint circle of radius `radius` around `center`.
///
/// Cells are ordered counter-clockwise starting due `+j`, treating `j` as the
/// x axis and `i` as the y axis. Cells off the grid are kept.
pub fn midpoint_circle(center: Cell, radius: i32) -> Result<Vec<Cell>> {
    Ok(circle_offsets(radius)?
        .into_iter()
        .map(|(di, dj)| center.offset(di, dj))
        .collect())
}

/// Offsets `(di, dj)` of the midpoint circle, in the same order as [`midpoint_circle`].
pub fn circle_offsets(radius: i32) -> Result<Vec<(i32, i32)>> {
    if radius <= 0 {
        return Err(Error::InvalidRadius(radius));
    }
    // first octant, x >= y
    let mut octant = Vec::new();
    let (mut x, mut y, mut decision) = (radius, 0, 1 - radius);
    while x >= y {
        octant.push((x, y));
        y += 1;
        if decision <= 0 {
            decision += 2 * y + 1;
        } else {
            x -= 1;
            decision += 2 * (y - x) + 1;
        }
    }

    let mut offsets: Vec<(i32, i32)> = octant
        .iter()
        .flat_map(|&(x, y)| {
            [
                (y, x),
                (x, y),
                (-y, x),
                (-x, y),
                (y, -x),
                (x, -y),
                (-y, -x),
                (-x, -y),
            ]
        })
        .collect();
    offsets.sort_by(|&a, &b| ccw_from_east(a, b));
    offsets.dedup();
    Ok(offsets)
}

/// Angular order of `(di, dj)` offsets, counter-clockwise from `+j`.
fn ccw_from_east(a: (i32, i32), b: (i32, i32)) -> Ordering {
    let half = |(di, dj): (i32, i32)| u8::from(di < 0 || (di == 0 && dj < 0));
    half(a).cmp(&half(b)).then_with(|| {
        // positive cross product: b is counter-clockwise of a
        let cross = i64::from(a.1) * i64::from(b.0) - i64::from(a.0) * i64::from(b.1);
        0.cmp(&cross)
    })
}

/// Parameters for [`generate_urban_map`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MapGenParams {
    pub height: usize,
    pub width: usize,
    /// Target fraction of blocked cells.
    pub obstacle_density: f64,
    /// Inclusive range of building side lengths.
    pub block_size_range: (usize, usize),
    pub seed: u64,
}

impl MapGenParams {
    pub fn new(height: usize, width: usize, obstacle_density: f64, seed: u64) -> Self {
        MapGenParams {
            height,
            width,
            obstacle_density,
            block_size_range: (3, 8),
            seed,
        }
    }
}

/// Free cells required between two buildings.
const STREET_WIDTH: usize = 2;

/// Places non-overlapping rectangular buildings until the blocked fraction
/// reaches `obstacle_density`. Buildings keep a street of free cells between
/// each other and never touch the outer border.
pub fn generate_urban_map(p: &MapGenParams) -> Result<Grid> {
    if p.height == 0 || p.width == 0 {
        return Err(Error::MapGen("grid dimensions must be positive".into()));
    }
    if !(0.0..=1.0).contains(&p.obstacle_density) {
        return Err(Error::MapGen(format!(
            "obstacle density {} outside [0, 1]",
            p.obstacle_density
        )));
    }
    let mut grid = Grid::new(p.height, p.width);
    let target = (p.obstacle_density * (p.height * p.width) as f64).round() as usize;
    if target == 0 {
        return Ok(grid);
    }

    let (lo, hi) = p.block_size_range;
    if lo == 0 || lo > hi || hi + 2 > p.height || hi + 2 > p.width {
        return Err(Error::MapGen(format!(
            "block sizes {lo}..={hi} must be positive and fit inside a {}x{} grid with a free border",
            p.height, p.width
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let max_attempts = 1_000 + 200 * target / (lo * lo);
    let mut blocked = 0usize;
    let mut attempts = 0usize;
    while blocked < target {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::MapGen(format!(
                "density {} unreachable: {blocked} of {target} cells blocked after {max_attempts} placements",
                p.obstacle_density
            )));
        }
        let bh = rng.gen_range(lo..=hi);
        let bw = rng.gen_range(lo..=hi);
        // keep row/column 0 and the last row/column free
        let i0 = rng.gen_range(1..=p.height - 1 - bh);
        let j0 = rng.gen_range(1..=p.width - 1 - bw);
        if !footprint_clear(&grid, i0, j0, bh, bw) {
            continue;
        }
        for i in i0..i0 + bh {
            for j in j0..j0 + bw {
                grid.set_traversable(Cell::new(i as i32, j as i32), false);
            }
        }
        blocked += bh * bw;
    }
    Ok(grid)
}

fn footprint_clear(grid: &Grid, i0: usize, j0: usize, bh: usize, bw: usize) -> bool {
    let i_lo = i0.saturating_sub(STREET_WIDTH);
    let j_lo = j0.saturating_sub(STREET_WIDTH);
    let i_hi = (i0 + bh + STREET_WIDTH).min(grid.height);
    let j_hi = (j0 + bw + STREET_WIDTH).min(grid.width);
    (i_lo..i_hi).all(|i| (j_lo..j_hi).all(|j| grid.traversable[i * grid.width + j]))
}
