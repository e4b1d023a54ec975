//! Timed plans (p-solutions), g-values and pairwise section conflicts.
//!
//! Agents move at one cell width per time unit, so the g-value of a point on
//! a path is the time the agent passes it: take-off offset plus arc length.
//! Two sections conflict when they share a point whose g-values differ by
//! less than the safety radius.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{classify_pair, intersection_point, PairClass, Point, Section};
use crate::grid::dist;
use crate::planners::Path;

/// Tolerance for "point lies on section".
const ON_SECTION_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SafetyRadius(f64);

impl SafetyRadius {
    pub fn new(r: f64) -> Result<Self> {
        if r > 0.0 && r.is_finite() {
            Ok(SafetyRadius(r))
        } else {
            Err(Error::Solution(format!(
                "safety radius must be positive, got {r}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for SafetyRadius {
    /// One cell width.
    fn default() -> Self {
        SafetyRadius(1.0)
    }
}

/// One agent's path together with its take-off delay.
#[derive(Clone, Debug, PartialEq)]
pub struct PSolution {
    pub agent_id: usize,
    pub path: Path,
    pub offset: f64,
}

impl PSolution {
    pub fn new(agent_id: usize, path: Path) -> Self {
        PSolution {
            agent_id,
            path,
            offset: 0.0,
        }
    }

    pub fn with_offset(mut self, offset: f64) -> Self {
        self.offset = offset;
        self
    }

    /// Offset plus path length.
    pub fn cost(&self) -> f64 {
        self.offset + self.path.length()
    }

    /// Landing time. Same as [`PSolution::cost`].
    pub fn finish_time(&self) -> f64 {
        self.cost()
    }

    /// g-value of every section start.
    pub fn section_g_values(&self) -> Vec<f64> {
        let mut g = self.offset;
        self.path
            .sections()
            .iter()
            .map(|e| {
                let here = g;
                g += e.length();
                here
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConflictKind {
    Intersection,
    Pursuit,
    HeadOn,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SectionRef {
    pub agent_id: usize,
    pub section: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Conflict {
    pub kind: ConflictKind,
    pub first: SectionRef,
    pub second: SectionRef,
    pub witness: Point,
    pub g_first: f64,
    pub g_second: f64,
}

fn section_at(pps: &PSolution, j: usize) -> Result<&Section> {
    pps.path.sections().get(j).ok_or(Error::SectionIndex {
        index: j,
        len: pps.path.len(),
    })
}

/// Offset plus the lengths of sections `0..j`.
pub fn g_value_of_section(pps: &PSolution, j: usize) -> Result<f64> {
    section_at(pps, j)?;
    Ok(pps.offset
        + pps.path.sections()[..j]
            .iter()
            .map(Section::length)
            .sum::<f64>())
}

/// g-value of a point lying on section `j`.
pub fn g_value_of_point(pps: &PSolution, j: usize, p: Point) -> Result<f64> {
    let e = section_at(pps, j)?;
    if e.distance_to(p) > ON_SECTION_EPS {
        return Err(Error::OffSection(p.i, p.j, j));
    }
    Ok(g_value_of_section(pps, j)? + Point::from(e.sp()).dist(p))
}

/// A section with the g-value of its start point.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TimedSection {
    pub section: Section,
    pub g_start: f64,
}

impl TimedSection {
    fn g_end(&self) -> f64 {
        self.g_start + self.section.length()
    }

    fn g_at(&self, p: Point) -> f64 {
        self.g_start + Point::from(self.section.sp()).dist(p)
    }
}

pub(crate) fn timed_sections(pps: &PSolution) -> Vec<TimedSection> {
    pps.path
        .sections()
        .iter()
        .zip(pps.section_g_values())
        .map(|(&section, g_start)| TimedSection { section, g_start })
        .collect()
}

/// Cheap necessary conditions; `true` means no conflict is possible.
pub(crate) fn quick_reject_timed(a: &TimedSection, b: &TimedSection, r: f64) -> bool {
    let (ea, eb) = (&a.section, &b.section);
    if dist(ea.sp(), eb.sp()) > ea.length() + eb.length() {
        return true;
    }
    // a shared point has g in both flight windows, so the windows must be
    // within r of each other
    a.g_start > b.g_end() + r || b.g_start > a.g_end() + r
}

/// Conflict between section `v` of `pps1` and section `w` of `pps2` is impossible.
pub fn quick_reject(
    pps1: &PSolution,
    v: usize,
    pps2: &PSolution,
    w: usize,
    r: SafetyRadius,
) -> bool {
    let a = TimedSection {
        section: pps1.path.sections()[v],
        g_start: g_value_of_section(pps1, v).expect("valid section index"),
    };
    let b = TimedSection {
        section: pps2.path.sections()[w],
        g_start: g_value_of_section(pps2, w).expect("valid section index"),
    };
    quick_reject_timed(&a, &b, r.get())
}

/// Witness and g-values for a conflicting pair, from `a`'s point of view.
pub(crate) struct PairHit {
    pub kind: ConflictKind,
    pub witness: Point,
    pub g_a: f64,
    pub g_b: f64,
}

pub(crate) fn detect_timed(a: &TimedSection, b: &TimedSection, r: f64) -> Option<PairHit> {
    match classify_pair(&a.section, &b.section) {
        PairClass::Disjoint | PairClass::CollinearDisjoint => None,
        PairClass::NonCollinearCrossing => {
            let p = intersection_point(&a.section, &b.section).ok()??;
            let (g_a, g_b) = (a.g_at(p), b.g_at(p));
            ((g_a - g_b).abs() < r).then_some(PairHit {
                kind: ConflictKind::Intersection,
                witness: p,
                g_a,
                g_b,
            })
        }
        PairClass::CollinearCodirectionalOverlap => pursuit(a, b, r),
        PairClass::CollinearAntiparallelOverlap => {
            // evaluate in a canonical order so the witness is bit-identical
            // whichever section is passed first
            if (b.section, b.g_start.to_bits()) < (a.section, a.g_start.to_bits()) {
                head_on(b, a, r).map(|h| PairHit {
                    g_a: h.g_b,
                    g_b: h.g_a,
                    ..h
                })
            } else {
                head_on(a, b, r)
            }
        }
    }
}

/// Co-directional overlap: g_a - g_b is constant on the overlap, so any
/// startpoint inside it is a valid probe.
fn pursuit(a: &TimedSection, b: &TimedSection, r: f64) -> Option<PairHit> {
    let b_start_in_a = a.section.distance_to(Point::from(b.section.sp())) <= ON_SECTION_EPS;
    let a_start_in_b = b.section.distance_to(Point::from(a.section.sp())) <= ON_SECTION_EPS;
    let probe = match (a_start_in_b, b_start_in_a) {
        (true, true) => {
            let (sa, sb) = (a.section.sp(), b.section.sp());
            match a.g_start.total_cmp(&b.g_start) {
                std::cmp::Ordering::Less => sa,
                std::cmp::Ordering::Greater => sb,
                std::cmp::Ordering::Equal => sa.min(sb),
            }
        }
        (true, false) => a.section.sp(),
        (false, true) => b.section.sp(),
        (false, false) => unreachable!("overlapping co-directional sections contain a startpoint"),
    };
    let witness = Point::from(probe);
    let (g_a, g_b) = (a.g_at(witness), b.g_at(witness));
    ((g_a - g_b).abs() < r).then_some(PairHit {
        kind: ConflictKind::Pursuit,
        witness,
        g_a,
        g_b,
    })
}

/// Anti-parallel overlap. The agents meet exactly once; both head-on
/// conditions (widened by r) must hold for that meeting to happen inside
/// the overlap within the safety band.
fn head_on(a: &TimedSection, b: &TimedSection, r: f64) -> Option<PairHit> {
    let (ea, eb) = (&a.section, &b.section);
    let cond1 = a.g_start + dist(ea.sp(), eb.ep()) < b.g_end() + r;
    let cond2 = b.g_start + dist(eb.sp(), ea.ep()) < a.g_end() + r;
    if !(cond1 && cond2) {
        return None;
    }

    // arc-length coordinate s along a, from a's start
    let len_a = ea.length();
    let (di, dj) = ea.direction();
    let (ui, uj) = (di as f64 / len_a, dj as f64 / len_a);
    let origin = Point::from(ea.sp());
    let proj = |p: Point| (p.i - origin.i) * ui + (p.j - origin.j) * uj;
    let s_b_start = proj(Point::from(eb.sp()));
    let s_b_end = proj(Point::from(eb.ep()));
    let lo = s_b_end.max(0.0);
    let hi = s_b_start.min(len_a);
    // g_a(s) = Ga + s, g_b(s) = Gb + (s_b_start - s)
    let s = ((b.g_start + s_b_start - a.g_start) / 2.0).clamp(lo, hi);
    let witness = Point::new(origin.i + s * ui, origin.j + s * uj);
    Some(PairHit {
        kind: ConflictKind::HeadOn,
        witness,
        g_a: a.g_start + s,
        g_b: b.g_start + (s_b_start - s),
    })
}

/// Conflict between section `v` of `pps1` and section `w` of `pps2`, if any.
pub fn detect_conflict(
    pps1: &PSolution,
    v: usize,
    pps2: &PSolution,
    w: usize,
    r: SafetyRadius,
) -> Option<Conflict> {
    let a = TimedSection {
        section: *section_at(pps1, v).ok()?,
        g_start: g_value_of_section(pps1, v).ok()?,
    };
    let b = TimedSection {
        section: *section_at(pps2, w).ok()?,
        g_start: g_value_of_section(pps2, w).ok()?,
    };
    detect_timed(&a, &b, r.get()).map(|h| Conflict {
        kind: h.kind,
        first: SectionRef {
            agent_id: pps1.agent_id,
            section: v,
        },
        second: SectionRef {
            agent_id: pps2.agent_id,
            section: w,
        },
        witness: h.witness,
        g_first: h.g_a,
        g_second: h.g_b,
    })
}

/// Precomputed timed sections of one p-solution.
pub(crate) struct TimedPath<'a> {
    pub pps: &'a PSolution,
    pub sections: Vec<TimedSection>,
}

impl<'a> TimedPath<'a> {
    pub fn new(pps: &'a PSolution) -> Self {
        TimedPath {
            pps,
            sections: timed_sections(pps),
        }
    }
}

fn conflicts_at<'o>(
    v: usize,
    a: &TimedSection,
    pps: &PSolution,
    other: &'o TimedPath<'_>,
    r: f64,
) -> impl Iterator<Item = Conflict> + 'o {
    let a = *a;
    let first = SectionRef {
        agent_id: pps.agent_id,
        section: v,
    };
    other.sections.iter().enumerate().filter_map(move |(w, b)| {
        if quick_reject_timed(&a, b, r) {
            return None;
        }
        detect_timed(&a, b, r).map(|h| Conflict {
            kind: h.kind,
            first,
            second: SectionRef {
                agent_id: other.pps.agent_id,
                section: w,
            },
            witness: h.witness,
            g_first: h.g_a,
            g_second: h.g_b,
        })
    })
}

/// The conflict of `pps` with the smallest section index. Ties on the same
/// section go to the smallest g-value at the witness, then the smallest
/// other agent id, then the smallest other section index.
pub fn find_first_conflict<'a, I>(pps: &PSolution, others: I, r: SafetyRadius) -> Option<Conflict>
where
    I: IntoIterator<Item = &'a PSolution>,
{
    let others: Vec<TimedPath<'_>> = others
        .into_iter()
        .filter(|o| o.agent_id != pps.agent_id)
        .map(TimedPath::new)
        .collect();
    let r = r.get();
    for (v, a) in timed_sections(pps).iter().enumerate() {
        let best = others
            .iter()
            .flat_map(|o| conflicts_at(v, a, pps, o, r))
            .min_by(|x, y| {
                x.g_first
                    .total_cmp(&y.g_first)
                    .then(x.second.cmp(&y.second))
            });
        if best.is_some() {
            return best;
        }
    }
    None
}

pub(crate) fn paths_conflict(a: &TimedPath<'_>, b: &TimedPath<'_>, r: f64) -> bool {
    a.sections.iter().any(|x| {
        b.sections
            .iter()
            .any(|y| !quick_reject_timed(x, y, r) && detect_timed(x, y, r).is_some())
    })
}

/// Number of distinct other p-solutions `pps` conflicts with.
pub fn number_of_conflicts<'a, I>(pps: &PSolution, others: I, r: SafetyRadius) -> usize
where
    I: IntoIterator<Item = &'a PSolution>,
{
    let me = TimedPath::new(pps);
    others
        .into_iter()
        .filter(|o| o.agent_id != pps.agent_id)
        .filter(|o| paths_conflict(&me, &TimedPath::new(o), r.get()))
        .count()
}

/// Conflict counts over a whole solution set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictStats {
    /// Agents with at least one conflict.
    pub agent_conflicts: usize,
    /// Conflicting section pairs between different agents.
    pub section_conflicts: usize,
}

pub fn conflict_stats(ps: &[PSolution], r: SafetyRadius) -> ConflictStats {
    let timed: Vec<TimedPath<'_>> = ps.iter().map(TimedPath::new).collect();
    let mut involved = vec![false; ps.len()];
    let mut section_conflicts = 0;
    for x in 0..timed.len() {
        for y in x + 1..timed.len() {
            let mut n = 0;
            for a in &timed[x].sections {
                for b in &timed[y].sections {
                    if !quick_reject_timed(a, b, r.get()) && detect_timed(a, b, r.get()).is_some() {
                        n += 1;
                    }
                }
            }
            if n > 0 {
                involved[x] = true;
                involved[y] = true;
                section_conflicts += n;
            }
        }
    }
    ConflictStats {
        agent_conflicts: involved.iter().filter(|&&b| b).count(),
        section_conflicts,
    }
}
