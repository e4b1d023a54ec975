//! Collision checks that do not go through the `conflicts` module.
//!
//! [`collision_oracle`] samples every flight at a fixed arc-length step and
//! looks for samples of two agents that are close in both space and time.
//! [`exact_min_gap`] is a closed form for one pair of timed sections: the
//! smallest g-value difference over the points the two sections share.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::conflicts::PSolution;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::grid::Cell;

/// Two agents closer than the sample step at nearly the same time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleViolation {
    pub agent_a: usize,
    pub agent_b: usize,
    pub point_a: Point,
    pub point_b: Point,
    pub g_a: f64,
    pub g_b: f64,
}

/// Keeps pairs sitting exactly on either bound from being flagged by
/// rounding.
const EPS: f64 = 1e-9;

#[derive(Clone, Copy)]
struct Sample {
    agent: usize,
    p: Point,
    g: f64,
}

fn sample_flight(pps: &PSolution, ds: f64, out: &mut Vec<Sample>) {
    let wps = pps.path.waypoints();
    let mut g0 = pps.offset;
    for w in wps.windows(2) {
        let (a, b) = (Point::from(w[0]), Point::from(w[1]));
        let len = a.dist(b);
        let steps = (len / ds).ceil() as usize;
        for k in 0..steps {
            let s = k as f64 * ds;
            let t = s / len;
            out.push(Sample {
                agent: pps.agent_id,
                p: Point::new(a.i + t * (b.i - a.i), a.j + t * (b.j - a.j)),
                g: g0 + s,
            });
        }
        g0 += len;
    }
    if let Some(&last) = wps.last() {
        out.push(Sample {
            agent: pps.agent_id,
            p: Point::from(last),
            g: g0,
        });
    }
}

/// Sampled check of a whole solution.
///
/// Every flight is sampled at arc-length steps `ds` (plus its goal). Two
/// samples of different agents violate when they are closer than `ds` and
/// their g-values differ by less than `r - ds`. Results are sorted.
pub fn collision_oracle(ps: &[PSolution], r: f64, ds: f64) -> Result<Vec<OracleViolation>> {
    if !(ds > 0.0 && ds <= 0.1) {
        return Err(Error::Config(format!(
            "sample step must be in (0, 0.1], got {ds}"
        )));
    }
    if r.is_nan() || r <= ds {
        return Err(Error::Config(format!(
            "radius {r} must exceed the sample step {ds}"
        )));
    }
    let mut samples = Vec::new();
    for pps in ps {
        sample_flight(pps, ds, &mut samples);
    }

    let key = |p: Point| ((p.i / ds).floor() as i64, (p.j / ds).floor() as i64);
    let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let mut out = Vec::new();
    for (idx, s) in samples.iter().enumerate() {
        let (ki, kj) = key(s.p);
        for di in -1..=1 {
            for dj in -1..=1 {
                let Some(bucket) = buckets.get(&(ki + di, kj + dj)) else {
                    continue;
                };
                for &o in bucket {
                    let t = &samples[o];
                    if t.agent == s.agent
                        || s.p.dist(t.p) >= ds - EPS
                        || (s.g - t.g).abs() >= r - ds - EPS
                    {
                        continue;
                    }
                    let (x, y) = if t.agent < s.agent { (t, s) } else { (s, t) };
                    out.push(OracleViolation {
                        agent_a: x.agent,
                        agent_b: y.agent,
                        point_a: x.p,
                        point_b: y.p,
                        g_a: x.g,
                        g_b: y.g,
                    });
                }
            }
        }
        buckets.entry((ki, kj)).or_default().push(idx);
    }
    out.sort_by(|x, y| {
        (x.agent_a, x.agent_b)
            .cmp(&(y.agent_a, y.agent_b))
            .then(x.g_a.total_cmp(&y.g_a))
            .then(x.g_b.total_cmp(&y.g_b))
    });
    Ok(out)
}

/// A straight flight from `sp` to `ep` starting at time `g_start`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimedSegment {
    pub sp: Cell,
    pub ep: Cell,
    pub g_start: f64,
}

fn sub(a: Cell, b: Cell) -> (i64, i64) {
    (
        i64::from(a.i) - i64::from(b.i),
        i64::from(a.j) - i64::from(b.j),
    )
}

fn cross(a: (i64, i64), b: (i64, i64)) -> i64 {
    a.0 * b.1 - a.1 * b.0
}

fn dot(a: (i64, i64), b: (i64, i64)) -> i64 {
    a.0 * b.0 + a.1 * b.1
}

/// Minimum of `|g_a(p) - g_b(p)|` over the points `p` shared by both
/// segments, or `None` if they share none.
///
/// Collinear segments that share a single endpoint count as sharing
/// nothing.
pub fn exact_min_gap(a: TimedSegment, b: TimedSegment) -> Option<f64> {
    let da = sub(a.ep, a.sp);
    let db = sub(b.ep, b.sp);
    let len_a = (dot(da, da) as f64).sqrt();
    let len_b = (dot(db, db) as f64).sqrt();
    let ab = sub(b.sp, a.sp);
    let den = cross(da, db);

    if den != 0 {
        // a.sp + t*da == b.sp + u*db
        let (mut t, mut u, mut den) = (cross(ab, db), cross(ab, da), den);
        if den < 0 {
            (t, u, den) = (-t, -u, -den);
        }
        if !(0..=den).contains(&t) || !(0..=den).contains(&u) {
            return None;
        }
        let g_a = a.g_start + t as f64 / den as f64 * len_a;
        let g_b = b.g_start + u as f64 / den as f64 * len_b;
        return Some((g_a - g_b).abs());
    }
    if cross(da, ab) != 0 {
        return None;
    }

    // arc-length coordinates along a, scaled by len_a
    let p0 = dot(ab, da);
    let p1 = dot(sub(b.ep, a.sp), da);
    let lo = p0.min(p1).max(0);
    let hi = p0.max(p1).min(dot(da, da));
    if hi <= lo {
        return None;
    }
    let s_b0 = p0 as f64 / len_a;
    let gap_at = |scaled: i64| {
        let s = scaled as f64 / len_a;
        (a.g_start + s) - (b.g_start + (s - s_b0).abs())
    };
    let (x, y) = (gap_at(lo), gap_at(hi));
    Some(if x.signum() != y.signum() {
        0.0
    } else {
        x.abs().min(y.abs())
    })
}

fn timed_segments(pps: &PSolution) -> Vec<TimedSegment> {
    let mut g = pps.offset;
    pps.path
        .waypoints()
        .windows(2)
        .map(|w| {
            let seg = TimedSegment {
                sp: w[0],
                ep: w[1],
                g_start: g,
            };
            g += Point::from(w[0]).dist(Point::from(w[1]));
            seg
        })
        .collect()
}

/// A section pair of two agents whose exact minimum gap is below `r`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactViolation {
    pub agent_a: usize,
    pub section_a: usize,
    pub agent_b: usize,
    pub section_b: usize,
    pub gap: f64,
}

/// Exhaustive exact check over all cross-agent section pairs.
pub fn exact_oracle(ps: &[PSolution], r: f64) -> Vec<ExactViolation> {
    let segs: Vec<Vec<TimedSegment>> = ps.iter().map(timed_segments).collect();
    let mut out = Vec::new();
    for x in 0..ps.len() {
        for y in x + 1..ps.len() {
            for (v, &sa) in segs[x].iter().enumerate() {
                for (w, &sb) in segs[y].iter().enumerate() {
                    if let Some(gap) = exact_min_gap(sa, sb).filter(|&g| g < r) {
                        out.push(ExactViolation {
                            agent_a: ps[x].agent_id,
                            section_a: v,
                            agent_b: ps[y].agent_id,
                            section_b: w,
                            gap,
                        });
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planners::Path;
    use approx::assert_abs_diff_eq;

    fn pps(id: usize, pts: &[(i32, i32)], offset: f64) -> PSolution {
        let cells: Vec<Cell> = pts.iter().copied().map(Cell::from).collect();
        PSolution::new(id, Path::from_waypoints(&cells).unwrap()).with_offset(offset)
    }

    fn seg(sp: (i32, i32), ep: (i32, i32), g: f64) -> TimedSegment {
        TimedSegment {
            sp: sp.into(),
            ep: ep.into(),
            g_start: g,
        }
    }

    #[test]
    fn crossing_fixture_is_flagged_near_the_crossing() {
        let ps = [
            pps(0, &[(0, 0), (4, 4)], 0.0),
            pps(1, &[(0, 4), (4, 0)], 0.0),
        ];
        let v = collision_oracle(&ps, 1.0, 0.05).unwrap();
        assert!(!v.is_empty());
        for x in &v {
            assert!(x.point_a.dist(Point::new(2.0, 2.0)) < 0.5);
            assert!((x.g_a - 8f64.sqrt()).abs() < 0.5);
        }
        assert!(v.iter().any(|x| (x.g_a - 2.83).abs() < 0.05));
    }

    #[test]
    fn separated_in_time_is_clean() {
        let ps = [
            pps(0, &[(0, 0), (4, 4)], 0.0),
            pps(1, &[(0, 4), (4, 0)], 1.5),
        ];
        assert!(collision_oracle(&ps, 1.0, 0.05).unwrap().is_empty());
        let one = [pps(0, &[(0, 0), (4, 4)], 0.0)];
        assert!(collision_oracle(&one, 1.0, 0.05).unwrap().is_empty());
    }

    #[test]
    fn rejects_coarse_step() {
        assert!(collision_oracle(&[], 1.0, 0.5).is_err());
        assert!(collision_oracle(&[], 0.05, 0.05).is_err());
    }

    #[test]
    fn exact_gap_cases() {
        // crossing at (2,2), both at g = 2*sqrt(2)
        assert_abs_diff_eq!(
            exact_min_gap(seg((0, 0), (4, 4), 0.0), seg((0, 4), (4, 0), 0.0)).unwrap(),
            0.0
        );
        assert_abs_diff_eq!(
            exact_min_gap(seg((0, 0), (4, 4), 0.0), seg((0, 4), (4, 0), 0.7)).unwrap(),
            0.7
        );
        // parallel, disjoint
        assert_eq!(
            exact_min_gap(seg((0, 0), (4, 0), 0.0), seg((0, 1), (4, 1), 0.0)),
            None
        );
        // pursuit: constant gap
        assert_abs_diff_eq!(
            exact_min_gap(seg((0, 0), (0, 8), 0.0), seg((0, 2), (0, 6), 3.5)).unwrap(),
            1.5
        );
        // head-on: the agents meet
        assert_abs_diff_eq!(
            exact_min_gap(seg((0, 0), (0, 8), 0.0), seg((0, 8), (0, 0), 2.0)).unwrap(),
            0.0
        );
        // head-on, b enters after a has left the overlap
        assert_abs_diff_eq!(
            exact_min_gap(seg((0, 0), (0, 4), 0.0), seg((0, 4), (0, 0), 10.0)).unwrap(),
            6.0
        );
        // single-point touches
        assert_eq!(
            exact_min_gap(seg((0, 0), (0, 5), 0.0), seg((0, 5), (0, 9), 5.0)),
            None
        );
        assert_abs_diff_eq!(
            exact_min_gap(seg((0, 0), (0, 5), 0.0), seg((0, 5), (3, 5), 5.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn exact_oracle_over_solution() {
        let ps = [
            pps(0, &[(0, 0), (4, 4), (8, 4)], 0.0),
            pps(1, &[(0, 4), (4, 0)], 0.0),
        ];
        let v = exact_oracle(&ps, 1.0);
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].section_a, v[0].section_b), (0, 0));
        assert!(exact_oracle(&ps, 1e-9).len() == 1);
        let late = [ps[0].clone(), ps[1].clone().with_offset(1.0)];
        assert!(exact_oracle(&late, 1.0).is_empty());
    }
}
