//! Section algebra on integer cell centers.
//!
//! Classification is done with exact integer cross and dot products; only
//! intersection points and lengths are floating point.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{dist, Cell};

/// A real-valued position in cell coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub i: f64,
    pub j: f64,
}

impl Point {
    pub const fn new(i: f64, j: f64) -> Self {
        Point { i, j }
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.i - other.i).hypot(self.j - other.j)
    }
}

impl From<Cell> for Point {
    fn from(c: Cell) -> Self {
        Point::new(f64::from(c.i), f64::from(c.j))
    }
}

/// Directed straight segment between two distinct cell centers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Section {
    sp: Cell,
    ep: Cell,
}

impl Section {
    pub fn new(sp: Cell, ep: Cell) -> Result<Self> {
        if sp == ep {
            return Err(Error::DegenerateSection(sp));
        }
        Ok(Section { sp, ep })
    }

    pub fn sp(&self) -> Cell {
        self.sp
    }

    pub fn ep(&self) -> Cell {
        self.ep
    }

    pub fn length(&self) -> f64 {
        dist(self.sp, self.ep)
    }

    /// Direction vector `(di, dj)`.
    pub fn direction(&self) -> (i64, i64) {
        (
            i64::from(self.ep.i - self.sp.i),
            i64::from(self.ep.j - self.sp.j),
        )
    }

    pub fn reversed(&self) -> Section {
        Section {
            sp: self.ep,
            ep: self.sp,
        }
    }

    /// Point at arc length `s` from the start (clamped to the section).
    pub fn point_at(&self, s: f64) -> Point {
        let t = (s / self.length()).clamp(0.0, 1.0);
        let (di, dj) = self.direction();
        Point::new(
            f64::from(self.sp.i) + t * di as f64,
            f64::from(self.sp.j) + t * dj as f64,
        )
    }

    /// Distance from `p` to the closed segment.
    pub fn distance_to(&self, p: Point) -> f64 {
        let a = Point::from(self.sp);
        let (di, dj) = self.direction();
        let (di, dj) = (di as f64, dj as f64);
        let t = (((p.i - a.i) * di + (p.j - a.j) * dj) / (di * di + dj * dj)).clamp(0.0, 1.0);
        p.dist(Point::new(a.i + t * di, a.j + t * dj))
    }
}

pub fn section_length(e: &Section) -> f64 {
    e.length()
}

/// True iff the section length rounds (half up) to `delta`.
pub fn is_delta_section(e: &Section, delta: i32) -> bool {
    // round(len) == delta  <=>  (2*delta - 1)^2 <= 4*len^2 < (2*delta + 1)^2
    let (di, dj) = e.direction();
    let four_len_sq = 4 * (di * di + dj * dj);
    let d = i64::from(delta);
    (2 * d - 1).pow(2) <= four_len_sq && four_len_sq < (2 * d + 1).pow(2)
}

/// Unsigned angle in degrees between two direction vectors.
pub fn angle_between(a: (i64, i64), b: (i64, i64)) -> f64 {
    let cross = (a.0 * b.1 - a.1 * b.0) as f64;
    let dot = (a.0 * b.0 + a.1 * b.1) as f64;
    cross.abs().atan2(dot).to_degrees()
}

/// Heading change in degrees when moving from `e1` onto `e2`.
pub fn alteration_angle(e1: &Section, e2: &Section) -> Result<f64> {
    if e1.ep != e2.sp {
        return Err(Error::NonAdjacent(e1.ep, e2.sp));
    }
    Ok(angle_between(e1.direction(), e2.direction()))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairClass {
    /// Not collinear and not touching.
    Disjoint,
    /// Not collinear, sharing exactly one point (crossing or touching).
    NonCollinearCrossing,
    CollinearCodirectionalOverlap,
    CollinearAntiparallelOverlap,
    /// Collinear with no overlap or a single shared endpoint.
    CollinearDisjoint,
}

impl PairClass {
    pub fn is_collinear(self) -> bool {
        matches!(
            self,
            PairClass::CollinearCodirectionalOverlap
                | PairClass::CollinearAntiparallelOverlap
                | PairClass::CollinearDisjoint
        )
    }
}

fn cross(a: (i64, i64), b: (i64, i64)) -> i64 {
    a.0 * b.1 - a.1 * b.0
}

fn dot(a: (i64, i64), b: (i64, i64)) -> i64 {
    a.0 * b.0 + a.1 * b.1
}

fn sub(a: Cell, b: Cell) -> (i64, i64) {
    (i64::from(a.i - b.i), i64::from(a.j - b.j))
}

/// Parametric crossing of two non-parallel sections: `(t_num, u_num, denom)`
/// with `denom > 0`, `e1(t_num/denom)` = `e2(u_num/denom)`.
fn crossing_params(e1: &Section, e2: &Section) -> Option<(i64, i64, i64)> {
    let d1 = e1.direction();
    let d2 = e2.direction();
    let denom = cross(d1, d2);
    if denom == 0 {
        return None;
    }
    let qp = sub(e2.sp, e1.sp);
    let (mut t, mut u, mut den) = (cross(qp, d2), cross(qp, d1), denom);
    if den < 0 {
        t = -t;
        u = -u;
        den = -den;
    }
    Some((t, u, den))
}

pub fn classify_pair(e1: &Section, e2: &Section) -> PairClass {
    let d1 = e1.direction();
    let d2 = e2.direction();
    let collinear = cross(d1, sub(e2.sp, e1.sp)) == 0 && cross(d1, sub(e2.ep, e1.sp)) == 0;
    if !collinear {
        return match crossing_params(e1, e2) {
            Some((t, u, den)) if (0..=den).contains(&t) && (0..=den).contains(&u) => {
                PairClass::NonCollinearCrossing
            }
            _ => PairClass::Disjoint,
        };
    }

    // 1-D projections onto d1; e1 spans [0, |d1|^2]
    let hi1 = dot(d1, d1);
    let a = dot(sub(e2.sp, e1.sp), d1);
    let b = dot(sub(e2.ep, e1.sp), d1);
    let overlap = hi1.min(a.max(b)) - a.min(b).max(0);
    if overlap <= 0 {
        PairClass::CollinearDisjoint
    } else if dot(d1, d2) > 0 {
        PairClass::CollinearCodirectionalOverlap
    } else {
        PairClass::CollinearAntiparallelOverlap
    }
}

/// Shared point of two non-collinear closed sections, if any.
///
/// The result does not depend on argument order.
pub fn intersection_point(e1: &Section, e2: &Section) -> Result<Option<Point>> {
    if classify_pair(e1, e2).is_collinear() {
        return Err(Error::CollinearSections);
    }
    let (a, b) = if e2 < e1 { (e2, e1) } else { (e1, e2) };
    let Some((t, u, den)) = crossing_params(a, b) else {
        return Ok(None);
    };
    if !(0..=den).contains(&t) || !(0..=den).contains(&u) {
        return Ok(None);
    }
    let (di, dj) = a.direction();
    let num_i = i64::from(a.sp.i) * den + t * di;
    let num_j = i64::from(a.sp.j) * den + t * dj;
    Ok(Some(Point::new(
        num_i as f64 / den as f64,
        num_j as f64 / den as f64,
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn s(a: (i32, i32), b: (i32, i32)) -> Section {
        Section::new(Cell::from(a), Cell::from(b)).unwrap()
    }

    #[test]
    fn section_rejects_degenerate() {
        assert!(Section::new(Cell::new(1, 1), Cell::new(1, 1)).is_err());
    }

    #[test]
    fn lengths() {
        assert_eq!(section_length(&s((0, 0), (3, 4))), 5.0);
        assert_eq!(section_length(&s((0, 0), (0, 5))), 5.0);
        assert_abs_diff_eq!(section_length(&s((1, 1), (2, 2))), 2f64.sqrt());
    }

    #[test]
    fn delta_sections() {
        assert!(is_delta_section(&s((0, 0), (3, 4)), 5));
        assert!(is_delta_section(&s((0, 0), (5, 1)), 5));
        assert!(!is_delta_section(&s((0, 0), (4, 4)), 5));
        assert!(!is_delta_section(&s((0, 0), (0, 4)), 5));
    }

    #[test]
    fn delta_rounding_agrees_with_float_rounding() {
        for di in -12..=12 {
            for dj in -12..=12 {
                if (di, dj) == (0, 0) {
                    continue;
                }
                let e = s((0, 0), (di, dj));
                let rounded = (e.length() + 0.5).floor() as i32;
                for delta in 1..=18 {
                    assert_eq!(
                        is_delta_section(&e, delta),
                        rounded == delta,
                        "{e:?} {delta}"
                    );
                }
            }
        }
    }

    #[test]
    fn alteration_angles() {
        let a = alteration_angle(&s((0, 0), (5, 0)), &s((5, 0), (10, 0))).unwrap();
        assert_abs_diff_eq!(a, 0.0);
        let a = alteration_angle(&s((0, 0), (5, 0)), &s((5, 0), (5, 5))).unwrap();
        assert_abs_diff_eq!(a, 90.0, epsilon = 1e-12);
        let a = alteration_angle(&s((0, 0), (4, 0)), &s((4, 0), (8, 3))).unwrap();
        assert_abs_diff_eq!(a, 3f64.atan2(4.0).to_degrees(), epsilon = 1e-12);
        assert_abs_diff_eq!(a, 36.87, epsilon = 0.01);
        assert!(matches!(
            alteration_angle(&s((0, 0), (4, 0)), &s((5, 0), (8, 3))),
            Err(Error::NonAdjacent(..))
        ));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            classify_pair(&s((0, 0), (4, 4)), &s((4, 0), (0, 4))),
            PairClass::NonCollinearCrossing
        );
        assert_eq!(
            classify_pair(&s((0, 0), (5, 0)), &s((2, 0), (7, 0))),
            PairClass::CollinearCodirectionalOverlap
        );
        assert_eq!(
            classify_pair(&s((0, 0), (5, 0)), &s((9, 0), (5, 0))),
            PairClass::CollinearDisjoint
        );
        assert_eq!(
            classify_pair(&s((0, 0), (5, 0)), &s((4, 0), (1, 0))),
            PairClass::CollinearAntiparallelOverlap
        );
        assert_eq!(
            classify_pair(&s((0, 0), (5, 0)), &s((0, 1), (5, 1))),
            PairClass::Disjoint
        );
        // T-junction touch counts as a crossing
        assert_eq!(
            classify_pair(&s((0, 0), (0, 6)), &s((0, 3), (4, 3))),
            PairClass::NonCollinearCrossing
        );
        // shared endpoint, codirectional: single point touch
        assert_eq!(
            classify_pair(&s((0, 0), (5, 0)), &s((5, 0), (9, 0))),
            PairClass::CollinearDisjoint
        );
    }

    #[test]
    fn intersection_examples() {
        assert_eq!(
            intersection_point(&s((0, 0), (4, 4)), &s((4, 0), (0, 4))).unwrap(),
            Some(Point::new(2.0, 2.0))
        );
        assert_eq!(
            intersection_point(&s((0, 0), (4, 4)), &s((10, 0), (10, 4))).unwrap(),
            None
        );
        assert_eq!(
            intersection_point(&s((0, 0), (5, 0)), &s((3, -2), (3, 2))).unwrap(),
            Some(Point::new(3.0, 0.0))
        );
        assert!(intersection_point(&s((0, 0), (5, 0)), &s((2, 0), (7, 0))).is_err());
    }

    fn arb_section() -> impl Strategy<Value = Section> {
        ((-8i32..8, -8i32..8), (-8i32..8, -8i32..8))
            .prop_filter("distinct", |(a, b)| a != b)
            .prop_map(|(a, b)| s(a, b))
    }

    proptest! {
        #[test]
        fn classify_symmetric(e1 in arb_section(), e2 in arb_section()) {
            let a = classify_pair(&e1, &e2);
            let b = classify_pair(&e2, &e1);
            prop_assert_eq!(a.is_collinear(), b.is_collinear());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn intersection_symmetric_and_on_both(e1 in arb_section(), e2 in arb_section()) {
            if let Ok(p) = intersection_point(&e1, &e2) {
                prop_assert_eq!(p, intersection_point(&e2, &e1).unwrap());
                if let Some(p) = p {
                    prop_assert!(e1.distance_to(p) < 1e-9 && e2.distance_to(p) < 1e-9);
                }
            }
        }

        #[test]
        fn angle_scale_invariant(a in (-9i64..9, -9i64..9), b in (-9i64..9, -9i64..9), k in 1i64..6, m in 1i64..6) {
            prop_assume!(a != (0, 0) && b != (0, 0));
            let x = angle_between(a, b);
            let y = angle_between((a.0 * k, a.1 * k), (b.0 * m, b.1 * m));
            prop_assert!((x - y).abs() < 1e-9);
            prop_assert!((0.0..=180.0).contains(&x));
        }

        #[test]
        fn equally_spaced_collinear_is_straight(p in (-20i32..20, -20i32..20), d in (-6i32..6, -6i32..6)) {
            prop_assume!(d != (0, 0));
            let b = (p.0 + d.0, p.1 + d.1);
            let c = (b.0 + d.0, b.1 + d.1);
            prop_assert_eq!(alteration_angle(&s(p, b), &s(b, c)).unwrap(), 0.0);
        }
    }
}
