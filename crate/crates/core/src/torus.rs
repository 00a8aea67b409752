//! Geometry of the flat torus `R²/Z²`.
//!
//! Points are carried in two forms: reduced fundamental-domain coordinates
//! ([`TorusPoint`]) and universal-cover coordinates ([`LiftPoint`]). Paths keep
//! a continuous lift so that free homotopy classes can be read off as integer
//! displacement vectors.

use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Largest allowed per-coordinate jump between consecutive lift samples.
pub const LIFT_STEP_LIMIT: f64 = 0.5;
/// Maximum distance of a loop's endpoint displacement from an integer vector.
pub const WINDING_TOLERANCE: f64 = 1e-9;

/// Point of the torus in fundamental-domain coordinates `[0,1)²`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    x: f64,
    y: f64,
}

impl TorusPoint {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        ensure_finite(&[x, y], "torus point")?;
        if !(0.0..1.0).contains(&x) || !(0.0..1.0).contains(&y) {
            return Err(Error::InvalidInput(format!(
                "torus coordinates ({x}, {y}) outside [0,1)"
            )));
        }
        Ok(Self { x, y })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    /// The lift of this point with coordinates in `[0,1)²`.
    pub fn lift(&self) -> LiftPoint {
        LiftPoint::new(self.x, self.y)
    }

    /// Flat distance on the torus (shortest over all integer translates).
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        let dx = circle_gap(self.x - other.x);
        let dy = circle_gap(self.y - other.y);
        dx.hypot(dy)
    }
}

/// Distance from `d` to the nearest integer.
pub(crate) fn circle_gap(d: f64) -> f64 {
    (d - d.round()).abs()
}

/// Point of the universal cover `R²`.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
pub struct LiftPoint {
    pub x: f64,
    pub y: f64,
}

impl LiftPoint {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn translate(self, v: IntVec2) -> Self {
        Self::new(self.x + v.m as f64, self.y + v.n as f64)
    }

    /// Nearest lattice point `(round x, round y)`.
    pub fn nearest_lattice(self) -> IntVec2 {
        IntVec2::new(self.x.round() as i64, self.y.round() as i64)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Representative of the same torus point with coordinates in `[lo, lo+1)`.
    pub fn recentered(self, lo: f64) -> Self {
        let shift = |c: f64| {
            let r = c - (c - lo).floor();
            if r >= lo + 1.0 {
                lo
            } else {
                r
            }
        };
        Self::new(shift(self.x), shift(self.y))
    }
}

impl Add<IntVec2> for LiftPoint {
    type Output = LiftPoint;
    fn add(self, v: IntVec2) -> LiftPoint {
        self.translate(v)
    }
}

impl From<IntVec2> for LiftPoint {
    fn from(v: IntVec2) -> Self {
        Self::new(v.m as f64, v.n as f64)
    }
}

impl Sub for LiftPoint {
    type Output = (f64, f64);
    fn sub(self, other: LiftPoint) -> (f64, f64) {
        (self.x - other.x, self.y - other.y)
    }
}

/// Integer vector; used both for lattice translations and for free homotopy
/// classes of loops (their winding vectors).
#[derive(
    Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
pub struct IntVec2 {
    pub m: i64,
    pub n: i64,
}

impl IntVec2 {
    pub const ZERO: IntVec2 = IntVec2 { m: 0, n: 0 };
    /// Class of `t ↦ (t, 0.5)`.
    pub const ALPHA: IntVec2 = IntVec2 { m: 1, n: 0 };
    /// Class of `t ↦ (0.5, t)`.
    pub const BETA: IntVec2 = IntVec2 { m: 0, n: 1 };

    pub const fn new(m: i64, n: i64) -> Self {
        Self { m, n }
    }

    pub fn is_zero(&self) -> bool {
        self.m == 0 && self.n == 0
    }

    pub fn scale(self, k: i64) -> Self {
        Self::new(self.m * k, self.n * k)
    }
}

impl Add for IntVec2 {
    type Output = IntVec2;
    fn add(self, o: IntVec2) -> IntVec2 {
        IntVec2::new(self.m + o.m, self.n + o.n)
    }
}

impl std::fmt::Display for IntVec2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

/// Reduce a lift to the fundamental domain.
pub fn reduce(l: LiftPoint) -> Result<TorusPoint> {
    ensure_finite(&[l.x, l.y], "lift point")?;
    let wrap = |c: f64| {
        let r = c - c.floor();
        // c slightly below an integer can round up to exactly 1.0
        if r >= 1.0 {
            0.0
        } else {
            r
        }
    };
    Ok(TorusPoint {
        x: wrap(l.x),
        y: wrap(l.y),
    })
}

/// Algebraic intersection number of two classes on the torus.
pub fn intersection_number(c1: IntVec2, c2: IntVec2) -> i64 {
    c1.m * c2.n - c1.n * c2.m
}

/// One time-stamped sample of a lifted path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub lift: LiftPoint,
}

/// Sampled path in the universal cover, parametrized over `[0,1]`. No closing
/// condition.
#[derive(Clone, Debug, PartialEq)]
pub struct Path {
    samples: Vec<Sample>,
}

impl Path {
    /// Checks time ordering (`t_0 = 0`, `t_last = 1`, strictly increasing)
    /// and finiteness.
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::InvalidInput(
                "a path needs at least two samples".into(),
            ));
        }
        for s in &samples {
            ensure_finite(&[s.t, s.lift.x, s.lift.y], "path sample")?;
        }
        if samples[0].t != 0.0 || samples[samples.len() - 1].t != 1.0 {
            return Err(Error::InvalidInput(
                "path times must run from 0 to 1".into(),
            ));
        }
        if samples.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(Error::InvalidInput(
                "path times must increase strictly".into(),
            ));
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn start(&self) -> LiftPoint {
        self.samples[0].lift
    }

    pub fn end(&self) -> LiftPoint {
        self.samples[self.samples.len() - 1].lift
    }

    /// Largest per-coordinate jump between consecutive samples.
    pub fn max_step(&self) -> f64 {
        self.samples
            .windows(2)
            .map(|w| {
                let (dx, dy) = w[1].lift - w[0].lift;
                dx.abs().max(dy.abs())
            })
            .fold(0.0, f64::max)
    }

    /// Piecewise-linear interpolation of the lift at time `t ∈ [0,1]`.
    pub fn at(&self, t: f64) -> LiftPoint {
        let s = &self.samples;
        let idx = s.partition_point(|p| p.t <= t);
        if idx == 0 {
            return s[0].lift;
        }
        if idx >= s.len() {
            return s[s.len() - 1].lift;
        }
        let (a, b) = (s[idx - 1], s[idx]);
        let w = (t - a.t) / (b.t - a.t);
        LiftPoint::new(
            a.lift.x + w * (b.lift.x - a.lift.x),
            a.lift.y + w * (b.lift.y - a.lift.y),
        )
    }
}

/// Closed sampled path: a 1-periodic loop with a continuous lift.
#[derive(Clone, Debug, PartialEq)]
pub struct Loop {
    path: Path,
    closure_winding: IntVec2,
}

impl Loop {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        Self::from_path(Path::new(samples)?)
    }

    pub fn from_path(path: Path) -> Result<Self> {
        if path.max_step() >= LIFT_STEP_LIMIT {
            return Err(Error::InvalidInput(format!(
                "lift jumps by {} between samples; sample more finely",
                path.max_step()
            )));
        }
        let closure_winding = closure_of(path.start(), path.end())?;
        Ok(Self {
            path,
            closure_winding,
        })
    }

    /// Samples `t ↦ f(t)` at `n + 1` equispaced times.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> LiftPoint) -> Result<Self> {
        let samples = (0..=n)
            .map(|i| {
                let t = if i == n { 1.0 } else { i as f64 / n as f64 };
                Sample { t, lift: f(t) }
            })
            .collect();
        Self::new(samples)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn samples(&self) -> &[Sample] {
        self.path.samples()
    }

    pub fn closure_winding(&self) -> IntVec2 {
        self.closure_winding
    }

    /// Same loop with every sample shifted by the lattice vector `v`.
    pub fn translated(&self, v: IntVec2) -> Loop {
        let samples = self
            .samples()
            .iter()
            .map(|s| Sample {
                t: s.t,
                lift: s.lift + v,
            })
            .collect();
        Loop {
            path: Path { samples },
            closure_winding: self.closure_winding,
        }
    }
}

fn closure_of(start: LiftPoint, end: LiftPoint) -> Result<IntVec2> {
    let (dx, dy) = end - start;
    let (m, n) = (dx.round(), dy.round());
    let residual = (dx - m).abs().max((dy - n).abs());
    if residual >= WINDING_TOLERANCE {
        return Err(Error::BrokenLift { residual });
    }
    Ok(IntVec2::new(m as i64, n as i64))
}

/// Free homotopy class of the loop, recomputed from its endpoint lifts.
pub fn winding_vector(lp: &Loop) -> Result<IntVec2> {
    closure_of(lp.path.start(), lp.path.end())
}

#[derive(Clone, Copy, Debug)]
struct Segment {
    a: LiftPoint,
    b: LiftPoint,
}

impl Segment {
    fn bbox(&self) -> (f64, f64, f64, f64) {
        (
            self.a.x.min(self.b.x),
            self.a.x.max(self.b.x),
            self.a.y.min(self.b.y),
            self.a.y.max(self.b.y),
        )
    }

    fn shifted(&self, v: IntVec2) -> Segment {
        Segment {
            a: self.a + v,
            b: self.b + v,
        }
    }
}

fn coord(p: LiftPoint) -> robust::Coord<f64> {
    robust::Coord { x: p.x, y: p.y }
}

fn orient(a: LiftPoint, b: LiftPoint, c: LiftPoint) -> f64 {
    robust::orient2d(coord(a), coord(b), coord(c))
}

/// Polyline of the loop's image with repeated vertices dropped and exactly
/// collinear runs merged.
fn polyline(lp: &Loop) -> Result<Vec<Segment>> {
    let mut pts: Vec<LiftPoint> = Vec::with_capacity(lp.samples().len());
    for s in lp.samples() {
        if pts.last() == Some(&s.lift) {
            continue;
        }
        if pts.len() >= 2 {
            let (p, q) = (pts[pts.len() - 2], pts[pts.len() - 1]);
            let forward = (q.x - p.x) * (s.lift.x - q.x) + (q.y - p.y) * (s.lift.y - q.y) > 0.0;
            if orient(p, q, s.lift) == 0.0 && forward {
                pts.pop();
            }
        }
        pts.push(s.lift);
    }
    if pts.len() < 2 {
        return Err(Error::InvalidInput(
            "loop has only zero-length segments".into(),
        ));
    }
    Ok(pts
        .windows(2)
        .map(|w| Segment { a: w[0], b: w[1] })
        .collect())
}

fn on_segment(s: &Segment, p: LiftPoint) -> bool {
    p.x >= s.a.x.min(s.b.x)
        && p.x <= s.a.x.max(s.b.x)
        && p.y >= s.a.y.min(s.b.y)
        && p.y <= s.a.y.max(s.b.y)
}

/// Exact crossing test; returns a point of `s ∩ t` if non-empty.
fn segment_crossing(s: &Segment, t: &Segment) -> Option<LiftPoint> {
    let d1 = orient(t.a, t.b, s.a);
    let d2 = orient(t.a, t.b, s.b);
    let d3 = orient(s.a, s.b, t.a);
    let d4 = orient(s.a, s.b, t.b);
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        let w = d1 / (d1 - d2);
        return Some(LiftPoint::new(
            s.a.x + w * (s.b.x - s.a.x),
            s.a.y + w * (s.b.y - s.a.y),
        ));
    }
    // touching and collinear cases
    if d1 == 0.0 && on_segment(t, s.a) {
        return Some(s.a);
    }
    if d2 == 0.0 && on_segment(t, s.b) {
        return Some(s.b);
    }
    if d3 == 0.0 && on_segment(s, t.a) {
        return Some(t.a);
    }
    if d4 == 0.0 && on_segment(s, t.b) {
        return Some(t.b);
    }
    None
}

/// Finds a point where the images of the two loops meet on the torus, testing
/// every segment pair against all lattice translates that bring their
/// bounding boxes together.
pub fn loops_intersect(l1: &Loop, l2: &Loop) -> Result<Option<TorusPoint>> {
    let s1 = polyline(l1)?;
    let s2 = polyline(l2)?;
    let boxes2: Vec<_> = s2.iter().map(Segment::bbox).collect();
    for a in &s1 {
        let (ax0, ax1, ay0, ay1) = a.bbox();
        for (b, &(bx0, bx1, by0, by1)) in s2.iter().zip(&boxes2) {
            let (m0, m1) = ((ax0 - bx1).ceil() as i64, (ax1 - bx0).floor() as i64);
            let (n0, n1) = ((ay0 - by1).ceil() as i64, (ay1 - by0).floor() as i64);
            for m in m0..=m1 {
                for n in n0..=n1 {
                    if let Some(p) = segment_crossing(a, &b.shifted(IntVec2::new(m, n))) {
                        return reduce(p).map(Some);
                    }
                }
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn horizontal(y: f64) -> Loop {
        Loop::from_fn(256, |t| LiftPoint::new(t, y)).unwrap()
    }

    fn vertical(x: f64) -> Loop {
        Loop::from_fn(256, |t| LiftPoint::new(x, t)).unwrap()
    }

    #[test]
    fn reduce_examples() {
        let p = reduce(LiftPoint::new(1.3, -0.25)).unwrap();
        assert!((p.x() - 0.3).abs() < 1e-15 && p.y() == 0.75);
        assert_eq!(
            reduce(LiftPoint::new(0.0, 0.0)).unwrap(),
            TorusPoint::new(0.0, 0.0).unwrap()
        );
        assert_eq!(
            reduce(LiftPoint::new(2.0, 3.5)).unwrap(),
            TorusPoint::new(0.0, 0.5).unwrap()
        );
        let tiny = reduce(LiftPoint::new(-1e-18, 0.0)).unwrap();
        assert!(tiny.x() < 1.0);
        assert!(reduce(LiftPoint::new(f64::NAN, 0.0)).is_err());
        assert!(reduce(LiftPoint::new(0.0, f64::INFINITY)).is_err());
    }

    #[test]
    fn winding_of_reference_loops() {
        assert_eq!(winding_vector(&horizontal(0.5)).unwrap(), IntVec2::ALPHA);
        assert_eq!(winding_vector(&vertical(0.5)).unwrap(), IntVec2::BETA);
        let constant = Loop::from_fn(16, |_| LiftPoint::new(0.2, 0.2)).unwrap();
        assert_eq!(winding_vector(&constant).unwrap(), IntVec2::ZERO);
    }

    #[test]
    fn broken_lift_rejected() {
        let err = Loop::from_fn(64, |t| LiftPoint::new(0.9 * t, 0.0)).unwrap_err();
        assert!(matches!(err, Error::BrokenLift { .. }));
        // discontinuous lift
        let err = Loop::from_fn(4, |t| LiftPoint::new(3.0 * t, 0.0)).unwrap_err();
        assert!(matches!(err, Error::InvalidInput(_)));
    }

    #[test]
    fn intersection_number_examples() {
        assert_eq!(
            intersection_number(IntVec2::new(1, 0), IntVec2::new(0, 1)),
            1
        );
        assert_eq!(
            intersection_number(IntVec2::new(2, 3), IntVec2::new(2, 3)),
            0
        );
        assert_eq!(
            intersection_number(IntVec2::new(2, 1), IntVec2::new(1, 1)),
            1
        );
    }

    /// Signed count of transverse crossings of straight representatives
    /// `t ↦ p + t·c` on the torus: each crossing solves
    /// `p1 + s·c1 = p2 + u·c2 + k` for `s, u ∈ [0,1)` and integer `k`.
    fn brute_force_crossings(c1: IntVec2, c2: IntVec2) -> i64 {
        let (p1, p2) = ((0.1231, 0.3817), (0.6113, 0.0719));
        let det = (c1.m * c2.n - c1.n * c2.m) as f64;
        let sign = det.signum() as i64;
        let mut count = 0;
        for kx in -10..=10 {
            for ky in -10..=10 {
                // s·c1 − u·c2 = p2 − p1 + k
                let rx = p2.0 - p1.0 + kx as f64;
                let ry = p2.1 - p1.1 + ky as f64;
                let s = (rx * c2.n as f64 - ry * c2.m as f64) / det;
                let u = (c1.n as f64 * rx - c1.m as f64 * ry) / det;
                if (0.0..1.0).contains(&s) && (0.0..1.0).contains(&u) {
                    count += 1;
                }
            }
        }
        sign * count
    }

    #[test]
    fn intersection_number_matches_brute_force() {
        assert_eq!(
            brute_force_crossings(IntVec2::new(2, 1), IntVec2::new(1, 1)),
            1
        );
        for (a, b) in [
            ((1, 0), (0, 1)),
            ((3, 1), (1, 2)),
            ((1, -2), (2, 1)),
            ((0, 1), (1, 0)),
        ] {
            let (c1, c2) = (IntVec2::new(a.0, a.1), IntVec2::new(b.0, b.1));
            assert_eq!(intersection_number(c1, c2), brute_force_crossings(c1, c2));
        }
    }

    #[test]
    fn reference_loops_cross_at_center() {
        let w = loops_intersect(&horizontal(0.5), &vertical(0.5))
            .unwrap()
            .unwrap();
        assert!((w.x() - 0.5).abs() < 1e-15 && (w.y() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn parallel_circles_are_disjoint() {
        assert_eq!(
            loops_intersect(&horizontal(0.1), &horizontal(0.6)).unwrap(),
            None
        );
    }

    #[test]
    fn constant_loop_is_degenerate() {
        let constant = Loop::from_fn(8, |_| LiftPoint::new(0.2, 0.2)).unwrap();
        assert!(matches!(
            loops_intersect(&constant, &horizontal(0.2)),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn stationary_stretches_are_collapsed() {
        // moves during the first half, rests during the second
        let lp = Loop::from_fn(256, |t| LiftPoint::new((2.0 * t).min(1.0), 0.999)).unwrap();
        let w = loops_intersect(&lp, &vertical(0.0005)).unwrap().unwrap();
        assert!((w.x() - 0.0005).abs() < 1e-15 && (w.y() - 0.999).abs() < 1e-15);
    }

    #[test]
    fn recentered_representative() {
        let p = LiftPoint::new(0.999, 1.501).recentered(-0.25);
        assert!((p.x - -0.001).abs() < 1e-12 && (p.y - 0.501).abs() < 1e-12);
    }
}
