//! Parametric curves: exact geometry for interfaces, faults and curved
//! element edges.
//!
//! Four kinds cover the benchmark configurations: straight segments, circle
//! arcs, and graphs of `a*sqrt(x+b) + c` and `a*(x+b)^2 + c`. A curve
//! carries its parameter interval; mesh edges reference sub-intervals of
//! it, so a cut mesh keeps the exact geometry instead of re-approximating
//! it per edge.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::{Point, Vec2};

/// Tolerance for geometric predicates: tangency detection, intersection
/// dedup, endpoint snapping. Functions take it as a parameter; this is the
/// default callers pass.
pub const GEOM_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("parameter {t} outside curve interval [{lo}, {hi}]")]
    ParamOutOfInterval { t: f64, lo: f64, hi: f64 },
    #[error("{kind:?} takes {expected} params, got {got}")]
    BadParams {
        kind: CurveKind,
        expected: usize,
        got: usize,
    },
    #[error("curve interval [{lo}, {hi}] is empty or not finite")]
    BadInterval { lo: f64, hi: f64 },
    #[error("circle radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("sqrt graph reaches its pole: interval start + b = {0}")]
    SqrtDomain(f64),
}

/// Curve kind tag. The `params` layout of [`CurveDef`] is fixed per kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveKind {
    /// Straight segment `p0 + t (p1 - p0)`; params `[x0, y0, x1, y1]`,
    /// natural interval `[0, 1]`.
    Segment,
    /// Circle arc `c + r (cos t, sin t)`; params `[cx, cy, r]`, the
    /// parameter is the angle.
    CircleArc,
    /// Graph `y = a sqrt(x + b) + c`; params `[a, b, c]`, the parameter is
    /// `x` and the interval must stay right of the pole `x = -b`.
    GraphSqrt,
    /// Graph `y = a (x + b)^2 + c`; params `[a, b, c]`, the parameter is `x`.
    GraphParabola,
}

impl CurveKind {
    fn expected_params(self) -> usize {
        match self {
            CurveKind::Segment => 4,
            CurveKind::CircleArc | CurveKind::GraphSqrt | CurveKind::GraphParabola => 3,
        }
    }
}

/// A parametric curve `t -> (x(t), y(t))` over a closed parameter interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveDef {
    pub kind: CurveKind,
    /// Flat parameter array, layout fixed per [`CurveKind`].
    pub params: Vec<f64>,
    /// Parameter interval `[t0, t1]`, `t0 < t1`.
    pub interval: [f64; 2],
}

/// Axis-aligned segment, the only straight primitive a structured grid cut
/// has to intersect curves with.
#[derive(Clone, Copy, Debug)]
pub struct AxisSegment {
    pub axis: Axis,
    /// The fixed coordinate: `x` for vertical, `y` for horizontal.
    pub level: f64,
    /// Range of the running coordinate, `lo <= hi`.
    pub lo: f64,
    pub hi: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    Vertical,
    Horizontal,
}

impl AxisSegment {
    pub fn vertical(x: f64, y0: f64, y1: f64) -> Self {
        AxisSegment {
            axis: Axis::Vertical,
            level: x,
            lo: y0.min(y1),
            hi: y0.max(y1),
        }
    }

    pub fn horizontal(y: f64, x0: f64, x1: f64) -> Self {
        AxisSegment {
            axis: Axis::Horizontal,
            level: y,
            lo: x0.min(x1),
            hi: x0.max(x1),
        }
    }

    /// Running coordinate of a point (the one that varies along the segment).
    fn running(&self, p: Point) -> f64 {
        match self.axis {
            Axis::Vertical => p.y,
            Axis::Horizontal => p.x,
        }
    }
}

/// One curve/segment intersection, reported at curve parameter `t`.
#[derive(Clone, Copy, Debug)]
pub struct Intersection {
    pub t: f64,
    pub point: Point,
    /// True when the curve touches the segment's supporting line without
    /// crossing it (circle grazing a grid line, parabola vertex on it).
    pub tangential: bool,
}

impl CurveDef {
    pub fn segment(p0: Point, p1: Point) -> Self {
        CurveDef {
            kind: CurveKind::Segment,
            params: vec![p0.x, p0.y, p1.x, p1.y],
            interval: [0.0, 1.0],
        }
    }

    pub fn circle_arc(center: Point, r: f64, theta0: f64, theta1: f64) -> Self {
        CurveDef {
            kind: CurveKind::CircleArc,
            params: vec![center.x, center.y, r],
            interval: [theta0, theta1],
        }
    }

    pub fn graph_sqrt(a: f64, b: f64, c: f64, x0: f64, x1: f64) -> Self {
        CurveDef {
            kind: CurveKind::GraphSqrt,
            params: vec![a, b, c],
            interval: [x0, x1],
        }
    }

    pub fn graph_parabola(a: f64, b: f64, c: f64, x0: f64, x1: f64) -> Self {
        CurveDef {
            kind: CurveKind::GraphParabola,
            params: vec![a, b, c],
            interval: [x0, x1],
        }
    }

    /// Same curve restricted to `[t0, t1]`.
    pub fn clipped(&self, t0: f64, t1: f64) -> Self {
        CurveDef {
            kind: self.kind,
            params: self.params.clone(),
            interval: [t0, t1],
        }
    }

    pub fn validate(&self) -> Result<(), CurveError> {
        let expected = self.kind.expected_params();
        if self.params.len() != expected {
            return Err(CurveError::BadParams {
                kind: self.kind,
                expected,
                got: self.params.len(),
            });
        }
        let [lo, hi] = self.interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(CurveError::BadInterval { lo, hi });
        }
        match self.kind {
            CurveKind::CircleArc if self.params[2] <= 0.0 => {
                Err(CurveError::BadRadius(self.params[2]))
            }
            CurveKind::GraphSqrt if lo + self.params[1] <= 0.0 => {
                Err(CurveError::SqrtDomain(lo + self.params[1]))
            }
            _ => Ok(()),
        }
    }

    fn check_param(&self, t: f64) -> Result<(), CurveError> {
        let [lo, hi] = self.interval;
        let slack = 1e-12 * (hi - lo).max(1.0);
        if t < lo - slack || t > hi + slack {
            Err(CurveError::ParamOutOfInterval { t, lo, hi })
        } else {
            Ok(())
        }
    }

    /// Point on the curve at parameter `t`; errors when `t` leaves the
    /// stored interval (beyond a relative slack of 1e-12).
    pub fn eval(&self, t: f64) -> Result<Point, CurveError> {
        self.check_param(t)?;
        Ok(self.pt(t))
    }

    /// Derivative `gamma'(t)`; same interval check as [`CurveDef::eval`].
    pub fn velocity(&self, t: f64) -> Result<Vec2, CurveError> {
        self.check_param(t)?;
        Ok(self.vel(t))
    }

    pub(crate) fn pt(&self, t: f64) -> Point {
        let p = &self.params;
        match self.kind {
            CurveKind::Segment => Point::new(
                p[0] + t * (p[2] - p[0]),
                p[1] + t * (p[3] - p[1]),
            ),
            CurveKind::CircleArc => Point::new(p[0] + p[2] * t.cos(), p[1] + p[2] * t.sin()),
            CurveKind::GraphSqrt => Point::new(t, p[0] * (t + p[1]).sqrt() + p[2]),
            CurveKind::GraphParabola => {
                let u = t + p[1];
                Point::new(t, p[0] * u * u + p[2])
            }
        }
    }

    pub(crate) fn vel(&self, t: f64) -> Vec2 {
        let p = &self.params;
        match self.kind {
            CurveKind::Segment => Vec2::new(p[2] - p[0], p[3] - p[1]),
            CurveKind::CircleArc => Vec2::new(-p[2] * t.sin(), p[2] * t.cos()),
            CurveKind::GraphSqrt => Vec2::new(1.0, 0.5 * p[0] / (t + p[1]).sqrt()),
            CurveKind::GraphParabola => Vec2::new(1.0, 2.0 * p[0] * (t + p[1])),
        }
    }

    pub(crate) fn speed(&self, t: f64) -> f64 {
        self.vel(t).norm()
    }

    /// Arc length of the sub-interval `[a, b]`, adaptive Gauss quadrature to
    /// a relative tolerance of 1e-12.
    pub fn arc_length(&self, a: f64, b: f64) -> Result<f64, CurveError> {
        self.check_param(a)?;
        self.check_param(b)?;
        if a == b {
            return Ok(0.0);
        }
        let (a, b, sign) = if a < b { (a, b, 1.0) } else { (b, a, 1.0) };
        Ok(sign * adaptive_g8(&|t| self.speed(t), a, b, 1e-12, 0))
    }

    /// Recovers the parameter of a point lying on the curve, or `None` when
    /// the point is farther than `tol` from it. Graphs read the parameter
    /// off the x coordinate, arcs unwrap the angle into their interval, and
    /// segments project. Parameters are clamped into the interval, so a
    /// point within `tol` beyond an end maps to that end.
    pub fn param_near(&self, p: Point, tol: f64) -> Option<f64> {
        let [lo, hi] = self.interval;
        let q = &self.params;
        let t = match self.kind {
            CurveKind::Segment => {
                let a = Point::new(q[0], q[1]);
                let d = Vec2::new(q[2] - q[0], q[3] - q[1]);
                let len2 = d.norm_squared();
                if len2 == 0.0 {
                    return None;
                }
                (p - a).dot(&d) / len2
            }
            CurveKind::CircleArc => {
                let raw = (p.y - q[1]).atan2(p.x - q[0]);
                let tau = std::f64::consts::TAU;
                raw + tau * ((0.5 * (lo + hi) - raw) / tau).round()
            }
            CurveKind::GraphSqrt | CurveKind::GraphParabola => p.x,
        };
        let t = t.clamp(lo, hi);
        if (self.pt(t) - p).norm() <= tol {
            Some(t)
        } else {
            None
        }
    }

    /// Intersections with an axis-aligned segment, closed-form per kind.
    /// Sorted by curve parameter, deduplicated within `tol`, endpoint hits
    /// clamped into the interval, tangential grazes flagged.
    pub fn segment_intersections(&self, seg: &AxisSegment, tol: f64) -> Vec<Intersection> {
        let mut hits: Vec<Intersection> = Vec::new();
        let mut push = |t: f64, tangential: bool| {
            let [lo, hi] = self.interval;
            if t < lo - tol || t > hi + tol {
                return;
            }
            let t = t.clamp(lo, hi);
            let point = self.pt(t);
            let run = seg.running(point);
            if run < seg.lo - tol || run > seg.hi + tol {
                return;
            }
            hits.push(Intersection {
                t,
                point,
                tangential,
            });
        };

        let p = &self.params;
        match (self.kind, seg.axis) {
            (CurveKind::Segment, axis) => {
                let (c0, c1) = match axis {
                    Axis::Vertical => (p[0], p[2]),
                    Axis::Horizontal => (p[1], p[3]),
                };
                let d = c1 - c0;
                if d.abs() > tol {
                    push((seg.level - c0) / d, false);
                }
                // A segment collinear with the line is an overlap, not a
                // crossing; callers never cut along their own grid lines.
            }
            (CurveKind::CircleArc, axis) => {
                let (cx, cy, r) = (p[0], p[1], p[2]);
                let center_coord = match axis {
                    Axis::Vertical => cx,
                    Axis::Horizontal => cy,
                };
                let u = (seg.level - center_coord) / r;
                // Angles where the fixed coordinate matches; `u` slightly
                // beyond +-1 still counts as a tangential graze.
                let candidates: Vec<(f64, bool)> = if u.abs() > 1.0 + tol / r {
                    vec![]
                } else if 1.0 - u.abs() < tol / r {
                    let base = match axis {
                        Axis::Vertical => {
                            if u > 0.0 {
                                0.0
                            } else {
                                std::f64::consts::PI
                            }
                        }
                        Axis::Horizontal => {
                            if u > 0.0 {
                                std::f64::consts::FRAC_PI_2
                            } else {
                                -std::f64::consts::FRAC_PI_2
                            }
                        }
                    };
                    vec![(base, true)]
                } else {
                    match axis {
                        Axis::Vertical => {
                            let th = u.acos();
                            vec![(th, false), (-th, false)]
                        }
                        Axis::Horizontal => {
                            let th = u.asin();
                            vec![(th, false), (std::f64::consts::PI - th, false)]
                        }
                    }
                };
                for (th, tang) in candidates {
                    for k in -1..=1 {
                        push(th + 2.0 * std::f64::consts::PI * f64::from(k), tang);
                    }
                }
            }
            (CurveKind::GraphSqrt | CurveKind::GraphParabola, Axis::Vertical) => {
                push(seg.level, false);
            }
            (CurveKind::GraphSqrt, Axis::Horizontal) => {
                let v = (seg.level - p[2]) / p[0];
                if v >= 0.0 {
                    push(v * v - p[1], false);
                }
            }
            (CurveKind::GraphParabola, Axis::Horizontal) => {
                let s = (seg.level - p[2]) / p[0];
                // Tangency at the vertex when the two roots collapse within tol.
                if s >= 0.0 {
                    let root = s.sqrt();
                    if 2.0 * root < tol {
                        push(-p[1], true);
                    } else {
                        push(-p[1] - root, false);
                        push(-p[1] + root, false);
                    }
                } else if s > -tol * tol {
                    push(-p[1], true);
                }
            }
        }

        hits.sort_by(|a, b| a.t.total_cmp(&b.t));
        hits.dedup_by(|b, a| {
            if (b.t - a.t).abs() < tol {
                a.tangential |= b.tangential;
                true
            } else {
                false
            }
        });
        hits
    }
}

const G8_NODES: [f64; 4] = [
    0.1834346424956498,
    0.5255324099163290,
    0.7966664774136267,
    0.9602898564975363,
];
const G8_WEIGHTS: [f64; 4] = [
    0.3626837833783620,
    0.3137066458778873,
    0.2223810344533745,
    0.1012285362903763,
];

fn g8(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = 0.0;
    for i in 0..4 {
        acc += G8_WEIGHTS[i] * (f(mid - half * G8_NODES[i]) + f(mid + half * G8_NODES[i]));
    }
    acc * half
}

fn adaptive_g8(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64, depth: u32) -> f64 {
    let whole = g8(f, a, b);
    let mid = 0.5 * (a + b);
    let halves = g8(f, a, mid) + g8(f, mid, b);
    if depth >= 48 || (whole - halves).abs() <= rel_tol * halves.abs().max(f64::MIN_POSITIVE) {
        halves
    } else {
        adaptive_g8(f, a, mid, 0.5 * rel_tol, depth + 1)
            + adaptive_g8(f, mid, b, 0.5 * rel_tol, depth + 1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn quarter_arc() -> CurveDef {
        CurveDef::circle_arc(Point::new(0.0, 0.0), 0.45, 0.0, FRAC_PI_2)
    }

    #[test]
    fn param_near_recovers_parameters() {
        let arc = quarter_arc();
        let p = arc.eval(0.3).unwrap();
        assert_relative_eq!(arc.param_near(p, 1e-10).unwrap(), 0.3, epsilon = 1e-13);
        assert!(arc.param_near(Point::new(0.0, 0.0), 1e-10).is_none());
        assert!(arc.param_near(Point::new(0.451, 0.001), 1e-10).is_none());

        // An arc on a shifted branch still unwraps into its own interval.
        let shifted = CurveDef::circle_arc(Point::new(0.0, 0.0), 1.0, 3.0, 4.5);
        let p = shifted.eval(4.0).unwrap();
        assert_relative_eq!(shifted.param_near(p, 1e-10).unwrap(), 4.0, epsilon = 1e-12);

        let g = CurveDef::graph_sqrt(-1.25, 1.1, 1.01, -0.9, 0.3);
        let p = g.eval(-0.2).unwrap();
        assert_relative_eq!(g.param_near(p, 1e-10).unwrap(), -0.2, epsilon = 1e-15);
        assert!(g.param_near(Point::new(-0.2, 0.0), 1e-10).is_none());

        let s = CurveDef::segment(Point::new(0.0, 0.0), Point::new(2.0, 0.0));
        assert_relative_eq!(s.param_near(Point::new(0.5, 0.0), 1e-10).unwrap(), 0.25);
        // Slightly past the end clamps onto it.
        let past = s.param_near(Point::new(2.0 + 1e-12, 0.0), 1e-10).unwrap();
        assert_relative_eq!(past, 1.0);
    }

    #[test]
    fn arc_eval_hits_endpoints() {
        let c = quarter_arc();
        let p0 = c.eval(0.0).unwrap();
        let p1 = c.eval(FRAC_PI_2).unwrap();
        assert_relative_eq!(p0.x, 0.45, epsilon = 1e-15);
        assert!(p0.y.abs() < 1e-15);
        assert!(p1.x.abs() < 1e-15);
        assert_relative_eq!(p1.y, 0.45, epsilon = 1e-15);
    }

    #[test]
    fn arc_velocity_is_tangent_of_length_r() {
        let c = quarter_arc();
        for t in [0.0, 0.3, 1.1, FRAC_PI_2] {
            let v = c.velocity(t).unwrap();
            assert_relative_eq!(v.norm(), 0.45, epsilon = 1e-14);
            let radial = c.eval(t).unwrap().coords;
            assert!(v.dot(&radial).abs() < 1e-14);
        }
    }

    #[test]
    fn eval_outside_interval_errors() {
        let c = quarter_arc();
        assert!(c.eval(-0.2).is_err());
        assert!(c.eval(FRAC_PI_2 + 0.2).is_err());
        // Exact endpoints and tiny slack pass.
        assert!(c.eval(FRAC_PI_2 + 1e-14).is_ok());
    }

    #[test]
    fn sqrt_graph_matches_formula() {
        // y = -1.25 sqrt(x + 1.1) + 1.01 at x = -1: 1.01 - 1.25 sqrt(0.1).
        let c = CurveDef::graph_sqrt(-1.25, 1.1, 1.01, -1.0, 0.35);
        let p = c.eval(-1.0).unwrap();
        assert_relative_eq!(p.y, 0.6147152924789526, epsilon = 1e-15);
        let v = c.vel(-1.0);
        assert_relative_eq!(v.y, 0.5 * -1.25 / 0.1f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn parabola_matches_formula() {
        let c = CurveDef::graph_parabola(0.25, 1.1, 0.01, -1.0, 0.3);
        assert_relative_eq!(c.eval(0.0).unwrap().y, 0.3125, epsilon = 1e-15);
    }

    #[test]
    fn validate_rejects_bad_defs() {
        let mut c = quarter_arc();
        assert!(c.validate().is_ok());
        c.params[2] = -1.0;
        assert!(matches!(c.validate(), Err(CurveError::BadRadius(_))));
        let s = CurveDef::graph_sqrt(1.0, 1.1, 0.0, -1.2, 0.0);
        assert!(matches!(s.validate(), Err(CurveError::SqrtDomain(_))));
        let mut seg = CurveDef::segment(Point::new(0.0, 0.0), Point::new(1.0, 0.0));
        seg.interval = [1.0, 0.0];
        assert!(matches!(seg.validate(), Err(CurveError::BadInterval { .. })));
        seg.interval = [0.0, 1.0];
        seg.params.pop();
        assert!(matches!(seg.validate(), Err(CurveError::BadParams { .. })));
    }

    #[test]
    fn quarter_arc_length() {
        let c = quarter_arc();
        let len = c.arc_length(0.0, FRAC_PI_2).unwrap();
        assert_relative_eq!(len, PI * 0.45 / 2.0, epsilon = 1e-12);
        assert_relative_eq!(len, 0.7068583470577035, epsilon = 1e-12);
    }

    #[test]
    fn segment_arc_length_is_euclidean() {
        let c = CurveDef::segment(Point::new(0.25, -1.0), Point::new(1.0, 0.5));
        let len = c.arc_length(0.0, 1.0).unwrap();
        assert_relative_eq!(len, (0.75f64 * 0.75 + 1.5 * 1.5).sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn parabola_arc_length_closed_form() {
        // For y = a (x+b)^2 + c with u = 2a(x+b):
        //   L = [u sqrt(1+u^2) + asinh u] / (4a)
        let (a, b) = (0.25, 1.1);
        let c = CurveDef::graph_parabola(a, b, 0.01, -1.0, 0.3);
        let anti = |x: f64| {
            let u = 2.0 * a * (x + b);
            (u * (1.0 + u * u).sqrt() + u.asinh()) / (4.0 * a)
        };
        let exact = anti(0.3) - anti(-1.0);
        let len = c.arc_length(-1.0, 0.3).unwrap();
        assert_relative_eq!(len, exact, epsilon = 1e-12);
    }

    #[test]
    fn sqrt_arc_length_matches_simpson_oracle() {
        let c = CurveDef::graph_sqrt(-1.25, 1.1, 1.01, -0.93, 0.35);
        // Composite Simpson on the speed, 2^20 panels: an oracle that shares
        // no code with the adaptive Gauss path.
        let (x0, x1) = (-0.93, 0.35);
        let n = 1 << 20;
        let h = (x1 - x0) / n as f64;
        let speed = |x: f64| (1.0 + 0.25 * 1.25 * 1.25 / (x + 1.1)).sqrt();
        let mut acc = speed(x0) + speed(x1);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * speed(x0 + i as f64 * h);
        }
        let oracle = acc * h / 3.0;
        let len = c.arc_length(x0, x1).unwrap();
        assert_relative_eq!(len, oracle, epsilon = 1e-11);
    }

    #[test]
    fn arc_crosses_vertical_grid_line() {
        let c = quarter_arc();
        let hits = c.segment_intersections(&AxisSegment::vertical(0.25, 0.0, 0.45), GEOM_TOL);
        assert_eq!(hits.len(), 1);
        let h = &hits[0];
        assert!(!h.tangential);
        assert_relative_eq!(h.point.x, 0.25, epsilon = 1e-12);
        assert_relative_eq!(h.point.y, 0.14f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(h.point.y, 0.37416573867739417, epsilon = 1e-12);
    }

    #[test]
    fn arc_misses_short_segment() {
        let c = quarter_arc();
        // Same supporting line, but the running range stops below the hit.
        let hits = c.segment_intersections(&AxisSegment::vertical(0.25, 0.0, 0.3), GEOM_TOL);
        assert!(hits.is_empty());
    }

    #[test]
    fn parabola_crosses_vertical_grid_line() {
        let c = CurveDef::graph_parabola(0.25, 1.1, 0.01, -1.0, 0.3);
        let hits = c.segment_intersections(&AxisSegment::vertical(0.0, -0.5, 0.5), GEOM_TOL);
        assert_eq!(hits.len(), 1);
        assert_relative_eq!(hits[0].point.y, 0.3125, epsilon = 1e-14);
    }

    #[test]
    fn circle_tangent_to_grid_line_is_flagged() {
        let c = quarter_arc();
        let hits = c.segment_intersections(&AxisSegment::horizontal(0.45, 0.0, 0.2), GEOM_TOL);
        assert_eq!(hits.len(), 1);
        assert!(hits[0].tangential);
        assert_relative_eq!(hits[0].t, FRAC_PI_2, epsilon = 1e-9);
    }

    #[test]
    fn parabola_vertex_tangency() {
        let c = CurveDef::graph_parabola(1.0, 0.0, 0.25, -1.0, 1.0);
        let hits = c.segment_intersections(&AxisSegment::horizontal(0.25, -1.0, 1.0), GEOM_TOL);
        assert_eq!(hits.len(), 1);
        assert!(hits[0].tangential);
        assert_relative_eq!(hits[0].t, 0.0, epsilon = 1e-12);
        // Strictly above the vertex: two clean crossings.
        let hits = c.segment_intersections(&AxisSegment::horizontal(0.5, -1.0, 1.0), GEOM_TOL);
        assert_eq!(hits.len(), 2);
        assert!(hits.iter().all(|h| !h.tangential));
        assert!(hits[0].t < hits[1].t);
    }

    #[test]
    fn horizontal_hits_on_sqrt_graph() {
        // y = 0.5 sqrt(x+1.1) - 0.41 crosses y = 0 at x = 0.82^2 - 1.1.
        let c = CurveDef::graph_sqrt(0.5, 1.1, -0.41, -1.0, 1.0);
        let hits = c.segment_intersections(&AxisSegment::horizontal(0.0, -1.0, 1.0), GEOM_TOL);
        assert_eq!(hits.len(), 1);
        assert_relative_eq!(hits[0].t, 0.82f64 * 0.82 - 1.1, epsilon = 1e-13);
        // Level below the graph's range on this interval: no hits.
        let hits = c.segment_intersections(&AxisSegment::horizontal(-0.5, -1.0, 1.0), GEOM_TOL);
        assert!(hits.is_empty());
    }

    proptest! {
        /// Every reported hit lies on the curve and on the segment, and the
        /// list is sorted and deduplicated.
        #[test]
        fn intersections_lie_on_both_primitives(
            r in 0.2f64..1.5,
            cx in -0.5f64..0.5,
            cy in -0.5f64..0.5,
            t0 in -3.0f64..2.9,
            dt in 0.1f64..3.0,
            level in -1.5f64..1.5,
            vertical in proptest::bool::ANY,
        ) {
            let c = CurveDef::circle_arc(Point::new(cx, cy), r, t0, t0 + dt);
            let seg = if vertical {
                AxisSegment::vertical(level, -3.0, 3.0)
            } else {
                AxisSegment::horizontal(level, -3.0, 3.0)
            };
            let hits = c.segment_intersections(&seg, GEOM_TOL);
            for h in &hits {
                let on_curve = (c.eval(h.t).unwrap() - h.point).norm();
                prop_assert!(on_curve < 1e-9);
                let fixed = match seg.axis {
                    Axis::Vertical => h.point.x,
                    Axis::Horizontal => h.point.y,
                };
                // Tangential grazes sit within sqrt-of-tol of the line.
                let slack = if h.tangential { 2e-5 } else { 1e-9 };
                prop_assert!((fixed - seg.level).abs() < slack * r.max(1.0));
                let run = match seg.axis {
                    Axis::Vertical => h.point.y,
                    Axis::Horizontal => h.point.x,
                };
                prop_assert!(run >= seg.lo - 1e-9 && run <= seg.hi + 1e-9);
            }
            for w in hits.windows(2) {
                prop_assert!(w[1].t - w[0].t >= GEOM_TOL);
            }
        }

        /// Arc length of a circle sub-arc matches r * dt.
        #[test]
        fn arc_length_matches_circle_formula(
            r in 0.05f64..2.0,
            t0 in -3.0f64..3.0,
            dt in 1e-3f64..4.0,
        ) {
            let c = CurveDef::circle_arc(Point::new(0.3, -0.2), r, t0, t0 + dt);
            let len = c.arc_length(t0, t0 + dt).unwrap();
            prop_assert!((len - r * dt).abs() <= 1e-11 * (r * dt));
        }
    }
}
