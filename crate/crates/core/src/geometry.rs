//! Planar primitives shared by every module: points, poses, angle helpers and
//! the segment/polygon predicates used for line-of-sight and collision tests.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Tolerance (m) used by the intersection and containment predicates.
pub const EPS: f64 = 1e-9;

pub const TAU: f64 = 2.0 * PI;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn from_angle(theta: f64) -> Self {
        Self::new(theta.cos(), theta.sin())
    }

    pub fn dot(self, o: Point) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn cross(self, o: Point) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, o: Point) -> f64 {
        (self - o).norm()
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    pub fn normalized(self) -> Point {
        let n = self.norm();
        Point::new(self.x / n, self.y / n)
    }

    /// Counter-clockwise rotation by `theta`.
    pub fn rotate(self, theta: f64) -> Point {
        let (s, c) = theta.sin_cos();
        Point::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn lerp(self, o: Point, t: f64) -> Point {
        Point::new(self.x + (o.x - self.x) * t, self.y + (o.y - self.y) * t)
    }
}

impl Add for Point {
    type Output = Point;
    fn add(self, o: Point) -> Point {
        Point::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point {
    type Output = Point;
    fn sub(self, o: Point) -> Point {
        Point::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point {
    type Output = Point;
    fn mul(self, k: f64) -> Point {
        Point::new(self.x * k, self.y * k)
    }
}

impl Neg for Point {
    type Output = Point;
    fn neg(self) -> Point {
        Point::new(-self.x, -self.y)
    }
}

/// Planar position with a heading (rad).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, psi: f64) -> Self {
        Self { x, y, psi }
    }

    pub fn at(p: Point, psi: f64) -> Self {
        Self::new(p.x, p.y, psi)
    }

    pub fn position(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// Wraps an angle to (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a.rem_euclid(TAU);
    if r > PI {
        r -= TAU;
    }
    r
}

/// Wraps an angle to [0, 2pi).
pub fn mod2pi(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Twice the signed area; positive for counter-clockwise rings.
pub fn signed_area2(ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n).map(|i| ring[i].cross(ring[(i + 1) % n])).sum()
}

pub fn dist_point_segment(p: Point, a: Point, b: Point) -> f64 {
    let ab = b - a;
    let len2 = ab.dot(ab);
    if len2 == 0.0 {
        return p.dist(a);
    }
    let t = ((p - a).dot(ab) / len2).clamp(0.0, 1.0);
    p.dist(a + ab * t)
}

/// Distance from `p` to the boundary of a closed ring.
pub fn dist_to_ring(p: Point, ring: &[Point]) -> f64 {
    let n = ring.len();
    (0..n)
        .map(|i| dist_point_segment(p, ring[i], ring[(i + 1) % n]))
        .fold(f64::INFINITY, f64::min)
}

/// True iff `p` lies in the interior of the ring by more than [`EPS`].
pub fn strictly_inside(p: Point, ring: &[Point]) -> bool {
    if dist_to_ring(p, ring) <= EPS {
        return false;
    }
    let n = ring.len();
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.y > p.y) != (b.y > p.y) {
            let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if p.x < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// Parameters `t` along `p + t (q - p)` at which the segment touches the
/// segment `a b`. Collinear overlaps report both ends of the overlap.
pub fn segment_contacts(p: Point, q: Point, a: Point, b: Point, out: &mut Vec<f64>) {
    let r = q - p;
    let s = b - a;
    let rr = r.dot(r);
    if rr == 0.0 {
        return;
    }
    let denom = r.cross(s);
    let scale = r.norm() * s.norm();
    if denom.abs() > 1e-12 * scale {
        let t = (a - p).cross(s) / denom;
        let u = (a - p).cross(r) / denom;
        let tol_t = EPS / r.norm();
        let tol_u = EPS / s.norm().max(EPS);
        if t >= -tol_t && t <= 1.0 + tol_t && u >= -tol_u && u <= 1.0 + tol_u {
            out.push(t.clamp(0.0, 1.0));
        }
        return;
    }
    // parallel: only collinear overlaps matter
    if (a - p).cross(r).abs() / r.norm() > EPS {
        return;
    }
    let ta = (a - p).dot(r) / rr;
    let tb = (b - p).dot(r) / rr;
    let (lo, hi) = if ta < tb { (ta, tb) } else { (tb, ta) };
    let lo = lo.max(0.0);
    let hi = hi.min(1.0);
    if lo <= hi {
        out.push(lo);
        out.push(hi);
    }
}

/// True iff the closed segment `pq` has a point in the interior of the ring.
pub fn segment_enters_ring(p: Point, q: Point, ring: &[Point]) -> bool {
    if p.dist(q) <= EPS {
        return strictly_inside(p, ring);
    }
    // bounding-box reject
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for v in ring {
        xmin = xmin.min(v.x);
        xmax = xmax.max(v.x);
        ymin = ymin.min(v.y);
        ymax = ymax.max(v.y);
    }
    if p.x.max(q.x) < xmin - EPS
        || p.x.min(q.x) > xmax + EPS
        || p.y.max(q.y) < ymin - EPS
        || p.y.min(q.y) > ymax + EPS
    {
        return false;
    }
    let mut ts = vec![0.0, 1.0];
    let n = ring.len();
    for i in 0..n {
        segment_contacts(p, q, ring[i], ring[(i + 1) % n], &mut ts);
    }
    ts.sort_by(|a, b| a.total_cmp(b));
    ts.windows(2).any(|w| {
        // between two consecutive boundary contacts the segment is either
        // wholly inside or wholly outside, so one probe decides the piece
        w[1] - w[0] > 1e-12 && strictly_inside(p.lerp(q, 0.5 * (w[0] + w[1])), ring)
    })
}

/// True iff the two closed segments share at least one point.
pub fn segments_touch(p: Point, q: Point, a: Point, b: Point) -> bool {
    let mut ts = Vec::new();
    segment_contacts(p, q, a, b, &mut ts);
    !ts.is_empty()
}
