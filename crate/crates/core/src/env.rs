//! Polygonal worlds: validation, corner (node) extraction, line of sight,
//! the visibility graph and limited field-of-view queries.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    dist_point_segment, segment_enters_ring, segments_touch, signed_area2, strictly_inside,
    wrap_angle, Point, Pose, EPS, TAU,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("workspace bounds are empty or not finite")]
    InvalidBounds,
    #[error("obstacle {0} has fewer than 3 vertices")]
    TooFewVertices(usize),
    #[error("obstacle {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("obstacle {0} is not a simple polygon")]
    NotSimple(usize),
    #[error("obstacle {0} is not counter-clockwise")]
    Clockwise(usize),
    #[error("vertex {vertex} of obstacle {polygon} lies outside the workspace bounds")]
    VertexOutOfBounds { polygon: usize, vertex: usize },
    #[error("start pose is not in free space")]
    StartNotFree,
    #[error("goal position is not in free space")]
    GoalNotFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn contains(&self, p: Point) -> bool {
        p.x >= self.x_min - EPS
            && p.x <= self.x_max + EPS
            && p.y >= self.y_min - EPS
            && p.y <= self.y_max + EPS
    }
}

/// A simple polygon with counter-clockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Polygon {
    #[serde(with = "point_pairs")]
    pub vertices: Vec<Point>,
}

impl Polygon {
    pub fn new(vertices: Vec<Point>) -> Self {
        Self { vertices }
    }

    /// Axis-aligned rectangle, counter-clockwise from the lower-left corner.
    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![
            Point::new(x0, y0),
            Point::new(x1, y0),
            Point::new(x1, y1),
            Point::new(x0, y1),
        ])
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i % self.vertices.len()]
    }

    pub fn prev(&self, i: usize) -> Point {
        let n = self.vertices.len();
        self.vertices[(i + n - 1) % n]
    }

    pub fn next(&self, i: usize) -> Point {
        self.vertex(i + 1)
    }

    pub fn is_convex_vertex(&self, i: usize) -> bool {
        let (a, b, c) = (self.prev(i), self.vertex(i), self.next(i));
        (b - a).cross(c - b) > EPS
    }

    fn is_simple(&self) -> bool {
        let n = self.len();
        for i in 0..n {
            let (a, b) = (self.vertex(i), self.next(i));
            if a.dist(b) <= EPS {
                return false;
            }
            for j in (i + 1)..n {
                let adjacent = j == i + 1 || (i == 0 && j == n - 1);
                let (c, d) = (self.vertex(j), self.next(j));
                if adjacent {
                    // adjacent edges may only share their common vertex
                    let (far_j, far_i) = if j == i + 1 { (d, a) } else { (c, b) };
                    if dist_point_segment(far_j, a, b) <= EPS
                        || dist_point_segment(far_i, c, d) <= EPS
                    {
                        return false;
                    }
                } else if segments_touch(a, b, c, d) {
                    return false;
                }
            }
        }
        true
    }
}

/// Polygonal world with a start pose and a point goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnvironment", into = "RawEnvironment")]
pub struct Environment {
    bounds: Bounds,
    start: Pose,
    goal: Point,
    obstacles: Vec<Polygon>,
}

#[derive(Serialize, Deserialize)]
struct RawEnvironment {
    bounds: Bounds,
    start: Pose,
    goal: Point,
    obstacles: Vec<Polygon>,
}

impl TryFrom<RawEnvironment> for Environment {
    type Error = EnvError;
    fn try_from(r: RawEnvironment) -> Result<Self, EnvError> {
        Environment::new(r.bounds, r.start, r.goal, r.obstacles)
    }
}

impl From<Environment> for RawEnvironment {
    fn from(e: Environment) -> Self {
        RawEnvironment {
            bounds: e.bounds,
            start: e.start,
            goal: e.goal,
            obstacles: e.obstacles,
        }
    }
}

impl Environment {
    pub fn new(
        bounds: Bounds,
        start: Pose,
        goal: Point,
        obstacles: Vec<Polygon>,
    ) -> Result<Self, EnvError> {
        let finite = [bounds.x_min, bounds.x_max, bounds.y_min, bounds.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || bounds.x_max <= bounds.x_min || bounds.y_max <= bounds.y_min {
            return Err(EnvError::InvalidBounds);
        }
        for (pi, poly) in obstacles.iter().enumerate() {
            if poly.len() < 3 {
                return Err(EnvError::TooFewVertices(pi));
            }
            if poly
                .vertices
                .iter()
                .any(|v| !v.x.is_finite() || !v.y.is_finite())
            {
                return Err(EnvError::NonFinite(pi));
            }
            if let Some(vi) = poly.vertices.iter().position(|v| !bounds.contains(*v)) {
                return Err(EnvError::VertexOutOfBounds {
                    polygon: pi,
                    vertex: vi,
                });
            }
            if !poly.is_simple() {
                return Err(EnvError::NotSimple(pi));
            }
            if signed_area2(&poly.vertices) <= 0.0 {
                return Err(EnvError::Clockwise(pi));
            }
        }
        let env = Self {
            bounds,
            start,
            goal,
            obstacles,
        };
        if !start.psi.is_finite() || !env.is_free(start.position()) {
            return Err(EnvError::StartNotFree);
        }
        if !env.is_free(goal) {
            return Err(EnvError::GoalNotFree);
        }
        Ok(env)
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn start(&self) -> Pose {
        self.start
    }

    pub fn goal(&self) -> Point {
        self.goal
    }

    pub fn obstacles(&self) -> &[Polygon] {
        &self.obstacles
    }

    /// Inside the workspace and not in the interior of any obstacle.
    pub fn is_free(&self, p: Point) -> bool {
        p.x.is_finite()
            && p.y.is_finite()
            && self.bounds.contains(p)
            && !self
                .obstacles
                .iter()
                .any(|o| strictly_inside(p, &o.vertices))
    }

    /// True iff no point of the segment `pq` lies in an obstacle interior.
    /// Grazing an edge or touching a vertex does not block.
    pub fn line_of_sight(&self, p: Point, q: Point) -> bool {
        !self
            .obstacles
            .iter()
            .any(|o| segment_enters_ring(p, q, &o.vertices))
    }

    /// Same environment reflected about the vertical line `x = axis`.
    /// Vertex order is reversed to keep obstacles counter-clockwise.
    pub fn mirrored_x(&self, axis: f64) -> Environment {
        let m = |p: Point| Point::new(2.0 * axis - p.x, p.y);
        let obstacles = self
            .obstacles
            .iter()
            .map(|o| {
                let mut v: Vec<Point> = o.vertices.iter().map(|p| m(*p)).collect();
                v.reverse();
                Polygon::new(v)
            })
            .collect();
        let b = self.bounds;
        Environment {
            bounds: Bounds {
                x_min: 2.0 * axis - b.x_max,
                x_max: 2.0 * axis - b.x_min,
                y_min: b.y_min,
                y_max: b.y_max,
            },
            start: Pose::new(
                2.0 * axis - self.start.x,
                self.start.y,
                wrap_angle(std::f64::consts::PI - self.start.psi),
            ),
            goal: m(self.goal),
            obstacles,
        }
    }
}

/// Geometry of the obstacle corner behind a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CornerMeta {
    pub polygon: usize,
    pub vertex: usize,
    /// Directions (rad) from the corner along its two walls: towards the
    /// previous and the next vertex.
    pub wall_dirs: [f64; 2],
}

impl CornerMeta {
    /// Unit vector along the bisector of the wall angle pointing into free space.
    pub fn outward_bisector(&self) -> Point {
        let d = Point::from_angle(self.wall_dirs[0]) + Point::from_angle(self.wall_dirs[1]);
        if d.norm() <= EPS {
            // degenerate straight angle; fall back to the wall normal
            return Point::from_angle(self.wall_dirs[1]).rotate(-std::f64::consts::FRAC_PI_2);
        }
        -d.normalized()
    }
}

/// Goal (index 0) followed by every convex obstacle corner reachable from
/// free space, ordered by polygon then vertex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSet {
    pub positions: Vec<Point>,
    pub corners: Vec<CornerMeta>,
}

impl NodeSet {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, i: usize) -> Point {
        self.positions[i]
    }

    /// Corner metadata for node `i`; `None` for the goal.
    pub fn corner(&self, i: usize) -> Option<&CornerMeta> {
        if i == 0 {
            None
        } else {
            self.corners.get(i - 1)
        }
    }

    /// Index of the node nearest to `p`.
    pub fn nearest(&self, p: Point) -> usize {
        let mut best = 0;
        for (i, q) in self.positions.iter().enumerate() {
            if q.dist(p) < self.positions[best].dist(p) {
                best = i;
            }
        }
        best
    }
}

pub fn extract_nodes(env: &Environment) -> Result<NodeSet, EnvError> {
    if !env.is_free(env.goal) {
        return Err(EnvError::GoalNotFree);
    }
    let mut positions = vec![env.goal];
    let mut corners = Vec::new();
    for (pi, poly) in env.obstacles.iter().enumerate() {
        for vi in 0..poly.len() {
            if !poly.is_convex_vertex(vi) {
                continue;
            }
            let v = poly.vertex(vi);
            let buried = env
                .obstacles
                .iter()
                .enumerate()
                .any(|(oj, o)| oj != pi && strictly_inside(v, &o.vertices));
            if buried {
                continue;
            }
            positions.push(v);
            corners.push(CornerMeta {
                polygon: pi,
                vertex: vi,
                wall_dirs: [(poly.prev(vi) - v).angle(), (poly.next(vi) - v).angle()],
            });
        }
    }
    Ok(NodeSet { positions, corners })
}

pub fn line_of_sight(env: &Environment, p: Point, q: Point) -> bool {
    env.line_of_sight(p, q)
}

/// Symmetric node-to-node line-of-sight matrix with a false diagonal.
pub fn visibility_graph(env: &Environment, nodes: &NodeSet) -> Vec<Vec<bool>> {
    let n = nodes.len();
    let upper: Vec<Vec<bool>> = (0..n)
        .into_par_iter()
        .map(|k| {
            (0..n)
                .map(|i| i > k && env.line_of_sight(nodes.position(k), nodes.position(i)))
                .collect()
        })
        .collect();
    let mut v = vec![vec![false; n]; n];
    for k in 0..n {
        for i in (k + 1)..n {
            v[k][i] = upper[k][i];
            v[i][k] = upper[k][i];
        }
    }
    v
}

/// True iff the bearing from `pose` to `target` lies within `fov/2` of the heading.
pub fn in_field_of_view(pose: Pose, target: Point, fov: f64) -> bool {
    if fov >= TAU {
        return true;
    }
    let bearing = (target - pose.position()).angle();
    wrap_angle(bearing - pose.psi).abs() <= 0.5 * fov + 1e-12
}

/// Nodes inside the field of view and in line of sight of `pose`.
/// A node coinciding with the pose position is never reported.
pub fn visible_nodes(env: &Environment, pose: Pose, nodes: &NodeSet, fov: f64) -> Vec<usize> {
    let here = pose.position();
    (0..nodes.len())
        .filter(|&i| {
            let p = nodes.position(i);
            p.dist(here) > EPS && in_field_of_view(pose, p, fov) && env.line_of_sight(here, p)
        })
        .collect()
}

mod point_pairs {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::geometry::Point;

    pub fn serialize<S: Serializer>(v: &[Point], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|p| [p.x, p.y]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Point>, D::Error> {
        let pairs = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(pairs.into_iter().map(|[x, y]| Point::new(x, y)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bounds() -> Bounds {
        Bounds {
            x_min: -10.0,
            y_min: -10.0,
            x_max: 10.0,
            y_max: 10.0,
        }
    }

    fn world(obstacles: Vec<Polygon>) -> Environment {
        Environment::new(
            bounds(),
            Pose::new(-8.0, 0.0, 0.0),
            Point::new(8.0, 0.0),
            obstacles,
        )
        .unwrap()
    }

    fn unit_square() -> Polygon {
        Polygon::rect(-0.5, -0.5, 0.5, 0.5)
    }

    #[test]
    fn square_world_has_five_nodes() {
        let env = world(vec![unit_square()]);
        let nodes = extract_nodes(&env).unwrap();
        assert_eq!(nodes.len(), 5);
        assert_eq!(nodes.position(0), env.goal());
        for (i, c) in nodes.corners.iter().enumerate() {
            assert_eq!(c.polygon, 0);
            assert_eq!(c.vertex, i);
        }
    }

    #[test]
    fn empty_world_has_goal_only() {
        let env = world(vec![]);
        let nodes = extract_nodes(&env).unwrap();
        assert_eq!(nodes.positions, vec![env.goal()]);
        assert!(nodes.corners.is_empty());
    }

    #[test]
    fn triangle_then_square_ordering() {
        let tri = Polygon::new(vec![
            Point::new(-5.0, 3.0),
            Point::new(-3.0, 3.0),
            Point::new(-4.0, 5.0),
        ]);
        let env = world(vec![tri, Polygon::rect(2.0, -6.0, 4.0, -4.0)]);
        let nodes = extract_nodes(&env).unwrap();
        assert_eq!(nodes.len(), 8);
        let owners: Vec<usize> = nodes.corners.iter().map(|c| c.polygon).collect();
        assert_eq!(owners, vec![0, 0, 0, 1, 1, 1, 1]);
    }

    #[test]
    fn reflex_corners_are_skipped() {
        // L-shaped hexagon with one reflex vertex at (1,1)
        let l = Polygon::new(vec![
            Point::new(0.0, 0.0),
            Point::new(2.0, 0.0),
            Point::new(2.0, 1.0),
            Point::new(1.0, 1.0),
            Point::new(1.0, 2.0),
            Point::new(0.0, 2.0),
        ]);
        let env = world(vec![l]);
        let nodes = extract_nodes(&env).unwrap();
        assert_eq!(nodes.len(), 6);
        assert!(nodes.corners.iter().all(|c| c.vertex != 3));
    }

    #[test]
    fn goal_inside_obstacle_is_rejected() {
        let err = Environment::new(
            bounds(),
            Pose::new(-8.0, 0.0, 0.0),
            Point::new(0.0, 0.0),
            vec![unit_square()],
        )
        .unwrap_err();
        assert_eq!(err, EnvError::GoalNotFree);
    }

    #[test]
    fn invalid_polygons_are_rejected() {
        let mk =
            |p: Polygon| Environment::new(bounds(), Pose::default(), Point::new(8.0, 8.0), vec![p]);
        let mut cw = Polygon::rect(1.0, 1.0, 2.0, 2.0);
        cw.vertices.reverse();
        assert_eq!(mk(cw).unwrap_err(), EnvError::Clockwise(0));
        let bowtie = Polygon::new(vec![
            Point::new(1.0, 1.0),
            Point::new(3.0, 3.0),
            Point::new(3.0, 1.0),
            Point::new(1.0, 3.0),
        ]);
        assert_eq!(mk(bowtie).unwrap_err(), EnvError::NotSimple(0));
        let two = Polygon::new(vec![Point::new(1.0, 1.0), Point::new(2.0, 2.0)]);
        assert_eq!(mk(two).unwrap_err(), EnvError::TooFewVertices(0));
        let out = Polygon::rect(1.0, 1.0, 12.0, 2.0);
        assert!(matches!(
            mk(out).unwrap_err(),
            EnvError::VertexOutOfBounds { .. }
        ));
    }

    #[test]
    fn line_of_sight_cases() {
        let empty = world(vec![]);
        assert!(empty.line_of_sight(Point::new(-3.0, 2.0), Point::new(4.0, -1.0)));
        let env = world(vec![unit_square()]);
        assert!(!env.line_of_sight(Point::new(-2.0, 0.0), Point::new(2.0, 0.0)));
        // along one edge, vertex to vertex
        assert!(env.line_of_sight(Point::new(-0.5, -0.5), Point::new(0.5, -0.5)));
        // diagonal through the interior
        assert!(!env.line_of_sight(Point::new(-0.5, -0.5), Point::new(0.5, 0.5)));
        // grazing a vertex from outside
        assert!(env.line_of_sight(Point::new(-1.5, 0.5), Point::new(0.5, -1.5)));
    }

    #[test]
    fn visibility_graph_symmetric_and_blocked() {
        let env = world(vec![
            Polygon::rect(-4.0, -1.0, -3.0, 1.0),
            Polygon::rect(-0.5, -3.0, 0.5, 3.0),
            Polygon::rect(3.0, -1.0, 4.0, 1.0),
        ]);
        let nodes = extract_nodes(&env).unwrap();
        let v = visibility_graph(&env, &nodes);
        for k in 0..nodes.len() {
            assert!(!v[k][k]);
            for i in 0..nodes.len() {
                assert_eq!(v[k][i], v[i][k]);
            }
        }
        // lower-right corner of the left box (index 2) vs lower-left of the right box (index 9)
        assert_eq!(nodes.position(2), Point::new(-3.0, -1.0));
        assert_eq!(nodes.position(9), Point::new(3.0, -1.0));
        assert!(!v[2][9]);
    }

    #[test]
    fn single_node_visibility_is_zero() {
        let env = world(vec![]);
        let nodes = extract_nodes(&env).unwrap();
        assert_eq!(visibility_graph(&env, &nodes), vec![vec![false]]);
    }

    #[test]
    fn field_of_view_half_angle() {
        let env =
            Environment::new(bounds(), Pose::default(), Point::new(9.0, 9.0), vec![]).unwrap();
        let nodes = NodeSet {
            positions: vec![
                Point::new(9.0, 9.0),
                Point::from_angle(20f64.to_radians()) * 3.0,
                Point::from_angle(40f64.to_radians()) * 3.0,
            ],
            corners: vec![],
        };
        let pose = Pose::new(0.0, 0.0, 0.0);
        assert_eq!(
            visible_nodes(&env, pose, &nodes, 60f64.to_radians()),
            vec![1]
        );
        assert_eq!(visible_nodes(&env, pose, &nodes, TAU), vec![0, 1, 2]);
    }

    #[test]
    fn node_behind_wall_is_hidden() {
        let env = Environment::new(
            bounds(),
            Pose::default(),
            Point::new(5.0, 0.0),
            vec![Polygon::rect(2.0, -1.0, 3.0, 1.0)],
        )
        .unwrap();
        let nodes = extract_nodes(&env).unwrap();
        let seen = visible_nodes(&env, Pose::new(0.0, 0.0, 0.0), &nodes, PI / 3.0);
        assert!(!seen.contains(&0));
        assert!(seen.contains(&1) && seen.contains(&4));
    }

    #[test]
    fn outward_bisector_points_away_from_square() {
        let env = world(vec![unit_square()]);
        let nodes = extract_nodes(&env).unwrap();
        let b = nodes.corner(1).unwrap().outward_bisector();
        assert!((b.x + 0.5f64.sqrt()).abs() < 1e-12 && (b.y + 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn json_roundtrip_and_validation() {
        let env = world(vec![unit_square()]);
        let s = serde_json::to_string(&env).unwrap();
        assert!(s.contains("\"obstacles\":[[[-0.5,-0.5]"));
        let back: Environment = serde_json::from_str(&s).unwrap();
        assert_eq!(back, env);
        let bad = s.replace(
            "\"goal\":{\"x\":8.0,\"y\":0.0}",
            "\"goal\":{\"x\":0.0,\"y\":0.0}",
        );
        assert!(serde_json::from_str::<Environment>(&bad).is_err());
    }
}
