#![allow(dead_code)]

use std::f64::consts::PI;

use rand::Rng;
use subgoal_core::env::{Bounds, Environment, Polygon};
use subgoal_core::geometry::{dist_to_ring, segments_touch, strictly_inside, Point, Pose};

pub fn demo_world() -> Environment {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../worlds/demo.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn polygons_apart(a: &Polygon, b: &Polygon, gap: f64) -> bool {
    let n = a.vertices.len();
    let m = b.vertices.len();
    for i in 0..n {
        for j in 0..m {
            if segments_touch(a.vertex(i), a.next(i), b.vertex(j), b.next(j)) {
                return false;
            }
        }
    }
    a.vertices
        .iter()
        .all(|&v| !strictly_inside(v, &b.vertices) && dist_to_ring(v, &b.vertices) >= gap)
        && b.vertices
            .iter()
            .all(|&v| !strictly_inside(v, &a.vertices) && dist_to_ring(v, &a.vertices) >= gap)
}

/// A 60 x 40 m world with two to four well separated rectangles between a
/// start on the left and a goal on the right.
pub fn random_world(rng: &mut impl Rng, rotated: bool) -> Environment {
    let bounds = Bounds {
        x_min: 0.0,
        y_min: 0.0,
        x_max: 60.0,
        y_max: 40.0,
    };
    loop {
        let start = Point::new(3.0, rng.gen_range(6.0..34.0));
        let goal = Point::new(57.0, rng.gen_range(6.0..34.0));
        let want = rng.gen_range(2..=4);
        let mut obstacles: Vec<Polygon> = Vec::new();
        for _ in 0..200 {
            if obstacles.len() == want {
                break;
            }
            let c = Point::new(rng.gen_range(12.0..48.0), rng.gen_range(7.0..33.0));
            let (hw, hh) = (rng.gen_range(1.5..4.0), rng.gen_range(1.5..5.0));
            let th = if rotated { rng.gen_range(0.0..PI) } else { 0.0 };
            let verts: Vec<Point> = [(-hw, -hh), (hw, -hh), (hw, hh), (-hw, hh)]
                .iter()
                .map(|&(x, y)| c + Point::new(x, y).rotate(th))
                .collect();
            if verts
                .iter()
                .any(|v| v.x < 3.0 || v.x > 57.0 || v.y < 3.0 || v.y > 37.0)
            {
                continue;
            }
            let poly = Polygon::new(verts);
            if [start, goal]
                .iter()
                .any(|&p| dist_to_ring(p, &poly.vertices) < 4.0)
            {
                continue;
            }
            if obstacles.iter().all(|o| polygons_apart(o, &poly, 4.0)) {
                obstacles.push(poly);
            }
        }
        if let Ok(env) = Environment::new(bounds, Pose::at(start, 0.0), goal, obstacles) {
            return env;
        }
    }
}

/// Uniform free position inside the bounds.
pub fn random_free_pose(rng: &mut impl Rng, env: &Environment) -> Pose {
    let b = env.bounds();
    loop {
        let p = Point::new(
            rng.gen_range(b.x_min..b.x_max),
            rng.gen_range(b.y_min..b.y_max),
        );
        if env.is_free(p)
            && env
                .obstacles()
                .iter()
                .all(|o| !o.vertices.iter().any(|v| v.dist(p) < 1e-6))
        {
            return Pose::at(p, rng.gen_range(-PI..PI));
        }
    }
}
