//! Shortest paths for a forward-only, bounded-curvature planar vehicle.
//!
//! Lengths follow the normalized closed forms for the six admissible words
//! (LSL, RSR, LSR, RSL, RLR, LRL); the shortest feasible word wins.

use serde::{Deserialize, Serialize};

use crate::geometry::{mod2pi, Point, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Turn {
    Left,
    Straight,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DubinsWord {
    Lsl,
    Rsr,
    Lsr,
    Rsl,
    Rlr,
    Lrl,
}

impl DubinsWord {
    pub const ALL: [DubinsWord; 6] = [
        DubinsWord::Lsl,
        DubinsWord::Rsr,
        DubinsWord::Lsr,
        DubinsWord::Rsl,
        DubinsWord::Rlr,
        DubinsWord::Lrl,
    ];

    pub fn turns(self) -> [Turn; 3] {
        use Turn::*;
        match self {
            DubinsWord::Lsl => [Left, Straight, Left],
            DubinsWord::Rsr => [Right, Straight, Right],
            DubinsWord::Lsr => [Left, Straight, Right],
            DubinsWord::Rsl => [Right, Straight, Left],
            DubinsWord::Rlr => [Right, Left, Right],
            DubinsWord::Lrl => [Left, Right, Left],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath {
    pub start: Pose,
    pub radius: f64,
    pub word: DubinsWord,
    /// Segment lengths in units of the turning radius (arcs: radians).
    pub params: [f64; 3],
}

impl DubinsPath {
    pub fn length(&self) -> f64 {
        self.params.iter().sum::<f64>() * self.radius
    }

    /// Pose reached after travelling arc length `s` from the start.
    pub fn pose_at(&self, s: f64) -> Pose {
        let mut pose = self.start;
        let mut left = s.max(0.0) / self.radius;
        for (turn, &seg) in self.word.turns().iter().zip(self.params.iter()) {
            let d = left.min(seg);
            pose = advance(pose, *turn, d, self.radius);
            left -= d;
            if left <= 0.0 {
                break;
            }
        }
        pose
    }

    /// Poses sampled every `ds` or finer, including both endpoints.
    pub fn sample(&self, ds: f64) -> Vec<Pose> {
        let len = self.length();
        let n = ((len / ds).ceil() as usize).max(1);
        (0..=n)
            .map(|i| self.pose_at(len * i as f64 / n as f64))
            .collect()
    }

    /// Polyline through the sampled positions.
    pub fn polyline(&self, ds: f64) -> Vec<Point> {
        self.sample(ds).iter().map(|p| p.position()).collect()
    }
}

/// Moves along one primitive for `d` (radians for arcs, radii for straights).
fn advance(p: Pose, turn: Turn, d: f64, radius: f64) -> Pose {
    let (x, y, psi) = (p.x, p.y, p.psi);
    match turn {
        Turn::Left => Pose::new(
            x + radius * ((psi + d).sin() - psi.sin()),
            y + radius * (psi.cos() - (psi + d).cos()),
            psi + d,
        ),
        Turn::Right => Pose::new(
            x + radius * (psi.sin() - (psi - d).sin()),
            y + radius * ((psi - d).cos() - psi.cos()),
            psi - d,
        ),
        Turn::Straight => Pose::new(x + radius * d * psi.cos(), y + radius * d * psi.sin(), psi),
    }
}

/// Normalized segment parameters of one word, or `None` when infeasible.
fn word_params(word: DubinsWord, alpha: f64, beta: f64, d: f64) -> Option<[f64; 3]> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let c_ab = (alpha - beta).cos();
    match word {
        DubinsWord::Lsl => {
            let p2 = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sa - sb);
            if p2 < 0.0 {
                return None;
            }
            let tmp = (cb - ca).atan2(d + sa - sb);
            Some([mod2pi(tmp - alpha), p2.sqrt(), mod2pi(beta - tmp)])
        }
        DubinsWord::Rsr => {
            let p2 = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sb - sa);
            if p2 < 0.0 {
                return None;
            }
            let tmp = (ca - cb).atan2(d - sa + sb);
            Some([mod2pi(alpha - tmp), p2.sqrt(), mod2pi(tmp - beta)])
        }
        DubinsWord::Lsr => {
            let p2 = -2.0 + d * d + 2.0 * c_ab + 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(tmp - alpha), p, mod2pi(tmp - mod2pi(beta))])
        }
        DubinsWord::Rsl => {
            let p2 = d * d - 2.0 + 2.0 * c_ab - 2.0 * d * (sa + sb);
            if p2 < 0.0 {
                return None;
            }
            let p = p2.sqrt();
            let tmp = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(alpha - tmp), p, mod2pi(beta - tmp)])
        }
        DubinsWord::Rlr => {
            let tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(std::f64::consts::TAU - tmp.acos());
            let t = mod2pi(alpha - (ca - cb).atan2(d - sa + sb) + p / 2.0);
            Some([t, p, mod2pi(alpha - beta - t + p)])
        }
        DubinsWord::Lrl => {
            let tmp = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0;
            if tmp.abs() > 1.0 {
                return None;
            }
            let p = mod2pi(std::f64::consts::TAU - tmp.acos());
            let t = mod2pi(-alpha - (ca - cb).atan2(d + sa - sb) + p / 2.0);
            Some([t, p, mod2pi(mod2pi(beta) - alpha - t + p)])
        }
    }
}

/// Shortest path of the given word, if that word is feasible.
pub fn dubins_word_path(a: Pose, b: Pose, radius: f64, word: DubinsWord) -> Option<DubinsPath> {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let d = dx.hypot(dy) / radius;
    let theta = if d > 0.0 { dy.atan2(dx) } else { 0.0 };
    let alpha = mod2pi(a.psi - theta);
    let beta = mod2pi(b.psi - theta);
    word_params(word, alpha, beta, d).map(|params| DubinsPath {
        start: a,
        radius,
        word,
        params,
    })
}

/// Shortest forward path from `a` to `b` with minimum turning radius `radius`.
pub fn dubins_shortest_path(a: Pose, b: Pose, radius: f64) -> DubinsPath {
    assert!(radius > 0.0, "turning radius must be positive");
    DubinsWord::ALL
        .iter()
        .filter_map(|&w| dubins_word_path(a, b, radius, w))
        .min_by(|p, q| p.length().total_cmp(&q.length()))
        .expect("a CSC word is always feasible")
}
