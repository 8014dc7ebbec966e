//! Run-log analysis: subgoal sequences, visible-node windows, corner-frame
//! segments, clustering of those segments into guidance primitives, and
//! scalar behaviour metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{visible_nodes, Environment, NodeSet};
use crate::geometry::{wrap_angle, Point, Pose, EPS};
use crate::simulator::RunLog;

/// Closest-approach radius (m) for assigning a log to a node.
pub const R_THRESH: f64 = 1.5;
/// Width (s) of the window used to accept a local distance minimum.
pub const MIN_WINDOW: f64 = 0.5;
/// Half-width (s) of corner segments: twice the speed time constant.
pub const SEGMENT_HALF_WIDTH: f64 = 2.26;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("segments have different time grids")]
    GridMismatch,
    #[error("cannot form {0} clusters from {1} segments")]
    TooManyClusters(usize, usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Visit {
    pub node: usize,
    /// Time of closest approach (s).
    pub t: f64,
    /// Distance at closest approach (m).
    pub dist: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedRun {
    pub run_id: usize,
    pub sequence: Vec<Visit>,
}

impl ParsedRun {
    /// Time at the goal, if the sequence ends there.
    pub fn goal_time(&self) -> Option<f64> {
        self.sequence.last().filter(|v| v.node == 0).map(|v| v.t)
    }

    pub fn nodes(&self) -> Vec<usize> {
        self.sequence.iter().map(|v| v.node).collect()
    }
}

fn log_dt(log: &RunLog) -> f64 {
    match log.samples.as_slice() {
        [a, b, ..] => b.t - a.t,
        _ => 0.0,
    }
}

/// Subgoal sequence of a run: every local minimum of the distance to a node
/// that falls within `r_thresh`, in time order. A minimum must hold over
/// `window` seconds (clipped at the ends of the log). Events at the same
/// sample keep the lowest node index. Consecutive minima of one node
/// collapse onto the closest when the log stays within `r_thresh` of it in
/// between; a node left and approached again counts twice.
pub fn parse_run(log: &RunLog, nodes: &NodeSet, r_thresh: f64, window: f64) -> ParsedRun {
    let n_s = log.samples.len();
    let dt = log_dt(log);
    let half = if dt > 0.0 {
        ((0.5 * window / dt).round() as usize).max(1)
    } else {
        1
    };
    let mut events: Vec<(usize, Visit)> = Vec::new();
    let dist: Vec<Vec<f64>> = (0..nodes.len())
        .map(|node| {
            let g = nodes.position(node);
            log.samples
                .iter()
                .map(|s| s.state.position().dist(g))
                .collect()
        })
        .collect();
    for (node, d) in dist.iter().enumerate() {
        for j in 0..n_s {
            if d[j] > r_thresh {
                continue;
            }
            let lo = j.saturating_sub(half);
            let hi = (j + half).min(n_s - 1);
            // strict on the left so a flat bottom yields one event
            let is_min = (lo..j).all(|m| d[m] > d[j]) && (j + 1..=hi).all(|m| d[m] >= d[j]);
            if is_min {
                events.push((
                    j,
                    Visit {
                        node,
                        t: log.samples[j].t,
                        dist: d[j],
                    },
                ));
            }
        }
    }
    events.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.node.cmp(&b.1.node)));
    let mut seq: Vec<Visit> = Vec::new();
    let mut seq_j: Vec<usize> = Vec::new();
    let mut last_j = usize::MAX;
    for (j, v) in events {
        if j == last_j {
            continue;
        }
        last_j = j;
        match (seq.last_mut(), seq_j.last_mut()) {
            (Some(prev), Some(pj))
                if prev.node == v.node && dist[v.node][*pj..=j].iter().all(|&x| x <= r_thresh) =>
            {
                if v.dist < prev.dist {
                    *prev = v;
                    *pj = j;
                }
            }
            _ => {
                seq.push(v);
                seq_j.push(j);
            }
        }
    }
    ParsedRun {
        run_id: log.run_id,
        sequence: seq,
    }
}

/// Union of the visible nodes over `[t_star - t_w/2, t_star + t_w/2]`.
pub fn vis_window(
    log: &RunLog,
    nodes: &NodeSet,
    env: &Environment,
    t_star: f64,
    t_w: f64,
    fov: f64,
) -> Vec<usize> {
    let lo = t_star - 0.5 * t_w - 1e-9;
    let hi = t_star + 0.5 * t_w + 1e-9;
    let mut seen = vec![false; nodes.len()];
    let in_window: Vec<_> = log
        .samples
        .iter()
        .filter(|s| s.t >= lo && s.t <= hi)
        .collect();
    let picked = if in_window.is_empty() {
        // window narrower than the sampling: use the nearest sample
        log.samples
            .iter()
            .min_by(|a, b| (a.t - t_star).abs().total_cmp(&(b.t - t_star).abs()))
            .into_iter()
            .collect()
    } else {
        in_window
    };
    for s in picked {
        for i in visible_nodes(env, s.state.pose(), nodes, fov) {
            seen[i] = true;
        }
    }
    (0..nodes.len()).filter(|&i| seen[i]).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentSample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerSegment {
    /// Node index of the corner.
    pub corner: usize,
    pub run_id: usize,
    pub reflected: bool,
    pub samples: Vec<SegmentSample>,
}

impl CornerSegment {
    pub fn half_width(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.t)
    }
}

/// Linear interpolation of position, heading and speed at time `t`.
fn interp(log: &RunLog, t: f64) -> (Pose, f64) {
    let s = &log.samples;
    let j = s.partition_point(|x| x.t <= t).clamp(1, s.len() - 1);
    let (a, b) = (&s[j - 1], &s[j]);
    let span = b.t - a.t;
    let f = if span > 0.0 {
        ((t - a.t) / span).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let psi = a.state.psi + f * wrap_angle(b.state.psi - a.state.psi);
    (
        Pose::new(
            a.state.x + f * (b.state.x - a.state.x),
            a.state.y + f * (b.state.y - a.state.y),
            psi,
        ),
        a.state.v + f * (b.state.v - a.state.v),
    )
}

/// Segment of `log` around its closest approach to corner node `visit.node`,
/// expressed in the corner frame: origin at the corner, the free-space wall
/// bisector along `+x`, mirrored if needed so the segment starts at `y > 0`.
/// Time runs over `[-T, T]` around the closest approach at the log's step.
/// `None` when the log does not cover the whole window or the node is the goal.
pub fn corner_frame_transform(
    log: &RunLog,
    nodes: &NodeSet,
    visit: &Visit,
    half_width: f64,
) -> Option<CornerSegment> {
    let meta = nodes.corner(visit.node)?;
    let dt = log_dt(log);
    if dt <= 0.0 {
        return None;
    }
    let t0 = log.samples.first()?.t;
    let t1 = log.samples.last()?.t;
    if visit.t - half_width < t0 - 1e-9 || visit.t + half_width > t1 + 1e-9 {
        return None;
    }
    let half = (half_width / dt).round() as i64;
    let c = nodes.position(visit.node);
    let rot = -meta.outward_bisector().angle();
    let raw: Vec<(f64, Point, f64, f64)> = (-half..=half)
        .map(|l| {
            let tc = l as f64 * dt;
            let (pose, v) = interp(log, visit.t + tc);
            let p = (pose.position() - c).rotate(rot);
            (tc, p, wrap_angle(pose.psi + rot), v)
        })
        .collect();
    let reflected = raw[0].1.y < 0.0;
    let sgn = if reflected { -1.0 } else { 1.0 };
    let m = raw.len();
    let samples = (0..m)
        .map(|l| {
            let (a, b) = (l.saturating_sub(1), (l + 1).min(m - 1));
            let omega = sgn * wrap_angle(raw[b].2 - raw[a].2) / ((b - a) as f64 * dt);
            SegmentSample {
                t: raw[l].0,
                x: raw[l].1.x,
                y: sgn * raw[l].1.y,
                v: raw[l].3,
                omega,
            }
        })
        .collect();
    Some(CornerSegment {
        corner: visit.node,
        run_id: log.run_id,
        reflected,
        samples,
    })
}

/// Every corner pass of a parsed run that yields a full segment.
pub fn extract_segments(
    log: &RunLog,
    parsed: &ParsedRun,
    nodes: &NodeSet,
    half_width: f64,
) -> Vec<CornerSegment> {
    parsed
        .sequence
        .iter()
        .filter_map(|v| corner_frame_transform(log, nodes, v, half_width))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeWeight {
    /// `1 - |t_c - T| / 2T`: zero at the start, one at the end.
    #[default]
    Printed,
    /// `1 - |t_c| / T`: peaked at the closest approach.
    CornerPeaked,
}

impl TimeWeight {
    pub fn at(self, tc: f64, half_width: f64) -> f64 {
        match self {
            TimeWeight::Printed => 1.0 - (tc - half_width).abs() / (2.0 * half_width),
            TimeWeight::CornerPeaked => 1.0 - tc.abs() / half_width,
        }
    }
}

impl std::str::FromStr for TimeWeight {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "printed" => Ok(TimeWeight::Printed),
            "corner_peaked" | "corner-peaked" => Ok(TimeWeight::CornerPeaked),
            other => Err(format!("unknown time weight `{other}`")),
        }
    }
}

fn same_grid(a: &CornerSegment, b: &CornerSegment) -> bool {
    a.samples.len() == b.samples.len()
        && a.samples
            .iter()
            .zip(&b.samples)
            .all(|(p, q)| (p.t - q.t).abs() <= 1e-9)
}

/// Time-weighted sum of pointwise distances between two segments.
pub fn segment_distance(
    a: &CornerSegment,
    b: &CornerSegment,
    weight: TimeWeight,
) -> Result<f64, AnalysisError> {
    if !same_grid(a, b) {
        return Err(AnalysisError::GridMismatch);
    }
    let tt = a.half_width();
    Ok(a.samples
        .iter()
        .zip(&b.samples)
        .map(|(p, q)| weight.at(p.t, tt) * (p.x - q.x).hypot(p.y - q.y))
        .sum())
}

/// Full symmetric matrix of [`segment_distance`].
pub fn distance_matrix(
    segments: &[CornerSegment],
    weight: TimeWeight,
) -> Result<Vec<Vec<f64>>, AnalysisError> {
    if segments.windows(2).any(|w| !same_grid(&w[0], &w[1])) {
        return Err(AnalysisError::GridMismatch);
    }
    let n = segments.len();
    Ok((0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if i == j {
                        0.0
                    } else {
                        segment_distance(&segments[i], &segments[j], weight).unwrap()
                    }
                })
                .collect()
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimitiveCluster {
    /// Indices into the clustered segment list, ascending.
    pub members: Vec<usize>,
    pub frequency: f64,
    pub mean: Vec<SegmentSample>,
    /// Weighted mean speed (m/s).
    pub v_mean: f64,
    /// Weighted mean of the pointwise speed spread (m/s).
    pub u_v: f64,
}

/// Average-linkage agglomeration of segments `0..n` from a distance
/// matrix. Returns member lists; among equally close pairs the one whose
/// clusters have the earliest members is merged first.
pub fn average_linkage(dist: &[Vec<f64>], n_clusters: usize) -> Vec<Vec<usize>> {
    let n = dist.len();
    let mut d = dist.to_vec();
    let mut members: Vec<Option<Vec<usize>>> = (0..n).map(|i| Some(vec![i])).collect();
    let mut alive = n;
    while alive > n_clusters.max(1) {
        let mut best: Option<(f64, usize, usize)> = None;
        for i in 0..n {
            if members[i].is_none() {
                continue;
            }
            for j in i + 1..n {
                if members[j].is_none() {
                    continue;
                }
                // slot index equals the earliest member, so (i, j) order is
                // the earliest-member order
                if best.is_none_or(|(b, _, _)| d[i][j] < b) {
                    best = Some((d[i][j], i, j));
                }
            }
        }
        let (_, i, j) = best.expect("two live clusters");
        let mj = members[j].take().unwrap();
        let ni = members[i].as_ref().unwrap().len() as f64;
        let nj = mj.len() as f64;
        for k in 0..n {
            if k != i && members[k].is_some() {
                let v = (ni * d[i][k] + nj * d[j][k]) / (ni + nj);
                d[i][k] = v;
                d[k][i] = v;
            }
        }
        let mi = members[i].as_mut().unwrap();
        mi.extend(mj);
        mi.sort_unstable();
        alive -= 1;
    }
    members.into_iter().flatten().collect()
}

/// Pointwise mean trajectory and the weighted speed statistics of a set of
/// segments on a shared grid. Spread uses the population convention;
/// time integrals use the trapezoid rule.
pub fn cluster_stats(
    members: &[&CornerSegment],
    weight: TimeWeight,
) -> (Vec<SegmentSample>, f64, f64) {
    let first = members[0];
    let m = members.len() as f64;
    let l = first.samples.len();
    let tt = first.half_width();
    let mut mean = Vec::with_capacity(l);
    let mut sigma = Vec::with_capacity(l);
    for idx in 0..l {
        let avg = |f: fn(&SegmentSample) -> f64| {
            members.iter().map(|s| f(&s.samples[idx])).sum::<f64>() / m
        };
        let vm = avg(|s| s.v);
        let var = members
            .iter()
            .map(|s| (s.samples[idx].v - vm).powi(2))
            .sum::<f64>()
            / m;
        sigma.push(var.sqrt());
        mean.push(SegmentSample {
            t: first.samples[idx].t,
            x: avg(|s| s.x),
            y: avg(|s| s.y),
            v: vm,
            omega: avg(|s| s.omega),
        });
    }
    let w: Vec<f64> = mean.iter().map(|s| weight.at(s.t, tt)).collect();
    let trapz = |f: &dyn Fn(usize) -> f64| -> f64 {
        (1..l)
            .map(|i| 0.5 * (f(i - 1) + f(i)) * (mean[i].t - mean[i - 1].t))
            .sum()
    };
    let wsum = trapz(&|i| w[i]);
    if l < 2 || wsum <= 0.0 {
        let v = mean.iter().map(|s| s.v).sum::<f64>() / l as f64;
        let u = sigma.iter().sum::<f64>() / l as f64;
        return (mean, v, u);
    }
    let v_mean = trapz(&|i| w[i] * mean[i].v) / wsum;
    let u_v = trapz(&|i| w[i] * sigma[i]) / wsum;
    (mean, v_mean, u_v)
}

/// Clusters segments into `n_clusters` guidance primitives ordered by
/// decreasing frequency (ties: earliest member first).
pub fn cluster_segments(
    segments: &[CornerSegment],
    n_clusters: usize,
    weight: TimeWeight,
) -> Result<Vec<PrimitiveCluster>, AnalysisError> {
    if n_clusters == 0 || n_clusters > segments.len() {
        return Err(AnalysisError::TooManyClusters(n_clusters, segments.len()));
    }
    let dist = distance_matrix(segments, weight)?;
    let mut groups = average_linkage(&dist, n_clusters);
    groups.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    let total = segments.len() as f64;
    Ok(groups
        .into_iter()
        .map(|members| {
            let refs: Vec<&CornerSegment> = members.iter().map(|&i| &segments[i]).collect();
            let (mean, v_mean, u_v) = cluster_stats(&refs, weight);
            PrimitiveCluster {
                frequency: members.len() as f64 / total,
                members,
                mean,
                v_mean,
                u_v,
            }
        })
        .collect())
}

/// Average pairwise segment distance between the members of two clusters.
pub fn linkage_distance(
    a: &[&CornerSegment],
    b: &[&CornerSegment],
    weight: TimeWeight,
) -> Result<f64, AnalysisError> {
    let mut sum = 0.0;
    for p in a {
        for q in b {
            sum += segment_distance(p, q, weight)?;
        }
    }
    Ok(sum / (a.len() * b.len()) as f64)
}

/// Greedy matching of `other` clusters onto `reference` clusters by
/// smallest linkage distance. Entry `j` is the reference index given to
/// `other[j]`, or `None` when the reference clusters ran out.
pub fn match_clusters(
    reference: &[PrimitiveCluster],
    reference_segments: &[CornerSegment],
    other: &[PrimitiveCluster],
    other_segments: &[CornerSegment],
    weight: TimeWeight,
) -> Result<Vec<Option<usize>>, AnalysisError> {
    let mut pairs = Vec::new();
    for (i, r) in reference.iter().enumerate() {
        let ra: Vec<&CornerSegment> = r.members.iter().map(|&m| &reference_segments[m]).collect();
        for (j, o) in other.iter().enumerate() {
            let ob: Vec<&CornerSegment> = o.members.iter().map(|&m| &other_segments[m]).collect();
            pairs.push((linkage_distance(&ra, &ob, weight)?, i, j));
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut used_ref = vec![false; reference.len()];
    let mut mapping = vec![None; other.len()];
    for (_, i, j) in pairs {
        if !used_ref[i] && mapping[j].is_none() {
            used_ref[i] = true;
            mapping[j] = Some(i);
        }
    }
    Ok(mapping)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BehaviorMetrics {
    /// Fraction of samples near corner passes at or above 90% of `v_max`.
    pub high_speed_frequency: f64,
    /// Mean closest-approach distance over corner passes (m).
    pub mean_r_min: f64,
    /// Fraction of positions within the proximity radius of a corner.
    pub proximity_frequency: f64,
    pub corner_passes: usize,
}

/// Fraction of `points` within `radius` of any corner node.
pub fn proximity_frequency(points: &[Point], nodes: &NodeSet, radius: f64) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let near = points
        .iter()
        .filter(|p| (1..nodes.len()).any(|i| nodes.position(i).dist(**p) <= radius + EPS))
        .count();
    near as f64 / points.len() as f64
}

/// Speed and proximity statistics over a set of logs. Samples within
/// `half_width` of a corner pass count towards the high-speed frequency.
pub fn behavior_metrics(
    logs: &[RunLog],
    nodes: &NodeSet,
    v_max: f64,
    r_thresh: f64,
    half_width: f64,
    proximity_radius: f64,
) -> BehaviorMetrics {
    let mut fast = 0usize;
    let mut counted = 0usize;
    let mut r_sum = 0.0;
    let mut passes = 0usize;
    let mut points = Vec::new();
    for log in logs {
        let parsed = parse_run(log, nodes, r_thresh, MIN_WINDOW);
        let mut near = vec![false; log.samples.len()];
        for v in parsed.sequence.iter().filter(|v| v.node != 0) {
            passes += 1;
            r_sum += v.dist;
            for (j, s) in log.samples.iter().enumerate() {
                if (s.t - v.t).abs() <= half_width + 1e-9 {
                    near[j] = true;
                }
            }
        }
        for (j, s) in log.samples.iter().enumerate() {
            if near[j] {
                counted += 1;
                if s.state.v >= 0.9 * v_max - 1e-12 {
                    fast += 1;
                }
            }
        }
        points.extend(log.samples.iter().map(|s| s.state.position()));
    }
    BehaviorMetrics {
        high_speed_frequency: if counted > 0 {
            fast as f64 / counted as f64
        } else {
            0.0
        },
        mean_r_min: if passes > 0 {
            r_sum / passes as f64
        } else {
            0.0
        },
        proximity_frequency: proximity_frequency(&points, nodes, proximity_radius),
        corner_passes: passes,
    }
}

#[cfg(test)]
mod tests {
    use std::f64::consts::{FRAC_PI_4, PI};

    use super::*;
    use crate::dynamics::{ControlInput, VehicleState};
    use crate::env::{extract_nodes, Bounds, CornerMeta, Polygon};
    use crate::simulator::{LogSample, Outcome};

    const DT: f64 = 0.02;

    fn log_of(states: impl Iterator<Item = (f64, Pose, f64)>) -> RunLog {
        RunLog {
            run_id: 0,
            samples: states
                .map(|(t, p, v)| LogSample {
                    t,
                    state: VehicleState {
                        x: p.x,
                        y: p.y,
                        psi: p.psi,
                        v,
                    },
                    u: ControlInput::ZERO,
                    subgoal: None,
                })
                .collect(),
            outcome: Outcome::Timeout,
            flight_time: None,
        }
    }

    /// Straight motion at `speed` along `dir` through `p0` (reached at t = 0)
    /// sampled over `[t0, t1]`.
    fn straight(p0: Point, dir: f64, speed: f64, t0: f64, t1: f64) -> RunLog {
        let (a, b) = ((t0 / DT).round() as i64, (t1 / DT).round() as i64);
        log_of((a..=b).map(|i| {
            let t = i as f64 * DT;
            let p = p0 + Point::from_angle(dir) * (speed * t);
            (t - t0, Pose::at(p, dir), speed)
        }))
    }

    fn node_set(positions: Vec<Point>) -> NodeSet {
        let corners = (1..positions.len())
            .map(|i| CornerMeta {
                polygon: 0,
                vertex: i,
                wall_dirs: [PI, -PI / 2.0],
            })
            .collect();
        NodeSet { positions, corners }
    }

    fn open_world() -> Environment {
        let b = Bounds {
            x_min: -20.0,
            y_min: -20.0,
            x_max: 20.0,
            y_max: 20.0,
        };
        Environment::new(b, Pose::new(-15.0, 0.0, 0.0), Point::new(15.0, 0.0), vec![]).unwrap()
    }

    #[test]
    fn straight_pass_then_goal() {
        let nodes = node_set(vec![
            Point::new(9.0, 0.0),
            Point::new(30.0, 30.0),
            Point::new(30.0, -30.0),
            Point::new(2.0, 0.3),
        ]);
        let log = straight(Point::new(0.0, 0.0), 0.0, 1.0, 0.0, 10.0);
        let seq = parse_run(&log, &nodes, R_THRESH, MIN_WINDOW).sequence;
        assert_eq!(seq.len(), 2);
        assert_eq!((seq[0].node, seq[1].node), (3, 0));
        assert!((seq[0].t - 2.0).abs() < 1e-9 && (seq[1].t - 9.0).abs() < 1e-9);
        assert!((seq[0].dist - 0.3).abs() < 1e-9);
    }

    #[test]
    fn far_log_parses_empty() {
        let nodes = node_set(vec![Point::new(9.0, 5.0), Point::new(2.0, -4.0)]);
        let log = straight(Point::new(0.0, 0.0), 0.0, 1.0, 0.0, 10.0);
        assert!(parse_run(&log, &nodes, R_THRESH, MIN_WINDOW)
            .sequence
            .is_empty());
    }

    #[test]
    fn separate_passes_count_twice() {
        let nodes = node_set(vec![Point::new(30.0, 0.0), Point::new(2.5, 0.3)]);
        let out = (0..=250).map(|i| {
            let t = i as f64 * DT;
            (t, Pose::new(t, 0.0, 0.0), 1.0)
        });
        let back = (1..=250).map(|i| {
            let t = 5.0 + i as f64 * DT;
            (t, Pose::new(5.0 - i as f64 * DT, 0.0, PI), 1.0)
        });
        let log = log_of(out.chain(back));
        let seq = parse_run(&log, &nodes, R_THRESH, MIN_WINDOW);
        assert_eq!(seq.nodes(), vec![1, 1]);
        assert!((seq.sequence[0].t - 2.5).abs() < 1e-9);
        assert!((seq.sequence[1].t - 7.5).abs() < 1e-9);
    }

    #[test]
    fn lingering_near_a_node_counts_once() {
        // two dips towards the node without leaving the threshold disc
        let nodes = node_set(vec![Point::new(30.0, 0.0), Point::new(0.0, 0.0)]);
        let log = log_of((0..=400).map(|i| {
            let t = i as f64 * DT;
            let r = 0.8 + 0.4 * (t * PI / 2.0).cos();
            (t, Pose::new(r, 0.0, 0.0), 0.5)
        }));
        let seq = parse_run(&log, &nodes, R_THRESH, MIN_WINDOW);
        assert_eq!(seq.nodes(), vec![1]);
        assert!((seq.sequence[0].dist - 0.4).abs() < 1e-9);
    }

    #[test]
    fn vis_window_follows_heading_sweep() {
        let env = open_world();
        let nodes = node_set(vec![Point::new(15.0, 0.0), Point::new(5.0, 0.0)]);
        let fov = PI / 3.0;
        // the node enters the field of view at t = 1.3
        let log = log_of((0..=150).map(|i| {
            let t = i as f64 * DT;
            (t, Pose::new(0.0, 0.0, t - 1.3 - fov / 2.0), 0.0)
        }));
        assert!(vis_window(&log, &nodes, &env, 1.0, 1.0, fov).contains(&1));
        assert!(!vis_window(&log, &nodes, &env, 1.0, 0.2, fov).contains(&1));
        assert_eq!(
            vis_window(&log, &nodes, &env, 2.0, 0.0, fov),
            visible_nodes(&env, log.samples[100].state.pose(), &nodes, fov)
        );
    }

    #[test]
    fn stationary_pose_sees_node_in_view() {
        let env = open_world();
        let nodes = node_set(vec![Point::new(15.0, 0.0), Point::new(5.0, 1.0)]);
        let log = log_of((0..=50).map(|i| (i as f64 * DT, Pose::new(0.0, 0.0, 0.0), 0.0)));
        for tw in [0.0, 0.3, 1.0, 5.0] {
            assert_eq!(
                vis_window(&log, &nodes, &env, 0.5, tw, PI / 3.0),
                vec![0, 1]
            );
        }
    }

    fn box_world() -> (Environment, NodeSet) {
        let b = Bounds {
            x_min: -20.0,
            y_min: -20.0,
            x_max: 20.0,
            y_max: 20.0,
        };
        let env = Environment::new(
            b,
            Pose::new(-15.0, 0.0, 0.0),
            Point::new(15.0, 0.0),
            vec![Polygon::rect(-1.0, -1.0, 1.0, 1.0)],
        )
        .unwrap();
        let nodes = extract_nodes(&env).unwrap();
        (env, nodes)
    }

    fn corner_at(nodes: &NodeSet, p: Point) -> usize {
        let k = nodes.nearest(p);
        assert!(nodes.position(k).dist(p) < 1e-9);
        k
    }

    #[test]
    fn square_corner_bisector_is_diagonal() {
        let (_, nodes) = box_world();
        let k = corner_at(&nodes, Point::new(1.0, 1.0));
        let b = nodes.corner(k).unwrap().outward_bisector();
        assert!((b.angle() - FRAC_PI_4).abs() < 1e-12);
    }

    #[test]
    fn pass_along_bisector_maps_to_x_axis() {
        let (_, nodes) = box_world();
        let k = corner_at(&nodes, Point::new(1.0, 1.0));
        let log = straight(Point::new(1.0, 1.0), FRAC_PI_4, 2.0, -4.0, 4.0);
        let visit = Visit {
            node: k,
            t: 4.0,
            dist: 0.0,
        };
        let seg = corner_frame_transform(&log, &nodes, &visit, SEGMENT_HALF_WIDTH).unwrap();
        let mid = seg.samples.len() / 2;
        assert_eq!(seg.samples.len(), 2 * 113 + 1);
        assert!((seg.samples[0].t + SEGMENT_HALF_WIDTH).abs() < 1e-9);
        assert!((seg.half_width() - SEGMENT_HALF_WIDTH).abs() < 1e-9);
        assert!(seg.samples[mid].t.abs() < 1e-12);
        assert!(seg.samples[mid].x.abs() < 1e-9 && seg.samples[mid].y.abs() < 1e-9);
        for s in &seg.samples {
            assert!(s.y.abs() < 1e-9);
            assert!((s.x - 2.0 * s.t).abs() < 1e-9);
            assert!(s.omega.abs() < 1e-9);
        }
    }

    #[test]
    fn sideways_pass_starts_on_positive_side() {
        let (_, nodes) = box_world();
        let k = corner_at(&nodes, Point::new(1.0, 1.0));
        let c = Point::new(1.0, 1.0) + Point::from_angle(FRAC_PI_4) * 0.5;
        // moving across the bisector towards -y in the corner frame
        let log = straight(c, FRAC_PI_4 - PI / 2.0, 3.0, -3.0, 3.0);
        let visit = Visit {
            node: k,
            t: 3.0,
            dist: 0.5,
        };
        let seg = corner_frame_transform(&log, &nodes, &visit, SEGMENT_HALF_WIDTH).unwrap();
        assert!(!seg.reflected);
        assert!(seg.samples[0].y > 0.0);
        for s in &seg.samples {
            assert!((s.x - 0.5).abs() < 1e-9);
            assert!((s.y + 3.0 * s.t).abs() < 1e-9);
        }
        // the opposite direction is reflected onto the same segment
        let back = straight(c, FRAC_PI_4 + PI / 2.0, 3.0, -3.0, 3.0);
        let other = corner_frame_transform(&back, &nodes, &visit, SEGMENT_HALF_WIDTH).unwrap();
        assert!(other.reflected);
        for (a, b) in seg.samples.iter().zip(&other.samples) {
            assert!((a.x - b.x).abs() < 1e-9 && (a.y - b.y).abs() < 1e-9);
        }
    }

    #[test]
    fn mirrored_world_gives_same_segment() {
        let (env, nodes) = box_world();
        let k = corner_at(&nodes, Point::new(1.0, 1.0));
        // a curving pass around the corner
        let log = log_of((0..=300).map(|i| {
            let t = i as f64 * DT;
            let a = -1.2 + 0.8 * t;
            let p = Point::new(1.0, 1.0) + Point::from_angle(a) * (0.6 + 0.1 * (t - 3.0).powi(2));
            (t, Pose::at(p, a + PI / 2.0), 0.5 + 0.2 * t)
        }));
        let parsed = parse_run(&log, &nodes, R_THRESH, MIN_WINDOW);
        let visit = *parsed.sequence.iter().find(|v| v.node == k).unwrap();
        let seg = corner_frame_transform(&log, &nodes, &visit, 1.5).unwrap();

        let menv = env.mirrored_x(0.0);
        let mnodes = extract_nodes(&menv).unwrap();
        let mk = corner_at(&mnodes, Point::new(-1.0, 1.0));
        let mlog = log_of(log.samples.iter().map(|s| {
            (
                s.t,
                Pose::new(-s.state.x, s.state.y, wrap_angle(PI - s.state.psi)),
                s.state.v,
            )
        }));
        let mvisit = Visit { node: mk, ..visit };
        let mseg = corner_frame_transform(&mlog, &mnodes, &mvisit, 1.5).unwrap();
        assert_ne!(seg.reflected, mseg.reflected);
        for (a, b) in seg.samples.iter().zip(&mseg.samples) {
            assert!((a.x - b.x).abs() < 1e-9);
            assert!((a.y - b.y).abs() < 1e-9);
            assert!((a.v - b.v).abs() < 1e-12);
            assert!((a.omega - b.omega).abs() < 1e-9);
        }
    }

    #[test]
    fn short_log_yields_no_segment() {
        let (_, nodes) = box_world();
        let k = corner_at(&nodes, Point::new(1.0, 1.0));
        let log = straight(Point::new(1.0, 1.0), FRAC_PI_4, 2.0, -1.0, 4.0);
        let visit = Visit {
            node: k,
            t: 1.0,
            dist: 0.0,
        };
        assert!(corner_frame_transform(&log, &nodes, &visit, SEGMENT_HALF_WIDTH).is_none());
        let goal = Visit {
            node: 0,
            t: 4.0,
            dist: 0.0,
        };
        assert!(corner_frame_transform(&log, &nodes, &goal, 1.0).is_none());
    }

    fn segment(points: impl Fn(f64) -> (f64, f64, f64), half: f64) -> CornerSegment {
        let m = (half / DT).round() as i64;
        CornerSegment {
            corner: 1,
            run_id: 0,
            reflected: false,
            samples: (-m..=m)
                .map(|l| {
                    let t = l as f64 * DT;
                    let (x, y, v) = points(t);
                    SegmentSample {
                        t,
                        x,
                        y,
                        v,
                        omega: 0.0,
                    }
                })
                .collect(),
        }
    }

    #[test]
    fn printed_weight_runs_from_zero_to_one() {
        let w = TimeWeight::Printed;
        assert_eq!(w.at(-2.0, 2.0), 0.0);
        assert_eq!(w.at(0.0, 2.0), 0.5);
        assert_eq!(w.at(2.0, 2.0), 1.0);
        let p = TimeWeight::CornerPeaked;
        assert_eq!(
            (p.at(-2.0, 2.0), p.at(0.0, 2.0), p.at(2.0, 2.0)),
            (0.0, 1.0, 0.0)
        );
    }

    #[test]
    fn distance_of_constant_offset_is_weight_mass() {
        let a = segment(|t| (1.0 + t * t, -2.0 * t, 3.0), 1.0);
        let b = segment(|t| (2.0 + t * t, -2.0 * t, 3.0), 1.0);
        assert_eq!(segment_distance(&a, &a, TimeWeight::Printed).unwrap(), 0.0);
        for w in [TimeWeight::Printed, TimeWeight::CornerPeaked] {
            let mass: f64 = a.samples.iter().map(|s| w.at(s.t, 1.0)).sum();
            let d = segment_distance(&a, &b, w).unwrap();
            assert!((d - mass).abs() < 1e-9);
            assert_eq!(d, segment_distance(&b, &a, w).unwrap());
        }
        // 50 samples per side plus the centre, weights 0..1 in 1/100 steps
        let mass: f64 = a
            .samples
            .iter()
            .map(|s| TimeWeight::Printed.at(s.t, 1.0))
            .sum();
        assert!((mass - 50.5).abs() < 1e-9);
    }

    #[test]
    fn grid_mismatch_is_an_error() {
        let a = segment(|_| (0.0, 0.0, 1.0), 1.0);
        let b = segment(|_| (0.0, 0.0, 1.0), 0.5);
        assert_eq!(
            segment_distance(&a, &b, TimeWeight::Printed),
            Err(AnalysisError::GridMismatch)
        );
        assert!(distance_matrix(&[a, b], TimeWeight::Printed).is_err());
    }

    #[test]
    fn constant_speed_cluster_stats() {
        let a = segment(|_| (0.0, 0.0, 4.0), 1.0);
        let (_, v, u) = cluster_stats(&[&a, &a], TimeWeight::Printed);
        assert!((v - 4.0).abs() < 1e-12 && u.abs() < 1e-12);
        let (three, five) = (
            segment(|_| (0.0, 0.0, 3.0), 1.0),
            segment(|_| (0.0, 0.0, 5.0), 1.0),
        );
        let (mean, v, u) = cluster_stats(&[&three, &five], TimeWeight::Printed);
        assert!((v - 4.0).abs() < 1e-12 && (u - 1.0).abs() < 1e-12);
        assert!(mean.iter().all(|s| (s.v - 4.0).abs() < 1e-12));
        let (_, _, u) = cluster_stats(&[&three], TimeWeight::CornerPeaked);
        assert_eq!(u, 0.0);
    }

    /// Three well separated families with small deterministic wobble.
    fn families() -> (Vec<CornerSegment>, Vec<usize>) {
        let mut segs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..12 {
            let f = i % 3;
            let e = 0.01 * i as f64;
            segs.push(segment(
                move |t| match f {
                    0 => (1.0 + e + 0.5 * t * t, -2.0 * t, 3.0),
                    1 => (3.0 - e, -3.0 * t + e, 4.0),
                    _ => (0.5 + t * t, -t - e, 2.0),
                },
                1.0,
            ));
            labels.push(f);
        }
        (segs, labels)
    }

    #[test]
    fn clusters_recover_families() {
        let (segs, labels) = families();
        let clusters = cluster_segments(&segs, 3, TimeWeight::Printed).unwrap();
        assert_eq!(clusters.len(), 3);
        for c in &clusters {
            assert!(c.members.iter().all(|&m| labels[m] == labels[c.members[0]]));
            assert_eq!(c.members.len(), 4);
            assert!((c.frequency - 1.0 / 3.0).abs() < 1e-12);
        }
        // equal sizes: ordered by first member
        assert_eq!(
            clusters.iter().map(|c| c.members[0]).collect::<Vec<_>>(),
            vec![0, 1, 2]
        );
        assert!((clusters[1].v_mean - 4.0).abs() < 1e-12);
    }

    #[test]
    fn as_many_clusters_as_segments_gives_singletons() {
        let (segs, _) = families();
        let clusters = cluster_segments(&segs, segs.len(), TimeWeight::Printed).unwrap();
        assert!(clusters
            .iter()
            .all(|c| c.members.len() == 1 && c.u_v == 0.0));
        let total: f64 = clusters.iter().map(|c| c.frequency).sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert_eq!(
            cluster_segments(&segs, 13, TimeWeight::Printed),
            Err(AnalysisError::TooManyClusters(13, 12))
        );
        assert!(cluster_segments(&segs, 0, TimeWeight::Printed).is_err());
    }

    #[test]
    fn matching_self_and_permuted() {
        let (segs, _) = families();
        let clusters = cluster_segments(&segs, 3, TimeWeight::Printed).unwrap();
        let w = TimeWeight::Printed;
        assert_eq!(
            match_clusters(&clusters, &segs, &clusters, &segs, w).unwrap(),
            vec![Some(0), Some(1), Some(2)]
        );
        let perm = [2, 0, 1];
        let permuted: Vec<PrimitiveCluster> = perm.iter().map(|&i| clusters[i].clone()).collect();
        let mapping = match_clusters(&clusters, &segs, &permuted, &segs, w).unwrap();
        assert_eq!(mapping, perm.iter().map(|&i| Some(i)).collect::<Vec<_>>());
        // more clusters on the other side than in the reference
        let mapping = match_clusters(&clusters[..2], &segs, &clusters, &segs, w).unwrap();
        assert_eq!(mapping, vec![Some(0), Some(1), None]);
    }

    #[test]
    fn linkage_merges_closest_pair_first() {
        let d = vec![
            vec![0.0, 1.0, 5.0, 6.0],
            vec![1.0, 0.0, 4.0, 7.0],
            vec![5.0, 4.0, 0.0, 2.0],
            vec![6.0, 7.0, 2.0, 0.0],
        ];
        assert_eq!(average_linkage(&d, 3), vec![vec![0, 1], vec![2], vec![3]]);
        assert_eq!(average_linkage(&d, 2), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(average_linkage(&d, 1), vec![vec![0, 1, 2, 3]]);
        // tie between (0,1) and (2,3): earliest members first
        let t = vec![
            vec![0.0, 1.0, 9.0, 9.0],
            vec![1.0, 0.0, 9.0, 9.0],
            vec![9.0, 9.0, 0.0, 1.0],
            vec![9.0, 9.0, 1.0, 0.0],
        ];
        assert_eq!(average_linkage(&t, 3), vec![vec![0, 1], vec![2], vec![3]]);
    }

    #[test]
    fn behaviour_of_fast_straight_pass() {
        let nodes = node_set(vec![Point::new(50.0, 0.0), Point::new(10.0, 0.5)]);
        let log = straight(Point::new(0.0, 0.0), 0.0, 5.0, 0.0, 4.0);
        let m = behavior_metrics(&[log], &nodes, 5.0, R_THRESH, SEGMENT_HALF_WIDTH, 1.0);
        assert_eq!(m.corner_passes, 1);
        assert!((m.mean_r_min - 0.5).abs() < 1e-9);
        assert_eq!(m.high_speed_frequency, 1.0);
        assert!(m.proximity_frequency > 0.0 && m.proximity_frequency < 1.0);
    }

    #[test]
    fn proximity_counts_points_near_corners() {
        let nodes = node_set(vec![Point::new(0.0, 0.0), Point::new(5.0, 5.0)]);
        assert_eq!(proximity_frequency(&[], &nodes, 1.0), 0.0);
        // the goal is not a corner
        assert_eq!(
            proximity_frequency(&[Point::new(0.0, 0.0)], &nodes, 1.0),
            0.0
        );
        let pts = [
            Point::new(5.5, 5.0),
            Point::new(6.0, 5.0),
            Point::new(9.0, 9.0),
            Point::new(5.0, 4.2),
        ];
        assert_eq!(proximity_frequency(&pts, &nodes, 1.0), 0.75);
    }

    #[test]
    fn parsed_run_json_round_trip() {
        let nodes = node_set(vec![Point::new(9.0, 0.0), Point::new(2.0, 0.3)]);
        let log = straight(Point::new(0.0, 0.0), 0.0, 1.0, 0.0, 10.0);
        let parsed = parse_run(&log, &nodes, R_THRESH, MIN_WINDOW);
        let s = serde_json::to_string(&parsed).unwrap();
        assert_eq!(serde_json::from_str::<ParsedRun>(&s).unwrap(), parsed);
        assert_eq!(parsed.goal_time(), Some(parsed.sequence[1].t));
    }
}
