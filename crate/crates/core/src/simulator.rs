//! Closed-loop learning agent: perceives visible nodes, picks subgoals from
//! its knowledge or by exploring, steers the vehicle through them and learns
//! from every run it completes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{parse_run, ParsedRun, MIN_WINDOW, R_THRESH};
use crate::decision::{
    classify_case, predict_next_node, DecisionCase, DecisionParams, DecisionRecord,
};
use crate::dynamics::{step, ControlInput, VehicleParams, VehicleState};
use crate::env::{extract_nodes, visible_nodes, EnvError, Environment, NodeSet};
use crate::geometry::{dist_to_ring, strictly_inside, wrap_angle, Point, Pose, EPS};
use crate::knowledge::KnowledgeBase;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSample {
    pub t: f64,
    pub state: VehicleState,
    pub u: ControlInput,
    pub subgoal: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    GoalReached,
    Timeout,
    Collision,
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::GoalReached => "goal_reached",
            Outcome::Timeout => "timeout",
            Outcome::Collision => "collision",
        }
    }
}

impl std::str::FromStr for Outcome {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "goal_reached" => Ok(Outcome::GoalReached),
            "timeout" => Ok(Outcome::Timeout),
            "collision" => Ok(Outcome::Collision),
            other => Err(format!("unknown outcome `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub run_id: usize,
    pub samples: Vec<LogSample>,
    pub outcome: Outcome,
    pub flight_time: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteeringParams {
    /// Heading gain (1/s): `u_lat = K * heading_error * v`.
    pub heading_gain: f64,
    /// Speed tracking gain (1/s).
    pub speed_gain: f64,
    /// Lateral room (m) allowed for swinging wide in a turn.
    pub clearance: f64,
    /// Lowest planned speed (m/s).
    pub min_speed: f64,
    /// Distance (m) of the aim point from a corner along its bisector.
    pub corner_offset: f64,
    /// Look-ahead along the course: at least `lookahead_min` (m), else
    /// `lookahead_time` (s) of travel.
    pub lookahead_min: f64,
    pub lookahead_time: f64,
    /// Factor on the tightest turning radius used when planning a turn.
    pub turn_margin: f64,
    /// Closest planned approach (m) to an obstacle while turning.
    pub wall_margin: f64,
}

impl Default for SteeringParams {
    fn default() -> Self {
        Self {
            heading_gain: 2.0,
            speed_gain: 5.0,
            clearance: 1.0,
            min_speed: 0.3,
            corner_offset: 0.8,
            lookahead_min: 2.0,
            lookahead_time: 1.0,
            turn_margin: 1.25,
            wall_margin: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub decision: DecisionParams,
    pub vehicle: VehicleParams,
    pub steering: SteeringParams,
    /// Exploration probability in the first run.
    pub p_explore: f64,
    /// Per-run decay factor of the exploration probability.
    pub p_explore_decay: f64,
    /// Weight of the straight-line distance to the goal when exploring.
    pub optimism: f64,
    pub arrival_radius: f64,
    pub goal_radius: f64,
    /// s
    pub max_duration: f64,
    /// Field of view (rad).
    pub fov: f64,
    /// Number of field-of-view sectors scanned when deciding at a node.
    pub scan_sectors: u32,
    pub r_thresh: f64,
    pub seed: u64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            decision: DecisionParams::default(),
            vehicle: VehicleParams::default(),
            steering: SteeringParams::default(),
            p_explore: 0.5,
            p_explore_decay: 0.85,
            optimism: 1.0,
            arrival_radius: 1.0,
            goal_radius: 1.5,
            max_duration: 120.0,
            fov: 60f64.to_radians(),
            scan_sectors: 3,
            r_thresh: R_THRESH,
            seed: 0,
        }
    }
}

impl AgentConfig {
    /// Exploration probability in run `run_id` (counted from zero).
    pub fn p_explore_at(&self, run_id: usize) -> f64 {
        (self.p_explore * self.p_explore_decay.powi(run_id as i32)).clamp(0.0, 1.0)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.arrival_radius > 0.0 && self.goal_radius > 0.0) {
            return Err("radii must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.p_explore) || !(0.0..=1.0).contains(&self.p_explore_decay) {
            return Err("exploration probability and decay must lie in [0, 1]".into());
        }
        if !(self.max_duration >= 0.0) {
            return Err("max_duration must be non-negative".into());
        }
        if !(self.fov > 0.0) || self.scan_sectors == 0 {
            return Err("field of view must be positive".into());
        }
        self.decision.validate().map_err(|e| e.to_string())
    }
}

/// Highest speed whose turning radius keeps a turn of `angle` rad within
/// the lateral clearance.
pub fn turn_speed(angle: f64, vehicle: &VehicleParams, steer: &SteeringParams) -> f64 {
    let angle = angle.abs().min(std::f64::consts::PI);
    let slack = 1.0 - angle.cos();
    if slack < 1e-9 {
        return vehicle.v_max;
    }
    radius_speed(steer.clearance / slack, vehicle).max(steer.min_speed)
}

/// Highest speed at which a turn of radius `r` is possible.
fn radius_speed(r: f64, vehicle: &VehicleParams) -> f64 {
    (vehicle.omega_max * r)
        .min((vehicle.u_lat_max * r).sqrt())
        .min(vehicle.v_max)
}

/// Control towards `target`: proportional heading control, and a speed
/// command that coasts down in time for the turn onto `next_target`.
pub fn steer_to_subgoal(
    state: &VehicleState,
    target: Point,
    next_target: Option<Point>,
    vehicle: &VehicleParams,
    steer: &SteeringParams,
) -> ControlInput {
    let arrive = (target - state.position()).angle();
    let corner = match next_target {
        Some(nx) if nx.dist(target) > EPS => {
            turn_speed(wrap_angle((nx - target).angle() - arrive), vehicle, steer)
        }
        _ => vehicle.v_max,
    };
    steer_along(
        state,
        state.position(),
        target,
        corner,
        vehicle.v_max,
        vehicle,
        steer,
    )
}

/// Tracks the straight course from `from` to `target` through a look-ahead
/// point on it, arriving at `target` no faster than `corner` and never
/// exceeding `limit` (m/s).
pub fn steer_along(
    state: &VehicleState,
    from: Point,
    target: Point,
    corner: f64,
    limit: f64,
    vehicle: &VehicleParams,
    steer: &SteeringParams,
) -> ControlInput {
    let pos = state.position();
    let course = target - from;
    let len = course.norm();
    let mut merge = vehicle.v_max;
    let aim = if len > EPS {
        let dir = course * (1.0 / len);
        let along = (pos - from).dot(dir).clamp(0.0, len);
        // closing in on the course: the turn back onto it must fit in the gap
        let e = dir.cross(pos - from);
        let rel = wrap_angle(state.psi - course.angle());
        if e * rel < 0.0 {
            let slack = 1.0 - rel.cos();
            if slack > 1e-9 {
                merge = radius_speed((e.abs() + steer.wall_margin) / slack, vehicle)
                    .max(steer.min_speed);
            }
        }
        let look = steer.lookahead_min.max(steer.lookahead_time * state.v);
        if along + look >= len {
            target
        } else {
            from + dir * (along + look)
        }
    } else {
        target
    };
    let to_aim = aim - pos;
    let err = if to_aim.norm() > EPS {
        wrap_angle(to_aim.angle() - state.psi)
    } else {
        0.0
    };
    let u_lat = steer.heading_gain * err * state.v;
    let v_des = (corner + vehicle.k_drag * target.dist(pos))
        .min(turn_speed(err, vehicle, steer))
        .min(merge)
        .min(limit)
        .min(vehicle.v_max);
    let u_lon = if v_des >= vehicle.v_max - 1e-9 {
        vehicle.u_lon_max
    } else if state.v > v_des {
        // drag is the only brake
        0.0
    } else {
        (vehicle.k_drag * v_des + steer.speed_gain * (v_des - state.v)) / vehicle.k_acc
    };
    vehicle.saturate(ControlInput::new(u_lon, u_lat))
}

fn clear_of(env: &Environment, p: Point, margin: f64) -> bool {
    !collided(env, p)
        && env
            .obstacles()
            .iter()
            .all(|o| dist_to_ring(p, &o.vertices) >= margin)
}

/// Whether a vehicle at `start` heading `psi`, turning at radius `r` towards
/// `target` and then running straight at it, keeps `margin` from obstacles.
fn arc_clear(
    env: &Environment,
    start: Point,
    psi: f64,
    target: Point,
    r: f64,
    margin: f64,
) -> bool {
    let ds = (0.1 * r).clamp(0.01, 0.05);
    let (mut p, mut psi) = (start, psi);
    let steps = ((std::f64::consts::TAU * r + 1.0) / ds) as usize;
    for _ in 0..steps {
        let to = target - p;
        if to.norm() <= ds {
            return true;
        }
        let err = wrap_angle(to.angle() - psi);
        if err.abs() < 1e-3 {
            return env.line_of_sight(p, target);
        }
        psi += err.signum() * err.abs().min(ds / r);
        p = p + Point::from_angle(psi) * ds;
        if !clear_of(env, p, margin) {
            return false;
        }
    }
    false
}

/// Highest speed at which the vehicle, reaching `at` on heading `psi`, can
/// still turn onto `next` without grazing an obstacle.
pub fn corner_speed(
    env: &Environment,
    at: Point,
    psi: f64,
    next: Point,
    vehicle: &VehicleParams,
    steer: &SteeringParams,
) -> f64 {
    let mut v = vehicle.v_max;
    while v > steer.min_speed {
        let r = steer.turn_margin * vehicle.turn_radius(v);
        if arc_clear(env, at, psi, next, r, steer.wall_margin) {
            return v;
        }
        v *= 0.9;
    }
    steer.min_speed
}

/// True when the path `from -> node k -> to` bends around the obstacle at
/// corner `k` (or runs nearly straight past it). Otherwise a shorter path
/// would cut inside the bend and the corner sits on its outer side.
pub fn wraps_corner(nodes: &NodeSet, k: usize, from: Point, to: Point) -> bool {
    let Some(meta) = nodes.corner(k) else {
        return true;
    };
    let c = nodes.position(k);
    let (a, w) = (from - c, to - c);
    if a.norm() <= EPS || w.norm() <= EPS {
        return true;
    }
    let bend = std::f64::consts::PI - wrap_angle(w.angle() - a.angle()).abs();
    if bend < 0.25 {
        return true;
    }
    let inward = -meta.outward_bisector();
    let s = a.cross(w);
    if s == 0.0 {
        return true;
    }
    a.cross(inward) * s > 0.0 && inward.cross(w) * s > 0.0
}

struct Agent<'a> {
    env: &'a Environment,
    nodes: &'a NodeSet,
    kb: &'a KnowledgeBase,
    cfg: &'a AgentConfig,
    rng: ChaCha8Rng,
    p_explore: f64,
    run_id: usize,
    visited: Vec<bool>,
    decisions: Vec<DecisionRecord>,
}

impl Agent<'_> {
    fn aim_point(&self, i: usize) -> Point {
        let p = self.nodes.position(i);
        match self.nodes.corner(i) {
            Some(meta) => p + meta.outward_bisector() * self.cfg.steering.corner_offset,
            None => p,
        }
    }

    /// Planned speed at the aim point of `cur` when coming from `from`.
    fn corner_speed(&self, from: Point, cur: usize, next: Option<usize>) -> f64 {
        let at = self.aim_point(cur);
        match next {
            Some(n) if at.dist(from) > EPS => corner_speed(
                self.env,
                at,
                (at - from).angle(),
                self.aim_point(n),
                &self.cfg.vehicle,
                &self.cfg.steering,
            ),
            _ => self.cfg.vehicle.v_max,
        }
    }

    fn heuristic(&self, from: Point, i: usize) -> f64 {
        let v = self.cfg.vehicle.v_max;
        let p = self.nodes.position(i);
        self.cfg.optimism * p.dist(self.env.goal()) / v + from.dist(p) / v
    }

    fn argmin(cands: &[usize], f: impl Fn(usize) -> f64) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for &i in cands {
            let c = f(i);
            if best.is_none_or(|(b, _)| c < b) {
                best = Some((c, i));
            }
        }
        best.map(|(_, i)| i)
    }

    fn explore_from(&self, from: Point, cands: &[usize]) -> Option<usize> {
        Self::argmin(cands, |i| self.heuristic(from, i))
    }

    fn known_value(&self, i: usize) -> Option<f64> {
        if i == 0 {
            Some(0.0)
        } else {
            self.kb.ctg_lists[i]
                .first()
                .map(|_| self.cfg.decision.aggregator.apply(&self.kb.ctg_lists[i]))
        }
    }

    /// Nodes in line of sight of `from` in every direction.
    fn in_sight(&self, from: Point, exclude: Option<usize>) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| {
                Some(i) != exclude
                    && self.nodes.position(i).dist(from) > EPS
                    && self.env.line_of_sight(from, self.nodes.position(i))
            })
            .collect()
    }

    /// First subgoal from the start pose, after looking all around.
    fn choose_start(&mut self, from: Point) -> usize {
        let cands = self.in_sight(from, None);
        let explore = self.rng.gen::<f64>() < self.p_explore;
        let known: Vec<usize> = cands
            .iter()
            .copied()
            .filter(|&i| self.known_value(i).is_some())
            .collect();
        let v = self.cfg.vehicle.v_max;
        if !explore {
            if let Some(i) = Self::argmin(&known, |i| {
                from.dist(self.nodes.position(i)) / v + self.known_value(i).unwrap()
            }) {
                return i;
            }
        }
        let fresh: Vec<usize> = cands
            .iter()
            .copied()
            .filter(|&i| i == 0 || !self.kb.is_known(i))
            .collect();
        self.explore_from(from, &fresh)
            .or_else(|| self.explore_from(from, &cands))
            .unwrap_or(0)
    }

    /// Next subgoal after node `k`, judged from the node looking along
    /// `heading` over the scanned sectors.
    fn choose_next(&mut self, k: usize, heading: f64) -> usize {
        let here = self.nodes.position(k);
        let behind = here - Point::from_angle(heading);
        let fov = (self.cfg.fov * self.cfg.scan_sectors as f64).min(std::f64::consts::TAU);
        let vis: Vec<usize> = visible_nodes(self.env, Pose::at(here, heading), self.nodes, fov)
            .into_iter()
            .filter(|&i| i != k)
            .collect();
        let fresh_all: Vec<usize> = vis
            .iter()
            .copied()
            .filter(|&i| !self.visited[i] && self.can_turn(k, heading, i))
            .collect();
        let taut: Vec<usize> = fresh_all
            .iter()
            .copied()
            .filter(|&i| wraps_corner(self.nodes, k, behind, self.nodes.position(i)))
            .collect();
        let fresh_vis = if taut.is_empty() { fresh_all } else { taut };
        let case = classify_case(self.kb, k);
        let explore = self.rng.gen::<f64>() < self.p_explore;
        let mut predicted = None;
        let chosen = match case {
            DecisionCase::A => self.explore_from(here, &fresh_vis),
            DecisionCase::B | DecisionCase::C => {
                let prediction = predict_next_node(self.kb, k, &self.cfg.decision)
                    .ok()
                    .map(|p| p.node);
                if case == DecisionCase::C {
                    predicted = prediction;
                }
                let prediction =
                    prediction.filter(|&i| !self.visited[i] && self.can_turn(k, heading, i));
                let connected = self.kb.connected_nodes(k);
                let unexperienced: Vec<usize> = fresh_vis
                    .iter()
                    .copied()
                    .filter(|i| !connected.contains(i))
                    .collect();
                if explore && !unexperienced.is_empty() {
                    Some(unexperienced[self.rng.gen_range(0..unexperienced.len())])
                } else {
                    prediction.or_else(|| self.explore_from(here, &fresh_vis))
                }
            }
        };
        let chosen = chosen.unwrap_or_else(|| self.fallback(k, heading));
        self.decisions.push(DecisionRecord {
            run_id: self.run_id,
            node: k,
            case,
            chosen,
            predicted,
            vis,
        });
        chosen
    }

    /// Whether the turn at `k`, arriving on `heading`, onto subgoal `i` can
    /// be flown at the lowest planned speed.
    fn can_turn(&self, k: usize, heading: f64, i: usize) -> bool {
        let steer = &self.cfg.steering;
        let r = steer.turn_margin * self.cfg.vehicle.turn_radius(steer.min_speed);
        arc_clear(
            self.env,
            self.aim_point(k),
            heading,
            self.aim_point(i),
            r,
            steer.wall_margin,
        )
    }

    /// Nearest known unvisited node in sight, then any unvisited node in
    /// sight, then anything in sight; flyable turns first.
    fn fallback(&self, k: usize, heading: f64) -> usize {
        let here = self.nodes.position(k);
        let mut sight = self.in_sight(here, Some(k));
        let flyable: Vec<usize> = sight
            .iter()
            .copied()
            .filter(|&i| self.can_turn(k, heading, i))
            .collect();
        if !flyable.is_empty() {
            sight = flyable;
        }
        let dist = |i: usize| here.dist(self.nodes.position(i));
        let known: Vec<usize> = sight
            .iter()
            .copied()
            .filter(|&i| !self.visited[i] && self.known_value(i).is_some())
            .collect();
        let unvisited: Vec<usize> = sight
            .iter()
            .copied()
            .filter(|&i| !self.visited[i])
            .collect();
        Self::argmin(&known, dist)
            .or_else(|| Self::argmin(&unvisited, dist))
            .or_else(|| Self::argmin(&sight, dist))
            .unwrap_or(0)
    }
}

fn collided(env: &Environment, p: Point) -> bool {
    !env.bounds().contains(p)
        || env
            .obstacles()
            .iter()
            .any(|o| strictly_inside(p, &o.vertices))
}

/// Per-run generator: one stream per run of a seeded experiment.
pub fn run_rng(seed: u64, run_id: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run_id as u64);
    rng
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub log: RunLog,
    pub decisions: Vec<DecisionRecord>,
}

/// One run from the start pose until the goal radius is reached, the
/// vehicle leaves free space, or time runs out.
pub fn run_trial(
    env: &Environment,
    nodes: &NodeSet,
    kb: &KnowledgeBase,
    cfg: &AgentConfig,
    run_id: usize,
) -> Trial {
    let vehicle = &cfg.vehicle;
    let mut agent = Agent {
        env,
        nodes,
        kb,
        cfg,
        rng: run_rng(cfg.seed, run_id),
        p_explore: cfg.p_explore_at(run_id),
        run_id,
        visited: vec![false; nodes.len()],
        decisions: Vec::new(),
    };
    let mut state = VehicleState::at_rest(env.start());
    let mut samples = Vec::new();
    let goal = env.goal();

    let mut cur = agent.choose_start(state.position());
    agent.visited[cur] = true;
    let mut next = (cur != 0).then(|| {
        let h = (nodes.position(cur) - state.position()).angle();
        agent.choose_next(cur, h)
    });
    let mut d_min = f64::INFINITY;
    let mut origin = state.position();
    let mut corner = agent.corner_speed(origin, cur, next);
    // speed held through a turn until the new course is picked up
    let mut hold = vehicle.v_max;
    let mut i: u64 = 0;
    let outcome = loop {
        let t = i as f64 * vehicle.dt;
        let pos = state.position();
        let mut last = |state, outcome| {
            samples.push(LogSample {
                t,
                state,
                u: ControlInput::ZERO,
                subgoal: Some(cur),
            });
            outcome
        };
        if pos.dist(goal) <= cfg.goal_radius {
            break last(state, Outcome::GoalReached);
        }
        if collided(env, pos) {
            break last(state, Outcome::Collision);
        }
        if t >= cfg.max_duration - 1e-9 {
            break last(state, Outcome::Timeout);
        }
        if let Some(nx) = next {
            let d = pos.dist(nodes.position(cur));
            d_min = d_min.min(d);
            let passed = d_min <= 2.0 * cfg.arrival_radius && d > d_min + 0.05;
            if (d <= cfg.arrival_radius || passed) && env.line_of_sight(pos, agent.aim_point(nx)) {
                let heading = (nodes.position(nx) - nodes.position(cur)).angle();
                cur = nx;
                origin = pos;
                agent.visited[cur] = true;
                next = (cur != 0).then(|| agent.choose_next(cur, heading));
                d_min = f64::INFINITY;
                hold = corner;
                corner = agent.corner_speed(origin, cur, next);
            }
        }
        let target = agent.aim_point(cur);
        if (target - origin).norm() <= EPS
            || wrap_angle(state.psi - (target - origin).angle()).abs() < 0.1
        {
            hold = vehicle.v_max;
        }
        let u = steer_along(&state, origin, target, corner, hold, vehicle, &cfg.steering);
        samples.push(LogSample {
            t,
            state,
            u,
            subgoal: Some(cur),
        });
        state = step(state, u, vehicle).expect("saturated control");
        i += 1;
    };
    let flight_time = (outcome == Outcome::GoalReached).then(|| samples.last().unwrap().t);
    Trial {
        log: RunLog {
            run_id,
            samples,
            outcome,
            flight_time,
        },
        decisions: agent.decisions,
    }
}

/// Folds one parsed run into the knowledge base: completed runs add CTG
/// samples, others only their segments.
pub fn learn(kb: &mut KnowledgeBase, parsed: &ParsedRun) {
    let res = if parsed.goal_time().is_some() {
        kb.update_from_run(parsed)
    } else {
        kb.update_from_aborted_run(parsed)
    };
    // parse_run yields in-range nodes with increasing times
    res.expect("parsed run is well formed");
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub logs: Vec<RunLog>,
    pub parsed: Vec<ParsedRun>,
    /// Knowledge before each run, then the final state.
    pub kb_history: Vec<KnowledgeBase>,
    pub flight_times: Vec<Option<f64>>,
    /// Exploration metric after each run.
    pub em_per_run: Vec<f64>,
    pub decisions: Vec<DecisionRecord>,
}

impl Experiment {
    pub fn final_kb(&self) -> &KnowledgeBase {
        self.kb_history.last().unwrap()
    }
}

/// Runs `n_runs` sequential trials starting from `kb`.
pub fn run_experiment_from(
    env: &Environment,
    nodes: &NodeSet,
    mut kb: KnowledgeBase,
    n_runs: usize,
    cfg: &AgentConfig,
) -> Experiment {
    let mut ex = Experiment {
        logs: Vec::with_capacity(n_runs),
        parsed: Vec::with_capacity(n_runs),
        kb_history: vec![kb.clone()],
        flight_times: Vec::with_capacity(n_runs),
        em_per_run: Vec::with_capacity(n_runs),
        decisions: Vec::new(),
    };
    for run_id in 0..n_runs {
        let trial = run_trial(env, nodes, &kb, cfg, run_id);
        let parsed = parse_run(&trial.log, nodes, cfg.r_thresh, MIN_WINDOW);
        learn(&mut kb, &parsed);
        ex.flight_times.push(trial.log.flight_time);
        ex.em_per_run.push(kb.exploration_metric());
        ex.kb_history.push(kb.clone());
        ex.decisions.extend(trial.decisions);
        ex.logs.push(trial.log);
        ex.parsed.push(parsed);
    }
    ex
}

/// Runs `n_runs` trials of a fresh agent.
pub fn run_experiment(
    env: &Environment,
    n_runs: usize,
    cfg: &AgentConfig,
) -> Result<Experiment, EnvError> {
    let nodes = extract_nodes(env)?;
    let kb = KnowledgeBase::new(nodes.len());
    Ok(run_experiment_from(env, &nodes, kb, n_runs, cfg))
}

/// Independent experiments, one per config, in parallel.
pub fn run_experiments(
    env: &Environment,
    n_runs: usize,
    cfgs: &[AgentConfig],
) -> Result<Vec<Experiment>, EnvError> {
    let nodes = extract_nodes(env)?;
    Ok(cfgs
        .par_iter()
        .map(|cfg| run_experiment_from(env, &nodes, KnowledgeBase::new(nodes.len()), n_runs, cfg))
        .collect())
}
