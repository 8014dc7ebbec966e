//! Optimal (benchmark) subgoal graphs: transition costs between nodes,
//! cost-to-go by dynamic programming, the one-hot connection matrix and
//! optimal subgoal sequences.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{dubins_shortest_path, VehicleParams};
use crate::env::{extract_nodes, visibility_graph, EnvError, Environment, NodeSet};
use crate::geometry::{Point, Pose};

pub const GRAPH_SCHEMA: &str = "subgoal-graph/1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BenchmarkError {
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("no node with a finite cost-to-go is visible from ({0}, {1})")]
    NoVisibleNode(f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Straight segments at `v_max` between mutually visible nodes.
    #[default]
    PointMass,
    /// Dubins segments at `v_max` with the turning radius of the config.
    Dubins,
}

impl std::str::FromStr for CostMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "point_mass" | "point-mass" => Ok(CostMode::PointMass),
            "dubins" => Ok(CostMode::Dubins),
            other => Err(format!("unknown cost mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub mode: CostMode,
    /// Dubins turning radius (m).
    pub radius: f64,
    /// Sampling step (m) for collision checks of Dubins segments.
    pub sample_ds: f64,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        Self {
            mode: CostMode::PointMass,
            radius: 1.0,
            sample_ds: 0.05,
        }
    }
}

/// Transition cost matrix plus, in Dubins mode, the heading held at each node.
#[derive(Debug, Clone, PartialEq)]
pub struct DcBuild {
    pub dc: Vec<Vec<f64>>,
    pub headings: Option<Vec<Option<f64>>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtgSolution {
    pub ctg: Vec<f64>,
    pub q: Vec<Vec<u8>>,
    pub children: Vec<Option<usize>>,
    /// Non-goal nodes with no finite route to the goal.
    pub unreachable: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgoalGraph {
    pub schema: String,
    pub mode: CostMode,
    pub v_max: f64,
    pub nodes: NodeSet,
    #[serde(rename = "DC", with = "nullable_matrix")]
    pub dc: Vec<Vec<f64>>,
    #[serde(rename = "CTG", with = "nullable_vec")]
    pub ctg: Vec<f64>,
    #[serde(rename = "Q")]
    pub q: Vec<Vec<u8>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub headings: Option<Vec<Option<f64>>>,
    pub unreachable: Vec<usize>,
}

impl SubgoalGraph {
    pub fn len(&self) -> usize {
        self.ctg.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ctg.is_empty()
    }

    pub fn child(&self, k: usize) -> Option<usize> {
        self.q[k].iter().position(|&b| b == 1)
    }
}

fn point_mass_dc(nodes: &NodeSet, vis: &[Vec<bool>], v_max: f64) -> Vec<Vec<f64>> {
    let n = nodes.len();
    (0..n)
        .map(|k| {
            (0..n)
                .map(|i| {
                    if vis[k][i] {
                        nodes.position(k).dist(nodes.position(i)) / v_max
                    } else {
                        f64::INFINITY
                    }
                })
                .collect()
        })
        .collect()
}

/// Dubins travel time from node `k` (heading straight at `i`) to node `i`
/// holding `arrive_heading`; infinite when the sampled path collides.
fn dubins_edge_cost(
    env: &Environment,
    from: Point,
    to: Point,
    arrive_heading: Option<f64>,
    cfg: &BenchmarkConfig,
    v_max: f64,
) -> f64 {
    let depart = (to - from).angle();
    let a = Pose::at(from, depart);
    let b = Pose::at(to, arrive_heading.unwrap_or(depart));
    let path = dubins_shortest_path(a, b, cfg.radius);
    let pts = path.polyline(cfg.sample_ds);
    let bounds = env.bounds();
    let clear = pts.iter().all(|p| bounds.contains(*p))
        && pts.windows(2).all(|w| env.line_of_sight(w[0], w[1]));
    if clear {
        path.length() / v_max
    } else {
        f64::INFINITY
    }
}

/// Builds the transition-cost matrix DC (s, infinite = infeasible).
///
/// Point-mass mode uses straight-line travel between visible nodes. Dubins
/// mode holds, at every node, the heading of its outgoing optimal edge: a
/// segment leaves `k` pointing at `i` and must arrive at `i` already aligned
/// with the edge from `i` to its own child. Those headings are fixed in
/// order of increasing cost-to-go, so the matrix is built alongside a
/// backward Dijkstra sweep and then completed for every visible pair.
pub fn build_dc_matrix(
    env: &Environment,
    nodes: &NodeSet,
    cfg: &BenchmarkConfig,
    vehicle: &VehicleParams,
) -> DcBuild {
    let vis = visibility_graph(env, nodes);
    let v_max = vehicle.v_max;
    match cfg.mode {
        CostMode::PointMass => DcBuild {
            dc: point_mass_dc(nodes, &vis, v_max),
            headings: None,
        },
        CostMode::Dubins => {
            let n = nodes.len();
            let mut ctg = vec![f64::INFINITY; n];
            let mut child: Vec<Option<usize>> = vec![None; n];
            let mut settled = vec![false; n];
            let mut heading: Vec<Option<f64>> = vec![None; n];
            if n > 0 {
                ctg[0] = 0.0;
            }
            while let Some(u) = (0..n)
                .filter(|&i| !settled[i] && ctg[i].is_finite())
                .min_by(|&a, &b| ctg[a].total_cmp(&ctg[b]).then(a.cmp(&b)))
            {
                settled[u] = true;
                if let Some(c) = child[u] {
                    heading[u] = Some((nodes.position(c) - nodes.position(u)).angle());
                }
                let costs: Vec<(usize, f64)> = (0..n)
                    .into_par_iter()
                    .filter(|&k| !settled[k] && vis[k][u])
                    .map(|k| {
                        let c = dubins_edge_cost(
                            env,
                            nodes.position(k),
                            nodes.position(u),
                            heading[u],
                            cfg,
                            v_max,
                        );
                        (k, c)
                    })
                    .collect();
                for (k, c) in costs {
                    let cand = ctg[u] + c;
                    if cand < ctg[k] || (cand == ctg[k] && child[k].is_some_and(|j| u < j)) {
                        ctg[k] = cand;
                        child[k] = Some(u);
                    }
                }
            }
            let dc: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|k| {
                    (0..n)
                        .map(|i| {
                            if !vis[k][i] {
                                f64::INFINITY
                            } else {
                                dubins_edge_cost(
                                    env,
                                    nodes.position(k),
                                    nodes.position(i),
                                    heading[i],
                                    cfg,
                                    v_max,
                                )
                            }
                        })
                        .collect()
                })
                .collect();
            DcBuild {
                dc,
                headings: Some(heading),
            }
        }
    }
}

/// Solves `CTG_k = min_{i != k} (DC_ki + CTG_i)` with `CTG_0 = 0` as a
/// one-to-all shortest path from the goal over reversed edges. Each node's
/// child is the lowest-index minimiser among nodes settled before it.
pub fn solve_ctg(dc: &[Vec<f64>]) -> CtgSolution {
    let n = dc.len();
    let mut ctg = vec![f64::INFINITY; n];
    let mut settled = vec![false; n];
    let mut order = Vec::with_capacity(n);
    if n > 0 {
        ctg[0] = 0.0;
    }
    while let Some(u) = (0..n)
        .filter(|&i| !settled[i] && ctg[i].is_finite())
        .min_by(|&a, &b| ctg[a].total_cmp(&ctg[b]).then(a.cmp(&b)))
    {
        settled[u] = true;
        order.push(u);
        for k in 0..n {
            if !settled[k] && k != u {
                let cand = dc[k][u] + ctg[u];
                if cand < ctg[k] {
                    ctg[k] = cand;
                }
            }
        }
    }
    let mut rank = vec![usize::MAX; n];
    for (r, &u) in order.iter().enumerate() {
        rank[u] = r;
    }
    let mut children = vec![None; n];
    let mut q = vec![vec![0u8; n]; n];
    for k in 1..n {
        if !ctg[k].is_finite() {
            continue;
        }
        let c = (0..n)
            .filter(|&i| i != k && rank[i] < rank[k] && dc[k][i] + ctg[i] == ctg[k])
            .min();
        children[k] = c;
        if let Some(c) = c {
            q[k][c] = 1;
        }
    }
    let unreachable = (1..n).filter(|&k| !ctg[k].is_finite()).collect();
    CtgSolution {
        ctg,
        q,
        children,
        unreachable,
    }
}

/// Extracts nodes, builds DC and solves for CTG and Q.
pub fn build_subgoal_graph(
    env: &Environment,
    cfg: &BenchmarkConfig,
    vehicle: &VehicleParams,
) -> Result<SubgoalGraph, BenchmarkError> {
    let nodes = extract_nodes(env)?;
    let DcBuild { dc, headings } = build_dc_matrix(env, &nodes, cfg, vehicle);
    let sol = solve_ctg(&dc);
    Ok(SubgoalGraph {
        schema: GRAPH_SCHEMA.to_string(),
        mode: cfg.mode,
        v_max: vehicle.v_max,
        nodes,
        dc,
        ctg: sol.ctg,
        q: sol.q,
        headings,
        unreachable: sol.unreachable,
    })
}

/// Subgoal sequence from an arbitrary position: the visible node minimising
/// straight travel time plus its cost-to-go, then child pointers to the goal.
pub fn optimal_sequence(
    graph: &SubgoalGraph,
    env: &Environment,
    from: Point,
) -> Result<Vec<usize>, BenchmarkError> {
    let mut best: Option<(f64, usize)> = None;
    for i in 0..graph.len() {
        if !graph.ctg[i].is_finite() {
            continue;
        }
        let p = graph.nodes.position(i);
        if !env.line_of_sight(from, p) {
            continue;
        }
        let cost = from.dist(p) / graph.v_max + graph.ctg[i];
        if best.is_none_or(|(b, _)| cost < b) {
            best = Some((cost, i));
        }
    }
    let (_, mut k) = best.ok_or(BenchmarkError::NoVisibleNode(from.x, from.y))?;
    let mut seq = vec![k];
    while k != 0 {
        // finite CTG guarantees a child
        k = graph.child(k).expect("reachable node without child");
        seq.push(k);
    }
    Ok(seq)
}

/// Graphviz rendering of the directed subgoal graph.
pub fn to_dot(graph: &SubgoalGraph) -> String {
    let mut s = String::from("digraph subgoals {\n  rankdir=LR;\n");
    for (i, p) in graph.nodes.positions.iter().enumerate() {
        let ctg = if graph.ctg[i].is_finite() {
            format!("{:.2}", graph.ctg[i])
        } else {
            "inf".to_string()
        };
        let name = if i == 0 {
            "goal".to_string()
        } else {
            format!("{i}")
        };
        let _ = writeln!(
            s,
            "  n{i} [label=\"{name}\\n({:.2}, {:.2})\\nCTG={ctg}\"];",
            p.x, p.y
        );
    }
    for k in 0..graph.len() {
        if let Some(c) = graph.child(k) {
            let _ = writeln!(s, "  n{k} -> n{c} [label=\"{:.2}\"];", graph.dc[k][c]);
        }
    }
    s.push_str("}\n");
    s
}

mod nullable_vec {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let o: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
        o.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let o = Vec::<Option<f64>>::deserialize(d)?;
        Ok(o.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
    }
}

mod nullable_matrix {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let o: Vec<Vec<Option<f64>>> = m
            .iter()
            .map(|r| r.iter().map(|x| x.is_finite().then_some(*x)).collect())
            .collect();
        o.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<f64>>, D::Error> {
        let o = Vec::<Vec<Option<f64>>>::deserialize(d)?;
        Ok(o.into_iter()
            .map(|r| r.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Bounds, Polygon};

    const INF: f64 = f64::INFINITY;

    fn three_node_dc() -> Vec<Vec<f64>> {
        vec![
            vec![INF, INF, INF],
            vec![10.0, INF, 2.0],
            vec![5.0, INF, INF],
        ]
    }

    fn square_world() -> Environment {
        Environment::new(
            Bounds {
                x_min: -10.0,
                y_min: -10.0,
                x_max: 10.0,
                y_max: 10.0,
            },
            Pose::new(-6.0, 0.0, 0.0),
            Point::new(6.0, 0.0),
            vec![Polygon::rect(-1.0, -1.0, 1.0, 1.0)],
        )
        .unwrap()
    }

    #[test]
    fn three_node_example() {
        let sol = solve_ctg(&three_node_dc());
        assert_eq!(sol.ctg, vec![0.0, 7.0, 5.0]);
        assert_eq!(sol.children, vec![None, Some(2), Some(0)]);
        assert_eq!(sol.q, vec![vec![0, 0, 0], vec![0, 0, 1], vec![1, 0, 0]]);
        assert!(sol.unreachable.is_empty());
    }

    #[test]
    fn goal_only_graph() {
        let sol = solve_ctg(&[vec![INF]]);
        assert_eq!(sol.ctg, vec![0.0]);
        assert_eq!(sol.q, vec![vec![0]]);
    }

    #[test]
    fn unreachable_nodes_are_flagged() {
        let dc = vec![vec![INF, INF], vec![INF, INF]];
        let sol = solve_ctg(&dc);
        assert_eq!(sol.unreachable, vec![1]);
        assert!(sol.ctg[1].is_infinite());
        assert_eq!(sol.q[1], vec![0, 0]);
    }

    #[test]
    fn ties_choose_lowest_index() {
        // 3 -> 1 and 3 -> 2 both cost 4 in total
        let dc = vec![
            vec![INF; 4],
            vec![1.0, INF, INF, INF],
            vec![2.0, INF, INF, INF],
            vec![INF, 3.0, 2.0, INF],
        ];
        let sol = solve_ctg(&dc);
        assert_eq!(sol.ctg[3], 4.0);
        assert_eq!(sol.children[3], Some(1));
    }

    #[test]
    fn ten_point_four_metres_is_two_seconds() {
        let env = Environment::new(
            Bounds {
                x_min: 0.0,
                y_min: 0.0,
                x_max: 20.0,
                y_max: 20.0,
            },
            Pose::new(1.0, 1.0, 0.0),
            Point::new(2.0, 4.0),
            vec![Polygon::rect(12.4, 4.0, 14.0, 6.0)],
        )
        .unwrap();
        let nodes = extract_nodes(&env).unwrap();
        assert_eq!(nodes.position(1), Point::new(12.4, 4.0));
        let dc = build_dc_matrix(
            &env,
            &nodes,
            &BenchmarkConfig::default(),
            &VehicleParams::default(),
        )
        .dc;
        assert!((dc[0][1] - 2.0).abs() < 1e-12);
        assert!((dc[1][0] - 2.0).abs() < 1e-12);
        // far corner (14,6) is hidden from the goal behind the box
        assert!(dc[0][3].is_infinite());
    }

    #[test]
    fn square_world_graph_is_complete() {
        let env = square_world();
        let g = build_subgoal_graph(&env, &BenchmarkConfig::default(), &VehicleParams::default())
            .unwrap();
        assert_eq!(g.len(), 5);
        assert!(g.ctg.iter().all(|c| c.is_finite()));
        for k in 1..5 {
            assert_eq!(g.q[k].iter().map(|&b| b as u32).sum::<u32>(), 1);
            let c = g.child(k).unwrap();
            assert!(g.ctg[c] < g.ctg[k]);
        }
        assert!(g.q[0].iter().all(|&b| b == 0));
        let seq = optimal_sequence(&g, &env, env.start().position()).unwrap();
        assert_eq!(*seq.last().unwrap(), 0);
        assert_eq!(seq.len(), 3);
    }

    #[test]
    fn direct_line_of_sight_goes_straight_to_goal() {
        let env = square_world();
        let g = build_subgoal_graph(&env, &BenchmarkConfig::default(), &VehicleParams::default())
            .unwrap();
        assert_eq!(
            optimal_sequence(&g, &env, Point::new(5.0, 3.0)).unwrap(),
            vec![0]
        );
    }

    #[test]
    fn dubins_mode_bounded_below_by_point_mass() {
        let env = square_world();
        let veh = VehicleParams::default();
        let pm = build_subgoal_graph(&env, &BenchmarkConfig::default(), &veh).unwrap();
        let db = build_subgoal_graph(
            &env,
            &BenchmarkConfig {
                mode: CostMode::Dubins,
                ..Default::default()
            },
            &veh,
        )
        .unwrap();
        for k in 0..pm.len() {
            assert!(pm.ctg[k] <= db.ctg[k] + 1e-12);
            for i in 0..pm.len() {
                assert!(pm.dc[k][i] <= db.dc[k][i] + 1e-12);
            }
        }
        // edges into the goal arrive straight, so they equal the point-mass value
        for k in 1..pm.len() {
            if pm.dc[k][0].is_finite() && db.dc[k][0].is_finite() {
                assert!((pm.dc[k][0] - db.dc[k][0]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn json_keeps_infinities_as_null() {
        let env = square_world();
        let g = build_subgoal_graph(&env, &BenchmarkConfig::default(), &VehicleParams::default())
            .unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.contains("null"));
        let back: SubgoalGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert!(to_dot(&g).starts_with("digraph subgoals"));
    }
}
