//! Learned task knowledge: cost-to-go samples per node, cost samples per
//! traversed segment and the traversal counts, plus the node sets and
//! statistics derived from them.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::ParsedRun;
use crate::benchmark::SubgoalGraph;

pub const KB_SCHEMA: &str = "knowledge-base/1";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KnowledgeError {
    #[error("run does not end at the goal node")]
    NotAtGoal,
    #[error("node {0} outside a knowledge base of {1} nodes")]
    NodeOutOfRange(usize, usize),
    #[error("visit times must be strictly increasing")]
    NonIncreasingTimes,
    #[error("node {0} has neither visible neighbours nor recorded transitions")]
    NoCandidates(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeBase {
    pub schema: String,
    pub n_nodes: usize,
    /// Cost-to-go samples (s) per node; the goal never receives any.
    pub ctg_lists: Vec<Vec<f64>>,
    /// Segment time samples (s), indexed `[from][to]`.
    pub dc_lists: Vec<Vec<Vec<f64>>>,
    pub q_counts: Vec<Vec<u32>>,
    pub run_count: usize,
}

impl KnowledgeBase {
    pub fn new(n_nodes: usize) -> Self {
        Self {
            schema: KB_SCHEMA.to_string(),
            n_nodes,
            ctg_lists: vec![Vec::new(); n_nodes],
            dc_lists: vec![vec![Vec::new(); n_nodes]; n_nodes],
            q_counts: vec![vec![0; n_nodes]; n_nodes],
            run_count: 0,
        }
    }

    /// Knowledge of an agent that has learned the benchmark graph exactly:
    /// one CTG sample per reachable node and one sample on each optimal edge.
    pub fn from_benchmark(graph: &SubgoalGraph) -> Self {
        let n = graph.len();
        let mut kb = Self::new(n);
        for k in 1..n {
            if let Some(c) = graph.child(k) {
                kb.ctg_lists[k].push(graph.ctg[k]);
                kb.dc_lists[k][c].push(graph.dc[k][c]);
                kb.q_counts[k][c] = 1;
            }
        }
        kb
    }

    fn check_run(&self, parsed: &ParsedRun) -> Result<(), KnowledgeError> {
        for v in &parsed.sequence {
            if v.node >= self.n_nodes {
                return Err(KnowledgeError::NodeOutOfRange(v.node, self.n_nodes));
            }
        }
        if parsed.sequence.windows(2).any(|w| w[1].t <= w[0].t) {
            return Err(KnowledgeError::NonIncreasingTimes);
        }
        Ok(())
    }

    fn add_segments(&mut self, parsed: &ParsedRun) {
        for w in parsed.sequence.windows(2) {
            let (a, b) = (w[0].node, w[1].node);
            self.dc_lists[a][b].push(w[1].t - w[0].t);
            self.q_counts[a][b] += 1;
        }
    }

    /// Adds one completed run: a CTG sample for every visited non-goal node,
    /// a DC sample and a count for every consecutive pair.
    pub fn update_from_run(&mut self, parsed: &ParsedRun) -> Result<(), KnowledgeError> {
        let t_goal = parsed.goal_time().ok_or(KnowledgeError::NotAtGoal)?;
        self.check_run(parsed)?;
        for v in &parsed.sequence {
            if v.node != 0 {
                self.ctg_lists[v.node].push(t_goal - v.t);
            }
        }
        self.add_segments(parsed);
        self.run_count += 1;
        Ok(())
    }

    /// Adds a run that never reached the goal: segment costs and counts only.
    pub fn update_from_aborted_run(&mut self, parsed: &ParsedRun) -> Result<(), KnowledgeError> {
        self.check_run(parsed)?;
        self.add_segments(parsed);
        self.run_count += 1;
        Ok(())
    }

    /// Unknown and known non-goal nodes.
    pub fn node_sets(&self) -> (Vec<usize>, Vec<usize>) {
        (1..self.n_nodes).partition(|&k| self.ctg_lists[k].is_empty())
    }

    pub fn is_known(&self, k: usize) -> bool {
        !self.ctg_lists[k].is_empty()
    }

    /// Other nodes reached directly from `k` in at least one run.
    pub fn connected_nodes(&self, k: usize) -> Vec<usize> {
        (0..self.n_nodes)
            .filter(|&i| i != k && self.q_counts[k][i] > 0)
            .collect()
    }

    /// Transition probabilities out of `k`: empirical frequencies once any
    /// transition has been made, otherwise uniform over visible neighbours.
    pub fn prior_transition_probabilities(
        &self,
        vis: &[Vec<bool>],
        k: usize,
    ) -> Result<Vec<f64>, KnowledgeError> {
        let n = self.n_nodes;
        let total: u32 = self.q_counts[k].iter().sum();
        if total > 0 {
            return Ok(self.q_counts[k]
                .iter()
                .map(|&c| c as f64 / total as f64)
                .collect());
        }
        let m = (0..n).filter(|&i| i != k && vis[k][i]).count();
        if m == 0 {
            return Err(KnowledgeError::NoCandidates(k));
        }
        Ok((0..n)
            .map(|i| {
                if i != k && vis[k][i] {
                    1.0 / m as f64
                } else {
                    0.0
                }
            })
            .collect())
    }

    /// Number of segments taken exactly `h` times, for every `h >= 1` present.
    pub fn segment_histogram(&self) -> BTreeMap<u32, usize> {
        let mut hist = BTreeMap::new();
        for &c in self.q_counts.iter().flatten() {
            if c > 0 {
                *hist.entry(c).or_insert(0) += 1;
            }
        }
        hist
    }

    /// Exploration metric: sum over `h` of `M_h / h`.
    pub fn exploration_metric(&self) -> f64 {
        self.segment_histogram()
            .iter()
            .fold(0.0, |acc, (&h, &m)| acc + m as f64 / h as f64)
    }
}
