//! Node-level decision model: which of the three choice cases applies at a
//! node, the discounted depth-limited shortest-path prediction over learned
//! knowledge, and accuracy of that prediction against observed choices.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::ParsedRun;
use crate::knowledge::KnowledgeBase;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DecisionError {
    #[error("node {0} has no experienced outgoing segment")]
    NoExperience(usize),
    #[error("no experienced path from node {0} reaches the goal or a known leaf")]
    NoCompletePath(usize),
    #[error("gamma must lie in (0, 1], got {0}")]
    InvalidGamma(f64),
    #[error("maximum depth must be at least 1")]
    InvalidDepth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregator {
    #[default]
    Min,
    Mean,
    Median,
    Max,
}

impl Aggregator {
    /// Aggregate of a non-empty sample list.
    pub fn apply(self, xs: &[f64]) -> f64 {
        debug_assert!(!xs.is_empty());
        match self {
            Aggregator::Min => xs.iter().copied().fold(f64::INFINITY, f64::min),
            Aggregator::Max => xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            Aggregator::Mean => xs.iter().sum::<f64>() / xs.len() as f64,
            Aggregator::Median => {
                let mut v = xs.to_vec();
                v.sort_by(|a, b| a.total_cmp(b));
                let m = v.len() / 2;
                if v.len() % 2 == 1 {
                    v[m]
                } else {
                    0.5 * (v[m - 1] + v[m])
                }
            }
        }
    }
}

impl std::str::FromStr for Aggregator {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "min" => Ok(Aggregator::Min),
            "mean" => Ok(Aggregator::Mean),
            "median" => Ok(Aggregator::Median),
            "max" => Ok(Aggregator::Max),
            other => Err(format!("unknown aggregator `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecisionParams {
    pub gamma: f64,
    /// `None` searches to unlimited depth.
    pub d_max: Option<usize>,
    pub aggregator: Aggregator,
}

impl Default for DecisionParams {
    fn default() -> Self {
        Self {
            gamma: 1.0,
            d_max: None,
            aggregator: Aggregator::Min,
        }
    }
}

impl DecisionParams {
    pub fn validate(&self) -> Result<(), DecisionError> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(DecisionError::InvalidGamma(self.gamma));
        }
        if self.d_max == Some(0) {
            return Err(DecisionError::InvalidDepth);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecisionCase {
    /// No segment out of the node has been taken yet.
    A,
    /// Exactly one.
    B,
    /// Several.
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub run_id: usize,
    pub node: usize,
    pub case: DecisionCase,
    pub chosen: usize,
    /// Model prediction, only for case C.
    pub predicted: Option<usize>,
    pub vis: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateValue {
    pub node: usize,
    /// Best path value through this first step; `None` when no path completes.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub node: usize,
    pub value: f64,
    pub table: Vec<CandidateValue>,
}

pub fn classify_case(kb: &KnowledgeBase, k: usize) -> DecisionCase {
    match kb.connected_nodes(k).len() {
        0 => DecisionCase::A,
        1 => DecisionCase::B,
        _ => DecisionCase::C,
    }
}

struct Search<'a> {
    kb: &'a KnowledgeBase,
    params: DecisionParams,
    edge: &'a [Vec<Option<f64>>],
    leaf: &'a [Option<f64>],
    visited: Vec<bool>,
    best: f64,
}

impl Search<'_> {
    /// Depth-first over simple paths; `acc` holds the discounted cost so far
    /// and `disc` the weight of the next term.
    fn dfs(&mut self, u: usize, depth: usize, acc: f64, disc: f64) {
        if acc > self.best + 1e-9 * self.best.abs() {
            return;
        }
        if u == 0 {
            self.best = self.best.min(acc);
            return;
        }
        if Some(depth) == self.params.d_max {
            if let Some(l) = self.leaf[u] {
                self.best = self.best.min(acc + disc * l);
            }
            return;
        }
        for i in 0..self.kb.n_nodes {
            if self.visited[i] {
                continue;
            }
            if let Some(c) = self.edge[u][i] {
                self.visited[i] = true;
                self.dfs(i, depth + 1, acc + disc * c, disc * self.params.gamma);
                self.visited[i] = false;
            }
        }
    }
}

/// Value of the best path starting with the segment `k -> first`, or `None`.
fn candidate_value(
    kb: &KnowledgeBase,
    params: DecisionParams,
    edge: &[Vec<Option<f64>>],
    leaf: &[Option<f64>],
    k: usize,
    first: usize,
) -> Option<f64> {
    let mut s = Search {
        kb,
        params,
        edge,
        leaf,
        visited: vec![false; kb.n_nodes],
        best: f64::INFINITY,
    };
    s.visited[k] = true;
    s.visited[first] = true;
    let c = edge[k][first]?;
    s.dfs(first, 1, c, params.gamma);
    s.best.is_finite().then_some(s.best)
}

/// Predicts the next subgoal from node `k` by searching experienced segments
/// (cost: aggregate of their DC samples) up to `d_max` deep. A path scores
/// `sum_d gamma^d c_d`, plus `gamma^D f(CTG samples)` of its last node when
/// cut at depth `D`; paths reaching the goal end there and paths stuck at an
/// unknown dead end are dropped. Ties go to the lowest node index.
pub fn predict_next_node(
    kb: &KnowledgeBase,
    k: usize,
    params: &DecisionParams,
) -> Result<Prediction, DecisionError> {
    params.validate()?;
    let n = kb.n_nodes;
    let first: Vec<usize> = kb.connected_nodes(k);
    if first.is_empty() {
        return Err(DecisionError::NoExperience(k));
    }
    let f = params.aggregator;
    let edge: Vec<Vec<Option<f64>>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| (!kb.dc_lists[a][b].is_empty()).then(|| f.apply(&kb.dc_lists[a][b])))
                .collect()
        })
        .collect();
    let leaf: Vec<Option<f64>> = (0..n)
        .map(|a| (!kb.ctg_lists[a].is_empty()).then(|| f.apply(&kb.ctg_lists[a])))
        .collect();
    let table: Vec<CandidateValue> = first
        .iter()
        .map(|&i| CandidateValue {
            node: i,
            value: candidate_value(kb, *params, &edge, &leaf, k, i),
        })
        .collect();
    let mut best: Option<(f64, usize)> = None;
    for c in &table {
        if let Some(v) = c.value {
            if best.is_none_or(|(b, _)| v < b) {
                best = Some((v, c.node));
            }
        }
    }
    let (value, node) = best.ok_or(DecisionError::NoCompletePath(k))?;
    Ok(Prediction { node, value, table })
}

/// Decisions made at each parsed node of a run, judged against the
/// knowledge available before the run. `vis[j]` is the visible set at the
/// `j`-th visit.
pub fn extract_decisions(
    run: &ParsedRun,
    kb_before: &KnowledgeBase,
    params: &DecisionParams,
    vis: &[Vec<usize>],
) -> Vec<DecisionRecord> {
    run.sequence
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[0].node != 0)
        .map(|(j, w)| {
            let k = w[0].node;
            let case = classify_case(kb_before, k);
            let predicted = match case {
                DecisionCase::C => predict_next_node(kb_before, k, params).ok().map(|p| p.node),
                _ => None,
            };
            DecisionRecord {
                run_id: run.run_id,
                node: k,
                case,
                chosen: w[1].node,
                predicted,
                vis: vis.get(j).cloned().unwrap_or_default(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    pub correct: usize,
    pub total: usize,
    pub accuracy: f64,
}

/// Fraction of case-C decisions matching the model, where the decision in
/// run `r` is predicted from `kb_before_run[r]`. `None` without case-C data.
pub fn score_model_accuracy(
    records: &[DecisionRecord],
    kb_before_run: &[KnowledgeBase],
    params: &DecisionParams,
) -> Option<AccuracyReport> {
    let mut correct = 0;
    let mut total = 0;
    for r in records.iter().filter(|r| r.case == DecisionCase::C) {
        let Some(kb) = kb_before_run.get(r.run_id) else {
            continue;
        };
        total += 1;
        if predict_next_node(kb, r.node, params).is_ok_and(|p| p.node == r.chosen) {
            correct += 1;
        }
    }
    (total > 0).then(|| AccuracyReport {
        correct,
        total,
        accuracy: correct as f64 / total as f64,
    })
}
