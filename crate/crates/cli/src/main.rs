//! `subgoal`: benchmark graphs, simulated learning experiments and log
//! analysis from the command line.
//!
//! Exit codes: 0 ok, 2 usage, 3 invalid input, 4 infeasible task.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use subgoal_core::analysis::{
    behavior_metrics, cluster_segments, extract_segments, parse_run, vis_window, TimeWeight,
    MIN_WINDOW, SEGMENT_HALF_WIDTH,
};
use subgoal_core::benchmark::{
    build_subgoal_graph, optimal_sequence, to_dot, BenchmarkConfig, CostMode,
};
use subgoal_core::decision::{
    classify_case, extract_decisions, predict_next_node, score_model_accuracy, AccuracyReport,
    Aggregator, DecisionCase, DecisionParams, DecisionRecord, Prediction,
};
use subgoal_core::env::{extract_nodes, Environment, NodeSet};
use subgoal_core::formats::{
    assignment_rows, from_json, mean_rows, read_runlog_csv, to_json, write_assignment_csv,
    write_mean_csv, write_runlog_csv, ExperimentSummary, MetricsReport, ParsedRuns,
};
use subgoal_core::knowledge::KnowledgeBase;
use subgoal_core::simulator::{learn, run_experiment_from, AgentConfig, RunLog};

const MANIFEST_SCHEMA: &str = "manifest/1";

#[derive(Parser)]
#[command(
    name = "subgoal",
    version,
    about = "Subgoal-graph guidance experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimal subgoal graph of a world: graph JSON and a DOT rendering.
    Bench(BenchArgs),
    /// Runs a learning agent for a number of runs and logs everything.
    Simulate(SimulateArgs),
    /// Parses run logs into subgoal sequences, knowledge, decisions and metrics.
    Analyze(AnalyzeArgs),
    /// Clusters corner-frame segments of run logs into guidance primitives.
    Cluster(ClusterArgs),
    /// Decision case and model prediction at one node of a knowledge base.
    Decide(DecideArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    PointMass,
    Dubins,
}

#[derive(Clone, Copy, ValueEnum)]
enum AggregatorArg {
    Min,
    Mean,
    Median,
    Max,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightArg {
    Printed,
    CornerPeaked,
}

#[derive(Args)]
struct BenchArgs {
    /// Environment JSON.
    #[arg(long)]
    env: PathBuf,
    #[arg(long, value_enum, default_value = "point-mass")]
    mode: Mode,
    /// Dubins turning radius (m).
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct DecisionArgs {
    /// Discount factor in (0, 1].
    #[arg(long)]
    gamma: Option<f64>,
    /// Search depth; unlimited when absent.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    dmax: Option<u64>,
    #[arg(long, value_enum)]
    aggregator: Option<AggregatorArg>,
}

impl DecisionArgs {
    fn apply(&self, p: &mut DecisionParams) {
        if let Some(g) = self.gamma {
            p.gamma = g;
        }
        if let Some(d) = self.dmax {
            p.d_max = Some(d as usize);
        }
        if let Some(a) = self.aggregator {
            p.aggregator = match a {
                AggregatorArg::Min => Aggregator::Min,
                AggregatorArg::Mean => Aggregator::Mean,
                AggregatorArg::Median => Aggregator::Median,
                AggregatorArg::Max => Aggregator::Max,
            };
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    env: PathBuf,
    /// Agent configuration (TOML `key = value`, optional tables).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    runs: u64,
    #[command(flatten)]
    decision: DecisionArgs,
    /// Field of view (degrees).
    #[arg(long)]
    fov: Option<f64>,
    /// Independent experiments on consecutive seeds, run in parallel, each
    /// written to `seed-<n>/`.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    parallel_seeds: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    env: PathBuf,
    /// Run-log CSV files or directories holding them.
    #[arg(long, num_args = 1.., required = true)]
    logs: Vec<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    decision: DecisionArgs,
    /// Field of view (degrees).
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    /// Visibility time window (s) centred on each closest approach.
    #[arg(long, default_value_t = 1.0)]
    tw: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    env: PathBuf,
    #[arg(long, num_args = 1.., required = true)]
    logs: Vec<PathBuf>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    clusters: u64,
    #[arg(long, value_enum, default_value = "printed")]
    weight: WeightArg,
    /// Half width (s) of the corner segments.
    #[arg(long, default_value_t = SEGMENT_HALF_WIDTH)]
    half_width: f64,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DecideArgs {
    /// Knowledge base JSON.
    #[arg(long)]
    kb: PathBuf,
    #[arg(long)]
    node: usize,
    #[command(flatten)]
    decision: DecisionArgs,
    /// Also write `decision.json` here.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// The task itself has no solution, as opposed to malformed input.
#[derive(Debug)]
struct Infeasible(String);

impl std::fmt::Display for Infeasible {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "infeasible task: {}", self.0)
    }
}

impl std::error::Error for Infeasible {}

#[derive(Serialize, Deserialize)]
struct Manifest {
    schema: String,
    tool: String,
    version: String,
    command: String,
    seed: Option<u64>,
    env_sha256: Option<String>,
    config: serde_json::Value,
    files: Vec<String>,
}

/// Output directory that remembers what was written into it.
struct Output {
    dir: PathBuf,
    files: Vec<String>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn finish(
        mut self,
        command: &str,
        seed: Option<u64>,
        env: Option<&Input>,
        config: serde_json::Value,
    ) -> Result<()> {
        self.files.sort();
        let m = Manifest {
            schema: MANIFEST_SCHEMA.to_string(),
            tool: "subgoal".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            seed,
            env_sha256: env.map(|e| e.sha256.clone()),
            config,
            files: self.files.clone(),
        };
        let path = self.dir.join("manifest.json");
        fs::write(&path, to_json(&m)?).with_context(|| format!("writing {}", path.display()))
    }
}

/// Environment file with its hash.
struct Input {
    env: Environment,
    sha256: String,
}

fn load_env(path: &Path) -> Result<Input> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let text =
        std::str::from_utf8(&bytes).with_context(|| format!("{} is not utf-8", path.display()))?;
    let env: Environment =
        from_json(text).with_context(|| format!("invalid environment {}", path.display()))?;
    let sha256 = Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(Input { env, sha256 })
}

fn load_config(path: Option<&Path>) -> Result<AgentConfig> {
    let Some(path) = path else {
        return Ok(AgentConfig::default());
    };
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
}

fn to_value<T: Serialize>(v: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(v)?)
}

/// Run logs from files and directories (every `*.csv` inside, by name),
/// ordered by run id.
fn load_logs(paths: &[PathBuf]) -> Result<Vec<RunLog>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut inside: Vec<PathBuf> = fs::read_dir(p)
                .with_context(|| format!("reading {}", p.display()))?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            inside.retain(|f| f.extension().is_some_and(|x| x == "csv"));
            inside.sort();
            files.extend(inside);
        } else {
            files.push(p.clone());
        }
    }
    let mut logs = Vec::new();
    for f in &files {
        let text = fs::read_to_string(f).with_context(|| format!("reading {}", f.display()))?;
        logs.push(
            read_runlog_csv(&text).with_context(|| format!("invalid run log {}", f.display()))?,
        );
    }
    if logs.is_empty() {
        bail!("no run logs found");
    }
    logs.sort_by_key(|l| l.run_id);
    if logs.windows(2).any(|w| w[0].run_id == w[1].run_id) {
        bail!("duplicate run ids among the logs");
    }
    Ok(logs)
}

fn nodes_of(env: &Environment) -> Result<NodeSet> {
    extract_nodes(env).context("invalid environment")
}

/// Errors unless some route leads from the start to the goal.
fn check_feasible(env: &Environment) -> Result<()> {
    let graph = build_subgoal_graph(env, &BenchmarkConfig::default(), &Default::default())?;
    optimal_sequence(&graph, env, env.start().position())
        .map(|_| ())
        .map_err(|e| Infeasible(e.to_string()).into())
}

fn bench(a: BenchArgs) -> Result<()> {
    let input = load_env(&a.env)?;
    let mut cfg = BenchmarkConfig {
        mode: match a.mode {
            Mode::PointMass => CostMode::PointMass,
            Mode::Dubins => CostMode::Dubins,
        },
        ..BenchmarkConfig::default()
    };
    if let Some(r) = a.radius {
        if !(r > 0.0) {
            bail!("radius must be positive");
        }
        cfg.radius = r;
    }
    let vehicle = Default::default();
    let graph = build_subgoal_graph(&input.env, &cfg, &vehicle)?;
    let mut out = Output::create(&a.out)?;
    out.write("graph.json", &to_json(&graph)?)?;
    out.write("graph.dot", &to_dot(&graph))?;
    out.finish("bench", None, Some(&input), to_value(&cfg)?)?;
    let reachable = (1..graph.len())
        .filter(|k| graph.ctg[*k].is_finite())
        .count();
    println!(
        "nodes {}  reachable corners {}  unreachable {:?}",
        graph.len(),
        reachable,
        graph.unreachable
    );
    match optimal_sequence(&graph, &input.env, input.env.start().position()) {
        Ok(seq) => {
            let t = input
                .env
                .start()
                .position()
                .dist(graph.nodes.position(seq[0]))
                / graph.v_max
                + graph.ctg[seq[0]];
            println!("optimal sequence {seq:?}  time {t:.3} s");
            Ok(())
        }
        Err(e) => Err(Infeasible(e.to_string()).into()),
    }
}

fn agent_config(a: &SimulateArgs) -> Result<AgentConfig> {
    let mut cfg = load_config(a.config.as_deref())?;
    a.decision.apply(&mut cfg.decision);
    if let Some(f) = a.fov {
        cfg.fov = f.to_radians();
    }
    cfg.validate()
        .map_err(anyhow::Error::msg)
        .context("invalid configuration")?;
    Ok(cfg)
}

fn simulate_one(
    input: &Input,
    nodes: &NodeSet,
    cfg: &AgentConfig,
    n_runs: usize,
    dir: &Path,
) -> Result<ExperimentSummary> {
    let ex = run_experiment_from(
        &input.env,
        nodes,
        KnowledgeBase::new(nodes.len()),
        n_runs,
        cfg,
    );
    let mut out = Output::create(dir)?;
    for (r, log) in ex.logs.iter().enumerate() {
        out.write(&format!("run-{r:03}.csv"), &write_runlog_csv(log)?)?;
        out.write(&format!("kb-{r:03}.json"), &to_json(&ex.kb_history[r + 1])?)?;
    }
    let summary = ExperimentSummary::new(cfg.seed, &ex);
    out.write("summary.json", &to_json(&summary)?)?;
    out.finish("simulate", Some(cfg.seed), Some(input), to_value(cfg)?)?;
    Ok(summary)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let input = load_env(&a.env)?;
    let cfg = agent_config(&a)?;
    let nodes = nodes_of(&input.env)?;
    check_feasible(&input.env)?;
    let n_runs = a.runs as usize;
    let report = |s: &ExperimentSummary| {
        let done = s.flight_times.iter().flatten().count();
        let best = s
            .best_flight_time
            .map_or("-".to_string(), |t| format!("{t:.2} s"));
        println!(
            "seed {}: {done}/{} runs reached the goal, best {best}, final EM {:.3}",
            s.seed,
            s.n_runs,
            s.em_per_run.last().copied().unwrap_or(0.0)
        );
    };
    match a.parallel_seeds {
        None => report(&simulate_one(
            &input,
            &nodes,
            &AgentConfig {
                seed: a.seed,
                ..cfg
            },
            n_runs,
            &a.out,
        )?),
        Some(k) => {
            let seeds: Vec<u64> = (a.seed..a.seed + k).collect();
            let summaries: Vec<ExperimentSummary> = seeds
                .par_iter()
                .map(|&s| {
                    simulate_one(
                        &input,
                        &nodes,
                        &AgentConfig { seed: s, ..cfg },
                        n_runs,
                        &a.out.join(format!("seed-{s}")),
                    )
                })
                .collect::<Result<_>>()?;
            summaries.iter().for_each(report);
        }
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DecisionsReport {
    schema: String,
    params: DecisionParams,
    t_w: f64,
    fov: f64,
    records: Vec<DecisionRecord>,
    accuracy: Option<AccuracyReport>,
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let input = load_env(&a.env)?;
    let mut cfg = load_config(a.config.as_deref())?;
    a.decision.apply(&mut cfg.decision);
    cfg.decision.validate()?;
    if !(a.tw >= 0.0) || !(a.fov > 0.0) {
        bail!("--tw must be non-negative and --fov positive");
    }
    let fov = a.fov.to_radians();
    let nodes = nodes_of(&input.env)?;
    let logs = load_logs(&a.logs)?;
    let parsed: Vec<_> = logs
        .iter()
        .map(|l| parse_run(l, &nodes, cfg.r_thresh, MIN_WINDOW))
        .collect();

    // knowledge before each run id, replayed in run order
    let mut kb = KnowledgeBase::new(nodes.len());
    let mut before = Vec::new();
    let mut records = Vec::new();
    for (log, p) in logs.iter().zip(&parsed) {
        while before.len() <= log.run_id {
            before.push(kb.clone());
        }
        let vis: Vec<Vec<usize>> = p
            .sequence
            .iter()
            .map(|v| vis_window(log, &nodes, &input.env, v.t, a.tw, fov))
            .collect();
        records.extend(extract_decisions(p, &kb, &cfg.decision, &vis));
        learn(&mut kb, p);
    }
    let accuracy = score_model_accuracy(&records, &before, &cfg.decision);
    let completed = logs.iter().filter(|l| l.flight_time.is_some()).count();
    let metrics = behavior_metrics(
        &logs,
        &nodes,
        cfg.vehicle.v_max,
        cfg.r_thresh,
        SEGMENT_HALF_WIDTH,
        1.0,
    );

    let mut out = Output::create(&a.out)?;
    out.write("parsed.json", &to_json(&ParsedRuns::new(parsed))?)?;
    out.write("kb.json", &to_json(&kb)?)?;
    out.write(
        "decisions.json",
        &to_json(&DecisionsReport {
            schema: "decisions/1".to_string(),
            params: cfg.decision,
            t_w: a.tw,
            fov,
            records,
            accuracy,
        })?,
    )?;
    out.write(
        "metrics.json",
        &to_json(&MetricsReport::new(logs.len(), completed, metrics))?,
    )?;
    out.finish("analyze", None, Some(&input), to_value(&cfg)?)?;
    println!(
        "parsed {} runs ({completed} completed), EM {:.3}",
        logs.len(),
        kb.exploration_metric()
    );
    match accuracy {
        Some(r) => println!(
            "model accuracy {}/{} = {:.3}",
            r.correct, r.total, r.accuracy
        ),
        None => println!("model accuracy: no case-C decisions"),
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ClusterSummary {
    index: usize,
    members: Vec<usize>,
    frequency: f64,
    v_mean: f64,
    u_v: f64,
}

#[derive(Serialize, Deserialize)]
struct ClusterReport {
    schema: String,
    segments: usize,
    weight: TimeWeight,
    half_width: f64,
    clusters: Vec<ClusterSummary>,
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let input = load_env(&a.env)?;
    let cfg = load_config(a.config.as_deref())?;
    if !(a.half_width > 0.0) {
        bail!("--half-width must be positive");
    }
    let nodes = nodes_of(&input.env)?;
    let logs = load_logs(&a.logs)?;
    let segments: Vec<_> = logs
        .iter()
        .flat_map(|l| {
            extract_segments(
                l,
                &parse_run(l, &nodes, cfg.r_thresh, MIN_WINDOW),
                &nodes,
                a.half_width,
            )
        })
        .collect();
    let weight = match a.weight {
        WeightArg::Printed => TimeWeight::Printed,
        WeightArg::CornerPeaked => TimeWeight::CornerPeaked,
    };
    let clusters = cluster_segments(&segments, a.clusters as usize, weight)?;
    let mut out = Output::create(&a.out)?;
    out.write(
        "assignment.csv",
        &write_assignment_csv(&assignment_rows(&segments, &clusters))?,
    )?;
    out.write("means.csv", &write_mean_csv(&mean_rows(&clusters))?)?;
    let report = ClusterReport {
        schema: "clusters/1".to_string(),
        segments: segments.len(),
        weight,
        half_width: a.half_width,
        clusters: clusters
            .iter()
            .enumerate()
            .map(|(i, c)| ClusterSummary {
                index: i,
                members: c.members.clone(),
                frequency: c.frequency,
                v_mean: c.v_mean,
                u_v: c.u_v,
            })
            .collect(),
    };
    out.write("clusters.json", &to_json(&report)?)?;
    out.finish(
        "cluster",
        None,
        Some(&input),
        serde_json::json!({ "r_thresh": cfg.r_thresh, "clusters": a.clusters }),
    )?;
    println!("{} segments in {} clusters", segments.len(), clusters.len());
    for c in &report.clusters {
        println!(
            "  {}: {} members  frequency {:.3}  V {:.2} m/s  U {:.2} m/s",
            c.index,
            c.members.len(),
            c.frequency,
            c.v_mean,
            c.u_v
        );
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct DecisionReport {
    schema: String,
    node: usize,
    case: DecisionCase,
    params: DecisionParams,
    prediction: Option<Prediction>,
}

fn decide(a: DecideArgs) -> Result<()> {
    let text = fs::read_to_string(&a.kb).with_context(|| format!("reading {}", a.kb.display()))?;
    let kb: KnowledgeBase =
        from_json(&text).with_context(|| format!("invalid knowledge base {}", a.kb.display()))?;
    let n = kb.n_nodes;
    if kb.ctg_lists.len() != n || kb.q_counts.len() != n || kb.dc_lists.len() != n {
        bail!("knowledge base lists do not match n_nodes = {n}");
    }
    if a.node >= n {
        bail!("node {} outside a knowledge base of {n} nodes", a.node);
    }
    let mut params = DecisionParams::default();
    a.decision.apply(&mut params);
    params.validate()?;
    let case = classify_case(&kb, a.node);
    let prediction = predict_next_node(&kb, a.node, &params).ok();
    println!("node {}  case {case:?}", a.node);
    match &prediction {
        Some(p) => {
            println!("predicted {}  value {:.4}", p.node, p.value);
            for c in &p.table {
                let v = c.value.map_or("none".to_string(), |v| format!("{v:.4}"));
                println!("  candidate {:>3}  value {v}", c.node);
            }
        }
        None => println!("predicted none"),
    }
    if let Some(dir) = &a.out {
        let mut out = Output::create(dir)?;
        let report = DecisionReport {
            schema: "decision/1".to_string(),
            node: a.node,
            case,
            params,
            prediction,
        };
        out.write("decision.json", &to_json(&report)?)?;
        out.finish("decide", None, None, to_value(&params)?)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Bench(a) => bench(a),
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Cluster(a) => cluster(a),
        Command::Decide(a) => decide(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Infeasible>().is_some() {
                ExitCode::from(4)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
