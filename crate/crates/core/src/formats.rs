//! On-disk formats. JSON files carry a `schema` field, CSV files a leading
//! `# schema=...` comment line with `key=value` metadata. Writers are
//! deterministic, and reading a file back and writing it again reproduces
//! the same bytes.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{BehaviorMetrics, CornerSegment, ParsedRun, PrimitiveCluster};
use crate::decision::DecisionRecord;
use crate::dynamics::{ControlInput, VehicleState};
use crate::simulator::{Experiment, LogSample, Outcome, RunLog};

pub const RUNLOG_SCHEMA: &str = "runlog/1";
pub const SUMMARY_SCHEMA: &str = "summary/1";
pub const PARSED_SCHEMA: &str = "parsed-runs/1";
pub const METRICS_SCHEMA: &str = "metrics/1";
pub const ASSIGNMENT_SCHEMA: &str = "cluster-assignment/1";
pub const MEAN_SCHEMA: &str = "cluster-mean/1";

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("missing `# schema=` header line")]
    MissingHeader,
    #[error("expected schema `{expected}`, found `{found}`")]
    Schema { expected: String, found: String },
    #[error("bad header field `{0}`")]
    Header(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String, FormatError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn from_json<T: DeserializeOwned>(s: &str) -> Result<T, FormatError> {
    Ok(serde_json::from_str(s)?)
}

fn header_line(schema: &str, fields: &[(&str, String)]) -> String {
    let mut line = format!("# schema={schema}");
    for (k, v) in fields {
        line.push_str(&format!(" {k}={v}"));
    }
    line.push('\n');
    line
}

type Header = Vec<(String, String)>;

/// Splits off the header line and returns its `key=value` pairs (schema
/// first) and the remaining CSV body.
fn split_header<'a>(s: &'a str, schema: &str) -> Result<(Header, &'a str), FormatError> {
    let (first, body) = s.split_once('\n').unwrap_or((s, ""));
    let rest = first.strip_prefix("# ").ok_or(FormatError::MissingHeader)?;
    let mut fields = Vec::new();
    for part in rest.split_whitespace() {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| FormatError::Header(part.to_string()))?;
        fields.push((k.to_string(), v.to_string()));
    }
    match fields.first() {
        Some((k, v)) if k == "schema" && v == schema => Ok((fields, body)),
        Some((k, v)) if k == "schema" => Err(FormatError::Schema {
            expected: schema.to_string(),
            found: v.clone(),
        }),
        _ => Err(FormatError::MissingHeader),
    }
}

fn field<'a>(fields: &'a [(String, String)], key: &str) -> Result<&'a str, FormatError> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| FormatError::Header(key.to_string()))
}

fn parse_field<T: std::str::FromStr>(
    fields: &[(String, String)],
    key: &str,
) -> Result<T, FormatError> {
    let v = field(fields, key)?;
    v.parse()
        .map_err(|_| FormatError::Header(format!("{key}={v}")))
}

fn write_rows<T: Serialize>(
    head: String,
    rows: impl IntoIterator<Item = T>,
) -> Result<String, FormatError> {
    let mut w = csv::Writer::from_writer(head.into_bytes());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| FormatError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn read_rows<T: DeserializeOwned>(body: &str) -> Result<Vec<T>, FormatError> {
    let mut r = csv::Reader::from_reader(body.as_bytes());
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Serialize, Deserialize)]
struct LogRow {
    t: f64,
    x: f64,
    y: f64,
    psi: f64,
    v: f64,
    u_lon: f64,
    u_lat: f64,
    subgoal: Option<usize>,
}

/// Run log as CSV: `t,x,y,psi,v,u_lon,u_lat,subgoal`, one row per sample.
pub fn write_runlog_csv(log: &RunLog) -> Result<String, FormatError> {
    let ft = log
        .flight_time
        .map_or("none".to_string(), |t| t.to_string());
    let head = header_line(
        RUNLOG_SCHEMA,
        &[
            ("run", log.run_id.to_string()),
            ("outcome", log.outcome.as_str().to_string()),
            ("flight_time", ft),
        ],
    );
    write_rows(
        head,
        log.samples.iter().map(|s| LogRow {
            t: s.t,
            x: s.state.x,
            y: s.state.y,
            psi: s.state.psi,
            v: s.state.v,
            u_lon: s.u.u_lon,
            u_lat: s.u.u_lat,
            subgoal: s.subgoal,
        }),
    )
}

pub fn read_runlog_csv(s: &str) -> Result<RunLog, FormatError> {
    let (fields, body) = split_header(s, RUNLOG_SCHEMA)?;
    let run_id = parse_field(&fields, "run")?;
    let outcome: Outcome = parse_field(&fields, "outcome")?;
    let flight_time = match field(&fields, "flight_time")? {
        "none" => None,
        _ => Some(parse_field(&fields, "flight_time")?),
    };
    let samples = read_rows::<LogRow>(body)?
        .into_iter()
        .map(|r| LogSample {
            t: r.t,
            state: VehicleState {
                x: r.x,
                y: r.y,
                psi: r.psi,
                v: r.v,
            },
            u: ControlInput::new(r.u_lon, r.u_lat),
            subgoal: r.subgoal,
        })
        .collect();
    Ok(RunLog {
        run_id,
        samples,
        outcome,
        flight_time,
    })
}

/// Result file of one `simulate` experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema: String,
    pub seed: u64,
    pub n_runs: usize,
    pub outcomes: Vec<Outcome>,
    pub flight_times: Vec<Option<f64>>,
    pub best_flight_time: Option<f64>,
    pub em_per_run: Vec<f64>,
    pub decisions: Vec<DecisionRecord>,
}

impl ExperimentSummary {
    pub fn new(seed: u64, ex: &Experiment) -> Self {
        Self {
            schema: SUMMARY_SCHEMA.to_string(),
            seed,
            n_runs: ex.logs.len(),
            outcomes: ex.logs.iter().map(|l| l.outcome).collect(),
            flight_times: ex.flight_times.clone(),
            best_flight_time: ex.flight_times.iter().flatten().copied().reduce(f64::min),
            em_per_run: ex.em_per_run.clone(),
            decisions: ex.decisions.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedRuns {
    pub schema: String,
    pub runs: Vec<ParsedRun>,
}

impl ParsedRuns {
    pub fn new(runs: Vec<ParsedRun>) -> Self {
        Self {
            schema: PARSED_SCHEMA.to_string(),
            runs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema: String,
    pub runs: usize,
    pub completed: usize,
    pub metrics: BehaviorMetrics,
}

impl MetricsReport {
    pub fn new(runs: usize, completed: usize, metrics: BehaviorMetrics) -> Self {
        Self {
            schema: METRICS_SCHEMA.to_string(),
            runs,
            completed,
            metrics,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRow {
    pub segment: usize,
    pub run: usize,
    pub corner: usize,
    pub reflected: bool,
    pub cluster: usize,
}

/// One row per segment with the cluster it was put in.
pub fn assignment_rows(
    segments: &[CornerSegment],
    clusters: &[PrimitiveCluster],
) -> Vec<AssignmentRow> {
    let mut of = vec![0; segments.len()];
    for (c, cl) in clusters.iter().enumerate() {
        for &m in &cl.members {
            of[m] = c;
        }
    }
    segments
        .iter()
        .enumerate()
        .map(|(i, s)| AssignmentRow {
            segment: i,
            run: s.run_id,
            corner: s.corner,
            reflected: s.reflected,
            cluster: of[i],
        })
        .collect()
}

pub fn write_assignment_csv(rows: &[AssignmentRow]) -> Result<String, FormatError> {
    write_rows(header_line(ASSIGNMENT_SCHEMA, &[]), rows)
}

pub fn read_assignment_csv(s: &str) -> Result<Vec<AssignmentRow>, FormatError> {
    read_rows(split_header(s, ASSIGNMENT_SCHEMA)?.1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub cluster: usize,
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub v: f64,
    pub omega: f64,
}

/// Mean corner-frame trajectory of every cluster, stacked.
pub fn mean_rows(clusters: &[PrimitiveCluster]) -> Vec<MeanRow> {
    clusters
        .iter()
        .enumerate()
        .flat_map(|(c, cl)| {
            cl.mean.iter().map(move |s| MeanRow {
                cluster: c,
                t: s.t,
                x: s.x,
                y: s.y,
                v: s.v,
                omega: s.omega,
            })
        })
        .collect()
}

pub fn write_mean_csv(rows: &[MeanRow]) -> Result<String, FormatError> {
    write_rows(header_line(MEAN_SCHEMA, &[]), rows)
}

pub fn read_mean_csv(s: &str) -> Result<Vec<MeanRow>, FormatError> {
    read_rows(split_header(s, MEAN_SCHEMA)?.1)
}
