//! File formats: JSON spec documents, event logs (JSON Lines or CSV), and
//! evaluation reports (JSON or CSV).
//!
//! All files are UTF-8 with LF newlines. Report output is deterministic:
//! fixed key order, input trace order, numbers rounded to at most 12
//! significant digits, so identical inputs produce byte-identical reports.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::ProcessResult;
use crate::model::{
    format_findings, validate_spec, AggregatorChoice, AttributeSpec, AttributeValue,
    ComplianceSpec, CutoffThreshold, DimensionId, Finding, FindingCode, NumberUnit, ProcessLog,
    Severity, TaskEvent, TaskSelector, Trace, Value,
};
use crate::projection::{CategoricalMap, Direction, NumericBands, ProjectionFn};
use crate::rule;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("IO_ERROR: {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("MALFORMED_DOCUMENT: {location}: {message}")]
    Malformed { location: String, message: String },
    #[error("SPEC_INVALID: the spec has validation errors:\n{}", format_findings(.findings))]
    SpecInvalid { findings: Vec<Finding> },
    #[error("DUPLICATE_TRACE_ID: trace '{0}' appears more than once in the log")]
    DuplicateTraceId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogFormat {
    Jsonl,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

// --- spec documents --------------------------------------------------------

/// The on-disk shape of a compliance spec.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    #[serde(rename = "specId")]
    pub spec_id: String,
    #[serde(default)]
    pub dimensions: BTreeMap<String, CutoffThresholdDoc>,
    #[serde(default)]
    pub aggregators: AggregatorsDoc,
    #[serde(default)]
    pub rules: BTreeMap<String, String>,
    pub attributes: Vec<AttributeDoc>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CutoffThresholdDoc {
    pub cutoff: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AggregatorsDoc {
    pub attribute: AggregatorDoc,
    pub dimension: AggregatorDoc,
    pub trace: AggregatorDoc,
}

impl Default for AggregatorsDoc {
    fn default() -> Self {
        AggregatorsDoc {
            attribute: AggregatorDoc::Name("average".into()),
            dimension: AggregatorDoc::Name("average".into()),
            trace: AggregatorDoc::Name("average".into()),
        }
    }
}

/// Either a plain aggregator name or `{"rule": "<name>"}`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum AggregatorDoc {
    Rule { rule: String },
    Name(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttributeDoc {
    /// Task id or `*` for any task.
    pub task: String,
    pub name: String,
    pub dimension: String,
    #[serde(default = "default_weight")]
    pub weight: f64,
    #[serde(default)]
    pub meta: bool,
    #[serde(default)]
    pub cutoff: Option<f64>,
    #[serde(default)]
    pub threshold: Option<f64>,
    #[serde(default)]
    pub projection: Option<ProjectionDoc>,
}

fn default_weight() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProjectionDoc {
    Bands {
        direction: DirectionDoc,
        bands: Vec<BandDoc>,
        /// Score for values outside every band.
        #[serde(rename = "else")]
        fallback: f64,
    },
    Categorical {
        /// Ordered worst level first.
        scale: Vec<String>,
        /// Omitted scores mean the uniform `i/k` default scheme.
        #[serde(default)]
        scores: Option<BTreeMap<String, f64>>,
    },
    Rule {
        rule: String,
    },
    Constant {
        score: f64,
    },
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DirectionDoc {
    LowerIsBetter,
    HigherIsBetter,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandDoc {
    /// Inclusive upper bound for lower-is-better scales, inclusive lower
    /// bound for higher-is-better scales.
    pub bound: f64,
    pub score: f64,
}

/// Parses a spec document, reporting type errors with their JSON path.
pub fn parse_spec_document(text: &str) -> Result<SpecDocument, IoError> {
    let mut deserializer = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut deserializer).map_err(|e| {
        let path = e.path().to_string();
        IoError::Malformed {
            location: if path == "." {
                "$".to_string()
            } else {
                format!("$.{path}")
            },
            message: e.inner().to_string(),
        }
    })
}

/// Converts a parsed document into a [`ComplianceSpec`], returning every
/// validation finding (rule parse failures included). The spec is usable iff
/// no finding has error severity.
pub fn build_spec(doc: &SpecDocument) -> (ComplianceSpec, Vec<Finding>) {
    let mut findings = Vec::new();
    let mut spec = ComplianceSpec::new(doc.spec_id.clone());

    for (name, ct) in &doc.dimensions {
        let id = DimensionId::new(name);
        let previous = spec
            .dimension_defaults
            .insert(id.clone(), CutoffThreshold::new(ct.cutoff, ct.threshold));
        if previous.is_some() {
            findings.push(Finding::error(
                FindingCode::DuplicateDimensionDefault,
                format!("dimensions.{name}"),
                format!("dimension '{id}' already has a default (names are case-insensitive)"),
            ));
        }
    }

    for (name, source) in &doc.rules {
        match rule::parse(source) {
            Ok(ast) => {
                spec.rules.insert(name.clone(), ast);
            }
            Err(e) => findings.push(Finding::error(
                FindingCode::RuleParseError,
                format!("rules.{name}"),
                e.to_string(),
            )),
        }
    }

    for (slot, doc_choice, target) in [
        ("attribute", &doc.aggregators.attribute, 0usize),
        ("dimension", &doc.aggregators.dimension, 1),
        ("trace", &doc.aggregators.trace, 2),
    ] {
        let choice = match aggregator_from_doc(doc_choice) {
            Ok(choice) => choice,
            Err(name) => {
                findings.push(Finding::error(
                    FindingCode::UnknownAggregator,
                    format!("aggregators.{slot}"),
                    format!(
                        "'{name}' is not an aggregator; use average, weighted-average, product, min, max or {{\"rule\": ...}}"
                    ),
                ));
                AggregatorChoice::Average
            }
        };
        match target {
            0 => spec.attribute_aggregator = choice,
            1 => spec.dimension_aggregator = choice,
            _ => spec.trace_aggregator = choice,
        }
    }

    for (index, attr) in doc.attributes.iter().enumerate() {
        let path = format!("attributes[{index}]");
        let cutoff_override = match (attr.cutoff, attr.threshold) {
            (Some(cutoff), Some(threshold)) => Some(CutoffThreshold::new(cutoff, threshold)),
            (None, None) => None,
            _ => {
                findings.push(Finding::error(
                    FindingCode::MissingCutoff,
                    &path,
                    "cutoff and threshold must be given together",
                ));
                None
            }
        };
        let projection = attr.projection.as_ref().map(projection_from_doc);
        spec.attribute_specs.push(AttributeSpec {
            task_selector: if attr.task == "*" {
                TaskSelector::Any
            } else {
                TaskSelector::Task(attr.task.clone())
            },
            attribute_name: attr.name.clone(),
            dimension: DimensionId::new(&attr.dimension),
            projection,
            weight: attr.weight,
            cutoff_override,
            meta: attr.meta,
        });
    }

    findings.extend(validate_spec(&spec));
    (spec, findings)
}

fn aggregator_from_doc(doc: &AggregatorDoc) -> Result<AggregatorChoice, String> {
    match doc {
        AggregatorDoc::Rule { rule } => Ok(AggregatorChoice::Rule(rule.clone())),
        AggregatorDoc::Name(name) => match name.to_lowercase().as_str() {
            "average" => Ok(AggregatorChoice::Average),
            "weighted-average" => Ok(AggregatorChoice::WeightedAverage),
            "product" => Ok(AggregatorChoice::Product),
            "min" => Ok(AggregatorChoice::Min),
            "max" => Ok(AggregatorChoice::Max),
            other => Err(other.to_string()),
        },
    }
}

fn projection_from_doc(doc: &ProjectionDoc) -> ProjectionFn {
    match doc {
        ProjectionDoc::Bands {
            direction,
            bands,
            fallback,
        } => ProjectionFn::Bands(NumericBands {
            direction: match direction {
                DirectionDoc::LowerIsBetter => Direction::LowerIsBetter,
                DirectionDoc::HigherIsBetter => Direction::HigherIsBetter,
            },
            bands: bands
                .iter()
                .map(|b| crate::projection::Band {
                    bound: b.bound,
                    score: b.score,
                })
                .collect(),
            fallback: *fallback,
        }),
        ProjectionDoc::Categorical { scale, scores } => match scores {
            Some(scores) => ProjectionFn::Categorical(CategoricalMap {
                scale: scale.clone(),
                scores: scores.clone(),
                default_scheme: false,
            }),
            None => {
                // degenerate scales surface through validate_spec
                match crate::projection::default_scale_map(scale) {
                    Ok(map) => ProjectionFn::Categorical(map),
                    Err(_) => ProjectionFn::Categorical(CategoricalMap {
                        scale: scale.clone(),
                        scores: BTreeMap::new(),
                        default_scheme: true,
                    }),
                }
            }
        },
        ProjectionDoc::Rule { rule } => ProjectionFn::RuleRef(rule.clone()),
        ProjectionDoc::Constant { score } => ProjectionFn::Constant(*score),
    }
}

fn read_file(path: &Path) -> Result<String, IoError> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads and validates a spec; any error-severity finding aborts the load.
pub fn load_spec(path: impl AsRef<Path>) -> Result<ComplianceSpec, IoError> {
    let (spec, findings) = load_spec_with_findings(path)?;
    if findings.iter().any(|f| f.severity == Severity::Error) {
        return Err(IoError::SpecInvalid { findings });
    }
    Ok(spec)
}

/// Loads a spec but returns validation findings as data instead of failing,
/// so callers can print all of them. IO and JSON errors still fail.
pub fn load_spec_with_findings(
    path: impl AsRef<Path>,
) -> Result<(ComplianceSpec, Vec<Finding>), IoError> {
    let text = read_file(path.as_ref())?;
    let doc = parse_spec_document(&text)?;
    Ok(build_spec(&doc))
}

// --- event logs ------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TraceLine {
    #[serde(rename = "traceId")]
    trace_id: String,
    events: Vec<EventLine>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventLine {
    task: String,
    #[serde(default)]
    attrs: BTreeMap<String, AttrJson>,
}

/// A JSONL attribute value: a number, a string (ISO dates load as dates), or
/// `{"level": ...}` for categorical levels. Numbers carry no unit tag in
/// JSONL; use the CSV format when units matter.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum AttrJson {
    Number(f64),
    Level { level: String },
    Text(String),
}

fn value_from_json(attr: AttrJson) -> Value {
    match attr {
        AttrJson::Number(value) => Value::Number {
            value,
            unit: NumberUnit::Plain,
        },
        AttrJson::Level { level } => Value::Level(level),
        AttrJson::Text(text) => match parse_iso_date(&text) {
            Some(date) => Value::Date(date),
            None => Value::Text(text),
        },
    }
}

fn value_to_json(value: &Value) -> AttrJson {
    match value {
        Value::Number { value, .. } => AttrJson::Number(*value),
        Value::Level(level) => AttrJson::Level {
            level: level.clone(),
        },
        Value::Text(text) => AttrJson::Text(text.clone()),
        Value::Date(date) => AttrJson::Text(date.format("%Y-%m-%d").to_string()),
    }
}

fn parse_iso_date(text: &str) -> Option<chrono::NaiveDate> {
    if text.len() != 10 {
        return None;
    }
    chrono::NaiveDate::parse_from_str(text, "%Y-%m-%d").ok()
}

/// Loads a process log; the process id is the file stem.
pub fn load_log(path: impl AsRef<Path>, format: LogFormat) -> Result<ProcessLog, IoError> {
    let path = path.as_ref();
    let text = read_file(path)?;
    let process_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("process")
        .to_string();
    match format {
        LogFormat::Jsonl => parse_log_jsonl(&text, &process_id),
        LogFormat::Csv => parse_log_csv(&text, &process_id),
    }
}

/// Parses JSON Lines: one trace per line, event positions implied by order.
pub fn parse_log_jsonl(text: &str, process_id: &str) -> Result<ProcessLog, IoError> {
    let mut traces = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let line_no = index + 1;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine =
            serde_json::from_str(line).map_err(|e| IoError::Malformed {
                location: format!("line {line_no}"),
                message: e.to_string(),
            })?;
        let mut events = Vec::new();
        for (position, event) in parsed.events.into_iter().enumerate() {
            let attributes = event
                .attrs
                .into_iter()
                .map(|(name, attr)| AttributeValue {
                    name,
                    value: value_from_json(attr),
                })
                .collect();
            events.push(
                TaskEvent::new(event.task, position, attributes).map_err(|e| {
                    IoError::Malformed {
                        location: format!("line {line_no}"),
                        message: e.to_string(),
                    }
                })?,
            );
        }
        traces.push(
            Trace::new(parsed.trace_id, events).map_err(|e| IoError::Malformed {
                location: format!("line {line_no}"),
                message: e.to_string(),
            })?,
        );
    }
    log_from_traces(process_id, traces)
}

const CSV_LOG_HEADER: [&str; 6] = [
    "traceId",
    "position",
    "task",
    "attrName",
    "attrValue",
    "attrKind",
];

/// Parses the CSV log encoding: one row per attribute, explicit positions.
/// A row with empty `attrName`/`attrValue`/`attrKind` marks an event that
/// carries no attributes.
pub fn parse_log_csv(text: &str, process_id: &str) -> Result<ProcessLog, IoError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(text.as_bytes());
    let headers = reader
        .headers()
        .map_err(|e| IoError::Malformed {
            location: "line 1".to_string(),
            message: e.to_string(),
        })?
        .clone();
    if headers.iter().collect::<Vec<_>>() != CSV_LOG_HEADER {
        return Err(IoError::Malformed {
            location: "line 1".to_string(),
            message: format!(
                "header must be exactly {}",
                CSV_LOG_HEADER.join(",")
            ),
        });
    }

    // trace id -> position -> (task, attributes), traces kept in file order
    let mut order: Vec<String> = Vec::new();
    let mut by_trace: BTreeMap<String, BTreeMap<usize, (String, Vec<AttributeValue>)>> =
        BTreeMap::new();

    for record in reader.records() {
        let record = record.map_err(|e| IoError::Malformed {
            location: "csv".to_string(),
            message: e.to_string(),
        })?;
        let line_no = record
            .position()
            .map(|p| p.line().to_string())
            .unwrap_or_else(|| "?".to_string());
        let location = format!("line {line_no}");
        let field = |i: usize| record.get(i).unwrap_or("").to_string();
        let trace_id = field(0);
        if trace_id.is_empty() {
            return Err(IoError::Malformed {
                location,
                message: "traceId must not be empty".to_string(),
            });
        }
        let position: usize = field(1).parse().map_err(|_| IoError::Malformed {
            location: location.clone(),
            message: format!("position '{}' is not a non-negative integer", field(1)),
        })?;
        let task = field(2);
        let (attr_name, attr_value, attr_kind) = (field(3), field(4), field(5));

        if !by_trace.contains_key(&trace_id) {
            order.push(trace_id.clone());
        }
        let events = by_trace.entry(trace_id).or_default();
        let slot = events
            .entry(position)
            .or_insert_with(|| (task.clone(), Vec::new()));
        if slot.0 != task {
            return Err(IoError::Malformed {
                location,
                message: format!(
                    "position {position} already belongs to task '{}', not '{task}'",
                    slot.0
                ),
            });
        }
        if attr_name.is_empty() {
            if !attr_value.is_empty() || !attr_kind.is_empty() {
                return Err(IoError::Malformed {
                    location,
                    message: "an event-marker row must leave attrValue and attrKind empty"
                        .to_string(),
                });
            }
            continue; // marker row: event exists, no attributes
        }
        if slot.1.iter().any(|a| a.name == attr_name) {
            return Err(IoError::Malformed {
                location,
                message: format!("attribute '{attr_name}' repeated within one event"),
            });
        }
        let value = parse_csv_value(&attr_value, &attr_kind).map_err(|message| {
            IoError::Malformed { location, message }
        })?;
        slot.1.push(AttributeValue {
            name: attr_name,
            value,
        });
    }

    let mut traces = Vec::new();
    for trace_id in order {
        let events_by_position = by_trace.remove(&trace_id).expect("collected above");
        let mut events = Vec::new();
        for (index, (position, (task, attributes))) in events_by_position.into_iter().enumerate() {
            if position != index {
                return Err(IoError::Malformed {
                    location: format!("trace '{trace_id}'"),
                    message: format!(
                        "event positions must be exactly 0..n-1; position {index} is missing"
                    ),
                });
            }
            events.push(TaskEvent::new(task, position, attributes).map_err(|e| {
                IoError::Malformed {
                    location: format!("trace '{trace_id}'"),
                    message: e.to_string(),
                }
            })?);
        }
        traces.push(
            Trace::new(trace_id.clone(), events).map_err(|e| IoError::Malformed {
                location: format!("trace '{trace_id}'"),
                message: e.to_string(),
            })?,
        );
    }
    log_from_traces(process_id, traces)
}

fn parse_csv_value(raw: &str, kind: &str) -> Result<Value, String> {
    let number = |unit: NumberUnit| -> Result<Value, String> {
        raw.parse::<f64>()
            .map(|value| Value::Number { value, unit })
            .map_err(|_| format!("attrValue '{raw}' is not a number"))
    };
    match kind {
        "number" => number(NumberUnit::Plain),
        "days" => number(NumberUnit::Days),
        "currency" => number(NumberUnit::Currency),
        "percent" => number(NumberUnit::Percent),
        "text" => Ok(Value::Text(raw.to_string())),
        "level" => Ok(Value::Level(raw.to_string())),
        "date" => parse_iso_date(raw)
            .map(Value::Date)
            .ok_or_else(|| format!("attrValue '{raw}' is not a YYYY-MM-DD date")),
        other => Err(format!(
            "attrKind '{other}' is not one of number, days, currency, percent, text, level, date"
        )),
    }
}

fn log_from_traces(process_id: &str, traces: Vec<Trace>) -> Result<ProcessLog, IoError> {
    ProcessLog::new(process_id, traces).map_err(|e| match e {
        crate::model::ModelError::DuplicateTraceId(id) => IoError::DuplicateTraceId(id),
        other => IoError::Malformed {
            location: "log".to_string(),
            message: other.to_string(),
        },
    })
}

/// Serializes a log as JSON Lines. Number unit tags are not representable in
/// JSONL and are dropped; dates become ISO strings (which load back as dates).
pub fn render_log_jsonl(log: &ProcessLog) -> String {
    let mut out = String::new();
    for trace in &log.traces {
        let line = TraceLine {
            trace_id: trace.trace_id.clone(),
            events: trace
                .events
                .iter()
                .map(|event| EventLine {
                    task: event.task_id.clone(),
                    attrs: event
                        .attributes
                        .iter()
                        .map(|a| (a.name.clone(), value_to_json(&a.value)))
                        .collect(),
                })
                .collect(),
        };
        out.push_str(&serde_json::to_string(&line).expect("log lines serialize"));
        out.push('\n');
    }
    out
}

/// Serializes a log as CSV with full fidelity (units, dates, levels).
pub fn render_log_csv(log: &ProcessLog) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(CSV_LOG_HEADER).expect("header writes");
    for trace in &log.traces {
        for event in &trace.events {
            let position = event.position.to_string();
            if event.attributes.is_empty() {
                writer
                    .write_record([
                        trace.trace_id.as_str(),
                        &position,
                        &event.task_id,
                        "",
                        "",
                        "",
                    ])
                    .expect("row writes");
            }
            for attribute in &event.attributes {
                let (value, kind) = match &attribute.value {
                    Value::Number { value, unit } => (format!("{value}"), unit.as_str()),
                    Value::Text(text) => (text.clone(), "text"),
                    Value::Level(level) => (level.clone(), "level"),
                    Value::Date(date) => (date.format("%Y-%m-%d").to_string(), "date"),
                };
                writer
                    .write_record([
                        trace.trace_id.as_str(),
                        &position,
                        &event.task_id,
                        &attribute.name,
                        &value,
                        kind,
                    ])
                    .expect("row writes");
            }
        }
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv is utf-8")
}

/// Writes a log to disk, returning the byte count written.
pub fn emit_log(
    log: &ProcessLog,
    path: impl AsRef<Path>,
    format: LogFormat,
) -> Result<u64, IoError> {
    let text = match format {
        LogFormat::Jsonl => render_log_jsonl(log),
        LogFormat::Csv => render_log_csv(log),
    };
    write_file(path.as_ref(), &text)
}

// --- reports ----------------------------------------------------------------

#[derive(Serialize)]
struct ReportDoc {
    #[serde(rename = "specId")]
    spec_id: String,
    #[serde(rename = "processId")]
    process_id: String,
    #[serde(rename = "pMeasure")]
    p_measure: Option<f64>,
    traces: Vec<TraceReport>,
}

#[derive(Serialize)]
struct TraceReport {
    #[serde(rename = "traceId")]
    trace_id: String,
    #[serde(rename = "tauMeasure")]
    tau_measure: Option<f64>,
    class: &'static str,
    #[serde(rename = "dimensionMinima")]
    dimension_minima: BTreeMap<String, f64>,
    tasks: Vec<TaskReport>,
}

#[derive(Serialize)]
struct TaskReport {
    task: String,
    #[serde(rename = "tMeasure")]
    t_measure: Option<f64>,
    class: Option<&'static str>,
    dimensions: Vec<DimensionReport>,
}

#[derive(Serialize)]
struct DimensionReport {
    dimension: String,
    value: Option<f64>,
    class: Option<&'static str>,
    contributing: Vec<ContributionReport>,
}

#[derive(Serialize)]
struct ContributionReport {
    attribute: String,
    score: Option<f64>,
}

/// Rounds to at most 12 significant digits so serialized reports do not leak
/// accumulation noise and stay byte-stable.
pub fn sig12(x: f64) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = x.abs().log10().floor() as i32;
    let factor = 10f64.powi(11 - magnitude);
    (x * factor).round() / factor
}

fn report_doc(result: &ProcessResult) -> ReportDoc {
    ReportDoc {
        spec_id: result.spec_id.clone(),
        process_id: result.process_id.clone(),
        p_measure: result.p_measure.value().map(sig12),
        traces: result
            .trace_results
            .iter()
            .map(|trace| TraceReport {
                trace_id: trace.trace_id.clone(),
                tau_measure: trace.tau_measure.value().map(sig12),
                class: trace.class.as_str(),
                dimension_minima: trace
                    .dimension_minima
                    .iter()
                    .map(|(dimension, minimum)| (dimension.to_string(), sig12(*minimum)))
                    .collect(),
                tasks: trace
                    .task_results
                    .iter()
                    .map(|task| TaskReport {
                        task: task.task_id.clone(),
                        t_measure: task.t_measure.value().map(sig12),
                        class: task.class.map(|c| c.as_str()),
                        dimensions: task
                            .dimension_metrics
                            .iter()
                            .map(|metric| DimensionReport {
                                dimension: metric.dimension.to_string(),
                                value: metric.value.value().map(sig12),
                                class: metric.class.map(|c| c.as_str()),
                                contributing: metric
                                    .contributing
                                    .iter()
                                    .map(|(attribute, score)| ContributionReport {
                                        attribute: attribute.clone(),
                                        score: score.value().map(sig12),
                                    })
                                    .collect(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    }
}

/// The JSON report: schema-ordered keys, input trace order, trailing LF.
pub fn render_report_json(result: &ProcessResult) -> String {
    let mut text =
        serde_json::to_string_pretty(&report_doc(result)).expect("report serializes");
    text.push('\n');
    text
}

fn fmt_opt(value: Option<f64>) -> String {
    value.map(|v| sig12(v).to_string()).unwrap_or_default()
}

/// The CSV report: one row per (trace, task, dimension); tasks the spec
/// scores nothing on keep a row with empty dimension columns.
pub fn render_report_csv(result: &ProcessResult) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "specId",
            "processId",
            "pMeasure",
            "traceId",
            "tauMeasure",
            "traceClass",
            "task",
            "tMeasure",
            "taskClass",
            "dimension",
            "value",
            "class",
            "contributing",
        ])
        .expect("header writes");
    let p = fmt_opt(result.p_measure.value());
    for trace in &result.trace_results {
        let tau = fmt_opt(trace.tau_measure.value());
        for task in &trace.task_results {
            let t = fmt_opt(task.t_measure.value());
            let task_class = task.class.map(|c| c.as_str()).unwrap_or_default();
            let mut write_row = |dimension: &str, value: String, class: &str, contrib: String| {
                writer
                    .write_record([
                        result.spec_id.as_str(),
                        result.process_id.as_str(),
                        &p,
                        &trace.trace_id,
                        &tau,
                        trace.class.as_str(),
                        &task.task_id,
                        &t,
                        task_class,
                        dimension,
                        &value,
                        class,
                        &contrib,
                    ])
                    .expect("row writes");
            };
            if task.dimension_metrics.is_empty() {
                write_row("", String::new(), "", String::new());
            }
            for metric in &task.dimension_metrics {
                let contributing = metric
                    .contributing
                    .iter()
                    .map(|(name, score)| {
                        format!(
                            "{name}={}",
                            score
                                .value()
                                .map(|v| sig12(v).to_string())
                                .unwrap_or_else(|| "null".to_string())
                        )
                    })
                    .collect::<Vec<_>>()
                    .join(";");
                write_row(
                    metric.dimension.as_str(),
                    fmt_opt(metric.value.value()),
                    metric.class.map(|c| c.as_str()).unwrap_or_default(),
                    contributing,
                );
            }
        }
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv is utf-8")
}

/// Writes an evaluation report, returning the byte count written.
pub fn emit_report(
    result: &ProcessResult,
    path: impl AsRef<Path>,
    format: ReportFormat,
) -> Result<u64, IoError> {
    let text = match format {
        ReportFormat::Json => render_report_json(result),
        ReportFormat::Csv => render_report_csv(result),
    };
    write_file(path.as_ref(), &text)
}

fn write_file(path: &Path, text: &str) -> Result<u64, IoError> {
    fs::write(path, text).map_err(|source| IoError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(text.len() as u64)
}
