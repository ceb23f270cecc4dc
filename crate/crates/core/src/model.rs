//! Shared domain vocabulary: dimensions, attribute values, events, traces,
//! logs and the compliance specification, plus structural spec validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::NaiveDate;
use thiserror::Error;

use crate::projection::{self, ProjectionFn};
use crate::rule::RuleAst;

/// Absolute tolerance for every real-number comparison in the engine.
pub const EPSILON: f64 = 1e-9;

pub(crate) fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EPSILON
}

pub(crate) fn approx_ge(a: f64, b: f64) -> bool {
    a >= b - EPSILON
}

pub(crate) fn approx_le(a: f64, b: f64) -> bool {
    a <= b + EPSILON
}

pub(crate) fn approx_gt(a: f64, b: f64) -> bool {
    a > b + EPSILON
}

pub(crate) fn approx_lt(a: f64, b: f64) -> bool {
    a < b - EPSILON
}

/// Errors raised when constructing core values with broken invariants.
#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("METRIC_OUT_OF_RANGE: {0} is outside [0, 1]")]
    MetricOutOfRange(f64),
    #[error("EMPTY_IDENTIFIER: {0} must not be empty")]
    EmptyIdentifier(&'static str),
    #[error("DUPLICATE_ATTRIBUTE: attribute '{0}' appears more than once in one event")]
    DuplicateAttribute(String),
    #[error("BAD_POSITIONS: trace '{0}' event positions must be exactly 0..n-1 in order")]
    BadPositions(String),
    #[error("EMPTY_TRACE: trace '{0}' has no events")]
    EmptyTrace(String),
    #[error("DUPLICATE_TRACE_ID: trace id '{0}' occurs more than once")]
    DuplicateTraceId(String),
}

/// A compliance dimension name, case-normalized at construction.
///
/// Two ids are equal iff their lowercased, trimmed names are equal, so
/// `Temporal` and `temporal` cannot split into separate dimensions. The
/// conventional names are `temporal`, `monetary`, `role`, `data`, `quality`
/// and `percentage`; arbitrary custom names are allowed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DimensionId(String);

impl DimensionId {
    pub fn new(name: impl AsRef<str>) -> Self {
        DimensionId(name.as_ref().trim().to_lowercase())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for DimensionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Unit tag carried by numeric attribute values. Purely informational: the
/// engine compares raw magnitudes and never converts between units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NumberUnit {
    Plain,
    Days,
    Currency,
    Percent,
}

impl NumberUnit {
    pub fn as_str(&self) -> &'static str {
        match self {
            NumberUnit::Plain => "number",
            NumberUnit::Days => "days",
            NumberUnit::Currency => "currency",
            NumberUnit::Percent => "percent",
        }
    }
}

/// A raw attribute value as recorded in an event log.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number { value: f64, unit: NumberUnit },
    Text(String),
    /// A label on an ordered categorical scale.
    Level(String),
    Date(NaiveDate),
}

impl Value {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Value::Number { .. } => "number",
            Value::Text(_) => "text",
            Value::Level(_) => "level",
            Value::Date(_) => "date",
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Value::Number { value, .. } => Some(*value),
            _ => None,
        }
    }
}

/// A named attribute-value pair attached to a task event.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeValue {
    pub name: String,
    pub value: Value,
}

impl AttributeValue {
    pub fn number(name: impl Into<String>, value: f64) -> Self {
        AttributeValue {
            name: name.into(),
            value: Value::Number {
                value,
                unit: NumberUnit::Plain,
            },
        }
    }

    pub fn number_with_unit(name: impl Into<String>, value: f64, unit: NumberUnit) -> Self {
        AttributeValue {
            name: name.into(),
            value: Value::Number { value, unit },
        }
    }

    pub fn text(name: impl Into<String>, text: impl Into<String>) -> Self {
        AttributeValue {
            name: name.into(),
            value: Value::Text(text.into()),
        }
    }

    pub fn level(name: impl Into<String>, level: impl Into<String>) -> Self {
        AttributeValue {
            name: name.into(),
            value: Value::Level(level.into()),
        }
    }

    pub fn date(name: impl Into<String>, date: NaiveDate) -> Self {
        AttributeValue {
            name: name.into(),
            value: Value::Date(date),
        }
    }
}

/// One executed task occurrence within a trace.
///
/// Attributes are stored sorted by name (the canonical order used everywhere
/// downstream); names must be unique within one event.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskEvent {
    pub task_id: String,
    /// 0-based ordinal of this event within its trace.
    pub position: usize,
    pub attributes: Vec<AttributeValue>,
}

impl TaskEvent {
    pub fn new(
        task_id: impl Into<String>,
        position: usize,
        mut attributes: Vec<AttributeValue>,
    ) -> Result<Self, ModelError> {
        let task_id = task_id.into();
        if task_id.is_empty() {
            return Err(ModelError::EmptyIdentifier("task id"));
        }
        attributes.sort_by(|a, b| a.name.cmp(&b.name));
        for pair in attributes.windows(2) {
            if pair[0].name == pair[1].name {
                return Err(ModelError::DuplicateAttribute(pair[0].name.clone()));
            }
        }
        Ok(TaskEvent {
            task_id,
            position,
            attributes,
        })
    }

    pub fn attribute(&self, name: &str) -> Option<&AttributeValue> {
        self.attributes.iter().find(|a| a.name == name)
    }
}

/// One recorded execution of a process: a non-empty ordered event sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub trace_id: String,
    pub events: Vec<TaskEvent>,
}

impl Trace {
    /// Event positions must be exactly `0..n-1` in order.
    pub fn new(trace_id: impl Into<String>, events: Vec<TaskEvent>) -> Result<Self, ModelError> {
        let trace_id = trace_id.into();
        if trace_id.is_empty() {
            return Err(ModelError::EmptyIdentifier("trace id"));
        }
        if events.is_empty() {
            return Err(ModelError::EmptyTrace(trace_id));
        }
        if events.iter().enumerate().any(|(i, e)| e.position != i) {
            return Err(ModelError::BadPositions(trace_id));
        }
        Ok(Trace { trace_id, events })
    }
}

/// A set of independently executed traces of one process.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessLog {
    pub process_id: String,
    pub traces: Vec<Trace>,
}

impl ProcessLog {
    pub fn new(process_id: impl Into<String>, traces: Vec<Trace>) -> Result<Self, ModelError> {
        let process_id = process_id.into();
        let mut seen = BTreeSet::new();
        for trace in &traces {
            if !seen.insert(trace.trace_id.as_str()) {
                return Err(ModelError::DuplicateTraceId(trace.trace_id.clone()));
            }
        }
        Ok(ProcessLog { process_id, traces })
    }
}

/// A compliance score in `[0, 1]`, or Null when a dimension does not apply.
///
/// Null is deliberately not 0: null-valued dimensions are dropped from
/// aggregation entirely, while a 0 drags averages down and zeroes products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metric(Option<f64>);

impl Metric {
    pub const NULL: Metric = Metric(None);

    /// Builds a non-Null metric. Values within [`EPSILON`] of the `[0, 1]`
    /// range are snapped onto it; anything further out is rejected.
    pub fn new(value: f64) -> Result<Metric, ModelError> {
        if !value.is_finite() || !(-EPSILON..=1.0 + EPSILON).contains(&value) {
            return Err(ModelError::MetricOutOfRange(value));
        }
        Ok(Metric(Some(value.clamp(0.0, 1.0))))
    }

    pub fn value(&self) -> Option<f64> {
        self.0
    }

    pub fn is_null(&self) -> bool {
        self.0.is_none()
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            Some(v) => write!(f, "{v}"),
            None => f.write_str("null"),
        }
    }
}

/// The three-way verdict attached to every scored dimension, task and trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplianceClass {
    NonCompliant,
    PartiallyCompliant,
    FullyCompliant,
}

impl ComplianceClass {
    pub fn as_str(&self) -> &'static str {
        match self {
            ComplianceClass::NonCompliant => "non",
            ComplianceClass::PartiallyCompliant => "partial",
            ComplianceClass::FullyCompliant => "full",
        }
    }
}

impl fmt::Display for ComplianceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The classification window for one dimension: scores below `cutoff` are
/// non-compliant, scores in `[cutoff, cutoff + threshold)` partially
/// compliant, scores at or above `cutoff + threshold` fully compliant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffThreshold {
    pub cutoff: f64,
    pub threshold: f64,
}

impl CutoffThreshold {
    pub fn new(cutoff: f64, threshold: f64) -> Self {
        CutoffThreshold { cutoff, threshold }
    }

    /// The full set of type invariants; `validate_spec` reports violations.
    /// `cutoff + threshold` may not exceed 1, otherwise full compliance would
    /// be unreachable for a metric capped at 1.
    pub fn is_valid(&self) -> bool {
        self.cutoff.is_finite()
            && self.threshold.is_finite()
            && self.cutoff >= 0.0
            && self.threshold >= 0.0
            && approx_le(self.cutoff + self.threshold, 1.0)
    }

    pub(crate) fn approx_same(&self, other: &CutoffThreshold) -> bool {
        approx_eq(self.cutoff, other.cutoff) && approx_eq(self.threshold, other.threshold)
    }
}

/// Which tasks an [`AttributeSpec`] row applies to.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TaskSelector {
    /// Matches every task; written `*` in spec documents.
    Any,
    Task(String),
}

impl TaskSelector {
    pub fn matches(&self, task_id: &str) -> bool {
        match self {
            TaskSelector::Any => true,
            TaskSelector::Task(id) => id == task_id,
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            TaskSelector::Any => "*",
            TaskSelector::Task(id) => id,
        }
    }
}

impl fmt::Display for TaskSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How a list of scores is folded into one metric.
#[derive(Debug, Clone, PartialEq)]
pub enum AggregatorChoice {
    Average,
    /// Weighted by each attribute's declared weight, normalized by their sum.
    /// At dimension and trace level no weights are declared, so this equals
    /// `Average` there.
    WeightedAverage,
    Product,
    Min,
    Max,
    /// Delegates to a named rule from the spec's rule table.
    Rule(String),
}

impl AggregatorChoice {
    pub fn as_str(&self) -> &str {
        match self {
            AggregatorChoice::Average => "average",
            AggregatorChoice::WeightedAverage => "weighted-average",
            AggregatorChoice::Product => "product",
            AggregatorChoice::Min => "min",
            AggregatorChoice::Max => "max",
            AggregatorChoice::Rule(_) => "rule",
        }
    }
}

/// Declares how one attribute of one task (or of any task, via the `*`
/// selector) is scored.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeSpec {
    pub task_selector: TaskSelector,
    pub attribute_name: String,
    pub dimension: DimensionId,
    /// Absent only for meta attributes, which are never scored.
    pub projection: Option<ProjectionFn>,
    pub weight: f64,
    pub cutoff_override: Option<CutoffThreshold>,
    /// Informational attributes (invoice dates, note fields, ...) are carried
    /// through logs and reports but excluded from all metrics.
    pub meta: bool,
}

impl AttributeSpec {
    pub fn new(
        task_selector: TaskSelector,
        attribute_name: impl Into<String>,
        dimension: DimensionId,
        projection: ProjectionFn,
    ) -> Self {
        AttributeSpec {
            task_selector,
            attribute_name: attribute_name.into(),
            dimension,
            projection: Some(projection),
            weight: 1.0,
            cutoff_override: None,
            meta: false,
        }
    }

    pub fn meta(
        task_selector: TaskSelector,
        attribute_name: impl Into<String>,
        dimension: DimensionId,
    ) -> Self {
        AttributeSpec {
            task_selector,
            attribute_name: attribute_name.into(),
            dimension,
            projection: None,
            weight: 1.0,
            cutoff_override: None,
            meta: true,
        }
    }

    pub fn with_weight(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    pub fn with_cutoff(mut self, cutoff: f64, threshold: f64) -> Self {
        self.cutoff_override = Some(CutoffThreshold::new(cutoff, threshold));
        self
    }

    /// The cutoff/threshold this row classifies against: its own override
    /// when present, else the dimension default.
    pub fn resolved_cutoff(&self, spec: &ComplianceSpec) -> Option<CutoffThreshold> {
        self.cutoff_override
            .or_else(|| spec.dimension_defaults.get(&self.dimension).copied())
    }
}

/// The declarative description of everything the engine needs to score a log.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplianceSpec {
    pub spec_id: String,
    pub attribute_specs: Vec<AttributeSpec>,
    pub dimension_defaults: BTreeMap<DimensionId, CutoffThreshold>,
    /// Folds attribute scores into a dimension metric.
    pub attribute_aggregator: AggregatorChoice,
    /// Folds dimension metrics into a task T-measure.
    pub dimension_aggregator: AggregatorChoice,
    /// Folds per-dimension trace minima into a τ-measure.
    pub trace_aggregator: AggregatorChoice,
    pub rules: BTreeMap<String, RuleAst>,
}

impl ComplianceSpec {
    /// An empty spec scoring nothing, with averaging aggregators.
    pub fn new(spec_id: impl Into<String>) -> Self {
        ComplianceSpec {
            spec_id: spec_id.into(),
            attribute_specs: Vec::new(),
            dimension_defaults: BTreeMap::new(),
            attribute_aggregator: AggregatorChoice::Average,
            dimension_aggregator: AggregatorChoice::Average,
            trace_aggregator: AggregatorChoice::Average,
            rules: BTreeMap::new(),
        }
    }
}

/// Severity of a validation finding. Errors make a spec unusable; warnings
/// flag configurations that are legal but easy to misuse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Warning,
    Error,
}

impl Severity {
    pub fn as_str(&self) -> &'static str {
        match self {
            Severity::Warning => "warning",
            Severity::Error => "error",
        }
    }
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Machine-readable codes for spec validation findings.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FindingCode {
    EmptyDimension,
    EmptyAttributeName,
    EmptyTaskSelector,
    DuplicateAttributeSpec,
    DuplicateDimensionDefault,
    NonpositiveWeight,
    MissingProjection,
    MissingCutoff,
    CutoffOutOfRange,
    CutoffPlusThresholdExceedsOne,
    InconsistentDimensionCutoffs,
    EmptyBands,
    BandBoundsNotMonotone,
    NonMonotoneBands,
    ScoreOutOfRange,
    EmptyScale,
    DuplicateLevel,
    MissingLevelScore,
    UndeclaredLevel,
    UnresolvedRule,
    RuleParseError,
    UnknownAggregator,
    ExtremeAggregator,
}

impl FindingCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FindingCode::EmptyDimension => "EMPTY_DIMENSION",
            FindingCode::EmptyAttributeName => "EMPTY_ATTRIBUTE_NAME",
            FindingCode::EmptyTaskSelector => "EMPTY_TASK_SELECTOR",
            FindingCode::DuplicateAttributeSpec => "DUPLICATE_ATTRIBUTE_SPEC",
            FindingCode::DuplicateDimensionDefault => "DUPLICATE_DIMENSION_DEFAULT",
            FindingCode::NonpositiveWeight => "NONPOSITIVE_WEIGHT",
            FindingCode::MissingProjection => "MISSING_PROJECTION",
            FindingCode::MissingCutoff => "MISSING_CUTOFF",
            FindingCode::CutoffOutOfRange => "CUTOFF_OUT_OF_RANGE",
            FindingCode::CutoffPlusThresholdExceedsOne => "CUTOFF_PLUS_THRESHOLD_EXCEEDS_ONE",
            FindingCode::InconsistentDimensionCutoffs => "INCONSISTENT_DIMENSION_CUTOFFS",
            FindingCode::EmptyBands => "EMPTY_BANDS",
            FindingCode::BandBoundsNotMonotone => "BAND_BOUNDS_NOT_MONOTONE",
            FindingCode::NonMonotoneBands => "NON_MONOTONE_BANDS",
            FindingCode::ScoreOutOfRange => "SCORE_OUT_OF_RANGE",
            FindingCode::EmptyScale => "EMPTY_SCALE",
            FindingCode::DuplicateLevel => "DUPLICATE_LEVEL",
            FindingCode::MissingLevelScore => "MISSING_LEVEL_SCORE",
            FindingCode::UndeclaredLevel => "UNDECLARED_LEVEL",
            FindingCode::UnresolvedRule => "UNRESOLVED_RULE",
            FindingCode::RuleParseError => "RULE_PARSE_ERROR",
            FindingCode::UnknownAggregator => "UNKNOWN_AGGREGATOR",
            FindingCode::ExtremeAggregator => "EXTREME_AGGREGATOR",
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One spec validation finding: a code, the offending document path, and a
/// human-readable message. Findings are data, not failures; callers decide
/// whether errors abort.
#[derive(Debug, Clone, PartialEq)]
pub struct Finding {
    pub severity: Severity,
    pub code: FindingCode,
    pub path: String,
    pub message: String,
}

impl Finding {
    pub fn error(code: FindingCode, path: impl Into<String>, message: impl Into<String>) -> Self {
        Finding {
            severity: Severity::Error,
            code,
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn warning(code: FindingCode, path: impl Into<String>, message: impl Into<String>) -> Self {
        Finding {
            severity: Severity::Warning,
            code,
            path: path.into(),
            message: message.into(),
        }
    }

    /// Prefixes the finding's path with an outer document path segment.
    pub(crate) fn nest(mut self, prefix: &str) -> Self {
        if self.path.is_empty() {
            self.path = prefix.to_string();
        } else {
            self.path = format!("{prefix}.{}", self.path);
        }
        self
    }
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.severity,
            self.code,
            if self.path.is_empty() { "-" } else { &self.path },
            self.message
        )
    }
}

pub(crate) fn format_findings(findings: &[Finding]) -> String {
    findings
        .iter()
        .map(Finding::to_string)
        .collect::<Vec<_>>()
        .join("\n")
}

/// Checks every structural invariant of a spec and returns one finding per
/// violation. An empty result means the spec is safe to evaluate with.
pub fn validate_spec(spec: &ComplianceSpec) -> Vec<Finding> {
    let mut findings = Vec::new();

    for (dimension, ct) in &spec.dimension_defaults {
        let path = format!("dimensions.{dimension}");
        if dimension.is_empty() {
            findings.push(Finding::error(
                FindingCode::EmptyDimension,
                &path,
                "dimension name must not be empty",
            ));
        }
        findings.extend(cutoff_findings(ct, &path));
    }

    let mut seen_keys: BTreeMap<(String, String), usize> = BTreeMap::new();
    for (index, attr) in spec.attribute_specs.iter().enumerate() {
        let path = format!("attributes[{index}]");
        let key = (
            attr.task_selector.as_str().to_string(),
            attr.attribute_name.clone(),
        );
        if let Some(first) = seen_keys.get(&key) {
            findings.push(Finding::error(
                FindingCode::DuplicateAttributeSpec,
                &path,
                format!(
                    "(task '{}', attribute '{}') already declared at attributes[{first}]",
                    attr.task_selector, attr.attribute_name
                ),
            ));
        } else {
            seen_keys.insert(key, index);
        }

        if attr.attribute_name.is_empty() {
            findings.push(Finding::error(
                FindingCode::EmptyAttributeName,
                &path,
                "attribute name must not be empty",
            ));
        }
        if let TaskSelector::Task(id) = &attr.task_selector {
            if id.is_empty() {
                findings.push(Finding::error(
                    FindingCode::EmptyTaskSelector,
                    &path,
                    "task selector must be '*' or a non-empty task id",
                ));
            }
        }
        if attr.dimension.is_empty() {
            findings.push(Finding::error(
                FindingCode::EmptyDimension,
                &path,
                "dimension name must not be empty",
            ));
        }
        if !(attr.weight.is_finite() && attr.weight > 0.0) {
            findings.push(Finding::error(
                FindingCode::NonpositiveWeight,
                format!("{path}.weight"),
                format!("weight {} must be a positive finite number", attr.weight),
            ));
        }
        if let Some(ct) = &attr.cutoff_override {
            findings.extend(cutoff_findings(ct, &format!("{path}.cutoff")));
        }
        match &attr.projection {
            Some(projection) => {
                findings.extend(
                    projection::validate_projection(projection, &spec.rules)
                        .into_iter()
                        .map(|f| f.nest(&format!("{path}.projection"))),
                );
            }
            None if !attr.meta => {
                findings.push(Finding::error(
                    FindingCode::MissingProjection,
                    &path,
                    "scored attribute needs a projection (or mark it meta)",
                ));
            }
            None => {}
        }
        if !attr.meta && attr.resolved_cutoff(spec).is_none() {
            findings.push(Finding::error(
                FindingCode::MissingCutoff,
                &path,
                format!(
                    "no cutoff/threshold: declare one on the attribute or a default for dimension '{}'",
                    attr.dimension
                ),
            ));
        }
    }

    findings.extend(dimension_cutoff_consistency(spec));

    for (slot, choice) in [
        ("aggregators.attribute", &spec.attribute_aggregator),
        ("aggregators.dimension", &spec.dimension_aggregator),
        ("aggregators.trace", &spec.trace_aggregator),
    ] {
        match choice {
            AggregatorChoice::Rule(name) if !spec.rules.contains_key(name) => {
                findings.push(Finding::error(
                    FindingCode::UnresolvedRule,
                    slot,
                    format!("rule '{name}' is not declared in the rules table"),
                ));
            }
            AggregatorChoice::Min | AggregatorChoice::Max => {
                findings.push(Finding::warning(
                    FindingCode::ExtremeAggregator,
                    slot,
                    format!(
                        "{} aggregation lets a single score decide the whole result",
                        choice.as_str()
                    ),
                ));
            }
            _ => {}
        }
    }

    findings
}

fn cutoff_findings(ct: &CutoffThreshold, path: &str) -> Vec<Finding> {
    let mut findings = Vec::new();
    let parts_ok = ct.cutoff.is_finite()
        && ct.threshold.is_finite()
        && ct.cutoff >= 0.0
        && ct.threshold >= 0.0
        && ct.cutoff <= 1.0
        && ct.threshold <= 1.0;
    if !parts_ok {
        findings.push(Finding::error(
            FindingCode::CutoffOutOfRange,
            path,
            format!(
                "cutoff {} and threshold {} must each lie in [0, 1]",
                ct.cutoff, ct.threshold
            ),
        ));
    }
    if ct.cutoff.is_finite()
        && ct.threshold.is_finite()
        && !approx_le(ct.cutoff + ct.threshold, 1.0)
    {
        findings.push(Finding::error(
            FindingCode::CutoffPlusThresholdExceedsOne,
            path,
            format!(
                "cutoff {} + threshold {} = {} exceeds 1, so full compliance is unreachable",
                ct.cutoff,
                ct.threshold,
                ct.cutoff + ct.threshold
            ),
        ));
    }
    findings
}

/// All scored rows of one dimension must classify against a single
/// cutoff/threshold, unless a dimension default exists to arbitrate between
/// differing per-attribute overrides at evaluation time.
fn dimension_cutoff_consistency(spec: &ComplianceSpec) -> Vec<Finding> {
    let mut by_dimension: BTreeMap<&DimensionId, Vec<CutoffThreshold>> = BTreeMap::new();
    for attr in spec.attribute_specs.iter().filter(|a| !a.meta) {
        if let Some(ct) = attr.resolved_cutoff(spec) {
            by_dimension.entry(&attr.dimension).or_default().push(ct);
        }
    }
    let mut findings = Vec::new();
    for (dimension, cts) in by_dimension {
        let consistent = cts.windows(2).all(|w| w[0].approx_same(&w[1]));
        if !consistent && !spec.dimension_defaults.contains_key(dimension) {
            findings.push(Finding::error(
                FindingCode::InconsistentDimensionCutoffs,
                "attributes",
                format!(
                    "dimension '{dimension}' mixes different cutoff/threshold overrides and has no default to arbitrate"
                ),
            ));
        }
    }
    findings
}

/// Finds the spec row scoring `attribute_name` on `task_id`. An exact task
/// match always wins over a wildcard row.
pub fn resolve_attribute_spec<'a>(
    spec: &'a ComplianceSpec,
    task_id: &str,
    attribute_name: &str,
) -> Option<&'a AttributeSpec> {
    spec.attribute_specs
        .iter()
        .find(|a| {
            a.attribute_name == attribute_name
                && matches!(&a.task_selector, TaskSelector::Task(id) if id == task_id)
        })
        .or_else(|| {
            spec.attribute_specs.iter().find(|a| {
                a.attribute_name == attribute_name && a.task_selector == TaskSelector::Any
            })
        })
}

/// The set of compliance dimensions that apply to an event: the dimensions of
/// every non-meta spec row matching an attribute present on it. The returned
/// set iterates in lexicographic order.
pub fn dimensions_of_task(spec: &ComplianceSpec, event: &TaskEvent) -> BTreeSet<DimensionId> {
    let mut dimensions = BTreeSet::new();
    for attribute in &event.attributes {
        if let Some(row) = resolve_attribute_spec(spec, &event.task_id, &attribute.name) {
            if !row.meta {
                dimensions.insert(row.dimension.clone());
            }
        }
    }
    dimensions
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::projection::{Band, Direction, NumericBands, ProjectionFn};

    fn bands(pairs: &[(f64, f64)], fallback: f64) -> ProjectionFn {
        ProjectionFn::Bands(NumericBands {
            direction: Direction::LowerIsBetter,
            bands: pairs
                .iter()
                .map(|&(bound, score)| Band { bound, score })
                .collect(),
            fallback,
        })
    }

    fn small_spec() -> ComplianceSpec {
        let mut spec = ComplianceSpec::new("test");
        spec.dimension_defaults
            .insert(DimensionId::new("temporal"), CutoffThreshold::new(0.3, 0.4));
        spec.attribute_specs.push(AttributeSpec::new(
            TaskSelector::Task("T2".into()),
            "payInDays",
            DimensionId::new("temporal"),
            bands(&[(15.0, 1.0)], 0.0),
        ));
        spec.attribute_specs.push(AttributeSpec::new(
            TaskSelector::Any,
            "payInDays",
            DimensionId::new("temporal"),
            bands(&[(15.0, 1.0), (22.0, 0.6), (32.0, 0.3)], 0.0),
        ));
        spec
    }

    #[test]
    fn metric_rejects_out_of_range() {
        assert!(Metric::new(0.0).is_ok());
        assert!(Metric::new(1.0).is_ok());
        assert!(Metric::new(1.0 + 2e-9).is_err());
        assert!(Metric::new(-0.1).is_err());
        assert!(Metric::new(f64::NAN).is_err());
        // within tolerance: snapped onto the range
        assert_eq!(Metric::new(1.0 + 5e-10).unwrap().value(), Some(1.0));
    }

    #[test]
    fn dimension_ids_normalize_case() {
        assert_eq!(DimensionId::new("Temporal"), DimensionId::new("temporal"));
        assert_eq!(DimensionId::new(" Monetary "), DimensionId::new("monetary"));
        assert_ne!(DimensionId::new("temporal"), DimensionId::new("monetary"));
    }

    #[test]
    fn event_rejects_duplicate_attributes() {
        let err = TaskEvent::new(
            "T1",
            0,
            vec![
                AttributeValue::number("x", 1.0),
                AttributeValue::number("x", 2.0),
            ],
        )
        .unwrap_err();
        assert_eq!(err, ModelError::DuplicateAttribute("x".into()));
    }

    #[test]
    fn trace_requires_contiguous_positions() {
        let e0 = TaskEvent::new("T1", 0, vec![]).unwrap();
        let e2 = TaskEvent::new("T2", 2, vec![]).unwrap();
        assert_eq!(
            Trace::new("t", vec![e0.clone(), e2]).unwrap_err(),
            ModelError::BadPositions("t".into())
        );
        assert!(Trace::new("t", vec![]).is_err());
        assert!(Trace::new("t", vec![e0]).is_ok());
    }

    #[test]
    fn log_rejects_duplicate_trace_ids() {
        let trace = Trace::new("t1", vec![TaskEvent::new("T1", 0, vec![]).unwrap()]).unwrap();
        let err = ProcessLog::new("p", vec![trace.clone(), trace]).unwrap_err();
        assert_eq!(err, ModelError::DuplicateTraceId("t1".into()));
    }

    #[test]
    fn exact_selector_beats_wildcard() {
        let spec = small_spec();
        let row = resolve_attribute_spec(&spec, "T2", "payInDays").unwrap();
        assert_eq!(row.task_selector, TaskSelector::Task("T2".into()));
        let row = resolve_attribute_spec(&spec, "T9", "payInDays").unwrap();
        assert_eq!(row.task_selector, TaskSelector::Any);
        assert!(resolve_attribute_spec(&spec, "T2", "unknownAttr").is_none());
    }

    #[test]
    fn validate_accepts_small_spec() {
        assert_eq!(validate_spec(&small_spec()), Vec::new());
    }

    #[test]
    fn validate_flags_cutoff_threshold_overflow() {
        let mut spec = small_spec();
        spec.dimension_defaults
            .insert(DimensionId::new("temporal"), CutoffThreshold::new(0.8, 0.4));
        let findings = validate_spec(&spec);
        assert!(findings
            .iter()
            .any(|f| f.code == FindingCode::CutoffPlusThresholdExceedsOne
                && f.path == "dimensions.temporal"));
    }

    #[test]
    fn validate_flags_non_monotone_bands() {
        let mut spec = small_spec();
        spec.attribute_specs[0].projection = Some(bands(&[(15.0, 0.3), (22.0, 0.6)], 0.0));
        let findings = validate_spec(&spec);
        assert!(findings
            .iter()
            .any(|f| f.code == FindingCode::NonMonotoneBands
                && f.path.starts_with("attributes[0].projection")));
    }

    #[test]
    fn validate_flags_missing_cutoff_and_projection() {
        let mut spec = small_spec();
        spec.dimension_defaults.clear();
        spec.attribute_specs[1].projection = None;
        let findings = validate_spec(&spec);
        assert!(findings.iter().any(|f| f.code == FindingCode::MissingCutoff));
        assert!(findings
            .iter()
            .any(|f| f.code == FindingCode::MissingProjection && f.path == "attributes[1]"));
    }

    #[test]
    fn validate_flags_unresolved_aggregator_rule() {
        let mut spec = small_spec();
        spec.trace_aggregator = AggregatorChoice::Rule("nope".into());
        let findings = validate_spec(&spec);
        assert!(findings
            .iter()
            .any(|f| f.code == FindingCode::UnresolvedRule && f.path == "aggregators.trace"));
    }

    #[test]
    fn validate_warns_on_extreme_aggregators() {
        let mut spec = small_spec();
        spec.attribute_aggregator = AggregatorChoice::Max;
        let findings = validate_spec(&spec);
        assert!(findings.iter().any(|f| f.code == FindingCode::ExtremeAggregator
            && f.severity == Severity::Warning));
    }

    #[test]
    fn validate_flags_inconsistent_cutoffs_without_default() {
        let mut spec = small_spec();
        spec.dimension_defaults.clear();
        spec.attribute_specs[0].cutoff_override = Some(CutoffThreshold::new(0.3, 0.4));
        spec.attribute_specs[1].cutoff_override = Some(CutoffThreshold::new(0.5, 0.5));
        let findings = validate_spec(&spec);
        assert!(findings
            .iter()
            .any(|f| f.code == FindingCode::InconsistentDimensionCutoffs));
    }

    #[test]
    fn dimensions_of_task_collects_matching_non_meta_rows() {
        let mut spec = small_spec();
        spec.dimension_defaults
            .insert(DimensionId::new("monetary"), CutoffThreshold::new(0.3, 0.7));
        spec.attribute_specs.push(AttributeSpec::new(
            TaskSelector::Any,
            "paymentReceived",
            DimensionId::new("monetary"),
            bands(&[(1.0, 1.0)], 0.0),
        ));
        spec.attribute_specs.push(AttributeSpec::meta(
            TaskSelector::Any,
            "invoiceDate",
            DimensionId::new("temporal"),
        ));

        let event = TaskEvent::new(
            "T2",
            0,
            vec![
                AttributeValue::number("payInDays", 10.0),
                AttributeValue::number("paymentReceived", 1.0),
            ],
        )
        .unwrap();
        let dims = dimensions_of_task(&spec, &event);
        assert_eq!(dims.len(), 2);
        let names: Vec<&str> = dims.iter().map(DimensionId::as_str).collect();
        assert_eq!(names, vec!["monetary", "temporal"]);

        let meta_only = TaskEvent::new(
            "T1",
            0,
            vec![AttributeValue::text("invoiceDate", "2019-04-01")],
        )
        .unwrap();
        assert!(dimensions_of_task(&spec, &meta_only).is_empty());
    }

    #[test]
    fn custom_dimension_names_form_their_own_set() {
        // a task scored on Monetary, Time and Percent at once
        let mut spec = ComplianceSpec::new("custom");
        for (attr, dim) in [
            ("payment", "Monetary"),
            ("payInDays", "Time"),
            ("interestRate", "Percent"),
        ] {
            let id = DimensionId::new(dim);
            spec.dimension_defaults
                .insert(id.clone(), CutoffThreshold::new(0.3, 0.4));
            spec.attribute_specs.push(AttributeSpec::new(
                TaskSelector::Task("T2".into()),
                attr,
                id,
                ProjectionFn::Constant(1.0),
            ));
        }
        assert_eq!(validate_spec(&spec), Vec::new());
        let event = TaskEvent::new(
            "T2",
            0,
            vec![
                AttributeValue::number("payment", 500.0),
                AttributeValue::number("payInDays", 10.0),
                AttributeValue::number("interestRate", 0.0),
            ],
        )
        .unwrap();
        let dims = dimensions_of_task(&spec, &event);
        assert_eq!(dims.len(), 3);
        let names: Vec<&str> = dims.iter().map(DimensionId::as_str).collect();
        assert_eq!(names, vec!["monetary", "percent", "time"]);
    }
}
