//! The metric hierarchy: attribute scores fold into per-dimension metrics,
//! dimension metrics into a per-task T-measure, per-dimension trace minima
//! into a τ-measure, and τ-measures into the whole-log P-measure, each level
//! classified as non-, partially- or fully compliant.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{
    approx_ge, dimensions_of_task, resolve_attribute_spec, AggregatorChoice, ComplianceClass,
    ComplianceSpec, CutoffThreshold, DimensionId, Metric, ProcessLog, TaskEvent, Trace, EPSILON,
};
use crate::projection::{self, ProjectionError};
use crate::rule::{self, Bindings, RuleError};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("NULL_METRIC: a Null metric has no compliance class")]
    NullMetric,
    #[error("NO_APPLICABLE_DIMENSION: {context} has no scored compliance dimension")]
    NoApplicableDimension { context: String },
    #[error("EMPTY_TRACE: trace '{trace_id}' has no events")]
    EmptyTrace { trace_id: String },
    #[error("EMPTY_LOG: the process log contains no traces")]
    EmptyLog,
    #[error("task '{task}', attribute '{attribute}': {source}")]
    Projection {
        task: String,
        attribute: String,
        #[source]
        source: ProjectionError,
    },
    #[error("rule aggregation over {context}: {source}")]
    Rule {
        context: String,
        #[source]
        source: RuleError,
    },
    #[error("UNRESOLVED_RULE: aggregator references unknown rule '{name}'")]
    UnresolvedRule { name: String },
    #[error("MISSING_CUTOFF: no cutoff/threshold resolves for task '{task}', dimension '{dimension}'")]
    MissingCutoff { task: String, dimension: String },
    #[error(
        "INCONSISTENT_CUTOFFS: task '{task}', dimension '{dimension}': attributes resolve different cutoff/thresholds and no dimension default arbitrates"
    )]
    InconsistentCutoffs { task: String, dimension: String },
    #[error("UNKNOWN_TRACE_ID: trace '{0}' is not in the log")]
    UnknownTraceId(String),
    #[error("THREAD_POOL: {0}")]
    ThreadPool(String),
}

/// The aggregate compliance value of one task along one dimension, with the
/// projected attribute scores that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct DimensionMetric {
    pub task_id: String,
    pub dimension: DimensionId,
    pub value: Metric,
    /// Present iff `value` is non-Null.
    pub class: Option<ComplianceClass>,
    /// Projected score of every contributing attribute, in attribute order.
    pub contributing: Vec<(String, Metric)>,
}

/// One task's scored dimensions, T-measure and classification.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskResult {
    pub task_id: String,
    /// In lexicographic dimension order.
    pub dimension_metrics: Vec<DimensionMetric>,
    /// Null when the spec scores nothing on this task.
    pub t_measure: Metric,
    /// None when the spec scores nothing on this task.
    pub class: Option<ComplianceClass>,
}

/// One trace's task results, per-dimension minima, τ-measure and class.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub trace_id: String,
    pub task_results: Vec<TaskResult>,
    /// Per dimension: the smallest strictly positive task metric, or 0 when
    /// every task scored 0 on it. Dimensions that only ever scored Null are
    /// absent.
    pub dimension_minima: BTreeMap<DimensionId, f64>,
    pub tau_measure: Metric,
    pub class: ComplianceClass,
}

/// The whole-log result: every trace plus the P-measure.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessResult {
    pub spec_id: String,
    pub process_id: String,
    pub trace_results: Vec<TraceResult>,
    /// Arithmetic mean of the trace τ-measures (Null τ-measures, possible
    /// only under rule-based trace aggregation, are skipped).
    pub p_measure: Metric,
}

/// Classifies a dimension metric against its cutoff/threshold window:
/// below `cutoff` non-compliant, within `[cutoff, cutoff + threshold)`
/// partially compliant, at or above `cutoff + threshold` fully compliant.
/// Boundary comparisons are tolerance-snapped.
pub fn classify_dimension(
    value: Metric,
    ct: CutoffThreshold,
) -> Result<ComplianceClass, EvalError> {
    let v = value.value().ok_or(EvalError::NullMetric)?;
    if approx_ge(v, ct.cutoff + ct.threshold) {
        Ok(ComplianceClass::FullyCompliant)
    } else if approx_ge(v, ct.cutoff) {
        Ok(ComplianceClass::PartiallyCompliant)
    } else {
        Ok(ComplianceClass::NonCompliant)
    }
}

/// Classifies a task from its dimension classes: non-compliant if any
/// dimension is, fully compliant if all are, otherwise partially compliant.
/// Null-valued dimensions are excluded.
pub fn classify_task(dimensions: &[DimensionMetric]) -> Result<ComplianceClass, EvalError> {
    let classes: Vec<ComplianceClass> = dimensions.iter().filter_map(|d| d.class).collect();
    if classes.is_empty() {
        let context = dimensions
            .first()
            .map(|d| format!("task '{}'", d.task_id))
            .unwrap_or_else(|| "task".to_string());
        return Err(EvalError::NoApplicableDimension { context });
    }
    Ok(combine_classes(&classes))
}

/// Classifies a trace from its task classes with the same any/all scheme as
/// [`classify_task`]. Tasks the spec scores nothing on are skipped.
pub fn classify_trace(tasks: &[TaskResult]) -> Result<ComplianceClass, EvalError> {
    if tasks.is_empty() {
        return Err(EvalError::EmptyTrace {
            trace_id: String::new(),
        });
    }
    let classes: Vec<ComplianceClass> = tasks.iter().filter_map(|t| t.class).collect();
    if classes.is_empty() {
        return Err(EvalError::NoApplicableDimension {
            context: "trace".to_string(),
        });
    }
    Ok(combine_classes(&classes))
}

fn combine_classes(classes: &[ComplianceClass]) -> ComplianceClass {
    if classes.contains(&ComplianceClass::NonCompliant) {
        ComplianceClass::NonCompliant
    } else if classes
        .iter()
        .all(|c| *c == ComplianceClass::FullyCompliant)
    {
        ComplianceClass::FullyCompliant
    } else {
        ComplianceClass::PartiallyCompliant
    }
}

/// An attribute of an event after projection, used by the aggregators.
#[derive(Debug, Clone)]
struct ProjectedAttribute {
    name: String,
    dimension: DimensionId,
    score: Metric,
    weight: f64,
    cutoff: Option<CutoffThreshold>,
}

/// Projects every scored attribute of an event once.
fn project_event(
    event: &TaskEvent,
    spec: &ComplianceSpec,
) -> Result<Vec<ProjectedAttribute>, EvalError> {
    let mut projected = Vec::new();
    for attribute in &event.attributes {
        let Some(row) = resolve_attribute_spec(spec, &event.task_id, &attribute.name) else {
            continue;
        };
        if row.meta {
            continue;
        }
        let score = match &row.projection {
            Some(projection) => projection::project(projection, attribute, &spec.rules).map_err(
                |source| EvalError::Projection {
                    task: event.task_id.clone(),
                    attribute: attribute.name.clone(),
                    source,
                },
            )?,
            // unreachable on validated specs
            None => Metric::NULL,
        };
        projected.push(ProjectedAttribute {
            name: attribute.name.clone(),
            dimension: row.dimension.clone(),
            score,
            weight: row.weight,
            cutoff: row.resolved_cutoff(spec),
        });
    }
    Ok(projected)
}

/// Bindings available to a rule-based attribute aggregator: the projected
/// score of every scored attribute on the event (across all its dimensions,
/// so rules may couple metrics of different dimensions) plus the raw numeric
/// value of every attribute, meta included.
fn event_bindings(event: &TaskEvent, projected: &[ProjectedAttribute]) -> Bindings {
    let mut bindings = Bindings::new();
    for attribute in &event.attributes {
        if let Some(raw) = attribute.value.as_number() {
            bindings.bind_raw(&attribute.name, raw);
        }
    }
    for attr in projected {
        if let Some(score) = attr.score.value() {
            bindings.bind_projected(&attr.name, score);
        }
    }
    bindings
}

/// Folds non-Null scores with the chosen aggregator. `items` pairs each score
/// with its weight; weights only matter for `WeightedAverage`.
fn aggregate(
    choice: &AggregatorChoice,
    items: &[(f64, f64)],
    spec: &ComplianceSpec,
    context: &str,
    bindings: impl FnOnce() -> Bindings,
) -> Result<Metric, EvalError> {
    debug_assert!(!items.is_empty());
    let value = match choice {
        AggregatorChoice::Average => {
            items.iter().map(|(score, _)| score).sum::<f64>() / items.len() as f64
        }
        AggregatorChoice::WeightedAverage => {
            let total: f64 = items.iter().map(|(_, weight)| weight).sum();
            items
                .iter()
                .map(|(score, weight)| score * weight)
                .sum::<f64>()
                / total
        }
        AggregatorChoice::Product => items.iter().map(|(score, _)| score).product(),
        AggregatorChoice::Min => items.iter().map(|(score, _)| *score).fold(f64::MAX, f64::min),
        AggregatorChoice::Max => items.iter().map(|(score, _)| *score).fold(f64::MIN, f64::max),
        AggregatorChoice::Rule(name) => {
            let ast = spec
                .rules
                .get(name)
                .ok_or_else(|| EvalError::UnresolvedRule { name: name.clone() })?;
            return rule::evaluate(ast, &bindings()).map_err(|source| EvalError::Rule {
                context: context.to_string(),
                source,
            });
        }
    };
    Metric::new(value).map_err(|_| EvalError::Rule {
        context: context.to_string(),
        source: RuleError::Range {
            line: 0,
            column: 0,
            value,
        },
    })
}

/// The cutoff/threshold a dimension of one event classifies against: the one
/// the contributing attributes agree on, else the dimension default.
fn effective_cutoff(
    event: &TaskEvent,
    dimension: &DimensionId,
    spec: &ComplianceSpec,
    contributing: &[&ProjectedAttribute],
) -> Result<CutoffThreshold, EvalError> {
    let mut resolved: Vec<CutoffThreshold> = Vec::new();
    for attr in contributing {
        match attr.cutoff {
            Some(ct) => resolved.push(ct),
            None => {
                return Err(EvalError::MissingCutoff {
                    task: event.task_id.clone(),
                    dimension: dimension.to_string(),
                })
            }
        }
    }
    if !resolved.is_empty() && resolved.windows(2).all(|w| w[0].approx_same(&w[1])) {
        return Ok(resolved[0]);
    }
    spec.dimension_defaults
        .get(dimension)
        .copied()
        .ok_or_else(|| EvalError::InconsistentCutoffs {
            task: event.task_id.clone(),
            dimension: dimension.to_string(),
        })
}

fn dimension_metric_from(
    event: &TaskEvent,
    dimension: &DimensionId,
    spec: &ComplianceSpec,
    projected: &[ProjectedAttribute],
) -> Result<DimensionMetric, EvalError> {
    let contributing: Vec<&ProjectedAttribute> = projected
        .iter()
        .filter(|attr| &attr.dimension == dimension)
        .collect();
    let scored: Vec<(f64, f64)> = contributing
        .iter()
        .filter_map(|attr| attr.score.value().map(|score| (score, attr.weight)))
        .collect();

    let value = if scored.is_empty() {
        // every contributing score was Null: the dimension is ignored
        Metric::NULL
    } else {
        aggregate(
            &spec.attribute_aggregator,
            &scored,
            spec,
            &format!("task '{}', dimension '{dimension}'", event.task_id),
            || event_bindings(event, projected),
        )?
    };

    let class = match value.value() {
        Some(_) => {
            let ct = effective_cutoff(event, dimension, spec, &contributing)?;
            Some(classify_dimension(value, ct)?)
        }
        None => None,
    };

    Ok(DimensionMetric {
        task_id: event.task_id.clone(),
        dimension: dimension.clone(),
        value,
        class,
        contributing: contributing
            .iter()
            .map(|attr| (attr.name.clone(), attr.score))
            .collect(),
    })
}

/// The aggregate compliance metric of one event along one dimension: every
/// non-meta matching attribute of that dimension is projected and the
/// non-Null scores folded with the spec's attribute aggregator. Null when
/// nothing scored.
pub fn attribute_dimension_metric(
    event: &TaskEvent,
    dimension: &DimensionId,
    spec: &ComplianceSpec,
) -> Result<DimensionMetric, EvalError> {
    let projected = project_event(event, spec)?;
    dimension_metric_from(event, dimension, spec, &projected)
}

/// Folds non-Null dimension metrics into the task's T-measure with the
/// spec's dimension aggregator.
pub fn t_measure(
    dimensions: &[DimensionMetric],
    spec: &ComplianceSpec,
) -> Result<Metric, EvalError> {
    let scored: Vec<(&DimensionMetric, f64)> = dimensions
        .iter()
        .filter_map(|d| d.value.value().map(|v| (d, v)))
        .collect();
    if scored.is_empty() {
        let context = dimensions
            .first()
            .map(|d| format!("task '{}'", d.task_id))
            .unwrap_or_else(|| "task".to_string());
        return Err(EvalError::NoApplicableDimension { context });
    }
    let items: Vec<(f64, f64)> = scored.iter().map(|(_, v)| (*v, 1.0)).collect();
    let context = scored
        .first()
        .map(|(d, _)| format!("task '{}'", d.task_id))
        .unwrap_or_default();
    aggregate(&spec.dimension_aggregator, &items, spec, &context, || {
        let mut bindings = Bindings::new();
        for (d, v) in &scored {
            bindings.bind_projected(d.dimension.as_str(), *v);
        }
        bindings
    })
}

/// Scores one event across all its applicable dimensions. Events the spec
/// scores nothing on yield a Null T-measure and no class rather than an
/// error, so logs may carry unscored bookkeeping tasks.
pub fn evaluate_task(event: &TaskEvent, spec: &ComplianceSpec) -> Result<TaskResult, EvalError> {
    let projected = project_event(event, spec)?;
    let mut dimension_metrics = Vec::new();
    for dimension in dimensions_of_task(spec, event) {
        dimension_metrics.push(dimension_metric_from(event, &dimension, spec, &projected)?);
    }

    let any_scored = dimension_metrics.iter().any(|d| !d.value.is_null());
    let (measure, class) = if any_scored {
        (
            t_measure(&dimension_metrics, spec)?,
            Some(classify_task(&dimension_metrics)?),
        )
    } else {
        (Metric::NULL, None)
    };

    Ok(TaskResult {
        task_id: event.task_id.clone(),
        dimension_metrics,
        t_measure: measure,
        class,
    })
}

/// Scores a whole trace. For every dimension scored anywhere in the trace,
/// the per-task metrics collapse to the smallest strictly positive value (or
/// 0 when no task scored positive); the trace aggregator then folds these
/// minima into the τ-measure.
pub fn tau_measure(trace: &Trace, spec: &ComplianceSpec) -> Result<TraceResult, EvalError> {
    if trace.events.is_empty() {
        return Err(EvalError::EmptyTrace {
            trace_id: trace.trace_id.clone(),
        });
    }
    let task_results: Vec<TaskResult> = trace
        .events
        .iter()
        .map(|event| evaluate_task(event, spec))
        .collect::<Result<_, _>>()?;

    let mut per_dimension: BTreeMap<DimensionId, Vec<f64>> = BTreeMap::new();
    for task in &task_results {
        for metric in &task.dimension_metrics {
            if let Some(v) = metric.value.value() {
                per_dimension
                    .entry(metric.dimension.clone())
                    .or_default()
                    .push(v);
            }
        }
    }
    if per_dimension.is_empty() {
        return Err(EvalError::NoApplicableDimension {
            context: format!("trace '{}'", trace.trace_id),
        });
    }

    let dimension_minima: BTreeMap<DimensionId, f64> = per_dimension
        .into_iter()
        .map(|(dimension, values)| {
            let min_positive = values
                .iter()
                .copied()
                .filter(|v| *v > EPSILON)
                .fold(f64::MAX, f64::min);
            let minimum = if min_positive == f64::MAX { 0.0 } else { min_positive };
            (dimension, minimum)
        })
        .collect();

    let items: Vec<(f64, f64)> = dimension_minima.values().map(|v| (*v, 1.0)).collect();
    let tau = aggregate(
        &spec.trace_aggregator,
        &items,
        spec,
        &format!("trace '{}'", trace.trace_id),
        || {
            let mut bindings = Bindings::new();
            for (dimension, minimum) in &dimension_minima {
                bindings.bind_projected(dimension.as_str(), *minimum);
            }
            bindings
        },
    )?;

    let class = classify_trace(&task_results)?;

    Ok(TraceResult {
        trace_id: trace.trace_id.clone(),
        task_results,
        dimension_minima,
        tau_measure: tau,
        class,
    })
}

/// Scores every trace independently and averages the τ-measures.
pub fn p_measure(log: &ProcessLog, spec: &ComplianceSpec) -> Result<ProcessResult, EvalError> {
    if log.traces.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    let trace_results: Vec<TraceResult> = log
        .traces
        .iter()
        .map(|trace| tau_measure(trace, spec))
        .collect::<Result<_, _>>()?;
    Ok(assemble_process_result(
        spec.spec_id.clone(),
        log.process_id.clone(),
        trace_results,
    ))
}

/// Builds the process result from already-evaluated traces; shared by the
/// sequential and parallel paths so both average identically.
pub(crate) fn assemble_process_result(
    spec_id: String,
    process_id: String,
    trace_results: Vec<TraceResult>,
) -> ProcessResult {
    let taus: Vec<f64> = trace_results
        .iter()
        .filter_map(|t| t.tau_measure.value())
        .collect();
    let p_measure = if taus.is_empty() {
        Metric::NULL
    } else {
        Metric::new(taus.iter().sum::<f64>() / taus.len() as f64)
            .expect("mean of unit-interval values stays in the unit interval")
    };
    ProcessResult {
        spec_id,
        process_id,
        trace_results,
        p_measure,
    }
}
