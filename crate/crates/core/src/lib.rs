//! Partial-compliance measurement for business-process execution logs.
//!
//! Binary compliant/non-compliant verdicts hide how close an execution came
//! to its prescribed operating ranges. This crate scores executions on a
//! continuous `0..1` scale instead, built up hierarchically:
//!
//! 1. each task attribute is projected onto `0..1` by a [`ProjectionFn`]
//!    (numeric bands, categorical scales, rules, or constants),
//! 2. attribute scores aggregate into per-dimension metrics (temporal,
//!    monetary, role, data, quality, ...),
//! 3. dimension metrics aggregate into a per-task T-measure,
//! 4. per-dimension minima across a trace aggregate into a τ-measure,
//! 5. τ-measures average into a whole-log P-measure.
//!
//! Every metric is classified as non-, partially- or fully compliant against
//! a per-dimension cutoff/threshold window. What to score and how is driven
//! entirely by a declarative [`ComplianceSpec`], loadable from JSON via
//! [`io::load_spec`].
//!
//! The [`payment`] module ships a complete worked fixture (an invoice payment
//! process with interest and penalty compensation) used by the test suite,
//! the CLI `simulate` command and the benchmarks.

pub mod engine;
pub mod io;
pub mod metrics;
pub mod model;
pub mod payment;
pub mod projection;
pub mod rule;

pub use engine::evaluate_log;
pub use metrics::{
    classify_dimension, classify_task, classify_trace, p_measure, t_measure, tau_measure,
    DimensionMetric, EvalError, ProcessResult, TaskResult, TraceResult,
};
pub use model::{
    dimensions_of_task, resolve_attribute_spec, validate_spec, AggregatorChoice, AttributeSpec,
    AttributeValue, ComplianceClass, ComplianceSpec, CutoffThreshold, DimensionId, Finding,
    FindingCode, Metric, NumberUnit, ProcessLog, Severity, TaskEvent, TaskSelector, Trace, Value,
    EPSILON,
};
pub use projection::{check_monotone, default_scale_map, project, ProjectionFn};
pub use rule::{Bindings, RuleAst};
