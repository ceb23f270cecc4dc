//! Naive reference implementations and random case builders for the
//! integration suites.
//!
//! The `naive_*` functions re-derive every number by direct table scanning
//! over the spec, sharing no code with the library's evaluation path, so the
//! two can be compared output-for-output.

// each integration test target compiles this module separately and uses a
// different subset of it
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;

use pcmeter_core::model::{
    AggregatorChoice, AttributeSpec, AttributeValue, ComplianceSpec, CutoffThreshold, DimensionId,
    TaskEvent, TaskSelector, Trace, Value,
};
use pcmeter_core::projection::{Band, CategoricalMap, Direction, NumericBands, ProjectionFn};
use pcmeter_core::rule::{Bindings, Clause, CmpOp, Expr, Reference, RuleAst};

const EPS: f64 = 1e-9;

// --- naive τ recomputation --------------------------------------------------

/// Scores one raw value through a projection by direct scanning. `None`
/// stands for Null. Rule projections are outside this oracle's scope.
fn naive_project(projection: &ProjectionFn, value: &Value) -> Option<f64> {
    match projection {
        ProjectionFn::Bands(bands) => {
            let Value::Number { value: x, .. } = value else {
                panic!("oracle cases only feed numbers to bands");
            };
            for band in &bands.bands {
                let hit = match bands.direction {
                    Direction::LowerIsBetter => *x <= band.bound + EPS,
                    Direction::HigherIsBetter => *x >= band.bound - EPS,
                };
                if hit {
                    return Some(band.score);
                }
            }
            Some(bands.fallback)
        }
        ProjectionFn::Categorical(map) => {
            let Value::Level(level) = value else {
                panic!("oracle cases only feed levels to categorical maps");
            };
            Some(map.scores[level])
        }
        ProjectionFn::Constant(score) => Some(*score),
        ProjectionFn::RuleRef(_) => panic!("oracle cases do not use rule projections"),
    }
}

fn naive_resolve<'a>(
    spec: &'a ComplianceSpec,
    task: &str,
    attribute: &str,
) -> Option<&'a AttributeSpec> {
    let mut wildcard = None;
    for row in &spec.attribute_specs {
        if row.attribute_name != attribute {
            continue;
        }
        match &row.task_selector {
            TaskSelector::Task(id) if id == task => return Some(row),
            TaskSelector::Any if wildcard.is_none() => wildcard = Some(row),
            _ => {}
        }
    }
    wildcard
}

fn naive_aggregate(choice: &AggregatorChoice, scores: &[(f64, f64)]) -> f64 {
    match choice {
        AggregatorChoice::Average => {
            scores.iter().map(|(s, _)| s).sum::<f64>() / scores.len() as f64
        }
        AggregatorChoice::WeightedAverage => {
            let total: f64 = scores.iter().map(|(_, w)| w).sum();
            scores.iter().map(|(s, w)| s * w).sum::<f64>() / total
        }
        AggregatorChoice::Product => scores.iter().map(|(s, _)| s).product(),
        AggregatorChoice::Min => scores.iter().map(|(s, _)| *s).fold(f64::INFINITY, f64::min),
        AggregatorChoice::Max => scores
            .iter()
            .map(|(s, _)| *s)
            .fold(f64::NEG_INFINITY, f64::max),
        AggregatorChoice::Rule(_) => panic!("oracle cases do not use rule aggregators"),
    }
}

/// Recomputes a trace's τ-measure from raw attribute values via a full-table
/// enumeration: project every (event, attribute), bucket by (event,
/// dimension), aggregate, take per-dimension positive minima, aggregate.
pub fn naive_tau(spec: &ComplianceSpec, trace: &Trace) -> f64 {
    // (event index, dimension) -> [(score, weight)]
    let mut table: BTreeMap<(usize, String), Vec<(f64, f64)>> = BTreeMap::new();
    for (index, event) in trace.events.iter().enumerate() {
        for attribute in &event.attributes {
            let Some(row) = naive_resolve(spec, &event.task_id, &attribute.name) else {
                continue;
            };
            if row.meta {
                continue;
            }
            let projection = row.projection.as_ref().expect("oracle rows have projections");
            if let Some(score) = naive_project(projection, &attribute.value) {
                table
                    .entry((index, row.dimension.as_str().to_string()))
                    .or_default()
                    .push((score, row.weight));
            }
        }
    }

    let mut per_dimension: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for ((_, dimension), scores) in &table {
        let value = naive_aggregate(&spec.attribute_aggregator, scores);
        per_dimension.entry(dimension.clone()).or_default().push(value);
    }

    let minima: Vec<f64> = per_dimension
        .values()
        .map(|values| {
            values
                .iter()
                .copied()
                .filter(|v| *v > EPS)
                .fold(f64::INFINITY, f64::min)
        })
        .map(|m| if m.is_finite() { m } else { 0.0 })
        .collect();
    naive_aggregate(&spec.trace_aggregator, &minima.iter().map(|m| (*m, 1.0)).collect::<Vec<_>>())
}

// --- naive rule interpreter ---------------------------------------------------

/// Straight structural interpreter for the rule DSL; `None` stands for Null.
pub fn naive_rule_evaluate(ast: &RuleAst, bindings: &Bindings) -> Option<f64> {
    fn truth(expr: &Expr, bindings: &Bindings) -> bool {
        match expr {
            Expr::And(a, b) => truth(a, bindings) & truth(b, bindings),
            Expr::Or(a, b) => truth(a, bindings) | truth(b, bindings),
            Expr::Not(inner) => !truth(inner, bindings),
            Expr::Cmp {
                reference,
                op,
                literal,
            } => {
                let lhs = match reference {
                    Reference::Phi(name) => bindings.projected(name).expect("bound"),
                    Reference::Val(name) => bindings.raw(name).expect("bound"),
                };
                let rhs = *literal;
                match op {
                    CmpOp::Lt => lhs < rhs - EPS,
                    CmpOp::Le => lhs <= rhs + EPS,
                    CmpOp::Eq => (lhs - rhs).abs() <= EPS,
                    CmpOp::Ge => lhs >= rhs - EPS,
                    CmpOp::Gt => lhs > rhs + EPS,
                    CmpOp::Ne => (lhs - rhs).abs() > EPS,
                }
            }
        }
    }
    for clause in &ast.clauses {
        if truth(&clause.condition, bindings) {
            return clause.result.value();
        }
    }
    ast.default.and_then(|m| m.value())
}

// --- random case builders -----------------------------------------------------

const DIMENSION_POOL: [&str; 3] = ["temporal", "monetary", "quality"];
const ATTRIBUTE_POOL: [&str; 4] = ["a0", "a1", "a2", "a3"];
const TASK_POOL: [&str; 5] = ["T1", "T2", "T3", "T4", "T5"];
const LEVEL_POOL: [&str; 4] = ["poor", "fair", "good", "great"];

pub struct RandomCase {
    pub spec: ComplianceSpec,
    pub trace: Trace,
}

fn random_monotone_bands(rng: &mut impl Rng) -> ProjectionFn {
    let direction = if rng.gen_bool(0.5) {
        Direction::LowerIsBetter
    } else {
        Direction::HigherIsBetter
    };
    let band_count = rng.gen_range(1..=4);
    let mut bounds: Vec<f64> = (0..band_count)
        .map(|_| rng.gen_range(-20.0..80.0))
        .collect();
    bounds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    bounds.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    if direction == Direction::HigherIsBetter {
        bounds.reverse();
    }
    let mut scores: Vec<f64> = (0..=bounds.len()).map(|_| rng.gen_range(0.0..=1.0)).collect();
    scores.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let fallback = scores.pop().unwrap();
    ProjectionFn::Bands(NumericBands {
        direction,
        bands: bounds
            .into_iter()
            .zip(scores)
            .map(|(bound, score)| Band { bound, score })
            .collect(),
        fallback,
    })
}

fn random_projection(rng: &mut impl Rng) -> ProjectionFn {
    match rng.gen_range(0..4) {
        0 | 1 => random_monotone_bands(rng),
        2 => {
            let k = rng.gen_range(2..=LEVEL_POOL.len());
            let scale: Vec<String> = LEVEL_POOL[..k].iter().map(|s| s.to_string()).collect();
            let scores = scale
                .iter()
                .enumerate()
                .map(|(i, level)| (level.clone(), (i + 1) as f64 / k as f64))
                .collect();
            ProjectionFn::Categorical(CategoricalMap {
                scale,
                scores,
                default_scheme: true,
            })
        }
        _ => ProjectionFn::Constant(rng.gen_range(0.0..=1.0)),
    }
}

fn random_aggregator(rng: &mut impl Rng) -> AggregatorChoice {
    match rng.gen_range(0..5) {
        0 => AggregatorChoice::Average,
        1 => AggregatorChoice::WeightedAverage,
        2 => AggregatorChoice::Product,
        3 => AggregatorChoice::Min,
        _ => AggregatorChoice::Max,
    }
}

fn random_cutoff(rng: &mut impl Rng) -> CutoffThreshold {
    let cutoff = rng.gen_range(0.0..=0.6);
    let threshold = rng.gen_range(0.0..=(1.0 - cutoff));
    CutoffThreshold::new(cutoff, threshold)
}

fn random_value_for(projection: &ProjectionFn, rng: &mut impl Rng) -> Value {
    match projection {
        ProjectionFn::Bands(_) => Value::Number {
            value: rng.gen_range(-40.0..120.0),
            unit: pcmeter_core::model::NumberUnit::Plain,
        },
        ProjectionFn::Categorical(map) => {
            let level = &map.scale[rng.gen_range(0..map.scale.len())];
            Value::Level(level.clone())
        }
        _ => Value::Number {
            value: rng.gen_range(0.0..10.0),
            unit: pcmeter_core::model::NumberUnit::Plain,
        },
    }
}

/// A random spec: bands/categorical/constant projections, any non-rule
/// aggregators, wildcard rows plus occasional exact-task overrides, over at
/// most 3 dimensions and 4 attributes.
pub fn random_spec(rng: &mut impl Rng) -> ComplianceSpec {
    let dimension_count = rng.gen_range(1..=DIMENSION_POOL.len());
    let attribute_count = rng.gen_range(1..=ATTRIBUTE_POOL.len());

    let mut spec = ComplianceSpec::new("random-case");
    spec.attribute_aggregator = random_aggregator(rng);
    spec.dimension_aggregator = random_aggregator(rng);
    spec.trace_aggregator = random_aggregator(rng);
    for dimension in &DIMENSION_POOL[..dimension_count] {
        spec.dimension_defaults
            .insert(DimensionId::new(dimension), random_cutoff(rng));
    }

    for attribute in &ATTRIBUTE_POOL[..attribute_count] {
        let dimension = DIMENSION_POOL[rng.gen_range(0..dimension_count)];
        let mut row = AttributeSpec::new(
            TaskSelector::Any,
            *attribute,
            DimensionId::new(dimension),
            random_projection(rng),
        );
        row.weight = rng.gen_range(0.1..3.0);
        spec.attribute_specs.push(row);

        // occasional exact-task override with its own projection
        if rng.gen_bool(0.3) {
            let task = TASK_POOL[rng.gen_range(0..TASK_POOL.len())];
            let mut row = AttributeSpec::new(
                TaskSelector::Task(task.to_string()),
                *attribute,
                DimensionId::new(dimension),
                random_projection(rng),
            );
            row.weight = rng.gen_range(0.1..3.0);
            spec.attribute_specs.push(row);
        }
    }
    spec
}

/// A random trace of at most 5 events whose attribute values match the kinds
/// the spec's resolving projections expect. Event 0 always carries the first
/// declared attribute, so something scores.
pub fn random_trace(rng: &mut impl Rng, spec: &ComplianceSpec, trace_id: &str) -> Trace {
    let attribute_names: Vec<&str> = ATTRIBUTE_POOL
        .iter()
        .copied()
        .filter(|name| {
            spec.attribute_specs
                .iter()
                .any(|row| row.attribute_name == *name)
        })
        .collect();
    let event_count = rng.gen_range(1..=5);
    let mut events = Vec::new();
    for position in 0..event_count {
        let task = TASK_POOL[rng.gen_range(0..TASK_POOL.len())];
        let mut attributes = Vec::new();
        for (slot, attribute) in attribute_names.iter().enumerate() {
            let include = (position == 0 && slot == 0) || rng.gen_bool(0.6);
            if !include {
                continue;
            }
            // the projection that will actually score this value
            let projection = naive_resolve(spec, task, attribute)
                .and_then(|row| row.projection.as_ref())
                .expect("declared above");
            attributes.push(AttributeValue {
                name: attribute.to_string(),
                value: random_value_for(projection, rng),
            });
        }
        events.push(TaskEvent::new(task, position, attributes).unwrap());
    }
    Trace::new(trace_id, events).unwrap()
}

/// A random spec plus one matching trace.
pub fn random_case(rng: &mut impl Rng) -> RandomCase {
    let spec = random_spec(rng);
    let trace = random_trace(rng, &spec, "random-trace");
    RandomCase { spec, trace }
}

// --- random rules ---------------------------------------------------------------

const RULE_NAME_POOL: [&str; 4] = ["alpha", "beta", "gamma", "delta"];

fn random_expr(rng: &mut impl Rng, depth: usize) -> Expr {
    if depth == 0 || rng.gen_bool(0.4) {
        let name = RULE_NAME_POOL[rng.gen_range(0..RULE_NAME_POOL.len())].to_string();
        let reference = if rng.gen_bool(0.5) {
            Reference::Phi(name)
        } else {
            Reference::Val(name)
        };
        let op = match rng.gen_range(0..6) {
            0 => CmpOp::Lt,
            1 => CmpOp::Le,
            2 => CmpOp::Eq,
            3 => CmpOp::Ge,
            4 => CmpOp::Gt,
            _ => CmpOp::Ne,
        };
        return Expr::Cmp {
            reference,
            op,
            literal: round3(rng.gen_range(-1.0..2.0)),
        };
    }
    match rng.gen_range(0..3) {
        0 => Expr::And(
            Box::new(random_expr(rng, depth - 1)),
            Box::new(random_expr(rng, depth - 1)),
        ),
        1 => Expr::Or(
            Box::new(random_expr(rng, depth - 1)),
            Box::new(random_expr(rng, depth - 1)),
        ),
        _ => Expr::Not(Box::new(random_expr(rng, depth - 1))),
    }
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

pub fn random_rule(rng: &mut impl Rng) -> RuleAst {
    let clause_count = rng.gen_range(1..=4);
    let clauses = (0..clause_count)
        .map(|_| Clause {
            condition: random_expr(rng, 3),
            result: pcmeter_core::model::Metric::new(round3(rng.gen_range(0.0..=1.0))).unwrap(),
        })
        .collect();
    let default = if rng.gen_bool(0.6) {
        Some(pcmeter_core::model::Metric::new(round3(rng.gen_range(0.0..=1.0))).unwrap())
    } else {
        None
    };
    RuleAst { clauses, default }
}

/// Binds every pooled name for both `phi` and `val`, so any generated rule
/// evaluates without unbound references.
pub fn random_bindings(rng: &mut impl Rng) -> Bindings {
    let mut bindings = Bindings::new();
    for name in RULE_NAME_POOL {
        bindings.bind_projected(name, rng.gen_range(0.0..=1.0));
        bindings.bind_raw(name, rng.gen_range(-2.0..3.0));
    }
    bindings
}
