//! Projection functions: map raw attribute values onto the `0..1` compliance
//! scale through numeric bands, categorical scales, rule references or
//! constants, and validate that bands never reward a larger violation.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{
    approx_ge, approx_gt, approx_le, AttributeValue, Finding, FindingCode, Metric, Value,
};
use crate::rule::{self, Bindings, RuleAst, RuleError};

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error(
        "KIND_MISMATCH: attribute '{attribute}' holds a {found} value but the projection expects a {expected}"
    )]
    KindMismatch {
        attribute: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("UNKNOWN_LEVEL: '{level}' is not on the declared scale of attribute '{attribute}'")]
    UnknownLevel { attribute: String, level: String },
    #[error("EMPTY_SCALE: a categorical scale needs at least two ordered levels")]
    EmptyScale,
    #[error("UNRESOLVED_RULE: projection references unknown rule '{0}'")]
    UnresolvedRule(String),
    #[error("SCORE_OUT_OF_RANGE: projection produced {0}, outside [0, 1]")]
    ScoreOutOfRange(f64),
    #[error(transparent)]
    Rule(#[from] RuleError),
}

/// Whether smaller or larger raw values are the compliant end of a band scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Bands carry inclusive upper bounds (delays, durations, counts of
    /// defects): the first band whose bound is `>=` the value applies.
    LowerIsBetter,
    /// Bands carry inclusive lower bounds (amounts paid, fractions
    /// delivered): the first band whose bound is `<=` the value applies.
    HigherIsBetter,
}

/// One step of a piecewise-constant score: `bound` is inclusive on the
/// compliant side per the scale's [`Direction`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub bound: f64,
    pub score: f64,
}

/// An ordered piecewise-constant score over a numeric domain. Bands are
/// scanned in order and the first whose bound covers the value wins;
/// `fallback` covers the remaining domain, so every finite input scores.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericBands {
    pub direction: Direction,
    pub bands: Vec<Band>,
    pub fallback: f64,
}

impl NumericBands {
    pub fn lower_is_better(bands: Vec<(f64, f64)>, fallback: f64) -> Self {
        NumericBands {
            direction: Direction::LowerIsBetter,
            bands: bands
                .into_iter()
                .map(|(bound, score)| Band { bound, score })
                .collect(),
            fallback,
        }
    }

    pub fn higher_is_better(bands: Vec<(f64, f64)>, fallback: f64) -> Self {
        NumericBands {
            direction: Direction::HigherIsBetter,
            bands: bands
                .into_iter()
                .map(|(bound, score)| Band { bound, score })
                .collect(),
            fallback,
        }
    }

    fn score_for(&self, value: f64) -> f64 {
        for band in &self.bands {
            let covered = match self.direction {
                Direction::LowerIsBetter => approx_le(value, band.bound),
                Direction::HigherIsBetter => approx_ge(value, band.bound),
            };
            if covered {
                return band.score;
            }
        }
        self.fallback
    }
}

/// Scores for an ordered categorical scale (worst level first).
#[derive(Debug, Clone, PartialEq)]
pub struct CategoricalMap {
    pub scale: Vec<String>,
    pub scores: BTreeMap<String, f64>,
    /// True when the scores follow the uniform `i/k` scheme of
    /// [`default_scale_map`] rather than a user-supplied mapping.
    pub default_scheme: bool,
}

/// Maps one raw attribute value to a compliance score.
#[derive(Debug, Clone, PartialEq)]
pub enum ProjectionFn {
    Bands(NumericBands),
    Categorical(CategoricalMap),
    /// Delegates to a named rule from the spec's rule table; the attribute's
    /// own raw numeric value is bound as `val(<name>)`.
    RuleRef(String),
    Constant(f64),
}

/// Projects one attribute value. The value's kind must match the projection
/// variant: numbers for bands, levels for categorical maps.
pub fn project(
    projection: &ProjectionFn,
    value: &AttributeValue,
    rules: &BTreeMap<String, RuleAst>,
) -> Result<Metric, ProjectionError> {
    match projection {
        ProjectionFn::Bands(bands) => {
            let raw = value
                .value
                .as_number()
                .ok_or_else(|| ProjectionError::KindMismatch {
                    attribute: value.name.clone(),
                    expected: "number",
                    found: value.value.kind_name(),
                })?;
            score_metric(bands.score_for(raw))
        }
        ProjectionFn::Categorical(map) => {
            let level = match &value.value {
                Value::Level(level) => level,
                other => {
                    return Err(ProjectionError::KindMismatch {
                        attribute: value.name.clone(),
                        expected: "level",
                        found: other.kind_name(),
                    })
                }
            };
            let score = map
                .scores
                .get(level)
                .copied()
                .filter(|_| map.scale.iter().any(|l| l == level))
                .ok_or_else(|| ProjectionError::UnknownLevel {
                    attribute: value.name.clone(),
                    level: level.clone(),
                })?;
            score_metric(score)
        }
        ProjectionFn::RuleRef(name) => {
            let ast = rules
                .get(name)
                .ok_or_else(|| ProjectionError::UnresolvedRule(name.clone()))?;
            let mut bindings = Bindings::new();
            if let Some(raw) = value.value.as_number() {
                bindings.bind_raw(&value.name, raw);
            }
            Ok(rule::evaluate(ast, &bindings)?)
        }
        ProjectionFn::Constant(score) => score_metric(*score),
    }
}

fn score_metric(score: f64) -> Result<Metric, ProjectionError> {
    Metric::new(score).map_err(|_| ProjectionError::ScoreOutOfRange(score))
}

/// Builds the uniform categorical mapping: level `i` of `k` (1-based, worst
/// level first) scores `i/k`, so a 3-point scale becomes 1/3, 2/3, 1.
pub fn default_scale_map<S: AsRef<str>>(levels: &[S]) -> Result<CategoricalMap, ProjectionError> {
    if levels.len() < 2 {
        return Err(ProjectionError::EmptyScale);
    }
    let k = levels.len() as f64;
    let scale: Vec<String> = levels.iter().map(|l| l.as_ref().to_string()).collect();
    let scores = scale
        .iter()
        .enumerate()
        .map(|(i, level)| (level.clone(), (i + 1) as f64 / k))
        .collect();
    Ok(CategoricalMap {
        scale,
        scores,
        default_scheme: true,
    })
}

/// Checks that a bands projection never scores a larger violation higher:
/// bounds strictly ordered in scan direction, scores non-increasing in scan
/// order, fallback no better than the last band. Other variants pass
/// vacuously. Finding paths are relative to the projection.
pub fn check_monotone(projection: &ProjectionFn) -> Vec<Finding> {
    let ProjectionFn::Bands(bands) = projection else {
        return Vec::new();
    };
    let mut findings = Vec::new();

    if bands.bands.is_empty() {
        findings.push(Finding::error(
            FindingCode::EmptyBands,
            "bands",
            "a bands projection needs at least one band before the fallback",
        ));
    }
    if bands.bands.iter().any(|b| !b.bound.is_finite()) {
        findings.push(Finding::error(
            FindingCode::BandBoundsNotMonotone,
            "bands",
            "band bounds must be finite; the fallback already covers the open end",
        ));
        return findings;
    }

    for (index, pair) in bands.bands.windows(2).enumerate() {
        let ordered = match bands.direction {
            Direction::LowerIsBetter => approx_gt(pair[1].bound, pair[0].bound),
            Direction::HigherIsBetter => approx_gt(pair[0].bound, pair[1].bound),
        };
        if !ordered {
            findings.push(Finding::error(
                FindingCode::BandBoundsNotMonotone,
                format!("bands[{}]", index + 1),
                format!(
                    "bound {} does not continue strictly {} from {}",
                    pair[1].bound,
                    match bands.direction {
                        Direction::LowerIsBetter => "upward",
                        Direction::HigherIsBetter => "downward",
                    },
                    pair[0].bound
                ),
            ));
        }
        if approx_gt(pair[1].score, pair[0].score) {
            findings.push(Finding::error(
                FindingCode::NonMonotoneBands,
                format!("bands[{}]", index + 1),
                format!(
                    "score {} exceeds {}: a larger violation must not score higher",
                    pair[1].score, pair[0].score
                ),
            ));
        }
    }
    if let Some(last) = bands.bands.last() {
        if approx_gt(bands.fallback, last.score) {
            findings.push(Finding::error(
                FindingCode::NonMonotoneBands,
                "else",
                format!(
                    "fallback score {} exceeds the last band's {}",
                    bands.fallback, last.score
                ),
            ));
        }
    }
    findings
}

/// Full structural validation of a projection: monotonicity plus score
/// ranges, scale completeness and rule resolution.
pub fn validate_projection(
    projection: &ProjectionFn,
    rules: &BTreeMap<String, RuleAst>,
) -> Vec<Finding> {
    let mut findings = check_monotone(projection);
    match projection {
        ProjectionFn::Bands(bands) => {
            for (index, band) in bands.bands.iter().enumerate() {
                if !(band.score.is_finite() && (0.0..=1.0).contains(&band.score)) {
                    findings.push(Finding::error(
                        FindingCode::ScoreOutOfRange,
                        format!("bands[{index}]"),
                        format!("score {} is outside [0, 1]", band.score),
                    ));
                }
            }
            if !(bands.fallback.is_finite() && (0.0..=1.0).contains(&bands.fallback)) {
                findings.push(Finding::error(
                    FindingCode::ScoreOutOfRange,
                    "else",
                    format!("fallback score {} is outside [0, 1]", bands.fallback),
                ));
            }
        }
        ProjectionFn::Categorical(map) => {
            if map.scale.len() < 2 {
                findings.push(Finding::error(
                    FindingCode::EmptyScale,
                    "scale",
                    "a categorical scale needs at least two ordered levels",
                ));
            }
            let mut seen = std::collections::BTreeSet::new();
            for level in &map.scale {
                if !seen.insert(level) {
                    findings.push(Finding::error(
                        FindingCode::DuplicateLevel,
                        "scale",
                        format!("level '{level}' appears twice on the scale"),
                    ));
                }
            }
            for level in &map.scale {
                match map.scores.get(level) {
                    None => findings.push(Finding::error(
                        FindingCode::MissingLevelScore,
                        "scores",
                        format!("level '{level}' has no score"),
                    )),
                    Some(score) if !(score.is_finite() && (0.0..=1.0).contains(score)) => {
                        findings.push(Finding::error(
                            FindingCode::ScoreOutOfRange,
                            format!("scores.{level}"),
                            format!("score {score} is outside [0, 1]"),
                        ));
                    }
                    Some(_) => {}
                }
            }
            for level in map.scores.keys() {
                if !map.scale.iter().any(|l| l == level) {
                    findings.push(Finding::error(
                        FindingCode::UndeclaredLevel,
                        format!("scores.{level}"),
                        format!("score given for '{level}', which is not on the scale"),
                    ));
                }
            }
        }
        ProjectionFn::RuleRef(name) => {
            if !rules.contains_key(name) {
                findings.push(Finding::error(
                    FindingCode::UnresolvedRule,
                    "rule",
                    format!("rule '{name}' is not declared in the rules table"),
                ));
            }
        }
        ProjectionFn::Constant(score) => {
            if !(score.is_finite() && (0.0..=1.0).contains(score)) {
                findings.push(Finding::error(
                    FindingCode::ScoreOutOfRange,
                    "score",
                    format!("constant score {score} is outside [0, 1]"),
                ));
            }
        }
    }
    findings
}
