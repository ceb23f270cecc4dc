//! Renders one trace's evaluation as a per-task, per-dimension text table:
//! attribute scores, dimension metrics with classes, T-measures, the
//! per-dimension minima and the τ-measure.

use std::collections::{BTreeMap, BTreeSet};

use pcmeter_core::io::sig12;
use pcmeter_core::metrics::TraceResult;
use pcmeter_core::model::Metric;

fn fmt_metric(metric: Metric) -> String {
    match metric.value() {
        Some(v) => sig12(v).to_string(),
        None => "--".to_string(),
    }
}

fn fmt_metric_with_class(metric: Metric, class: Option<&str>) -> String {
    match (metric.value(), class) {
        (Some(v), Some(class)) => format!("{} ({class})", sig12(v)),
        (Some(v), None) => sig12(v).to_string(),
        _ => "--".to_string(),
    }
}

pub fn render_trace_table(result: &TraceResult) -> String {
    // every (dimension, attribute) pair that scored anywhere in the trace
    let mut attributes_by_dimension: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for task in &result.task_results {
        for metric in &task.dimension_metrics {
            let set = attributes_by_dimension
                .entry(metric.dimension.to_string())
                .or_default();
            for (attribute, _) in &metric.contributing {
                set.insert(attribute.clone());
            }
        }
    }

    let mut header = vec!["dimension".to_string(), "attribute".to_string()];
    header.extend(result.task_results.iter().map(|t| t.task_id.clone()));

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (dimension, attributes) in &attributes_by_dimension {
        for attribute in attributes {
            let mut row = vec![dimension.clone(), attribute.clone()];
            for task in &result.task_results {
                let cell = task
                    .dimension_metrics
                    .iter()
                    .find(|m| m.dimension.as_str() == dimension)
                    .and_then(|m| {
                        m.contributing
                            .iter()
                            .find(|(name, _)| name == attribute)
                            .map(|(_, score)| fmt_metric(*score))
                    })
                    .unwrap_or_else(|| "--".to_string());
                row.push(cell);
            }
            rows.push(row);
        }
        let mut row = vec![dimension.clone(), "(dimension metric)".to_string()];
        for task in &result.task_results {
            let cell = task
                .dimension_metrics
                .iter()
                .find(|m| m.dimension.as_str() == dimension)
                .map(|m| fmt_metric_with_class(m.value, m.class.map(|c| c.as_str())))
                .unwrap_or_else(|| "--".to_string());
            row.push(cell);
        }
        rows.push(row);
    }

    let mut footer = vec![String::new(), "T-Measure".to_string()];
    for task in &result.task_results {
        footer.push(fmt_metric_with_class(
            task.t_measure,
            task.class.map(|c| c.as_str()),
        ));
    }

    // column widths over header, body and footer
    let mut widths: Vec<usize> = header.iter().map(String::len).collect();
    for row in rows.iter().chain(std::iter::once(&footer)) {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    let render_row = |row: &[String]| -> String {
        row.iter()
            .enumerate()
            .map(|(i, cell)| format!("{cell:<width$}", width = widths[i]))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    let separator = widths
        .iter()
        .map(|w| "-".repeat(*w))
        .collect::<Vec<_>>()
        .join("--");

    let mut out = String::new();
    out.push_str(&format!(
        "trace {}: tau-Measure = {}, class = {}\n\n",
        result.trace_id,
        fmt_metric(result.tau_measure),
        result.class
    ));
    out.push_str(&render_row(&header));
    out.push('\n');
    out.push_str(&separator);
    out.push('\n');
    for row in &rows {
        out.push_str(&render_row(row));
        out.push('\n');
    }
    out.push_str(&separator);
    out.push('\n');
    out.push_str(&render_row(&footer));
    out.push('\n');

    let minima = result
        .dimension_minima
        .iter()
        .map(|(dimension, minimum)| format!("{dimension} = {}", sig12(*minimum)))
        .collect::<Vec<_>>()
        .join(", ");
    out.push_str(&format!("\ndimension minima: {minima}\n"));
    out.push_str(&format!(
        "tau-Measure = {} (class {})\n",
        fmt_metric(result.tau_measure),
        result.class
    ));
    out
}
