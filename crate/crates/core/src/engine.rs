//! Whole-log evaluation with optional per-trace parallelism.
//!
//! Traces are independent, so they may be scored on any number of worker
//! threads; results are always assembled in input trace order, making the
//! output bit-identical regardless of the worker count.

use rayon::prelude::*;

use crate::metrics::{assemble_process_result, tau_measure, EvalError, ProcessResult, TraceResult};
use crate::model::{ComplianceSpec, ProcessLog};

/// Evaluates every trace of the log and averages the τ-measures.
///
/// `jobs` picks the worker thread count; `None` uses the process-wide rayon
/// default. Identical inputs produce identical results for every `jobs`
/// value.
pub fn evaluate_log(
    spec: &ComplianceSpec,
    log: &ProcessLog,
    jobs: Option<usize>,
) -> Result<ProcessResult, EvalError> {
    if log.traces.is_empty() {
        return Err(EvalError::EmptyLog);
    }
    let trace_results: Vec<TraceResult> = match jobs {
        Some(1) => log
            .traces
            .iter()
            .map(|trace| tau_measure(trace, spec))
            .collect::<Result<_, _>>()?,
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| EvalError::ThreadPool(e.to_string()))?;
            pool.install(|| {
                log.traces
                    .par_iter()
                    .map(|trace| tau_measure(trace, spec))
                    .collect::<Result<_, _>>()
            })?
        }
        None => log
            .traces
            .par_iter()
            .map(|trace| tau_measure(trace, spec))
            .collect::<Result<_, _>>()?,
    };
    Ok(assemble_process_result(
        spec.spec_id.clone(),
        log.process_id.clone(),
        trace_results,
    ))
}
