//! Shared builders for the benchmark suite.

use pcmeter_core::model::ProcessLog;
use pcmeter_core::payment;

/// A simulated payment log of `traces` traces, deterministic per seed.
pub fn simulated_log(traces: usize, seed: u64) -> ProcessLog {
    payment::generate_log(&payment::sample_scenarios(traces, seed))
}
