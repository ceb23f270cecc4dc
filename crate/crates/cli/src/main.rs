//! `pcmeter`: score process execution logs against a compliance spec.

mod explain;

use std::num::NonZeroUsize;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use pcmeter_core::engine::evaluate_log;
use pcmeter_core::io::{self, LogFormat, ReportFormat};
use pcmeter_core::metrics::EvalError;
use pcmeter_core::model::Severity;
use pcmeter_core::payment;

#[derive(Parser)]
#[command(
    name = "pcmeter",
    version,
    about = "Measures how compliant process executions are, on a continuous 0..1 scale"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a spec document and print its validation findings.
    ValidateSpec {
        /// Path to the spec JSON document.
        #[arg(long)]
        spec: PathBuf,
    },
    /// Score a log against a spec and write an evaluation report.
    Evaluate {
        /// Path to the spec JSON document.
        #[arg(long)]
        spec: PathBuf,
        /// Path to the event log.
        #[arg(long)]
        log: PathBuf,
        /// Log encoding.
        #[arg(long, value_enum, default_value_t = LogFormatArg::Jsonl)]
        format: LogFormatArg,
        /// Report destination path.
        #[arg(long)]
        out: PathBuf,
        /// Report encoding.
        #[arg(long, value_enum, default_value_t = ReportFormatArg::Json)]
        report: ReportFormatArg,
        /// Worker threads for per-trace evaluation; defaults to the available
        /// parallelism. Output is identical for every value.
        #[arg(long, env = "PCMETER_JOBS")]
        jobs: Option<NonZeroUsize>,
    },
    /// Print a per-task, per-dimension breakdown of one trace.
    Explain {
        /// Path to the spec JSON document.
        #[arg(long)]
        spec: PathBuf,
        /// Path to the event log.
        #[arg(long)]
        log: PathBuf,
        /// Log encoding.
        #[arg(long, value_enum, default_value_t = LogFormatArg::Jsonl)]
        format: LogFormatArg,
        /// Trace id to explain.
        #[arg(long)]
        trace: String,
    },
    /// Generate a synthetic payment-process log.
    Simulate {
        /// Number of traces to generate.
        #[arg(long)]
        count: NonZeroUsize,
        /// Random seed; equal seeds give byte-identical logs.
        #[arg(long)]
        seed: u64,
        /// Destination path (JSON Lines).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum LogFormatArg {
    Jsonl,
    Csv,
}

impl From<LogFormatArg> for LogFormat {
    fn from(arg: LogFormatArg) -> Self {
        match arg {
            LogFormatArg::Jsonl => LogFormat::Jsonl,
            LogFormatArg::Csv => LogFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormatArg {
    Json,
    Csv,
}

impl From<ReportFormatArg> for ReportFormat {
    fn from(arg: ReportFormatArg) -> Self {
        match arg {
            ReportFormatArg::Json => ReportFormat::Json,
            ReportFormatArg::Csv => ReportFormat::Csv,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            let mut source = std::error::Error::source(error.as_ref());
            while let Some(cause) = source {
                eprintln!("  caused by: {cause}");
                source = cause.source();
            }
            ExitCode::from(1)
        }
    }
}

fn run(command: Command) -> Result<ExitCode, Box<dyn std::error::Error>> {
    match command {
        Command::ValidateSpec { spec } => {
            let (_, findings) = io::load_spec_with_findings(&spec)?;
            for finding in &findings {
                println!("{finding}");
            }
            let errors = findings
                .iter()
                .filter(|f| f.severity == Severity::Error)
                .count();
            let warnings = findings.len() - errors;
            println!("{errors} errors, {warnings} warnings");
            Ok(if errors == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Evaluate {
            spec,
            log,
            format,
            out,
            report,
            jobs,
        } => {
            let spec = io::load_spec(&spec)?;
            let log = io::load_log(&log, format.into())?;
            let jobs = jobs
                .map(NonZeroUsize::get)
                .unwrap_or_else(default_parallelism);
            let result = evaluate_log(&spec, &log, Some(jobs))?;
            io::emit_report(&result, &out, report.into())?;
            println!(
                "P-Measure: {} over {} traces",
                result.p_measure,
                result.trace_results.len()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Explain {
            spec,
            log,
            format,
            trace,
        } => {
            let spec = io::load_spec(&spec)?;
            let log = io::load_log(&log, format.into())?;
            let found = log
                .traces
                .iter()
                .find(|t| t.trace_id == trace)
                .ok_or(EvalError::UnknownTraceId(trace))?;
            let result = pcmeter_core::metrics::tau_measure(found, &spec)?;
            print!("{}", explain::render_trace_table(&result));
            Ok(ExitCode::SUCCESS)
        }
        Command::Simulate { count, seed, out } => {
            let scenarios = payment::sample_scenarios(count.get(), seed);
            let log = payment::generate_log(&scenarios);
            let bytes = io::emit_log(&log, &out, LogFormat::Jsonl)?;
            eprintln!(
                "wrote {} traces ({bytes} bytes) to {}",
                log.traces.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn default_parallelism() -> usize {
    std::thread::available_parallelism()
        .map(NonZeroUsize::get)
        .unwrap_or(1)
}
