//! Preset runner and command-line front end for `ergomoment`.
//!
//! Every subcommand reduces to a [`Preset`] of one or more tasks; [`run_preset`]
//! executes it and assembles a canonical report whose bytes depend only on
//! the preset (seed included). Wall-clock data goes to a separate metadata
//! object.

pub mod app;
pub mod config;
pub mod error;
pub mod prepare;
pub mod report;
pub mod tasks;

use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde_json::{json, Value};

pub use config::{Overrides, Preset, Task, SCHEMA_VERSION};
pub use error::{CliError, CliResult};
use report::{canonical_compact, to_value, Table};

/// Environment variable selecting the worker-thread count.
pub const THREADS_ENV: &str = "ERGOMOMENT_THREADS";

/// Exit status for a run whose checks did not all pass.
pub const EXIT_CHECK_FAILED: i32 = 2;
/// Exit status for invalid input or a library error.
pub const EXIT_ERROR: i32 = 1;

pub struct RunOutput {
    pub report: Value,
    pub meta: Value,
    /// Per-task plot tables, labelled `<index>_<kind>`.
    pub tables: Vec<(String, Table)>,
    pub passed: bool,
}

pub fn run_preset(preset: &Preset) -> CliResult<RunOutput> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let config = to_value(preset);
    let config_sha256 = report::sha256_hex(canonical_compact(&config).as_bytes());
    let mut task_reports = Vec::with_capacity(preset.tasks.len());
    let mut tables = Vec::new();
    let mut passed = true;
    for (idx, task) in preset.tasks.iter().enumerate() {
        let outcome = tasks::run_task(task, preset.seed)?;
        let ok = outcome.passed();
        passed &= ok;
        task_reports.push(json!({
            "index": idx,
            "kind": outcome.kind,
            "passed": ok,
            "checks": to_value(&outcome.checks),
            "result": outcome.result,
        }));
        if let Some(table) = outcome.table {
            tables.push((format!("{idx}_{}", outcome.kind), table));
        }
    }
    let report = json!({
        "name": preset.name,
        "passed": passed,
        "provenance": {
            "config_sha256": config_sha256,
            "seed": preset.seed,
            "schema": SCHEMA_VERSION,
            "versions": {
                "ergomoment": ergomoment::VERSION,
                "ergomoment-cli": env!("CARGO_PKG_VERSION"),
            },
            "rerun": "save `config` to a file and pass it to `ergomoment run`",
        },
        "config": config,
        "tasks": task_reports,
    });
    let meta = json!({
        "config_sha256": config_sha256,
        "started_unix_seconds": started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0),
        "elapsed_seconds": clock.elapsed().as_secs_f64(),
        "threads": threads(),
    });
    Ok(RunOutput {
        report,
        meta,
        tables,
        passed,
    })
}

#[cfg(feature = "parallel")]
fn threads() -> usize {
    rayon::current_num_threads()
}

#[cfg(not(feature = "parallel"))]
fn threads() -> usize {
    1
}

/// Sizes the global worker pool from [`THREADS_ENV`] when it is set.
pub fn configure_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let count: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::input("E_USAGE", format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    {
        // A second call in the same process keeps the existing pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(count).build_global();
    }
    #[cfg(not(feature = "parallel"))]
    let _ = count;
    Ok(())
}
