//! Runs a configuration end to end and persists its artifacts.
//!
//! `summary.json` has the top-level keys `config`, `results`, `pass`,
//! `timings` and `version`. The first three depend only on the
//! configuration and seed; `timings` and `version` do not take part in
//! reproducibility comparisons.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Map, Value};

use crate::config::{ConfigError, DumpFormat, LoadedConfig};
use crate::exec::RayonExecutor;
use crate::experiments::{run_plan, validate, Outcome, RunError};
use crate::io::{write_file, write_trajectory_binary, write_trajectory_csv};

pub const GIT_DESCRIBE: &str = env!("OCPA_GIT_DESCRIBE");

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum TableFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Overrides the configured output directory.
    pub out_dir: Option<PathBuf>,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    pub format: TableFormat,
    /// Skip writing files.
    pub dry: bool,
}

pub struct RunReport {
    pub out_dir: PathBuf,
    pub summary: Value,
    pub outcome: Outcome,
}

impl RunReport {
    pub fn all_pass(&self) -> bool {
        self.outcome.all_pass()
    }

    pub fn exit_code(&self) -> i32 {
        if self.all_pass() {
            0
        } else {
            1
        }
    }
}

/// The reproducible part of a summary: `config`, `results` and `pass`.
pub fn payload(summary: &Value) -> Value {
    json!({
        "config": summary["config"],
        "results": summary["results"],
        "pass": summary["pass"],
    })
}

pub fn run(loaded: &LoadedConfig, opts: &RunOptions) -> Result<RunReport, RunError> {
    let start = Instant::now();
    let plan = validate(loaded)?;
    let exec = RayonExecutor::new(opts.threads)
        .map_err(|e| RunError::Config(ConfigError::new(format!("worker pool: {e}"))))?;
    let outcome = run_plan(&plan, &exec)?;
    let total = start.elapsed().as_secs_f64();

    let config = &plan.config;
    let out_dir = opts
        .out_dir
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| Path::new("results").join(config.experiment.name()));

    let mut results = outcome.results.clone();
    let checks: Map<String, Value> = outcome
        .checks
        .iter()
        .map(|c| (c.name.clone(), c.to_json()))
        .collect();
    results.insert("checks".into(), Value::Object(checks));
    let mut pass: Map<String, Value> = outcome
        .checks
        .iter()
        .map(|c| (c.name.clone(), json!(c.pass)))
        .collect();
    pass.insert("all".into(), json!(outcome.all_pass()));

    let mut config_json = serde_json::to_value(config).expect("config serializes");
    if let Some(obj) = config_json.as_object_mut() {
        obj.remove("output-dir");
    }
    let summary = json!({
        "config": config_json,
        "results": results,
        "pass": pass,
        "timings": {
            "total_seconds": total,
            "path_seconds": outcome.path_seconds,
            "analysis_seconds": total - outcome.path_seconds,
            "threads": exec.threads(),
        },
        "version": {
            "crate": env!("CARGO_PKG_VERSION"),
            "git": GIT_DESCRIBE,
        },
    });

    if !opts.dry {
        write_outputs(&out_dir, &summary, &outcome, opts.format)?;
    }
    Ok(RunReport {
        out_dir,
        summary,
        outcome,
    })
}

fn write_outputs(
    dir: &Path,
    summary: &Value,
    outcome: &Outcome,
    format: TableFormat,
) -> Result<(), RunError> {
    for table in &outcome.tables {
        match format {
            TableFormat::Csv => {
                write_file(&dir.join(format!("{}.csv", table.name)), table.to_csv())?
            }
            TableFormat::Json => write_file(
                &dir.join(format!("{}.json", table.name)),
                pretty(&table.to_json()),
            )?,
        }
    }
    for (name, value) in &outcome.sidecars {
        write_file(&dir.join(name), pretty(value))?;
    }
    for dump in &outcome.dumps {
        let path = dir.join(&dump.file);
        match dump.format {
            DumpFormat::Binary => write_trajectory_binary(&path, &dump.path)?,
            DumpFormat::Csv => write_trajectory_csv(&path, &dump.path)?,
            DumpFormat::None => {}
        }
    }
    write_file(&dir.join("summary.json"), pretty(summary))?;
    Ok(())
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}
