//! Front end for the `voljump` laboratory: reads an experiment file, runs
//! one task and leaves CSVs, a manifest and plot scripts in an output
//! directory.

pub mod config;
pub mod output;
pub mod plots;
pub mod tasks;

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

pub use config::{ConfigError, ConfigErrors, ExperimentConfig, Task};
pub use plots::emit_plots;

pub const DEFAULT_OUT_DIR: &str = "voljump-out";

/// Where a run put its artifacts.
#[derive(Debug, Clone)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub config_sha256: String,
    pub facts: Vec<(String, String)>,
}

/// Runs `task` on the configuration at `config_path`.
pub fn run(task: Task, config_path: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<RunSummary> {
    let text = fs::read_to_string(config_path)
        .with_context(|| format!("cannot read config {}", config_path.display()))?;
    let cfg = ExperimentConfig::from_text(&text, task, seed)?;
    let out_dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.out_dir.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR));
    fs::create_dir_all(&out_dir).with_context(|| format!("cannot create {}", out_dir.display()))?;
    let digest = output::sha256_hex(cfg.canonical.as_bytes());
    let result = tasks::execute(&cfg, &digest)?;
    let mut files = Vec::new();
    for (name, table) in &result.tables {
        table.write(&out_dir.join(name))?;
        files.push(name.clone());
    }
    fs::write(out_dir.join(output::CONFIG_COPY), &cfg.canonical)?;
    output::Manifest {
        task: task.name().to_string(),
        config_sha256: digest.clone(),
        seed: cfg.sim.as_ref().map(|s| s.master_seed),
        files: files.clone(),
        facts: result.facts.clone(),
    }
    .write(&out_dir)?;
    // not every task has a plottable artifact
    let _ = emit_plots(&out_dir);
    Ok(RunSummary {
        out_dir,
        files,
        config_sha256: digest,
        facts: result.facts,
    })
}

/// Builds the global worker pool from `VOLJUMP_THREADS`, if set. Results
/// never depend on the worker count.
pub fn init_threads() -> Result<()> {
    let Ok(value) = std::env::var("VOLJUMP_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| ConfigError::new("env.VOLJUMP_THREADS", format!("expected a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .context("cannot build the worker pool")?;
    Ok(())
}

/// One-line, machine-readable description of a failure:
/// `error kind=<kind> module=<module> field=<path> message="<text>"`.
pub fn describe_error(err: &anyhow::Error) -> (String, i32) {
    let quote = |s: &str| s.replace('\\', "\\\\").replace('"', "\\\"");
    if let Some(errs) = err.downcast_ref::<ConfigErrors>() {
        let fields: Vec<&str> = errs.0.iter().map(|e| e.field.as_str()).collect();
        return (
            format!(
                "error kind=config module=cli field={} message=\"{}\"",
                fields.join(","),
                quote(&errs.to_string())
            ),
            2,
        );
    }
    if let Some(e) = err.downcast_ref::<ConfigError>() {
        return (
            format!(
                "error kind=config module=cli field={} message=\"{}\"",
                e.field,
                quote(&e.to_string())
            ),
            2,
        );
    }
    if let Some(e) = err.downcast_ref::<voljump_core::Error>() {
        let field = match e {
            voljump_core::Error::InvalidParams(v) => v.iter().map(|v| v.field.as_str()).collect::<Vec<_>>().join(","),
            _ => "-".into(),
        };
        return (
            format!(
                "error kind=numerical module={} field={field} message=\"{}\"",
                e.module(),
                quote(&e.to_string())
            ),
            3,
        );
    }
    (
        format!("error kind=io module=cli field=- message=\"{}\"", quote(&format!("{err:#}"))),
        1,
    )
}
