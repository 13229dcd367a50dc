//! Declarative experiment runner: one JSON config per experiment, outputs
//! `<experiment>-<seed>.csv`, `<experiment>-<seed>.json` and a manifest from
//! which both can be regenerated byte for byte.

pub mod config;
pub mod error;
pub mod experiments;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use cluster_tails_core::heavytail::OracleSettings;
use cluster_tails_core::report::write_text;
use cluster_tails_core::Workers;

pub use config::{Experiment, ExperimentConfig, Functional};
pub use error::{CliError, CliResult, ErrorKind};

/// Environment variable overriding the oracle cache directory.
pub const CACHE_ENV: &str = "CLUSTER_TAILS_CACHE";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: Option<usize>,
    pub output_dir: Option<PathBuf>,
    /// Takes precedence over the environment variable.
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub manifest: PathBuf,
}

#[derive(Debug, Clone, Serialize)]
struct OutputRecord {
    file: String,
    sha256: String,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Parse a config file, or the config embedded in a manifest.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let (cfg, bytes) = ExperimentConfig::load(path)?;
    let _ = bytes;
    Ok(cfg)
}

fn load_any(path: &Path) -> CliResult<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config("<config>", format!("{}: {e}", path.display())))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| CliError::config("<config>", e.to_string()))?;
    if value.get("manifest_version").is_some() {
        let embedded = value
            .get("config")
            .ok_or_else(|| CliError::config("config", "manifest has no embedded config"))?;
        return ExperimentConfig::from_json(&embedded.to_string()).map_err(|e| CliError {
            field: e.field.map(|f| format!("config.{f}")),
            ..e
        });
    }
    load_config(path)
}

/// Canonical serialisation used for the config hash.
fn canonical(cfg: &ExperimentConfig) -> String {
    serde_json::to_string(cfg).expect("config serializes")
}

pub fn oracle_settings(
    cfg: &ExperimentConfig,
    output_dir: &Path,
    opts: &RunOptions,
) -> OracleSettings {
    let dir = opts
        .cache_dir
        .clone()
        .or_else(|| std::env::var_os(CACHE_ENV).map(PathBuf::from))
        .unwrap_or_else(|| output_dir.join("oracle-cache"));
    let mut s = OracleSettings::cached(dir);
    if let Some(n) = cfg.oracle_sample_size {
        s.sample_size = n;
    }
    s
}

/// Run the experiment described by `path` (a config or a manifest).
pub fn run_file(path: &Path, opts: &RunOptions) -> CliResult<RunOutcome> {
    let cfg = load_any(path)?;
    run_config(&cfg, opts)
}

pub fn run_config(cfg: &ExperimentConfig, opts: &RunOptions) -> CliResult<RunOutcome> {
    let started = Instant::now();
    cfg.validate()?;
    let workers_n = opts.workers.unwrap_or(cfg.workers);
    let workers = Workers::new(workers_n).map_err(|e| CliError::from_core(e, ""))?;
    let output_dir = opts
        .output_dir
        .clone()
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    let oracle = oracle_settings(cfg, &output_dir, opts);
    let artifacts = experiments::execute(cfg, &workers, &oracle)?;

    let stem = format!("{}-{}", cfg.experiment.name(), cfg.seed);
    let csv_path = output_dir.join(format!("{stem}.csv"));
    let json_path = output_dir.join(format!("{stem}.json"));
    let manifest_path = output_dir.join(format!("{stem}.manifest.json"));
    let json_text = format!(
        "{}\n",
        serde_json::to_string_pretty(&artifacts.json).expect("json")
    );
    write_text(&csv_path, &artifacts.csv)?;
    write_text(&json_path, &json_text)?;

    let canonical = canonical(cfg);
    let manifest = json!({
        "manifest_version": MANIFEST_VERSION,
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
        "config_sha256": sha256_hex(canonical.as_bytes()),
        "config": serde_json::from_str::<Value>(&canonical).expect("json"),
        "workers": workers_n,
        "versions": {
            "cluster-tails": env!("CARGO_PKG_VERSION"),
            "cluster-tails-core": cluster_tails_core::VERSION,
        },
        "oracle": {
            "cache_dir": oracle.cache_dir,
            "sample_size": oracle.sample_size,
            "seed": oracle.seed,
        },
        "outputs": [
            OutputRecord { file: file_name(&csv_path), sha256: sha256_hex(artifacts.csv.as_bytes()) },
            OutputRecord { file: file_name(&json_path), sha256: sha256_hex(json_text.as_bytes()) },
        ],
        "wall_time_seconds": started.elapsed().as_secs_f64(),
    });
    write_text(
        &manifest_path,
        &format!(
            "{}\n",
            serde_json::to_string_pretty(&manifest).expect("json")
        ),
    )?;
    Ok(RunOutcome {
        csv: csv_path,
        json: json_path,
        manifest: manifest_path,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name()
        .map(|f| f.to_string_lossy().into_owned())
        .unwrap_or_default()
}

/// Validate without simulating and echo the derived constants.
pub fn validate_file(path: &Path) -> CliResult<Value> {
    let cfg = load_any(path)?;
    cfg.validate()?;
    let mut report = json!({
        "valid": true,
        "experiment": cfg.experiment.name(),
        "seed": cfg.seed,
    });
    if let Some(model) = &cfg.model {
        let c = model
            .constants()
            .map_err(|e| CliError::from_core(e, "model"))?;
        report["regime"] = json!(model.regime());
        report["model_constants"] = json!(c);
        report["mean_cluster_size"] = json!(c.mean_cluster_size());
    }
    if let Some(d) = &cfg.discrete {
        let m = d.build()?;
        report["discrete"] = json!({
            "mean_mark": m.mean_mark(),
            "mean_count_or_kappa": m.mean_count_or_kappa(),
        });
    }
    Ok(report)
}
