//! Command-line runner for calibration studies.
//!
//! A study is described by a JSON file (see [`config::StudyConfig`]). Running
//! it writes one CSV per result table plus `manifest.json` into the output
//! directory. Exit codes: 0 on success, 2 for configuration errors, 3 when
//! the study itself fails.

pub mod config;
pub mod study;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::json;

pub use config::{load, parse, LoadedConfig, StudyConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("study failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Run(_) => 3,
        }
    }
}

impl From<calib_core::CalibError> for CliError {
    fn from(e: calib_core::CalibError) -> Self {
        CliError::Run(e.to_string())
    }
}

/// Problems found in a configuration without running it. Empty when valid.
pub fn validate(loaded: &LoadedConfig) -> Vec<String> {
    match study::prepare(&loaded.config) {
        Ok(_) => vec![],
        Err(d) => d,
    }
}

/// FNV-1a hash of the canonical JSON form of the configuration.
pub fn fingerprint(raw: &serde_json::Value) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in raw.to_string().bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    format!("{h:016x}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub output_dir: PathBuf,
    /// File name and data row count, in write order.
    pub files: Vec<(String, usize)>,
}

/// Run a loaded study on `workers` threads (rayon's default when `None`)
/// and write its outputs into `out` or the configured output directory.
pub fn run(loaded: &LoadedConfig, workers: Option<usize>, out: Option<&Path>) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let prepared = study::prepare(&loaded.config).map_err(|d| CliError::Config(d.join("; ")))?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| loaded.config.output_dir.clone())
        .ok_or_else(|| CliError::Config("no output directory: set `output_dir` or pass --out".into()))?;
    if workers == Some(0) {
        return Err(CliError::Config("worker count must be at least 1".into()));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::Run(format!("cannot start worker pool: {e}")))?;
    let fp = fingerprint(&loaded.raw);
    let outputs = pool.install(|| prepared.run(Some(fp.clone())))?;

    fs::create_dir_all(&dir).map_err(|e| CliError::Run(format!("cannot create {}: {e}", dir.display())))?;
    let mut files = Vec::with_capacity(outputs.len());
    for (name, table) in &outputs {
        write_atomic(&dir.join(name), table.to_csv_string().as_bytes())?;
        files.push((name.clone(), table.len()));
    }
    let manifest = json!({
        "version": env!("CARGO_PKG_VERSION"),
        "study": loaded.raw["study"],
        "seed": loaded.config.seed,
        "fingerprint": fp,
        "workers": pool.current_num_threads(),
        "wall_time_seconds": start.elapsed().as_secs_f64(),
        "files": files.iter().map(|(n, r)| json!({ "name": n, "rows": r })).collect::<Vec<_>>(),
        "config": loaded.raw,
    });
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    write_atomic(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(RunReport { output_dir: dir, files })
}

/// Write through a temporary file in the same directory and rename it into
/// place, so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("output");
    let tmp = path.with_file_name(format!(".{name}.tmp"));
    let io = |e: std::io::Error| CliError::Run(format!("cannot write {}: {e}", path.display()));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}
