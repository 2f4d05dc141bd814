//! Results files.
//!
//! A results directory holds:
//! - `summary.json`: a [`ResultsSummary`] (metrics plus run description);
//! - `traces.jsonl`: one [`TraceLine`] per trajectory.
//!
//! Both carry `schema_version`; readers reject other versions.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::BenchmarkConfig;
use crate::metrics::{MetricsRow, TrajectoryRecord};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;
pub const SUMMARY_FILE: &str = "summary.json";
pub const TRACES_FILE: &str = "traces.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum ResultsError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Json {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultsSummary {
    pub schema_version: u32,
    pub name: Option<String>,
    /// Method labels present in `metrics`.
    pub methods: Vec<String>,
    pub problems: usize,
    pub metrics: Vec<MetricsRow>,
    pub warnings: Vec<String>,
    /// Effective configuration of the run, when produced from one.
    pub config: Option<BenchmarkConfig>,
}

impl ResultsSummary {
    pub fn new(
        name: Option<String>,
        problems: usize,
        metrics: Vec<MetricsRow>,
        warnings: Vec<String>,
        config: Option<BenchmarkConfig>,
    ) -> Self {
        let mut methods: Vec<String> = metrics.iter().map(|r| r.method.clone()).collect();
        methods.sort();
        methods.dedup();
        Self {
            schema_version: RESULTS_SCHEMA_VERSION,
            name,
            methods,
            problems,
            metrics,
            warnings,
            config,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub schema_version: u32,
    #[serde(flatten)]
    pub record: TrajectoryRecord,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ResultsError + '_ {
    move |source| ResultsError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn check_version(path: &Path, found: u32) -> Result<(), ResultsError> {
    if found != RESULTS_SCHEMA_VERSION {
        return Err(ResultsError::SchemaVersionMismatch {
            path: path.to_path_buf(),
            found,
            expected: RESULTS_SCHEMA_VERSION,
        });
    }
    Ok(())
}

/// Writes `summary.json` and `traces.jsonl` into `dir`, creating it.
pub fn persist_results(
    dir: &Path,
    summary: &ResultsSummary,
    records: &[TrajectoryRecord],
) -> Result<(), ResultsError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let spath = dir.join(SUMMARY_FILE);
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(&spath, text + "\n").map_err(io_err(&spath))?;

    let tpath = dir.join(TRACES_FILE);
    let file = File::create(&tpath).map_err(io_err(&tpath))?;
    let mut out = BufWriter::new(file);
    for r in records {
        let line = TraceLine {
            schema_version: RESULTS_SCHEMA_VERSION,
            record: r.clone(),
        };
        serde_json::to_writer(&mut out, &line).expect("trace serializes");
        out.write_all(b"\n").map_err(io_err(&tpath))?;
    }
    out.flush().map_err(io_err(&tpath))?;
    Ok(())
}

/// Reads a summary from a results directory or a summary file path.
pub fn read_summary(path: &Path) -> Result<ResultsSummary, ResultsError> {
    let path = if path.is_dir() {
        path.join(SUMMARY_FILE)
    } else {
        path.to_path_buf()
    };
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let json_err = |e: serde_json::Error| ResultsError::Json {
        path: path.clone(),
        line: e.line(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(json_err)?;
    let found = value
        .get("schema_version")
        .and_then(|v| v.as_u64())
        .unwrap_or(0) as u32;
    check_version(&path, found)?;
    serde_json::from_value(value).map_err(json_err)
}

pub fn read_traces(dir: &Path) -> Result<Vec<TrajectoryRecord>, ResultsError> {
    let path = dir.join(TRACES_FILE);
    let file = File::open(&path).map_err(io_err(&path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: TraceLine = serde_json::from_str(&line).map_err(|e| ResultsError::Json {
            path: path.clone(),
            line: i + 1,
            message: e.to_string(),
        })?;
        check_version(&path, parsed.schema_version)?;
        out.push(parsed.record);
    }
    Ok(out)
}
