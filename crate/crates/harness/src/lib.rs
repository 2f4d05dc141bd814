//! Benchmark harness: configuration, datasets, test-time scaling
//! frameworks (multi-round thinking, best-of-N), metrics, results files and
//! the data export for the report renderer.

pub mod bench;
pub mod codec;
pub mod config;
pub mod dataset;
pub mod metrics;
pub mod persist;
pub mod prompt;
pub mod report_data;
pub mod tts;

pub use config::{BenchmarkConfig, Framework, Overrides};
pub use dataset::{ingest_dataset, Dataset, Problem};
pub use metrics::{compute_metrics, MetricsRow, TrajectoryRecord};
pub use persist::{persist_results, read_summary, read_traces, ResultsSummary};
pub use report_data::{build_report_data, ReportData};
pub use tts::{run_best_of_n, run_multi_round, run_problem, Decoder, ProblemRun, Workload};
