//! `specbench` command-line entry point.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use specbench::bench::{run_baseline, run_paired, BenchOutcome};
use specbench::config::{BenchmarkConfig, Overrides};
use specbench::dataset::{ingest_dataset, Dataset};
use specbench::persist::{persist_results, read_summary, ResultsSummary};
use specbench::report_data::build_report_data;
use specbench::tts::Workload;
use specbench_core::Method;

#[derive(Parser)]
#[command(name = "specbench", version, about = "Speculative decoding benchmark on synthetic oracles")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a method and its paired AR baseline, write results.
    Run(RunArgs),
    /// Run the AR baseline only, write results.
    Baseline(RunArgs),
    /// Merge results into the report input JSON.
    ReportData {
        /// Results directories or summary.json files.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Output file (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a config (schema, capability matrix, dataset, datastore).
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Benchmark config (TOML).
    config: PathBuf,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    temperature: Option<f64>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long = "bon-n")]
    bon_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Results directory (overrides `[output] dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

impl RunArgs {
    fn load(&self) -> Result<BenchmarkConfig> {
        let mut cfg = BenchmarkConfig::load(&self.config)
            .with_context(|| format!("loading {}", self.config.display()))?;
        cfg.apply(&Overrides {
            method: self.method,
            temperature: self.temperature,
            rounds: self.rounds,
            bon_n: self.bon_n,
            seed: self.seed,
            out: self.out.clone(),
        });
        cfg.validate()
            .with_context(|| format!("validating {}", self.config.display()))?;
        Ok(cfg)
    }
}

fn load_dataset(cfg: &BenchmarkConfig) -> Result<Dataset> {
    let ds = ingest_dataset(&cfg.dataset.path, cfg.oracle.vocab_size())
        .with_context(|| format!("reading dataset {}", cfg.dataset.path.display()))?;
    for w in &ds.warnings {
        eprintln!("warning: {}: {w}", cfg.dataset.path.display());
    }
    Ok(ds)
}

fn write_outcome(cfg: &BenchmarkConfig, ds: &Dataset, outcome: BenchOutcome) -> Result<()> {
    let summary = ResultsSummary::new(
        cfg.name.clone(),
        ds.problems.len(),
        outcome.metrics,
        ds.warnings.clone(),
        Some(cfg.clone()),
    );
    persist_results(&cfg.output.dir, &summary, &outcome.records)?;
    println!(
        "{:<12} {:<10} {:>5} {:>6} {:>8} {:>8}",
        "dataset", "method", "T", "turn", "MAT", "speedup"
    );
    for r in &summary.metrics {
        let turn = r.turn.map_or("all".to_string(), |t| t.to_string());
        println!(
            "{:<12} {:<10} {:>5.2} {:>6} {:>8.2} {:>7.2}x",
            r.dataset, r.method, r.temperature, turn, r.mat, r.speedup
        );
    }
    println!("results written to {}", cfg.output.dir.display());
    Ok(())
}

fn run(args: &RunArgs, baseline_only: bool) -> Result<()> {
    let cfg = args.load()?;
    let ds = load_dataset(&cfg)?;
    let w = Workload::from_config(&cfg)?;
    let reps = cfg.baseline.repetitions;
    let outcome = if baseline_only {
        run_baseline(&w, &ds.problems, reps)?
    } else {
        run_paired(&w, &cfg.method, &ds.problems, reps)?
    };
    write_outcome(&cfg, &ds, outcome)
}

fn validate(args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    let ds = load_dataset(&cfg)?;
    Workload::from_config(&cfg)?;
    let caps = cfg.method.capabilities();
    println!(
        "ok: method {} ({:?}, reuse {}, greedy {}, sampling {}), T = {}, {} problems",
        cfg.method.method(),
        caps.speculation,
        caps.reuse,
        caps.supports_greedy,
        caps.supports_sampling,
        cfg.policy.temperature,
        ds.problems.len()
    );
    Ok(())
}

fn report_data(results: &[PathBuf], out: Option<&Path>) -> Result<()> {
    let summaries = results
        .iter()
        .map(|p| read_summary(p).with_context(|| format!("reading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let data = build_report_data(&summaries);
    let text = serde_json::to_string_pretty(&data)? + "\n";
    match out {
        Some(path) => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => run(args, false),
        Command::Baseline(args) => run(args, true),
        Command::ReportData { results, out } => report_data(results, out.as_deref()),
        Command::Validate(args) => validate(args),
    }
}
