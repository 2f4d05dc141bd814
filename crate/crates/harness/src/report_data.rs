//! The JSON document consumed by the report renderer.
//!
//! Built from one or more results summaries. Sections map onto the report
//! outputs: `table` (per dataset × method, also the per-dataset speedups),
//! `turns` (per-turn speedup), `phases` (normalized phase shares) and
//! `matchlen` (mean accepted tokens by match length). `methods` is ordered
//! by mean overall speedup, best first.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use specbench_core::PhaseTimes;

use crate::metrics::{HistBin, MetricsRow, PhaseFractions};
use crate::persist::ResultsSummary;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub dataset: String,
    pub method: String,
    pub temperature: f64,
    pub mat: f64,
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TurnRow {
    pub dataset: String,
    pub method: String,
    pub temperature: f64,
    pub turn: usize,
    pub mat: f64,
    pub speedup: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseRow {
    pub method: String,
    pub temperature: f64,
    pub fractions: PhaseFractions,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchLenRow {
    pub method: String,
    pub temperature: f64,
    pub match_len: usize,
    pub steps: u64,
    pub mean_accepted: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportData {
    pub schema_version: u32,
    pub methods: Vec<String>,
    pub datasets: Vec<String>,
    pub temperatures: Vec<f64>,
    pub table: Vec<TableRow>,
    pub turns: Vec<TurnRow>,
    pub phases: Vec<PhaseRow>,
    pub matchlen: Vec<MatchLenRow>,
}

/// Merges summaries. When several contain the same (dataset, method, T,
/// turn) row, the first one wins.
pub fn build_report_data(summaries: &[ResultsSummary]) -> ReportData {
    let mut rows: BTreeMap<(String, String, u64, Option<usize>), &MetricsRow> = BTreeMap::new();
    for s in summaries {
        for r in &s.metrics {
            rows.entry((r.dataset.clone(), r.method.clone(), r.temperature.to_bits(), r.turn))
                .or_insert(r);
        }
    }

    let mut table = Vec::new();
    let mut turns = Vec::new();
    let mut phase_acc: BTreeMap<(String, u64), PhaseTimes> = BTreeMap::new();
    let mut hist_acc: BTreeMap<(String, u64, usize), HistBin> = BTreeMap::new();
    let mut speedups: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut datasets: Vec<String> = Vec::new();
    let mut temperatures: Vec<f64> = Vec::new();

    for r in rows.values() {
        match r.turn {
            None => {
                table.push(TableRow {
                    dataset: r.dataset.clone(),
                    method: r.method.clone(),
                    temperature: r.temperature,
                    mat: r.mat,
                    speedup: r.speedup,
                });
                let e = speedups.entry(r.method.clone()).or_default();
                e.0 += r.speedup;
                e.1 += 1;
                phase_acc
                    .entry((r.method.clone(), r.temperature.to_bits()))
                    .or_default()
                    .add(&r.phase_times_ns);
                for (&m, bin) in &r.accept_by_match_len {
                    let acc = hist_acc
                        .entry((r.method.clone(), r.temperature.to_bits(), m))
                        .or_default();
                    acc.steps += bin.steps;
                    acc.accepted += bin.accepted;
                }
                if !datasets.contains(&r.dataset) {
                    datasets.push(r.dataset.clone());
                }
                if !temperatures.contains(&r.temperature) {
                    temperatures.push(r.temperature);
                }
            }
            Some(turn) => turns.push(TurnRow {
                dataset: r.dataset.clone(),
                method: r.method.clone(),
                temperature: r.temperature,
                turn,
                mat: r.mat,
                speedup: r.speedup,
            }),
        }
    }

    let mut methods: Vec<(String, f64)> = speedups
        .into_iter()
        .map(|(m, (sum, n))| (m, sum / n as f64))
        .collect();
    methods.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    temperatures.sort_by(f64::total_cmp);

    ReportData {
        schema_version: REPORT_SCHEMA_VERSION,
        methods: methods.into_iter().map(|(m, _)| m).collect(),
        datasets,
        temperatures,
        table,
        turns,
        phases: phase_acc
            .into_iter()
            .map(|((method, t), times)| PhaseRow {
                method,
                temperature: f64::from_bits(t),
                fractions: PhaseFractions::from_times(&times),
            })
            .collect(),
        matchlen: hist_acc
            .into_iter()
            .map(|((method, t, match_len), bin)| MatchLenRow {
                method,
                temperature: f64::from_bits(t),
                match_len,
                steps: bin.steps,
                mean_accepted: bin.mean_accepted(),
            })
            .collect(),
    }
}
