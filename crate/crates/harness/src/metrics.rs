//! Aggregation of trajectory traces into per-(dataset, method, T, turn)
//! metrics.
//!
//! - MAT = Σ accepted_count / number of steps.
//! - speedup = AR wall time / method wall time over the same problems,
//!   temperature and turn. AR rows report exactly 1.
//! - phase fractions come from post-warmup phase totals.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use specbench_core::{PhaseTimes, TrajectoryResult};

use crate::tts::{ProblemRun, AR_LABEL};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("no AR baseline for dataset {dataset:?}, temperature {temperature}, turn {turn:?}")]
    MissingBaseline {
        dataset: String,
        temperature: f64,
        turn: Option<usize>,
    },
}

/// One trajectory with the labels metrics are grouped by.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub problem_id: String,
    /// Dataset source tag of the problem.
    pub dataset: String,
    pub method: String,
    pub temperature: f64,
    pub trajectory: TrajectoryResult,
}

/// Flattens problem runs into records.
pub fn records_from_runs(runs: &[ProblemRun], temperature: f64) -> Vec<TrajectoryRecord> {
    runs.iter()
        .flat_map(|r| {
            r.trajectories.iter().map(move |t| TrajectoryRecord {
                problem_id: r.problem_id.clone(),
                dataset: r.source.clone(),
                method: r.method.clone(),
                temperature,
                trajectory: t.clone(),
            })
        })
        .collect()
}

/// Steps that started with a given match length.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistBin {
    pub steps: u64,
    pub accepted: u64,
}

impl HistBin {
    pub fn mean_accepted(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.accepted as f64 / self.steps as f64
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseFractions {
    pub draft: f64,
    pub decode: f64,
    pub verify: f64,
    pub update: f64,
}

impl PhaseFractions {
    pub fn from_times(t: &PhaseTimes) -> Self {
        let [draft, decode, verify, update] = t.fractions();
        Self {
            draft,
            decode,
            verify,
            update,
        }
    }

    pub fn sum(&self) -> f64 {
        self.draft + self.decode + self.verify + self.update
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub dataset: String,
    pub method: String,
    pub temperature: f64,
    /// `None` aggregates every turn.
    pub turn: Option<usize>,
    pub trajectories: usize,
    pub steps: u64,
    pub emitted: u64,
    pub mat: f64,
    pub speedup: f64,
    pub wall_time_ns: u64,
    pub baseline_wall_time_ns: u64,
    /// Post-warmup phase totals.
    pub phase_times_ns: PhaseTimes,
    pub phase_fractions: PhaseFractions,
    /// Keyed by the match length reported with each step's draft.
    pub accept_by_match_len: BTreeMap<usize, HistBin>,
}

#[derive(Default)]
struct Acc {
    trajectories: usize,
    steps: u64,
    emitted: u64,
    wall: u64,
    phases: PhaseTimes,
    hist: BTreeMap<usize, HistBin>,
}

impl Acc {
    fn add(&mut self, t: &TrajectoryResult) {
        self.trajectories += 1;
        self.steps += t.steps.len() as u64;
        self.emitted += t.accepted_total() as u64;
        self.wall += t.wall_time_ns;
        self.phases.add(&t.steady_phase_times());
        for s in &t.steps {
            let bin = self.hist.entry(s.match_len).or_default();
            bin.steps += 1;
            bin.accepted += s.accepted_count as u64;
        }
    }
}

type Key = (String, String, u64, Option<usize>);

/// Groups records and pairs every group with its AR baseline.
pub fn compute_metrics(records: &[TrajectoryRecord]) -> Result<Vec<MetricsRow>, MetricsError> {
    let mut groups: BTreeMap<Key, Acc> = BTreeMap::new();
    for r in records {
        let t = r.temperature.to_bits();
        for turn in [None, Some(r.trajectory.turn_index)] {
            groups
                .entry((r.dataset.clone(), r.method.clone(), t, turn))
                .or_default()
                .add(&r.trajectory);
        }
    }
    let mut rows = Vec::with_capacity(groups.len());
    for ((dataset, method, tbits, turn), acc) in &groups {
        let temperature = f64::from_bits(*tbits);
        let is_ar = method == AR_LABEL;
        let baseline_wall = if is_ar {
            acc.wall
        } else {
            groups
                .get(&(dataset.clone(), AR_LABEL.to_string(), *tbits, *turn))
                .map(|b| b.wall)
                .ok_or_else(|| MetricsError::MissingBaseline {
                    dataset: dataset.clone(),
                    temperature,
                    turn: *turn,
                })?
        };
        let speedup = if is_ar {
            1.0
        } else {
            baseline_wall as f64 / acc.wall.max(1) as f64
        };
        let mat = if acc.steps == 0 {
            0.0
        } else {
            acc.emitted as f64 / acc.steps as f64
        };
        rows.push(MetricsRow {
            dataset: dataset.clone(),
            method: method.clone(),
            temperature,
            turn: *turn,
            trajectories: acc.trajectories,
            steps: acc.steps,
            emitted: acc.emitted,
            mat,
            speedup,
            wall_time_ns: acc.wall,
            baseline_wall_time_ns: baseline_wall,
            phase_times_ns: acc.phases,
            phase_fractions: PhaseFractions::from_times(&acc.phases),
            accept_by_match_len: acc.hist.clone(),
        });
    }
    Ok(rows)
}
