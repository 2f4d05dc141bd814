//! Paired benchmark runs: the method and the AR baseline over the same
//! problems, repeated, keeping the median-wall repetition of every
//! trajectory.

use specbench_core::{MethodSpec, TrajectoryResult};

use crate::dataset::Problem;
use crate::metrics::{compute_metrics, records_from_runs, MetricsError, MetricsRow, TrajectoryRecord};
use crate::tts::{run_dataset, Decoder, ProblemRun, TtsError, Workload};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Tts(#[from] TtsError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("repetitions must be >= 1")]
    NoRepetitions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchOutcome {
    pub records: Vec<TrajectoryRecord>,
    pub metrics: Vec<MetricsRow>,
}

/// Picks, for every trajectory, the repetition with the median wall time.
/// Repetitions decode identical tokens, so only timings differ.
fn median_runs(mut reps: Vec<Vec<ProblemRun>>) -> Vec<ProblemRun> {
    let mut base = reps.swap_remove(0);
    if reps.is_empty() {
        return base;
    }
    for (pi, run) in base.iter_mut().enumerate() {
        for (ti, traj) in run.trajectories.iter_mut().enumerate() {
            let mut candidates: Vec<&TrajectoryResult> = reps.iter().map(|r| &r[pi].trajectories[ti]).collect();
            candidates.push(traj);
            candidates.sort_by_key(|t| t.wall_time_ns);
            let median = candidates[candidates.len() / 2].clone();
            debug_assert_eq!(median.tokens, traj.tokens);
            *traj = median;
        }
    }
    base
}

fn repeat(
    w: &Workload,
    decoder: &Decoder,
    problems: &[Problem],
    repetitions: usize,
) -> Result<Vec<ProblemRun>, BenchError> {
    if repetitions == 0 {
        return Err(BenchError::NoRepetitions);
    }
    let reps = (0..repetitions)
        .map(|_| run_dataset(w, decoder, problems))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(median_runs(reps))
}

/// Runs `method` and the AR baseline `repetitions` times each
/// (interleaved) and computes metrics.
pub fn run_paired(
    w: &Workload,
    method: &MethodSpec,
    problems: &[Problem],
    repetitions: usize,
) -> Result<BenchOutcome, BenchError> {
    if repetitions == 0 {
        return Err(BenchError::NoRepetitions);
    }
    let ar = Decoder::Autoregressive;
    let spec = Decoder::Speculative(method.clone());
    let mut ar_reps = Vec::with_capacity(repetitions);
    let mut spec_reps = Vec::with_capacity(repetitions);
    for _ in 0..repetitions {
        ar_reps.push(run_dataset(w, &ar, problems)?);
        spec_reps.push(run_dataset(w, &spec, problems)?);
    }
    let t = w.policy.temperature;
    let mut records = records_from_runs(&median_runs(ar_reps), t);
    records.extend(records_from_runs(&median_runs(spec_reps), t));
    let metrics = compute_metrics(&records)?;
    Ok(BenchOutcome { records, metrics })
}

/// AR baseline only.
pub fn run_baseline(
    w: &Workload,
    problems: &[Problem],
    repetitions: usize,
) -> Result<BenchOutcome, BenchError> {
    let runs = repeat(w, &Decoder::Autoregressive, problems, repetitions)?;
    let records = records_from_runs(&runs, w.policy.temperature);
    let metrics = compute_metrics(&records)?;
    Ok(BenchOutcome { records, metrics })
}
