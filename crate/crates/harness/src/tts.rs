//! Test-time scaling orchestration: single runs, multi-round thinking and
//! best-of-N sampling over one problem.
//!
//! Every trajectory gets its own rng stream derived from the policy seed,
//! the problem id, the trajectory index and the turn, so results do not
//! depend on scheduling. A multi-round run keeps one drafter across its
//! turns; every best-of-N trajectory gets a fresh drafter.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use specbench_core::drafters::BuildError;
use specbench_core::index::{CorpusDatastore, DatastoreError};
use specbench_core::oracle::OracleSpecError;
use specbench_core::rng::hash_seq;
use specbench_core::{
    build_drafter, run_autoregressive, run_trajectory, DecodePolicy, DecodeRng, Drafter,
    DrafterResources, EngineError, EngineOptions, MethodSpec, SharedOracle, StopCondition, Token,
    TrajectoryResult,
};

use crate::config::{BenchmarkConfig, DraftOracleConfig, Framework, ScorerKind};
use crate::dataset::Problem;
use crate::prompt::{AnswerExtractor, PromptError, PromptTemplate};

pub const AR_LABEL: &str = "ar";

const STREAM_SALT: u64 = 0x7475_726e_5eed_0003;

#[derive(Debug, thiserror::Error)]
pub enum TtsError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("problem {0:?}: best-of-n needs at least one trajectory")]
    EmptyBon(String),
}

#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error(transparent)]
    Oracle(#[from] OracleSpecError),
    #[error("datastore {path}: {source}")]
    Datastore {
        path: String,
        source: DatastoreError,
    },
}

/// How trajectories are decoded.
#[derive(Clone, Debug, PartialEq)]
pub enum Decoder {
    Speculative(MethodSpec),
    Autoregressive,
}

impl Decoder {
    /// Method label used in results (`"ar"` for the baseline).
    pub fn label(&self) -> String {
        match self {
            Self::Speculative(spec) => spec.method().id().to_string(),
            Self::Autoregressive => AR_LABEL.to_string(),
        }
    }
}

/// Everything needed to decode problems, independent of the method.
#[derive(Clone, Debug)]
pub struct Workload {
    pub oracle: SharedOracle,
    pub resources: DrafterResources,
    pub policy: DecodePolicy,
    pub stop: StopCondition,
    pub engine: EngineOptions,
    pub template: PromptTemplate,
    pub extractor: AnswerExtractor,
    pub framework: Framework,
    pub parallel: bool,
}

impl Workload {
    /// Builds oracles and loads the datastore named by `cfg`. The draft
    /// model defaults to a perturbed copy of the target when the method
    /// needs one and none is configured.
    pub fn from_config(cfg: &BenchmarkConfig) -> Result<Self, WorkloadError> {
        let max_ctx = cfg.engine.max_context;
        let oracle = cfg.oracle.build(max_ctx)?;
        let draft_oracle = match (&cfg.draft_oracle, cfg.method.needs_draft_model()) {
            (Some(d), _) => Some(d.build(&cfg.oracle, max_ctx)?),
            (None, true) => Some(DraftOracleConfig::default().build(&cfg.oracle, max_ctx)?),
            (None, false) => None,
        };
        let datastore = match &cfg.datastore {
            Some(ds) => Some(Arc::new(load_datastore(&ds.path)?)),
            None => None,
        };
        Ok(Self {
            oracle,
            resources: DrafterResources {
                draft_oracle,
                datastore,
            },
            policy: cfg.policy,
            stop: cfg.stop_condition(),
            engine: cfg.engine_options(),
            template: cfg.template(),
            extractor: cfg.extractor(),
            framework: cfg.framework,
            parallel: cfg.engine.parallel,
        })
    }
}

fn load_datastore(path: &Path) -> Result<CorpusDatastore, WorkloadError> {
    CorpusDatastore::load(path).map_err(|source| WorkloadError::Datastore {
        path: path.display().to_string(),
        source,
    })
}

/// All trajectories decoded for one problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemRun {
    pub problem_id: String,
    pub source: String,
    pub method: String,
    pub trajectories: Vec<TrajectoryResult>,
    /// Extracted answer of each trajectory, same order.
    pub answers: Vec<Vec<Token>>,
    /// Index of the trajectory whose answer is final.
    pub selected: usize,
}

impl ProblemRun {
    pub fn final_answer(&self) -> &[Token] {
        &self.answers[self.selected]
    }
}

/// Rng stream of one trajectory.
pub fn trajectory_stream(problem_id: &str, trajectory: usize, turn: usize) -> u64 {
    let bytes = problem_id.bytes().map(u64::from);
    let items = std::iter::once(problem_id.len() as u64)
        .chain(bytes)
        .chain([trajectory as u64, turn as u64]);
    hash_seq(STREAM_SALT, items)
}

fn decode_one(
    w: &Workload,
    drafter: Option<&mut Box<dyn Drafter>>,
    prompt: &[Token],
    rng: &mut DecodeRng,
) -> Result<TrajectoryResult, EngineError> {
    match drafter {
        Some(d) => run_trajectory(&*w.oracle, &mut **d, &w.policy, prompt, &w.stop, &w.engine, rng),
        None => run_autoregressive(&*w.oracle, &w.policy, prompt, &w.stop, &w.engine, rng),
    }
}

fn new_drafter(w: &Workload, decoder: &Decoder) -> Result<Option<Box<dyn Drafter>>, BuildError> {
    match decoder {
        Decoder::Speculative(spec) => build_drafter(spec, &w.resources).map(Some),
        Decoder::Autoregressive => Ok(None),
    }
}

/// `rounds` chained trajectories; round `r >= 2` sees only the answer
/// extracted from round `r - 1`. Turns are numbered from 1.
pub fn run_multi_round(
    w: &Workload,
    decoder: &Decoder,
    problem: &Problem,
    rounds: usize,
) -> Result<ProblemRun, TtsError> {
    let mut drafter = new_drafter(w, decoder)?;
    let mut trajectories = Vec::with_capacity(rounds);
    let mut answers: Vec<Vec<Token>> = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        let prompt = w
            .template
            .round_tokens(&problem.prompt, answers.last().map(Vec::as_slice), round)?;
        let mut rng = DecodeRng::with_stream(w.policy.seed, trajectory_stream(&problem.id, 0, round));
        let mut res = decode_one(w, drafter.as_mut(), &prompt, &mut rng)?;
        res.turn_index = round;
        res.trajectory_index = 0;
        answers.push(w.extractor.extract(&res.tokens));
        trajectories.push(res);
    }
    Ok(ProblemRun {
        problem_id: problem.id.clone(),
        source: problem.source.clone(),
        method: decoder.label(),
        selected: answers.len().saturating_sub(1),
        trajectories,
        answers,
    })
}

/// Scores candidate answers and picks one.
pub trait AnswerScorer {
    /// Index of the selected answer; `None` only for an empty slice.
    fn select(&self, answers: &[Vec<Token>]) -> Option<usize>;
}

/// Most frequent answer; ties go to the lexicographically smallest one, so
/// the choice depends only on the multiset of answers. Returns the first
/// trajectory carrying the winning answer.
#[derive(Clone, Copy, Debug, Default)]
pub struct MajorityVote;

impl AnswerScorer for MajorityVote {
    fn select(&self, answers: &[Vec<Token>]) -> Option<usize> {
        let mut counts: BTreeMap<&[Token], usize> = BTreeMap::new();
        for a in answers {
            *counts.entry(a.as_slice()).or_default() += 1;
        }
        // BTreeMap iterates smallest answer first; max_by_key keeps the last
        // maximum, so iterate in reverse to keep the smallest on ties.
        let (winner, _) = counts.iter().rev().max_by_key(|&(_, &c)| c)?;
        answers.iter().position(|a| a.as_slice() == *winner)
    }
}

fn scorer(kind: ScorerKind) -> Box<dyn AnswerScorer + Sync> {
    match kind {
        ScorerKind::Majority => Box::new(MajorityVote),
    }
}

/// `n` independent trajectories of the round-1 prompt, then scorer selection.
pub fn run_best_of_n(
    w: &Workload,
    decoder: &Decoder,
    problem: &Problem,
    n: usize,
    scorer_kind: ScorerKind,
) -> Result<ProblemRun, TtsError> {
    let prompt = w.template.round_tokens(&problem.prompt, None, 1)?;
    let one = |i: usize| -> Result<TrajectoryResult, TtsError> {
        let mut drafter = new_drafter(w, decoder)?;
        let mut rng = DecodeRng::with_stream(w.policy.seed, trajectory_stream(&problem.id, i, 1));
        let mut res = decode_one(w, drafter.as_mut(), &prompt, &mut rng)?;
        res.turn_index = 1;
        res.trajectory_index = i;
        Ok(res)
    };
    let trajectories: Vec<TrajectoryResult> = if w.parallel {
        (0..n).into_par_iter().map(one).collect::<Result<_, _>>()?
    } else {
        (0..n).map(one).collect::<Result<_, _>>()?
    };
    let answers: Vec<Vec<Token>> = trajectories
        .iter()
        .map(|t| w.extractor.extract(&t.tokens))
        .collect();
    let selected = scorer(scorer_kind)
        .select(&answers)
        .ok_or_else(|| TtsError::EmptyBon(problem.id.clone()))?;
    Ok(ProblemRun {
        problem_id: problem.id.clone(),
        source: problem.source.clone(),
        method: decoder.label(),
        trajectories,
        answers,
        selected,
    })
}

/// Runs `problem` under the workload's framework.
pub fn run_problem(w: &Workload, decoder: &Decoder, problem: &Problem) -> Result<ProblemRun, TtsError> {
    match w.framework {
        Framework::Single => run_multi_round(w, decoder, problem, 1),
        Framework::MultiRound { rounds } => run_multi_round(w, decoder, problem, rounds),
        Framework::Bon { n, scorer } => run_best_of_n(w, decoder, problem, n, scorer),
    }
}

/// Runs every problem; output order follows `problems` regardless of
/// scheduling.
pub fn run_dataset(
    w: &Workload,
    decoder: &Decoder,
    problems: &[Problem],
) -> Result<Vec<ProblemRun>, TtsError> {
    if w.parallel {
        problems.par_iter().map(|p| run_problem(w, decoder, p)).collect()
    } else {
        problems.iter().map(|p| run_problem(w, decoder, p)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use specbench_core::token::tokens;
    use specbench_core::{Method, SyntheticOracleSpec};

    fn workload(framework: Framework, policy: DecodePolicy) -> Workload {
        let spec = SyntheticOracleSpec::HashedMarkov {
            vocab_size: 24,
            order: 2,
            seed: 3,
            sharpness: 1.5,
        };
        Workload {
            oracle: spec.build(1 << 14).unwrap(),
            resources: DrafterResources {
                draft_oracle: Some(DraftOracleConfig::default().build(&spec, 1 << 14).unwrap()),
                datastore: None,
            },
            policy,
            stop: StopCondition::max_tokens(40),
            engine: EngineOptions::default(),
            template: PromptTemplate::new(24, vec![]),
            extractor: AnswerExtractor::default(),
            framework,
            parallel: false,
        }
    }

    fn problem() -> Problem {
        Problem {
            id: "p0".into(),
            source: "synthetic".into(),
            prompt: tokens(&[1, 5, 9, 2]),
            answer: None,
        }
    }

    fn strip_timing(mut run: ProblemRun) -> ProblemRun {
        for t in &mut run.trajectories {
            t.wall_time_ns = 0;
            for s in &mut t.steps {
                s.phase_times = Default::default();
            }
        }
        run
    }

    #[test]
    fn majority_vote_examples() {
        let (a, b) = (tokens(&[1]), tokens(&[2]));
        assert_eq!(MajorityVote.select(&[a.clone(), b.clone(), a.clone(), a.clone()]), Some(0));
        assert_eq!(MajorityVote.select(&[b.clone(), a.clone()]), Some(1));
        assert_eq!(MajorityVote.select(std::slice::from_ref(&b)), Some(0));
        assert_eq!(MajorityVote.select(&[]), None);
    }

    proptest! {
        #[test]
        fn majority_vote_depends_on_multiset_only(
            answers in proptest::collection::vec(proptest::collection::vec(0u32..3, 0..3), 1..8),
            rot in 0usize..8,
        ) {
            let answers: Vec<Vec<Token>> = answers.iter().map(|a| tokens(a)).collect();
            let mut permuted = answers.clone();
            permuted.rotate_left(rot % answers.len());
            permuted.reverse();
            let pick = |xs: &[Vec<Token>]| xs[MajorityVote.select(xs).unwrap()].clone();
            prop_assert_eq!(pick(&answers), pick(&permuted));
        }
    }

    #[test]
    fn one_round_equals_single_trajectory() {
        let w = workload(Framework::MultiRound { rounds: 1 }, DecodePolicy::greedy());
        let dec = Decoder::Speculative(MethodSpec::default_for(Method::Sam));
        let run = run_problem(&w, &dec, &problem()).unwrap();
        assert_eq!(run.trajectories.len(), 1);
        let mut d = build_drafter(&MethodSpec::default_for(Method::Sam), &w.resources).unwrap();
        let direct = run_trajectory(
            &*w.oracle,
            &mut *d,
            &w.policy,
            &problem().prompt,
            &w.stop,
            &w.engine,
            &mut DecodeRng::new(0),
        )
        .unwrap();
        assert_eq!(run.trajectories[0].tokens, direct.tokens);
    }

    #[test]
    fn second_round_prompt_carries_first_answer() {
        let w = workload(Framework::MultiRound { rounds: 3 }, DecodePolicy::greedy());
        let run = run_problem(&w, &Decoder::Autoregressive, &problem()).unwrap();
        assert_eq!(run.trajectories.len(), 3);
        let turns: Vec<usize> = run.trajectories.iter().map(|t| t.turn_index).collect();
        assert_eq!(turns, vec![1, 2, 3]);
        let expect_len = w
            .template
            .round_tokens(&problem().prompt, Some(&run.answers[1]), 3)
            .unwrap()
            .len();
        assert_eq!(run.trajectories[2].prompt_len, expect_len);
        assert_eq!(run.selected, 2);
        assert_eq!(run.final_answer(), &run.answers[2][..]);
    }

    #[test]
    fn bon_is_deterministic_and_uses_distinct_streams() {
        let w = workload(
            Framework::Bon {
                n: 4,
                scorer: ScorerKind::Majority,
            },
            DecodePolicy::sampling(0.8, 5),
        );
        let dec = Decoder::Speculative(MethodSpec::default_for(Method::Sps));
        let a = strip_timing(run_problem(&w, &dec, &problem()).unwrap());
        let b = strip_timing(run_problem(&w, &dec, &problem()).unwrap());
        assert_eq!(a, b);
        assert_eq!(a.trajectories.len(), 4);
        let distinct: std::collections::HashSet<_> =
            a.trajectories.iter().map(|t| t.tokens.clone()).collect();
        assert!(distinct.len() > 1);
        let mut wp = w.clone();
        wp.parallel = true;
        assert_eq!(strip_timing(run_problem(&wp, &dec, &problem()).unwrap()), a);
    }

    #[test]
    fn bon_of_one_selects_it() {
        let w = workload(
            Framework::Bon {
                n: 1,
                scorer: ScorerKind::Majority,
            },
            DecodePolicy::sampling(1.0, 0),
        );
        let run = run_problem(&w, &Decoder::Autoregressive, &problem()).unwrap();
        assert_eq!(run.selected, 0);
        assert_eq!(run.method, AR_LABEL);
    }

    #[test]
    fn streams_differ_by_every_component() {
        let s = trajectory_stream("a", 0, 1);
        assert_ne!(s, trajectory_stream("b", 0, 1));
        assert_ne!(s, trajectory_stream("a", 1, 1));
        assert_ne!(s, trajectory_stream("a", 0, 2));
    }
}
