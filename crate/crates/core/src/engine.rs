//! Instrumented draft → decode → verify → update loop, and the plain
//! autoregressive baseline.
//!
//! Phases per step, timed with one monotonic clock:
//! - draft: the drafter's `propose`;
//! - decode: target evaluation over the context and every draft position
//!   (with a real model this is the single batched forward pass);
//! - verify: acceptance decisions on the evaluated draft;
//! - update: appending output to the context and `observe`.

use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::draft::{DraftError, Method};
use crate::drafters::{validate_drafter, ConfigError, Drafter, Observation};
use crate::oracle::{OracleError, TokenOracle};
use crate::rng::DecodeRng;
use crate::token::{apply_policy, sample, Context, DecodePolicy, Distribution, Token};
use crate::verify::{evaluate, verify_evaluated, VerifyError};

pub const DEFAULT_WARMUP_STEPS: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("drafter produced an invalid draft: {0}")]
    InvalidDraft(#[from] DraftError),
    #[error(transparent)]
    Verify(#[from] VerifyError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StopCondition {
    pub max_tokens: usize,
    #[serde(default)]
    pub stop_token: Option<Token>,
}

impl StopCondition {
    pub fn max_tokens(max_tokens: usize) -> Self {
        Self {
            max_tokens,
            stop_token: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `max_tokens` reached (the normal end of a run).
    BudgetExhausted,
    StopToken,
}

/// Optional latency injected into the decode phase so that wall-clock
/// numbers resemble a batched accelerator pass: a fixed cost per pass plus
/// a small cost per evaluated position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimulatedLatency {
    pub per_pass_ns: u64,
    #[serde(default)]
    pub per_position_ns: u64,
}

impl SimulatedLatency {
    fn pause(&self, positions: usize) {
        let ns = self.per_pass_ns + self.per_position_ns * positions as u64;
        if ns > 0 {
            thread::sleep(Duration::from_nanos(ns));
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineOptions {
    /// Draft node budget; `None` uses the drafter's default.
    pub budget: Option<usize>,
    /// Leading steps excluded from aggregate phase timing.
    pub warmup_steps: usize,
    pub latency: Option<SimulatedLatency>,
    /// Validate every draft's structure before verification.
    pub check_drafts: bool,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            budget: None,
            warmup_steps: DEFAULT_WARMUP_STEPS,
            latency: None,
            check_drafts: true,
        }
    }
}

// ---------------------------------------------------------------------------
// Traces
// ---------------------------------------------------------------------------

/// Phase durations in nanoseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseTimes {
    pub draft: u64,
    pub decode: u64,
    pub verify: u64,
    pub update: u64,
}

impl PhaseTimes {
    pub const NAMES: [&'static str; 4] = ["draft", "decode", "verify", "update"];

    pub fn as_array(&self) -> [u64; 4] {
        [self.draft, self.decode, self.verify, self.update]
    }

    pub fn total(&self) -> u64 {
        self.as_array().iter().sum()
    }

    pub fn add(&mut self, other: &PhaseTimes) {
        self.draft += other.draft;
        self.decode += other.decode;
        self.verify += other.verify;
        self.update += other.update;
    }

    /// Shares of the total, summing to 1. An all-zero record (nothing timed)
    /// is split evenly.
    pub fn fractions(&self) -> [f64; 4] {
        let total = self.total();
        if total == 0 {
            return [0.25; 4];
        }
        let arr = self.as_array();
        let mut out = arr.map(|v| v as f64 / total as f64);
        // Push rounding error into the largest share so the sum is exact to
        // within one ulp of 1.
        let (imax, _) = arr.iter().enumerate().max_by_key(|&(_, v)| *v).unwrap();
        let rest: f64 = (0..4).filter(|&i| i != imax).map(|i| out[i]).sum();
        out[imax] = 1.0 - rest;
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepTrace {
    pub step_index: usize,
    pub phase_times: PhaseTimes,
    /// Tokens appended this step (accepted draft tokens + bonus, after any
    /// truncation by the stop condition).
    pub accepted_count: usize,
    pub match_len: usize,
    pub draft_len: usize,
    pub origin: Method,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryResult {
    pub method: Method,
    pub turn_index: usize,
    pub trajectory_index: usize,
    pub prompt_len: usize,
    /// Emitted tokens (prompt excluded).
    pub tokens: Vec<Token>,
    pub steps: Vec<StepTrace>,
    pub wall_time_ns: u64,
    /// Batched target evaluations; one per step.
    pub forward_passes: usize,
    pub stop_reason: StopReason,
    pub warmup_steps: usize,
}

impl TrajectoryResult {
    pub fn accepted_total(&self) -> usize {
        self.steps.iter().map(|s| s.accepted_count).sum()
    }

    /// Mean accepted tokens per step (bonus included). 0 for an empty run.
    pub fn mat(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.accepted_total() as f64 / self.steps.len() as f64
    }

    /// Phase totals over post-warmup steps (all steps when the run is no
    /// longer than the warmup).
    pub fn steady_phase_times(&self) -> PhaseTimes {
        let skip = if self.steps.len() > self.warmup_steps {
            self.warmup_steps
        } else {
            0
        };
        let mut acc = PhaseTimes::default();
        for s in &self.steps[skip..] {
            acc.add(&s.phase_times);
        }
        acc
    }
}

fn nanos(from: Instant, to: Instant) -> u64 {
    to.duration_since(from).as_nanos() as u64
}

/// Cuts `emitted` at the stop token (inclusive) and the remaining budget.
fn truncate_emitted(emitted: &mut Vec<Token>, remaining: usize, stop: &StopCondition) -> bool {
    let mut hit_stop = false;
    if let Some(st) = stop.stop_token {
        if let Some(i) = emitted.iter().position(|&t| t == st) {
            emitted.truncate(i + 1);
            hit_stop = true;
        }
    }
    if emitted.len() > remaining {
        emitted.truncate(remaining);
        hit_stop = false;
    }
    hit_stop
}

// ---------------------------------------------------------------------------
// Loops
// ---------------------------------------------------------------------------

/// Decodes one trajectory with speculative drafting.
///
/// The drafter's `begin_turn` is called with the prompt first, so state it
/// carries from earlier turns is kept. `rng` supplies every random draw of
/// the drafter and the verifier, and is untouched at `T = 0` unless the
/// drafter itself samples.
pub fn run_trajectory(
    oracle: &dyn TokenOracle,
    drafter: &mut dyn Drafter,
    policy: &DecodePolicy,
    prompt: &[Token],
    stop: &StopCondition,
    opts: &EngineOptions,
    rng: &mut DecodeRng,
) -> Result<TrajectoryResult, EngineError> {
    validate_drafter(drafter, policy)?;
    if prompt.is_empty() {
        return Err(EngineError::EmptyPrompt);
    }
    let budget = opts.budget.unwrap_or_else(|| drafter.default_budget());
    let start = Instant::now();
    drafter.begin_turn(prompt);
    let mut ctx = Context::from_prompt(prompt);
    let mut steps = Vec::new();
    let mut stop_reason = StopReason::BudgetExhausted;

    while ctx.generated_len() < stop.max_tokens {
        let t0 = Instant::now();
        let draft = drafter.propose(&ctx, budget, policy, rng);
        if opts.check_drafts {
            draft.validate(budget)?;
        }
        let t1 = Instant::now();
        let eval = evaluate(oracle, &ctx, &draft)?;
        if let Some(lat) = &opts.latency {
            lat.pause(draft.len() + 1);
        }
        let t2 = Instant::now();
        let outcome = verify_evaluated(&draft, &eval, policy, rng)?;
        let t3 = Instant::now();
        let mut emitted = outcome.emitted();
        let remaining = stop.max_tokens - ctx.generated_len();
        let hit_stop = truncate_emitted(&mut emitted, remaining, stop);
        let prev_token = ctx.last().expect("context is never empty");
        ctx.extend_from_slice(&emitted);
        drafter.observe(&Observation {
            prev_token,
            emitted: &emitted,
            target_dists: &outcome.target_dists[..emitted.len()],
        });
        let t4 = Instant::now();
        steps.push(StepTrace {
            step_index: steps.len(),
            phase_times: PhaseTimes {
                draft: nanos(t0, t1),
                decode: nanos(t1, t2),
                verify: nanos(t2, t3),
                update: nanos(t3, t4),
            },
            accepted_count: emitted.len(),
            match_len: draft.match_len,
            draft_len: draft.len(),
            origin: draft.origin,
        });
        if hit_stop {
            stop_reason = StopReason::StopToken;
            break;
        }
    }

    Ok(TrajectoryResult {
        method: drafter.method(),
        turn_index: 0,
        trajectory_index: 0,
        prompt_len: prompt.len(),
        tokens: ctx.generated().to_vec(),
        forward_passes: steps.len(),
        steps,
        wall_time_ns: nanos(start, Instant::now()),
        stop_reason,
        warmup_steps: opts.warmup_steps,
    })
}

/// One target evaluation and one token per step.
pub fn run_autoregressive(
    oracle: &dyn TokenOracle,
    policy: &DecodePolicy,
    prompt: &[Token],
    stop: &StopCondition,
    opts: &EngineOptions,
    rng: &mut DecodeRng,
) -> Result<TrajectoryResult, EngineError> {
    if prompt.is_empty() {
        return Err(EngineError::EmptyPrompt);
    }
    let start = Instant::now();
    let mut ctx = Context::from_prompt(prompt);
    let mut steps = Vec::new();
    let mut stop_reason = StopReason::BudgetExhausted;

    while ctx.generated_len() < stop.max_tokens {
        let t0 = Instant::now();
        let raw: Distribution = oracle.next_dist(&ctx)?;
        if let Some(lat) = &opts.latency {
            lat.pause(1);
        }
        let t1 = Instant::now();
        let token = if policy.is_greedy() {
            raw.argmax()
        } else {
            sample(&apply_policy(&raw, policy), rng)
        };
        let t2 = Instant::now();
        ctx.push(token);
        let t3 = Instant::now();
        steps.push(StepTrace {
            step_index: steps.len(),
            phase_times: PhaseTimes {
                draft: 0,
                decode: nanos(t0, t1),
                verify: nanos(t1, t2),
                update: nanos(t2, t3),
            },
            accepted_count: 1,
            match_len: 0,
            draft_len: 0,
            origin: Method::None,
        });
        if stop.stop_token == Some(token) {
            stop_reason = StopReason::StopToken;
            break;
        }
    }

    Ok(TrajectoryResult {
        method: Method::None,
        turn_index: 0,
        trajectory_index: 0,
        prompt_len: prompt.len(),
        tokens: ctx.generated().to_vec(),
        forward_passes: steps.len(),
        steps,
        wall_time_ns: nanos(start, Instant::now()),
        stop_reason,
        warmup_steps: opts.warmup_steps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drafters::{build_drafter, DrafterResources, MethodSpec, NoneDrafter, SamDrafter};
    use crate::oracle::{SharedOracle, SyntheticOracleSpec};
    use crate::token::tokens;

    fn cyclic(period: usize) -> SharedOracle {
        SyntheticOracleSpec::Cyclic {
            vocab_size: 16,
            period,
            cycle: None,
        }
        .build(1 << 12)
        .unwrap()
    }

    fn markov() -> SharedOracle {
        SyntheticOracleSpec::HashedMarkov {
            vocab_size: 32,
            order: 2,
            seed: 5,
            sharpness: 1.2,
        }
        .build(1 << 12)
        .unwrap()
    }

    #[test]
    fn cyclic_sam_accepts_nine_per_step() {
        let oracle = cyclic(4);
        let mut sam = SamDrafter::new(8);
        let res = run_trajectory(
            &*oracle,
            &mut sam,
            &DecodePolicy::greedy(),
            &tokens(&[0, 1, 2, 3]),
            &StopCondition::max_tokens(200),
            &EngineOptions::default(),
            &mut DecodeRng::new(0),
        )
        .unwrap();
        assert_eq!(res.tokens.len(), 200);
        let last = res.steps.len() - 1;
        for s in &res.steps[DEFAULT_WARMUP_STEPS..last] {
            assert_eq!(s.accepted_count, 9, "step {}", s.step_index);
        }
        assert_eq!(res.accepted_total(), 200);
        assert_eq!(res.forward_passes, res.steps.len());
    }

    #[test]
    fn none_drafter_matches_autoregressive() {
        let oracle = markov();
        let prompt = tokens(&[1, 2, 3]);
        let stop = StopCondition::max_tokens(64);
        let opts = EngineOptions::default();
        let spec = run_trajectory(
            &*oracle,
            &mut NoneDrafter,
            &DecodePolicy::greedy(),
            &prompt,
            &stop,
            &opts,
            &mut DecodeRng::new(0),
        )
        .unwrap();
        let ar = run_autoregressive(
            &*oracle,
            &DecodePolicy::greedy(),
            &prompt,
            &stop,
            &opts,
            &mut DecodeRng::new(0),
        )
        .unwrap();
        assert_eq!(spec.tokens, ar.tokens);
        assert!(spec.steps.iter().all(|s| s.accepted_count == 1));
        assert_eq!(ar.mat(), 1.0);
        assert_eq!(ar.steps.len(), 64);
    }

    #[test]
    fn sampling_runs_repeat_with_same_seed() {
        let oracle = markov();
        let prompt = tokens(&[4, 4]);
        let stop = StopCondition::max_tokens(80);
        let policy = DecodePolicy::sampling(0.6, 11);
        let run = || {
            let mut d = build_drafter(&MethodSpec::default_for(Method::Sam), &DrafterResources::default())
                .unwrap();
            let mut r = run_trajectory(
                &*oracle,
                &mut *d,
                &policy,
                &prompt,
                &stop,
                &EngineOptions::default(),
                &mut DecodeRng::new(policy.seed),
            )
            .unwrap();
            for s in &mut r.steps {
                s.phase_times = PhaseTimes::default();
            }
            r.wall_time_ns = 0;
            r
        };
        assert_eq!(run(), run());
        let ar = |seed| {
            run_autoregressive(
                &*oracle,
                &policy,
                &prompt,
                &stop,
                &EngineOptions::default(),
                &mut DecodeRng::new(seed),
            )
            .unwrap()
            .tokens
        };
        assert_eq!(ar(3), ar(3));
    }

    #[test]
    fn stop_token_truncates_and_counts() {
        let oracle = cyclic(4);
        let mut sam = SamDrafter::new(8);
        let stop = StopCondition {
            max_tokens: 100,
            stop_token: Some(Token(3)),
        };
        let res = run_trajectory(
            &*oracle,
            &mut sam,
            &DecodePolicy::greedy(),
            &tokens(&[0, 1, 2, 3, 0]),
            &stop,
            &EngineOptions::default(),
            &mut DecodeRng::new(0),
        )
        .unwrap();
        assert_eq!(res.tokens, tokens(&[1, 2, 3]));
        assert_eq!(res.stop_reason, StopReason::StopToken);
        assert_eq!(res.accepted_total(), 3);
    }

    #[test]
    fn rejects_sampling_for_greedy_only_drafter() {
        let oracle = markov();
        let mut d = build_drafter(&MethodSpec::default_for(Method::Pld), &DrafterResources::default())
            .unwrap();
        let err = run_trajectory(
            &*oracle,
            &mut *d,
            &DecodePolicy::sampling(0.5, 0),
            &tokens(&[1]),
            &StopCondition::max_tokens(4),
            &EngineOptions::default(),
            &mut DecodeRng::new(0),
        )
        .unwrap_err();
        assert_eq!(
            err,
            EngineError::Config(ConfigError::UnsupportedSamplingMode { method: Method::Pld })
        );
    }

    #[test]
    fn fractions_sum_to_one() {
        let p = PhaseTimes {
            draft: 3,
            decode: 7,
            verify: 11,
            update: 13,
        };
        let f = p.fractions();
        assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(PhaseTimes::default().fractions(), [0.25; 4]);
    }
}
