//! Drafting methods behind one interface.
//!
//! A drafter sees the decode context, proposes a [`Draft`], and afterwards
//! observes what the verifier emitted together with the target
//! distributions computed on the way. Drafters that find nothing return an
//! empty draft; the engine then takes a plain target step.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::draft::{Capabilities, Draft, Method};
use crate::index::CorpusDatastore;
use crate::oracle::SharedOracle;
use crate::rng::DecodeRng;
use crate::token::{Context, DecodePolicy, Distribution, Token};

mod hybrid;
mod learned;
mod lookahead;
mod pia;
mod pld;
mod recycling;
mod rest;
mod sam;
mod sps;

pub use hybrid::HybridDrafter;
pub use learned::LearnedTreeDrafter;
pub use lookahead::LookaheadDrafter;
pub use pia::PiaDrafter;
pub use pld::PldDrafter;
pub use recycling::{recycling_tree, RecyclingCache, RecyclingDrafter};
pub use rest::RestDrafter;
pub use sam::SamDrafter;
pub use sps::SpsDrafter;

/// What one engine step produced, handed back to the drafter.
#[derive(Clone, Copy, Debug)]
pub struct Observation<'a> {
    /// Last context token before this step's output.
    pub prev_token: Token,
    /// Tokens appended to the context this step (accepted draft + bonus).
    pub emitted: &'a [Token],
    /// Raw target distribution that produced each emitted token.
    pub target_dists: &'a [Distribution],
}

impl Observation<'_> {
    /// Token that each target distribution was conditioned on last.
    pub fn keyed_dists(&self) -> impl Iterator<Item = (Token, &Distribution)> + '_ {
        self.target_dists.iter().enumerate().map(move |(j, d)| {
            let key = if j == 0 { self.prev_token } else { self.emitted[j - 1] };
            (key, d)
        })
    }
}

pub trait Drafter: Send + fmt::Debug {
    fn method(&self) -> Method;

    fn capabilities(&self) -> Capabilities {
        self.method().capabilities()
    }

    /// Node budget used when the caller has no override.
    fn default_budget(&self) -> usize;

    /// Called once at the start of every trajectory with its prompt. State
    /// from earlier turns is kept.
    fn begin_turn(&mut self, prompt: &[Token]);

    fn propose(
        &mut self,
        ctx: &Context,
        budget: usize,
        policy: &DecodePolicy,
        rng: &mut DecodeRng,
    ) -> Draft;

    fn observe(&mut self, obs: &Observation<'_>);

    /// Current matched-suffix length, for drafters that track one.
    fn match_len(&self) -> usize {
        0
    }

    fn box_clone(&self) -> Box<dyn Drafter>;
}

impl Clone for Box<dyn Drafter> {
    fn clone(&self) -> Self {
        self.box_clone()
    }
}

/// Drafter that never proposes anything.
#[derive(Clone, Debug, Default)]
pub struct NoneDrafter;

impl Drafter for NoneDrafter {
    fn method(&self) -> Method {
        Method::None
    }

    fn default_budget(&self) -> usize {
        0
    }

    fn begin_turn(&mut self, _prompt: &[Token]) {}

    fn propose(&mut self, _: &Context, _: usize, _: &DecodePolicy, _: &mut DecodeRng) -> Draft {
        Draft::empty(crate::draft::Speculation::Linear, Method::None)
    }

    fn observe(&mut self, _obs: &Observation<'_>) {}

    fn box_clone(&self) -> Box<dyn Drafter> {
        Box::new(self.clone())
    }
}

// ---------------------------------------------------------------------------
// Capability checks
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ConfigError {
    #[error("{method} does not support speculative sampling (capability matrix: {method} / Sampling = no); use temperature 0")]
    UnsupportedSamplingMode { method: Method },
    #[error("{method} does not support greedy verification")]
    UnsupportedGreedyMode { method: Method },
}

fn check_capabilities(
    method: Method,
    caps: Capabilities,
    policy: &DecodePolicy,
) -> Result<(), ConfigError> {
    if policy.is_greedy() {
        if !caps.supports_greedy {
            return Err(ConfigError::UnsupportedGreedyMode { method });
        }
    } else if !caps.supports_sampling {
        return Err(ConfigError::UnsupportedSamplingMode { method });
    }
    Ok(())
}

/// Rejects policies a method cannot verify losslessly.
pub fn validate_config(method: Method, policy: &DecodePolicy) -> Result<(), ConfigError> {
    check_capabilities(method, method.capabilities(), policy)
}

/// Same check against a concrete drafter (hybrids derive their row from
/// their components).
pub fn validate_drafter(drafter: &dyn Drafter, policy: &DecodePolicy) -> Result<(), ConfigError> {
    check_capabilities(drafter.method(), drafter.capabilities(), policy)
}

// ---------------------------------------------------------------------------
// Method configuration
// ---------------------------------------------------------------------------

pub const SAM_DEFAULT_BUDGET: usize = 40;
pub const RECYCLING_DEFAULT_BUDGET: usize = 81;
pub const DEFAULT_BUDGET: usize = 16;
pub const HYBRID_DEFAULT_THRESHOLD: usize = 2;

fn default_budget() -> usize {
    DEFAULT_BUDGET
}

fn default_sam_budget() -> usize {
    SAM_DEFAULT_BUDGET
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpsParams {
    #[serde(default = "default_budget")]
    pub budget: usize,
}

impl Default for SpsParams {
    fn default() -> Self {
        Self { budget: DEFAULT_BUDGET }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EagleParams {
    pub budget: usize,
    /// Children per node at each depth.
    pub branch: Vec<usize>,
}

impl Default for EagleParams {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            branch: vec![3, 2, 2, 1, 1, 1],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PldParams {
    pub budget: usize,
    pub min_n: usize,
    pub max_n: usize,
}

impl Default for PldParams {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            min_n: 1,
            max_n: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RestParams {
    pub budget: usize,
    /// Continuations retrieved per step.
    pub k: usize,
    /// Longest context suffix searched in the corpus.
    pub max_suffix: usize,
    /// Length of each retrieved continuation.
    pub max_len: usize,
}

impl Default for RestParams {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            k: 4,
            max_suffix: 8,
            max_len: 8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LookaheadParams {
    pub budget: usize,
    pub min_n: usize,
    pub max_n: usize,
    /// Tokens per pooled n-gram continuation.
    pub level: usize,
    /// Maximum pooled candidates drafted per step.
    pub candidates: usize,
    /// Rolling window of generated tokens the pool is harvested from.
    pub window: usize,
}

impl Default for LookaheadParams {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            min_n: 1,
            max_n: 2,
            level: 4,
            candidates: 8,
            window: 512,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PiaParams {
    pub budget: usize,
    /// Length of the context windows inserted into the trie.
    pub window: usize,
    /// Longest context suffix matched against the trie.
    pub max_key: usize,
    /// Trie node capacity enforced by pruning.
    pub capacity: usize,
}

impl Default for PiaParams {
    fn default() -> Self {
        Self {
            budget: DEFAULT_BUDGET,
            window: 12,
            max_key: 4,
            capacity: 1 << 16,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamParams {
    #[serde(default = "default_sam_budget")]
    pub budget: usize,
}

impl Default for SamParams {
    fn default() -> Self {
        Self {
            budget: SAM_DEFAULT_BUDGET,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RecyclingParams {
    pub budget: usize,
    /// Next tokens cached per token.
    pub top_k: usize,
    /// Children per node at each depth of the drafted tree.
    pub branch: Vec<usize>,
    /// Keep the cache from one turn to the next. Off by default: the cache
    /// is refilled within each trajectory only.
    pub persist_across_turns: bool,
}

impl Default for RecyclingParams {
    fn default() -> Self {
        Self {
            budget: RECYCLING_DEFAULT_BUDGET,
            top_k: 8,
            branch: vec![4, 2, 2, 1, 1, 1, 1, 1],
            persist_across_turns: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HybridParams {
    /// Minimum SAM match length for the SAM draft to be used.
    pub threshold: usize,
    pub primary: SamParams,
    /// Model-based fallback (`sps` or `eagle`).
    pub fallback: Box<MethodSpec>,
}

impl Default for HybridParams {
    fn default() -> Self {
        Self {
            threshold: HYBRID_DEFAULT_THRESHOLD,
            primary: SamParams::default(),
            fallback: Box::new(MethodSpec::Sps(SpsParams::default())),
        }
    }
}

/// A method id plus its parameters, as written in configuration files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "lowercase")]
pub enum MethodSpec {
    None,
    Sps(SpsParams),
    Eagle(EagleParams),
    Pld(PldParams),
    Rest(RestParams),
    Lookahead(LookaheadParams),
    Pia(PiaParams),
    Sam(SamParams),
    Recycling(RecyclingParams),
    Hybrid(HybridParams),
}

impl MethodSpec {
    pub fn default_for(method: Method) -> Self {
        match method {
            Method::None => Self::None,
            Method::Sps => Self::Sps(Default::default()),
            Method::Eagle => Self::Eagle(Default::default()),
            Method::Pld => Self::Pld(Default::default()),
            Method::Rest => Self::Rest(Default::default()),
            Method::Lookahead => Self::Lookahead(Default::default()),
            Method::Pia => Self::Pia(Default::default()),
            Method::Sam => Self::Sam(Default::default()),
            Method::Recycling => Self::Recycling(Default::default()),
            Method::Hybrid => Self::Hybrid(Default::default()),
        }
    }

    pub fn method(&self) -> Method {
        match self {
            Self::None => Method::None,
            Self::Sps(_) => Method::Sps,
            Self::Eagle(_) => Method::Eagle,
            Self::Pld(_) => Method::Pld,
            Self::Rest(_) => Method::Rest,
            Self::Lookahead(_) => Method::Lookahead,
            Self::Pia(_) => Method::Pia,
            Self::Sam(_) => Method::Sam,
            Self::Recycling(_) => Method::Recycling,
            Self::Hybrid(_) => Method::Hybrid,
        }
    }

    pub fn needs_draft_model(&self) -> bool {
        match self {
            Self::Sps(_) | Self::Eagle(_) => true,
            Self::Hybrid(h) => h.fallback.needs_draft_model(),
            _ => false,
        }
    }

    pub fn needs_datastore(&self) -> bool {
        matches!(self, Self::Rest(_))
    }

    /// Capability row of the drafter this spec builds.
    pub fn capabilities(&self) -> Capabilities {
        match self {
            Self::Hybrid(h) => hybrid::combined_capabilities(
                Method::Sam.capabilities(),
                h.fallback.capabilities(),
            ),
            other => other.method().capabilities(),
        }
    }

    /// Policy check against this spec's capability row.
    pub fn validate_policy(&self, policy: &DecodePolicy) -> Result<(), ConfigError> {
        check_capabilities(self.method(), self.capabilities(), policy)
    }
}

/// External resources some drafters need.
#[derive(Clone, Debug, Default)]
pub struct DrafterResources {
    /// Small homologous model for `sps` / `eagle`.
    pub draft_oracle: Option<SharedOracle>,
    /// Retrieval corpus for `rest`.
    pub datastore: Option<Arc<CorpusDatastore>>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("{0} needs a draft model")]
    MissingDraftModel(Method),
    #[error("rest needs a datastore")]
    MissingDatastore,
    #[error("invalid parameter for {method}: {reason}")]
    InvalidParam { method: Method, reason: String },
}

fn invalid(method: Method, reason: impl Into<String>) -> BuildError {
    BuildError::InvalidParam {
        method,
        reason: reason.into(),
    }
}

/// Instantiates the drafter described by `spec`.
pub fn build_drafter(
    spec: &MethodSpec,
    res: &DrafterResources,
) -> Result<Box<dyn Drafter>, BuildError> {
    let method = spec.method();
    let small = || res.draft_oracle.clone().ok_or(BuildError::MissingDraftModel(method));
    let positive = |v: usize, name: &str| {
        if v == 0 {
            Err(invalid(method, format!("{name} must be >= 1")))
        } else {
            Ok(())
        }
    };
    Ok(match spec {
        MethodSpec::None => Box::new(NoneDrafter),
        MethodSpec::Sps(p) => {
            positive(p.budget, "budget")?;
            Box::new(SpsDrafter::new(small()?, p.budget))
        }
        MethodSpec::Eagle(p) => {
            positive(p.budget, "budget")?;
            if p.branch.is_empty() || p.branch.contains(&0) {
                return Err(invalid(method, "branch widths must be non-empty and >= 1"));
            }
            Box::new(LearnedTreeDrafter::new(small()?, p.budget, p.branch.clone()))
        }
        MethodSpec::Pld(p) => {
            positive(p.budget, "budget")?;
            if p.min_n == 0 || p.min_n > p.max_n {
                return Err(invalid(method, "need 1 <= min_n <= max_n"));
            }
            Box::new(PldDrafter::new(p.min_n, p.max_n, p.budget))
        }
        MethodSpec::Rest(p) => {
            positive(p.budget, "budget")?;
            positive(p.k, "k")?;
            positive(p.max_suffix, "max_suffix")?;
            positive(p.max_len, "max_len")?;
            let store = res.datastore.clone().ok_or(BuildError::MissingDatastore)?;
            Box::new(RestDrafter::new(store, p.clone()))
        }
        MethodSpec::Lookahead(p) => {
            positive(p.budget, "budget")?;
            positive(p.level, "level")?;
            positive(p.candidates, "candidates")?;
            positive(p.window, "window")?;
            if p.min_n == 0 || p.min_n > p.max_n {
                return Err(invalid(method, "need 1 <= min_n <= max_n"));
            }
            Box::new(LookaheadDrafter::new(p.clone()))
        }
        MethodSpec::Pia(p) => {
            positive(p.budget, "budget")?;
            positive(p.max_key, "max_key")?;
            positive(p.capacity, "capacity")?;
            if p.window < 2 {
                return Err(invalid(method, "window must be >= 2"));
            }
            Box::new(PiaDrafter::new(p.clone()))
        }
        MethodSpec::Sam(p) => {
            positive(p.budget, "budget")?;
            Box::new(SamDrafter::new(p.budget))
        }
        MethodSpec::Recycling(p) => {
            positive(p.budget, "budget")?;
            positive(p.top_k, "top_k")?;
            if p.branch.is_empty() {
                return Err(invalid(method, "branch widths must be non-empty"));
            }
            Box::new(RecyclingDrafter::new(p.clone()))
        }
        MethodSpec::Hybrid(p) => {
            positive(p.threshold, "threshold")?;
            positive(p.primary.budget, "primary.budget")?;
            if matches!(*p.fallback, MethodSpec::Hybrid(_) | MethodSpec::None) {
                return Err(invalid(method, "fallback must be a single drafting method"));
            }
            let fallback = build_drafter(&p.fallback, res)?;
            Box::new(HybridDrafter::new(
                SamDrafter::new(p.primary.budget),
                fallback,
                p.threshold,
            ))
        }
    })
}
