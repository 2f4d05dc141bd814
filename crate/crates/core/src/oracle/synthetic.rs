//! Synthetic target models.
//!
//! - `cyclic`: deterministic loop over a fixed token cycle.
//! - `hashed-markov`: order-`k` Markov chain whose per-state distribution is a
//!   Zipf law over a hash-seeded permutation of the vocabulary.
//! - `copy-mix`: at generation positions selected by a seeded coin (rate
//!   `copy_prob`), emits a point mass continuing the earliest earlier
//!   occurrence of the longest repeated suffix; elsewhere falls back to
//!   hashed-markov. This produces controllable intra- and inter-turn
//!   redundancy.
//!
//! A [`PerturbedOracle`] wraps any oracle and swaps the top two tokens on a
//! seeded fraction of states; it plays the small homologous draft model.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{check_context, OracleError, SharedOracle, TokenOracle};
use crate::rng::{hash_seq, hash_to_unit, mix64};
use crate::token::{Context, Distribution, Token};

pub const DEFAULT_MAX_CONTEXT: usize = 1 << 16;

const COPY_SALT: u64 = 0xC0B1_C0B1_5EED_0001;
const PERTURB_SALT: u64 = 0x9E27_7B0C_5EED_0002;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OracleSpecError {
    #[error("vocabulary size must be at least 2, got {0}")]
    VocabTooSmall(usize),
    #[error("cyclic period must be >= 1")]
    ZeroPeriod,
    #[error("cycle has {len} tokens but period is {period}")]
    CycleLength { len: usize, period: usize },
    #[error("cycle tokens must be distinct ids below the vocabulary size")]
    BadCycle,
    #[error("{name} must lie in [0, 1], got {value}")]
    OutOfUnitRange { name: &'static str, value: f64 },
    #[error("{name} must be >= 1")]
    ZeroParameter { name: &'static str },
    #[error("sharpness must be finite and >= 0, got {0}")]
    BadSharpness(f64),
}

fn default_sharpness() -> f64 {
    1.5
}

fn default_one() -> usize {
    1
}

/// Declarative description of a synthetic oracle, as it appears in
/// benchmark configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SyntheticOracleSpec {
    Cyclic {
        vocab_size: usize,
        period: usize,
        /// Explicit loop; defaults to token ids `0..period`.
        #[serde(default)]
        cycle: Option<Vec<Token>>,
    },
    HashedMarkov {
        vocab_size: usize,
        order: usize,
        seed: u64,
        /// Zipf exponent of the per-state distribution.
        #[serde(default = "default_sharpness")]
        sharpness: f64,
    },
    CopyMix {
        vocab_size: usize,
        order: usize,
        seed: u64,
        #[serde(default = "default_sharpness")]
        sharpness: f64,
        copy_prob: f64,
        /// Shortest repeated suffix that triggers copying.
        #[serde(default = "default_one")]
        min_match: usize,
        /// Copy decisions are drawn once per block of this many generated
        /// positions.
        #[serde(default = "default_one")]
        segment: usize,
    },
}

impl SyntheticOracleSpec {
    pub fn vocab_size(&self) -> usize {
        match self {
            Self::Cyclic { vocab_size, .. }
            | Self::HashedMarkov { vocab_size, .. }
            | Self::CopyMix { vocab_size, .. } => *vocab_size,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Cyclic { .. } => "cyclic",
            Self::HashedMarkov { .. } => "hashed-markov",
            Self::CopyMix { .. } => "copy-mix",
        }
    }

    pub fn build(&self, max_context: usize) -> Result<SharedOracle, OracleSpecError> {
        Ok(match self {
            Self::Cyclic {
                vocab_size,
                period,
                cycle,
            } => {
                let cycle = match cycle {
                    Some(c) => {
                        if c.len() != *period {
                            return Err(OracleSpecError::CycleLength {
                                len: c.len(),
                                period: *period,
                            });
                        }
                        c.clone()
                    }
                    None => (0..*period as u32).map(Token).collect(),
                };
                Arc::new(CyclicOracle::new(*vocab_size, cycle)?.with_max_context(max_context))
            }
            Self::HashedMarkov {
                vocab_size,
                order,
                seed,
                sharpness,
            } => Arc::new(
                HashedMarkovOracle::new(*vocab_size, *order, *seed, *sharpness)?
                    .with_max_context(max_context),
            ),
            Self::CopyMix {
                vocab_size,
                order,
                seed,
                sharpness,
                copy_prob,
                min_match,
                segment,
            } => {
                let markov = HashedMarkovOracle::new(*vocab_size, *order, *seed, *sharpness)?;
                Arc::new(
                    CopyMixOracle::new(markov, *copy_prob, *min_match, *segment)?
                        .with_max_context(max_context),
                )
            }
        })
    }

    /// The Markov component alone (the copy mechanism stripped). Cyclic specs
    /// return themselves.
    pub fn markov_component(&self) -> SyntheticOracleSpec {
        match self {
            Self::CopyMix {
                vocab_size,
                order,
                seed,
                sharpness,
                ..
            } => Self::HashedMarkov {
                vocab_size: *vocab_size,
                order: *order,
                seed: *seed,
                sharpness: *sharpness,
            },
            other => other.clone(),
        }
    }
}

fn check_vocab(vocab_size: usize) -> Result<(), OracleSpecError> {
    if vocab_size < 2 {
        return Err(OracleSpecError::VocabTooSmall(vocab_size));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Cyclic
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CyclicOracle {
    vocab_size: usize,
    cycle: Vec<Token>,
    max_context: usize,
}

impl CyclicOracle {
    pub fn new(vocab_size: usize, cycle: Vec<Token>) -> Result<Self, OracleSpecError> {
        check_vocab(vocab_size)?;
        if cycle.is_empty() {
            return Err(OracleSpecError::ZeroPeriod);
        }
        let mut seen = vec![false; vocab_size];
        for t in &cycle {
            if t.index() >= vocab_size || seen[t.index()] {
                return Err(OracleSpecError::BadCycle);
            }
            seen[t.index()] = true;
        }
        Ok(Self {
            vocab_size,
            cycle,
            max_context: DEFAULT_MAX_CONTEXT,
        })
    }

    pub fn with_max_context(mut self, max_context: usize) -> Self {
        self.max_context = max_context;
        self
    }

    pub fn period(&self) -> usize {
        self.cycle.len()
    }
}

impl TokenOracle for CyclicOracle {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_dist(&self, ctx: &Context) -> Result<Distribution, OracleError> {
        check_context(ctx, self.max_context)?;
        let last = ctx.last().expect("checked non-empty");
        let next = match self.cycle.iter().position(|&t| t == last) {
            Some(i) => self.cycle[(i + 1) % self.cycle.len()],
            None => self.cycle[0],
        };
        Ok(Distribution::point_mass(self.vocab_size, next))
    }
}

// ---------------------------------------------------------------------------
// Hashed Markov
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct HashedMarkovOracle {
    vocab_size: usize,
    order: usize,
    seed: u64,
    sharpness: f64,
    /// Zipf weights by rank, normalized.
    rank_probs: Vec<f64>,
    max_context: usize,
}

impl HashedMarkovOracle {
    pub fn new(
        vocab_size: usize,
        order: usize,
        seed: u64,
        sharpness: f64,
    ) -> Result<Self, OracleSpecError> {
        check_vocab(vocab_size)?;
        if !sharpness.is_finite() || sharpness < 0.0 {
            return Err(OracleSpecError::BadSharpness(sharpness));
        }
        let weights: Vec<f64> = (0..vocab_size)
            .map(|r| ((r + 1) as f64).powf(-sharpness))
            .collect();
        let total: f64 = weights.iter().sum();
        Ok(Self {
            vocab_size,
            order,
            seed,
            sharpness,
            rank_probs: weights.into_iter().map(|w| w / total).collect(),
            max_context: DEFAULT_MAX_CONTEXT,
        })
    }

    pub fn with_max_context(mut self, max_context: usize) -> Self {
        self.max_context = max_context;
        self
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    /// Hash of the Markov state (the last `order` tokens).
    fn state_hash(&self, ctx: &[Token]) -> u64 {
        let start = ctx.len().saturating_sub(self.order);
        let state = &ctx[start..];
        hash_seq(
            self.seed ^ state.len() as u64,
            state.iter().map(|t| t.0 as u64),
        )
    }

    fn dist_for_state(&self, state: u64) -> Distribution {
        let mut order: Vec<(u64, usize)> = (0..self.vocab_size)
            .map(|i| (mix64(state ^ (i as u64).wrapping_mul(0xA24B_AED4_963E_E407)), i))
            .collect();
        order.sort_unstable();
        let mut probs = vec![0.0; self.vocab_size];
        for (rank, &(_, token)) in order.iter().enumerate() {
            probs[token] = self.rank_probs[rank];
        }
        Distribution::new(probs).expect("zipf weights are normalized")
    }

    fn dist_unchecked(&self, ctx: &[Token]) -> Distribution {
        self.dist_for_state(self.state_hash(ctx))
    }
}

impl TokenOracle for HashedMarkovOracle {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_dist(&self, ctx: &Context) -> Result<Distribution, OracleError> {
        check_context(ctx, self.max_context)?;
        Ok(self.dist_unchecked(ctx.tokens()))
    }
}

// ---------------------------------------------------------------------------
// Copy-mix
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct CopyMixOracle {
    markov: HashedMarkovOracle,
    copy_prob: f64,
    min_match: usize,
    segment: usize,
    max_context: usize,
}

impl CopyMixOracle {
    pub fn new(
        markov: HashedMarkovOracle,
        copy_prob: f64,
        min_match: usize,
        segment: usize,
    ) -> Result<Self, OracleSpecError> {
        if !(0.0..=1.0).contains(&copy_prob) {
            return Err(OracleSpecError::OutOfUnitRange {
                name: "copy_prob",
                value: copy_prob,
            });
        }
        if min_match == 0 {
            return Err(OracleSpecError::ZeroParameter { name: "min_match" });
        }
        if segment == 0 {
            return Err(OracleSpecError::ZeroParameter { name: "segment" });
        }
        Ok(Self {
            markov,
            copy_prob,
            min_match,
            segment,
            max_context: DEFAULT_MAX_CONTEXT,
        })
    }

    pub fn with_max_context(mut self, max_context: usize) -> Self {
        self.max_context = max_context;
        self
    }

    /// Whether generated position `gen_pos` is a copy position.
    pub fn copies_at(&self, gen_pos: usize) -> bool {
        let block = (gen_pos / self.segment) as u64;
        hash_to_unit(hash_seq(self.markov.seed ^ COPY_SALT, [block])) < self.copy_prob
    }
}

/// Longest suffix of `seq` that also ends at an earlier position, and the
/// token following its earliest such occurrence. Z-function over the
/// reversed sequence, O(n).
pub(crate) fn copy_continuation(seq: &[Token]) -> Option<(usize, Token)> {
    let n = seq.len();
    if n < 2 {
        return None;
    }
    let rev: Vec<Token> = seq.iter().rev().copied().collect();
    let mut z = vec![0usize; n];
    let (mut l, mut r) = (0usize, 0usize);
    let mut best_len = 0usize;
    let mut best_j = 0usize;
    for j in 1..n {
        let mut k = if j < r { z[j - l].min(r - j) } else { 0 };
        while j + k < n && rev[k] == rev[j + k] {
            k += 1;
        }
        z[j] = k;
        if j + k > r {
            l = j;
            r = j + k;
        }
        // Larger j is an earlier occurrence in the original order.
        if k > 0 && k >= best_len {
            best_len = k;
            best_j = j;
        }
    }
    if best_len == 0 {
        return None;
    }
    Some((best_len, seq[n - best_j]))
}

impl TokenOracle for CopyMixOracle {
    fn vocab_size(&self) -> usize {
        self.markov.vocab_size
    }

    fn next_dist(&self, ctx: &Context) -> Result<Distribution, OracleError> {
        check_context(ctx, self.max_context)?;
        if self.copies_at(ctx.generated_len()) {
            if let Some((len, next)) = copy_continuation(ctx.tokens()) {
                if len >= self.min_match {
                    return Ok(Distribution::point_mass(self.markov.vocab_size, next));
                }
            }
        }
        Ok(self.markov.dist_unchecked(ctx.tokens()))
    }
}

// ---------------------------------------------------------------------------
// Perturbed (draft model stand-in)
// ---------------------------------------------------------------------------

/// Wraps an oracle and, on a seeded `rate` fraction of states (hash of the
/// last `order` tokens), swaps the probabilities of its top two tokens.
#[derive(Debug, Clone)]
pub struct PerturbedOracle {
    base: SharedOracle,
    rate: f64,
    order: usize,
    seed: u64,
}

impl PerturbedOracle {
    pub fn new(
        base: SharedOracle,
        rate: f64,
        order: usize,
        seed: u64,
    ) -> Result<Self, OracleSpecError> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(OracleSpecError::OutOfUnitRange { name: "rate", value: rate });
        }
        Ok(Self {
            base,
            rate,
            order,
            seed,
        })
    }
}

impl TokenOracle for PerturbedOracle {
    fn vocab_size(&self) -> usize {
        self.base.vocab_size()
    }

    fn next_dist(&self, ctx: &Context) -> Result<Distribution, OracleError> {
        let dist = self.base.next_dist(ctx)?;
        let toks = ctx.tokens();
        let state = &toks[toks.len().saturating_sub(self.order)..];
        let h = hash_seq(self.seed ^ PERTURB_SALT, state.iter().map(|t| t.0 as u64));
        if hash_to_unit(h) >= self.rate {
            return Ok(dist);
        }
        let top = dist.argmax();
        let v = dist.vocab_size();
        let alt = match dist.top_k(2).get(1) {
            Some(&t) => t,
            None => Token(((top.index() + 1 + (mix64(h) as usize % (v - 1))) % v) as u32),
        };
        let mut probs = dist.probs().to_vec();
        probs.swap(top.index(), alt.index());
        Ok(Distribution::new(probs).expect("permutation preserves mass"))
    }
}
