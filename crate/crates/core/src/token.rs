//! Tokens, decoding contexts, next-token distributions and the decode policy.
//!
//! Everything downstream (oracles, drafters, the verifier) speaks in terms of
//! these types. Probabilities are kept in double precision throughout.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rng::DecodeRng;

/// Probability mass tolerance used when validating a [`Distribution`].
pub const DIST_SUM_TOLERANCE: f64 = 1e-9;

/// A token id. Valid ids for a vocabulary of size `V` are `0..V`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Token(pub u32);

impl Token {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Token {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<u32> for Token {
    fn from(id: u32) -> Self {
        Token(id)
    }
}

/// Convenience for tests and fixtures: `tokens(&[1, 2, 3])`.
pub fn tokens(ids: &[u32]) -> Vec<Token> {
    ids.iter().copied().map(Token).collect()
}

// ---------------------------------------------------------------------------
// Context
// ---------------------------------------------------------------------------

/// The token history a decode run conditions on: prompt followed by
/// everything generated so far.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Context {
    tokens: Vec<Token>,
    prompt_len: usize,
}

impl Context {
    pub fn from_prompt(prompt: &[Token]) -> Self {
        Self {
            tokens: prompt.to_vec(),
            prompt_len: prompt.len(),
        }
    }

    /// Builds a context whose first `prompt_len` tokens are the prompt.
    ///
    /// `prompt_len` is clamped to the sequence length.
    pub fn with_prompt_len(tokens: Vec<Token>, prompt_len: usize) -> Self {
        let prompt_len = prompt_len.min(tokens.len());
        Self { tokens, prompt_len }
    }

    pub fn tokens(&self) -> &[Token] {
        &self.tokens
    }

    pub fn prompt_len(&self) -> usize {
        self.prompt_len
    }

    pub fn prompt(&self) -> &[Token] {
        &self.tokens[..self.prompt_len]
    }

    pub fn generated(&self) -> &[Token] {
        &self.tokens[self.prompt_len..]
    }

    /// Number of tokens generated after the prompt.
    pub fn generated_len(&self) -> usize {
        self.tokens.len() - self.prompt_len
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn last(&self) -> Option<Token> {
        self.tokens.last().copied()
    }

    pub fn push(&mut self, token: Token) {
        self.tokens.push(token);
    }

    pub fn extend_from_slice(&mut self, toks: &[Token]) {
        self.tokens.extend_from_slice(toks);
    }

    /// Drops generated tokens beyond `len`. Never cuts into the prompt.
    pub(crate) fn truncate(&mut self, len: usize) {
        self.tokens.truncate(len.max(self.prompt_len));
    }
}

// ---------------------------------------------------------------------------
// Distribution
// ---------------------------------------------------------------------------

/// Error produced when a probability vector fails validation.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DistributionError {
    #[error("distribution is empty")]
    Empty,
    #[error("probability at token {index} is {value}, expected a finite value >= 0")]
    InvalidEntry { index: usize, value: f64 },
    #[error("probabilities sum to {sum}, expected 1")]
    BadSum { sum: f64 },
}

/// A next-token probability vector over a vocabulary of size `V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    /// Validates `probs` (non-negative, finite, sums to 1 within 1e-9).
    pub fn new(probs: Vec<f64>) -> Result<Self, DistributionError> {
        if probs.is_empty() {
            return Err(DistributionError::Empty);
        }
        for (index, &value) in probs.iter().enumerate() {
            if !value.is_finite() || value < 0.0 {
                return Err(DistributionError::InvalidEntry { index, value });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > DIST_SUM_TOLERANCE {
            return Err(DistributionError::BadSum { sum });
        }
        Ok(Self { probs })
    }

    /// Normalizes non-negative weights. Returns `None` when the total mass is zero.
    pub fn from_weights(weights: Vec<f64>) -> Option<Self> {
        let total: f64 = weights.iter().sum();
        if !total.is_finite() || total <= 0.0 {
            return None;
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Some(Self { probs })
    }

    pub fn point_mass(vocab_size: usize, token: Token) -> Self {
        let mut probs = vec![0.0; vocab_size];
        probs[token.index()] = 1.0;
        Self { probs }
    }

    pub fn uniform(vocab_size: usize) -> Self {
        Self {
            probs: vec![1.0 / vocab_size as f64; vocab_size],
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.probs.len()
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Probability of `token`; zero for ids outside the vocabulary.
    pub fn prob(&self, token: Token) -> f64 {
        self.probs.get(token.index()).copied().unwrap_or(0.0)
    }

    /// Most probable token, ties broken toward the lowest id.
    pub fn argmax(&self) -> Token {
        let mut best = 0usize;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        Token(best as u32)
    }

    /// The `k` most probable tokens with non-zero mass, in descending order
    /// (ties toward the lowest id).
    pub fn top_k(&self, k: usize) -> Vec<Token> {
        let mut ids: Vec<usize> = (0..self.probs.len()).filter(|&i| self.probs[i] > 0.0).collect();
        ids.sort_by(|&a, &b| self.probs[b].total_cmp(&self.probs[a]).then(a.cmp(&b)));
        ids.truncate(k);
        ids.into_iter().map(|i| Token(i as u32)).collect()
    }

    pub fn is_point_mass(&self) -> bool {
        self.probs.iter().filter(|&&p| p > 0.0).count() == 1
    }

    /// Total variation distance to `other` (same vocabulary).
    pub fn total_variation(&self, other: &Distribution) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }
}

// ---------------------------------------------------------------------------
// Decode policy
// ---------------------------------------------------------------------------

/// Temperature and seed for one decode run. `temperature == 0` is greedy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodePolicy {
    pub temperature: f64,
    pub seed: u64,
}

impl DecodePolicy {
    pub fn greedy() -> Self {
        Self {
            temperature: 0.0,
            seed: 0,
        }
    }

    pub fn sampling(temperature: f64, seed: u64) -> Self {
        Self { temperature, seed }
    }

    pub fn is_greedy(&self) -> bool {
        self.temperature == 0.0
    }
}

impl Default for DecodePolicy {
    fn default() -> Self {
        Self::greedy()
    }
}

/// Applies the decode policy to a raw distribution.
///
/// Greedy collapses to a point mass on the argmax. Otherwise each
/// probability is raised to `1 / T` and renormalized, which is softmax of
/// the log-probabilities divided by `T`. Zero entries stay zero.
pub fn apply_policy(dist: &Distribution, policy: &DecodePolicy) -> Distribution {
    if policy.is_greedy() {
        return Distribution::point_mass(dist.vocab_size(), dist.argmax());
    }
    let t = policy.temperature;
    if t == 1.0 {
        return dist.clone();
    }
    let max_log = dist
        .probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|p| p.ln())
        .fold(f64::NEG_INFINITY, f64::max);
    let weights = dist
        .probs
        .iter()
        .map(|&p| if p > 0.0 { ((p.ln() - max_log) / t).exp() } else { 0.0 })
        .collect();
    // The argmax entry has weight exactly 1, so the total is never zero.
    Distribution::from_weights(weights).expect("argmax weight is 1")
}

/// Draws one token by inverse CDF over token-id order, consuming exactly one
/// uniform from `rng`.
pub fn sample(dist: &Distribution, rng: &mut DecodeRng) -> Token {
    let u = rng.next_uniform();
    sample_with_uniform(dist, u)
}

/// Inverse-CDF lookup for a fixed uniform `u ∈ [0, 1)`.
pub fn sample_with_uniform(dist: &Distribution, u: f64) -> Token {
    let mut cumulative = 0.0;
    let mut last_nonzero = 0usize;
    for (i, &p) in dist.probs.iter().enumerate() {
        if p > 0.0 {
            cumulative += p;
            last_nonzero = i;
            if u < cumulative {
                return Token(i as u32);
            }
        }
    }
    // Rounding can leave the cumulative sum a hair below u.
    Token(last_nonzero as u32)
}
