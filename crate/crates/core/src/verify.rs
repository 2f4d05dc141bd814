//! Lossless verification of drafts against the target oracle.
//!
//! Verification is split in two so the engine can time the phases apart:
//! [`evaluate`] runs the target over every draft position (the "forward
//! pass"), then [`verify_greedy_evaluated`] or [`verify_sampling_evaluated`]
//! decides what to keep.
//!
//! Greedy: walk down the tree following the child whose token equals the
//! target argmax; the bonus is the argmax where the walk stops.
//!
//! Sampling: at each position try the children in order. A child `x` with
//! proposal `q` is accepted with probability `min(1, p(x) / q(x))`; on
//! rejection the target becomes `normalize(max(p - q, 0))` for the next
//! sibling. Nodes without a full proposal act as a point mass on their
//! token. When no child survives, the bonus is drawn from what remains of
//! `p`. Each sibling test consumes one uniform and the bonus one more.

use crate::draft::Draft;
use crate::oracle::{OracleError, TokenOracle};
use crate::rng::DecodeRng;
use crate::token::{apply_policy, sample, Context, DecodePolicy, Distribution, Token};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("draft node {node} proposes token {token} with zero proposal probability")]
    InvalidProposal { node: usize, token: Token },
    #[error("greedy verification requires temperature 0, got {0}")]
    NotGreedy(f64),
    #[error("sampling verification requires temperature > 0")]
    NotSampling,
}

/// Raw target distributions for one draft: after the context itself and
/// after each node's path.
#[derive(Clone, Debug, PartialEq)]
pub struct DraftEvaluation {
    pub root: Distribution,
    pub nodes: Vec<Distribution>,
}

impl DraftEvaluation {
    fn at(&self, node: Option<usize>) -> &Distribution {
        match node {
            None => &self.root,
            Some(i) => &self.nodes[i],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOutcome {
    /// Draft tokens kept, in order.
    pub accepted: Vec<Token>,
    /// Token produced by the target where verification stopped.
    pub bonus: Token,
    /// `accepted.len() + 1`.
    pub accepted_count: usize,
    /// Raw target distributions along the accepted path; entry `j` is the
    /// distribution that emitted token `j` (the last one emitted the bonus).
    pub target_dists: Vec<Distribution>,
    /// Draft node indices of the accepted tokens.
    pub accepted_nodes: Vec<usize>,
}

impl VerifyOutcome {
    /// Accepted tokens followed by the bonus.
    pub fn emitted(&self) -> Vec<Token> {
        let mut out = self.accepted.clone();
        out.push(self.bonus);
        out
    }

    fn finish(
        accepted_nodes: Vec<usize>,
        draft: &Draft,
        eval: &DraftEvaluation,
        bonus: Token,
    ) -> Self {
        let accepted: Vec<Token> = accepted_nodes.iter().map(|&i| draft.nodes[i].token).collect();
        let mut target_dists = Vec::with_capacity(accepted.len() + 1);
        target_dists.push(eval.root.clone());
        target_dists.extend(accepted_nodes.iter().map(|&i| eval.nodes[i].clone()));
        Self {
            accepted_count: accepted.len() + 1,
            accepted,
            bonus,
            target_dists,
            accepted_nodes,
        }
    }
}

/// Target distributions for the context and every draft node. One call is
/// one batched target evaluation.
pub fn evaluate(
    oracle: &dyn TokenOracle,
    ctx: &Context,
    draft: &Draft,
) -> Result<DraftEvaluation, OracleError> {
    let root = oracle.next_dist(ctx)?;
    let mut scratch = ctx.clone();
    let base = ctx.len();
    let mut nodes = Vec::with_capacity(draft.len());
    for i in 0..draft.len() {
        scratch.truncate(base);
        scratch.extend_from_slice(&draft.path(i));
        nodes.push(oracle.next_dist(&scratch)?);
    }
    Ok(DraftEvaluation { root, nodes })
}

/// Exact-match verification under greedy decoding.
pub fn verify_greedy_evaluated(draft: &Draft, eval: &DraftEvaluation) -> VerifyOutcome {
    let children = draft.child_lists();
    let root = draft.len();
    let mut at: Option<usize> = None;
    let mut path = Vec::new();
    loop {
        let target = eval.at(at).argmax();
        let next = children[at.unwrap_or(root)]
            .iter()
            .copied()
            .find(|&c| draft.nodes[c].token == target);
        match next {
            Some(c) => {
                path.push(c);
                at = Some(c);
            }
            None => return VerifyOutcome::finish(path, draft, eval, target),
        }
    }
}

/// `normalize(max(p - q, 0))`; returns `p` when the difference has no mass.
pub fn residual(p: &Distribution, q: &Distribution) -> Distribution {
    let diff: Vec<f64> = p
        .probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| (a - b).max(0.0))
        .collect();
    Distribution::from_weights(diff).unwrap_or_else(|| p.clone())
}

/// Removes a point-mass proposal on `token` from `p`.
fn residual_point(p: &Distribution, token: Token) -> Distribution {
    let mut w = p.probs().to_vec();
    w[token.index()] = 0.0;
    Distribution::from_weights(w).unwrap_or_else(|| p.clone())
}

/// Speculative rejection sampling (linear, or recursive over siblings for trees).
pub fn verify_sampling_evaluated(
    draft: &Draft,
    eval: &DraftEvaluation,
    policy: &DecodePolicy,
    rng: &mut DecodeRng,
) -> Result<VerifyOutcome, VerifyError> {
    if policy.is_greedy() {
        return Err(VerifyError::NotSampling);
    }
    let children = draft.child_lists();
    let root = draft.len();
    let mut at: Option<usize> = None;
    let mut path = Vec::new();
    loop {
        let mut target = apply_policy(eval.at(at), policy);
        let mut accepted = None;
        for &c in &children[at.unwrap_or(root)] {
            let node = &draft.nodes[c];
            let x = node.token;
            let qx = match &node.proposal {
                Some(q) => q.prob(x),
                None => 1.0,
            };
            if qx <= 0.0 {
                return Err(VerifyError::InvalidProposal { node: c, token: x });
            }
            let u = rng.next_uniform();
            if u * qx < target.prob(x) {
                accepted = Some(c);
                break;
            }
            target = match &node.proposal {
                Some(q) => residual(&target, q),
                None => residual_point(&target, x),
            };
        }
        match accepted {
            Some(c) => {
                path.push(c);
                at = Some(c);
            }
            None => {
                let bonus = sample(&target, rng);
                return Ok(VerifyOutcome::finish(path, draft, eval, bonus));
            }
        }
    }
}

/// Greedy verification including the target evaluation.
pub fn verify_greedy(
    ctx: &Context,
    draft: &Draft,
    oracle: &dyn TokenOracle,
    policy: &DecodePolicy,
) -> Result<VerifyOutcome, VerifyError> {
    if !policy.is_greedy() {
        return Err(VerifyError::NotGreedy(policy.temperature));
    }
    let eval = evaluate(oracle, ctx, draft)?;
    Ok(verify_greedy_evaluated(draft, &eval))
}

/// Sampling verification including the target evaluation.
pub fn verify_sampling(
    ctx: &Context,
    draft: &Draft,
    oracle: &dyn TokenOracle,
    policy: &DecodePolicy,
    rng: &mut DecodeRng,
) -> Result<VerifyOutcome, VerifyError> {
    if policy.is_greedy() {
        return Err(VerifyError::NotSampling);
    }
    let eval = evaluate(oracle, ctx, draft)?;
    verify_sampling_evaluated(draft, &eval, policy, rng)
}

/// Dispatches on the policy: greedy at `T = 0`, sampling otherwise.
pub fn verify_evaluated(
    draft: &Draft,
    eval: &DraftEvaluation,
    policy: &DecodePolicy,
    rng: &mut DecodeRng,
) -> Result<VerifyOutcome, VerifyError> {
    if policy.is_greedy() {
        Ok(verify_greedy_evaluated(draft, eval))
    } else {
        verify_sampling_evaluated(draft, eval, policy, rng)
    }
}
