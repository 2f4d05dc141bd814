//! Standard speculative sampling: a small homologous model drafts a chain.

use crate::draft::{Draft, Method};
use crate::oracle::SharedOracle;
use crate::rng::DecodeRng;
use crate::token::{apply_policy, sample, Context, DecodePolicy, Token};

use super::{Drafter, Observation};

#[derive(Clone, Debug)]
pub struct SpsDrafter {
    small: SharedOracle,
    budget: usize,
}

impl SpsDrafter {
    pub fn new(small: SharedOracle, budget: usize) -> Self {
        Self { small, budget }
    }
}

impl Drafter for SpsDrafter {
    fn method(&self) -> Method {
        Method::Sps
    }

    fn default_budget(&self) -> usize {
        self.budget
    }

    fn begin_turn(&mut self, _prompt: &[Token]) {}

    fn propose(
        &mut self,
        ctx: &Context,
        budget: usize,
        policy: &DecodePolicy,
        rng: &mut DecodeRng,
    ) -> Draft {
        let mut scratch = ctx.clone();
        let mut drawn = Vec::with_capacity(budget);
        for _ in 0..budget {
            // Running past the small model's context limit just ends the chain.
            let Ok(raw) = self.small.next_dist(&scratch) else {
                break;
            };
            let q = apply_policy(&raw, policy);
            let t = if policy.is_greedy() { q.argmax() } else { sample(&q, rng) };
            scratch.push(t);
            drawn.push((t, q));
        }
        Draft::linear_with_proposals(Method::Sps, drawn)
    }

    fn observe(&mut self, _obs: &Observation<'_>) {}

    fn box_clone(&self) -> Box<dyn Drafter> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::SyntheticOracleSpec;
    use crate::token::{tokens, Distribution};

    fn small() -> SharedOracle {
        SyntheticOracleSpec::HashedMarkov {
            vocab_size: 6,
            order: 1,
            seed: 4,
            sharpness: 1.5,
        }
        .build(1 << 12)
        .unwrap()
    }

    #[test]
    fn greedy_chain_follows_small_argmax_with_unit_q() {
        let oracle = small();
        let mut d = SpsDrafter::new(oracle.clone(), 5);
        let ctx = Context::from_prompt(&tokens(&[1, 2]));
        let mut rng = DecodeRng::new(0);
        let draft = d.propose(&ctx, 5, &DecodePolicy::greedy(), &mut rng);
        assert_eq!(draft.len(), 5);
        assert_eq!(rng.draws(), 0);
        let mut scratch = ctx.clone();
        for node in &draft.nodes {
            let expect = oracle.next_dist(&scratch).unwrap().argmax();
            assert_eq!(node.token, expect);
            assert_eq!(node.q, 1.0);
            scratch.push(node.token);
        }
    }

    #[test]
    fn sampled_q_matches_tempered_small_model() {
        let oracle = small();
        let mut d = SpsDrafter::new(oracle.clone(), 4);
        let ctx = Context::from_prompt(&tokens(&[3]));
        let policy = DecodePolicy::sampling(0.7, 1);
        let mut rng = DecodeRng::new(9);
        let draft = d.propose(&ctx, 4, &policy, &mut rng);
        assert_eq!(rng.draws(), 4);
        let mut scratch = ctx.clone();
        for node in &draft.nodes {
            let q: Distribution = apply_policy(&oracle.next_dist(&scratch).unwrap(), &policy);
            assert!((node.q - q.prob(node.token)).abs() < 1e-15);
            assert_eq!(node.proposal.as_ref(), Some(&q));
            scratch.push(node.token);
        }
    }
}
