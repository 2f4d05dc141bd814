//! Lookahead-style n-gram pool harvested from the model's own recent output.
//!
//! Every generated token is pushed into an n-gram table restricted to a
//! rolling window. At draft time all pooled continuations of the matched
//! key (most recent first) are merged into one tree and verified together.

use std::collections::HashSet;

use crate::draft::{Draft, Method, Speculation};
use crate::index::NgramTable;
use crate::rng::DecodeRng;
use crate::token::{Context, DecodePolicy, Token};

use super::{Drafter, LookaheadParams, Observation};

/// Eviction runs when the stale prefix grows past this many tokens.
const EVICT_SLACK: usize = 64;

#[derive(Clone, Debug)]
pub struct LookaheadDrafter {
    params: LookaheadParams,
    pool: NgramTable,
    evicted_to: usize,
}

impl LookaheadDrafter {
    pub fn new(params: LookaheadParams) -> Self {
        let pool = NgramTable::new(params.min_n, params.max_n);
        Self {
            params,
            pool,
            evicted_to: 0,
        }
    }

    pub fn pool_len(&self) -> usize {
        self.pool.len()
    }
}

impl Drafter for LookaheadDrafter {
    fn method(&self) -> Method {
        Method::Lookahead
    }

    fn default_budget(&self) -> usize {
        self.params.budget
    }

    fn begin_turn(&mut self, _prompt: &[Token]) {}

    fn propose(&mut self, ctx: &Context, budget: usize, _: &DecodePolicy, _: &mut DecodeRng) -> Draft {
        let Some(m) = self.pool.lookup(ctx.tokens()) else {
            return Draft::empty(Speculation::Tree, Method::Lookahead);
        };
        let mut seen = HashSet::new();
        let mut paths: Vec<&[Token]> = Vec::new();
        for &pos in m.positions.iter().rev() {
            let cont = self.pool.continuation(pos, self.params.level);
            if seen.insert(cont) {
                paths.push(cont);
                if paths.len() == self.params.candidates {
                    break;
                }
            }
        }
        Draft::tree_from_paths(Method::Lookahead, paths, budget).with_match_len(m.key_len)
    }

    fn observe(&mut self, obs: &Observation<'_>) {
        for &t in obs.emitted {
            self.pool.push(t);
        }
        let keep_from = self.pool.len().saturating_sub(self.params.window);
        if keep_from >= self.evicted_to + EVICT_SLACK {
            self.pool.evict_before(keep_from);
            self.evicted_to = keep_from;
        }
    }

    fn box_clone(&self) -> Box<dyn Drafter> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::tokens;

    fn feed(d: &mut LookaheadDrafter, toks: &[u32]) {
        let toks = tokens(toks);
        d.observe(&Observation {
            prev_token: Token(0),
            emitted: &toks,
            target_dists: &[],
        });
    }

    #[test]
    fn drafts_all_pooled_continuations() {
        let mut d = LookaheadDrafter::new(LookaheadParams {
            level: 2,
            ..Default::default()
        });
        feed(&mut d, &[4, 1, 2, 9, 4, 1, 3, 9, 4, 1, 5]);
        let ctx = Context::from_prompt(&tokens(&[7, 9, 4]));
        let draft = d.propose(&ctx, 16, &DecodePolicy::greedy(), &mut DecodeRng::new(0));
        draft.validate(16).unwrap();
        assert_eq!(draft.match_len, 2);
        // Most recent occurrence of [9, 4] first.
        assert_eq!(draft.tokens(), tokens(&[1, 5]));
        assert_eq!(draft.len(), 3);
        let prompt_only = Context::from_prompt(&tokens(&[5]));
        assert!(d
            .propose(&prompt_only, 16, &DecodePolicy::greedy(), &mut DecodeRng::new(0))
            .is_empty());
    }

    #[test]
    fn window_forgets_old_ngrams() {
        let mut d = LookaheadDrafter::new(LookaheadParams {
            window: 8,
            ..Default::default()
        });
        feed(&mut d, &[50, 51]);
        let filler: Vec<u32> = (0..200).map(|i| i % 7).collect();
        feed(&mut d, &filler);
        let ctx = Context::from_prompt(&tokens(&[50]));
        assert!(d
            .propose(&ctx, 16, &DecodePolicy::greedy(), &mut DecodeRng::new(0))
            .is_empty());
    }
}
