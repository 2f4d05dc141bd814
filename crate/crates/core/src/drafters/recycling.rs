//! Token recycling: an adjacency cache of the target's top-k next tokens,
//! refreshed from every target distribution the verifier computed, and
//! expanded breadth-first into a fixed-shape tree.

use std::collections::{HashMap, VecDeque};

use crate::draft::{Draft, DraftNode, Method, Speculation};
use crate::rng::DecodeRng;
use crate::token::{Context, DecodePolicy, Token};

use super::{Drafter, Observation, RecyclingParams};

/// Token → most likely next tokens, best first.
pub type RecyclingCache = HashMap<Token, Vec<Token>>;

/// Breadth-first tree from `root`: a node at depth `d` (first layer is 0)
/// gets the first `branch[d]` cached successors of its token. Expansion
/// stops at `depth` layers or `budget` nodes.
pub fn recycling_tree(
    cache: &RecyclingCache,
    root: Token,
    depth: usize,
    branch: &[usize],
    budget: usize,
) -> Draft {
    let mut draft = Draft::empty(Speculation::Tree, Method::Recycling);
    let mut queue: VecDeque<(Option<usize>, Token, usize)> = VecDeque::from([(None, root, 0)]);
    while let Some((parent, token, level)) = queue.pop_front() {
        if level >= depth {
            continue;
        }
        let width = branch.get(level).copied().unwrap_or(0);
        let Some(next) = cache.get(&token) else {
            continue;
        };
        for &t in next.iter().take(width) {
            if draft.len() >= budget {
                return draft;
            }
            draft.nodes.push(DraftNode {
                token: t,
                parent,
                q: 1.0,
                proposal: None,
            });
            queue.push_back((Some(draft.len() - 1), t, level + 1));
        }
    }
    draft
}

#[derive(Clone, Debug)]
pub struct RecyclingDrafter {
    params: RecyclingParams,
    cache: RecyclingCache,
}

impl RecyclingDrafter {
    pub fn new(params: RecyclingParams) -> Self {
        Self {
            params,
            cache: HashMap::new(),
        }
    }

    pub fn cache(&self) -> &RecyclingCache {
        &self.cache
    }

    /// Direct cache access, e.g. to pre-warm it.
    pub fn cache_mut(&mut self) -> &mut RecyclingCache {
        &mut self.cache
    }
}

impl Drafter for RecyclingDrafter {
    fn method(&self) -> Method {
        Method::Recycling
    }

    fn default_budget(&self) -> usize {
        self.params.budget
    }

    fn begin_turn(&mut self, _prompt: &[Token]) {
        if !self.params.persist_across_turns {
            self.cache.clear();
        }
    }

    fn propose(&mut self, ctx: &Context, budget: usize, _: &DecodePolicy, _: &mut DecodeRng) -> Draft {
        let Some(last) = ctx.last() else {
            return Draft::empty(Speculation::Tree, Method::Recycling);
        };
        let p = &self.params;
        recycling_tree(&self.cache, last, p.branch.len(), &p.branch, budget)
    }

    fn observe(&mut self, obs: &Observation<'_>) {
        for (key, dist) in obs.keyed_dists() {
            self.cache.insert(key, dist.top_k(self.params.top_k));
        }
    }

    fn box_clone(&self) -> Box<dyn Drafter> {
        Box::new(self.clone())
    }
}
