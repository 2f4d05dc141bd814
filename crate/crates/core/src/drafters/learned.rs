//! Learned-slot tree drafter: expands the small model's top-k at every
//! depth into a static-shape tree. Children are deterministic, so the
//! verifier treats each node as a point-mass proposal.

use std::collections::VecDeque;

use crate::draft::{Draft, DraftNode, Method, Speculation};
use crate::oracle::SharedOracle;
use crate::rng::DecodeRng;
use crate::token::{Context, DecodePolicy, Token};

use super::{Drafter, Observation};

#[derive(Clone, Debug)]
pub struct LearnedTreeDrafter {
    small: SharedOracle,
    budget: usize,
    branch: Vec<usize>,
}

impl LearnedTreeDrafter {
    pub fn new(small: SharedOracle, budget: usize, branch: Vec<usize>) -> Self {
        Self {
            small,
            budget,
            branch,
        }
    }
}

impl Drafter for LearnedTreeDrafter {
    fn method(&self) -> Method {
        Method::Eagle
    }

    fn default_budget(&self) -> usize {
        self.budget
    }

    fn begin_turn(&mut self, _prompt: &[Token]) {}

    fn propose(&mut self, ctx: &Context, budget: usize, _: &DecodePolicy, _: &mut DecodeRng) -> Draft {
        let mut draft = Draft::empty(Speculation::Tree, Method::Eagle);
        let mut queue: VecDeque<(Option<usize>, usize)> = VecDeque::from([(None, 0)]);
        let mut scratch = ctx.clone();
        let base = ctx.len();
        while let Some((parent, depth)) = queue.pop_front() {
            let Some(&width) = self.branch.get(depth) else {
                continue;
            };
            scratch.truncate(base);
            if let Some(p) = parent {
                scratch.extend_from_slice(&draft.path(p));
            }
            let Ok(dist) = self.small.next_dist(&scratch) else {
                continue;
            };
            for t in dist.top_k(width) {
                if draft.len() >= budget {
                    return draft;
                }
                draft.nodes.push(DraftNode {
                    token: t,
                    parent,
                    q: dist.prob(t),
                    proposal: None,
                });
                queue.push_back((Some(draft.len() - 1), depth + 1));
            }
        }
        draft
    }

    fn observe(&mut self, _obs: &Observation<'_>) {}

    fn box_clone(&self) -> Box<dyn Drafter> {
        Box::new(self.clone())
    }
}
