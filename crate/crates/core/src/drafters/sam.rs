//! Suffix-automaton drafter over the full prompt + generation history.

use crate::draft::{Draft, Method};
use crate::index::SuffixAutomaton;
use crate::rng::DecodeRng;
use crate::token::{Context, DecodePolicy, Token};

use super::{Drafter, Observation};

#[derive(Clone, Debug)]
pub struct SamDrafter {
    budget: usize,
    sam: SuffixAutomaton,
}

impl SamDrafter {
    pub fn new(budget: usize) -> Self {
        Self {
            budget,
            sam: SuffixAutomaton::new(),
        }
    }

    pub fn automaton(&self) -> &SuffixAutomaton {
        &self.sam
    }
}

impl Drafter for SamDrafter {
    fn method(&self) -> Method {
        Method::Sam
    }

    fn default_budget(&self) -> usize {
        self.budget
    }

    fn begin_turn(&mut self, prompt: &[Token]) {
        for &t in prompt {
            self.sam.extend(t);
        }
    }

    fn propose(&mut self, _: &Context, budget: usize, _: &DecodePolicy, _: &mut DecodeRng) -> Draft {
        Draft::linear(Method::Sam, &self.sam.continuation(budget)).with_match_len(self.sam.match_len())
    }

    fn observe(&mut self, obs: &Observation<'_>) {
        for &t in obs.emitted {
            self.sam.extend(t);
        }
    }

    fn match_len(&self) -> usize {
        self.sam.match_len()
    }

    fn box_clone(&self) -> Box<dyn Drafter> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::tokens;

    #[test]
    fn history_persists_across_turns() {
        let mut d = SamDrafter::new(40);
        d.begin_turn(&tokens(&[1, 2, 3, 4]));
        let out = tokens(&[5, 6]);
        d.observe(&Observation {
            prev_token: Token(4),
            emitted: &out,
            target_dists: &[],
        });
        d.begin_turn(&tokens(&[9, 3, 4]));
        assert_eq!(d.match_len(), 2);
        let ctx = Context::from_prompt(&tokens(&[9, 3, 4]));
        let draft = d.propose(&ctx, 3, &DecodePolicy::greedy(), &mut DecodeRng::new(0));
        assert_eq!(draft.tokens(), tokens(&[5, 6, 9]));
        assert_eq!(draft.match_len, 2);
    }
}
