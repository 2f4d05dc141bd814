//! Prompt lookup: match the context tail against n-grams of the current
//! prompt and copy what followed.

use crate::draft::{Draft, Method};
use crate::index::NgramTable;
use crate::rng::DecodeRng;
use crate::token::{Context, DecodePolicy, Token};

use super::{Drafter, Observation};

#[derive(Clone, Debug)]
pub struct PldDrafter {
    budget: usize,
    table: NgramTable,
}

impl PldDrafter {
    pub fn new(min_n: usize, max_n: usize, budget: usize) -> Self {
        Self {
            budget,
            table: NgramTable::new(min_n, max_n),
        }
    }
}

impl Drafter for PldDrafter {
    fn method(&self) -> Method {
        Method::Pld
    }

    fn default_budget(&self) -> usize {
        self.budget
    }

    fn begin_turn(&mut self, prompt: &[Token]) {
        let (lo, hi) = self.table.range();
        self.table = NgramTable::build(lo, hi, prompt);
    }

    fn propose(&mut self, ctx: &Context, budget: usize, _: &DecodePolicy, _: &mut DecodeRng) -> Draft {
        let Some(m) = self.table.lookup(ctx.tokens()) else {
            return Draft::linear(Method::Pld, &[]);
        };
        let cont = self.table.continuation(m.positions[0], budget);
        Draft::linear(Method::Pld, cont).with_match_len(m.key_len)
    }

    fn observe(&mut self, _obs: &Observation<'_>) {}

    fn box_clone(&self) -> Box<dyn Drafter> {
        Box::new(self.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::token::tokens;

    fn propose(d: &mut PldDrafter, ctx: &[u32], budget: usize) -> Vec<Token> {
        let ctx = Context::from_prompt(&tokens(ctx));
        d.propose(&ctx, budget, &DecodePolicy::greedy(), &mut DecodeRng::new(0))
            .tokens()
    }

    #[test]
    fn copies_from_earliest_prompt_match() {
        let mut d = PldDrafter::new(1, 3, 16);
        d.begin_turn(&tokens(&[5, 6, 7, 8, 5, 6, 9]));
        assert_eq!(propose(&mut d, &[1, 5, 6], 3), tokens(&[7, 8, 5]));
        assert_eq!(propose(&mut d, &[1, 5, 6], 16), tokens(&[7, 8, 5, 6, 9]));
        assert!(propose(&mut d, &[4], 3).is_empty());
    }

    #[test]
    fn only_current_prompt_is_indexed() {
        let mut d = PldDrafter::new(1, 3, 16);
        d.begin_turn(&tokens(&[1, 2, 3]));
        assert_eq!(propose(&mut d, &[1], 2), tokens(&[2, 3]));
        d.begin_turn(&tokens(&[7, 8]));
        assert!(propose(&mut d, &[1], 2).is_empty());
    }
}
