//! Retrieval drafting from a fixed corpus.

use std::sync::Arc;

use crate::draft::{Draft, Method, Speculation};
use crate::index::CorpusDatastore;
use crate::rng::DecodeRng;
use crate::token::{Context, DecodePolicy, Token};

use super::{Drafter, Observation, RestParams};

#[derive(Clone, Debug)]
pub struct RestDrafter {
    store: Arc<CorpusDatastore>,
    params: RestParams,
}

impl RestDrafter {
    pub fn new(store: Arc<CorpusDatastore>, params: RestParams) -> Self {
        Self { store, params }
    }
}

impl Drafter for RestDrafter {
    fn method(&self) -> Method {
        Method::Rest
    }

    fn default_budget(&self) -> usize {
        self.params.budget
    }

    fn begin_turn(&mut self, _prompt: &[Token]) {}

    fn propose(&mut self, ctx: &Context, budget: usize, _: &DecodePolicy, _: &mut DecodeRng) -> Draft {
        let p = &self.params;
        // An empty corpus cannot be built through the config path; treat it as no match.
        let Ok(found) = self.store.retrieve(ctx.tokens(), p.k, p.max_suffix, p.max_len) else {
            return Draft::empty(Speculation::Tree, Method::Rest);
        };
        Draft::tree_from_paths(
            Method::Rest,
            found.continuations.iter().map(Vec::as_slice),
            budget,
        )
        .with_match_len(found.match_len)
    }

    fn observe(&mut self, _obs: &Observation<'_>) {}

    fn box_clone(&self) -> Box<dyn Drafter> {
        Box::new(self.clone())
    }
}
