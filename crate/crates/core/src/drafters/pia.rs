//! Trie-cached context drafting.
//!
//! Every token of every prompt and generation is streamed into a frequency
//! trie: each position opens a window that grows by one node per following
//! token until it reaches `window` tokens, so every substring of at most
//! `window` tokens is a root path whose frequency counts its occurrences.
//! Drafts are the most frequent continuations below the longest matching
//! context suffix.

use std::collections::HashSet;

use crate::draft::{Draft, DraftNode, Method, Speculation};
use crate::index::{ContextTrie, NodeId};
use crate::rng::DecodeRng;
use crate::token::{Context, DecodePolicy, Token};

use super::{Drafter, Observation, PiaParams};

#[derive(Clone, Debug)]
pub struct PiaDrafter {
    params: PiaParams,
    trie: ContextTrie,
    /// Open windows, oldest first.
    cursors: Vec<NodeId>,
}

impl PiaDrafter {
    pub fn new(params: PiaParams) -> Self {
        let trie = ContextTrie::new(params.capacity);
        Self {
            params,
            trie,
            cursors: Vec::new(),
        }
    }

    pub fn trie(&self) -> &ContextTrie {
        &self.trie
    }

    fn ingest(&mut self, toks: &[Token]) {
        for &t in toks {
            let root = self.trie.root();
            self.cursors.push(root);
            for c in &mut self.cursors {
                *c = self.trie.extend_child(*c, t);
            }
            let window = self.params.window;
            let trie = &self.trie;
            self.cursors.retain(|&c| trie.depth(c) < window);
        }
        if self.trie.over_capacity() {
            // Headroom so pruning does not run on every token once full.
            let target = self.params.capacity - self.params.capacity / 8;
            let removed: HashSet<NodeId> = self.trie.prune_to(target).into_iter().collect();
            self.cursors.retain(|c| !removed.contains(c));
        }
    }
}

impl Drafter for PiaDrafter {
    fn method(&self) -> Method {
        Method::Pia
    }

    fn default_budget(&self) -> usize {
        self.params.budget
    }

    fn begin_turn(&mut self, prompt: &[Token]) {
        self.ingest(prompt);
    }

    fn propose(&mut self, ctx: &Context, budget: usize, _: &DecodePolicy, _: &mut DecodeRng) -> Draft {
        let found = self.trie.lookup(ctx.tokens(), self.params.max_key, budget);
        let mut draft = Draft::empty(Speculation::Tree, Method::Pia);
        draft.match_len = found.match_len;
        draft.nodes = found
            .nodes
            .into_iter()
            .map(|n| DraftNode {
                token: n.token,
                parent: n.parent,
                q: 1.0,
                proposal: None,
            })
            .collect();
        draft
    }

    fn observe(&mut self, obs: &Observation<'_>) {
        self.ingest(obs.emitted);
    }

    fn box_clone(&self) -> Box<dyn Drafter> {
        Box::new(self.clone())
    }
}
