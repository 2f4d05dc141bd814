//! SAM with a model-based fallback: the SAM draft is used while the current
//! match is at least `threshold` tokens long, otherwise the fallback drafts.
//! Both components observe every step so their state stays current.

use crate::draft::{Capabilities, Draft, Method, Speculation};
use crate::rng::DecodeRng;
use crate::token::{Context, DecodePolicy, Token};

use super::{Drafter, Observation, SamDrafter};

/// Capability row of a SAM + fallback pair: it supports a mode only if both
/// do, and reuses context (through SAM).
pub(crate) fn combined_capabilities(primary: Capabilities, fallback: Capabilities) -> Capabilities {
    Capabilities {
        speculation: if fallback.speculation == Speculation::Tree {
            Speculation::Tree
        } else {
            primary.speculation
        },
        supports_greedy: primary.supports_greedy && fallback.supports_greedy,
        supports_sampling: primary.supports_sampling && fallback.supports_sampling,
        reuse: primary.reuse || fallback.reuse,
    }
}

#[derive(Debug)]
pub struct HybridDrafter {
    primary: SamDrafter,
    fallback: Box<dyn Drafter>,
    threshold: usize,
}

impl HybridDrafter {
    pub fn new(primary: SamDrafter, fallback: Box<dyn Drafter>, threshold: usize) -> Self {
        Self {
            primary,
            fallback,
            threshold,
        }
    }

    pub fn threshold(&self) -> usize {
        self.threshold
    }

    /// Whether the next proposal will come from SAM.
    pub fn uses_primary(&self) -> bool {
        self.primary.match_len() >= self.threshold
    }
}

impl Clone for HybridDrafter {
    fn clone(&self) -> Self {
        Self {
            primary: self.primary.clone(),
            fallback: self.fallback.box_clone(),
            threshold: self.threshold,
        }
    }
}

impl Drafter for HybridDrafter {
    fn method(&self) -> Method {
        Method::Hybrid
    }

    fn capabilities(&self) -> Capabilities {
        combined_capabilities(self.primary.capabilities(), self.fallback.capabilities())
    }

    fn default_budget(&self) -> usize {
        self.primary.default_budget().max(self.fallback.default_budget())
    }

    fn begin_turn(&mut self, prompt: &[Token]) {
        self.primary.begin_turn(prompt);
        self.fallback.begin_turn(prompt);
    }

    fn propose(
        &mut self,
        ctx: &Context,
        budget: usize,
        policy: &DecodePolicy,
        rng: &mut DecodeRng,
    ) -> Draft {
        if self.uses_primary() {
            let b = budget.min(self.primary.default_budget());
            self.primary.propose(ctx, b, policy, rng)
        } else {
            let b = budget.min(self.fallback.default_budget());
            self.fallback.propose(ctx, b, policy, rng)
        }
    }

    fn observe(&mut self, obs: &Observation<'_>) {
        self.primary.observe(obs);
        self.fallback.observe(obs);
    }

    fn match_len(&self) -> usize {
        self.primary.match_len()
    }

    fn box_clone(&self) -> Box<dyn Drafter> {
        Box::new(self.clone())
    }
}
