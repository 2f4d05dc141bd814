//! The target-model abstraction and its synthetic stand-ins.
//!
//! A [`TokenOracle`] maps a context to the next-token distribution. It is the
//! only thing the verifier trusts: whatever the drafter proposes, emitted
//! tokens follow the oracle's distribution.

use std::fmt;
use std::sync::Arc;

use crate::token::{Context, Distribution};

mod synthetic;

pub use synthetic::{
    CopyMixOracle, CyclicOracle, HashedMarkovOracle, OracleSpecError, PerturbedOracle,
    SyntheticOracleSpec, DEFAULT_MAX_CONTEXT,
};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("oracle queried with an empty context")]
    EmptyContext,
    #[error("context of {len} tokens exceeds the configured maximum of {max}")]
    ContextTooLong { len: usize, max: usize },
}

/// Next-token probability oracle. Implementations are immutable after
/// construction and safe to query from several threads.
pub trait TokenOracle: Send + Sync + fmt::Debug {
    fn vocab_size(&self) -> usize;

    /// Raw (untempered) next-token distribution for `ctx`. Deterministic in
    /// `(self, ctx)`.
    fn next_dist(&self, ctx: &Context) -> Result<Distribution, OracleError>;
}

impl<T: TokenOracle + ?Sized> TokenOracle for Arc<T> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_dist(&self, ctx: &Context) -> Result<Distribution, OracleError> {
        (**self).next_dist(ctx)
    }
}

impl<T: TokenOracle + ?Sized> TokenOracle for Box<T> {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_dist(&self, ctx: &Context) -> Result<Distribution, OracleError> {
        (**self).next_dist(ctx)
    }
}

/// Shared handle used by drafters and the harness.
pub type SharedOracle = Arc<dyn TokenOracle>;

/// Common precondition check for oracle queries.
pub(crate) fn check_context(ctx: &Context, max_len: usize) -> Result<(), OracleError> {
    if ctx.is_empty() {
        return Err(OracleError::EmptyContext);
    }
    if ctx.len() > max_len {
        return Err(OracleError::ContextTooLong {
            len: ctx.len(),
            max: max_len,
        });
    }
    Ok(())
}
