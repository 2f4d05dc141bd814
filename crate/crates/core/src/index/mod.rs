//! Reuse indexes behind the n-gram drafters.
//!
//! - [`SuffixAutomaton`]: online longest-repeated-suffix matching.
//! - [`ContextTrie`]: frequency trie of context windows.
//! - [`NgramTable`]: exact n-gram to continuation-position map.
//! - [`CorpusDatastore`]: suffix-array index over an external corpus.

pub mod datastore;
pub mod ngram;
pub mod sam;
pub mod trie;

pub use datastore::{CorpusDatastore, DatastoreError, Retrieval};
pub use ngram::{NgramMatch, NgramTable};
pub use sam::SuffixAutomaton;
pub use trie::{CandidateNode, ContextTrie, NodeId, TrieCandidates};
