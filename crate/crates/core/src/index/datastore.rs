//! Immutable retrieval corpus indexed by a suffix array.
//!
//! On-disk formats (see README):
//! - text: token ids as ASCII decimal separated by any whitespace;
//! - binary: magic `SBDS`, `u32` format version (1), `u64` token count, then
//!   one `u32` per token, all little-endian.

use std::cmp::Ordering;
use std::fs;
use std::path::Path;

use crate::token::Token;

pub const BINARY_MAGIC: &[u8; 4] = b"SBDS";
pub const BINARY_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum DatastoreError {
    #[error("datastore is empty")]
    EmptyDatastore,
    #[error("failed to read datastore: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed datastore: {0}")]
    Format(String),
}

/// Continuations retrieved for one query.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct Retrieval {
    /// Length of the longest suffix of the query found in the corpus.
    pub match_len: usize,
    /// Distinct continuations, ordered by corpus position of the match.
    pub continuations: Vec<Vec<Token>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CorpusDatastore {
    corpus: Vec<Token>,
    suffix_array: Vec<u32>,
}

impl CorpusDatastore {
    pub fn new(corpus: Vec<Token>) -> Self {
        let suffix_array = build_suffix_array(&corpus);
        Self {
            corpus,
            suffix_array,
        }
    }

    pub fn corpus(&self) -> &[Token] {
        &self.corpus
    }

    pub fn suffix_array(&self) -> &[u32] {
        &self.suffix_array
    }

    pub fn len(&self) -> usize {
        self.corpus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.corpus.is_empty()
    }

    /// Loads either format, sniffing the binary magic.
    pub fn load(path: &Path) -> Result<Self, DatastoreError> {
        let bytes = fs::read(path)?;
        if bytes.starts_with(BINARY_MAGIC) {
            Self::from_binary(&bytes)
        } else {
            let text = String::from_utf8(bytes)
                .map_err(|_| DatastoreError::Format("text datastore is not UTF-8".into()))?;
            Self::from_text(&text)
        }
    }

    pub fn from_text(text: &str) -> Result<Self, DatastoreError> {
        let corpus = text
            .split_whitespace()
            .map(|w| {
                w.parse::<u32>()
                    .map(Token)
                    .map_err(|_| DatastoreError::Format(format!("bad token id {w:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self::new(corpus))
    }

    pub fn from_binary(bytes: &[u8]) -> Result<Self, DatastoreError> {
        let header = 4 + 4 + 8;
        if bytes.len() < header || &bytes[..4] != BINARY_MAGIC {
            return Err(DatastoreError::Format("missing SBDS header".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != BINARY_VERSION {
            return Err(DatastoreError::Format(format!("unsupported version {version}")));
        }
        let count = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let body = &bytes[header..];
        if body.len() != count * 4 {
            return Err(DatastoreError::Format(format!(
                "expected {count} tokens, found {} bytes",
                body.len()
            )));
        }
        let corpus = body
            .chunks_exact(4)
            .map(|c| Token(u32::from_le_bytes(c.try_into().unwrap())))
            .collect();
        Ok(Self::new(corpus))
    }

    pub fn to_binary(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 4 * self.corpus.len());
        out.extend_from_slice(BINARY_MAGIC);
        out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.corpus.len() as u64).to_le_bytes());
        for t in &self.corpus {
            out.extend_from_slice(&t.0.to_le_bytes());
        }
        out
    }

    pub fn to_text(&self) -> String {
        let ids: Vec<String> = self.corpus.iter().map(|t| t.0.to_string()).collect();
        ids.join(" ")
    }

    /// Suffix-array interval of suffixes starting with `pattern`.
    fn interval(&self, pattern: &[Token]) -> (usize, usize) {
        let cmp = |&start: &u32| -> Ordering {
            let suffix = &self.corpus[start as usize..];
            let head = &suffix[..suffix.len().min(pattern.len())];
            match head.cmp(pattern) {
                // A proper prefix of the pattern sorts before it.
                Ordering::Equal if head.len() < pattern.len() => Ordering::Less,
                other => other,
            }
        };
        let lo = self.suffix_array.partition_point(|s| cmp(s) == Ordering::Less);
        let hi = self.suffix_array.partition_point(|s| cmp(s) != Ordering::Greater);
        (lo, hi)
    }

    /// Start positions of every occurrence of `pattern`, ascending.
    pub fn occurrences(&self, pattern: &[Token]) -> Vec<usize> {
        if pattern.is_empty() {
            return Vec::new();
        }
        let (lo, hi) = self.interval(pattern);
        let mut starts: Vec<usize> = self.suffix_array[lo..hi].iter().map(|&s| s as usize).collect();
        starts.sort_unstable();
        starts
    }

    /// Continuations following the longest suffix of `tail` (at most
    /// `max_suffix` tokens) that occurs in the corpus with at least one
    /// following token. Up to `k` distinct continuations of at most
    /// `max_len` tokens, ordered by corpus position.
    pub fn retrieve(
        &self,
        tail: &[Token],
        k: usize,
        max_suffix: usize,
        max_len: usize,
    ) -> Result<Retrieval, DatastoreError> {
        if self.corpus.is_empty() {
            return Err(DatastoreError::EmptyDatastore);
        }
        let longest = max_suffix.min(tail.len());
        for m in (1..=longest).rev() {
            let key = &tail[tail.len() - m..];
            let mut continuations: Vec<Vec<Token>> = Vec::new();
            for start in self.occurrences(key) {
                let from = start + m;
                if from >= self.corpus.len() {
                    continue;
                }
                let to = (from + max_len).min(self.corpus.len());
                let cont = &self.corpus[from..to];
                if !continuations.iter().any(|c| c == cont) {
                    continuations.push(cont.to_vec());
                    if continuations.len() == k {
                        break;
                    }
                }
            }
            if !continuations.is_empty() {
                return Ok(Retrieval {
                    match_len: m,
                    continuations,
                });
            }
        }
        Ok(Retrieval::default())
    }
}

/// Prefix-doubling suffix array, O(n log² n).
pub fn build_suffix_array(text: &[Token]) -> Vec<u32> {
    let n = text.len();
    let mut sa: Vec<u32> = (0..n as u32).collect();
    if n <= 1 {
        return sa;
    }
    let mut rank: Vec<i64> = text.iter().map(|t| t.0 as i64).collect();
    let mut next = vec![0i64; n];
    let mut k = 1usize;
    loop {
        let key = |i: u32| {
            let i = i as usize;
            (rank[i], if i + k < n { rank[i + k] } else { -1 })
        };
        sa.sort_unstable_by_key(|&i| key(i));
        next[sa[0] as usize] = 0;
        for w in 1..n {
            let bump = (key(sa[w - 1]) != key(sa[w])) as i64;
            next[sa[w] as usize] = next[sa[w - 1] as usize] + bump;
        }
        std::mem::swap(&mut rank, &mut next);
        if rank[sa[n - 1] as usize] as usize == n - 1 {
            break;
        }
        k *= 2;
    }
    sa
}
