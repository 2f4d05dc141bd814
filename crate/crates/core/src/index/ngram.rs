//! N-gram occurrence table.
//!
//! Maps every n-gram (n in `[min_n, max_n]`) of an append-only sequence to
//! the positions immediately following its occurrences, in ascending order.
//! An occurrence is recorded only once the token after it has arrived, so
//! every returned position indexes a real continuation token.

use std::collections::HashMap;

use crate::token::Token;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NgramTable {
    min_n: usize,
    max_n: usize,
    seq: Vec<Token>,
    /// Positions below this are considered evicted.
    window_start: usize,
    map: HashMap<Vec<Token>, Vec<usize>>,
}

/// Result of a longest-key lookup.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct NgramMatch {
    /// Length of the matched key.
    pub key_len: usize,
    /// Continuation positions, ascending.
    pub positions: Vec<usize>,
}

impl NgramTable {
    /// # Panics
    /// If `min_n == 0` or `min_n > max_n`.
    pub fn new(min_n: usize, max_n: usize) -> Self {
        assert!(min_n >= 1 && min_n <= max_n, "invalid n-gram range [{min_n}, {max_n}]");
        Self {
            min_n,
            max_n,
            seq: Vec::new(),
            window_start: 0,
            map: HashMap::new(),
        }
    }

    pub fn build(min_n: usize, max_n: usize, seq: &[Token]) -> Self {
        let mut table = Self::new(min_n, max_n);
        for &t in seq {
            table.push(t);
        }
        table
    }

    pub fn seq(&self) -> &[Token] {
        &self.seq
    }

    pub fn len(&self) -> usize {
        self.seq.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seq.is_empty()
    }

    pub fn range(&self) -> (usize, usize) {
        (self.min_n, self.max_n)
    }

    pub fn push(&mut self, t: Token) {
        let pos = self.seq.len();
        for n in self.min_n..=self.max_n {
            if n > pos || pos - n < self.window_start {
                break;
            }
            let key = self.seq[pos - n..pos].to_vec();
            self.map.entry(key).or_default().push(pos);
        }
        self.seq.push(t);
    }

    /// Forgets every occurrence that starts before `start`. Keys are
    /// compacted eagerly so memory tracks the live window.
    pub fn evict_before(&mut self, start: usize) {
        if start <= self.window_start {
            return;
        }
        self.window_start = start;
        self.map.retain(|key, positions| {
            let n = key.len();
            positions.retain(|&p| p - n >= start);
            !positions.is_empty()
        });
    }

    /// Positions following occurrences of exactly `key`.
    pub fn positions(&self, key: &[Token]) -> &[usize] {
        self.map.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Longest key in `[min_n, max_n]` that is a suffix of `tail` and occurs
    /// in the table. `None` when nothing matches (including tails shorter
    /// than `min_n`).
    pub fn lookup(&self, tail: &[Token]) -> Option<NgramMatch> {
        let longest = self.max_n.min(tail.len());
        (self.min_n..=longest).rev().find_map(|n| {
            let key = &tail[tail.len() - n..];
            let positions = self.positions(key);
            (!positions.is_empty()).then(|| NgramMatch {
                key_len: n,
                positions: positions.to_vec(),
            })
        })
    }

    /// Up to `max_len` tokens starting at `pos`, bounded by the sequence end.
    pub fn continuation(&self, pos: usize, max_len: usize) -> &[Token] {
        let end = (pos + max_len).min(self.seq.len());
        &self.seq[pos.min(end)..end]
    }
}
