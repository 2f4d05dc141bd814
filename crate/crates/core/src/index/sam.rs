//! Online suffix automaton over a token stream.
//!
//! Standard incremental construction (one `extend` per token, amortized
//! O(1)). Every state records `first_end`, the end position of the first
//! occurrence of its strings; clones inherit it from the state they split.
//!
//! After each extension the suffix link of the newest state is exactly the
//! state of the longest suffix that also ends at an earlier position, so the
//! match cursor is maintained for free: its length is that state's `len` and
//! its earliest earlier occurrence ends at `first_end`.

use crate::token::Token;

pub type StateId = u32;

const ROOT: StateId = 0;
const NONE: StateId = u32::MAX;

#[derive(Clone, Debug)]
struct State {
    len: usize,
    link: StateId,
    first_end: usize,
    /// Sorted by token.
    next: Vec<(Token, StateId)>,
}

impl State {
    fn transition(&self, t: Token) -> Option<StateId> {
        self.next
            .binary_search_by_key(&t, |&(k, _)| k)
            .ok()
            .map(|i| self.next[i].1)
    }

    fn set_transition(&mut self, t: Token, to: StateId) {
        match self.next.binary_search_by_key(&t, |&(k, _)| k) {
            Ok(i) => self.next[i].1 = to,
            Err(i) => self.next.insert(i, (t, to)),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SuffixAutomaton {
    states: Vec<State>,
    last: StateId,
    text: Vec<Token>,
    cursor_state: StateId,
    cursor_len: usize,
}

impl Default for SuffixAutomaton {
    fn default() -> Self {
        Self::new()
    }
}

impl SuffixAutomaton {
    pub fn new() -> Self {
        Self {
            states: vec![State {
                len: 0,
                link: NONE,
                first_end: 0,
                next: Vec::new(),
            }],
            last: ROOT,
            text: Vec::new(),
            cursor_state: ROOT,
            cursor_len: 0,
        }
    }

    pub fn from_tokens(toks: &[Token]) -> Self {
        let mut sam = Self::new();
        for &t in toks {
            sam.extend(t);
        }
        sam
    }

    /// Number of tokens ingested.
    pub fn len(&self) -> usize {
        self.text.len()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    /// Number of automaton states, including the root.
    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn text(&self) -> &[Token] {
        &self.text
    }

    /// Length of the longest suffix of the stream that also ends at an
    /// earlier position.
    pub fn match_len(&self) -> usize {
        self.cursor_len
    }

    /// End position of the earliest earlier occurrence of the current match.
    pub fn match_end(&self) -> Option<usize> {
        (self.cursor_len > 0).then(|| self.states[self.cursor_state as usize].first_end)
    }

    pub fn extend(&mut self, t: Token) {
        let pos = self.text.len();
        self.text.push(t);
        let cur = self.states.len() as StateId;
        self.states.push(State {
            len: self.states[self.last as usize].len + 1,
            link: ROOT,
            first_end: pos,
            next: Vec::new(),
        });

        let mut p = self.last;
        while p != NONE && self.states[p as usize].transition(t).is_none() {
            self.states[p as usize].set_transition(t, cur);
            p = self.states[p as usize].link;
        }
        if p != NONE {
            let q = self.states[p as usize].transition(t).expect("loop stopped on a transition");
            if self.states[p as usize].len + 1 == self.states[q as usize].len {
                self.states[cur as usize].link = q;
            } else {
                let clone = self.states.len() as StateId;
                let mut cloned = self.states[q as usize].clone();
                cloned.len = self.states[p as usize].len + 1;
                self.states.push(cloned);
                while p != NONE && self.states[p as usize].transition(t) == Some(q) {
                    self.states[p as usize].set_transition(t, clone);
                    p = self.states[p as usize].link;
                }
                self.states[q as usize].link = clone;
                self.states[cur as usize].link = clone;
            }
        }
        self.last = cur;
        self.cursor_state = self.states[cur as usize].link;
        self.cursor_len = self.states[self.cursor_state as usize].len;
    }

    /// Whether `pattern` occurs in the ingested stream.
    pub fn contains(&self, pattern: &[Token]) -> bool {
        let mut s = ROOT;
        for &t in pattern {
            match self.states[s as usize].transition(t) {
                Some(n) => s = n,
                None => return false,
            }
        }
        true
    }

    /// Up to `max_len` tokens that followed the earliest earlier occurrence of
    /// the current match. The copy may run past the end of the stream, in
    /// which case it continues from its own output (so a repeating period
    /// keeps wrapping). Empty when there is no match.
    pub fn continuation(&self, max_len: usize) -> Vec<Token> {
        let Some(end) = self.match_end() else {
            return Vec::new();
        };
        let n = self.text.len();
        let start = end + 1;
        let mut out = Vec::with_capacity(max_len);
        for i in 0..max_len {
            let idx = start + i;
            let tok = if idx < n { self.text[idx] } else { out[idx - n] };
            out.push(tok);
        }
        out
    }
}
