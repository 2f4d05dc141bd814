//! Frequency-annotated token trie used for context caching.
//!
//! Each root-to-node path is a substring of the ingested text and the node's
//! frequency counts how many inserted windows pass through it. When the node
//! count exceeds the capacity, leaves are evicted lowest-frequency first,
//! which keeps the set of surviving paths prefix-closed.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::token::Token;

pub type NodeId = usize;

const ROOT: NodeId = 0;

#[derive(Clone, Debug, PartialEq, Eq)]
struct TrieNode {
    token: Token,
    parent: NodeId,
    depth: usize,
    freq: u64,
    /// Sorted by token.
    children: Vec<(Token, NodeId)>,
    alive: bool,
}

impl TrieNode {
    fn child(&self, t: Token) -> Option<NodeId> {
        self.children
            .binary_search_by_key(&t, |&(k, _)| k)
            .ok()
            .map(|i| self.children[i].1)
    }
}

/// A node of a lookup result. Parents precede children.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateNode {
    pub token: Token,
    pub parent: Option<usize>,
    pub freq: u64,
}

/// Continuations found below the deepest matching path.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct TrieCandidates {
    /// Length of the matched suffix (0 when nothing matched).
    pub match_len: usize,
    pub nodes: Vec<CandidateNode>,
}

impl TrieCandidates {
    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Root-to-node token path for candidate `idx`.
    pub fn path(&self, mut idx: usize) -> Vec<Token> {
        let mut out = vec![self.nodes[idx].token];
        while let Some(p) = self.nodes[idx].parent {
            out.push(self.nodes[p].token);
            idx = p;
        }
        out.reverse();
        out
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextTrie {
    nodes: Vec<TrieNode>,
    free: Vec<NodeId>,
    live: usize,
    capacity: usize,
}

impl ContextTrie {
    /// `capacity` bounds the number of non-root nodes retained after a prune.
    pub fn new(capacity: usize) -> Self {
        Self {
            nodes: vec![TrieNode {
                token: Token(0),
                parent: ROOT,
                depth: 0,
                freq: 0,
                children: Vec::new(),
                alive: true,
            }],
            free: Vec::new(),
            live: 0,
            capacity,
        }
    }

    pub fn root(&self) -> NodeId {
        ROOT
    }

    /// Number of non-root nodes.
    pub fn node_count(&self) -> usize {
        self.live
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn over_capacity(&self) -> bool {
        self.live > self.capacity
    }

    pub fn depth(&self, node: NodeId) -> usize {
        self.nodes[node].depth
    }

    pub fn freq(&self, node: NodeId) -> u64 {
        self.nodes[node].freq
    }

    pub fn is_alive(&self, node: NodeId) -> bool {
        self.nodes.get(node).is_some_and(|n| n.alive)
    }

    /// Follows (creating if needed) the `t` edge out of `node` and bumps the
    /// child's frequency.
    pub fn extend_child(&mut self, node: NodeId, t: Token) -> NodeId {
        if let Some(c) = self.nodes[node].child(t) {
            self.nodes[c].freq += 1;
            return c;
        }
        let fresh = TrieNode {
            token: t,
            parent: node,
            depth: self.nodes[node].depth + 1,
            freq: 1,
            children: Vec::new(),
            alive: true,
        };
        let id = match self.free.pop() {
            Some(id) => {
                self.nodes[id] = fresh;
                id
            }
            None => {
                self.nodes.push(fresh);
                self.nodes.len() - 1
            }
        };
        let kids = &mut self.nodes[node].children;
        let at = kids.binary_search_by_key(&t, |&(k, _)| k).unwrap_err();
        kids.insert(at, (t, id));
        self.live += 1;
        id
    }

    /// Inserts one window as a root path, bumping every node on it.
    ///
    /// # Panics
    /// If the window is shorter than two tokens.
    pub fn insert_window(&mut self, window: &[Token]) {
        assert!(window.len() >= 2, "trie windows need at least two tokens");
        let mut node = ROOT;
        for &t in window {
            node = self.extend_child(node, t);
        }
    }

    /// Node reached by following `path` from the root.
    pub fn find(&self, path: &[Token]) -> Option<NodeId> {
        path.iter()
            .try_fold(ROOT, |node, &t| self.nodes[node].child(t))
    }

    /// Root-to-node path of `node`.
    pub fn path_of(&self, mut node: NodeId) -> Vec<Token> {
        let mut out = Vec::with_capacity(self.nodes[node].depth);
        while node != ROOT {
            out.push(self.nodes[node].token);
            node = self.nodes[node].parent;
        }
        out.reverse();
        out
    }

    /// All root-to-leaf paths (for soundness checks).
    pub fn leaf_paths(&self) -> Vec<Vec<Token>> {
        (1..self.nodes.len())
            .filter(|&i| self.nodes[i].alive && self.nodes[i].children.is_empty())
            .map(|i| self.path_of(i))
            .collect()
    }

    /// Deepest suffix of `suffix` (at most `max_key` tokens) that exists as a
    /// root path with at least one child, and up to `budget` of its
    /// descendants chosen best-first by frequency.
    pub fn lookup(&self, suffix: &[Token], max_key: usize, budget: usize) -> TrieCandidates {
        let longest = max_key.min(suffix.len());
        for len in (1..=longest).rev() {
            let key = &suffix[suffix.len() - len..];
            if let Some(node) = self.find(key) {
                if !self.nodes[node].children.is_empty() {
                    return TrieCandidates {
                        match_len: len,
                        nodes: self.best_first(node, budget),
                    };
                }
            }
        }
        TrieCandidates::default()
    }

    /// Full subtree below the deepest matching path (no budget).
    pub fn subtree_after(&self, suffix: &[Token]) -> TrieCandidates {
        self.lookup(suffix, suffix.len(), usize::MAX)
    }

    fn best_first(&self, start: NodeId, budget: usize) -> Vec<CandidateNode> {
        let mut out = Vec::new();
        // (freq, Reverse(token), Reverse(seq)) max-heap → highest frequency first.
        let mut heap = BinaryHeap::new();
        let mut seq = 0usize;
        for &(t, c) in &self.nodes[start].children {
            heap.push((self.nodes[c].freq, Reverse(t), Reverse(seq), c, None::<usize>));
            seq += 1;
        }
        while out.len() < budget {
            let Some((freq, _, _, node, parent)) = heap.pop() else {
                break;
            };
            let idx = out.len();
            out.push(CandidateNode {
                token: self.nodes[node].token,
                parent,
                freq,
            });
            for &(t, c) in &self.nodes[node].children {
                heap.push((self.nodes[c].freq, Reverse(t), Reverse(seq), c, Some(idx)));
                seq += 1;
            }
        }
        out
    }

    /// Evicts leaves, lowest frequency first (deeper first on ties), until the
    /// node count is within capacity. Returns the evicted node ids.
    pub fn prune(&mut self) -> Vec<NodeId> {
        self.prune_to(self.capacity)
    }

    /// Like [`prune`](Self::prune) but stops at `target` nodes, so callers
    /// can leave headroom and prune less often.
    pub fn prune_to(&mut self, target: usize) -> Vec<NodeId> {
        let mut removed = Vec::new();
        if self.live <= target {
            return removed;
        }
        let key = |n: &TrieNode, id: NodeId| Reverse((n.freq, Reverse(n.depth), Reverse(id)));
        let mut heap: BinaryHeap<_> = (1..self.nodes.len())
            .filter(|&i| self.nodes[i].alive && self.nodes[i].children.is_empty())
            .map(|i| (key(&self.nodes[i], i), i))
            .collect();
        while self.live > target {
            let Some((_, id)) = heap.pop() else { break };
            let parent = self.nodes[id].parent;
            let token = self.nodes[id].token;
            let kids = &mut self.nodes[parent].children;
            if let Ok(at) = kids.binary_search_by_key(&token, |&(k, _)| k) {
                kids.remove(at);
            }
            self.nodes[id].alive = false;
            self.nodes[id].children.clear();
            self.free.push(id);
            self.live -= 1;
            removed.push(id);
            if parent != ROOT && self.nodes[parent].children.is_empty() {
                heap.push((key(&self.nodes[parent], parent), parent));
            }
        }
        removed
    }
}
