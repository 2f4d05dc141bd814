//! Draft proposals and the method capability matrix.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::token::{Distribution, Token};

/// Speculation structure of a draft.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speculation {
    Linear,
    Tree,
}

/// Drafting methods. `None` is the empty drafter (pure target steps).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    None,
    Sps,
    Eagle,
    Pld,
    Rest,
    Lookahead,
    Pia,
    Sam,
    Recycling,
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::None,
        Method::Sps,
        Method::Eagle,
        Method::Pld,
        Method::Rest,
        Method::Lookahead,
        Method::Pia,
        Method::Sam,
        Method::Recycling,
        Method::Hybrid,
    ];

    /// The eight single-method drafters of the benchmark matrix.
    pub const DRAFTERS: [Method; 8] = [
        Method::Sps,
        Method::Eagle,
        Method::Pld,
        Method::Rest,
        Method::Lookahead,
        Method::Pia,
        Method::Sam,
        Method::Recycling,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Method::None => "none",
            Method::Sps => "sps",
            Method::Eagle => "eagle",
            Method::Pld => "pld",
            Method::Rest => "rest",
            Method::Lookahead => "lookahead",
            Method::Pia => "pia",
            Method::Sam => "sam",
            Method::Recycling => "recycling",
            Method::Hybrid => "hybrid",
        }
    }

    /// Capability row. `Hybrid` reports the SAM + SpS pairing; a hybrid
    /// instance derives its own row from its components.
    pub fn capabilities(self) -> Capabilities {
        use Speculation::*;
        let row = |speculation, reuse, greedy, sampling| Capabilities {
            speculation,
            reuse,
            supports_greedy: greedy,
            supports_sampling: sampling,
        };
        match self {
            Method::None => row(Linear, false, true, true),
            Method::Sps => row(Linear, false, true, true),
            Method::Eagle => row(Tree, false, true, true),
            Method::Pld => row(Linear, false, true, false),
            Method::Rest => row(Tree, false, true, true),
            Method::Lookahead => row(Tree, true, true, false),
            Method::Pia => row(Tree, true, true, true),
            Method::Sam => row(Linear, true, true, true),
            Method::Recycling => row(Tree, false, true, true),
            Method::Hybrid => row(Linear, true, true, true),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown method id {0:?}")]
pub struct UnknownMethod(pub String);

impl FromStr for Method {
    type Err = UnknownMethod;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.id() == s)
            .ok_or_else(|| UnknownMethod(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub speculation: Speculation,
    pub reuse: bool,
    pub supports_greedy: bool,
    pub supports_sampling: bool,
}

// ---------------------------------------------------------------------------
// Draft
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq)]
pub struct DraftNode {
    pub token: Token,
    /// Index of the parent node; `None` for first-layer nodes.
    pub parent: Option<usize>,
    /// Proposal probability of `token` at this position (1 for retrieval).
    pub q: f64,
    /// Full proposal distribution when the token was drawn from one. Nodes
    /// without it are verified as point-mass proposals.
    pub proposal: Option<Distribution>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DraftError {
    #[error("node {node} has parent {parent}, which does not precede it")]
    BadParent { node: usize, parent: usize },
    #[error("node {node} repeats a sibling token")]
    DuplicateSibling { node: usize },
    #[error("node {node} has proposal probability {q} outside [0, 1]")]
    BadProposal { node: usize, q: f64 },
    #[error("linear draft node {node} does not extend its predecessor")]
    NotLinear { node: usize },
    #[error("draft has {len} nodes, budget is {budget}")]
    OverBudget { len: usize, budget: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Draft {
    pub shape: Speculation,
    pub nodes: Vec<DraftNode>,
    /// Drafter that produced this draft.
    pub origin: Method,
    /// Length of the matched suffix that seeded the draft (0 if not applicable).
    pub match_len: usize,
}

impl Draft {
    pub fn empty(shape: Speculation, origin: Method) -> Self {
        Self {
            shape,
            nodes: Vec::new(),
            origin,
            match_len: 0,
        }
    }

    /// Linear retrieval draft (q = 1 everywhere).
    pub fn linear(origin: Method, toks: &[Token]) -> Self {
        let nodes = toks
            .iter()
            .enumerate()
            .map(|(i, &token)| DraftNode {
                token,
                parent: i.checked_sub(1),
                q: 1.0,
                proposal: None,
            })
            .collect();
        Self {
            shape: Speculation::Linear,
            nodes,
            origin,
            match_len: 0,
        }
    }

    /// Linear draft whose tokens were drawn from the given proposals.
    pub fn linear_with_proposals(origin: Method, drawn: Vec<(Token, Distribution)>) -> Self {
        let nodes = drawn
            .into_iter()
            .enumerate()
            .map(|(i, (token, q))| DraftNode {
                token,
                parent: i.checked_sub(1),
                q: q.prob(token),
                proposal: Some(q),
            })
            .collect();
        Self {
            shape: Speculation::Linear,
            nodes,
            origin,
            match_len: 0,
        }
    }

    /// Merges token paths into a tree (shared prefixes collapse), adding
    /// nodes in path order until `budget` nodes exist.
    pub fn tree_from_paths<'a, I>(origin: Method, paths: I, budget: usize) -> Self
    where
        I: IntoIterator<Item = &'a [Token]>,
    {
        let mut draft = Self::empty(Speculation::Tree, origin);
        'paths: for path in paths {
            let mut parent = None;
            for &t in path {
                match draft.child_with_token(parent, t) {
                    Some(c) => parent = Some(c),
                    None => {
                        if draft.nodes.len() >= budget {
                            break 'paths;
                        }
                        draft.nodes.push(DraftNode {
                            token: t,
                            parent,
                            q: 1.0,
                            proposal: None,
                        });
                        parent = Some(draft.nodes.len() - 1);
                    }
                }
            }
        }
        draft
    }

    pub fn with_match_len(mut self, match_len: usize) -> Self {
        self.match_len = match_len;
        self
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn child_with_token(&self, parent: Option<usize>, t: Token) -> Option<usize> {
        self.nodes
            .iter()
            .enumerate()
            .find(|(_, n)| n.parent == parent && n.token == t)
            .map(|(i, _)| i)
    }

    /// Children of `parent` (or first-layer nodes for `None`), in index order.
    pub fn children(&self, parent: Option<usize>) -> impl Iterator<Item = usize> + '_ {
        self.nodes
            .iter()
            .enumerate()
            .filter(move |(_, n)| n.parent == parent)
            .map(|(i, _)| i)
    }

    /// Child lists for every node plus the virtual root (last entry).
    pub fn child_lists(&self) -> Vec<Vec<usize>> {
        let root = self.nodes.len();
        let mut lists = vec![Vec::new(); root + 1];
        for (i, n) in self.nodes.iter().enumerate() {
            lists[n.parent.unwrap_or(root)].push(i);
        }
        lists
    }

    /// Root-to-node token path ending at `idx`.
    pub fn path(&self, mut idx: usize) -> Vec<Token> {
        let mut out = vec![self.nodes[idx].token];
        while let Some(p) = self.nodes[idx].parent {
            out.push(self.nodes[p].token);
            idx = p;
        }
        out.reverse();
        out
    }

    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        for (i, n) in self.nodes.iter().enumerate() {
            depth[i] = n.parent.map_or(1, |p| depth[p] + 1);
        }
        depth.into_iter().max().unwrap_or(0)
    }

    /// Tokens of a linear draft in order (or of the first root path of a tree).
    pub fn tokens(&self) -> Vec<Token> {
        match self.shape {
            Speculation::Linear => self.nodes.iter().map(|n| n.token).collect(),
            Speculation::Tree => {
                let mut out = Vec::new();
                let mut at = None;
                while let Some(c) = self.children(at).next() {
                    out.push(self.nodes[c].token);
                    at = Some(c);
                }
                out
            }
        }
    }

    /// Checks structural invariants against a node budget.
    pub fn validate(&self, budget: usize) -> Result<(), DraftError> {
        if self.nodes.len() > budget {
            return Err(DraftError::OverBudget {
                len: self.nodes.len(),
                budget,
            });
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if let Some(p) = n.parent {
                if p >= i {
                    return Err(DraftError::BadParent { node: i, parent: p });
                }
            }
            if !(0.0..=1.0).contains(&n.q) || n.q.is_nan() {
                return Err(DraftError::BadProposal { node: i, q: n.q });
            }
            if self.shape == Speculation::Linear && n.parent != i.checked_sub(1) {
                return Err(DraftError::NotLinear { node: i });
            }
            if self.nodes[..i]
                .iter()
                .any(|m| m.parent == n.parent && m.token == n.token)
            {
                return Err(DraftError::DuplicateSibling { node: i });
            }
        }
        Ok(())
    }
}
