//! Problem datasets: one JSON object per line.
//!
//! ```json
//! {"id": "aime24-01", "source": "AIME24", "prompt_tokens": [3, 17, 5]}
//! {"id": "gpqa-07", "source": "GPQA", "text": "Which of ...", "answer": "B"}
//! ```
//!
//! Exactly one of `prompt_tokens` / `text` must be present; `text` is
//! encoded with the word-hash codec. `source` defaults to `"synthetic"`.
//! Blank lines are skipped.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use specbench_core::rng::{hash_seq, mix64};
use specbench_core::Token;

use crate::codec;

pub const DEFAULT_SOURCE: &str = "synthetic";

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("failed to read dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("dataset line {line}: {message}")]
    SchemaError { line: usize, message: String },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub source: String,
    pub prompt: Vec<Token>,
    /// Reference answer, if the dataset provides one.
    pub answer: Option<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemLine {
    id: String,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    prompt_tokens: Option<Vec<u32>>,
    #[serde(default)]
    text: Option<String>,
    #[serde(default)]
    answer: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub problems: Vec<Problem>,
    pub warnings: Vec<String>,
}

/// Parses dataset text; `vocab_size` bounds token ids and sizes the codec.
pub fn parse_dataset(text: &str, vocab_size: usize) -> Result<Dataset, DatasetError> {
    let mut out = Dataset::default();
    let mut ids = HashSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| DatasetError::SchemaError { line, message };
        if raw.trim().is_empty() {
            continue;
        }
        let p: ProblemLine = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        let prompt = match (p.prompt_tokens, p.text) {
            (Some(ids), None) => {
                if let Some(bad) = ids.iter().find(|&&t| t as usize >= vocab_size) {
                    return Err(err(format!("token {bad} is outside the vocabulary of {vocab_size}")));
                }
                ids.into_iter().map(Token).collect()
            }
            (None, Some(text)) => codec::encode(&text, vocab_size),
            _ => return Err(err("exactly one of prompt_tokens / text is required".into())),
        };
        if prompt.is_empty() {
            return Err(err(format!("problem {:?} has an empty prompt", p.id)));
        }
        if !ids.insert(p.id.clone()) {
            return Err(err(format!("duplicate id {:?}", p.id)));
        }
        out.problems.push(Problem {
            id: p.id,
            source: p.source.unwrap_or_else(|| DEFAULT_SOURCE.to_string()),
            prompt,
            answer: p.answer,
        });
    }
    if out.problems.is_empty() {
        out.warnings.push("dataset is empty".to_string());
    }
    Ok(out)
}

pub fn ingest_dataset(path: &Path, vocab_size: usize) -> Result<Dataset, DatasetError> {
    parse_dataset(&fs::read_to_string(path)?, vocab_size)
}

/// Serializes problems in the token form accepted by [`parse_dataset`].
pub fn to_jsonl(problems: &[Problem]) -> String {
    let mut out = String::new();
    for p in problems {
        let mut obj = serde_json::json!({
            "id": p.id,
            "source": p.source,
            "prompt_tokens": p.prompt.iter().map(|t| t.0).collect::<Vec<_>>(),
        });
        if let Some(a) = &p.answer {
            obj["answer"] = serde_json::Value::String(a.clone());
        }
        out.push_str(&obj.to_string());
        out.push('\n');
    }
    out
}

/// `n` random prompts of `len` tokens, uniform over the vocabulary.
pub fn synthetic_problems(
    n: usize,
    vocab_size: usize,
    len: usize,
    seed: u64,
    source: &str,
) -> Vec<Problem> {
    (0..n)
        .map(|i| {
            let base = hash_seq(seed, [i as u64]);
            let prompt = (0..len)
                .map(|j| Token((mix64(base ^ j as u64) % vocab_size as u64) as u32))
                .collect();
            Problem {
                id: format!("{source}-{i:04}"),
                source: source.to_string(),
                prompt,
                answer: None,
            }
        })
        .collect()
}
