//! Round prompts for multi-round thinking and answer extraction.
//!
//! Text form of round `r >= 2` (bytes exactly as below, `\n` is a single
//! line feed):
//!
//! ```text
//! {question}\nThe assistant's previous answer is: {answer}\nPlease re-answer.
//! ```
//!
//! The token form is the codec image of the text form: question tokens,
//! the encoded lead-in, the answer tokens, the encoded closing line. An
//! optional assistant header (a chat-template artifact) is appended after
//! the prompt body on every round.

use specbench_core::Token;

use crate::codec;

pub const PREVIOUS_ANSWER_LEAD: &str = "The assistant's previous answer is: ";
pub const REANSWER: &str = "Please re-answer.";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("round {0} needs the previous round's answer")]
    MissingPreviousAnswer(usize),
    #[error("rounds are numbered from 1")]
    ZeroRound,
}

/// Text prompt for `round` (1-based).
pub fn build_round_prompt(
    question: &str,
    prev_answer: Option<&str>,
    round: usize,
) -> Result<String, PromptError> {
    match round {
        0 => Err(PromptError::ZeroRound),
        1 => Ok(question.to_string()),
        r => {
            let a = prev_answer.ok_or(PromptError::MissingPreviousAnswer(r))?;
            Ok(format!("{question}\n{PREVIOUS_ANSWER_LEAD}{a}\n{REANSWER}"))
        }
    }
}

/// Token-level round template.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptTemplate {
    lead: Vec<Token>,
    closing: Vec<Token>,
    assistant_header: Vec<Token>,
}

impl PromptTemplate {
    pub fn new(vocab_size: usize, assistant_header: Vec<Token>) -> Self {
        Self {
            lead: codec::encode(PREVIOUS_ANSWER_LEAD, vocab_size),
            closing: codec::encode(REANSWER, vocab_size),
            assistant_header,
        }
    }

    pub fn assistant_header(&self) -> &[Token] {
        &self.assistant_header
    }

    /// Prompt body for `round`, without the assistant header.
    pub fn body(
        &self,
        question: &[Token],
        prev_answer: Option<&[Token]>,
        round: usize,
    ) -> Result<Vec<Token>, PromptError> {
        match round {
            0 => Err(PromptError::ZeroRound),
            1 => Ok(question.to_vec()),
            r => {
                let a = prev_answer.ok_or(PromptError::MissingPreviousAnswer(r))?;
                let mut out = question.to_vec();
                out.extend_from_slice(&self.lead);
                out.extend_from_slice(a);
                out.extend_from_slice(&self.closing);
                Ok(out)
            }
        }
    }

    /// Full model input for `round`: body followed by the assistant header.
    pub fn round_tokens(
        &self,
        question: &[Token],
        prev_answer: Option<&[Token]>,
        round: usize,
    ) -> Result<Vec<Token>, PromptError> {
        let mut out = self.body(question, prev_answer, round)?;
        out.extend_from_slice(&self.assistant_header);
        Ok(out)
    }
}

/// Pulls the final answer out of a generated sequence: the tokens after the
/// last answer marker, or the trailing `tail` tokens when there is no
/// marker (or no marker configured).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AnswerExtractor {
    pub marker: Option<Token>,
    pub tail: usize,
}

impl Default for AnswerExtractor {
    fn default() -> Self {
        Self {
            marker: None,
            tail: 8,
        }
    }
}

impl AnswerExtractor {
    pub fn extract(&self, output: &[Token]) -> Vec<Token> {
        if let Some(m) = self.marker {
            if let Some(i) = output.iter().rposition(|&t| t == m) {
                return output[i + 1..].to_vec();
            }
        }
        output[output.len().saturating_sub(self.tail)..].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use specbench_core::token::tokens;

    #[test]
    fn round_one_is_the_question() {
        assert_eq!(build_round_prompt("Q", None, 1).unwrap(), "Q");
        assert_eq!(build_round_prompt("", None, 0), Err(PromptError::ZeroRound));
    }

    #[test]
    fn round_two_template_bytes() {
        assert_eq!(
            build_round_prompt("What is 6*7?", Some("42"), 2).unwrap(),
            "What is 6*7?\nThe assistant's previous answer is: 42\nPlease re-answer."
        );
        assert_eq!(
            build_round_prompt("Q", None, 2),
            Err(PromptError::MissingPreviousAnswer(2))
        );
    }

    #[test]
    fn later_rounds_carry_only_the_last_answer() {
        let p3 = build_round_prompt("Q", Some("A2"), 3).unwrap();
        assert_eq!(p3, "Q\nThe assistant's previous answer is: A2\nPlease re-answer.");
        let t = PromptTemplate::new(50, vec![]);
        let q = tokens(&[1, 2]);
        let a1 = tokens(&[3]);
        let a2 = tokens(&[4, 5]);
        let r2 = t.body(&q, Some(&a1), 2).unwrap();
        let r3 = t.body(&q, Some(&a2), 3).unwrap();
        assert!(!r3.windows(r2.len()).any(|w| w == r2.as_slice()));
        assert_eq!(r3.len(), q.len() + t.lead.len() + a2.len() + t.closing.len());
    }

    #[test]
    fn token_template_is_codec_image_of_text() {
        let v = 211;
        let (q, a) = ("Find x if 3x = 12.", "x = 4");
        let t = PromptTemplate::new(v, vec![]);
        let text = build_round_prompt(q, Some(a), 2).unwrap();
        let toks = t
            .body(&codec::encode(q, v), Some(&codec::encode(a, v)), 2)
            .unwrap();
        assert_eq!(toks, codec::encode(&text, v));
    }

    #[test]
    fn header_is_appended_every_round() {
        let t = PromptTemplate::new(50, tokens(&[9, 9]));
        let r1 = t.round_tokens(&tokens(&[1]), None, 1).unwrap();
        assert_eq!(r1, tokens(&[1, 9, 9]));
        let r2 = t.round_tokens(&tokens(&[1]), Some(&tokens(&[2])), 2).unwrap();
        assert!(r2.ends_with(&tokens(&[9, 9])));
    }

    #[test]
    fn extraction_uses_last_marker() {
        let ex = AnswerExtractor {
            marker: Some(Token(0)),
            tail: 2,
        };
        assert_eq!(ex.extract(&tokens(&[5, 0, 6, 0, 7, 8])), tokens(&[7, 8]));
        assert_eq!(ex.extract(&tokens(&[5, 6, 7])), tokens(&[6, 7]));
        assert_eq!(ex.extract(&tokens(&[5, 0])), tokens(&[]));
        assert_eq!(ex.extract(&[]), tokens(&[]));
    }
}
