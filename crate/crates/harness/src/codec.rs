//! Word-hash codec that turns problem text into token ids for synthetic
//! oracles.
//!
//! Text is split on Unicode whitespace and each word maps to
//! `fnv1a64(word bytes) mod vocab_size`. Encoding is therefore
//! concatenative: `encode(a + " " + b) == encode(a) ++ encode(b)`.

use specbench_core::Token;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

pub fn encode_word(word: &str, vocab_size: usize) -> Token {
    Token((fnv1a64(word.as_bytes()) % vocab_size as u64) as u32)
}

pub fn encode(text: &str, vocab_size: usize) -> Vec<Token> {
    text.split_whitespace()
        .map(|w| encode_word(w, vocab_size))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_hash_values() {
        // Reference values of 64-bit FNV-1a.
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn encoding_is_concatenative() {
        let v = 97;
        let a = "What is 2 + 2?";
        let b = "Answer:\n4";
        let mut joined = encode(a, v);
        joined.extend(encode(b, v));
        assert_eq!(encode(&format!("{a}\n{b}"), v), joined);
        assert!(encode(" \t\n", v).is_empty());
        assert!(joined.iter().all(|t| t.index() < v));
    }
}
