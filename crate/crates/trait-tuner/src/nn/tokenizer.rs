//! Hashing tokenizer: whitespace tokens mapped into a fixed id space with
//! FNV-1a, no vocabulary files. Ids 0 and 1 are reserved (padding, unknown);
//! real tokens land in [2, vocab_size).

pub const PAD_ID: usize = 0;
pub const UNK_ID: usize = 1;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HashTokenizer {
    pub vocab_size: usize,
    pub max_len: usize,
}

impl HashTokenizer {
    pub fn new(vocab_size: usize, max_len: usize) -> Self {
        assert!(vocab_size > 2 && max_len > 0);
        HashTokenizer {
            vocab_size,
            max_len,
        }
    }

    pub fn token_id(&self, token: &str) -> usize {
        2 + (fnv1a64(token.as_bytes()) % (self.vocab_size as u64 - 2)) as usize
    }

    /// Truncates from the end, keeping the first `max_len` tokens. Texts with
    /// no tokens encode to a single unknown marker so downstream shapes stay
    /// non-empty.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        let ids: Vec<usize> = text
            .split_whitespace()
            .take(self.max_len)
            .map(|t| self.token_id(t))
            .collect();
        if ids.is_empty() {
            vec![UNK_ID]
        } else {
            ids
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::synthetic_vocabulary;
    use std::collections::HashSet;

    #[test]
    fn ids_stay_in_the_unreserved_range() {
        let tok = HashTokenizer::new(2048, 16);
        for word in ["hello", "WORLD", "a", "𝛼β", ""] {
            let id = tok.token_id(word);
            assert!((2..2048).contains(&id));
        }
    }

    #[test]
    fn encoding_truncates_and_never_returns_empty() {
        let tok = HashTokenizer::new(2048, 4);
        assert_eq!(tok.encode("a b c d e f").len(), 4);
        assert_eq!(tok.encode("   "), vec![UNK_ID]);
        assert_eq!(tok.encode(""), vec![UNK_ID]);
        let a = tok.encode("kind warm kind");
        assert_eq!(a[0], a[2]);
    }

    #[test]
    fn synthetic_vocabulary_has_no_hash_collisions_in_tiny_vocab() {
        // The overfit and learning-signal tests rely on the synthetic corpus
        // words being distinguishable by the tiny-test encoder.
        let tok = HashTokenizer::new(2048, 16);
        let words = synthetic_vocabulary();
        let ids: HashSet<usize> = words.iter().map(|w| tok.token_id(w)).collect();
        assert_eq!(
            ids.len(),
            words.len(),
            "hash collision among synthetic corpus words"
        );
    }
}
