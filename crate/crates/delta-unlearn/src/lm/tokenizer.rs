use crate::error::{Error, Result};
use sha2::{Digest, Sha256};
use std::collections::{BTreeSet, HashMap};
use std::path::Path;

pub const PAD: u32 = 0;
pub const BOS: u32 = 1;
pub const EOS: u32 = 2;
pub const SEP: u32 = 3;

const SPECIALS: [&str; 4] = ["<pad>", "<bos>", "<eos>", "<sep>"];

/// Word-level tokenizer over a closed vocabulary built from the corpus.
/// Tokens are whitespace-separated words; corpus text is single-space
/// normalized by construction, so encode/decode round-trips exactly.
#[derive(Debug, Clone)]
pub struct Tokenizer {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Tokenizer {
    /// Build from every string in the corpus. The word list is sorted so
    /// the id assignment is deterministic regardless of input order.
    pub fn from_texts<'a, I: IntoIterator<Item = &'a str>>(texts: I) -> Self {
        let mut words = BTreeSet::new();
        for text in texts {
            for w in text.split_whitespace() {
                words.insert(w.to_string());
            }
        }
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        tokens.extend(words);
        Self::from_token_list(tokens)
    }

    pub fn from_token_list(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Tokenizer { tokens, index }
    }

    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn encode(&self, text: &str) -> Result<Vec<u32>> {
        text.split_whitespace()
            .map(|w| {
                self.index
                    .get(w)
                    .copied()
                    .ok_or_else(|| Error::Tokenize { symbol: w.into() })
            })
            .collect()
    }

    pub fn decode(&self, ids: &[u32]) -> String {
        ids.iter()
            .map(|&id| self.tokens.get(id as usize).map(|s| s.as_str()).unwrap_or("<unk>"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Report every word in `texts` missing from the vocabulary.
    pub fn coverage_report<'a, I: IntoIterator<Item = &'a str>>(&self, texts: I) -> Vec<String> {
        let mut missing = BTreeSet::new();
        for text in texts {
            for w in text.split_whitespace() {
                if !self.index.contains_key(w) {
                    missing.insert(w.to_string());
                }
            }
        }
        missing.into_iter().collect()
    }

    /// Sequence layout used everywhere: BOS question SEP answer EOS.
    pub fn encode_qa(&self, question: &str, answer: &str) -> Result<Vec<u32>> {
        let mut ids = vec![BOS];
        ids.extend(self.encode(question)?);
        ids.push(SEP);
        ids.extend(self.encode(answer)?);
        ids.push(EOS);
        Ok(ids)
    }

    pub fn encode_prompt(&self, question: &str) -> Result<Vec<u32>> {
        let mut ids = vec![BOS];
        ids.extend(self.encode(question)?);
        ids.push(SEP);
        Ok(ids)
    }

    pub fn digest(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        for t in &self.tokens {
            h.update(t.as_bytes());
            h.update([b'\n']);
        }
        h.finalize().into()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(&self.tokens)?;
        std::fs::write(path, json)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path)?;
        let tokens: Vec<String> = serde_json::from_str(&json)?;
        if tokens.len() < SPECIALS.len() || tokens[..4] != SPECIALS.map(String::from) {
            return Err(Error::Format("vocabulary missing special tokens".into()));
        }
        Ok(Self::from_token_list(tokens))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    #[test]
    fn empty_string_encodes_to_empty() {
        let tok = Tokenizer::from_texts(["hello world"]);
        assert_eq!(tok.encode("").unwrap(), Vec::<u32>::new());
    }

    #[test]
    fn unknown_symbol_named_in_error() {
        let tok = Tokenizer::from_texts(["hello world"]);
        match tok.encode("hello mars") {
            Err(Error::Tokenize { symbol }) => assert_eq!(symbol, "mars"),
            other => panic!("expected tokenize error, got {other:?}"),
        }
    }

    #[test]
    fn round_trips_random_corpus_strings() {
        let words: Vec<String> = (0..50).map(|i| format!("w{i}")).collect();
        let corpus = words.join(" ");
        let tok = Tokenizer::from_texts([corpus.as_str()]);
        let mut rng = Rng::new(123);
        for _ in 0..1000 {
            let n = 1 + rng.gen_range(12);
            let s: Vec<&str> = (0..n)
                .map(|_| words[rng.gen_range(words.len())].as_str())
                .collect();
            let s = s.join(" ");
            assert_eq!(tok.decode(&tok.encode(&s).unwrap()), s);
        }
    }

    #[test]
    fn fixed_answer_round_trips_byte_exact() {
        let answer = "She was born in the coastal town of Meridian Bay .";
        let tok = Tokenizer::from_texts([answer]);
        assert_eq!(tok.decode(&tok.encode(answer).unwrap()), answer);
    }

    #[test]
    fn ids_contiguous_and_specials_distinct() {
        let tok = Tokenizer::from_texts(["a b c"]);
        let ids: Vec<u32> = (0..tok.vocab_size() as u32).collect();
        let all: std::collections::HashSet<u32> = "a b c"
            .split_whitespace()
            .map(|w| tok.encode(w).unwrap()[0])
            .collect();
        assert!(all.iter().all(|id| ids.contains(id)));
        assert_eq!(
            [PAD, BOS, EOS, SEP].iter().collect::<std::collections::HashSet<_>>().len(),
            4
        );
    }
}
