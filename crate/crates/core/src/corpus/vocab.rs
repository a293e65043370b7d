use std::collections::HashMap;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::io::Document;
use super::text::tokenize;
use crate::error::{Error, Result};
use crate::fsutil;

pub const UNK_TOKEN: &str = "<unk>";
pub const UNK_ID: u32 = 0;

/// Token-to-id map. Id 0 is always `<unk>`; the rest are ordered by
/// descending corpus frequency, ties broken lexicographically.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::Format(format!("vocabulary line 0 must be {UNK_TOKEN}")));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        // UNK is always present
        false
    }

    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token(&self, id: u32) -> Option<&str> {
        self.tokens.get(id as usize).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }

    pub fn encode_text(&self, text: &str) -> Vec<u32> {
        self.encode(&tokenize(text))
    }

    pub fn decode(&self, ids: &[u32]) -> Vec<&str> {
        ids.iter().map(|&i| self.token(i).unwrap_or(UNK_TOKEN)).collect()
    }

    /// File form: one token per line, line number = id.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut s = self.tokens.join("\n");
        s.push('\n');
        s.into_bytes()
    }

    /// 64-bit fingerprint of the file form; checkpoints record it.
    pub fn hash64(&self) -> u64 {
        let digest = Sha256::digest(self.to_bytes());
        let mut b = [0u8; 8];
        b.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(b)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsutil::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fsutil::read_to_string(path)?;
        Self::from_tokens(text.lines().map(str::to_string).collect())
    }
}

pub fn build_vocab(instances: &[Document], labels: &[Document], min_frequency: usize) -> Result<Vocabulary> {
    if min_frequency == 0 {
        return Err(Error::Parameter("min_frequency must be at least 1".into()));
    }
    let mut counts: HashMap<String, usize> = HashMap::new();
    for doc in instances.iter().chain(labels) {
        for t in tokenize(&doc.text) {
            *counts.entry(t).or_default() += 1;
        }
    }
    if counts.is_empty() {
        log::warn!("empty corpus: vocabulary holds only {UNK_TOKEN}");
    }
    let mut kept: Vec<(String, usize)> = counts.into_iter().filter(|(_, c)| *c >= min_frequency).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    let tokens = std::iter::once(UNK_TOKEN.to_string())
        .chain(kept.into_iter().map(|(t, _)| t))
        .collect();
    Vocabulary::from_tokens(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs(texts: &[&str]) -> Vec<Document> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| Document { id: i as u64, text: t.to_string() })
            .collect()
    }

    #[test]
    fn threshold_drops_rare_tokens() {
        let v = build_vocab(&docs(&["a a b"]), &[], 2).unwrap();
        assert_eq!(v.tokens(), [UNK_TOKEN, "a"]);
        assert_eq!(v.id("b"), UNK_ID);
    }

    #[test]
    fn frequency_then_lexicographic() {
        let v = build_vocab(&docs(&["x y", "y z"]), &[], 1).unwrap();
        assert_eq!(v.tokens(), [UNK_TOKEN, "y", "x", "z"]);
        assert_eq!(v.id("y"), 1);
    }

    #[test]
    fn labels_are_counted_too() {
        let v = build_vocab(&docs(&["k"]), &docs(&["k m"]), 2).unwrap();
        assert_eq!(v.tokens(), [UNK_TOKEN, "k"]);
    }

    #[test]
    fn deterministic_bytes_and_round_trip() {
        let corpus = docs(&["the cat sat", "the dog sat down", "a cat"]);
        let a = build_vocab(&corpus, &[], 1).unwrap();
        let b = build_vocab(&corpus, &[], 1).unwrap();
        assert_eq!(a.to_bytes(), b.to_bytes());
        assert_eq!(a.hash64(), b.hash64());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("vocab.txt");
        a.save(&path).unwrap();
        let c = Vocabulary::load(&path).unwrap();
        assert_eq!(a, c);
        assert_eq!(c.hash64(), a.hash64());
    }

    #[test]
    fn empty_corpus_has_only_unk() {
        let v = build_vocab(&[], &[], 1).unwrap();
        assert_eq!(v.len(), 1);
        assert!(build_vocab(&[], &[], 0).is_err());
    }

    #[test]
    fn load_rejects_missing_unk() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.txt");
        std::fs::write(&path, "a\nb\n").unwrap();
        assert!(matches!(Vocabulary::load(&path), Err(Error::Format(_))));
    }
}
