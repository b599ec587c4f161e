//! Near-duplicate rejection for generated instructions.

use alloc::string::String;
use alloc::vec::Vec;

use crate::metric::{rouge_l, tokenize, TokenSeq};

/// A candidate is kept only if its Rouge-L F1 against every existing
/// instruction is strictly below this value.
pub const NOVELTY_THRESHOLD: f64 = 0.7;

/// True iff `candidate` scores below [`NOVELTY_THRESHOLD`] against every
/// entry of `existing`. Always true for an empty list.
pub fn is_novel<S: AsRef<str>>(candidate: &str, existing: &[S]) -> bool {
    let cand = tokenize(candidate);
    existing
        .iter()
        .all(|e| rouge_l(&cand, &tokenize(e.as_ref())).f1 < NOVELTY_THRESHOLD)
}

/// Pre-tokenized instruction set supporting repeated novelty checks.
#[derive(Debug, Clone, Default)]
pub struct NoveltyIndex {
    entries: Vec<(String, TokenSeq)>,
}

impl NoveltyIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_entries<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut index = Self::new();
        for e in entries {
            index.insert(e.into());
        }
        index
    }

    /// Adds an entry unconditionally.
    pub fn insert(&mut self, text: String) {
        let tokens = tokenize(&text);
        self.entries.push((text, tokens));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Highest Rouge-L F1 between `candidate` and any entry, `0.0` when empty.
    pub fn max_similarity(&self, candidate: &str) -> f64 {
        let cand = tokenize(candidate);
        self.entries
            .iter()
            .map(|(_, t)| rouge_l(&cand, t).f1)
            .fold(0.0, f64::max)
    }

    pub fn is_novel(&self, candidate: &str) -> bool {
        let cand = tokenize(candidate);
        self.entries
            .iter()
            .all(|(_, t)| rouge_l(&cand, t).f1 < NOVELTY_THRESHOLD)
    }

    /// Inserts `candidate` if it is novel and reports whether it was.
    pub fn try_insert(&mut self, candidate: &str) -> bool {
        let novel = self.is_novel(candidate);
        if novel {
            self.insert(candidate.into());
        }
        novel
    }
}
