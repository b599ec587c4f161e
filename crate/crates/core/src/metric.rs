//! Word tokenization and sentence-level Rouge-L.
//!
//! Rouge-L here is the F-measure with `beta = 1` over lowercase alphanumeric
//! word tokens. No stemming and no stopword removal are applied. Any score
//! with an empty side is `0.0`, including the case where both sides are empty.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::Deref;

use serde::{Deserialize, Serialize};

/// An ordered sequence of lowercase word tokens. Never contains an empty token.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TokenSeq(Vec<String>);

impl TokenSeq {
    /// Builds a sequence from already-normalized tokens, dropping empty ones.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self(
            tokens
                .into_iter()
                .map(Into::into)
                .filter(|t: &String| !t.is_empty())
                .collect(),
        )
    }

    pub fn into_inner(self) -> Vec<String> {
        self.0
    }
}

impl Deref for TokenSeq {
    type Target = [String];

    fn deref(&self) -> &[String] {
        &self.0
    }
}

/// Lowercases `text` and splits it into maximal runs of alphanumeric
/// characters. Everything else separates tokens.
pub fn tokenize(text: &str) -> TokenSeq {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            current.extend(ch.to_lowercase());
        } else if !current.is_empty() {
            tokens.push(core::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    TokenSeq(tokens)
}

/// Length of the longest common subsequence of `a` and `b`.
///
/// Runs in `O(|a|·|b|)` time and keeps a single DP row sized by the shorter input.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut row = vec![0usize; short.len() + 1];
    for x in long {
        // `diag` holds row[j - 1] from the previous iteration of the outer loop.
        let mut diag = 0;
        for (j, y) in short.iter().enumerate() {
            let above = row[j + 1];
            row[j + 1] = if x == y {
                diag + 1
            } else {
                above.max(row[j])
            };
            diag = above;
        }
    }
    row[short.len()]
}

/// Precision, recall and F1 of a Rouge-L comparison. All fields lie in `[0, 1]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl RougeScore {
    pub fn from_counts(lcs: usize, candidate_len: usize, reference_len: usize) -> Self {
        if lcs == 0 || candidate_len == 0 || reference_len == 0 {
            return Self::default();
        }
        let precision = lcs as f64 / candidate_len as f64;
        let recall = lcs as f64 / reference_len as f64;
        // 2PR/(P+R) simplifies to 2·lcs/(|c|+|r|), which is exactly symmetric.
        let f1 = (2 * lcs) as f64 / (candidate_len + reference_len) as f64;
        Self {
            precision,
            recall,
            f1,
        }
    }
}

/// Rouge-L between two token sequences.
pub fn rouge_l(candidate: &[String], reference: &[String]) -> RougeScore {
    let lcs = lcs_length(candidate, reference);
    RougeScore::from_counts(lcs, candidate.len(), reference.len())
}

/// Tokenizes both strings and returns their Rouge-L F1.
pub fn rouge_l_f1(candidate: &str, reference: &str) -> f64 {
    rouge_l(&tokenize(candidate), &tokenize(reference)).f1
}
