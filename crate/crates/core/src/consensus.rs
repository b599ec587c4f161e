//! Greedy Rouge-L consensus over three model outputs.
//!
//! The three pairwise F1 scores are computed in the fixed order
//! `(1,2), (1,3), (2,3)`. If the smallest exceeds the threshold, the first
//! element of the best-scoring pair is returned; ties go to the earliest pair.
//! Otherwise nothing is selected and the example is dropped.

use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::metric::{rouge_l, tokenize};

/// Default minimum pairwise score.
pub const DEFAULT_THRESHOLD: f64 = 0.01;

/// Candidate index pairs in evaluation order (1-based).
pub const PAIRS: [(usize, usize); 3] = [(1, 2), (1, 3), (2, 3)];

/// The three outputs for one example. `o1` comes from the model that produced
/// the instance, `o2`/`o3` from the auxiliary models.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateOutputs {
    pub outputs: [String; 3],
    pub sources: [String; 3],
}

impl CandidateOutputs {
    pub fn new(outputs: [String; 3], sources: [String; 3]) -> Self {
        Self { outputs, sources }
    }

    /// 1-based access.
    pub fn get(&self, index: usize) -> &str {
        &self.outputs[index - 1]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleDecision {
    pub selected: Option<String>,
    /// 1-based index of the selected candidate.
    pub selected_index: Option<usize>,
    /// F1 for the pairs in [`PAIRS`] order.
    pub pair_scores: [f64; 3],
    pub min_score: f64,
    pub threshold: f64,
}

impl EnsembleDecision {
    pub fn is_selected(&self) -> bool {
        self.selected.is_some()
    }
}

/// Pairwise Rouge-L F1 of three texts, in [`PAIRS`] order.
pub fn pair_scores(texts: [&str; 3]) -> [f64; 3] {
    let toks = texts.map(tokenize);
    PAIRS.map(|(i, j)| rouge_l(&toks[i - 1], &toks[j - 1]).f1)
}

/// Applies the thresholded greedy consensus to `outputs`.
pub fn ensemble_select(outputs: &CandidateOutputs, threshold: f64) -> EnsembleDecision {
    let scores = pair_scores([outputs.get(1), outputs.get(2), outputs.get(3)]);
    let min_score = scores.iter().copied().fold(f64::INFINITY, f64::min);

    let (selected, selected_index) = if min_score > threshold {
        let mut best = 0;
        for k in 1..scores.len() {
            if scores[k] > scores[best] {
                best = k;
            }
        }
        let (i, _) = PAIRS[best];
        (Some(String::from(outputs.get(i))), Some(i))
    } else {
        (None, None)
    };

    EnsembleDecision {
        selected,
        selected_index,
        pair_scores: scores,
        min_score,
        threshold,
    }
}
