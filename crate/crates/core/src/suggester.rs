//! Greedy candidate spans from n-grams and dependency subtrees.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Excerpt};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuggesterConfig {
    pub max_ngram_len: usize,
    pub use_subtrees: bool,
    pub restrict_ngrams_to_sentence: bool,
}

impl Default for SuggesterConfig {
    fn default() -> Self {
        Self {
            max_ngram_len: 12,
            use_subtrees: true,
            restrict_ngrams_to_sentence: true,
        }
    }
}

/// Sorted, duplicate-free half-open token intervals.
pub type CandidateSet = Vec<(usize, usize)>;

fn ngrams_in(start: usize, end: usize, max_len: usize, out: &mut BTreeSet<(usize, usize)>) {
    for s in start..end {
        for e in s + 1..=end.min(s + max_len) {
            out.insert((s, e));
        }
    }
}

pub fn ngram_spans(excerpt: &Excerpt, config: &SuggesterConfig) -> CandidateSet {
    let mut out = BTreeSet::new();
    if config.restrict_ngrams_to_sentence {
        for &(s, e) in &excerpt.sentences {
            ngrams_in(s, e, config.max_ngram_len, &mut out);
        }
    } else {
        ngrams_in(0, excerpt.len(), config.max_ngram_len, &mut out);
    }
    out.into_iter().collect()
}

/// Intervals covered by contiguous dependency subtrees. A subtree is a token
/// plus all its transitive dependents; non-contiguous subtrees are skipped.
pub fn subtree_spans(excerpt: &Excerpt) -> Result<CandidateSet> {
    let deps = excerpt
        .deps
        .as_ref()
        .ok_or_else(|| Error::MissingParses(excerpt.id.clone()))?;
    let n = deps.len();
    let mut children = vec![Vec::new(); n];
    for (i, arc) in deps.iter().enumerate() {
        if arc.head != i {
            children[arc.head].push(i);
        }
    }
    let mut out = BTreeSet::new();
    let mut stack = Vec::new();
    for root in 0..n {
        let (mut lo, mut hi, mut size) = (root, root, 0usize);
        stack.clear();
        stack.push(root);
        while let Some(node) = stack.pop() {
            size += 1;
            lo = lo.min(node);
            hi = hi.max(node);
            stack.extend_from_slice(&children[node]);
        }
        if hi - lo + 1 == size {
            out.insert((lo, hi + 1));
        }
    }
    Ok(out.into_iter().collect())
}

pub fn suggest_candidates(excerpt: &Excerpt, config: &SuggesterConfig) -> Result<CandidateSet> {
    let mut all: BTreeSet<(usize, usize)> = ngram_spans(excerpt, config).into_iter().collect();
    if config.use_subtrees {
        all.extend(subtree_spans(excerpt)?);
    }
    Ok(all.into_iter().collect())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecallReport {
    /// `None` when the corpus has no gold spans.
    pub recall: Option<f64>,
    pub gold_spans: usize,
    pub covered: usize,
    pub mean_candidates: f64,
}

/// Fraction of gold span intervals that appear among the suggested
/// candidates of their excerpt.
pub fn suggester_recall(corpus: &Corpus, config: &SuggesterConfig) -> Result<RecallReport> {
    let (mut gold, mut covered, mut candidates) = (0usize, 0usize, 0usize);
    for ex in &corpus.excerpts {
        let cands = suggest_candidates(ex, config)?;
        candidates += cands.len();
        for span in &ex.spans {
            gold += 1;
            if cands.binary_search(&(span.start, span.end)).is_ok() {
                covered += 1;
            }
        }
    }
    Ok(RecallReport {
        recall: (gold > 0).then(|| covered as f64 / gold as f64),
        gold_spans: gold,
        covered,
        mean_candidates: if corpus.is_empty() {
            0.0
        } else {
            candidates as f64 / corpus.len() as f64
        },
    })
}
