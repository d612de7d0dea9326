//! Span-annotated corpora: loading, validation, auditing, statistics and
//! partitioning.

mod audit;
mod folds;
mod jsonl;
mod oversample;
mod tsv;

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::Label;

pub use audit::{audit_conventions, default_rules, AuditCondition, AuditRule, Finding, TokenMatcher};
pub use folds::{make_folds, Fold, FoldSet, FOLD_COUNT};
pub use jsonl::{export_jsonl, import_jsonl, parse_jsonl, write_jsonl};
pub use oversample::{oversample_training, DEFAULT_OVERSAMPLE_ALPHA};
pub use tsv::{import_tsv, parse_tsv, ColumnMap};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Token {
    pub surface: String,
    /// Byte offsets into the excerpt text, half-open.
    pub char_start: usize,
    pub char_end: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DepArc {
    /// Governor token index; roots point at themselves.
    pub head: usize,
    pub relation: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SpanAnnotation {
    pub start: usize,
    pub end: usize,
    pub label: Label,
    pub annotator: String,
}

impl SpanAnnotation {
    pub fn new(start: usize, end: usize, label: Label, annotator: impl Into<String>) -> Self {
        Self {
            start,
            end,
            label,
            annotator: annotator.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

/// A span whose label is outside the known scheme, kept when importing
/// leniently so that audits can report it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnknownSpan {
    pub start: usize,
    pub end: usize,
    pub label: String,
    pub annotator: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Excerpt {
    pub id: String,
    pub source: String,
    pub text: String,
    pub tokens: Vec<Token>,
    /// Half-open token intervals tiling `[0, tokens.len())`.
    pub sentences: Vec<(usize, usize)>,
    pub deps: Option<Vec<DepArc>>,
    pub spans: Vec<SpanAnnotation>,
    pub unknown_spans: Vec<UnknownSpan>,
}

impl Excerpt {
    /// Build an excerpt from pre-split sentences, joining tokens with single
    /// spaces.
    pub fn from_sentences(id: impl Into<String>, sentences: &[Vec<&str>]) -> Self {
        let mut text = String::new();
        let mut tokens = Vec::new();
        let mut bounds = Vec::new();
        for sentence in sentences {
            let first = tokens.len();
            for surface in sentence {
                if !text.is_empty() {
                    text.push(' ');
                }
                let start = text.len();
                text.push_str(surface);
                tokens.push(Token {
                    surface: surface.to_string(),
                    char_start: start,
                    char_end: text.len(),
                });
            }
            if tokens.len() > first {
                bounds.push((first, tokens.len()));
            }
        }
        Excerpt {
            id: id.into(),
            source: String::new(),
            text,
            tokens,
            sentences: bounds,
            deps: None,
            spans: Vec::new(),
            unknown_spans: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn surface(&self, token: usize) -> &str {
        &self.tokens[token].surface
    }

    /// Index of the sentence containing `token`.
    pub fn sentence_of(&self, token: usize) -> Option<usize> {
        self.sentences
            .iter()
            .position(|&(s, e)| s <= token && token < e)
    }

    pub fn crosses_sentence(&self, start: usize, end: usize) -> bool {
        end > start && self.sentence_of(start) != self.sentence_of(end - 1)
    }

    pub fn spans_by<'a>(&'a self, annotator: &'a str) -> impl Iterator<Item = &'a SpanAnnotation> + 'a {
        self.spans.iter().filter(move |s| s.annotator == annotator)
    }

    pub fn validate(&self) -> Result<()> {
        let id = self.id.as_str();
        if !unicode_normalization::is_nfc(&self.text) {
            return Err(Error::invalid(id, "text", "text is not NFC-normalized"));
        }
        let mut prev_end = 0;
        for (i, tok) in self.tokens.iter().enumerate() {
            if tok.char_start >= tok.char_end {
                return Err(Error::invalid(id, "tokens", format!("token {i} is empty or reversed")));
            }
            if tok.char_start < prev_end {
                return Err(Error::invalid(id, "tokens", format!("token {i} overlaps or is out of order")));
            }
            if tok.char_end > self.text.len()
                || !self.text.is_char_boundary(tok.char_start)
                || !self.text.is_char_boundary(tok.char_end)
            {
                return Err(Error::invalid(id, "tokens", format!("token {i} offsets fall outside text")));
            }
            if self.text[tok.char_start..tok.char_end] != tok.surface {
                return Err(Error::invalid(id, "tokens", format!("token {i} surface does not match text")));
            }
            prev_end = tok.char_end;
        }

        let mut cursor = 0;
        for &(s, e) in &self.sentences {
            if s != cursor || e <= s {
                return Err(Error::invalid(id, "sentences", "sentence bounds do not tile the tokens"));
            }
            cursor = e;
        }
        if cursor != self.tokens.len() {
            return Err(Error::invalid(id, "sentences", "sentence bounds do not tile the tokens"));
        }

        if let Some(deps) = &self.deps {
            if deps.len() != self.tokens.len() {
                return Err(Error::invalid(
                    id,
                    "deps",
                    format!("{} arcs for {} tokens", deps.len(), self.tokens.len()),
                ));
            }
            if let Some(bad) = deps.iter().position(|d| d.head >= deps.len()) {
                return Err(Error::invalid(id, "deps", format!("head of token {bad} out of range")));
            }
            for start in 0..deps.len() {
                let mut node = start;
                let mut steps = 0;
                while deps[node].head != node {
                    node = deps[node].head;
                    steps += 1;
                    if steps > deps.len() {
                        return Err(Error::invalid(id, "deps", format!("cycle reachable from token {start}")));
                    }
                }
            }
        }

        let mut seen = HashSet::new();
        for span in &self.spans {
            if span.start >= span.end || span.end > self.tokens.len() {
                return Err(Error::invalid(
                    id,
                    "spans",
                    format!("span ({}, {}) outside 0..{}", span.start, span.end, self.tokens.len()),
                ));
            }
            if span.label == Label::Empty {
                return Err(Error::invalid(id, "spans", "EMPTY is not a storable label"));
            }
            if !seen.insert(span) {
                return Err(Error::invalid(
                    id,
                    "spans",
                    format!("duplicate span ({}, {}, {}, {})", span.start, span.end, span.label, span.annotator),
                ));
            }
        }
        for span in &self.unknown_spans {
            if span.start >= span.end || span.end > self.tokens.len() {
                return Err(Error::invalid(
                    id,
                    "spans",
                    format!("span ({}, {}) outside 0..{}", span.start, span.end, self.tokens.len()),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Corpus {
    pub excerpts: Vec<Excerpt>,
}

impl Corpus {
    pub fn new(excerpts: Vec<Excerpt>) -> Result<Self> {
        let corpus = Corpus { excerpts };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for ex in &self.excerpts {
            if !ids.insert(ex.id.as_str()) {
                return Err(Error::DuplicateId(ex.id.clone()));
            }
            ex.validate()?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.excerpts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.excerpts.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Excerpt> {
        self.excerpts.iter().find(|e| e.id == id)
    }

    /// Excerpts whose ids appear in `ids`, in corpus order.
    pub fn subset<'a, I>(&self, ids: I) -> Vec<Excerpt>
    where
        I: IntoIterator<Item = &'a String>,
    {
        let wanted: HashSet<&str> = ids.into_iter().map(String::as_str).collect();
        self.excerpts
            .iter()
            .filter(|e| wanted.contains(e.id.as_str()))
            .cloned()
            .collect()
    }
}

/// Fold raw categories into the ten experiment labels. Span boundaries are
/// untouched; a span whose collapsed form duplicates another is dropped.
pub fn collapse_labels(mut corpus: Corpus) -> Corpus {
    for ex in &mut corpus.excerpts {
        let mut seen = HashSet::new();
        let spans = std::mem::take(&mut ex.spans);
        ex.spans = spans
            .into_iter()
            .map(|mut s| {
                s.label = s.label.collapsed();
                s
            })
            .filter(|s| seen.insert(s.clone()))
            .collect();
    }
    corpus
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TagStats {
    pub counts: BTreeMap<Label, usize>,
    pub total_spans: usize,
    pub total_tokens: usize,
    pub total_excerpts: usize,
}

impl TagStats {
    pub fn count(&self, label: Label) -> usize {
        self.counts.get(&label).copied().unwrap_or(0)
    }
}

pub fn tag_stats<'a, I>(excerpts: I) -> TagStats
where
    I: IntoIterator<Item = &'a Excerpt>,
{
    let mut stats = TagStats::default();
    for ex in excerpts {
        stats.total_excerpts += 1;
        stats.total_tokens += ex.tokens.len();
        for span in &ex.spans {
            *stats.counts.entry(span.label).or_insert(0) += 1;
            stats.total_spans += 1;
        }
    }
    stats
}
