//! Canonical JSON-lines serialization, one excerpt per line.

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, DepArc, Excerpt, SpanAnnotation, Token, UnknownSpan};
use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Serialize, Deserialize)]
struct JsonToken {
    s: usize,
    e: usize,
}

#[derive(Serialize, Deserialize)]
struct JsonDep {
    head: usize,
    rel: String,
}

#[derive(Serialize, Deserialize)]
struct JsonSpan {
    s: usize,
    e: usize,
    label: String,
    annotator: String,
}

#[derive(Serialize, Deserialize)]
struct JsonExcerpt {
    id: String,
    #[serde(default)]
    source: String,
    text: String,
    tokens: Vec<JsonToken>,
    sentences: Vec<[usize; 2]>,
    #[serde(default)]
    deps: Option<Vec<JsonDep>>,
    #[serde(default)]
    spans: Vec<JsonSpan>,
}

pub fn import_jsonl(path: impl AsRef<Path>, strict_labels: bool) -> Result<Corpus> {
    let path = path.as_ref();
    let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_jsonl(&data, strict_labels)
}

/// Parse JSON-lines text. With `strict_labels`, labels outside the scheme are
/// an error; otherwise they are kept aside as [`UnknownSpan`]s.
pub fn parse_jsonl(data: &str, strict_labels: bool) -> Result<Corpus> {
    let mut excerpts = Vec::new();
    let mut ids = HashSet::new();
    for (n, line) in data.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let raw: JsonExcerpt = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: n + 1,
            message: e.to_string(),
        })?;
        let excerpt = from_json(raw, strict_labels)?;
        if !ids.insert(excerpt.id.clone()) {
            return Err(Error::DuplicateId(excerpt.id));
        }
        excerpt.validate()?;
        excerpts.push(excerpt);
    }
    Ok(Corpus { excerpts })
}

fn from_json(raw: JsonExcerpt, strict_labels: bool) -> Result<Excerpt> {
    let id = raw.id;
    let mut tokens = Vec::with_capacity(raw.tokens.len());
    for (i, t) in raw.tokens.iter().enumerate() {
        let surface = raw
            .text
            .get(t.s..t.e)
            .filter(|_| t.s < t.e)
            .ok_or_else(|| Error::invalid(&id, "tokens", format!("token {i} offsets ({}, {}) invalid", t.s, t.e)))?;
        tokens.push(Token {
            surface: surface.to_string(),
            char_start: t.s,
            char_end: t.e,
        });
    }
    let mut spans = Vec::new();
    let mut unknown_spans = Vec::new();
    for s in raw.spans {
        match s.label.parse::<Label>() {
            Ok(label) => spans.push(SpanAnnotation {
                start: s.s,
                end: s.e,
                label,
                annotator: s.annotator,
            }),
            Err(_) if !strict_labels => unknown_spans.push(UnknownSpan {
                start: s.s,
                end: s.e,
                label: s.label,
                annotator: s.annotator,
            }),
            Err(_) => {
                return Err(Error::UnknownLabel {
                    excerpt: id,
                    label: s.label,
                })
            }
        }
    }
    Ok(Excerpt {
        source: raw.source,
        text: raw.text,
        tokens,
        sentences: raw.sentences.into_iter().map(|[s, e]| (s, e)).collect(),
        deps: raw.deps.map(|deps| {
            deps.into_iter()
                .map(|d| DepArc {
                    head: d.head,
                    relation: d.rel,
                })
                .collect()
        }),
        spans,
        unknown_spans,
        id,
    })
}

fn to_json(ex: &Excerpt) -> JsonExcerpt {
    let mut spans: Vec<JsonSpan> = ex
        .spans
        .iter()
        .map(|s| JsonSpan {
            s: s.start,
            e: s.end,
            label: s.label.as_str().to_string(),
            annotator: s.annotator.clone(),
        })
        .collect();
    spans.extend(ex.unknown_spans.iter().map(|s| JsonSpan {
        s: s.start,
        e: s.end,
        label: s.label.clone(),
        annotator: s.annotator.clone(),
    }));
    JsonExcerpt {
        id: ex.id.clone(),
        source: ex.source.clone(),
        text: ex.text.clone(),
        tokens: ex
            .tokens
            .iter()
            .map(|t| JsonToken {
                s: t.char_start,
                e: t.char_end,
            })
            .collect(),
        sentences: ex.sentences.iter().map(|&(s, e)| [s, e]).collect(),
        deps: ex.deps.as_ref().map(|deps| {
            deps.iter()
                .map(|d| JsonDep {
                    head: d.head,
                    rel: d.relation.clone(),
                })
                .collect()
        }),
        spans,
    }
}

pub fn export_jsonl(corpus: &Corpus) -> String {
    let mut out = String::new();
    for ex in &corpus.excerpts {
        out.push_str(&serde_json::to_string(&to_json(ex)).expect("excerpt serializes"));
        out.push('\n');
    }
    out
}

pub fn write_jsonl(corpus: &Corpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(export_jsonl(corpus).as_bytes())
        .map_err(|e| Error::io(path, e))
}
