//! Column-mapped token-per-row importer.
//!
//! Rows are tab-separated, one token per row, with blank lines between
//! sentences. A `#id=<id>` comment line starts a new excerpt and `#source=`
//! sets its corpus of origin; other `#` lines are ignored. The label column
//! holds `|`-separated span entries written `LABEL[spanid]`, or a bare
//! `LABEL` for a single-token span. When a separate span-id column is mapped,
//! the label column holds bare labels and the id column the parallel ids.
//! `_`, `*` and empty cells carry no spans.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, Excerpt, SpanAnnotation, UnknownSpan};
use crate::error::{Error, Result};
use crate::label::Label;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColumnMap {
    pub surface: usize,
    pub label: usize,
    pub span_id: Option<usize>,
    pub annotator: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            surface: 0,
            label: 1,
            span_id: None,
            annotator: "gold".to_string(),
        }
    }
}

pub fn import_tsv(path: impl AsRef<Path>, columns: &ColumnMap, strict_labels: bool) -> Result<Corpus> {
    let path = path.as_ref();
    let data = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "tsv".to_string());
    parse_tsv(&data, columns, strict_labels, &stem)
}

struct OpenSpan {
    label: String,
    start: usize,
    last: usize,
}

struct Builder {
    id: String,
    source: String,
    sentences: Vec<Vec<String>>,
    current: Vec<String>,
    spans: Vec<(String, usize, usize, String)>,
    open: HashMap<String, OpenSpan>,
}

impl Builder {
    fn new(id: String) -> Self {
        Self {
            id,
            source: String::new(),
            sentences: Vec::new(),
            current: Vec::new(),
            spans: Vec::new(),
            open: HashMap::new(),
        }
    }

    fn token_count(&self) -> usize {
        self.sentences.iter().map(Vec::len).sum::<usize>() + self.current.len()
    }

    fn break_sentence(&mut self) {
        if !self.current.is_empty() {
            self.sentences.push(std::mem::take(&mut self.current));
        }
    }

    fn is_empty(&self) -> bool {
        self.token_count() == 0
    }
}

/// Parse TSV text; rows before any `#id=` line form an excerpt named `{stem}-1`.
pub fn parse_tsv(data: &str, columns: &ColumnMap, strict_labels: bool, stem: &str) -> Result<Corpus> {
    let mut excerpts = Vec::new();
    let mut used_ids: HashMap<String, String> = HashMap::new();
    let mut builder = Builder::new(format!("{stem}-1"));

    for (n, line) in data.lines().enumerate() {
        let line_no = n + 1;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() {
            builder.break_sentence();
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            if let Some(id) = comment.strip_prefix("id=") {
                let finished = std::mem::replace(&mut builder, Builder::new(id.trim().to_string()));
                if !finished.is_empty() {
                    excerpts.push(finish(finished, columns, strict_labels)?);
                }
            } else if let Some(source) = comment.strip_prefix("source=") {
                builder.source = source.trim().to_string();
            }
            continue;
        }

        let cells: Vec<&str> = trimmed.split('\t').collect();
        let needed = columns.surface.max(columns.label).max(columns.span_id.unwrap_or(0));
        if cells.len() <= needed {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected at least {} columns, found {}", needed + 1, cells.len()),
            });
        }
        let surface = cells[columns.surface].trim();
        if surface.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty token surface".to_string(),
            });
        }
        let row = builder.token_count();
        builder.current.push(surface.to_string());

        let entries = span_entries(cells[columns.label], columns.span_id.map(|c| cells[c]), line_no)?;
        for (label, id) in entries {
            let Some(id) = id else {
                builder.spans.push((label, row, row + 1, String::new()));
                continue;
            };
            if let Some(owner) = used_ids.get(&id) {
                if *owner != builder.id {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("span id {id} dangles across excerpts {owner} and {}", builder.id),
                    });
                }
            }
            used_ids.insert(id.clone(), builder.id.clone());
            match builder.open.get_mut(&id) {
                Some(open) if open.last + 1 == row && open.label == label => open.last = row,
                Some(open) if open.label != label => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("span id {id} relabeled from {} to {label}", open.label),
                    })
                }
                Some(_) => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("span id {id} is not contiguous"),
                    })
                }
                None => {
                    builder.open.insert(
                        id,
                        OpenSpan {
                            label,
                            start: row,
                            last: row,
                        },
                    );
                }
            }
        }
    }
    if !builder.is_empty() {
        excerpts.push(finish(builder, columns, strict_labels)?);
    }
    Corpus::new(excerpts)
}

fn span_entries(label_cell: &str, id_cell: Option<&str>, line: usize) -> Result<Vec<(String, Option<String>)>> {
    let blank = |c: &str| matches!(c.trim(), "" | "_" | "*");
    if blank(label_cell) {
        return Ok(Vec::new());
    }
    let labels: Vec<&str> = label_cell.split('|').map(str::trim).collect();
    if let Some(ids) = id_cell {
        if blank(ids) {
            return Ok(labels.into_iter().map(|l| (l.to_string(), None)).collect());
        }
        let ids: Vec<&str> = ids.split('|').map(str::trim).collect();
        if ids.len() != labels.len() {
            return Err(Error::Parse {
                line,
                message: format!("{} labels but {} span ids", labels.len(), ids.len()),
            });
        }
        return Ok(labels
            .into_iter()
            .zip(ids)
            .map(|(l, i)| (l.to_string(), Some(i.to_string())))
            .collect());
    }
    labels
        .into_iter()
        .map(|entry| match entry.find('[') {
            Some(open) if entry.ends_with(']') && open > 0 => Ok((
                entry[..open].to_string(),
                Some(entry[open + 1..entry.len() - 1].to_string()),
            )),
            None if !entry.contains(']') => Ok((entry.to_string(), None)),
            _ => Err(Error::Parse {
                line,
                message: format!("malformed span entry {entry:?}"),
            }),
        })
        .collect()
}

fn finish(mut b: Builder, columns: &ColumnMap, strict_labels: bool) -> Result<Excerpt> {
    b.break_sentence();
    let sentences: Vec<Vec<&str>> = b
        .sentences
        .iter()
        .map(|s| s.iter().map(String::as_str).collect())
        .collect();
    let mut ex = Excerpt::from_sentences(b.id, &sentences);
    ex.source = b.source;

    let mut raw: Vec<(String, usize, usize)> = b
        .spans
        .into_iter()
        .map(|(label, s, e, _)| (label, s, e))
        .collect();
    raw.extend(b.open.into_values().map(|o| (o.label, o.start, o.last + 1)));
    raw.sort_by(|a, b| (a.1, a.2, &a.0).cmp(&(b.1, b.2, &b.0)));

    for (label, start, end) in raw {
        match label.parse::<Label>() {
            Ok(label) => {
                let span = SpanAnnotation::new(start, end, label, columns.annotator.clone());
                if !ex.spans.contains(&span) {
                    ex.spans.push(span);
                }
            }
            Err(_) if !strict_labels => ex.unknown_spans.push(UnknownSpan {
                start,
                end,
                label,
                annotator: columns.annotator.clone(),
            }),
            Err(_) => {
                return Err(Error::UnknownLabel {
                    excerpt: ex.id,
                    label,
                })
            }
        }
    }
    Ok(ex)
}
