//! Highlighted rendering of labelled spans for terminals and browsers.
//!
//! The text is cut at every span edge. Each piece covered by at least one
//! span is wrapped in one marker listing every active label, so overlapping
//! spans show up as adjacent pieces with different label sets.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Excerpt, SpanAnnotation};
use crate::label::Label;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RenderFormat {
    Ansi,
    Html,
}

impl FromStr for RenderFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ansi" => Ok(Self::Ansi),
            "html" => Ok(Self::Html),
            other => Err(format!("unknown format {other:?}, expected ansi or html")),
        }
    }
}

pub struct LabelStyle {
    pub label: Label,
    pub abbrev: &'static str,
    pub ansi: &'static str,
    pub html: &'static str,
}

pub const STYLES: [LabelStyle; 10] = [
    LabelStyle { label: Label::Attribution, abbrev: "ATT", ansi: "34", html: "#aec7e8" },
    LabelStyle { label: Label::Counter, abbrev: "CNT", ansi: "31", html: "#ff9896" },
    LabelStyle { label: Label::Deny, abbrev: "DNY", ansi: "91", html: "#f7b6d2" },
    LabelStyle { label: Label::Entertain, abbrev: "ENT", ansi: "32", html: "#98df8a" },
    LabelStyle { label: Label::Monogloss, abbrev: "MON", ansi: "90", html: "#c7c7c7" },
    LabelStyle { label: Label::Proclaim, abbrev: "PRO", ansi: "35", html: "#c5b0d5" },
    LabelStyle { label: Label::Citation, abbrev: "CIT", ansi: "36", html: "#9edae5" },
    LabelStyle { label: Label::Endophoric, abbrev: "END", ansi: "33", html: "#dbdb8d" },
    LabelStyle { label: Label::Justifying, abbrev: "JUS", ansi: "93", html: "#ffbb78" },
    LabelStyle { label: Label::Sources, abbrev: "SRC", ansi: "94", html: "#c49c94" },
];

pub fn style(label: Label) -> Option<&'static LabelStyle> {
    let label = label.collapsed();
    STYLES.iter().find(|s| s.label == label)
}

const ESC: char = '\x1b';
const ANSI_RESET: &str = "\x1b[0m";
const ANSI_TAG: &str = "\x1b[2m";

/// A piece of text with the indices of the spans covering it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RenderSegment<'a> {
    pub text: &'a str,
    pub start: usize,
    pub spans: Vec<usize>,
}

impl RenderSegment<'_> {
    pub fn depth(&self) -> usize {
        self.spans.len()
    }
}

fn byte_range(excerpt: &Excerpt, span: &SpanAnnotation) -> (usize, usize) {
    (
        excerpt.tokens[span.start].char_start,
        excerpt.tokens[span.end - 1].char_end,
    )
}

/// Cut the text at every span edge.
pub fn segments<'a>(excerpt: &'a Excerpt, spans: &[SpanAnnotation]) -> Vec<RenderSegment<'a>> {
    let ranges: Vec<(usize, usize)> = spans.iter().map(|s| byte_range(excerpt, s)).collect();
    let mut cuts: BTreeSet<usize> = ranges.iter().flat_map(|&(a, b)| [a, b]).collect();
    cuts.insert(0);
    cuts.insert(excerpt.text.len());
    let cuts: Vec<usize> = cuts.into_iter().collect();
    cuts.windows(2)
        .filter(|w| w[0] < w[1])
        .map(|w| RenderSegment {
            text: &excerpt.text[w[0]..w[1]],
            start: w[0],
            spans: ranges
                .iter()
                .enumerate()
                .filter(|(_, &(a, b))| a <= w[0] && w[1] <= b)
                .map(|(i, _)| i)
                .collect(),
        })
        .collect()
}

fn escape_html(text: &str, out: &mut String) {
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            c => out.push(c),
        }
    }
}

pub fn render_highlights(excerpt: &Excerpt, spans: &[SpanAnnotation], format: RenderFormat) -> String {
    let mut out = String::new();
    for seg in segments(excerpt, spans) {
        if seg.spans.is_empty() {
            match format {
                RenderFormat::Html => escape_html(seg.text, &mut out),
                RenderFormat::Ansi => out.push_str(seg.text),
            }
            continue;
        }
        let labels: Vec<Label> = seg.spans.iter().map(|&i| spans[i].label).collect();
        let first = style(labels[0]);
        match format {
            RenderFormat::Ansi => {
                let underline = if labels.len() > 1 { ";4" } else { "" };
                let abbrevs: Vec<&str> = labels.iter().map(|&l| style(l).map_or("?", |s| s.abbrev)).collect();
                write!(
                    out,
                    "{ESC}[{}{underline}m{}{ANSI_RESET}{ANSI_TAG}[{}]{ANSI_RESET}",
                    first.map_or("0", |s| s.ansi),
                    seg.text,
                    abbrevs.join("+")
                )
                .unwrap();
            }
            RenderFormat::Html => {
                let names: Vec<&str> = labels.iter().map(|l| l.as_str()).collect();
                let ids: Vec<String> = seg.spans.iter().map(|i| i.to_string()).collect();
                write!(
                    out,
                    "<mark data-labels=\"{}\" data-spans=\"{}\" data-depth=\"{}\" style=\"background:{}\">",
                    names.join(" "),
                    ids.join(" "),
                    seg.depth(),
                    first.map_or("#eeeeee", |s| s.html)
                )
                .unwrap();
                escape_html(seg.text, &mut out);
                out.push_str("</mark>");
            }
        }
    }
    if format == RenderFormat::Html {
        out = format!("<p class=\"excerpt\" data-id=\"{}\">{out}</p>", html_attr(&excerpt.id));
    }
    out
}

fn html_attr(text: &str) -> String {
    let mut out = String::new();
    escape_html(text, &mut out);
    out
}

/// Remove everything [`render_highlights`] added, recovering the text.
pub fn strip_markup(rendered: &str, format: RenderFormat) -> String {
    match format {
        RenderFormat::Ansi => {
            let mut out = String::new();
            let mut rest = rendered;
            while let Some(pos) = rest.find(ESC) {
                out.push_str(&rest[..pos]);
                rest = &rest[pos..];
                if let Some(tag) = rest.strip_prefix(ANSI_TAG) {
                    let end = tag.find(ANSI_RESET).map_or(tag.len(), |i| i + ANSI_RESET.len());
                    rest = &tag[end..];
                } else {
                    let end = rest.find('m').map_or(rest.len(), |i| i + 1);
                    rest = &rest[end..];
                }
            }
            out.push_str(rest);
            out
        }
        RenderFormat::Html => {
            let mut text = String::new();
            let mut in_tag = false;
            for c in rendered.chars() {
                match c {
                    '<' => in_tag = true,
                    '>' if in_tag => in_tag = false,
                    c if !in_tag => text.push(c),
                    _ => {}
                }
            }
            text.replace("&lt;", "<")
                .replace("&gt;", ">")
                .replace("&quot;", "\"")
                .replace("&#39;", "'")
                .replace("&amp;", "&")
        }
    }
}
