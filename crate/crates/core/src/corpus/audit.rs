//! Corpus-wide consistency queries over span conventions.

use serde::{Deserialize, Serialize};

use super::Corpus;
use crate::label::Label;

/// Case-insensitive surface matcher: `*` matches any token, `a|b` any of the
/// alternatives.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub struct TokenMatcher {
    alternatives: Vec<String>,
}

impl TokenMatcher {
    pub fn matches(&self, surface: &str) -> bool {
        self.alternatives
            .iter()
            .any(|alt| alt == "*" || alt.to_lowercase() == surface.to_lowercase())
    }
}

impl From<String> for TokenMatcher {
    fn from(s: String) -> Self {
        TokenMatcher {
            alternatives: s.split('|').map(|a| a.trim().to_string()).collect(),
        }
    }
}

impl From<&str> for TokenMatcher {
    fn from(s: &str) -> Self {
        TokenMatcher::from(s.to_string())
    }
}

impl From<TokenMatcher> for String {
    fn from(m: TokenMatcher) -> String {
        m.alternatives.join("|")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditCondition {
    /// The span must not start with the trigger (e.g. `there is [no X]`
    /// rather than `[there is no X]`).
    SpanMustExcludePrefix,
    /// The span contains a trigger match and crosses a sentence boundary.
    SpanCrossesSentence,
    /// A span with a label outside the scheme contains a trigger match.
    LabelUnknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRule {
    pub id: String,
    pub trigger: Vec<TokenMatcher>,
    pub condition: AuditCondition,
    /// Labels the rule applies to; empty means all.
    #[serde(default)]
    pub labels: Vec<Label>,
}

impl AuditRule {
    fn applies_to(&self, label: Label) -> bool {
        self.labels.is_empty() || self.labels.contains(&label)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Finding {
    pub excerpt: String,
    pub start: usize,
    pub end: usize,
    pub rule: String,
    pub label: String,
}

/// Rules for the conventions the annotation guideline settles on.
pub fn default_rules() -> Vec<AuditRule> {
    vec![
        AuditRule {
            id: "there-is-no".to_string(),
            trigger: vec!["there".into(), "is|are|was|were".into(), "no".into()],
            condition: AuditCondition::SpanMustExcludePrefix,
            labels: vec![Label::Deny],
        },
        AuditRule {
            id: "cross-sentence".to_string(),
            trigger: vec!["*".into()],
            condition: AuditCondition::SpanCrossesSentence,
            labels: Vec::new(),
        },
        AuditRule {
            id: "unknown-label".to_string(),
            trigger: vec!["*".into()],
            condition: AuditCondition::LabelUnknown,
            labels: Vec::new(),
        },
    ]
}

fn matches_at(surfaces: &[&str], at: usize, pattern: &[TokenMatcher]) -> bool {
    at + pattern.len() <= surfaces.len()
        && pattern
            .iter()
            .zip(&surfaces[at..])
            .all(|(m, s)| m.matches(s))
}

fn contains(surfaces: &[&str], pattern: &[TokenMatcher]) -> bool {
    (0..surfaces.len()).any(|i| matches_at(surfaces, i, pattern))
}

/// Run every rule over every span. Rules with an empty trigger never fire.
pub fn audit_conventions(corpus: &Corpus, rules: &[AuditRule]) -> Vec<Finding> {
    let mut findings = Vec::new();
    for ex in &corpus.excerpts {
        for rule in rules.iter().filter(|r| !r.trigger.is_empty()) {
            match rule.condition {
                AuditCondition::SpanMustExcludePrefix | AuditCondition::SpanCrossesSentence => {
                    for span in ex.spans.iter().filter(|s| rule.applies_to(s.label)) {
                        let surfaces: Vec<&str> = (span.start..span.end).map(|i| ex.surface(i)).collect();
                        let hit = match rule.condition {
                            AuditCondition::SpanMustExcludePrefix => matches_at(&surfaces, 0, &rule.trigger),
                            _ => ex.crosses_sentence(span.start, span.end) && contains(&surfaces, &rule.trigger),
                        };
                        if hit {
                            findings.push(Finding {
                                excerpt: ex.id.clone(),
                                start: span.start,
                                end: span.end,
                                rule: rule.id.clone(),
                                label: span.label.to_string(),
                            });
                        }
                    }
                }
                AuditCondition::LabelUnknown => {
                    for span in &ex.unknown_spans {
                        let surfaces: Vec<&str> = (span.start..span.end).map(|i| ex.surface(i)).collect();
                        if contains(&surfaces, &rule.trigger) {
                            findings.push(Finding {
                                excerpt: ex.id.clone(),
                                start: span.start,
                                end: span.end,
                                rule: rule.id.clone(),
                                label: span.label.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    findings.sort();
    findings
}
