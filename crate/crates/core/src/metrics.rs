//! Span-level evaluation with the `EMPTY` alignment convention.
//!
//! Gold and predicted spans are aligned by exact boundaries. A boundary match
//! pairs the two labels (a substitution when they differ); an unmatched gold
//! span pairs with `EMPTY` on the predicted side and vice versa. All metrics
//! are computed over the resulting label pairs.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, SpanAnnotation};
use crate::error::{Error, Result};
use crate::label::Label;

pub type AlignedPair = (Label, Label);

pub fn align_spans(gold: &[SpanAnnotation], pred: &[SpanAnnotation]) -> Result<Vec<AlignedPair>> {
    fn index(spans: &[SpanAnnotation]) -> Result<BTreeMap<(usize, usize), Label>> {
        let mut map = BTreeMap::new();
        for s in spans {
            if map.insert((s.start, s.end), s.label).is_some() {
                return Err(Error::DuplicateBoundary {
                    start: s.start,
                    end: s.end,
                });
            }
        }
        Ok(map)
    }
    let gold = index(gold)?;
    let mut pred = index(pred)?;
    let mut pairs = Vec::with_capacity(gold.len() + pred.len());
    for (bounds, g) in gold {
        pairs.push((g, pred.remove(&bounds).unwrap_or(Label::Empty)));
    }
    pairs.extend(pred.into_values().map(|p| (Label::Empty, p)));
    Ok(pairs)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Gold-side count.
    pub support: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_label: BTreeMap<Label, LabelScores>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub kappa: f64,
    pub mcc: f64,
    pub pairs: usize,
}

struct Confusion {
    labels: Vec<Label>,
    counts: Vec<Vec<usize>>,
    total: usize,
}

impl Confusion {
    fn new(pairs: &[AlignedPair]) -> Self {
        let labels: Vec<Label> = pairs
            .iter()
            .flat_map(|&(g, p)| [g, p])
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let at: HashMap<Label, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let mut counts = vec![vec![0; labels.len()]; labels.len()];
        for &(g, p) in pairs {
            counts[at[&g]][at[&p]] += 1;
        }
        Confusion {
            labels,
            counts,
            total: pairs.len(),
        }
    }

    fn gold_total(&self, k: usize) -> usize {
        self.counts[k].iter().sum()
    }

    fn pred_total(&self, k: usize) -> usize {
        self.counts.iter().map(|row| row[k]).sum()
    }

    fn diagonal(&self) -> usize {
        (0..self.labels.len()).map(|k| self.counts[k][k]).sum()
    }
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Chance-corrected agreement over the label set including `EMPTY`.
pub fn cohen_kappa(pairs: &[AlignedPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Empty("aligned pairs"));
    }
    let c = Confusion::new(pairs);
    let n = c.total as f64;
    let observed = c.diagonal() as f64 / n;
    let chance: f64 = (0..c.labels.len())
        .map(|k| (c.gold_total(k) as f64 / n) * (c.pred_total(k) as f64 / n))
        .sum();
    if chance >= 1.0 {
        return if observed >= 1.0 {
            Ok(1.0)
        } else {
            Err(Error::DegenerateKappa { observed })
        };
    }
    Ok((observed - chance) / (1.0 - chance))
}

/// Multiclass Matthews correlation; 0 when either marginal is degenerate.
pub fn mcc(pairs: &[AlignedPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let c = Confusion::new(pairs);
    let s = c.total as f64;
    let correct = c.diagonal() as f64;
    let (mut pt, mut pp, mut tt) = (0.0, 0.0, 0.0);
    for k in 0..c.labels.len() {
        let t = c.gold_total(k) as f64;
        let p = c.pred_total(k) as f64;
        pt += p * t;
        pp += p * p;
        tt += t * t;
    }
    let den = ((s * s - pp) * (s * s - tt)).sqrt();
    if den == 0.0 {
        0.0
    } else {
        (correct * s - pt) / den
    }
}

/// Full report with `EMPTY` included in the averages. `None` for no pairs.
pub fn score_report(pairs: &[AlignedPair]) -> Result<Option<EvalReport>> {
    score_report_with(pairs, true)
}

/// As [`score_report`], optionally leaving `EMPTY` out of the macro and
/// weighted averages.
pub fn score_report_with(pairs: &[AlignedPair], include_empty: bool) -> Result<Option<EvalReport>> {
    if pairs.is_empty() {
        return Ok(None);
    }
    let c = Confusion::new(pairs);
    let mut per_label = BTreeMap::new();
    for (k, &label) in c.labels.iter().enumerate() {
        let tp = c.counts[k][k] as f64;
        let gold = c.gold_total(k);
        let pred = c.pred_total(k);
        let precision = ratio(tp, pred as f64);
        let recall = ratio(tp, gold as f64);
        per_label.insert(
            label,
            LabelScores {
                precision,
                recall,
                f1: ratio(2.0 * precision * recall, precision + recall),
                support: gold,
            },
        );
    }
    let averaged: Vec<&LabelScores> = per_label
        .iter()
        .filter(|(&l, _)| include_empty || l != Label::Empty)
        .map(|(_, s)| s)
        .collect();
    let macro_f1 = ratio(averaged.iter().map(|s| s.f1).sum(), averaged.len() as f64);
    let weighted_f1 = ratio(
        averaged.iter().map(|s| s.f1 * s.support as f64).sum(),
        averaged.iter().map(|s| s.support as f64).sum(),
    );
    Ok(Some(EvalReport {
        accuracy: c.diagonal() as f64 / c.total as f64,
        macro_f1,
        weighted_f1,
        kappa: cohen_kappa(pairs)?,
        mcc: mcc(pairs),
        pairs: pairs.len(),
        per_label,
    }))
}

/// Align gold and predicted spans excerpt by excerpt (matched on id, in gold
/// order) and concatenate the pairs.
pub fn align_corpora(gold: &Corpus, pred: &Corpus, gold_annotator: Option<&str>) -> Result<Vec<AlignedPair>> {
    let predicted: HashMap<&str, &[SpanAnnotation]> = pred
        .excerpts
        .iter()
        .map(|e| (e.id.as_str(), e.spans.as_slice()))
        .collect();
    let mut pairs = Vec::new();
    for ex in &gold.excerpts {
        let gold_spans: Vec<SpanAnnotation> = match gold_annotator {
            Some(a) => ex.spans_by(a).cloned().collect(),
            None => ex.spans.clone(),
        };
        let pred_spans = predicted.get(ex.id.as_str()).copied().unwrap_or(&[]);
        pairs.extend(align_spans(&gold_spans, pred_spans)?);
    }
    Ok(pairs)
}

/// Agreement between two annotators, treating `annotator_a` as gold.
pub fn agreement(corpus: &Corpus, annotator_a: &str, annotator_b: &str) -> Result<Option<EvalReport>> {
    for a in [annotator_a, annotator_b] {
        if !corpus.excerpts.iter().any(|e| e.spans_by(a).next().is_some()) {
            return Err(Error::UnknownAnnotator(a.to_string()));
        }
    }
    let mut pairs = Vec::new();
    for ex in &corpus.excerpts {
        let a: Vec<SpanAnnotation> = ex.spans_by(annotator_a).cloned().collect();
        let b: Vec<SpanAnnotation> = ex.spans_by(annotator_b).cloned().collect();
        pairs.extend(align_spans(&a, &b)?);
    }
    score_report(&pairs)
}

/// Rows in report order: per-label F1, then the aggregate metrics.
pub fn report_rows(report: &EvalReport) -> Vec<(String, Option<f64>)> {
    let mut rows: Vec<(String, Option<f64>)> = Label::EXPERIMENT
        .iter()
        .map(|l| (l.to_string(), report.per_label.get(l).map(|s| s.f1)))
        .collect();
    rows.push(("Accuracy".into(), Some(report.accuracy)));
    rows.push(("macro avg F1".into(), Some(report.macro_f1)));
    rows.push(("weighted avg F1".into(), Some(report.weighted_f1)));
    rows.push(("Cohen's Kappa".into(), Some(report.kappa)));
    rows.push(("MCC".into(), Some(report.mcc)));
    rows
}

pub fn render_report(report: &EvalReport) -> String {
    let mut out = String::new();
    for (name, value) in report_rows(report) {
        match value {
            Some(v) => writeln!(out, "{name:<16} {v:>7.4}").unwrap(),
            None => writeln!(out, "{name:<16} {:>7}", "n/a").unwrap(),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Excerpt;

    fn span(s: usize, e: usize, l: Label) -> SpanAnnotation {
        SpanAnnotation::new(s, e, l, "x")
    }

    fn binary(tp: usize, fneg: usize, fpos: usize, tn: usize) -> Vec<AlignedPair> {
        let (pos, neg) = (Label::Deny, Label::Counter);
        let mut pairs = Vec::new();
        pairs.extend(std::iter::repeat_n((pos, pos), tp));
        pairs.extend(std::iter::repeat_n((pos, neg), fneg));
        pairs.extend(std::iter::repeat_n((neg, pos), fpos));
        pairs.extend(std::iter::repeat_n((neg, neg), tn));
        pairs
    }

    #[test]
    fn alignment_example() {
        let pairs = align_spans(
            &[span(0, 2, Label::Deny)],
            &[span(0, 2, Label::Deny), span(3, 5, Label::Entertain)],
        )
        .unwrap();
        assert_eq!(pairs, vec![(Label::Deny, Label::Deny), (Label::Empty, Label::Entertain)]);
    }

    #[test]
    fn alignment_edge_cases() {
        let gold = [span(0, 2, Label::Deny), span(2, 4, Label::Counter)];
        let same = align_spans(&gold, &gold).unwrap();
        assert!(same.iter().all(|(g, p)| g == p && *g != Label::Empty));
        let none = align_spans(&gold, &[]).unwrap();
        assert!(none.iter().all(|&(_, p)| p == Label::Empty));
        let substituted = align_spans(&gold[..1], &[span(0, 2, Label::Counter)]).unwrap();
        assert_eq!(substituted, vec![(Label::Deny, Label::Counter)]);
        assert!(matches!(
            align_spans(&[span(0, 2, Label::Deny), span(0, 2, Label::Counter)], &[]),
            Err(Error::DuplicateBoundary { .. })
        ));
    }

    #[test]
    fn report_example() {
        let pairs = [(Label::Deny, Label::Deny), (Label::Empty, Label::Entertain)];
        let r = score_report(&pairs).unwrap().unwrap();
        assert_eq!(r.per_label[&Label::Deny].f1, 1.0);
        assert_eq!(r.per_label[&Label::Entertain].f1, 0.0);
        assert_eq!(r.per_label[&Label::Empty].f1, 0.0);
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.accuracy, 0.5);
        let without = score_report_with(&pairs, false).unwrap().unwrap();
        assert_eq!(without.macro_f1, 0.5);
    }

    #[test]
    fn perfect_and_empty() {
        let pairs = [(Label::Deny, Label::Deny), (Label::Counter, Label::Counter)];
        let r = score_report(&pairs).unwrap().unwrap();
        assert!(r.per_label.values().all(|s| s.f1 == 1.0));
        assert_eq!((r.accuracy, r.macro_f1, r.kappa, r.mcc), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(score_report(&[]).unwrap(), None);
    }

    #[test]
    fn kappa_hand_case() {
        let k = cohen_kappa(&binary(45, 5, 15, 35)).unwrap();
        assert!((k - 0.6).abs() < 1e-12);
    }

    #[test]
    fn mcc_hand_case() {
        let m = mcc(&binary(45, 5, 15, 35));
        let expected = (45.0 * 35.0 - 15.0 * 5.0) / (60.0f64 * 40.0 * 50.0 * 50.0).sqrt();
        assert!((m - expected).abs() < 1e-12);
        assert!((m - 0.61237).abs() < 1e-5);
    }

    #[test]
    fn degenerate_cases() {
        let all_same = [(Label::Deny, Label::Deny); 3];
        assert_eq!(cohen_kappa(&all_same).unwrap(), 1.0);
        assert_eq!(mcc(&all_same), 0.0);
        assert!(cohen_kappa(&[]).is_err());
    }

    #[test]
    fn agreement_with_copy_is_perfect() {
        let mut ex = Excerpt::from_sentences("a", &[vec!["p", "q", "r", "s"]]);
        for (s, e, l) in [(0, 1, Label::Deny), (1, 3, Label::Counter), (3, 4, Label::Entertain)] {
            ex.spans.push(SpanAnnotation::new(s, e, l, "A"));
            ex.spans.push(SpanAnnotation::new(s, e, l, "B"));
        }
        let corpus = Corpus { excerpts: vec![ex] };
        let r = agreement(&corpus, "A", "B").unwrap().unwrap();
        assert_eq!((r.kappa, r.mcc, r.accuracy), (1.0, 1.0, 1.0));
        assert!(matches!(agreement(&corpus, "A", "C"), Err(Error::UnknownAnnotator(_))));
    }

    #[test]
    fn report_rows_follow_table_order() {
        let r = score_report(&[(Label::Sources, Label::Sources)]).unwrap().unwrap();
        let rows = report_rows(&r);
        assert_eq!(rows.len(), 15);
        assert_eq!(rows[0].0, "ATTRIBUTION");
        assert_eq!(rows[9], ("SOURCES".to_string(), Some(1.0)));
        assert_eq!(rows[14].0, "MCC");
        assert!(render_report(&r).contains("n/a"));
    }
}
