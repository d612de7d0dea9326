//! Shared helpers: a from-scratch metric oracle, random pair generators and
//! the gradient checks.
#![allow(dead_code)]

pub mod grad;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use stancespan::metrics::AlignedPair;
use stancespan::Label;

pub struct OracleScores {
    pub labels: Vec<Label>,
    pub f1: Vec<f64>,
    pub accuracy: f64,
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub kappa: f64,
    pub mcc: f64,
}

fn count(pairs: &[AlignedPair], f: impl Fn(&AlignedPair) -> bool) -> f64 {
    pairs.iter().filter(|p| f(p)).count() as f64
}

/// Direct formula evaluation from raw counts. MCC uses the triple-sum
/// form rather than the covariance form.
pub fn oracle(pairs: &[AlignedPair]) -> OracleScores {
    let mut labels: Vec<Label> = pairs.iter().flat_map(|&(g, p)| [g, p]).collect();
    labels.sort();
    labels.dedup();
    let n = pairs.len() as f64;

    let mut f1 = Vec::new();
    let mut support = Vec::new();
    for &l in &labels {
        let tp = count(pairs, |&(g, p)| g == l && p == l);
        let fp = count(pairs, |&(g, p)| g != l && p == l);
        let fneg = count(pairs, |&(g, p)| g == l && p != l);
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fneg > 0.0 { tp / (tp + fneg) } else { 0.0 };
        f1.push(if precision + recall > 0.0 { 2.0 * precision * recall / (precision + recall) } else { 0.0 });
        support.push(tp + fneg);
    }
    let accuracy = count(pairs, |&(g, p)| g == p) / n;
    let macro_f1 = f1.iter().sum::<f64>() / f1.len() as f64;
    let weighted_f1 = f1.iter().zip(&support).map(|(f, s)| f * s).sum::<f64>() / support.iter().sum::<f64>();

    let chance: f64 = labels
        .iter()
        .map(|&l| count(pairs, |&(g, _)| g == l) / n * count(pairs, |&(_, p)| p == l) / n)
        .sum();
    let kappa = if chance == 1.0 { 1.0 } else { (accuracy - chance) / (1.0 - chance) };

    let k = labels.len();
    let c = |a: usize, b: usize| count(pairs, |&(g, p)| g == labels[a] && p == labels[b]);
    let mut num = 0.0;
    for a in 0..k {
        for b in 0..k {
            for m in 0..k {
                num += c(a, a) * c(b, m) - c(a, b) * c(m, a);
            }
        }
    }
    let row = |a: usize| (0..k).map(|b| c(a, b)).sum::<f64>();
    let col = |a: usize| (0..k).map(|b| c(b, a)).sum::<f64>();
    let d1: f64 = (0..k).map(|a| row(a) * (0..k).filter(|&o| o != a).map(row).sum::<f64>()).sum();
    let d2: f64 = (0..k).map(|a| col(a) * (0..k).filter(|&o| o != a).map(col).sum::<f64>()).sum();
    let mcc = if d1 == 0.0 || d2 == 0.0 { 0.0 } else { num / (d1.sqrt() * d2.sqrt()) };

    OracleScores {
        labels,
        f1,
        accuracy,
        macro_f1,
        weighted_f1,
        kappa,
        mcc,
    }
}

/// Up to twelve distinct labels, EMPTY included, never (EMPTY, EMPTY).
pub const PAIR_LABELS: [Label; 12] = [
    Label::Attribution,
    Label::Counter,
    Label::Deny,
    Label::Entertain,
    Label::Monogloss,
    Label::Proclaim,
    Label::Citation,
    Label::Endophoric,
    Label::Justifying,
    Label::Sources,
    Label::Attribute,
    Label::Empty,
];

pub fn random_pairs(rng: &mut ChaCha8Rng, max_pairs: usize) -> Vec<AlignedPair> {
    let k = rng.gen_range(2..=PAIR_LABELS.len());
    let n = rng.gen_range(1..=max_pairs);
    let mut pairs = Vec::with_capacity(n);
    while pairs.len() < n {
        let g = PAIR_LABELS[rng.gen_range(0..k)];
        let p = if rng.gen_bool(0.5) { g } else { PAIR_LABELS[rng.gen_range(0..k)] };
        if !(g == Label::Empty && p == Label::Empty) {
            pairs.push((g, p));
        }
    }
    pairs
}

/// Largest absolute difference between the library report and the oracle.
pub fn oracle_gap(pairs: &[AlignedPair]) -> f64 {
    let report = stancespan::metrics::score_report(pairs).unwrap().unwrap();
    let o = oracle(pairs);
    let mut gap: f64 = 0.0;
    for (l, f) in o.labels.iter().zip(&o.f1) {
        gap = gap.max((report.per_label[l].f1 - f).abs());
    }
    assert_eq!(report.per_label.len(), o.labels.len());
    for (a, b) in [
        (report.accuracy, o.accuracy),
        (report.macro_f1, o.macro_f1),
        (report.weighted_f1, o.weighted_f1),
        (report.kappa, o.kappa),
        (report.mcc, o.mcc),
    ] {
        gap = gap.max((a - b).abs());
    }
    gap
}
