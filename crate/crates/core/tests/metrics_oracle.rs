mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stancespan::corpus::{Corpus, Excerpt, SpanAnnotation};
use stancespan::metrics::{agreement, cohen_kappa, mcc, score_report, AlignedPair};
use stancespan::Label;

use common::{oracle_gap, random_pairs, PAIR_LABELS};

#[test]
fn random_sets_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for _ in 0..1000 {
        let pairs = random_pairs(&mut rng, 50);
        assert!(oracle_gap(&pairs) <= 1e-10, "{pairs:?}");
    }
}

#[test]
fn metrics_stay_in_range() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let r = score_report(&random_pairs(&mut rng, 30)).unwrap().unwrap();
        for v in [r.accuracy, r.macro_f1, r.weighted_f1] {
            assert!((0.0..=1.0).contains(&v));
        }
        for v in [r.kappa, r.mcc] {
            assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&v));
        }
    }
}

#[test]
fn binary_mcc_is_pearson() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..200 {
        let n = rng.gen_range(2..40);
        let xs: Vec<(f64, f64)> = (0..n).map(|_| (rng.gen_range(0..2) as f64, rng.gen_range(0..2) as f64)).collect();
        let pairs: Vec<AlignedPair> = xs
            .iter()
            .map(|&(a, b)| {
                let l = |v: f64| if v == 1.0 { Label::Deny } else { Label::Counter };
                (l(a), l(b))
            })
            .collect();
        let mean = |f: &dyn Fn(&(f64, f64)) -> f64| xs.iter().map(f).sum::<f64>() / n as f64;
        let (ma, mb) = (mean(&|p| p.0), mean(&|p| p.1));
        let cov = mean(&|p| (p.0 - ma) * (p.1 - mb));
        let va = mean(&|p| (p.0 - ma).powi(2));
        let vb = mean(&|p| (p.1 - mb).powi(2));
        let pearson = if va == 0.0 || vb == 0.0 { 0.0 } else { cov / (va * vb).sqrt() };
        assert!((mcc(&pairs) - pearson).abs() < 1e-10);
    }
}

#[test]
fn consistent_relabelling_changes_nothing() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..300 {
        let pairs = random_pairs(&mut rng, 40);
        let mut perm = PAIR_LABELS.to_vec();
        // EMPTY keeps its role; shuffle the rest
        let last = perm.len() - 1;
        for i in (1..last).rev() {
            perm.swap(i, rng.gen_range(0..=i));
        }
        let map = |l: Label| perm[PAIR_LABELS.iter().position(|&x| x == l).unwrap()];
        let relabelled: Vec<AlignedPair> = pairs.iter().map(|&(g, p)| (map(g), map(p))).collect();
        let a = score_report(&pairs).unwrap().unwrap();
        let b = score_report(&relabelled).unwrap().unwrap();
        assert!((a.kappa - b.kappa).abs() < 1e-12);
        assert!((a.mcc - b.mcc).abs() < 1e-12);
        assert_eq!(a.accuracy, b.accuracy);
    }
}

#[test]
fn kappa_is_one_exactly_when_agreement_is_perfect() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..300 {
        let pairs = random_pairs(&mut rng, 20);
        let perfect = pairs.iter().all(|(g, p)| g == p);
        let k = cohen_kappa(&pairs).unwrap();
        assert_eq!(perfect, (k - 1.0).abs() < 1e-12, "{pairs:?}");
    }
}

#[test]
fn agreement_is_symmetric() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for round in 0..50 {
        let mut excerpts = Vec::new();
        for e in 0..4 {
            let mut ex = Excerpt::from_sentences(format!("x{e}"), &[vec!["a"; 8]]);
            for annotator in ["A", "B"] {
                let mut taken = std::collections::BTreeSet::new();
                for _ in 0..rng.gen_range(1..5) {
                    let s = rng.gen_range(0..7);
                    let end = rng.gen_range(s + 1..=8);
                    if taken.insert((s, end)) {
                        let label = Label::EXPERIMENT[rng.gen_range(0..4)];
                        ex.spans.push(SpanAnnotation::new(s, end, label, annotator));
                    }
                }
            }
            excerpts.push(ex);
        }
        let corpus = Corpus::new(excerpts).unwrap();
        let ab = agreement(&corpus, "A", "B").unwrap().unwrap();
        let ba = agreement(&corpus, "B", "A").unwrap().unwrap();
        for (x, y) in [(ab.kappa, ba.kappa), (ab.mcc, ba.mcc), (ab.accuracy, ba.accuracy), (ab.macro_f1, ba.macro_f1)] {
            assert!((x - y).abs() < 1e-12, "round {round}");
        }
    }
}
