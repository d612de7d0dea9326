//! Generated corpora with fixed lexical cues per label.
//!
//! Every gold span is a cue phrase (a modal for ENTERTAIN, a negator for
//! DENY, a reporting frame for ATTRIBUTION and so on) dropped between filler
//! words drawn from a vocabulary that shares no word with any cue. Each
//! sentence carries a flat dependency parse in which every cue phrase is a
//! subtree, so the full suggester runs on it.

use std::hash::Hasher;

use fnv::FnvHasher;
use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DepArc, Excerpt, SpanAnnotation};
use crate::encoder::ExternalVectors;
use crate::label::Label;

pub const GOLD_ANNOTATOR: &str = "gold";

/// Span counts per label in the published release.
pub const TABLE1_COUNTS: [(Label, usize); 10] = [
    (Label::Attribution, 1247),
    (Label::Counter, 1046),
    (Label::Deny, 887),
    (Label::Entertain, 2837),
    (Label::Monogloss, 2742),
    (Label::Proclaim, 445),
    (Label::Citation, 618),
    (Label::Endophoric, 213),
    (Label::Justifying, 966),
    (Label::Sources, 855),
];

const NAMES: [&str; 10] = ["Smith", "Lee", "Garcia", "Chen", "Okafor", "Novak", "Haddad", "Silva", "Kim", "Berg"];
const SYLLABLES: [&str; 12] = ["ba", "ko", "ri", "tu", "me", "sa", "lo", "vi", "ne", "du", "pa", "gi"];

fn cue_words() -> Vec<&'static str> {
    let mut words = vec![
        "according", "to", "argues", "that", "however", "although", "but", "not", "never", "no", "might", "may",
        "perhaps", "it", "seems", "by", "definition", "as", "a", "rule", "indeed", "of", "course", "clearly",
        "(", ")", ",", "table", "figure", "section", "because", "since", "therefore", "the", "survey", "interview",
        "corpus", "data", "results", ".",
    ];
    words.extend(NAMES);
    words
}

/// Filler words: two- and three-syllable nonsense words.
pub fn filler_vocabulary() -> Vec<String> {
    let cues: Vec<String> = cue_words().iter().map(|w| w.to_lowercase()).collect();
    let mut words = Vec::new();
    for a in SYLLABLES {
        for b in SYLLABLES {
            words.push(format!("{a}{b}"));
            for c in ["n", "r", "s"] {
                words.push(format!("{a}{b}{c}"));
            }
        }
    }
    words.retain(|w| !cues.contains(w));
    words
}

/// A cue phrase for `label`, with any name, year or number slots filled.
pub fn cue_phrase(label: Label, rng: &mut ChaCha8Rng) -> Vec<String> {
    fn name(rng: &mut ChaCha8Rng) -> String {
        NAMES[rng.gen_range(0..NAMES.len())].to_string()
    }
    let words: Vec<String> = match label.collapsed() {
        Label::Attribution => {
            let n = name(rng);
            if rng.gen_bool(0.5) {
                vec!["according".into(), "to".into(), n]
            } else {
                vec![n, "argues".into(), "that".into()]
            }
        }
        Label::Citation => {
            let n = name(rng);
            vec!["(".into(), n, ",".into(), rng.gen_range(1990..2024).to_string(), ")".into()]
        }
        Label::Endophoric => {
            let kind = ["Table", "Figure", "Section"][rng.gen_range(0..3)];
            vec![kind.into(), rng.gen_range(1..13).to_string()]
        }
        Label::Sources => {
            let kind = ["survey", "interview", "corpus"][rng.gen_range(0..3)];
            let what = ["data", "results"][rng.gen_range(0..2)];
            vec!["the".into(), kind.into(), what.into()]
        }
        other => {
            let options: &[&[&str]] = match other {
                Label::Counter => &[&["however"], &["although"], &["but"]],
                Label::Deny => &[&["not"], &["never"], &["no"]],
                Label::Entertain => &[&["might"], &["may"], &["perhaps"], &["it", "seems"]],
                Label::Monogloss => &[&["by", "definition"], &["as", "a", "rule"]],
                Label::Proclaim => &[&["indeed"], &["of", "course"], &["clearly"]],
                Label::Justifying => &[&["because"], &["since"], &["therefore"]],
                _ => unreachable!("collapsed labels are covered"),
            };
            options[rng.gen_range(0..options.len())].iter().map(|w| w.to_string()).collect()
        }
    };
    words
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub excerpts: usize,
    pub seed: u64,
    pub sentences: (usize, usize),
    pub filler: (usize, usize),
    pub max_cues_per_sentence: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            excerpts: 2000,
            seed: 7,
            sentences: (1, 3),
            filler: (4, 9),
            max_cues_per_sentence: 2,
        }
    }
}

struct Builder {
    words: Vec<String>,
    sentences: Vec<(usize, usize)>,
    heads: Vec<usize>,
    spans: Vec<SpanAnnotation>,
}

impl Builder {
    /// One sentence: fillers with the cues placed in distinct gaps, then a
    /// full stop that heads the sentence.
    fn sentence(&mut self, cues: &[Label], filler: usize, vocab: &[String], rng: &mut ChaCha8Rng) {
        let first = self.words.len();
        let mut gaps: Vec<usize> = (0..=filler).collect();
        gaps.shuffle(rng);
        let mut placed: Vec<(usize, Label)> = gaps.into_iter().zip(cues.iter().copied()).collect();
        placed.sort_by_key(|&(g, _)| g);

        let mut units: Vec<(usize, usize)> = Vec::new();
        let mut next = placed.iter().peekable();
        for gap in 0..=filler {
            while let Some(&&(g, label)) = next.peek() {
                if g != gap {
                    break;
                }
                next.next();
                let start = self.words.len();
                self.words.extend(cue_phrase(label, rng));
                let end = self.words.len();
                self.spans.push(SpanAnnotation::new(start, end, label, GOLD_ANNOTATOR));
                units.push((start, end));
            }
            if gap < filler {
                let start = self.words.len();
                self.words.push(vocab[rng.gen_range(0..vocab.len())].clone());
                units.push((start, start + 1));
            }
        }
        let root = self.words.len();
        self.words.push(".".into());
        self.heads.resize(self.words.len(), root);
        for (start, end) in units {
            let head = end - 1;
            for h in &mut self.heads[start..head] {
                *h = head;
            }
            self.heads[head] = root;
        }
        self.sentences.push((first, self.words.len()));
    }

    fn finish(self, id: String) -> Excerpt {
        let grouped: Vec<Vec<&str>> = self
            .sentences
            .iter()
            .map(|&(s, e)| self.words[s..e].iter().map(String::as_str).collect())
            .collect();
        let mut ex = Excerpt::from_sentences(id, &grouped);
        ex.source = "synthetic".into();
        ex.deps = Some(
            self.heads
                .iter()
                .enumerate()
                .map(|(i, &head)| DepArc {
                    head,
                    relation: if head == i { "root" } else { "dep" }.into(),
                })
                .collect(),
        );
        ex.spans = self.spans;
        ex
    }
}

fn excerpt_from(id: String, labels: &[Label], config: &SyntheticConfig, vocab: &[String], rng: &mut ChaCha8Rng) -> Excerpt {
    let mut b = Builder {
        words: Vec::new(),
        sentences: Vec::new(),
        heads: Vec::new(),
        spans: Vec::new(),
    };
    let per = config.max_cues_per_sentence.max(1);
    let needed = labels.len().div_ceil(per);
    let count = rng.gen_range(config.sentences.0..=config.sentences.1).max(needed).max(1);
    let mut remaining = labels;
    for s in 0..count {
        let left = count - s;
        let min_here = remaining.len().saturating_sub(per * (left - 1));
        let take = rng.gen_range(min_here..=per.min(remaining.len()));
        let (here, rest) = remaining.split_at(take);
        remaining = rest;
        let filler = rng.gen_range(config.filler.0..=config.filler.1).max(here.len());
        b.sentence(here, filler, vocab, rng);
    }
    b.finish(id)
}

/// Excerpts with labels drawn uniformly from the ten experiment labels.
pub fn synthetic_corpus(config: &SyntheticConfig) -> Corpus {
    let vocab = filler_vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let per = config.max_cues_per_sentence.max(1);
    let excerpts = (0..config.excerpts)
        .map(|i| {
            let sentences_hint = config.sentences.1.max(1);
            let n = rng.gen_range(1..=per * sentences_hint);
            let labels: Vec<Label> = (0..n).map(|_| Label::EXPERIMENT[rng.gen_range(0..10)]).collect();
            excerpt_from(format!("syn{i:05}"), &labels, config, &vocab, &mut rng)
        })
        .collect();
    Corpus::new(excerpts).expect("generated excerpts are valid")
}

/// Excerpts whose spans hit `counts` exactly, one to four spans each.
pub fn synthetic_corpus_with_counts(counts: &[(Label, usize)], seed: u64) -> Corpus {
    let vocab = filler_vocabulary();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut labels: Vec<Label> = counts
        .iter()
        .flat_map(|&(l, n)| std::iter::repeat_n(l, n))
        .collect();
    labels.shuffle(&mut rng);
    let config = SyntheticConfig {
        seed,
        ..SyntheticConfig::default()
    };
    let mut excerpts = Vec::new();
    let mut rest = labels.as_slice();
    while !rest.is_empty() {
        let take = rng.gen_range(1..=4).min(rest.len());
        let (here, tail) = rest.split_at(take);
        rest = tail;
        excerpts.push(excerpt_from(format!("cnt{:05}", excerpts.len()), here, &config, &vocab, &mut rng));
    }
    Corpus::new(excerpts).expect("generated excerpts are valid")
}

/// A stand-in for pretrained vectors: each lowercased word type maps to a
/// fixed pseudo-random vector.
pub fn synthetic_vectors(corpus: &Corpus, dim: usize, seed: u64) -> ExternalVectors {
    let mut out = ExternalVectors::new(dim);
    for ex in &corpus.excerpts {
        let mut m = Array2::zeros((ex.len(), dim));
        for (i, tok) in ex.tokens.iter().enumerate() {
            let mut h = FnvHasher::default();
            h.write(tok.surface.to_lowercase().as_bytes());
            let mut rng = ChaCha8Rng::seed_from_u64(h.finish() ^ seed);
            for v in m.row_mut(i) {
                *v = rng.gen_range(-1.0f32..1.0);
            }
        }
        out.by_excerpt.insert(ex.id.clone(), m);
    }
    out
}
