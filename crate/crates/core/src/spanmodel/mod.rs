//! Span categorizer: pooled span vectors through a feed-forward block and an
//! independent-sigmoid output layer, one unit per label.

mod checkpoint;
mod ffn;
mod pool;

use ndarray::{Array1, Array2, ArrayView2, ArrayViewD, ArrayViewMutD, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Excerpt, SpanAnnotation};
use crate::encoder::{encode, encode_backward, EncoderCache, EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::suggester::{suggest_candidates, SuggesterConfig};
use crate::tensor::{sigmoid, uniform_matrix, Parameters, Real};

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use ffn::{ffn_backward, ffn_forward, ffn_forward_vec, ffn_output_dim, Activation, FfnCache, FfnLayer, FfnParams, MAXOUT_PIECES};
pub use pool::{pool_span, pool_spans, pool_spans_backward, Pool, DEFAULT_POOLING};

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierConfig {
    pub pooling: Vec<Pool>,
    pub activation: Activation,
    pub hidden: usize,
    pub depth: usize,
    pub dropout: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            pooling: DEFAULT_POOLING.to_vec(),
            activation: Activation::Maxout,
            hidden: 128,
            depth: 1,
            dropout: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub classifier: ClassifierConfig,
    pub suggester: SuggesterConfig,
    pub labels: Vec<Label>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            encoder: EncoderConfig::default(),
            classifier: ClassifierConfig::default(),
            suggester: SuggesterConfig::default(),
            labels: Label::EXPERIMENT.to_vec(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        self.encoder.validate()?;
        let c = &self.classifier;
        if c.pooling.is_empty() {
            return Err(Error::Config("pooling selection is empty".into()));
        }
        if c.hidden == 0 || !(1..=2).contains(&c.depth) {
            return Err(Error::Config("classifier needs hidden >= 1 and depth 1 or 2".into()));
        }
        if !(0.0..1.0).contains(&c.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", c.dropout)));
        }
        if self.suggester.max_ngram_len == 0 {
            return Err(Error::Config("max_ngram_len must be at least 1".into()));
        }
        if self.labels.is_empty() || self.labels.contains(&Label::Empty) {
            return Err(Error::Config("label list must be non-empty and exclude EMPTY".into()));
        }
        Ok(())
    }

    pub fn pooled_dim(&self) -> usize {
        self.encoder.output_dim() * self.classifier.pooling.len()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams<F> {
    pub encoder: EncoderParams<F>,
    pub ffn: FfnParams<F>,
    /// `labels x ffn_output`
    pub output_weight: Array2<F>,
    pub output_bias: Array1<F>,
}

impl<F: Real> ModelParams<F> {
    pub fn zeros(config: &ModelConfig) -> Self {
        let c = &config.classifier;
        Self {
            encoder: EncoderParams::zeros(&config.encoder),
            ffn: FfnParams::zeros(config.pooled_dim(), c.hidden, c.depth, c.activation),
            output_weight: Array2::zeros((config.labels.len(), ffn_output_dim(c.hidden, c.activation))),
            output_bias: Array1::zeros(config.labels.len()),
        }
    }

    pub fn init(config: &ModelConfig, rng: &mut ChaCha8Rng) -> Self {
        let c = &config.classifier;
        let ffn_out = ffn_output_dim(c.hidden, c.activation);
        Self {
            encoder: EncoderParams::init(&config.encoder, rng),
            ffn: FfnParams::init(config.pooled_dim(), c.hidden, c.depth, c.activation, rng),
            output_weight: uniform_matrix(config.labels.len(), ffn_out, ffn_out, rng),
            output_bias: Array1::zeros(config.labels.len()),
        }
    }
}

impl<F: Real> Parameters<F> for ModelParams<F> {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, F>)> {
        let mut out = Vec::new();
        if let Some(t) = &self.encoder.embeddings {
            out.push(("encoder.embeddings".to_string(), t.view().into_dyn()));
        }
        if let Some(lstm) = &self.encoder.lstm {
            for (dir, p) in [("forward", &lstm.forward), ("backward", &lstm.backward)] {
                out.push((format!("encoder.lstm.{dir}.w_input"), p.w_input.view().into_dyn()));
                out.push((format!("encoder.lstm.{dir}.w_hidden"), p.w_hidden.view().into_dyn()));
                out.push((format!("encoder.lstm.{dir}.bias"), p.bias.view().into_dyn()));
            }
        }
        for (k, stack) in self.ffn.stacks.iter().enumerate() {
            for (l, layer) in stack.iter().enumerate() {
                out.push((format!("ffn.{k}.{l}.weight"), layer.weight.view().into_dyn()));
                out.push((format!("ffn.{k}.{l}.bias"), layer.bias.view().into_dyn()));
            }
        }
        out.push(("output.weight".to_string(), self.output_weight.view().into_dyn()));
        out.push(("output.bias".to_string(), self.output_bias.view().into_dyn()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, F>)> {
        let mut out = Vec::new();
        if let Some(t) = &mut self.encoder.embeddings {
            out.push(("encoder.embeddings".to_string(), t.view_mut().into_dyn()));
        }
        if let Some(lstm) = &mut self.encoder.lstm {
            for (dir, p) in [("forward", &mut lstm.forward), ("backward", &mut lstm.backward)] {
                out.push((format!("encoder.lstm.{dir}.w_input"), p.w_input.view_mut().into_dyn()));
                out.push((format!("encoder.lstm.{dir}.w_hidden"), p.w_hidden.view_mut().into_dyn()));
                out.push((format!("encoder.lstm.{dir}.bias"), p.bias.view_mut().into_dyn()));
            }
        }
        for (k, stack) in self.ffn.stacks.iter_mut().enumerate() {
            for (l, layer) in stack.iter_mut().enumerate() {
                out.push((format!("ffn.{k}.{l}.weight"), layer.weight.view_mut().into_dyn()));
                out.push((format!("ffn.{k}.{l}.bias"), layer.bias.view_mut().into_dyn()));
            }
        }
        out.push(("output.weight".to_string(), self.output_weight.view_mut().into_dyn()));
        out.push(("output.bias".to_string(), self.output_bias.view_mut().into_dyn()));
        out
    }
}

/// Per-candidate label probabilities, rows aligned with `spans`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpanScores<F> {
    pub spans: Vec<(usize, usize)>,
    pub probs: Array2<F>,
}

/// Everything the backward pass needs from one excerpt's forward pass.
#[derive(Clone, Debug)]
pub struct ForwardPass<F> {
    pub candidates: Vec<(usize, usize)>,
    pub encoding: Array2<F>,
    encoder_cache: EncoderCache<F>,
    ffn_cache: FfnCache<F>,
    hidden: Array2<F>,
    pub logits: Array2<F>,
    pub probs: Array2<F>,
}

/// Score `candidates` given a token encoding: pool, feed-forward, logistic.
pub fn score_spans<F: Real>(
    encoding: ArrayView2<F>,
    candidates: &[(usize, usize)],
    params: &ModelParams<F>,
    config: &ModelConfig,
) -> Result<SpanScores<F>> {
    let pooled = pool_spans(encoding, candidates, &config.classifier.pooling)?;
    let (hidden, _) = ffn_forward(pooled.view(), &params.ffn, config.classifier.activation, 0.0, None)?;
    let logits = hidden.dot(&params.output_weight.t()) + &params.output_bias;
    Ok(SpanScores {
        spans: candidates.to_vec(),
        probs: logits.mapv(sigmoid),
    })
}

/// Emit each candidate whose best label clears `threshold`, with that label.
pub fn decide_spans<F: Real>(scores: &SpanScores<F>, labels: &[Label], threshold: f64, annotator: &str) -> Vec<SpanAnnotation> {
    let mut out = Vec::new();
    for (row, &(start, end)) in scores.probs.axis_iter(Axis(0)).zip(&scores.spans) {
        let mut best = 0;
        for k in 1..row.len() {
            if row[k] > row[best] {
                best = k;
            }
        }
        if !row.is_empty() && row[best].as_f64() >= threshold {
            out.push(SpanAnnotation::new(start, end, labels[best], annotator));
        }
    }
    out.sort();
    out
}

fn to_real<F: Real>(m: &Array2<f32>) -> Array2<F> {
    m.mapv(|v| F::of(v as f64))
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpanModel<F> {
    pub config: ModelConfig,
    pub params: ModelParams<F>,
}

impl<F: Real> SpanModel<F> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(&config, &mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self { config, params })
    }

    pub fn from_params(config: ModelConfig, params: ModelParams<F>) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, params })
    }

    pub fn candidates(&self, excerpt: &Excerpt) -> Result<Vec<(usize, usize)>> {
        suggest_candidates(excerpt, &self.config.suggester)
    }

    /// Forward pass over explicit candidates. Supplying `rng` switches
    /// dropout on.
    pub fn forward(
        &self,
        excerpt: &Excerpt,
        candidates: &[(usize, usize)],
        frozen: Option<&Array2<f32>>,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardPass<F>> {
        let frozen = frozen.map(to_real::<F>);
        self.forward_real(excerpt, candidates, frozen.as_ref().map(|f| f.view()), rng)
    }

    pub fn forward_real(
        &self,
        excerpt: &Excerpt,
        candidates: &[(usize, usize)],
        frozen: Option<ArrayView2<F>>,
        rng: Option<&mut ChaCha8Rng>,
    ) -> Result<ForwardPass<F>> {
        let (encoding, encoder_cache) = encode(excerpt, &self.params.encoder, &self.config.encoder, frozen)?;
        let c = &self.config.classifier;
        let pooled = pool_spans(encoding.view(), candidates, &c.pooling)?;
        let (hidden, ffn_cache) = ffn_forward(pooled.view(), &self.params.ffn, c.activation, c.dropout, rng)?;
        let logits = hidden.dot(&self.params.output_weight.t()) + &self.params.output_bias;
        let probs = logits.mapv(sigmoid);
        Ok(ForwardPass {
            candidates: candidates.to_vec(),
            encoding,
            encoder_cache,
            ffn_cache,
            hidden,
            logits,
            probs,
        })
    }

    /// Accumulate into `grads` the gradient of a loss whose derivative with
    /// respect to the logits is `d_logits`.
    pub fn backward(&self, pass: &ForwardPass<F>, d_logits: ArrayView2<F>, grads: &mut ModelParams<F>) {
        grads.output_weight += &d_logits.t().dot(&pass.hidden);
        grads.output_bias += &d_logits.sum_axis(Axis(0));
        let d_hidden = d_logits.dot(&self.params.output_weight);
        let c = &self.config.classifier;
        let d_pooled = ffn_backward(&pass.ffn_cache, d_hidden.view(), &self.params.ffn, c.activation, &mut grads.ffn);
        let mut d_encoding = Array2::zeros(pass.encoding.raw_dim());
        pool_spans_backward(pass.encoding.view(), &pass.candidates, &c.pooling, d_pooled.view(), &mut d_encoding);
        encode_backward(
            &pass.encoder_cache,
            d_encoding.view(),
            &self.params.encoder,
            &self.config.encoder,
            &mut grads.encoder,
        );
    }

    pub fn score(&self, excerpt: &Excerpt, candidates: &[(usize, usize)], frozen: Option<&Array2<f32>>) -> Result<SpanScores<F>> {
        let pass = self.forward(excerpt, candidates, frozen, None)?;
        Ok(SpanScores {
            spans: pass.candidates,
            probs: pass.probs,
        })
    }

    /// Suggest, score and keep spans whose best label reaches `threshold`.
    pub fn predict(&self, excerpt: &Excerpt, frozen: Option<&Array2<f32>>, threshold: f64) -> Result<Vec<SpanAnnotation>> {
        let candidates = self.candidates(excerpt)?;
        let scores = self.score(excerpt, &candidates, frozen)?;
        Ok(decide_spans(&scores, &self.config.labels, threshold, "model"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoder::EncoderMode;
    use ndarray::array;

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            encoder: EncoderConfig {
                embed_dim: 4,
                lstm_hidden: 3,
                hash_buckets: 97,
                mode: EncoderMode::HashedLstm,
                external_dim: None,
            },
            classifier: ClassifierConfig {
                hidden: 5,
                ..ClassifierConfig::default()
            },
            suggester: SuggesterConfig {
                use_subtrees: false,
                ..SuggesterConfig::default()
            },
            labels: Label::EXPERIMENT.to_vec(),
        }
    }

    #[test]
    fn zero_output_layer_scores_half() {
        let mut model = SpanModel::<f64>::new(tiny_config(), 1).unwrap();
        model.params.output_weight.fill(0.0);
        let ex = Excerpt::from_sentences("a", &[vec!["one", "two", "three"]]);
        let cands = model.candidates(&ex).unwrap();
        let scores = model.score(&ex, &cands, None).unwrap();
        assert!(scores.probs.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn scores_in_open_interval_and_batch_equals_single() {
        let model = SpanModel::<f64>::new(tiny_config(), 2).unwrap();
        let ex = Excerpt::from_sentences("a", &[vec!["It", "might", "not", "be"], vec!["so", "."]]);
        let cands = model.candidates(&ex).unwrap();
        let all = model.score(&ex, &cands, None).unwrap();
        assert!(all.probs.iter().all(|&p| p > 0.0 && p < 1.0));
        let mut reversed = cands.clone();
        reversed.reverse();
        let rev = model.score(&ex, &reversed, None).unwrap();
        for (i, span) in cands.iter().enumerate() {
            let single = model.score(&ex, &[*span], None).unwrap();
            let j = reversed.iter().position(|s| s == span).unwrap();
            for k in 0..10 {
                assert!((single.probs[[0, k]] - all.probs[[i, k]]).abs() < 1e-12);
                assert!((rev.probs[[j, k]] - all.probs[[i, k]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn decide_takes_argmax_above_threshold() {
        let mut probs = Array2::from_elem((2, 10), 0.1);
        probs[[0, 3]] = 0.9;
        probs[[0, 2]] = 0.3;
        let scores = SpanScores {
            spans: vec![(0, 2), (1, 3)],
            probs,
        };
        let out = decide_spans(&scores, &Label::EXPERIMENT, 0.5, "m");
        assert_eq!(out, vec![SpanAnnotation::new(0, 2, Label::Entertain, "m")]);
        assert!(decide_spans(&scores, &Label::EXPERIMENT, 0.95, "m").is_empty());
    }

    #[test]
    fn logit_shift_keeps_argmax() {
        let logits = array![[0.3, -1.0, 2.0, 0.0], [-4.0, -3.0, -3.5, -5.0]];
        let labels = &Label::EXPERIMENT[..4];
        let argmax = |shift: f64| {
            let scores = SpanScores {
                spans: vec![(0, 1), (1, 2)],
                probs: logits.mapv(|z: f64| sigmoid(z + shift)),
            };
            decide_spans(&scores, labels, 0.0, "m")
                .into_iter()
                .map(|s| s.label)
                .collect::<Vec<_>>()
        };
        assert_eq!(argmax(0.0), argmax(7.5));
        assert_eq!(argmax(0.0), argmax(-3.0));
    }

    #[test]
    fn parameter_names_are_unique() {
        let params = ModelParams::<f32>::zeros(&tiny_config());
        let names: Vec<String> = params.tensors().into_iter().map(|(n, _)| n).collect();
        let unique: std::collections::HashSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        assert_eq!(names.len(), 1 + 6 + 2 + 2);
    }
}
