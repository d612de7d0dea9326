//! Loss, optimizer, schedule, batching and the training loops built on them.

use std::collections::HashMap;
use std::fmt::Write as _;

use ndarray::{Array2, ArrayD, ArrayView2, Zip};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{oversample_training, Corpus, Excerpt, FoldSet, SpanAnnotation, DEFAULT_OVERSAMPLE_ALPHA};
use crate::encoder::{EncoderMode, ExternalVectors};
use crate::error::{Error, Result};
use crate::label::Label;
use crate::metrics::{align_spans, report_rows, score_report, AlignedPair, EvalReport};
use crate::spanmodel::{decide_spans, Activation, ModelConfig, ModelParams, SpanModel, SpanScores};
use crate::tensor::{Parameters, Real};

const PROB_CLAMP: f64 = 1e-7;
const BATCH_GROWTH: f64 = 1.001;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub peak_lr: f64,
    pub warmup_steps: usize,
    pub max_steps: usize,
    pub early_stop_patience_steps: usize,
    pub grad_accum: usize,
    pub batch_words_max: usize,
    pub batch_words_start: usize,
    pub seed: u64,
    pub eval_every: usize,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decision threshold used for dev evaluation.
    pub threshold: f64,
    /// Oversampling factor for the train split; `None` disables it.
    pub oversample_alpha: Option<f64>,
    /// Stop as soon as the dev macro-F1 reaches this value.
    pub target_dev_score: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            peak_lr: 6e-5,
            warmup_steps: 1000,
            max_steps: 20000,
            early_stop_patience_steps: 3000,
            grad_accum: 4,
            batch_words_max: 1000,
            batch_words_start: 300,
            seed: 0,
            eval_every: 200,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            threshold: crate::spanmodel::DEFAULT_THRESHOLD,
            oversample_alpha: Some(DEFAULT_OVERSAMPLE_ALPHA),
            target_dev_score: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.peak_lr.is_finite() && self.peak_lr > 0.0) {
            return fail(format!("peak_lr {} must be positive", self.peak_lr));
        }
        if self.warmup_steps >= self.max_steps {
            return fail(format!(
                "warmup_steps {} must be below max_steps {}",
                self.warmup_steps, self.max_steps
            ));
        }
        if self.batch_words_start == 0 || self.batch_words_start > self.batch_words_max {
            return fail(format!(
                "batch start {} must lie in 1..={}",
                self.batch_words_start, self.batch_words_max
            ));
        }
        if self.grad_accum == 0 || self.eval_every == 0 {
            return fail("grad_accum and eval_every must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.eps <= 0.0 {
            return fail("adam betas must lie in [0, 1) and eps must be positive".into());
        }
        if self.weight_decay < 0.0 {
            return fail("weight_decay must be non-negative".into());
        }
        if let Some(a) = self.oversample_alpha {
            if !(a > 0.0 && a <= 1.0) {
                return fail(format!("oversample_alpha {a} outside (0, 1]"));
            }
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            beta1: self.beta1,
            beta2: self.beta2,
            eps: self.eps,
            weight_decay: self.weight_decay,
        }
    }
}

// ---------------------------------------------------------------------------
// loss

/// Targets for `candidates`: a candidate whose boundaries equal a gold span
/// gets that span's label set, every other candidate gets zeros.
pub fn span_targets<F: Real>(candidates: &[(usize, usize)], gold: &[SpanAnnotation], labels: &[Label]) -> Array2<F> {
    let column: HashMap<Label, usize> = labels.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let mut by_bounds: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for s in gold {
        if let Some(&k) = column.get(&s.label) {
            by_bounds.entry((s.start, s.end)).or_default().push(k);
        }
    }
    let mut t = Array2::zeros((candidates.len(), labels.len()));
    for (row, bounds) in candidates.iter().enumerate() {
        for &k in by_bounds.get(bounds).into_iter().flatten() {
            t[[row, k]] = F::one();
        }
    }
    t
}

fn clamp_prob<F: Real>(p: F) -> F {
    p.max(F::of(PROB_CLAMP)).min(F::of(1.0 - PROB_CLAMP))
}

/// Sum (not mean) of per-cell binary cross-entropy, accumulated in f64.
pub fn bce_sum<F: Real>(probs: ArrayView2<F>, targets: ArrayView2<F>) -> f64 {
    Zip::from(&probs).and(&targets).fold(0.0, |acc, &p, &t| {
        let p = clamp_prob(p).as_f64();
        let t = t.as_f64();
        acc - (t * p.ln() + (1.0 - t) * (1.0 - p).ln())
    })
}

/// Mean binary cross-entropy over all cells; 0 for an empty matrix.
pub fn bce_loss<F: Real>(probs: ArrayView2<F>, targets: ArrayView2<F>) -> f64 {
    if probs.is_empty() {
        0.0
    } else {
        bce_sum(probs, targets) / probs.len() as f64
    }
}

/// Loss of `scores` against gold spans, targets built by [`span_targets`].
pub fn bce_loss_for_scores<F: Real>(scores: &SpanScores<F>, gold: &[SpanAnnotation], labels: &[Label]) -> f64 {
    let t = span_targets::<F>(&scores.spans, gold, labels);
    bce_loss(scores.probs.view(), t.view())
}

/// Gradient of `bce_sum / cells` with respect to the logits. Cells whose
/// probability sits on the clamp get zero gradient.
pub fn bce_logit_grad<F: Real>(probs: ArrayView2<F>, targets: ArrayView2<F>, cells: usize) -> Array2<F> {
    let inv = F::of(1.0 / cells.max(1) as f64);
    let (lo, hi) = (F::of(PROB_CLAMP), F::of(1.0 - PROB_CLAMP));
    Zip::from(&probs)
        .and(&targets)
        .map_collect(|&p, &t| if p < lo || p > hi { F::zero() } else { (p - t) * inv })
}

// ---------------------------------------------------------------------------
// schedule and optimizer

/// Linear warm-up to `peak_lr`, then linear decay to zero at `max_steps`.
pub fn lr_at_step(step: usize, config: &TrainConfig) -> f64 {
    let step = step.min(config.max_steps) as f64;
    let warmup = config.warmup_steps as f64;
    if step <= warmup {
        if warmup == 0.0 {
            config.peak_lr
        } else {
            config.peak_lr * step / warmup
        }
    } else {
        let total = config.max_steps as f64;
        (config.peak_lr * (total - step) / (total - warmup)).max(0.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        TrainConfig::default().adam()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<F> {
    pub step: u64,
    m: Vec<ArrayD<F>>,
    v: Vec<ArrayD<F>>,
}

impl<F: Real> AdamState<F> {
    pub fn new<P: Parameters<F>>(params: &P) -> Self {
        let zeros: Vec<ArrayD<F>> = params
            .tensors()
            .iter()
            .map(|(_, t)| ArrayD::zeros(t.raw_dim()))
            .collect();
        Self {
            step: 0,
            v: zeros.clone(),
            m: zeros,
        }
    }
}

/// One AdamW update with bias correction and decoupled weight decay.
/// Parameters are left untouched if any gradient is non-finite.
pub fn adamw_step<F: Real, P: Parameters<F>>(
    params: &mut P,
    grads: &P,
    state: &mut AdamState<F>,
    lr: f64,
    config: &AdamConfig,
) -> Result<()> {
    let grads = grads.tensors();
    if let Some((name, _)) = grads.iter().find(|(_, g)| g.iter().any(|v| !v.is_finite())) {
        return Err(Error::NonFiniteGradient(name.clone()));
    }
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2) = (F::of(config.beta1), F::of(config.beta2));
    let c1 = F::of(1.0 - config.beta1.powi(t));
    let c2 = F::of(1.0 - config.beta2.powi(t));
    let (lr_f, eps, decay) = (F::of(lr), F::of(config.eps), F::of(lr * config.weight_decay));
    let one = F::one();
    for (i, ((_, mut w), (_, g))) in params.tensors_mut().into_iter().zip(grads).enumerate() {
        Zip::from(&mut w)
            .and(&g)
            .and(&mut state.m[i])
            .and(&mut state.v[i])
            .for_each(|w, &g, m, v| {
                *m = b1 * *m + (one - b1) * g;
                *v = b2 * *v + (one - b2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *w = *w - lr_f * m_hat / (v_hat.sqrt() + eps) - decay * *w;
            });
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// batching

/// Word budget at `step`: the start size grown by 0.1% per step, capped.
pub fn batch_budget(step: usize, config: &TrainConfig) -> f64 {
    let grown = config.batch_words_start as f64 * BATCH_GROWTH.powf(step as f64);
    grown.min(config.batch_words_max as f64)
}

/// Greedily pack items (given their word counts) into batches of at most
/// `budget` words. Order is shuffled first when `rng` is supplied. A single
/// item larger than the budget still forms its own batch.
pub fn make_batches(word_counts: &[usize], budget: f64, rng: Option<&mut ChaCha8Rng>) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..word_counts.len()).collect();
    if let Some(rng) = rng {
        order.shuffle(rng);
    }
    let mut batches = Vec::new();
    let mut current = Vec::new();
    let mut words = 0usize;
    for i in order {
        let w = word_counts[i];
        if !current.is_empty() && (words + w) as f64 > budget {
            batches.push(std::mem::take(&mut current));
            words = 0;
        }
        current.push(i);
        words += w;
    }
    if !current.is_empty() {
        batches.push(current);
    }
    batches
}

// ---------------------------------------------------------------------------
// training loop

/// An excerpt with its candidates, targets and frozen vectors resolved.
#[derive(Clone, Debug)]
pub struct Prepared<'a> {
    pub excerpt: &'a Excerpt,
    pub candidates: Vec<(usize, usize)>,
    pub targets: Array2<f32>,
    pub frozen: Option<&'a Array2<f32>>,
}

fn frozen_for<'a>(
    excerpt: &Excerpt,
    config: &ModelConfig,
    vectors: Option<&'a ExternalVectors>,
) -> Result<Option<&'a Array2<f32>>> {
    if !config.encoder.mode.uses_external() {
        return Ok(None);
    }
    vectors
        .and_then(|v| v.get(&excerpt.id))
        .map(Some)
        .ok_or_else(|| Error::MissingVectors(excerpt.id.clone()))
}

pub fn prepare<'a>(
    excerpts: &'a [Excerpt],
    config: &ModelConfig,
    vectors: Option<&'a ExternalVectors>,
) -> Result<Vec<Prepared<'a>>> {
    excerpts
        .iter()
        .map(|ex| {
            let candidates = crate::suggester::suggest_candidates(ex, &config.suggester)?;
            let targets = span_targets(&candidates, &ex.spans, &config.labels);
            Ok(Prepared {
                excerpt: ex,
                frozen: frozen_for(ex, config, vectors)?,
                candidates,
                targets,
            })
        })
        .collect()
}

/// Forward and backward over one batch. Adds the gradient of the batch's
/// mean cell loss, times `weight`, into `grads` and returns that mean loss.
pub fn accumulate_batch(
    model: &SpanModel<f32>,
    batch: &[&Prepared<'_>],
    weight: f32,
    grads: &mut ModelParams<f32>,
    mut rng: Option<&mut ChaCha8Rng>,
) -> Result<f64> {
    let cells: usize = batch.iter().map(|p| p.targets.len()).sum();
    if cells == 0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for item in batch {
        if item.candidates.is_empty() {
            continue;
        }
        let pass = model.forward(item.excerpt, &item.candidates, item.frozen, rng.as_deref_mut())?;
        total += bce_sum(pass.probs.view(), item.targets.view());
        let mut d_logits = bce_logit_grad(pass.probs.view(), item.targets.view(), cells);
        if weight != 1.0 {
            d_logits.mapv_inplace(|v| v * weight);
        }
        model.backward(&pass, d_logits.view(), grads);
    }
    Ok(total / cells as f64)
}

/// Gold spans of `excerpt` and the model's predictions on it, aligned.
pub fn evaluate_prepared(model: &SpanModel<f32>, items: &[Prepared<'_>], threshold: f64) -> Result<Vec<AlignedPair>> {
    let mut pairs = Vec::new();
    for item in items {
        let pass = model.forward(item.excerpt, &item.candidates, item.frozen, None)?;
        let scores = SpanScores {
            spans: pass.candidates,
            probs: pass.probs,
        };
        let predicted = decide_spans(&scores, &model.config.labels, threshold, "model");
        pairs.extend(align_spans(&item.excerpt.spans, &predicted)?);
    }
    Ok(pairs)
}

pub fn evaluate_excerpts(
    model: &SpanModel<f32>,
    excerpts: &[Excerpt],
    vectors: Option<&ExternalVectors>,
    threshold: f64,
) -> Result<Option<EvalReport>> {
    let items = prepare(excerpts, &model.config, vectors)?;
    score_report(&evaluate_prepared(model, &items, threshold)?)
}

/// Dev summary stored in the training log.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DevScores {
    pub macro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub kappa: f64,
    pub mcc: f64,
}

impl From<&EvalReport> for DevScores {
    fn from(r: &EvalReport) -> Self {
        Self {
            macro_f1: r.macro_f1,
            weighted_f1: r.weighted_f1,
            accuracy: r.accuracy,
            kappa: r.kappa,
            mcc: r.mcc,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: usize,
    /// Mean step loss since the previous entry.
    pub loss: f64,
    pub lr: f64,
    pub dev: Option<DevScores>,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// The best-dev model, or the last one when there is no dev split.
    pub model: SpanModel<f32>,
    pub best_step: usize,
    pub best_dev: Option<EvalReport>,
    pub steps_run: usize,
    pub stopped_early: bool,
    /// Loss of every optimizer step, in order.
    pub losses: Vec<f64>,
    pub log: Vec<LogEntry>,
}

impl TrainOutcome {
    pub fn log_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.log {
            out.push_str(&serde_json::to_string(entry).expect("log entries serialize"));
            out.push('\n');
        }
        out
    }
}

/// Apply the configured oversampling to a train split.
pub fn training_split(train: &[Excerpt], config: &TrainConfig) -> Result<Vec<Excerpt>> {
    match config.oversample_alpha {
        Some(alpha) => oversample_training(train, alpha),
        None => Ok(train.to_vec()),
    }
}

fn dev_score(report: &Option<EvalReport>) -> f64 {
    // No pairs at all means nothing was wrong.
    report.as_ref().map_or(1.0, |r| r.macro_f1)
}

/// Train a model. `train` is used as given (oversample it beforehand, see
/// [`training_split`]); `dev` drives checkpoint selection and early stopping.
pub fn train(
    train: &[Excerpt],
    dev: &[Excerpt],
    model_config: &ModelConfig,
    config: &TrainConfig,
    vectors: Option<&ExternalVectors>,
) -> Result<TrainOutcome> {
    config.validate()?;
    model_config.validate()?;
    if train.is_empty() {
        return Err(Error::Empty("train split"));
    }
    let train_items = prepare(train, model_config, vectors)?;
    let dev_items = prepare(dev, model_config, vectors)?;
    let word_counts: Vec<usize> = train.iter().map(|e| e.len()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = SpanModel::<f32>::new(model_config.clone(), config.seed)?;
    let mut grads = ModelParams::<f32>::zeros(model_config);
    let mut adam = AdamState::new(&model.params);
    let adam_config = config.adam();

    let mut queue: Vec<Vec<usize>> = Vec::new();
    let mut losses = Vec::new();
    let mut log = Vec::new();
    let mut window = Vec::new();
    let mut best: Option<(f64, usize, Option<EvalReport>, ModelParams<f32>)> = None;
    let mut stopped_early = false;
    let mut step = 0;

    while step < config.max_steps {
        step += 1;
        grads.zero();
        let mut loss = 0.0;
        for _ in 0..config.grad_accum {
            if queue.is_empty() {
                queue = make_batches(&word_counts, batch_budget(step, config), Some(&mut rng));
                queue.reverse();
            }
            let batch: Vec<&Prepared> = queue.pop().expect("refilled").iter().map(|&i| &train_items[i]).collect();
            let weight = 1.0 / config.grad_accum as f32;
            loss += accumulate_batch(&model, &batch, weight, &mut grads, Some(&mut rng))?;
        }
        loss /= config.grad_accum as f64;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step });
        }
        let lr = lr_at_step(step, config);
        adamw_step(&mut model.params, &grads, &mut adam, lr, &adam_config)?;
        losses.push(loss);
        window.push(loss);

        let last = step == config.max_steps;
        if step % config.eval_every == 0 || last {
            let dev_report = if dev_items.is_empty() {
                None
            } else {
                score_report(&evaluate_prepared(&model, &dev_items, config.threshold)?)?
            };
            log.push(LogEntry {
                step,
                loss: window.iter().sum::<f64>() / window.len() as f64,
                lr,
                dev: dev_report.as_ref().map(DevScores::from),
            });
            window.clear();
            if !dev_items.is_empty() {
                let score = dev_score(&dev_report);
                if best.as_ref().is_none_or(|(b, ..)| score > *b) {
                    best = Some((score, step, dev_report, model.params.clone()));
                }
                let (best_score, best_step, ..) = best.as_ref().expect("just set");
                if config.target_dev_score.is_some_and(|t| *best_score >= t) {
                    stopped_early = !last;
                    break;
                }
                if step - best_step >= config.early_stop_patience_steps {
                    stopped_early = !last;
                    break;
                }
            }
        }
    }

    let steps_run = step;
    let (best_step, best_dev) = match best {
        Some((_, best_step, report, params)) => {
            model.params = params;
            (best_step, report)
        }
        None => (steps_run, None),
    };
    Ok(TrainOutcome {
        model,
        best_step,
        best_dev,
        steps_run,
        stopped_early,
        losses,
        log,
    })
}

// ---------------------------------------------------------------------------
// cross-validation

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub best_step: usize,
    pub dev: Option<EvalReport>,
    pub test: Option<EvalReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub mean: Option<f64>,
    pub min: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<FoldResult>,
    pub summary: Vec<SummaryRow>,
}

/// Mean and minimum of each report row over the reports where it is defined.
pub fn summarize(reports: &[&EvalReport]) -> Vec<SummaryRow> {
    let per_report: Vec<Vec<(String, Option<f64>)>> = reports.iter().map(|r| report_rows(r)).collect();
    let Some(first) = per_report.first() else {
        return Vec::new();
    };
    first
        .iter()
        .enumerate()
        .map(|(i, (metric, _))| {
            let values: Vec<f64> = per_report.iter().filter_map(|rows| rows[i].1).collect();
            let (mean, min) = if values.is_empty() {
                (None, None)
            } else {
                (
                    Some(values.iter().sum::<f64>() / values.len() as f64),
                    Some(values.iter().copied().fold(f64::INFINITY, f64::min)),
                )
            };
            SummaryRow {
                metric: metric.clone(),
                mean,
                min,
            }
        })
        .collect()
}

pub fn render_summary(rows: &[SummaryRow]) -> String {
    let cell = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
    let mut out = format!("{:<16} {:>7} {:>7}\n", "", "M", "Min");
    for row in rows {
        writeln!(out, "{:<16} {:>7} {:>7}", row.metric, cell(row.mean), cell(row.min)).unwrap();
    }
    out
}

/// Train one model per fold (oversampling each train split after the split
/// is made) and report test scores per fold plus their mean and minimum.
pub fn cross_validate(
    corpus: &Corpus,
    folds: &FoldSet,
    model_config: &ModelConfig,
    config: &TrainConfig,
    vectors: Option<&ExternalVectors>,
) -> Result<CvReport> {
    let mut results = Vec::with_capacity(folds.folds.len());
    for (i, fold) in folds.folds.iter().enumerate() {
        let train_split = training_split(&corpus.subset(fold.train.iter()), config)?;
        let dev = corpus.subset(fold.dev.iter());
        let test = corpus.subset(fold.test.iter());
        let outcome = train(&train_split, &dev, model_config, config, vectors)?;
        let test_report = evaluate_excerpts(&outcome.model, &test, vectors, config.threshold)?;
        results.push(FoldResult {
            fold: i,
            best_step: outcome.best_step,
            dev: outcome.best_dev,
            test: test_report,
        });
    }
    let reports: Vec<&EvalReport> = results.iter().filter_map(|r| r.test.as_ref()).collect();
    Ok(CvReport {
        summary: summarize(&reports),
        folds: results,
    })
}

// ---------------------------------------------------------------------------
// random search

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub modes: Vec<EncoderMode>,
    pub activations: Vec<Activation>,
    pub hidden: Vec<usize>,
    pub dropout: Vec<f64>,
    pub depth: Vec<usize>,
    pub lr_range: (f64, f64),
    pub seeds: Vec<u64>,
    pub grad_accum: Vec<usize>,
    pub batch_start: Vec<usize>,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            modes: vec![EncoderMode::Hashed, EncoderMode::HashedLstm],
            activations: vec![Activation::Maxout, Activation::Mish, Activation::DualMish],
            hidden: vec![128, 256, 384],
            dropout: vec![0.0, 0.2, 0.3, 0.4],
            depth: vec![1, 2],
            lr_range: (2e-5, 6e-5),
            seeds: vec![0, 808, 1993, 1234, 2023],
            grad_accum: vec![4, 8],
            batch_start: vec![300, 500, 900],
        }
    }
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        let empty = self.modes.is_empty()
            || self.activations.is_empty()
            || self.hidden.is_empty()
            || self.dropout.is_empty()
            || self.depth.is_empty()
            || self.seeds.is_empty()
            || self.grad_accum.is_empty()
            || self.batch_start.is_empty();
        if empty {
            return Err(Error::Config("every search dimension needs at least one value".into()));
        }
        let (lo, hi) = self.lr_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::Config(format!("bad learning-rate range [{lo}, {hi}]")));
        }
        Ok(())
    }

    /// Draw one point, overriding the searched fields of the base configs.
    pub fn sample(&self, base_model: &ModelConfig, base_train: &TrainConfig, rng: &mut ChaCha8Rng) -> (ModelConfig, TrainConfig) {
        fn pick<T: Copy>(values: &[T], rng: &mut ChaCha8Rng) -> T {
            *values.choose(rng).expect("validated non-empty")
        }
        let mut model = base_model.clone();
        let mut train = base_train.clone();
        model.encoder.mode = pick(&self.modes, rng);
        model.classifier.activation = pick(&self.activations, rng);
        model.classifier.hidden = pick(&self.hidden, rng);
        model.classifier.dropout = pick(&self.dropout, rng);
        model.classifier.depth = pick(&self.depth, rng);
        let (lo, hi) = self.lr_range;
        train.peak_lr = if lo == hi { lo } else { rng.gen_range(lo..=hi) };
        train.seed = pick(&self.seeds, rng);
        train.grad_accum = pick(&self.grad_accum, rng);
        train.batch_words_start = pick(&self.batch_start, rng).min(train.batch_words_max);
        (model, train)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub trial: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub best_step: usize,
    pub dev_macro_f1: f64,
    pub dev: Option<EvalReport>,
}

/// Sample `trials` configurations, train each on the fixed train/dev split
/// and rank them by dev macro-F1 (ties keep trial order).
#[allow(clippy::too_many_arguments)]
pub fn random_search(
    train_split: &[Excerpt],
    dev: &[Excerpt],
    space: &SearchSpace,
    trials: usize,
    seed: u64,
    base_model: &ModelConfig,
    base_train: &TrainConfig,
    vectors: Option<&ExternalVectors>,
) -> Result<Vec<Trial>> {
    if trials == 0 {
        return Err(Error::Config("random search needs at least one trial".into()));
    }
    space.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sampled: Vec<(ModelConfig, TrainConfig)> = (0..trials).map(|_| space.sample(base_model, base_train, &mut rng)).collect();
    let mut table = Vec::with_capacity(trials);
    for (trial, (model, train_config)) in sampled.into_iter().enumerate() {
        let split = training_split(train_split, &train_config)?;
        let outcome = train(&split, dev, &model, &train_config, vectors)?;
        table.push(Trial {
            trial,
            model,
            train: train_config,
            best_step: outcome.best_step,
            dev_macro_f1: dev_score(&outcome.best_dev),
            dev: outcome.best_dev,
        });
    }
    table.sort_by(|a, b| b.dev_macro_f1.total_cmp(&a.dev_macro_f1));
    Ok(table)
}
