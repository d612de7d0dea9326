//! Central-difference checks of every hand-written backward pass, in f64.
//! Each check returns the worst relative error seen, or a description of
//! the first entry over tolerance.

use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stancespan::corpus::{Excerpt, SpanAnnotation};
use stancespan::encoder::{
    bilstm_backward, bilstm_forward, embed_backward, embed_rows, encode, encode_backward, token_rows, BiLstmParams,
    EncoderConfig, EncoderMode, EncoderParams,
};
use stancespan::spanmodel::{
    ffn_backward, ffn_forward, Activation, ClassifierConfig, FfnParams, ModelConfig, Pool, SpanModel,
};
use stancespan::suggester::{suggest_candidates, SuggesterConfig};
use stancespan::tensor::Parameters;
use stancespan::training::{bce_logit_grad, bce_loss, span_targets};
use stancespan::Label;

pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-3;
pub const INSTANCES: u64 = 20;
const ENTRIES_PER_TENSOR: usize = 40;

/// Compare analytic gradients with central differences on a sample of
/// entries from every tensor. Returns the worst relative error.
fn check<P: Parameters<f64> + Clone>(
    params: &P,
    grads: &P,
    loss: impl Fn(&P) -> f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64, String> {
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.iter().copied().collect()))
        .collect();
    let mut worst: f64 = 0.0;
    for (ti, (name, values)) in analytic.iter().enumerate() {
        let picks: Vec<usize> = if values.len() <= ENTRIES_PER_TENSOR {
            (0..values.len()).collect()
        } else {
            (0..ENTRIES_PER_TENSOR).map(|_| rng.gen_range(0..values.len())).collect()
        };
        for k in picks {
            let eval = |delta: f64| {
                let mut p = params.clone();
                let mut tensors = p.tensors_mut();
                *tensors[ti].1.iter_mut().nth(k).unwrap() += delta;
                drop(tensors);
                loss(&p)
            };
            let numeric = (eval(STEP) - eval(-STEP)) / (2.0 * STEP);
            let a = values[k];
            let scale = a.abs().max(numeric.abs());
            let err = if scale < 1e-7 { (a - numeric).abs() } else { (a - numeric).abs() / scale };
            if err > TOLERANCE {
                return Err(format!("{name}[{k}]: analytic {a} numeric {numeric} rel {err}"));
            }
            worst = worst.max(err);
        }
    }
    Ok(worst)
}

fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
}

fn weighted_sum(out: &Array2<f64>, weights: &Array2<f64>) -> f64 {
    (out * weights).sum()
}

const WORDS: [&str; 14] = [
    "The", "results", "might", "not", "hold", "however", "we", "argue", "that", "(", "Smith", "2019", ")", "clearly",
];

fn random_excerpt(rng: &mut ChaCha8Rng, with_parse: bool) -> Excerpt {
    let sentences: Vec<Vec<&str>> = (0..rng.gen_range(1..=2))
        .map(|_| (0..rng.gen_range(2..=5)).map(|_| WORDS[rng.gen_range(0..WORDS.len())]).collect())
        .collect();
    let mut ex = Excerpt::from_sentences("r", &sentences);
    if with_parse {
        let mut deps = Vec::new();
        for &(s, e) in &ex.sentences {
            for i in s..e {
                let head = if i == s { i } else { rng.gen_range(s..i) };
                deps.push(stancespan::corpus::DepArc {
                    head,
                    relation: "dep".into(),
                });
            }
        }
        ex.deps = Some(deps);
    }
    ex
}

#[derive(Clone)]
struct Table(Array2<f64>);

impl Parameters<f64> for Table {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        vec![("table".into(), self.0.view().into_dyn())]
    }
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        vec![("table".into(), self.0.view_mut().into_dyn())]
    }
}

#[derive(Clone)]
struct Lstm(BiLstmParams<f64>);

impl Parameters<f64> for Lstm {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = Vec::new();
        for (d, p) in [("f", &self.0.forward), ("b", &self.0.backward)] {
            out.push((format!("{d}.w_input"), p.w_input.view().into_dyn()));
            out.push((format!("{d}.w_hidden"), p.w_hidden.view().into_dyn()));
            out.push((format!("{d}.bias"), p.bias.view().into_dyn()));
        }
        out
    }
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = Vec::new();
        let BiLstmParams { forward, backward } = &mut self.0;
        for (d, p) in [("f", forward), ("b", backward)] {
            out.push((format!("{d}.w_input"), p.w_input.view_mut().into_dyn()));
            out.push((format!("{d}.w_hidden"), p.w_hidden.view_mut().into_dyn()));
            out.push((format!("{d}.bias"), p.bias.view_mut().into_dyn()));
        }
        out
    }
}

#[derive(Clone)]
struct Ffn(FfnParams<f64>);

impl Parameters<f64> for Ffn {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = Vec::new();
        for (k, stack) in self.0.stacks.iter().enumerate() {
            for (l, layer) in stack.iter().enumerate() {
                out.push((format!("{k}.{l}.weight"), layer.weight.view().into_dyn()));
                out.push((format!("{k}.{l}.bias"), layer.bias.view().into_dyn()));
            }
        }
        out
    }
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = Vec::new();
        for (k, stack) in self.0.stacks.iter_mut().enumerate() {
            for (l, layer) in stack.iter_mut().enumerate() {
                out.push((format!("{k}.{l}.weight"), layer.weight.view_mut().into_dyn()));
                out.push((format!("{k}.{l}.bias"), layer.bias.view_mut().into_dyn()));
            }
        }
        out
    }
}

pub fn hashed_embedder() -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ex = random_excerpt(&mut rng, false);
        let rows = token_rows(&ex, 17);
        let table = Table(random_matrix(17, 3, &mut rng));
        let weights = random_matrix(ex.len(), 3, &mut rng);
        let mut grads = Table(Array2::zeros((17, 3)));
        embed_backward(&rows, weights.view(), &mut grads.0);
        worst = worst.max(check(&table, &grads, |t| weighted_sum(&embed_rows(&rows, t.0.view()), &weights), &mut rng)?);
    }
    Ok(worst)
}

pub fn bilstm_parameters_and_input() -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (t, d, h) = (rng.gen_range(1..6), rng.gen_range(1..4), rng.gen_range(1..4));
        let mut params = Lstm(BiLstmParams::init(d, h, &mut rng));
        // push the forget gate off its default so the check is not symmetric
        params.0.forward.bias.mapv_inplace(|b| b + rng.gen_range(-0.5..0.5));
        let x = random_matrix(t, d, &mut rng);
        let weights = random_matrix(t, 2 * h, &mut rng);

        let (_, cache) = bilstm_forward(x.view(), &params.0).unwrap();
        let mut grads = Lstm(BiLstmParams::zeros(d, h));
        let d_x = bilstm_backward(&cache, weights.view(), &params.0, &mut grads.0);
        let loss = |p: &Lstm, x: &Array2<f64>| weighted_sum(&bilstm_forward(x.view(), &p.0).unwrap().0, &weights);
        worst = worst.max(check(&params, &grads, |p| loss(p, &x), &mut rng)?);

        let input = Table(x.clone());
        worst = worst.max(check(&input, &Table(d_x), |xi| loss(&params, &xi.0), &mut rng)?);
    }
    Ok(worst)
}

pub fn dual_concatenation() -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(200 + seed);
        let ex = random_excerpt(&mut rng, false);
        let config = EncoderConfig {
            embed_dim: 3,
            lstm_hidden: 2,
            hash_buckets: 11,
            mode: EncoderMode::Dual,
            external_dim: Some(2),
        };
        let mut params = EncoderParams::<f64>::init(&config, &mut rng);
        let frozen = random_matrix(ex.len(), 2, &mut rng);
        let weights = random_matrix(ex.len(), 5, &mut rng);
        let (out, cache) = encode(&ex, &params, &config, Some(frozen.view())).unwrap();
        assert_eq!(out.slice(ndarray::s![.., 3..]), frozen);

        let mut grads = EncoderParams::<f64>::zeros(&config);
        encode_backward(&cache, weights.view(), &params, &config, &mut grads);
        let table = Table(params.embeddings.take().unwrap());
        let grad_table = Table(grads.embeddings.unwrap());
        let loss = |t: &Table| {
            let p = EncoderParams {
                embeddings: Some(t.0.clone()),
                lstm: None,
            };
            weighted_sum(&encode(&ex, &p, &config, Some(frozen.view())).unwrap().0, &weights)
        };
        worst = worst.max(check(&table, &grad_table, loss, &mut rng)?);
    }
    Ok(worst)
}

fn ffn_case(activation: Activation, seed_base: u64) -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(seed_base + seed);
        let (n, d, h, depth) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..4), rng.gen_range(1..=2));
        let mut params = Ffn(FfnParams::init(d, h, depth, activation, &mut rng));
        for stack in &mut params.0.stacks {
            for layer in stack {
                layer.bias.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
            }
        }
        let x = random_matrix(n, d, &mut rng);
        let (out, cache) = ffn_forward(x.view(), &params.0, activation, 0.0, None).unwrap();
        let weights = random_matrix(n, out.ncols(), &mut rng);
        let mut grads = Ffn(FfnParams::zeros(d, h, depth, activation));
        let d_x = ffn_backward(&cache, weights.view(), &params.0, activation, &mut grads.0);
        let loss = |p: &Ffn, x: &Array2<f64>| weighted_sum(&ffn_forward(x.view(), &p.0, activation, 0.0, None).unwrap().0, &weights);
        worst = worst.max(check(&params, &grads, |p| loss(p, &x), &mut rng)?);
        worst = worst.max(check(&Table(x.clone()), &Table(d_x), |xi| loss(&params, &xi.0), &mut rng)?);
    }
    Ok(worst)
}

pub fn ffn_maxout() -> Result<f64, String> {
    ffn_case(Activation::Maxout, 300)
}

pub fn ffn_mish() -> Result<f64, String> {
    ffn_case(Activation::Mish, 400)
}

pub fn ffn_dual_mish() -> Result<f64, String> {
    ffn_case(Activation::DualMish, 500)
}

fn tiny_model_config(mode: EncoderMode, activation: Activation, depth: usize, rng: &mut ChaCha8Rng) -> ModelConfig {
    let all = [Pool::Mean, Pool::Max, Pool::First, Pool::Last];
    let mut pooling: Vec<Pool> = all.iter().copied().filter(|_| rng.gen_bool(0.6)).collect();
    if pooling.is_empty() {
        pooling.push(all[rng.gen_range(0..4)]);
    }
    ModelConfig {
        encoder: EncoderConfig {
            embed_dim: 3,
            lstm_hidden: 2,
            hash_buckets: 13,
            mode,
            external_dim: mode.uses_external().then_some(2),
        },
        classifier: ClassifierConfig {
            pooling,
            activation,
            hidden: 3,
            depth,
            dropout: 0.0,
        },
        suggester: SuggesterConfig {
            max_ngram_len: 3,
            use_subtrees: true,
            restrict_ngrams_to_sentence: true,
        },
        labels: vec![Label::Deny, Label::Entertain, Label::Counter],
    }
}

type Instance = (SpanModel<f64>, Excerpt, Option<Array2<f64>>, Vec<(usize, usize)>, Array2<f64>);

/// Model, frozen vectors, candidates and targets for one random instance.
fn pipeline_instance(
    mode: EncoderMode,
    activation: Activation,
    rng: &mut ChaCha8Rng,
) -> Instance {
    let depth = rng.gen_range(1..=2);
    let config = tiny_model_config(mode, activation, depth, rng);
    let mut model = SpanModel::<f64>::new(config.clone(), rng.gen()).unwrap();
    model.params.output_bias = Array1::from_shape_simple_fn(config.labels.len(), || rng.gen_range(-1.0..1.0));
    let mut ex = random_excerpt(rng, true);
    let candidates = suggest_candidates(&ex, &config.suggester).unwrap();
    for _ in 0..2 {
        let (s, e) = candidates[rng.gen_range(0..candidates.len())];
        ex.spans.push(SpanAnnotation::new(s, e, config.labels[rng.gen_range(0..3)], "g"));
    }
    let targets = span_targets(&candidates, &ex.spans, &config.labels);
    let frozen = mode.uses_external().then(|| random_matrix(ex.len(), 2, rng));
    (model, ex, frozen, candidates, targets)
}

fn pipeline_loss(
    model: &SpanModel<f64>,
    ex: &Excerpt,
    frozen: &Option<Array2<f64>>,
    candidates: &[(usize, usize)],
    targets: &Array2<f64>,
) -> f64 {
    let pass = model
        .forward_real(ex, candidates, frozen.as_ref().map(|f| f.view()), None)
        .unwrap();
    bce_loss(pass.probs.view(), targets.view())
}

#[derive(Clone)]
struct Model(SpanModel<f64>);

impl Parameters<f64> for Model {
    fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        self.0.params.tensors()
    }
    fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        self.0.params.tensors_mut()
    }
}

fn pipeline_grads(
    model: &SpanModel<f64>,
    ex: &Excerpt,
    frozen: &Option<Array2<f64>>,
    candidates: &[(usize, usize)],
    targets: &Array2<f64>,
) -> Model {
    let pass = model
        .forward_real(ex, candidates, frozen.as_ref().map(|f| f.view()), None)
        .unwrap();
    let d_logits = bce_logit_grad(pass.probs.view(), targets.view(), targets.len());
    let mut grads = Model(model.clone());
    grads.0.params.zero();
    model.backward(&pass, d_logits.view(), &mut grads.0.params);
    grads
}

pub fn logistic_layer() -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    for seed in 0..INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let (model, ex, frozen, cands, targets) = pipeline_instance(EncoderMode::Hashed, Activation::Mish, &mut rng);
        let grads = pipeline_grads(&model, &ex, &frozen, &cands, &targets);
        // restrict the comparison to the output layer
        #[derive(Clone)]
        struct Out(SpanModel<f64>);
        impl Parameters<f64> for Out {
            fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
                vec![
                    ("w".into(), self.0.params.output_weight.view().into_dyn()),
                    ("b".into(), self.0.params.output_bias.view().into_dyn()),
                ]
            }
            fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
                let p = &mut self.0.params;
                vec![
                    ("w".into(), p.output_weight.view_mut().into_dyn()),
                    ("b".into(), p.output_bias.view_mut().into_dyn()),
                ]
            }
        }
        worst = worst.max(check(
            &Out(model.clone()),
            &Out(grads.0),
            |m| pipeline_loss(&m.0, &ex, &frozen, &cands, &targets),
            &mut rng,
        )?);
    }
    Ok(worst)
}

pub fn full_pipeline_through_bce() -> Result<f64, String> {
    let mut worst: f64 = 0.0;
    let modes = [
        EncoderMode::Hashed,
        EncoderMode::HashedLstm,
        EncoderMode::External,
        EncoderMode::ExternalLstm,
        EncoderMode::Dual,
    ];
    let activations = [Activation::Maxout, Activation::Mish, Activation::DualMish];
    let mut checked = 0;
    for (i, &mode) in modes.iter().enumerate() {
        for (j, &activation) in activations.iter().enumerate() {
            for seed in 0..4u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(1000 + 100 * i as u64 + 10 * j as u64 + seed);
                let (model, ex, frozen, cands, targets) = pipeline_instance(mode, activation, &mut rng);
                let grads = pipeline_grads(&model, &ex, &frozen, &cands, &targets);
                worst = worst.max(check(
                    &Model(model),
                    &grads,
                    |m| pipeline_loss(&m.0, &ex, &frozen, &cands, &targets),
                    &mut rng,
                )?);
                checked += 1;
            }
        }
    }
    if checked < 20 {
        return Err(format!("only {checked} instances"));
    }
    Ok(worst)
}
