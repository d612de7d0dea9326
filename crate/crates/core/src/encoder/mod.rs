//! Token encoders: hashed embeddings, precomputed external vectors, an
//! optional Bi-LSTM on top, and the dual trainable + frozen concatenation.

mod external;
mod hashed;
mod lstm;

use ndarray::{concatenate, s, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Excerpt;
use crate::error::{Error, Result};
use crate::tensor::{uniform_matrix, Real};

pub use external::{check_coverage, load_external_vectors, ExternalVectors, VECTOR_MAGIC};
pub use hashed::{embed_backward, embed_rows, shape, token_rows, ATTRIBUTES};
pub use lstm::{bilstm_backward, bilstm_forward, BiLstmCache, BiLstmParams, LstmParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EncoderMode {
    #[serde(rename = "hashed")]
    Hashed,
    #[serde(rename = "external")]
    External,
    #[serde(rename = "hashed+lstm")]
    HashedLstm,
    #[serde(rename = "external+lstm")]
    ExternalLstm,
    /// Trainable hashed branch concatenated with frozen external vectors.
    #[serde(rename = "dual")]
    Dual,
}

impl EncoderMode {
    pub fn uses_hashed(self) -> bool {
        matches!(self, EncoderMode::Hashed | EncoderMode::HashedLstm | EncoderMode::Dual)
    }

    pub fn uses_external(self) -> bool {
        matches!(self, EncoderMode::External | EncoderMode::ExternalLstm | EncoderMode::Dual)
    }

    pub fn uses_lstm(self) -> bool {
        matches!(self, EncoderMode::HashedLstm | EncoderMode::ExternalLstm)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EncoderConfig {
    pub embed_dim: usize,
    /// Hidden size of each LSTM direction.
    pub lstm_hidden: usize,
    pub hash_buckets: usize,
    pub mode: EncoderMode,
    pub external_dim: Option<usize>,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            embed_dim: 96,
            lstm_hidden: 200,
            hash_buckets: 1 << 16,
            mode: EncoderMode::HashedLstm,
            external_dim: None,
        }
    }
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.lstm_hidden == 0 || self.hash_buckets == 0 {
            return Err(Error::Config("encoder dimensions must be at least 1".into()));
        }
        if self.mode.uses_external() && !matches!(self.external_dim, Some(d) if d > 0) {
            return Err(Error::Config(format!(
                "encoder mode {:?} needs a positive external_dim",
                self.mode
            )));
        }
        Ok(())
    }

    fn external(&self) -> usize {
        self.external_dim.unwrap_or(0)
    }

    fn lstm_input_dim(&self) -> usize {
        match self.mode {
            EncoderMode::HashedLstm => self.embed_dim,
            _ => self.external(),
        }
    }

    /// Width of the per-token vectors handed to span pooling.
    pub fn output_dim(&self) -> usize {
        match self.mode {
            EncoderMode::Hashed => self.embed_dim,
            EncoderMode::External => self.external(),
            EncoderMode::HashedLstm | EncoderMode::ExternalLstm => 2 * self.lstm_hidden,
            EncoderMode::Dual => self.embed_dim + self.external(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderParams<F> {
    /// `hash_buckets x embed_dim`, present when the mode embeds tokens.
    pub embeddings: Option<Array2<F>>,
    pub lstm: Option<BiLstmParams<F>>,
}

impl<F: Real> EncoderParams<F> {
    pub fn zeros(config: &EncoderConfig) -> Self {
        Self {
            embeddings: config
                .mode
                .uses_hashed()
                .then(|| Array2::zeros((config.hash_buckets, config.embed_dim))),
            lstm: config
                .mode
                .uses_lstm()
                .then(|| BiLstmParams::zeros(config.lstm_input_dim(), config.lstm_hidden)),
        }
    }

    pub fn init<R: Rng>(config: &EncoderConfig, rng: &mut R) -> Self {
        Self {
            embeddings: config
                .mode
                .uses_hashed()
                .then(|| uniform_matrix(config.hash_buckets, config.embed_dim, config.embed_dim, rng)),
            lstm: config
                .mode
                .uses_lstm()
                .then(|| BiLstmParams::init(config.lstm_input_dim(), config.lstm_hidden, rng)),
        }
    }
}

/// Per-token encoding, `tokens x dim`.
pub type SequenceEncoding<F> = Array2<F>;

#[derive(Clone, Debug)]
pub struct EncoderCache<F> {
    rows: Option<Vec<[usize; ATTRIBUTES]>>,
    lstm: Option<BiLstmCache<F>>,
}

fn missing_part(what: &str) -> Error {
    Error::Config(format!("encoder parameters lack {what}"))
}

/// Sum of the hashed attribute embeddings of every token.
pub fn embed_tokens<F: Real>(excerpt: &Excerpt, params: &EncoderParams<F>, config: &EncoderConfig) -> Result<SequenceEncoding<F>> {
    let table = params.embeddings.as_ref().ok_or_else(|| missing_part("an embedding table"))?;
    Ok(embed_rows(&token_rows(excerpt, config.hash_buckets), table.view()))
}

/// Full encoder forward pass. `frozen` supplies the external vectors for
/// modes that use them.
pub fn encode<F: Real>(
    excerpt: &Excerpt,
    params: &EncoderParams<F>,
    config: &EncoderConfig,
    frozen: Option<ArrayView2<F>>,
) -> Result<(SequenceEncoding<F>, EncoderCache<F>)> {
    let mut cache = EncoderCache { rows: None, lstm: None };
    let embedded = if config.mode.uses_hashed() {
        let table = params.embeddings.as_ref().ok_or_else(|| missing_part("an embedding table"))?;
        let rows = token_rows(excerpt, config.hash_buckets);
        let out = embed_rows(&rows, table.view());
        cache.rows = Some(rows);
        Some(out)
    } else {
        None
    };
    let external = if config.mode.uses_external() {
        let v = frozen.ok_or_else(|| Error::MissingVectors(excerpt.id.clone()))?;
        if v.nrows() != excerpt.len() || v.ncols() != config.external() {
            return Err(Error::DimensionMismatch {
                what: format!("external vectors of excerpt {}", excerpt.id),
                expected: config.external(),
                found: v.ncols(),
            });
        }
        Some(v)
    } else {
        None
    };

    let out = match config.mode {
        EncoderMode::Hashed => embedded.expect("hashed branch"),
        EncoderMode::External => external.expect("external branch").to_owned(),
        EncoderMode::HashedLstm | EncoderMode::ExternalLstm => {
            let lstm = params.lstm.as_ref().ok_or_else(|| missing_part("LSTM weights"))?;
            let (out, lstm_cache) = match &embedded {
                Some(e) => bilstm_forward(e.view(), lstm)?,
                None => bilstm_forward(external.expect("external branch"), lstm)?,
            };
            cache.lstm = Some(lstm_cache);
            out
        }
        EncoderMode::Dual => {
            let hashed = embedded.expect("hashed branch");
            let ext = external.expect("external branch");
            concatenate(Axis(1), &[hashed.view(), ext.view()])
                .expect("matching token counts")
        }
    };
    Ok((out, cache))
}

/// Trainable-branch concatenated with frozen vectors, per token.
pub fn dual_encode<F: Real>(
    excerpt: &Excerpt,
    params: &EncoderParams<F>,
    frozen: ArrayView2<F>,
    config: &EncoderConfig,
) -> Result<SequenceEncoding<F>> {
    if config.mode != EncoderMode::Dual {
        return Err(Error::Config("dual_encode requires mode dual".into()));
    }
    encode(excerpt, params, config, Some(frozen)).map(|(out, _)| out)
}

/// Accumulate parameter gradients for `d_out` (`tokens x output_dim`).
/// Frozen vectors receive no gradient.
pub fn encode_backward<F: Real>(
    cache: &EncoderCache<F>,
    d_out: ArrayView2<F>,
    params: &EncoderParams<F>,
    config: &EncoderConfig,
    grads: &mut EncoderParams<F>,
) {
    let d_embedded: Option<Array2<F>> = match config.mode {
        EncoderMode::Hashed => Some(d_out.to_owned()),
        EncoderMode::External => None,
        EncoderMode::HashedLstm | EncoderMode::ExternalLstm => {
            let d_in = bilstm_backward(
                cache.lstm.as_ref().expect("forward cached the LSTM"),
                d_out,
                params.lstm.as_ref().expect("LSTM params"),
                grads.lstm.as_mut().expect("LSTM grads"),
            );
            config.mode.uses_hashed().then_some(d_in)
        }
        EncoderMode::Dual => Some(d_out.slice(s![.., ..config.embed_dim]).to_owned()),
    };
    if let (Some(d), Some(rows), Some(table)) = (d_embedded, &cache.rows, grads.embeddings.as_mut()) {
        embed_backward(rows, d.view(), table);
    }
}
