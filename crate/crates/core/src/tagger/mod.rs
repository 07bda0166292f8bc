//! Joint tagger for discourse labels, citation spans and citation types.
//!
//! A frozen token encoder feeds three heads: two feed-forward token
//! classifiers (span BIO and typed BIO) and an attention-pooled sentence
//! classifier. Training minimises the weighted sum of the three mean
//! cross-entropies.

mod checkpoint;
mod decode;
pub mod encoder;
mod model;
pub mod nn;
mod train;

use std::path::PathBuf;
use std::sync::Arc;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{segment_paragraph, Paragraph};
use crate::schema::{CsTag, CtTag, DiscourseLabel, LabeledParagraph, SchemaError, TagSequence};

pub use checkpoint::{load_model, save_model, SCHEMA_VERSION};
pub use decode::decode_spans;
pub use encoder::{build_encoder, plan_chunks, ChunkPolicy, Encoder, EncoderConfig, HashEncoder};
pub use model::{
    gradient_check, joint_loss, loss_parts, Example, GoldTags, LossParts, LossWeights, TagScores, TaggerParams,
};
pub use train::{
    cross_validate, distant_supervision_round, evaluate, fit, folds_by_paper, score_paragraphs, train, CvReport,
    DistantRound, EpochRecord, FoldResult, TaskF1,
};

#[derive(Debug, Error)]
pub enum TaggerError {
    #[error("paragraph has no tokens")]
    EmptyParagraph,
    #[error("sentence {0} has no tokens")]
    EmptySentence(usize),
    #[error("unknown encoder `{0}`")]
    UnknownEncoder(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training example {index} is invalid: {source}")]
    InvalidExample { index: usize, source: SchemaError },
    #[error("loss diverged at epoch {epoch}, step {step}: {detail}")]
    Diverged { epoch: usize, step: usize, detail: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("checkpoint {path}: {source}")]
    Checkpoint { path: PathBuf, source: std::io::Error },
    #[error("checkpoint {path}: {source}")]
    CheckpointFormat { path: PathBuf, source: serde_json::Error },
    #[error("checkpoint schema version {found}, expected {expected}")]
    SchemaVersion { found: u32, expected: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Unused while the encoder is frozen.
    pub encoder_lr: f64,
    pub decoder_lr: f64,
    pub dropout: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Paragraph batches whose gradients are averaged into one update.
    pub steps_per_update: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            encoder_lr: 1e-5,
            decoder_lr: 5e-6,
            dropout: 0.0,
            epochs: 15,
            batch_size: 1,
            steps_per_update: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), TaggerError> {
        if !(self.encoder_lr > 0.0 && self.decoder_lr > 0.0) {
            return Err(TaggerError::Config("learning rates must be positive".into()));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.steps_per_update == 0 {
            return Err(TaggerError::Config(
                "epochs, batch_size and steps_per_update must be at least 1".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(TaggerError::Config("dropout must be in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub encoder: EncoderConfig,
    pub hidden: usize,
    /// Width of the pooled sentence encoding.
    pub value_dim: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            encoder: EncoderConfig::default(),
            hidden: 128,
            value_dim: 64,
        }
    }
}

/// Per-token and per-sentence predictions before span decoding.
#[derive(Clone, Debug, PartialEq)]
pub struct RawPrediction {
    pub tags: TagSequence,
    pub sentence_labels: Vec<DiscourseLabel>,
}

/// A trained (or freshly initialised) tagger. Inference takes `&self` and is
/// safe to share across threads.
#[derive(Clone)]
pub struct TaggerModel {
    pub config: ModelConfig,
    pub loss_weights: LossWeights,
    pub train_config: TrainConfig,
    pub params: TaggerParams,
    encoder: Arc<dyn Encoder>,
}

impl std::fmt::Debug for TaggerModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TaggerModel")
            .field("config", &self.config)
            .field("loss_weights", &self.loss_weights)
            .finish_non_exhaustive()
    }
}

impl TaggerModel {
    pub fn new(config: ModelConfig, loss_weights: LossWeights, train_config: TrainConfig) -> Result<TaggerModel, TaggerError> {
        let encoder: Arc<dyn Encoder> = Arc::from(build_encoder(&config.encoder)?);
        TaggerModel::with_encoder(config, loss_weights, train_config, encoder)
    }

    /// Uses a caller-supplied encoder in place of the configured one.
    pub fn with_encoder(
        config: ModelConfig,
        loss_weights: LossWeights,
        train_config: TrainConfig,
        encoder: Arc<dyn Encoder>,
    ) -> Result<TaggerModel, TaggerError> {
        loss_weights.check()?;
        let mut rng = ChaCha8Rng::seed_from_u64(train_config.seed);
        let params = TaggerParams::new(&mut rng, encoder.dim(), config.hidden, config.value_dim);
        Ok(TaggerModel {
            config,
            loss_weights,
            train_config,
            params,
            encoder,
        })
    }

    pub fn encoder(&self) -> &dyn Encoder {
        self.encoder.as_ref()
    }

    /// Per-token embeddings of a segmented paragraph.
    pub fn encode_paragraph(&self, paragraph: &Paragraph) -> Result<Array2<f64>, TaggerError> {
        self.encoder.encode(paragraph)
    }

    pub fn prepare(&self, paragraph: &Paragraph) -> Result<Example, TaggerError> {
        Example::new(paragraph, self.encoder.encode(paragraph)?)
    }

    pub fn scores(&self, paragraph: &Paragraph) -> Result<TagScores, TaggerError> {
        Ok(self.params.scores(&self.prepare(paragraph)?))
    }

    pub fn predict_raw(&self, paragraph: &Paragraph) -> Result<RawPrediction, TaggerError> {
        let scores = self.scores(paragraph)?;
        Ok(raw_from_scores(&scores))
    }

    /// Labels a paragraph. Unsegmented input is segmented first. The output
    /// always passes schema validation.
    pub fn predict(&self, paragraph: &Paragraph) -> Result<LabeledParagraph, TaggerError> {
        let mut p = paragraph.clone();
        if p.tokens.is_empty() || p.sentences.is_empty() {
            segment_paragraph(&mut p);
        }
        let raw = self.predict_raw(&p)?;
        let spans = decode_spans(&p, &raw.tags);
        Ok(LabeledParagraph {
            paragraph: p,
            sentence_labels: raw.sentence_labels,
            spans,
        })
    }
}

pub fn raw_from_scores(scores: &TagScores) -> RawPrediction {
    let cs = nn::argmax_rows(&scores.cs);
    let ct = nn::argmax_rows(&scores.ct);
    let disc = nn::argmax_rows(&scores.disc);
    RawPrediction {
        tags: TagSequence {
            cs_tags: cs.into_iter().map(|i| CsTag::from_index(i).expect("3 classes")).collect(),
            ct_tags: ct.into_iter().map(|i| CtTag::from_index(i).expect("5 classes")).collect(),
        },
        sentence_labels: disc
            .into_iter()
            .map(|i| DiscourseLabel::from_index(i).expect("6 classes"))
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::validate;

    fn model() -> TaggerModel {
        TaggerModel::new(ModelConfig::default(), LossWeights::default(), TrainConfig::default()).unwrap()
    }

    #[test]
    fn output_arities() {
        let m = model();
        let p = Paragraph::from_text("Lee (2019) builds parsers. They are fast.", vec![]);
        let s = m.scores(&p).unwrap();
        assert_eq!(s.cs.dim(), (p.tokens.len(), 3));
        assert_eq!(s.ct.dim(), (p.tokens.len(), 5));
        assert_eq!(s.disc.dim(), (2, 6));
        assert_eq!(s, m.scores(&p).unwrap());
    }

    #[test]
    fn citation_free_sentence() {
        let lp = model().predict(&Paragraph::from_text("We propose a new task.", vec![])).unwrap();
        assert!(lp.spans.is_empty());
        assert_eq!(lp.sentence_labels.len(), 1);
        assert_eq!(validate(&lp), vec![]);
    }

    #[test]
    fn unknown_encoder() {
        let cfg = ModelConfig {
            encoder: EncoderConfig {
                encoder_name: "nope".into(),
                ..EncoderConfig::default()
            },
            ..ModelConfig::default()
        };
        assert!(matches!(
            TaggerModel::new(cfg, LossWeights::default(), TrainConfig::default()),
            Err(TaggerError::UnknownEncoder(_))
        ));
    }
}
