//! Citation-oriented related-work annotation: corpus ingestion, the
//! three-task annotation schema, a joint tagger, evaluation metrics, corpus
//! analyses, a span-level generation harness and a correction-based
//! annotation service.
//!
//! Offsets everywhere are 0-based, half-open and counted in unicode code
//! points.

pub mod analysis;
pub mod annotation;
pub mod corpus;
pub mod generation;
pub mod metrics;
pub mod schema;
pub mod synth;
pub mod tagger;
pub mod text;

pub use corpus::{CitationMark, Paragraph, RelatedWorkSection};
pub use metrics::{F1Report, RougeScore};
pub use schema::{
    validate, Citation, CitationSpan, CitationType, CsTag, CtTag, DiscourseLabel, LabeledParagraph, LabeledSection,
    TagSequence, Violation,
};
pub use tagger::{LossWeights, ModelConfig, TaggerModel, TrainConfig};
pub use text::TextRange;
