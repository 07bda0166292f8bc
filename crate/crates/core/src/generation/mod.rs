//! Span-level citation text generation: example assembly, a text-to-text
//! model interface, mark-stripped ROUGE scoring, blinded human-evaluation
//! sheets, cross-document pretraining instances and staging data for
//! block- and paragraph-level rewriting.

mod cdlm;
mod eval;
mod marks;
mod model;
mod staging;

use std::collections::{BTreeMap, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{CitationSpan, CitationType, LabeledParagraph, LabeledSection};
use crate::text::{normalize_whitespace, CharIndex, TextRange};

pub use cdlm::{build_cdlm_corpus, CdlmConfig, CdlmCorpus, CdlmInstance, MaskedToken, MASK};
pub use eval::{
    evaluate_generation, sample_human_eval, score_predictions, summarize, write_sheets, AnswerKey, EvalRecord,
    GenScoreReport, GenScoreSummary, HumanEvalItem, HumanEvalSheets, KeyEntry, Prediction, SheetCandidate,
    SheetEntry, System, ASPECTS,
};
pub use marks::{find_citation_marks, strip_citation_marks};
pub use model::{
    generate_all, generate_span, CommandSeq2Seq, DecodingParams, GeneratedText, ModelError, NearestNeighborSeq2Seq,
    Seq2Seq,
};
pub use staging::{stage_paragraph, BlockStyle, StagedBlock, StagedParagraph, StagedSpan};

/// Stands in for the removed target in the masked context.
pub const PLACEHOLDER: &str = "<target>";
pub const SEPARATOR: &str = "</s>";
/// Replaces the abstract of a cited paper without one.
pub const NO_ABSTRACT: &str = "<no-abstract>";
pub const DOMINANT_MARKER: &str = "<dominant>";
pub const REFERENCE_MARKER: &str = "<reference>";
pub const RESERVED_TOKENS: [&str; 6] = [PLACEHOLDER, SEPARATOR, NO_ABSTRACT, DOMINANT_MARKER, REFERENCE_MARKER, MASK];

pub fn type_marker(t: CitationType) -> &'static str {
    match t {
        CitationType::Dominant => DOMINANT_MARKER,
        CitationType::Reference => REFERENCE_MARKER,
    }
}

#[derive(Debug, Error)]
pub enum GenError {
    #[error("span [{start}, {end}) is not one of the paragraph's spans")]
    SpanNotFound { start: usize, end: usize },
    #[error("span [{start}, {end}) has no citations")]
    NoCitations { start: usize, end: usize },
    #[error("input contains reserved token `{0}`")]
    ReservedToken(&'static str),
    #[error("gold target is empty after citation-mark removal")]
    EmptyGold,
    #[error("gold target occurs in the model input")]
    Leak,
    #[error("example {id}: {source}")]
    Model { id: String, source: ModelError },
    #[error("example {id}: model returned empty text")]
    EmptyOutput { id: String },
    #[error("need {need} {kind:?} records, found {have}")]
    InsufficientRecords { kind: CitationType, need: usize, have: usize },
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl GenError {
    /// Short key used when counting skipped examples.
    pub fn kind(&self) -> &'static str {
        match self {
            GenError::SpanNotFound { .. } => "span_not_found",
            GenError::NoCitations { .. } => "no_citations",
            GenError::ReservedToken(_) => "reserved_token",
            GenError::EmptyGold => "empty_gold",
            GenError::Leak => "leak",
            GenError::Model { .. } => "model",
            GenError::EmptyOutput { .. } => "empty_output",
            GenError::InsufficientRecords { .. } => "insufficient_records",
            GenError::Json { .. } => "json",
            GenError::Io(_) => "io",
            GenError::Csv(_) => "csv",
        }
    }
}

/// Which text is generated: the annotated span, or every sentence it touches.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetUnit {
    #[default]
    Span,
    Sentence,
}

/// Title and abstract of a cited paper.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitedPaper {
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub abstract_text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitedInput {
    pub mark_text: String,
    pub citation_type: CitationType,
    pub cited_paper_id: Option<String>,
    pub title: String,
    pub abstract_text: Option<String>,
}

impl CitedInput {
    fn block(&self) -> String {
        let abs = self.abstract_text.as_deref().unwrap_or(NO_ABSTRACT);
        normalize_whitespace(&format!(
            "{} {} | {} | {}",
            type_marker(self.citation_type),
            self.mark_text,
            self.title,
            abs
        ))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationExample {
    pub id: String,
    pub unit: TargetUnit,
    pub target_paper_intro: String,
    pub masked_context: String,
    pub span_type: CitationType,
    pub cited_inputs: Vec<CitedInput>,
    pub gold_target: String,
}

/// Model input after length limiting.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AssembledInput {
    pub text: String,
    pub kept_blocks: usize,
    /// Intro words removed to fit.
    pub intro_words_dropped: usize,
    /// Still longer than the limit with one block and no intro.
    pub over_limit: bool,
}

fn words(s: &str) -> usize {
    s.split_whitespace().count()
}

impl GenerationExample {
    pub fn missing_abstracts(&self) -> usize {
        self.cited_inputs.iter().filter(|c| c.abstract_text.is_none()).count()
    }

    /// The full model input: span-type marker, introduction, masked context,
    /// then one block per cited paper, separated by [`SEPARATOR`].
    pub fn input_text(&self) -> String {
        self.assemble(None).text
    }

    /// Assembles the input within `max_words` whitespace tokens. Cited
    /// blocks are dropped last-first down to one, then intro words are cut
    /// from the end.
    pub fn assemble(&self, max_words: Option<usize>) -> AssembledInput {
        let blocks: Vec<String> = self.cited_inputs.iter().map(CitedInput::block).collect();
        let intro: Vec<&str> = self.target_paper_intro.split_whitespace().collect();
        let fixed = 2 + words(&self.masked_context);
        let block_words: Vec<usize> = blocks.iter().map(|b| words(b) + 1).collect();
        let mut kept = blocks.len();
        let mut intro_len = intro.len();
        let mut over_limit = false;
        if let Some(max) = max_words {
            let total = |kept: usize, intro_len: usize| fixed + intro_len + block_words[..kept].iter().sum::<usize>();
            while kept > 1 && total(kept, intro_len) > max {
                kept -= 1;
            }
            let t = total(kept, 0);
            if t > max {
                intro_len = 0;
                over_limit = true;
            } else {
                intro_len = intro_len.min(max - t);
            }
        }
        let mut parts = vec![
            type_marker(self.span_type).to_string(),
            intro[..intro_len].join(" "),
            SEPARATOR.to_string(),
            self.masked_context.clone(),
        ];
        for b in &blocks[..kept] {
            parts.push(SEPARATOR.to_string());
            parts.push(b.clone());
        }
        AssembledInput {
            text: normalize_whitespace(&parts.join(" ")),
            kept_blocks: kept,
            intro_words_dropped: intro.len() - intro_len,
            over_limit,
        }
    }

    /// Whether the mark-stripped, whitespace-normalized gold occurs in the
    /// mark-stripped input.
    pub fn leaks(&self) -> bool {
        let gold = strip_citation_marks(&self.gold_target);
        gold.is_empty() || strip_citation_marks(&self.input_text()).contains(&gold)
    }
}

fn check_reserved(text: &str) -> Result<(), GenError> {
    match RESERVED_TOKENS.iter().find(|t| text.contains(**t)) {
        Some(t) => Err(GenError::ReservedToken(t)),
        None => Ok(()),
    }
}

/// Builds one example for `span` of `lp`. `cited` maps cited paper ids to
/// their metadata; citations without an id or metadata get an empty title
/// and no abstract.
pub fn build_generation_example(
    id: impl Into<String>,
    lp: &LabeledParagraph,
    span: &CitationSpan,
    unit: TargetUnit,
    intro: &str,
    cited: &HashMap<String, CitedPaper>,
) -> Result<GenerationExample, GenError> {
    if !lp.spans.contains(span) {
        return Err(GenError::SpanNotFound {
            start: span.start,
            end: span.end,
        });
    }
    if span.citations.is_empty() {
        return Err(GenError::NoCitations {
            start: span.start,
            end: span.end,
        });
    }
    let p = &lp.paragraph;
    check_reserved(&p.text)?;
    check_reserved(intro)?;
    let target = match unit {
        TargetUnit::Span => span.range(),
        TargetUnit::Sentence => {
            let touched = p.sentences_touching(span.range());
            if touched.is_empty() {
                span.range()
            } else {
                TextRange::new(p.sentences[touched.start].start, p.sentences[touched.end - 1].end)
            }
        }
    };
    let idx = CharIndex::new(&p.text);
    let before = idx.slice(TextRange::new(0, target.start));
    let after = idx.slice(TextRange::new(target.end, idx.len()));
    let masked_context = normalize_whitespace(&format!("{before} {PLACEHOLDER} {after}"));

    let mut citations = span.citations.clone();
    citations.sort_by_key(|c| (c.start, c.end));
    let mut cited_inputs = Vec::with_capacity(citations.len());
    for c in &citations {
        let cited_paper_id = p
            .citation_marks
            .iter()
            .find(|m| m.range() == c.range())
            .and_then(|m| m.cited_paper_id.clone());
        let meta = cited_paper_id.as_ref().and_then(|pid| cited.get(pid));
        let title = meta.map(|m| m.title.clone()).unwrap_or_default();
        let abstract_text = meta.and_then(|m| m.abstract_text.clone()).filter(|a| !a.trim().is_empty());
        check_reserved(&title)?;
        if let Some(a) = &abstract_text {
            check_reserved(a)?;
        }
        cited_inputs.push(CitedInput {
            mark_text: idx.slice(c.range()).to_string(),
            citation_type: c.citation_type,
            cited_paper_id,
            title,
            abstract_text,
        });
    }
    let ex = GenerationExample {
        id: id.into(),
        unit,
        target_paper_intro: normalize_whitespace(intro),
        masked_context,
        span_type: span.span_type,
        cited_inputs,
        gold_target: idx.slice(target).to_string(),
    };
    if strip_citation_marks(&ex.gold_target).is_empty() {
        return Err(GenError::EmptyGold);
    }
    if ex.leaks() {
        return Err(GenError::Leak);
    }
    Ok(ex)
}

/// Examples built over a corpus, with per-reason skip counts.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BuildReport {
    pub examples: Vec<GenerationExample>,
    pub skipped: BTreeMap<String, usize>,
    pub missing_intros: usize,
    pub missing_abstracts: usize,
}

/// One example per span of every paragraph. Example ids are
/// `<paper_id>/<paragraph>/<span>`.
pub fn build_examples(
    sections: &[LabeledSection],
    unit: TargetUnit,
    intros: &HashMap<String, String>,
    cited: &HashMap<String, CitedPaper>,
) -> BuildReport {
    let mut report = BuildReport::default();
    for section in sections {
        let intro = intros.get(&section.paper_id);
        if intro.is_none() {
            report.missing_intros += 1;
        }
        let intro = intro.map_or("", String::as_str);
        for (pi, lp) in section.paragraphs.iter().enumerate() {
            for (si, span) in lp.sorted_spans().iter().enumerate() {
                let id = format!("{}/{pi}/{si}", section.paper_id);
                match build_generation_example(id, lp, span, unit, intro, cited) {
                    Ok(ex) => {
                        report.missing_abstracts += ex.missing_abstracts();
                        report.examples.push(ex);
                    }
                    Err(e) => *report.skipped.entry(e.kind().to_string()).or_default() += 1,
                }
            }
        }
    }
    report
}

/// One line of an example file: the example plus its assembled input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleLine {
    #[serde(flatten)]
    pub example: GenerationExample,
    pub input: String,
    pub kept_blocks: usize,
}

pub fn write_examples<W: Write>(
    mut out: W,
    examples: &[GenerationExample],
    max_words: Option<usize>,
) -> Result<(), GenError> {
    for ex in examples {
        let a = ex.assemble(max_words);
        let line = ExampleLine {
            example: ex.clone(),
            input: a.text,
            kept_blocks: a.kept_blocks,
        };
        serde_json::to_writer(&mut out, &line).map_err(|source| GenError::Json { line: 0, source })?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_examples<R: BufRead>(input: R) -> Result<Vec<ExampleLine>, GenError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| GenError::Json { line: i + 1, source })?);
    }
    Ok(out)
}
