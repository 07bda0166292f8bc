//! Corpus statistics and experiments over labeled paragraphs.

mod patterns;
mod retrieval;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schema::{CitationSpan, CitationType, DiscourseLabel, LabeledParagraph};

pub use patterns::{mine_patterns, Pattern, PatternQuery};
pub use retrieval::{citation_units, retrieval_compare, CitationUnit, RetrievalReport, UnitKind, UnitSummary};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid pattern query: {0}")]
    InvalidQuery(String),
}

fn pct(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// What is counted as one D/R occurrence in the co-occurrence table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CooccurrenceUnit {
    /// Each citation span counts once, under the label of the sentence where
    /// it starts. Joint probabilities are over all spans.
    #[default]
    Span,
    /// Each sentence is dominant if it overlaps a dominant span, else
    /// reference if it overlaps a reference span. Joint probabilities are
    /// over all sentences.
    Sentence,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub label: DiscourseLabel,
    /// Sentences with this label.
    pub n: usize,
    pub n_dominant: usize,
    pub n_reference: usize,
    pub p: f64,
    pub p_label_given_dominant: f64,
    pub p_label_given_reference: f64,
    /// Zero when no unit carries this label.
    pub p_dominant_given_label: f64,
    pub p_reference_given_label: f64,
    pub p_dominant_joint: f64,
    pub p_reference_joint: f64,
}

/// Distribution of discourse labels against citation span types.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CooccurrenceTable {
    pub unit: CooccurrenceUnit,
    pub rows: Vec<LabelRow>,
    pub n_dominant: usize,
    pub n_reference: usize,
    /// Denominator of the joint columns.
    pub n_units: usize,
    pub n_sentences: usize,
    pub n_paragraphs: usize,
}

impl CooccurrenceTable {
    pub fn row(&self, label: DiscourseLabel) -> &LabelRow {
        &self.rows[label.index()]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("label,n,p,p_label_given_dominant,p_label_given_reference,p_dominant_given_label,p_reference_given_label,p_dominant_joint,p_reference_joint\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{},{},{}",
                r.label,
                r.n,
                r.p,
                r.p_label_given_dominant,
                r.p_label_given_reference,
                r.p_dominant_given_label,
                r.p_reference_given_label,
                r.p_dominant_joint,
                r.p_reference_joint
            );
        }
        s
    }
}

/// Type a sentence is associated with: dominant if it overlaps any dominant
/// span, else reference if it overlaps a reference span.
pub fn sentence_association(lp: &LabeledParagraph, sentence: usize) -> Option<CitationType> {
    let s = lp.paragraph.sentences[sentence];
    let mut found = None;
    for span in lp.spans.iter().filter(|sp| sp.range().overlaps(&s)) {
        if span.span_type == CitationType::Dominant {
            return Some(CitationType::Dominant);
        }
        found = Some(CitationType::Reference);
    }
    found
}

fn span_label(lp: &LabeledParagraph, span: &CitationSpan) -> Option<DiscourseLabel> {
    let si = lp.paragraph.sentence_of(span.start)?;
    lp.sentence_labels.get(si).copied()
}

pub fn cooccurrence_stats(data: &[LabeledParagraph], unit: CooccurrenceUnit) -> Result<CooccurrenceTable, AnalysisError> {
    if data.is_empty() {
        return Err(AnalysisError::EmptyDataset);
    }
    let k = DiscourseLabel::ALL.len();
    let mut n = vec![0usize; k];
    let mut nd = vec![0usize; k];
    let mut nr = vec![0usize; k];
    let mut n_units = 0;
    for lp in data {
        for l in &lp.sentence_labels {
            n[l.index()] += 1;
        }
        match unit {
            CooccurrenceUnit::Span => {
                for span in &lp.spans {
                    let Some(l) = span_label(lp, span) else { continue };
                    n_units += 1;
                    match span.span_type {
                        CitationType::Dominant => nd[l.index()] += 1,
                        CitationType::Reference => nr[l.index()] += 1,
                    }
                }
            }
            CooccurrenceUnit::Sentence => {
                for (si, l) in lp.sentence_labels.iter().enumerate().take(lp.paragraph.sentences.len()) {
                    n_units += 1;
                    match sentence_association(lp, si) {
                        Some(CitationType::Dominant) => nd[l.index()] += 1,
                        Some(CitationType::Reference) => nr[l.index()] += 1,
                        None => {}
                    }
                }
            }
        }
    }
    let n_sentences: usize = n.iter().sum();
    let n_dominant: usize = nd.iter().sum();
    let n_reference: usize = nr.iter().sum();
    let rows = DiscourseLabel::ALL
        .iter()
        .map(|&label| {
            let i = label.index();
            LabelRow {
                label,
                n: n[i],
                n_dominant: nd[i],
                n_reference: nr[i],
                p: pct(n[i], n_sentences),
                p_label_given_dominant: pct(nd[i], n_dominant),
                p_label_given_reference: pct(nr[i], n_reference),
                p_dominant_given_label: pct(nd[i], nd[i] + nr[i]),
                p_reference_given_label: pct(nr[i], nd[i] + nr[i]),
                p_dominant_joint: pct(nd[i], n_units),
                p_reference_joint: pct(nr[i], n_units),
            }
        })
        .collect();
    Ok(CooccurrenceTable {
        unit,
        rows,
        n_dominant,
        n_reference,
        n_units,
        n_sentences,
        n_paragraphs: data.len(),
    })
}

/// Number of tokens in a span that are not part of a citation mark.
pub fn span_length(lp: &LabeledParagraph, span: &CitationSpan) -> usize {
    let p = &lp.paragraph;
    p.tokens[p.tokens_in(span.range())]
        .iter()
        .filter(|t| !p.citation_marks.iter().any(|m| m.range().contains(t)))
        .count()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LengthHistogram {
    /// Length in tokens mapped to the number of spans.
    pub counts: BTreeMap<usize, usize>,
    pub n_spans: usize,
    /// Absent when there are no spans of the type.
    pub mean: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpanLengthStats {
    pub dominant: LengthHistogram,
    pub reference: LengthHistogram,
}

impl SpanLengthStats {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("span_type,length,count\n");
        for (t, h) in [("dominant", &self.dominant), ("reference", &self.reference)] {
            for (len, c) in &h.counts {
                let _ = writeln!(s, "{t},{len},{c}");
            }
        }
        s
    }
}

/// Span lengths in tokens, excluding citation-mark tokens, per span type.
pub fn span_length_stats(data: &[LabeledParagraph]) -> SpanLengthStats {
    let mut stats = SpanLengthStats::default();
    let mut sums = [0usize; 2];
    for lp in data {
        for span in &lp.spans {
            let len = span_length(lp, span);
            let (h, sum) = match span.span_type {
                CitationType::Dominant => (&mut stats.dominant, &mut sums[0]),
                CitationType::Reference => (&mut stats.reference, &mut sums[1]),
            };
            *h.counts.entry(len).or_default() += 1;
            h.n_spans += 1;
            *sum += len;
        }
    }
    for (h, sum) in [(&mut stats.dominant, sums[0]), (&mut stats.reference, sums[1])] {
        h.mean = (h.n_spans > 0).then(|| sum as f64 / h.n_spans as f64);
    }
    stats
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParagraphStyle {
    /// Summarization sentences only.
    Descriptive,
    /// Narrative citation sentences only.
    Integrative,
    Mixed,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParagraphStyleRow {
    pub summarization: f64,
    pub narrative: f64,
    pub style: ParagraphStyle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleProfile {
    pub paragraphs: Vec<ParagraphStyleRow>,
    /// Shares over paragraphs holding either sentence type.
    pub descriptive: f64,
    pub integrative: f64,
    pub mixed: f64,
    pub n_counted: usize,
    pub n_excluded: usize,
}

impl StyleProfile {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("paragraph,summarization,narrative,style\n");
        for (i, r) in self.paragraphs.iter().enumerate() {
            let style = serde_json::to_value(r.style).ok();
            let style = style.as_ref().and_then(|v| v.as_str()).unwrap_or("");
            let _ = writeln!(s, "{i},{},{},{style}", r.summarization, r.narrative);
        }
        s
    }
}

pub fn style_profile(data: &[LabeledParagraph]) -> StyleProfile {
    let mut rows = Vec::with_capacity(data.len());
    let mut counts = [0usize; 3];
    for lp in data {
        let total = lp.sentence_labels.len();
        let summ = lp.sentence_labels.iter().filter(|l| l.is_summarization()).count();
        let narr = lp
            .sentence_labels
            .iter()
            .filter(|l| **l == DiscourseLabel::NarrativeCite)
            .count();
        let style = match (summ > 0, narr > 0) {
            (true, false) => ParagraphStyle::Descriptive,
            (false, true) => ParagraphStyle::Integrative,
            (true, true) => ParagraphStyle::Mixed,
            (false, false) => ParagraphStyle::Neither,
        };
        if style != ParagraphStyle::Neither {
            counts[style as usize] += 1;
        }
        rows.push(ParagraphStyleRow {
            summarization: pct(summ, total),
            narrative: pct(narr, total),
            style,
        });
    }
    let n_counted: usize = counts.iter().sum();
    StyleProfile {
        descriptive: pct(counts[0], n_counted),
        integrative: pct(counts[1], n_counted),
        mixed: pct(counts[2], n_counted),
        n_excluded: rows.len() - n_counted,
        n_counted,
        paragraphs: rows,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LengthClass {
    Shorter,
    Equal,
    Longer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpanRatio {
    pub span_type: CitationType,
    /// Span tokens over the tokens of every sentence the span touches.
    pub ratio: f64,
    pub class: LengthClass,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RatioReport {
    pub spans: Vec<SpanRatio>,
    /// Shares of dominant spans per class.
    pub dominant_shorter: f64,
    pub dominant_equal: f64,
    pub dominant_longer: f64,
    pub n_dominant: usize,
    /// Reference spans touching more than one sentence (zero on valid data).
    pub reference_multi_sentence: usize,
}

impl RatioReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("span_type,ratio,class\n");
        for r in &self.spans {
            let class = match r.class {
                LengthClass::Shorter => "shorter",
                LengthClass::Equal => "equal",
                LengthClass::Longer => "longer",
            };
            let _ = writeln!(s, "{},{},{class}", r.span_type, r.ratio);
        }
        s
    }
}

/// Classifies a span against the sentences it touches: longer when it
/// touches several, equal when it covers every token of its one sentence,
/// shorter otherwise.
pub fn span_ratio(lp: &LabeledParagraph, span: &CitationSpan) -> SpanRatio {
    let p = &lp.paragraph;
    let touched = p.sentences_touching(span.range());
    let sentence_tokens: usize = touched.clone().map(|si| p.tokens_in(p.sentences[si]).len()).sum();
    let span_tokens = p.tokens_in(span.range()).len();
    let class = if touched.len() > 1 {
        LengthClass::Longer
    } else if span_tokens == sentence_tokens {
        LengthClass::Equal
    } else {
        LengthClass::Shorter
    };
    SpanRatio {
        span_type: span.span_type,
        ratio: pct(span_tokens, sentence_tokens),
        class,
    }
}

pub fn span_sentence_ratio(data: &[LabeledParagraph]) -> RatioReport {
    let mut spans = Vec::new();
    let mut counts = [0usize; 3];
    let mut reference_multi_sentence = 0;
    for lp in data {
        for span in &lp.spans {
            let r = span_ratio(lp, span);
            match r.span_type {
                CitationType::Dominant => counts[r.class as usize] += 1,
                CitationType::Reference => {
                    if r.class == LengthClass::Longer {
                        reference_multi_sentence += 1;
                    }
                }
            }
            spans.push(r);
        }
    }
    let n_dominant: usize = counts.iter().sum();
    RatioReport {
        spans,
        dominant_shorter: pct(counts[0], n_dominant),
        dominant_equal: pct(counts[1], n_dominant),
        dominant_longer: pct(counts[2], n_dominant),
        n_dominant,
        reference_multi_sentence,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CitationMark, Paragraph};
    use crate::text::TextRange;
    use DiscourseLabel::*;

    fn mark(start: usize, end: usize, key: &str) -> CitationMark {
        CitationMark {
            start,
            end,
            bib_key: key.into(),
            cited_paper_id: None,
        }
    }

    // "Lee (2019) builds parsers. They are fast. Kim (2020) agrees."
    fn fixture() -> LabeledParagraph {
        let p = Paragraph::from_text(
            "Lee (2019) builds parsers. They are fast. Kim (2020) agrees.",
            vec![mark(0, 10, "lee"), mark(42, 52, "kim")],
        );
        let dom = CitationSpan::with_marks(&p, TextRange::new(0, 41), |_| false);
        let refs = CitationSpan::with_marks(&p, TextRange::new(42, 52), |_| true);
        LabeledParagraph {
            paragraph: p,
            sentence_labels: vec![SingleSumm, SingleSumm, NarrativeCite],
            spans: vec![dom, refs],
        }
    }

    #[test]
    fn cooccurrence_by_span() {
        let t = cooccurrence_stats(&[fixture()], CooccurrenceUnit::Span).unwrap();
        assert_eq!((t.n_dominant, t.n_reference, t.n_units), (1, 1, 2));
        let s = t.row(SingleSumm);
        assert_eq!((s.n, s.n_dominant, s.n_reference), (2, 1, 0));
        assert_eq!(s.p_dominant_joint, 0.5);
        assert_eq!(s.p_label_given_dominant, 1.0);
        assert_eq!(t.row(NarrativeCite).p_reference_given_label, 1.0);
        assert!((t.rows.iter().map(|r| r.p).sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cooccurrence_by_sentence() {
        let t = cooccurrence_stats(&[fixture()], CooccurrenceUnit::Sentence).unwrap();
        assert_eq!((t.n_dominant, t.n_reference, t.n_units), (2, 1, 3));
        assert!((t.row(SingleSumm).p_dominant_joint - 2.0 / 3.0).abs() < 1e-12);
        assert!((t.row(NarrativeCite).p_reference_joint - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(cooccurrence_stats(&[], CooccurrenceUnit::Span), Err(AnalysisError::EmptyDataset));
    }

    #[test]
    fn span_lengths_skip_mark_tokens() {
        let lp = fixture();
        // "Lee ( 2019 ) builds parsers . They are fast ." minus the 4 mark tokens.
        assert_eq!(span_length(&lp, &lp.spans[0]), 7);
        assert_eq!(span_length(&lp, &lp.spans[1]), 0);
        let stats = span_length_stats(&[lp]);
        assert_eq!(stats.dominant.mean, Some(7.0));
        assert_eq!(span_length_stats(&[]).reference.mean, None);
    }

    #[test]
    fn five_token_span_with_two_token_mark() {
        let p = Paragraph::from_text("Lee 2019 said it well.", vec![mark(0, 8, "lee")]);
        let span = CitationSpan::with_marks(&p, TextRange::new(0, 21), |_| false);
        let lp = LabeledParagraph {
            paragraph: p,
            sentence_labels: vec![SingleSumm],
            spans: vec![span],
        };
        assert_eq!(lp.paragraph.tokens_in(lp.spans[0].range()).len(), 5);
        assert_eq!(span_length(&lp, &lp.spans[0]), 3);
    }

    #[test]
    fn style_classes() {
        let mut lp = fixture();
        let profile = style_profile(std::slice::from_ref(&lp));
        assert_eq!(profile.paragraphs[0].style, ParagraphStyle::Mixed);
        lp.sentence_labels = vec![SingleSumm, MultiSumm, Transition];
        let profile = style_profile(&[lp.clone()]);
        assert_eq!(profile.paragraphs[0].style, ParagraphStyle::Descriptive);
        assert!((profile.paragraphs[0].summarization - 2.0 / 3.0).abs() < 1e-12);
        lp.sentence_labels = vec![Transition, Other, Reflection];
        let profile = style_profile(&[lp, fixture()]);
        assert_eq!(profile.n_excluded, 1);
        assert_eq!(profile.mixed, 1.0);
    }

    #[test]
    fn ratio_classes() {
        let lp = fixture();
        let report = span_sentence_ratio(std::slice::from_ref(&lp));
        assert_eq!(report.spans[0].class, LengthClass::Longer);
        assert_eq!(report.spans[0].ratio, 1.0);
        assert_eq!(report.spans[1].class, LengthClass::Shorter);
        assert_eq!(report.dominant_longer, 1.0);
        assert_eq!(report.reference_multi_sentence, 0);

        let one = CitationSpan::with_marks(&lp.paragraph, TextRange::new(0, 26), |_| false);
        let r = span_ratio(&lp, &one);
        assert_eq!((r.class, r.ratio), (LengthClass::Equal, 1.0));
    }
}
