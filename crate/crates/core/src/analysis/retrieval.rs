//! Span-versus-sentence retrieval: how well the best sentence of a cited
//! paper covers each citation unit.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::sentence_association;
use crate::metrics::rouge_scores;
use crate::schema::{CitationSpan, CitationType, LabeledParagraph};
use crate::text::{normalize_whitespace, TextRange};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    DominantSpan,
    ReferenceSpan,
    DominantSentence,
    ReferenceSentence,
}

impl UnitKind {
    pub const ALL: [UnitKind; 4] = [
        UnitKind::DominantSpan,
        UnitKind::ReferenceSpan,
        UnitKind::DominantSentence,
        UnitKind::ReferenceSentence,
    ];
}

/// Citing text plus the papers it cites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CitationUnit {
    pub kind: UnitKind,
    pub text: String,
    pub cited_paper_ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UnitSummary {
    pub kind: UnitKind,
    /// Top-1 r12_avg per scored unit.
    pub scores: Vec<f64>,
    pub mean: Option<f64>,
    /// Units with no available cited sentence or no scorable text.
    pub skipped: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RetrievalReport {
    pub kinds: Vec<UnitSummary>,
}

impl RetrievalReport {
    pub fn get(&self, kind: UnitKind) -> &UnitSummary {
        &self.kinds[kind as usize]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("kind,score\n");
        for k in &self.kinds {
            let name = serde_json::to_value(k.kind).ok();
            let name = name.as_ref().and_then(|v| v.as_str()).unwrap_or("");
            for x in &k.scores {
                s.push_str(&format!("{name},{x}\n"));
            }
        }
        s
    }
}

/// Best candidate index and its r12_avg, with the unit text as the ROUGE
/// reference. `None` when there is nothing to score.
pub fn top1<S: AsRef<str>>(unit_text: &str, candidates: &[S]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, c) in candidates.iter().enumerate() {
        let score = rouge_scores(unit_text, c.as_ref()).ok()?.r12_avg;
        if best.is_none_or(|(_, b)| score > b) {
            best = Some((i, score));
        }
    }
    best
}

pub fn retrieval_compare(units: &[CitationUnit], cited_sentences: &HashMap<String, Vec<String>>) -> RetrievalReport {
    let mut kinds: Vec<UnitSummary> = UnitKind::ALL
        .iter()
        .map(|&kind| UnitSummary {
            kind,
            scores: Vec::new(),
            mean: None,
            skipped: 0,
        })
        .collect();
    for unit in units {
        let candidates: Vec<&String> = unit
            .cited_paper_ids
            .iter()
            .filter_map(|id| cited_sentences.get(id))
            .flatten()
            .collect();
        let summary = &mut kinds[unit.kind as usize];
        match top1(&unit.text, &candidates) {
            Some((_, score)) => summary.scores.push(score),
            None => summary.skipped += 1,
        }
    }
    for k in &mut kinds {
        if !k.scores.is_empty() {
            k.mean = Some(k.scores.iter().sum::<f64>() / k.scores.len() as f64);
        }
    }
    RetrievalReport { kinds }
}

/// Text of `range` with citation marks removed.
fn unit_text(lp: &LabeledParagraph, range: TextRange) -> String {
    let p = &lp.paragraph;
    let mut out = String::new();
    let mut at = range.start;
    let mut marks: Vec<TextRange> = p
        .citation_marks
        .iter()
        .map(|m| m.range())
        .filter(|m| range.contains(m))
        .collect();
    marks.sort();
    for m in marks {
        out.push_str(p.slice(TextRange::new(at, m.start)).unwrap_or(""));
        out.push(' ');
        at = m.end;
    }
    out.push_str(p.slice(TextRange::new(at, range.end)).unwrap_or(""));
    normalize_whitespace(&out)
}

fn cited_ids<'a>(lp: &LabeledParagraph, spans: impl Iterator<Item = &'a CitationSpan>, ty: CitationType) -> Vec<String> {
    let mut ids = BTreeSet::new();
    for span in spans {
        for c in span.citations.iter().filter(|c| c.citation_type == ty) {
            let mark = lp.paragraph.citation_marks.iter().find(|m| m.range() == c.range());
            if let Some(id) = mark.and_then(|m| m.cited_paper_id.clone()) {
                ids.insert(id);
            }
        }
    }
    ids.into_iter().collect()
}

/// Span and sentence units of a dataset, with citation marks stripped. A
/// span cites the papers of its citations of its own type; a sentence cites
/// those of the overlapping spans of its associated type.
pub fn citation_units(data: &[LabeledParagraph]) -> Vec<CitationUnit> {
    let mut units = Vec::new();
    for lp in data {
        for span in &lp.spans {
            units.push(CitationUnit {
                kind: match span.span_type {
                    CitationType::Dominant => UnitKind::DominantSpan,
                    CitationType::Reference => UnitKind::ReferenceSpan,
                },
                text: unit_text(lp, span.range()),
                cited_paper_ids: cited_ids(lp, std::iter::once(span), span.span_type),
            });
        }
        for (si, s) in lp.paragraph.sentences.iter().enumerate() {
            let Some(ty) = sentence_association(lp, si) else { continue };
            let overlapping = lp.spans.iter().filter(|sp| sp.span_type == ty && sp.range().overlaps(s));
            units.push(CitationUnit {
                kind: match ty {
                    CitationType::Dominant => UnitKind::DominantSentence,
                    CitationType::Reference => UnitKind::ReferenceSentence,
                },
                text: unit_text(lp, *s),
                cited_paper_ids: cited_ids(lp, overlapping, ty),
            });
        }
    }
    units
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{CitationMark, Paragraph};
    use crate::metrics::rouge_scores;
    use crate::schema::DiscourseLabel;
    use proptest::prelude::*;

    #[test]
    fn identical_sentence_scores_one() {
        let cands = ["unrelated words here", "we train a parser"];
        assert_eq!(top1("We train a parser.", &cands), Some((1, 1.0)));
        assert_eq!(top1::<&str>("x", &[]), None);
    }

    #[test]
    fn argmax_over_three_sentences() {
        let unit = "the model copies words from the source";
        let cands = [
            "a model of words",
            "the pointer copies words from the input source",
            "source code is released",
        ];
        let scores: Vec<f64> = cands.iter().map(|c| rouge_scores(unit, c).unwrap().r12_avg).collect();
        let best = (0..3).max_by(|&a, &b| scores[a].total_cmp(&scores[b])).unwrap();
        assert_eq!(best, 1);
        assert_eq!(top1(unit, &cands), Some((best, scores[best])));
    }

    #[test]
    fn units_and_report() {
        let p = Paragraph::from_text(
            "Lee (2019) builds parsers. They are fast. Kim (2020) agrees.",
            vec![
                CitationMark {
                    start: 0,
                    end: 10,
                    bib_key: "lee".into(),
                    cited_paper_id: Some("P1".into()),
                },
                CitationMark {
                    start: 42,
                    end: 52,
                    bib_key: "kim".into(),
                    cited_paper_id: None,
                },
            ],
        );
        let dom = CitationSpan::with_marks(&p, TextRange::new(0, 41), |_| false);
        let refs = CitationSpan::with_marks(&p, TextRange::new(42, 52), |_| true);
        let lp = LabeledParagraph {
            paragraph: p,
            sentence_labels: vec![DiscourseLabel::SingleSumm; 3],
            spans: vec![dom, refs],
        };
        let units = citation_units(&[lp]);
        assert_eq!(units.len(), 5);
        assert_eq!(units[0].text, "builds parsers. They are fast.");
        assert_eq!(units[0].cited_paper_ids, vec!["P1".to_string()]);
        let cited = HashMap::from([("P1".to_string(), vec!["We build fast parsers.".to_string()])]);
        let report = retrieval_compare(&units, &cited);
        assert_eq!(report.get(UnitKind::DominantSpan).scores.len(), 1);
        assert_eq!(report.get(UnitKind::ReferenceSpan).skipped, 1);
        assert_eq!(report.get(UnitKind::DominantSentence).scores.len(), 2);
    }

    proptest! {
        #[test]
        fn more_candidates_never_lower_top1(
            unit in "[a-d]( [a-d]){0,6}",
            cands in prop::collection::vec("[a-d]( [a-d]){0,6}", 1..5),
            extra in "[a-d]( [a-d]){0,6}",
        ) {
            let before = top1(&unit, &cands).unwrap().1;
            let mut more = cands.clone();
            more.push(extra);
            prop_assert!(top1(&unit, &more).unwrap().1 >= before);
        }
    }
}
