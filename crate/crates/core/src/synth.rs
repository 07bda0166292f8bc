//! Random valid labeled paragraphs and corpora for tests, benchmarks and
//! smoke runs.

use rand::seq::IndexedRandom;
use rand::Rng;

use crate::corpus::{CitationMark, Paragraph, RelatedWorkSection};
use crate::schema::{
    derive_continuation, derive_span_type, Citation, CitationSpan, CitationType, DiscourseLabel, LabeledParagraph,
    LabeledSection,
};
use crate::text::TextRange;

const SURNAMES: &[&str] = &[
    "Lee", "Kim", "Smith", "Chen", "Wang", "Garcia", "Müller", "Rossi", "Nguyen", "Patel", "Cohen", "Ivanova",
    "Tanaka", "Silva", "Okafor", "Dubois",
];

const WORDS: &[&str] = &[
    "model", "models", "neural", "summarization", "citation", "text", "generation", "corpus", "attention",
    "encoder", "decoder", "graph", "network", "parser", "tagging", "sequence", "training", "data", "scientific",
    "papers", "abstracts", "sentences", "tokens", "method", "approach", "task", "tasks", "results", "baseline",
    "large", "small", "novel", "prior", "recent", "related", "joint", "multi", "domain", "transfer", "learning",
    "supervised", "labels", "annotation", "span", "spans", "discourse", "structure", "retrieval", "evaluation",
    "metric", "human", "automatic", "pointer", "copy", "mechanism", "transformer", "pretrained", "language",
    "representations", "features", "signals", "documents", "framework", "pipeline", "system", "systems",
    "benchmark", "dataset", "information", "extraction", "classification", "quality", "coverage", "fluency",
];

const FUNCTION_WORDS: &[&str] = &["the", "a", "of", "for", "with", "to", "and", "in", "on", "by", "from"];

const VERBS: &[&str] = &[
    "propose", "proposes", "introduce", "introduces", "extend", "extends", "study", "studies", "use", "uses",
    "train", "trains", "apply", "applies", "combine", "combines", "improve", "improves", "show", "shows",
];

const OPENERS: &[&str] = &["However,", "In contrast,", "Similarly,", "Unlike these,", "Our work", "We", "This"];

fn word<'a>(rng: &mut impl Rng, list: &'a [&'a str]) -> &'a str {
    list.choose(rng).copied().unwrap_or("x")
}

fn mark_text(rng: &mut impl Rng) -> String {
    let year = rng.random_range(1995..2022);
    let name = word(rng, SURNAMES);
    match rng.random_range(0..4) {
        0 => format!("({name}, {year})"),
        1 => format!("{name} et al. ({year})"),
        2 => format!("[{}]", rng.random_range(1..60)),
        _ => format!("({name} and {}, {year})", word(rng, SURNAMES)),
    }
}

struct Builder {
    text: String,
    len: usize,
    marks: Vec<CitationMark>,
}

impl Builder {
    fn push(&mut self, s: &str) {
        if !self.text.is_empty() && !self.text.ends_with(' ') {
            self.text.push(' ');
            self.len += 1;
        }
        self.text.push_str(s);
        self.len += s.chars().count();
    }

    fn push_mark(&mut self, s: &str, key: String, cited: Option<String>) {
        self.push(s);
        let end = self.len;
        self.marks.push(CitationMark {
            start: end - s.chars().count(),
            end,
            bib_key: key,
            cited_paper_id: cited,
        });
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().collect::<String>() + c.as_str(),
        None => String::new(),
    }
}

/// A random paragraph of 1 to `max_sentences` sentences. Marks carry bib
/// keys `b0`, `b1`, ... and, with probability 0.8, a cited paper id drawn
/// from `P0`..`P{papers-1}`.
pub fn random_paragraph(rng: &mut impl Rng, max_sentences: usize, papers: usize) -> Paragraph {
    let mut b = Builder {
        text: String::new(),
        len: 0,
        marks: Vec::new(),
    };
    let n_sent = rng.random_range(1..=max_sentences.max(1));
    for _ in 0..n_sent {
        let n_marks = *[0usize, 0, 1, 1, 1, 2, 3].choose(rng).unwrap_or(&0);
        let lead_mark = n_marks > 0 && rng.random_bool(0.5);
        let mut remaining = n_marks;
        if lead_mark {
            let key = format!("b{}", b.marks.len());
            let cited = rng.random_bool(0.8).then(|| format!("P{}", rng.random_range(0..papers.max(1))));
            let m = mark_text(rng);
            b.push_mark(&m, key, cited);
            remaining -= 1;
        } else {
            let opener = word(rng, OPENERS).to_string();
            b.push(&capitalize(&opener));
        }
        b.push(word(rng, VERBS));
        let n_words = rng.random_range(3..12);
        for i in 0..n_words {
            if i % 3 == 0 {
                b.push(word(rng, FUNCTION_WORDS));
            }
            b.push(word(rng, WORDS));
            if remaining > 0 && rng.random_bool(0.3) {
                let key = format!("b{}", b.marks.len());
                let cited = rng.random_bool(0.8).then(|| format!("P{}", rng.random_range(0..papers.max(1))));
                let m = mark_text(rng);
                b.push_mark(&m, key, cited);
                remaining -= 1;
            }
        }
        while remaining > 0 {
            b.push(if rng.random_bool(0.5) { "and" } else { "or" });
            let key = format!("b{}", b.marks.len());
            let cited = rng.random_bool(0.8).then(|| format!("P{}", rng.random_range(0..papers.max(1))));
            let m = mark_text(rng);
            b.push_mark(&m, key, cited);
            remaining -= 1;
        }
        b.text.push('.');
        b.len += 1;
    }
    Paragraph::from_text(b.text, b.marks)
}

fn citations_in(p: &Paragraph, range: TextRange, mut ty: impl FnMut(usize, &CitationMark) -> CitationType) -> Vec<Citation> {
    p.citation_marks
        .iter()
        .enumerate()
        .filter(|(_, m)| range.contains(&m.range()))
        .map(|(i, m)| Citation {
            start: m.start,
            end: m.end,
            bib_key: m.bib_key.clone(),
            citation_type: ty(i, m),
        })
        .collect()
}

fn make_span(p: &Paragraph, range: TextRange, citations: Vec<Citation>) -> CitationSpan {
    let mut span = CitationSpan {
        start: range.start,
        end: range.end,
        span_type: derive_span_type(&citations),
        continuation: false,
        citations,
    };
    span.continuation = derive_continuation(p, &span);
    span
}

/// Random spans over a segmented paragraph's marks that satisfy every
/// schema invariant, and per-sentence labels correlated with them.
pub fn random_labels(rng: &mut impl Rng, p: &Paragraph) -> LabeledParagraph {
    let n_sent = p.sentences.len();
    let sent_tokens = p.sentence_token_ranges();
    let mark_sentence: Vec<usize> = p
        .citation_marks
        .iter()
        .map(|m| p.sentence_of(m.start).unwrap_or(0))
        .collect();
    let mut spans = Vec::new();
    let mut sentence_kind: Vec<Option<CitationType>> = vec![None; n_sent];
    let mut si = 0;
    while si < n_sent {
        let marks: Vec<usize> = (0..p.citation_marks.len()).filter(|&i| mark_sentence[i] == si).collect();
        let toks = sent_tokens[si].clone();
        if marks.is_empty() || toks.is_empty() || rng.random_bool(0.1) {
            si += 1;
            continue;
        }
        if rng.random_bool(0.55) {
            // Dominant: whole sentence, possibly continuing over mark-free
            // sentences.
            let mut last = si;
            while last + 1 < n_sent
                && !mark_sentence.contains(&(last + 1))
                && !sent_tokens[last + 1].is_empty()
                && rng.random_bool(0.4)
            {
                last += 1;
            }
            let start = p.tokens[toks.start].start;
            let end = p.tokens[sent_tokens[last].end - 1].end;
            let range = TextRange::new(start, end);
            let first = marks[0];
            let mut cits = citations_in(p, range, |i, _| {
                if i == first || rng.random_bool(0.5) {
                    CitationType::Dominant
                } else {
                    CitationType::Reference
                }
            });
            for c in &mut cits {
                if c.start == range.start || c.end == range.end {
                    c.citation_type = CitationType::Dominant;
                }
            }
            spans.push(make_span(p, range, cits));
            for k in sentence_kind.iter_mut().take(last + 1).skip(si) {
                *k = Some(CitationType::Dominant);
            }
            si = last + 1;
        } else {
            // Reference: each mark with a little context, inside the sentence.
            let mut floor = toks.start;
            for (j, &mi) in marks.iter().enumerate() {
                let mt = p.tokens_in(p.citation_marks[mi].range());
                let ceiling = marks
                    .get(j + 1)
                    .map_or(toks.end, |&next| p.tokens_in(p.citation_marks[next].range()).start);
                let lo = mt.start.saturating_sub(rng.random_range(0..3)).max(floor);
                let hi = (mt.end + rng.random_range(0..3)).min(ceiling);
                let range = TextRange::new(p.tokens[lo].start, p.tokens[hi - 1].end);
                let cits = citations_in(p, range, |_, _| CitationType::Reference);
                spans.push(make_span(p, range, cits));
                floor = hi;
            }
            sentence_kind[si] = Some(CitationType::Reference);
            si += 1;
        }
    }
    let labels = sentence_kind
        .iter()
        .map(|k| match k {
            Some(CitationType::Dominant) => {
                *[DiscourseLabel::SingleSumm, DiscourseLabel::SingleSumm, DiscourseLabel::MultiSumm]
                    .choose(rng)
                    .unwrap_or(&DiscourseLabel::SingleSumm)
            }
            Some(CitationType::Reference) => {
                if rng.random_bool(0.8) {
                    DiscourseLabel::NarrativeCite
                } else {
                    DiscourseLabel::Reflection
                }
            }
            None => *[
                DiscourseLabel::Transition,
                DiscourseLabel::Transition,
                DiscourseLabel::Reflection,
                DiscourseLabel::Other,
            ]
            .choose(rng)
            .unwrap_or(&DiscourseLabel::Transition),
        })
        .collect();
    LabeledParagraph {
        paragraph: p.clone(),
        sentence_labels: labels,
        spans,
    }
}

pub fn random_labeled_paragraph(rng: &mut impl Rng, max_sentences: usize) -> LabeledParagraph {
    let p = random_paragraph(rng, max_sentences, 40);
    random_labels(rng, &p)
}

/// `n` labeled sections with ids `S0`, `S1`, ... and years 2010..2021.
pub fn random_corpus(rng: &mut impl Rng, n: usize, max_paragraphs: usize) -> Vec<LabeledSection> {
    (0..n)
        .map(|i| LabeledSection {
            paper_id: format!("S{i}"),
            year: Some(rng.random_range(2010..2022)),
            paragraphs: (0..rng.random_range(1..=max_paragraphs.max(1)))
                .map(|_| random_labeled_paragraph(rng, 5))
                .collect(),
        })
        .collect()
}

pub fn random_unlabeled(rng: &mut impl Rng, n: usize, max_paragraphs: usize) -> Vec<RelatedWorkSection> {
    (0..n)
        .map(|i| RelatedWorkSection {
            paper_id: format!("U{i}"),
            year: Some(rng.random_range(2010..2022)),
            title: "Related Work".into(),
            paragraphs: (0..rng.random_range(1..=max_paragraphs.max(1)))
                .map(|_| random_paragraph(rng, 5, 40))
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::validate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generated_paragraphs_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut spans = 0;
        let mut dominant_multi = 0;
        for _ in 0..300 {
            let lp = random_labeled_paragraph(&mut rng, 5);
            assert_eq!(validate(&lp), vec![], "{:#?}", lp);
            spans += lp.spans.len();
            dominant_multi += lp
                .spans
                .iter()
                .filter(|s| s.span_type == CitationType::Dominant && s.continuation)
                .count();
        }
        assert!(spans > 200);
        assert!(dominant_multi > 5);
    }
}
