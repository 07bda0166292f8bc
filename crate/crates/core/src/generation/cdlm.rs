//! Cross-document language-modeling instances: a citation sentence with
//! some words masked, its paragraph context and the full text of one cited
//! paper.

use std::collections::{BTreeSet, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::RelatedWorkSection;
use crate::text::{fnv1a, CharIndex, TextRange};

pub const MASK: &str = "<mask>";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CdlmConfig {
    pub mask_prob: f64,
    pub seed: u64,
}

impl Default for CdlmConfig {
    fn default() -> Self {
        CdlmConfig {
            mask_prob: 0.15,
            seed: 0,
        }
    }
}

/// A masked word: its code-point range in `masked_sentence` and the text it
/// replaced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedToken {
    pub start: usize,
    pub end: usize,
    pub original: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdlmInstance {
    pub paper_id: String,
    pub paragraph_index: usize,
    pub sentence_index: usize,
    pub cited_paper_id: String,
    pub masked_sentence: String,
    pub masks: Vec<MaskedToken>,
    pub context_before: String,
    pub context_after: String,
    pub cited_text: String,
}

impl CdlmInstance {
    /// The sentence with every mask put back.
    pub fn restore(&self) -> String {
        let idx = CharIndex::new(&self.masked_sentence);
        let mut out = String::new();
        let mut pos = 0;
        for m in &self.masks {
            out.push_str(idx.slice(TextRange::new(pos, m.start)));
            out.push_str(&m.original);
            pos = m.end;
        }
        out.push_str(idx.slice(TextRange::new(pos, idx.len())));
        out
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CdlmCorpus {
    pub instances: Vec<CdlmInstance>,
    /// Marks without a cited paper id or without a resolvable full text.
    pub skipped_unresolvable: usize,
    pub excluded_test_sections: usize,
    /// Marks citing a test-set paper.
    pub excluded_test_cited: usize,
}

/// One instance per (citation sentence, distinct resolvable cited paper).
/// Sections whose paper id is in `test_ids`, and cited papers in
/// `test_ids`, are excluded.
pub fn build_cdlm_corpus(
    sections: &[RelatedWorkSection],
    cited_full_texts: &HashMap<String, String>,
    test_ids: &BTreeSet<String>,
    config: &CdlmConfig,
) -> CdlmCorpus {
    let mut corpus = CdlmCorpus::default();
    for section in sections {
        if test_ids.contains(&section.paper_id) {
            corpus.excluded_test_sections += 1;
            continue;
        }
        for (pi, p) in section.paragraphs.iter().enumerate() {
            let idx = CharIndex::new(&p.text);
            for (si, sentence) in p.sentences.iter().enumerate() {
                let mut cited = BTreeSet::new();
                for m in p.citation_marks.iter().filter(|m| sentence.contains(&m.range())) {
                    match &m.cited_paper_id {
                        Some(id) if test_ids.contains(id) => corpus.excluded_test_cited += 1,
                        Some(id) if cited_full_texts.contains_key(id) => {
                            cited.insert(id.clone());
                        }
                        _ => corpus.skipped_unresolvable += 1,
                    }
                }
                if cited.is_empty() {
                    continue;
                }
                let seed = fnv1a(format!("{}/{pi}/{si}", section.paper_id).as_bytes()) ^ config.seed;
                let (masked_sentence, masks) = mask_sentence(p, *sentence, config.mask_prob, seed);
                for id in cited {
                    corpus.instances.push(CdlmInstance {
                        paper_id: section.paper_id.clone(),
                        paragraph_index: pi,
                        sentence_index: si,
                        cited_paper_id: id.clone(),
                        masked_sentence: masked_sentence.clone(),
                        masks: masks.clone(),
                        context_before: idx.slice(TextRange::new(0, sentence.start)).trim().to_string(),
                        context_after: idx.slice(TextRange::new(sentence.end, idx.len())).trim().to_string(),
                        cited_text: cited_full_texts[&id].clone(),
                    });
                }
            }
        }
    }
    corpus
}

/// Masks each word token outside citation marks with probability
/// `mask_prob`, and at least one when any is eligible.
fn mask_sentence(p: &crate::corpus::Paragraph, sentence: TextRange, mask_prob: f64, seed: u64) -> (String, Vec<MaskedToken>) {
    let idx = CharIndex::new(&p.text);
    let eligible: Vec<TextRange> = p.tokens[p.tokens_in(sentence)]
        .iter()
        .copied()
        .filter(|t| !p.citation_marks.iter().any(|m| m.range().overlaps(t)))
        .filter(|t| idx.slice(*t).chars().any(char::is_alphanumeric))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen: Vec<TextRange> = eligible.iter().copied().filter(|_| rng.random_bool(mask_prob)).collect();
    if chosen.is_empty() && !eligible.is_empty() {
        chosen.push(eligible[rng.random_range(0..eligible.len())]);
    }
    let mut out = String::new();
    let mut out_len = 0;
    let mut masks = Vec::with_capacity(chosen.len());
    let mut pos = sentence.start;
    for t in chosen {
        let gap = idx.slice(TextRange::new(pos, t.start));
        out.push_str(gap);
        out_len += gap.chars().count();
        out.push_str(MASK);
        let end = out_len + MASK.chars().count();
        masks.push(MaskedToken {
            start: out_len,
            end,
            original: idx.slice(t).to_string(),
        });
        out_len = end;
        pos = t.end;
    }
    out.push_str(idx.slice(TextRange::new(pos, sentence.end)));
    (out, masks)
}
