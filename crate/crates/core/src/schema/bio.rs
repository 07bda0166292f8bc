//! Token-level BIO2 encoding of citation spans.
//!
//! Citation span detection (CS) uses `B`/`I`/`O` over whole spans. Citation
//! type recognition (CT) uses `B-`/`I-` × `Dominant`/`Reference` plus `O`.
//! A reference citation mark nested inside a dominant span is tagged
//! `Reference` at its own tokens; the dominant tokens after it continue with
//! `I-Dominant`. Decoding merges such runs back into one dominant span.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{
    derive_continuation, validate, Citation, CitationSpan, CitationType, LabeledParagraph,
    SchemaError,
};
use crate::corpus::Paragraph;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CsTag {
    B,
    I,
    O,
}

impl CsTag {
    pub const ALL: [CsTag; 3] = [CsTag::B, CsTag::I, CsTag::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CtTag {
    #[serde(rename = "B-Dominant")]
    BDom,
    #[serde(rename = "I-Dominant")]
    IDom,
    #[serde(rename = "B-Reference")]
    BRef,
    #[serde(rename = "I-Reference")]
    IRef,
    O,
}

impl CtTag {
    pub const ALL: [CtTag; 5] = [CtTag::BDom, CtTag::IDom, CtTag::BRef, CtTag::IRef, CtTag::O];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn citation_type(self) -> Option<CitationType> {
        match self {
            CtTag::BDom | CtTag::IDom => Some(CitationType::Dominant),
            CtTag::BRef | CtTag::IRef => Some(CitationType::Reference),
            CtTag::O => None,
        }
    }

    pub fn is_reference(self) -> bool {
        matches!(self, CtTag::BRef | CtTag::IRef)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CtTag::BDom => "B-Dominant",
            CtTag::IDom => "I-Dominant",
            CtTag::BRef => "B-Reference",
            CtTag::IRef => "I-Reference",
            CtTag::O => "O",
        }
    }
}

impl fmt::Display for CtTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CtTag {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CtTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| SchemaError::UnknownLabel(s.to_string()))
    }
}

impl fmt::Display for CsTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CsTag::B => "B",
            CsTag::I => "I",
            CsTag::O => "O",
        })
    }
}

/// Per-token CS and CT tags of one paragraph.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSequence {
    pub cs_tags: Vec<CsTag>,
    pub ct_tags: Vec<CtTag>,
}

impl TagSequence {
    pub fn all_outside(n: usize) -> Self {
        TagSequence {
            cs_tags: vec![CsTag::O; n],
            ct_tags: vec![CtTag::O; n],
        }
    }

    pub fn len(&self) -> usize {
        self.ct_tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ct_tags.is_empty()
    }
}

/// Encodes a valid labeled paragraph as token tags. Invalid input is refused
/// with its validation report.
pub fn to_bio(lp: &LabeledParagraph) -> Result<TagSequence, SchemaError> {
    let report = validate(lp);
    if !report.is_empty() {
        return Err(SchemaError::Invalid(report));
    }
    let p = &lp.paragraph;
    let mut tags = TagSequence::all_outside(p.tokens.len());
    for span in &lp.spans {
        let toks = p.tokens_in(span.range());
        for (k, t) in toks.clone().enumerate() {
            tags.cs_tags[t] = if k == 0 { CsTag::B } else { CsTag::I };
        }
        match span.span_type {
            CitationType::Reference => {
                for (k, t) in toks.enumerate() {
                    tags.ct_tags[t] = if k == 0 { CtTag::BRef } else { CtTag::IRef };
                }
            }
            CitationType::Dominant => {
                for (k, t) in toks.clone().enumerate() {
                    tags.ct_tags[t] = if k == 0 { CtTag::BDom } else { CtTag::IDom };
                }
                for c in span
                    .citations
                    .iter()
                    .filter(|c| c.citation_type == CitationType::Reference)
                {
                    for (k, t) in p.tokens_in(c.range()).enumerate() {
                        tags.ct_tags[t] = if k == 0 { CtTag::BRef } else { CtTag::IRef };
                    }
                }
            }
        }
    }
    Ok(tags)
}

/// Repairs illegal CS transitions: `I` after `O` (or at the start) becomes `B`.
pub fn repair_cs(tags: &[CsTag]) -> Vec<CsTag> {
    let mut out = Vec::with_capacity(tags.len());
    let mut prev = CsTag::O;
    for &t in tags {
        let fixed = if t == CsTag::I && prev == CsTag::O { CsTag::B } else { t };
        out.push(fixed);
        prev = fixed;
    }
    out
}

/// Repairs illegal CT transitions: `I-X` after `O` or after a different type
/// becomes `B-X`. The one exception is `I-Dominant` after a reference
/// segment that is itself nested in an open dominant run, which continues
/// that run.
pub fn repair_ct(tags: &[CtTag]) -> Vec<CtTag> {
    let mut out = Vec::with_capacity(tags.len());
    let mut prev = CtTag::O;
    let mut open_dominant = false;
    for &t in tags {
        let fixed = match t {
            CtTag::O => {
                open_dominant = false;
                CtTag::O
            }
            CtTag::BDom => {
                open_dominant = true;
                CtTag::BDom
            }
            CtTag::IDom => {
                let legal = matches!(prev, CtTag::BDom | CtTag::IDom)
                    || (prev.is_reference() && open_dominant);
                open_dominant = true;
                if legal {
                    CtTag::IDom
                } else {
                    CtTag::BDom
                }
            }
            CtTag::BRef => CtTag::BRef,
            CtTag::IRef => {
                if prev.is_reference() {
                    CtTag::IRef
                } else {
                    CtTag::BRef
                }
            }
        };
        out.push(fixed);
        prev = fixed;
    }
    out
}

/// Decodes token tags into citation spans after repair. Each dominant run
/// absorbs nested reference segments followed by `I-Dominant`; the marks
/// inside each span become its citations, typed `reference` when every mark
/// token carries a reference tag.
///
/// Spans are returned as decoded: a span may hold no citation, which
/// `validate` reports.
pub fn from_bio(tags: &TagSequence, paragraph: &Paragraph) -> Result<Vec<CitationSpan>, SchemaError> {
    let n = paragraph.tokens.len();
    for len in [tags.ct_tags.len(), tags.cs_tags.len()] {
        if len != n {
            return Err(SchemaError::LengthMismatch { tags: len, tokens: n });
        }
    }
    let ct = repair_ct(&tags.ct_tags);
    let mut spans = Vec::new();
    let mut i = 0;
    while i < n {
        let (span_type, end) = match ct[i] {
            CtTag::O => {
                i += 1;
                continue;
            }
            CtTag::BDom | CtTag::IDom => {
                let mut j = i + 1;
                while j < n {
                    match ct[j] {
                        CtTag::IDom => j += 1,
                        CtTag::BRef | CtTag::IRef => {
                            let mut k = j;
                            while k < n && ct[k].is_reference() {
                                k += 1;
                            }
                            if k < n && ct[k] == CtTag::IDom {
                                j = k;
                            } else {
                                break;
                            }
                        }
                        _ => break,
                    }
                }
                (CitationType::Dominant, j)
            }
            CtTag::BRef | CtTag::IRef => {
                let mut j = i + 1;
                while j < n && ct[j] == CtTag::IRef {
                    j += 1;
                }
                (CitationType::Reference, j)
            }
        };
        let range = crate::text::TextRange::new(paragraph.tokens[i].start, paragraph.tokens[end - 1].end);
        let citations = paragraph
            .citation_marks
            .iter()
            .filter(|m| range.contains(&m.range()))
            .map(|m| {
                let toks = paragraph.tokens_in(m.range());
                let all_ref = !toks.is_empty() && toks.clone().all(|t| ct[t].is_reference());
                Citation {
                    start: m.start,
                    end: m.end,
                    bib_key: m.bib_key.clone(),
                    citation_type: if all_ref || span_type == CitationType::Reference {
                        CitationType::Reference
                    } else {
                        CitationType::Dominant
                    },
                }
            })
            .collect();
        let mut span = CitationSpan {
            start: range.start,
            end: range.end,
            span_type,
            continuation: false,
            citations,
        };
        span.continuation = derive_continuation(paragraph, &span);
        spans.push(span);
        i = end;
    }
    Ok(spans)
}
