//! Reader for line-delimited S2ORC-style paper objects.
//!
//! Each line is one JSON object with these fields (unknown fields ignored):
//!
//! | field        | type                                                          |
//! |--------------|---------------------------------------------------------------|
//! | `paper_id`   | string                                                        |
//! | `title`      | string, optional                                              |
//! | `year`       | integer or null, optional                                     |
//! | `abstract`   | string, or list of text blocks, optional                      |
//! | `body_text`  | list of `{ "section", "text", "cite_spans" }` blocks           |
//! | `bib_entries`| map `ref_id -> { "title", "year", "link" }`                   |
//!
//! A `cite_spans` entry is `{ "start", "end", "ref_id" }` with code point
//! offsets into the block text; `ref_id` may be null. `link` is the cited
//! paper's id when it is part of the corpus. Consecutive blocks with the same
//! `section` form one body section; every block is one paragraph.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::Deserialize;

use super::{BibEntry, BodySection, IngestError, PaperRecord, RawCitationMark, RawParagraph};

#[derive(Debug, Deserialize)]
struct CiteSpan {
    start: usize,
    end: usize,
    #[serde(default)]
    ref_id: Option<String>,
}

#[derive(Debug, Deserialize)]
struct TextBlock {
    #[serde(default)]
    section: Option<String>,
    text: String,
    #[serde(default)]
    cite_spans: Vec<CiteSpan>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AbstractField {
    Text(String),
    Blocks(Vec<TextBlock>),
}

#[derive(Debug, Deserialize)]
struct BibRecord {
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    year: Option<i32>,
    #[serde(default)]
    link: Option<String>,
}

#[derive(Debug, Deserialize)]
struct S2orcPaper {
    paper_id: String,
    #[serde(default)]
    title: Option<String>,
    #[serde(default)]
    year: Option<i32>,
    #[serde(default, rename = "abstract")]
    abstract_field: Option<AbstractField>,
    #[serde(default)]
    body_text: Vec<TextBlock>,
    #[serde(default)]
    bib_entries: BTreeMap<String, BibRecord>,
}

impl From<S2orcPaper> for PaperRecord {
    fn from(p: S2orcPaper) -> Self {
        let mut body_sections: Vec<BodySection> = Vec::new();
        for block in p.body_text {
            let title = block.section.unwrap_or_default();
            let para = RawParagraph {
                text: block.text,
                citation_marks: block
                    .cite_spans
                    .into_iter()
                    .map(|c| RawCitationMark {
                        start: c.start,
                        end: c.end,
                        bib_key: c.ref_id.unwrap_or_default(),
                    })
                    .collect(),
            };
            match body_sections.last_mut() {
                Some(last) if last.title == title => last.paragraphs.push(para),
                _ => body_sections.push(BodySection {
                    title,
                    paragraphs: vec![para],
                }),
            }
        }
        let abstract_text = match p.abstract_field {
            Some(AbstractField::Text(t)) => t,
            Some(AbstractField::Blocks(bs)) => {
                bs.into_iter().map(|b| b.text).collect::<Vec<_>>().join("\n")
            }
            None => String::new(),
        };
        let bibliography = p
            .bib_entries
            .into_iter()
            .map(|(k, b)| {
                (
                    k,
                    BibEntry {
                        cited_paper_id: b.link,
                        title: b.title.unwrap_or_default(),
                        year: b.year,
                    },
                )
            })
            .collect();
        PaperRecord {
            paper_id: p.paper_id,
            title: p.title.unwrap_or_default(),
            year: p.year,
            abstract_text,
            body_sections,
            bibliography,
        }
    }
}

/// Parses one line.
pub fn parse_record(line: &str) -> Result<PaperRecord, serde_json::Error> {
    serde_json::from_str::<S2orcPaper>(line).map(Into::into)
}

/// Iterates records from a line-delimited reader. Blank lines are skipped;
/// parse errors carry their 1-based line number.
pub fn read_records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<PaperRecord, IngestError>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                return Some(Err(IngestError::Json {
                    line: i + 1,
                    source: serde_json::Error::io(e),
                }))
            }
        };
        if line.trim().is_empty() {
            return None;
        }
        Some(parse_record(&line).map_err(|source| IngestError::Json { line: i + 1, source }))
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const LINE: &str = r#"{"paper_id":"p9","title":"A paper","year":2020,
        "abstract":[{"text":"We do things.","cite_spans":[]}],
        "body_text":[
          {"section":"Introduction","text":"Intro.","cite_spans":[]},
          {"section":"2 Related Work","text":"Lee (2019) did it.","cite_spans":[{"start":0,"end":10,"ref_id":"BIBREF0"}]},
          {"section":"2 Related Work","text":"Others too [1].","cite_spans":[{"start":11,"end":14,"ref_id":null}]}
        ],
        "bib_entries":{"BIBREF0":{"title":"Lee's work","year":2019,"link":"c1"}}}"#;

    #[test]
    fn groups_blocks_into_sections() {
        let r = parse_record(&LINE.replace('\n', " ")).unwrap();
        assert_eq!(r.body_sections.len(), 2);
        assert_eq!(r.body_sections[1].paragraphs.len(), 2);
        assert_eq!(r.abstract_text, "We do things.");
        assert_eq!(r.bibliography["BIBREF0"].cited_paper_id.as_deref(), Some("c1"));
        assert_eq!(r.body_sections[1].paragraphs[1].citation_marks[0].bib_key, "");
    }

    #[test]
    fn reports_line_numbers() {
        let input = format!("{}\n\nnot json\n", LINE.replace('\n', " "));
        let results: Vec<_> = read_records(input.as_bytes()).collect();
        assert_eq!(results.len(), 2);
        assert!(results[0].is_ok());
        match &results[1] {
            Err(IngestError::Json { line, .. }) => assert_eq!(*line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }
}
