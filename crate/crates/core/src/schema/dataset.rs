//! Labeled-data JSON files.
//!
//! A dataset directory holds `*.json` files (one [`LabeledSection`] object,
//! or an array of them) and/or `*.jsonl` files (one section per line). Files
//! are read in lexicographic order. The same layout holds unlabeled
//! [`RelatedWorkSection`]s.

use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::LabeledParagraph;
use crate::corpus::RelatedWorkSection;

/// A labeled related-work section.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledSection {
    pub paper_id: String,
    #[serde(default)]
    pub year: Option<i32>,
    pub paragraphs: Vec<LabeledParagraph>,
}

impl LabeledSection {
    pub fn unlabeled(&self) -> RelatedWorkSection {
        RelatedWorkSection {
            paper_id: self.paper_id.clone(),
            year: self.year,
            title: String::new(),
            paragraphs: self.paragraphs.iter().map(|p| p.paragraph.clone()).collect(),
        }
    }
}

fn data_files(dir: &Path) -> io::Result<Vec<PathBuf>> {
    if dir.is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "jsonl")))
        .collect();
    files.sort();
    Ok(files)
}

fn invalid(path: &Path, line: Option<usize>, e: serde_json::Error) -> io::Error {
    let at = match line {
        Some(l) => format!("{}:{l}", path.display()),
        None => path.display().to_string(),
    };
    io::Error::new(io::ErrorKind::InvalidData, format!("{at}: {e}"))
}

/// Loads every item in a directory (or a single file).
pub fn load<T: DeserializeOwned>(path: &Path) -> io::Result<Vec<T>> {
    let mut out = Vec::new();
    for file in data_files(path)? {
        if file.extension().and_then(|e| e.to_str()) == Some("jsonl") {
            let reader = BufReader::new(fs::File::open(&file)?);
            for (i, line) in reader.lines().enumerate() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                out.push(serde_json::from_str(&line).map_err(|e| invalid(&file, Some(i + 1), e))?);
            }
        } else {
            let value: serde_json::Value = serde_json::from_reader(BufReader::new(fs::File::open(&file)?))
                .map_err(|e| invalid(&file, None, e))?;
            match value {
                serde_json::Value::Array(items) => {
                    for item in items {
                        out.push(serde_json::from_value(item).map_err(|e| invalid(&file, None, e))?);
                    }
                }
                other => out.push(serde_json::from_value(other).map_err(|e| invalid(&file, None, e))?),
            }
        }
    }
    Ok(out)
}

pub fn load_labeled(path: &Path) -> io::Result<Vec<LabeledSection>> {
    load(path)
}

pub fn load_unlabeled(path: &Path) -> io::Result<Vec<RelatedWorkSection>> {
    load(path)
}

/// File-system safe name for a paper id.
pub fn file_stem(paper_id: &str) -> String {
    paper_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.') { c } else { '_' })
        .collect()
}

/// Writes one pretty-printed `<paper_id>.json` per item.
pub fn save<T: Serialize>(dir: &Path, items: &[T], id: impl Fn(&T) -> &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    for item in items {
        let path = dir.join(format!("{}.json", file_stem(id(item))));
        let mut f = io::BufWriter::new(fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut f, item)?;
        f.write_all(b"\n")?;
        f.flush()?;
    }
    Ok(())
}

pub fn save_labeled(dir: &Path, sections: &[LabeledSection]) -> io::Result<()> {
    save(dir, sections, |s| &s.paper_id)
}

pub fn save_unlabeled(dir: &Path, sections: &[RelatedWorkSection]) -> io::Result<()> {
    save(dir, sections, |s| &s.paper_id)
}
