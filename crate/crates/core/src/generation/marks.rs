//! Pattern-based citation-mark recognizer used to exclude marks from
//! generation scores.
//!
//! Recognized forms:
//!
//! - narrative marks: `Lee (2019)`, `Lee et al. (2019)`, `Lee and Kim (2019a)`;
//! - inline marks: `Lee et al., 2019`, `Lee et al. 2019`;
//! - parenthetical groups holding a name and ending in a year:
//!   `(Lee, 2019)`, `(Lee et al., 2019; Kim and Park, 2020)`;
//! - bracketed numeric marks: `[3]`, `[3, 7]`, `[3-5]`.

use std::sync::LazyLock;

use regex::Regex;

use crate::text::normalize_whitespace;

const NAME: &str = r"\p{Lu}[\p{L}'’\-]+";
const YEAR: &str = r"(?:19|20)\d{2}[a-z]?";

static MARK: LazyLock<Regex> = LazyLock::new(|| {
    let narrative = format!(
        r"{NAME}(?:\s+et\s+al\.?|\s+(?:and|&)\s+{NAME})?,?\s*\(\s*{YEAR}(?:\s*[,;]\s*{YEAR})*\s*\)"
    );
    let inline = format!(r"{NAME}\s+et\s+al\.?,?\s+{YEAR}");
    let group = format!(r"\([^()]*\p{{L}}[^()]*{YEAR}\s*\)");
    let numeric = r"\[\s*\d+(?:\s*[,;–\-]\s*\d+)*\s*\]";
    Regex::new(&format!("{narrative}|{inline}|{group}|{numeric}")).expect("valid mark pattern")
});

static SPACE_BEFORE_PUNCT: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"\s+([.,;:!?)])").expect("valid pattern"));

/// Code-point ranges of recognized marks, left to right.
pub fn find_citation_marks(text: &str) -> Vec<(usize, usize)> {
    MARK.find_iter(text)
        .map(|m| {
            let start = text[..m.start()].chars().count();
            (start, start + m.as_str().chars().count())
        })
        .collect()
}

/// Removes recognized marks and normalizes whitespace. Idempotent.
pub fn strip_citation_marks(text: &str) -> String {
    let mut current = normalize_whitespace(text);
    loop {
        let stripped = MARK.replace_all(&current, " ");
        let stripped = SPACE_BEFORE_PUNCT.replace_all(&normalize_whitespace(&stripped), "$1").into_owned();
        if stripped == current {
            return current;
        }
        current = stripped;
    }
}
