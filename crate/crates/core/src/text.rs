//! Character-offset helpers, the rule-based sentence splitter and the word tokenizer.
//!
//! All offsets in this crate are 0-based, half-open and counted in unicode
//! code points, never bytes.

use serde::{Deserialize, Serialize};

/// Half-open `[start, end)` range over code points of some text.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct TextRange {
    pub start: usize,
    pub end: usize,
}

impl TextRange {
    pub const fn new(start: usize, end: usize) -> Self {
        TextRange { start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, other: &TextRange) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    pub fn overlaps(&self, other: &TextRange) -> bool {
        self.start < other.end && other.start < self.end
    }
}

impl From<(usize, usize)> for TextRange {
    fn from((start, end): (usize, usize)) -> Self {
        TextRange { start, end }
    }
}

impl From<TextRange> for (usize, usize) {
    fn from(r: TextRange) -> Self {
        (r.start, r.end)
    }
}

/// Number of code points in `text`.
pub fn char_len(text: &str) -> usize {
    text.chars().count()
}

/// Byte offset of every code point boundary, including the final one.
pub struct CharIndex<'a> {
    text: &'a str,
    bytes: Vec<usize>,
}

impl<'a> CharIndex<'a> {
    pub fn new(text: &'a str) -> Self {
        let mut bytes: Vec<usize> = text.char_indices().map(|(b, _)| b).collect();
        bytes.push(text.len());
        CharIndex { text, bytes }
    }

    pub fn len(&self) -> usize {
        self.bytes.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Substring for a code point range. Panics if out of bounds.
    pub fn slice(&self, range: TextRange) -> &'a str {
        &self.text[self.bytes[range.start]..self.bytes[range.end]]
    }

    pub fn get(&self, range: TextRange) -> Option<&'a str> {
        if range.start > range.end || range.end > self.len() {
            return None;
        }
        Some(self.slice(range))
    }
}

/// Substring by code point range; `None` when out of bounds.
pub fn slice_chars(text: &str, range: TextRange) -> Option<&str> {
    CharIndex::new(text).get(range)
}

/// Splits text into word tokens (maximal alphanumeric runs) and single
/// punctuation/symbol tokens. Whitespace is never part of a token.
pub fn tokenize(text: &str) -> Vec<TextRange> {
    let mut tokens = Vec::new();
    let mut word_start: Option<usize> = None;
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        n = i + 1;
        if c.is_alphanumeric() {
            if word_start.is_none() {
                word_start = Some(i);
            }
            continue;
        }
        if let Some(s) = word_start.take() {
            tokens.push(TextRange::new(s, i));
        }
        if !c.is_whitespace() {
            tokens.push(TextRange::new(i, i + 1));
        }
    }
    if let Some(s) = word_start {
        tokens.push(TextRange::new(s, n));
    }
    tokens
}

/// Words that end with a period without ending the sentence. Compared
/// case-insensitively against the alphanumeric/period run before the period.
const ABBREVIATIONS: &[&str] = &[
    "al", "e.g", "i.e", "fig", "figs", "eq", "eqs", "cf", "vs", "sec", "secs", "tab", "resp",
    "approx", "ref", "refs", "ch", "no", "dr", "mr", "mrs", "ms", "prof", "jr", "sr", "st", "viz",
    "ca", "et",
];

fn is_abbreviation(word: &str) -> bool {
    ABBREVIATIONS.contains(&word.to_lowercase().as_str())
}

/// A single uppercase letter followed by a capitalized word of two or more
/// letters, as in "J. Smith". `after` starts right after the period.
fn is_initial(word: &str, after: &[char]) -> bool {
    let mut chars = word.chars();
    if !matches!((chars.next(), chars.next()), (Some(c), None) if c.is_uppercase()) {
        return false;
    }
    let rest: Vec<char> = after
        .iter()
        .skip_while(|c| c.is_whitespace())
        .take_while(|c| c.is_alphabetic())
        .copied()
        .collect();
    rest.len() >= 2 && rest[0].is_uppercase() && rest[1..].iter().all(|c| c.is_lowercase())
}

fn is_closer(c: char) -> bool {
    matches!(c, ')' | ']' | '"' | '\'' | '”' | '’' | '}')
}

fn is_opener(c: char) -> bool {
    matches!(c, '(' | '[' | '"' | '\'' | '“' | '‘' | '{')
}

/// Rule-based sentence splitter. The returned ranges tile `text` exactly:
/// whitespace after a terminator belongs to the preceding sentence. No split
/// is placed strictly inside any of the `protected` ranges (citation marks).
pub fn split_sentences(text: &str, protected: &[TextRange]) -> Vec<TextRange> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    if n == 0 {
        return Vec::new();
    }
    let mut starts = vec![0usize];
    let mut i = 0;
    while i < n {
        let c = chars[i];
        if !matches!(c, '.' | '!' | '?') {
            i += 1;
            continue;
        }
        if c == '.' {
            let mut b = i;
            while b > 0 && (chars[b - 1].is_alphanumeric() || chars[b - 1] == '.') {
                b -= 1;
            }
            let word: String = chars[b..i].iter().collect();
            if !word.is_empty() && (is_abbreviation(&word) || is_initial(&word, &chars[i + 1..])) {
                i += 1;
                continue;
            }
            // Decimal numbers such as 3.5.
            if i > 0 && chars[i - 1].is_ascii_digit() && i + 1 < n && chars[i + 1].is_ascii_digit() {
                i += 1;
                continue;
            }
        }
        let mut j = i + 1;
        while j < n && (matches!(chars[j], '.' | '!' | '?') || is_closer(chars[j])) {
            j += 1;
        }
        let ws_start = j;
        while j < n && chars[j].is_whitespace() {
            j += 1;
        }
        if j == n {
            break;
        }
        if j == ws_start {
            i = j;
            continue;
        }
        let next = chars[j];
        let starts_sentence = next.is_uppercase() || next.is_numeric() || is_opener(next);
        let inside_mark = protected.iter().any(|m| m.start < j && j < m.end);
        if starts_sentence && !inside_mark {
            starts.push(j);
        }
        i = j;
    }
    let mut out = Vec::with_capacity(starts.len());
    for (k, &s) in starts.iter().enumerate() {
        let e = starts.get(k + 1).copied().unwrap_or(n);
        out.push(TextRange::new(s, e));
    }
    out
}

/// Collapses whitespace runs into single spaces and trims the ends.
pub fn normalize_whitespace(text: &str) -> String {
    text.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Stable 64-bit FNV-1a hash. Used wherever a hash must be reproducible
/// across builds (feature hashing, checkpoint-stable seeds).
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sentences(text: &str) -> Vec<&str> {
        let idx = CharIndex::new(text);
        split_sentences(text, &[]).into_iter().map(|r| idx.slice(r)).collect()
    }

    #[test]
    fn two_short_sentences() {
        assert_eq!(sentences("A. B."), vec!["A. ", "B."]);
    }

    #[test]
    fn initials_do_not_split() {
        assert_eq!(
            sentences("Work by J. Smith is cited. Model A. Results differ."),
            vec!["Work by J. Smith is cited. ", "Model A. Results differ."]
        );
    }

    #[test]
    fn et_al_does_not_split() {
        let text = "Smith et al. (2019) propose a tagger. It works well.";
        assert_eq!(
            sentences(text),
            vec!["Smith et al. (2019) propose a tagger. ", "It works well."]
        );
    }

    #[test]
    fn abbreviations_do_not_split() {
        let text = "Many tasks, e.g. Parsing, are hard. See Fig. 2 for details. Eq. 3 holds.";
        assert_eq!(
            sentences(text),
            vec![
                "Many tasks, e.g. Parsing, are hard. ",
                "See Fig. 2 for details. ",
                "Eq. 3 holds."
            ]
        );
    }

    #[test]
    fn lowercase_continuation_does_not_split() {
        assert_eq!(sentences("It costs 3.5 points. and more."), vec!["It costs 3.5 points. and more."]);
    }

    #[test]
    fn protected_ranges_block_splits() {
        let text = "As shown (Lee. Kim, 2020) here.";
        let mark = TextRange::new(9, 25);
        assert_eq!(split_sentences(text, &[mark]).len(), 1);
        assert_eq!(split_sentences(text, &[]).len(), 2);
    }

    #[test]
    fn tokenizer_splits_punctuation() {
        let text = "Lee (2020), pointer-generator";
        let idx = CharIndex::new(text);
        let toks: Vec<&str> = tokenize(text).into_iter().map(|r| idx.slice(r)).collect();
        assert_eq!(toks, vec!["Lee", "(", "2020", ")", ",", "pointer", "-", "generator"]);
    }

    #[test]
    fn offsets_are_code_points() {
        let text = "Ünïcode wörds ok";
        let toks = tokenize(text);
        assert_eq!(toks[1], TextRange::new(8, 13));
        assert_eq!(slice_chars(text, toks[1]), Some("wörds"));
    }

    #[test]
    fn fnv_is_stable() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
    }
}
