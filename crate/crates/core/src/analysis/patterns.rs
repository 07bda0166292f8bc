//! Frequent label subsequences by prefix growth over projected occurrence
//! lists, with an optional bound on the gap between consecutive elements.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::AnalysisError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternQuery {
    /// Minimum number of sequences containing the pattern.
    pub min_support: usize,
    /// Maximum number of skipped elements between consecutive pattern
    /// elements. `None` leaves gaps unbounded; `Some(0)` asks for contiguous
    /// runs.
    pub max_gap: Option<usize>,
    pub min_len: usize,
    pub max_len: usize,
    /// Keep only patterns with no super-pattern of equal support. Closedness
    /// is judged among patterns of at most `max_len` elements.
    #[serde(default)]
    pub closed: bool,
}

impl PatternQuery {
    /// Support of 5% of the sequences, contiguous patterns of 2 to 5 labels.
    pub fn default_for(n_sequences: usize) -> PatternQuery {
        PatternQuery {
            min_support: ((n_sequences as f64 * 0.05).ceil() as usize).max(1),
            max_gap: Some(0),
            min_len: 2,
            max_len: 5,
            closed: false,
        }
    }

    pub fn check(&self) -> Result<(), AnalysisError> {
        if self.min_support == 0 {
            return Err(AnalysisError::InvalidQuery("min_support must be at least 1".into()));
        }
        if self.min_len == 0 || self.min_len > self.max_len {
            return Err(AnalysisError::InvalidQuery(format!(
                "need 1 <= min_len <= max_len, got {} and {}",
                self.min_len, self.max_len
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pattern<T> {
    pub items: Vec<T>,
    pub support: usize,
}

/// Occurrences of the current prefix: per containing sequence, the positions
/// where an occurrence can end.
type Projection = Vec<(usize, Vec<usize>)>;

struct Miner<'a, T> {
    seqs: &'a [Vec<T>],
    q: PatternQuery,
    out: Vec<Pattern<T>>,
}

impl<T: Ord + Clone> Miner<'_, T> {
    fn extend(&self, proj: &Projection) -> BTreeMap<T, Projection> {
        let mut next: BTreeMap<T, BTreeMap<usize, BTreeSet<usize>>> = BTreeMap::new();
        for (si, ends) in proj {
            let seq = &self.seqs[*si];
            for &e in ends {
                let hi = match self.q.max_gap {
                    Some(g) => (e + 2 + g).min(seq.len()),
                    None => seq.len(),
                };
                for (pos, item) in seq.iter().enumerate().take(hi).skip(e + 1) {
                    next.entry(item.clone()).or_default().entry(*si).or_default().insert(pos);
                }
            }
        }
        next.into_iter()
            .map(|(item, by_seq)| {
                let proj = by_seq.into_iter().map(|(si, ends)| (si, ends.into_iter().collect())).collect();
                (item, proj)
            })
            .collect()
    }

    fn grow(&mut self, prefix: &mut Vec<T>, proj: &Projection) {
        if proj.len() < self.q.min_support {
            return;
        }
        self.out.push(Pattern {
            items: prefix.clone(),
            support: proj.len(),
        });
        if prefix.len() == self.q.max_len {
            return;
        }
        for (item, p) in self.extend(proj) {
            prefix.push(item);
            self.grow(prefix, &p);
            prefix.pop();
        }
    }
}

fn is_subsequence<T: PartialEq>(short: &[T], long: &[T]) -> bool {
    let mut it = long.iter();
    short.iter().all(|x| it.any(|y| y == x))
}

/// All patterns meeting the query, sorted by items. Support counts each
/// containing sequence once.
pub fn mine_patterns<T: Ord + Clone>(sequences: &[Vec<T>], q: &PatternQuery) -> Result<Vec<Pattern<T>>, AnalysisError> {
    q.check()?;
    if sequences.is_empty() {
        return Err(AnalysisError::EmptyDataset);
    }
    let mut miner = Miner {
        seqs: sequences,
        q: *q,
        out: Vec::new(),
    };
    let mut first: BTreeMap<T, Projection> = BTreeMap::new();
    for (si, seq) in sequences.iter().enumerate() {
        for (pos, item) in seq.iter().enumerate() {
            let proj = first.entry(item.clone()).or_default();
            match proj.last_mut() {
                Some((last, ends)) if *last == si => ends.push(pos),
                _ => proj.push((si, vec![pos])),
            }
        }
    }
    for (item, proj) in first {
        miner.grow(&mut vec![item], &proj);
    }
    let all = miner.out;
    let keep = |p: &Pattern<T>| {
        p.items.len() >= q.min_len
            && (!q.closed
                || !all.iter().any(|o| {
                    o.support == p.support && o.items.len() > p.items.len() && is_subsequence(&p.items, &o.items)
                }))
    };
    let mut out: Vec<Pattern<T>> = all.iter().filter(|p| keep(p)).cloned().collect();
    out.sort();
    Ok(out)
}
