//! Evaluation and agreement metrics. All functions are pure.

use std::collections::{HashMap, HashSet};
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{0} requires at least {1} items")]
    TooFew(&'static str, usize),
    #[error("kendall's tau is undefined when one ranking is entirely tied")]
    AllTied,
    #[error("reference text has no tokens")]
    EmptyReference,
}

fn same_len<A, B>(a: &[A], b: &[B]) -> Result<(), MetricError> {
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(())
}

/// Confusion counts behind a micro-averaged F1.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct F1Report {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl F1Report {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> F1Report {
        let ratio = |num: usize, den: usize| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        F1Report {
            tp,
            fp,
            fn_,
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
        }
    }

    /// Sums counts, e.g. across cross-validation folds.
    pub fn merge(&self, other: &F1Report) -> F1Report {
        F1Report::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }
}

/// Micro-averaged precision, recall and F1 over the labels not in `ignore`.
///
/// A position whose predicted label is not ignored is a predicted positive;
/// it is a true positive when it equals the gold label. A position whose gold
/// label is not ignored is a gold positive. With nothing to find and nothing
/// predicted, all three scores are 1.
pub fn micro_prf<T: Eq + Hash>(pred: &[T], gold: &[T], ignore: &HashSet<T>) -> Result<F1Report, MetricError> {
    same_len(pred, gold)?;
    let (mut tp, mut pred_pos, mut gold_pos) = (0, 0, 0);
    for (p, g) in pred.iter().zip(gold) {
        let p_pos = !ignore.contains(p);
        if p_pos {
            pred_pos += 1;
        }
        if !ignore.contains(g) {
            gold_pos += 1;
        }
        if p_pos && p == g {
            tp += 1;
        }
    }
    Ok(F1Report::from_counts(tp, pred_pos - tp, gold_pos - tp))
}

pub fn micro_f1<T: Eq + Hash>(pred: &[T], gold: &[T], ignore: &HashSet<T>) -> Result<f64, MetricError> {
    micro_prf(pred, gold, ignore).map(|r| r.f1)
}

/// Cohen's kappa with marginal-product chance agreement. Returns 1 when chance
/// agreement is 1 (both annotators used one and the same label throughout).
pub fn cohens_kappa<T: Eq + Hash>(a: &[T], b: &[T]) -> Result<f64, MetricError> {
    same_len(a, b)?;
    if a.is_empty() {
        return Err(MetricError::TooFew("cohen's kappa", 1));
    }
    let n = a.len() as f64;
    let mut agree = 0usize;
    let mut ca: HashMap<&T, usize> = HashMap::new();
    let mut cb: HashMap<&T, usize> = HashMap::new();
    for (x, y) in a.iter().zip(b) {
        if x == y {
            agree += 1;
        }
        *ca.entry(x).or_default() += 1;
        *cb.entry(y).or_default() += 1;
    }
    let p_o = agree as f64 / n;
    let p_e: f64 = ca
        .iter()
        .map(|(k, &c)| c as f64 * cb.get(k).copied().unwrap_or(0) as f64)
        .sum::<f64>()
        / (n * n);
    if (1.0 - p_e).abs() < 1e-15 {
        return Ok(1.0);
    }
    Ok((p_o - p_e) / (1.0 - p_e))
}

/// Number of tied pairs within `v`: the sum of t(t-1)/2 over groups of equal
/// values.
fn tied_pairs(v: &[f64]) -> f64 {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut run = 1.0;
    for w in s.windows(2) {
        if w[0] == w[1] {
            run += 1.0;
        } else {
            total += run * (run - 1.0) / 2.0;
            run = 1.0;
        }
    }
    total + run * (run - 1.0) / 2.0
}

/// Kendall's tau-b with tie correction.
pub fn kendalls_tau(x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
    same_len(x, y)?;
    let n = x.len();
    if n < 2 {
        return Err(MetricError::TooFew("kendall's tau", 2));
    }
    let mut score = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx != 0.0 && dy != 0.0 {
                score += if (dx > 0.0) == (dy > 0.0) { 1.0 } else { -1.0 };
            }
        }
    }
    let n0 = (n * (n - 1)) as f64 / 2.0;
    let den = ((n0 - tied_pairs(x)) * (n0 - tied_pairs(y))).sqrt();
    if den == 0.0 {
        return Err(MetricError::AllTied);
    }
    Ok(score / den)
}

/// ROUGE recall scores of a candidate against one reference.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RougeScore {
    pub r1_recall: f64,
    pub r2_recall: f64,
    pub rl_recall: f64,
    pub r12_avg: f64,
}

/// Lowercases and splits on whitespace and punctuation; punctuation is
/// dropped.
pub fn rouge_tokens(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn ngram_recall(reference: &[String], candidate: &[String], n: usize) -> f64 {
    if reference.len() < n {
        return 0.0;
    }
    let mut counts: HashMap<&[String], isize> = HashMap::new();
    for g in reference.windows(n) {
        *counts.entry(g).or_default() += 1;
    }
    let total = reference.len() + 1 - n;
    let mut matched = 0usize;
    if candidate.len() >= n {
        for g in candidate.windows(n) {
            if let Some(c) = counts.get_mut(g) {
                if *c > 0 {
                    *c -= 1;
                    matched += 1;
                }
            }
        }
    }
    matched as f64 / total as f64
}

pub(crate) fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row = vec![0usize; b.len() + 1];
    for x in a {
        let mut diag = 0;
        for (j, y) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = if x == y { diag + 1 } else { up.max(row[j]) };
            diag = up;
        }
    }
    row[b.len()]
}

/// ROUGE-1, ROUGE-2 and ROUGE-L recall with clipped n-gram counts.
pub fn rouge_scores(reference: &str, candidate: &str) -> Result<RougeScore, MetricError> {
    let r = rouge_tokens(reference);
    if r.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let c = rouge_tokens(candidate);
    let r1 = ngram_recall(&r, &c, 1);
    let r2 = ngram_recall(&r, &c, 2);
    Ok(RougeScore {
        r1_recall: r1,
        r2_recall: r2,
        rl_recall: lcs_len(&r, &c) as f64 / r.len() as f64,
        r12_avg: (r1 + r2) / 2.0,
    })
}

/// Mean of per-pair scores.
pub fn mean_rouge(pairs: &[(String, String)]) -> Result<RougeScore, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::TooFew("mean rouge", 1));
    }
    let mut acc = RougeScore::default();
    for (reference, candidate) in pairs {
        let s = rouge_scores(reference, candidate)?;
        acc.r1_recall += s.r1_recall;
        acc.r2_recall += s.r2_recall;
        acc.rl_recall += s.rl_recall;
    }
    let n = pairs.len() as f64;
    acc.r1_recall /= n;
    acc.r2_recall /= n;
    acc.rl_recall /= n;
    acc.r12_avg = (acc.r1_recall + acc.r2_recall) / 2.0;
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn o() -> HashSet<&'static str> {
        HashSet::from(["O"])
    }

    #[test]
    fn f1_examples() {
        assert_eq!(micro_f1(&["B", "I", "O"], &["B", "I", "O"], &o()).unwrap(), 1.0);
        let r = micro_prf(&["B", "O", "O", "O"], &["B", "I", "O", "O"], &o()).unwrap();
        assert_eq!((r.precision, r.recall), (1.0, 0.5));
        assert!((r.f1 - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(micro_f1(&["O", "O"], &["B", "I"], &o()).unwrap(), 0.0);
        assert!(micro_f1(&["O"], &["O", "O"], &o()).is_err());
    }

    #[test]
    fn kappa_examples() {
        assert_eq!(cohens_kappa(&[1, 2, 1, 3], &[1, 2, 1, 3]).unwrap(), 1.0);
        // p_o = 0.8, both marginals 50/50 so p_e = 0.5.
        let a = [1, 1, 1, 1, 1, 0, 0, 0, 0, 0];
        let b = [1, 1, 1, 1, 0, 1, 0, 0, 0, 0];
        assert!((cohens_kappa(&a, &b).unwrap() - 0.6).abs() < 1e-12);
        assert_eq!(cohens_kappa(&[7, 7], &[7, 7]).unwrap(), 1.0);
        assert!(cohens_kappa::<u8>(&[], &[]).is_err());
    }

    #[test]
    fn tau_examples() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(kendalls_tau(&x, &x).unwrap(), 1.0);
        assert_eq!(kendalls_tau(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        let t = kendalls_tau(&x, &[1.0, 3.0, 2.0, 4.0]).unwrap();
        assert!((t - 4.0 / 6.0).abs() < 1e-12);
        assert_eq!(kendalls_tau(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), Err(MetricError::AllTied));
    }

    #[test]
    fn rouge_examples() {
        let s = rouge_scores("a b c d", "a b x").unwrap();
        assert_eq!(s.r1_recall, 0.5);
        assert!((s.r2_recall - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.rl_recall, 0.5);
        let same = rouge_scores("The cat, sat.", "the cat sat").unwrap();
        assert_eq!((same.r1_recall, same.r2_recall, same.rl_recall), (1.0, 1.0, 1.0));
        assert_eq!(rouge_scores("a b", "c d").unwrap().r1_recall, 0.0);
        assert_eq!(rouge_scores(" ,. ", "x"), Err(MetricError::EmptyReference));
    }

    #[test]
    fn rouge_clips_repeats() {
        let s = rouge_scores("the cat", "the the the").unwrap();
        assert_eq!(s.r1_recall, 0.5);
    }

    proptest! {
        #[test]
        fn f1_invariant_under_relabeling(
            pairs in prop::collection::vec((0u8..4, 0u8..4), 1..30),
            perm in Just([2u8, 0, 3, 1]),
        ) {
            let pred: Vec<u8> = pairs.iter().map(|p| p.0).collect();
            let gold: Vec<u8> = pairs.iter().map(|p| p.1).collect();
            let ignore = HashSet::from([0u8]);
            let f = micro_f1(&pred, &gold, &ignore).unwrap();
            let rp: Vec<u8> = pred.iter().map(|&x| perm[x as usize]).collect();
            let rg: Vec<u8> = gold.iter().map(|&x| perm[x as usize]).collect();
            let g = micro_f1(&rp, &rg, &HashSet::from([perm[0]])).unwrap();
            prop_assert!((f - g).abs() < 1e-12);
        }

        #[test]
        fn kappa_bounded_and_reflexive(a in prop::collection::vec(0u8..4, 1..30), b in prop::collection::vec(0u8..4, 1..30)) {
            let n = a.len().min(b.len());
            let k = cohens_kappa(&a[..n], &b[..n]).unwrap();
            prop_assert!(k <= 1.0 + 1e-12);
            prop_assert_eq!(cohens_kappa(&a, &a).unwrap(), 1.0);
        }

        #[test]
        fn tau_in_range(xs in prop::collection::vec((0u8..5, 0u8..5), 2..20)) {
            let x: Vec<f64> = xs.iter().map(|p| p.0 as f64).collect();
            let y: Vec<f64> = xs.iter().map(|p| p.1 as f64).collect();
            if let Ok(t) = kendalls_tau(&x, &y) {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&t));
            }
        }

        #[test]
        fn rouge_in_unit_interval(r in "[a-c ]{1,30}", c in "[a-c ]{0,30}") {
            if let Ok(s) = rouge_scores(&r, &c) {
                for v in [s.r1_recall, s.r2_recall, s.rl_recall, s.r12_avg] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
                prop_assert!(s.rl_recall <= s.r1_recall + 1e-12);
            }
        }
    }
}
