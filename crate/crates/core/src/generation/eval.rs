//! Mark-stripped ROUGE scoring and blinded human-evaluation sheets.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{strip_citation_marks, GenError, GenerationExample};
use crate::metrics::{rouge_scores, RougeScore};
use crate::schema::CitationType;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub generated: String,
    pub gold: String,
    /// `None` when the gold is empty after mark removal; such records are
    /// left out of aggregates.
    pub rouge: Option<RougeScore>,
}

impl EvalRecord {
    pub fn excluded(&self) -> bool {
        self.rouge.is_none()
    }
}

/// ROUGE recall of `generated` against `gold` with citation marks removed
/// from both.
pub fn evaluate_generation(generated: &str, gold: &str) -> EvalRecord {
    let g = strip_citation_marks(gold);
    let c = strip_citation_marks(generated);
    EvalRecord {
        generated: generated.to_string(),
        gold: gold.to_string(),
        rouge: rouge_scores(&g, &c).ok(),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GenScoreSummary {
    pub scored: usize,
    pub excluded: usize,
    pub mean: Option<RougeScore>,
}

pub fn summarize<'a>(records: impl IntoIterator<Item = &'a EvalRecord>) -> GenScoreSummary {
    let mut s = GenScoreSummary::default();
    let mut acc = RougeScore::default();
    for r in records {
        match &r.rouge {
            Some(x) => {
                s.scored += 1;
                acc.r1_recall += x.r1_recall;
                acc.r2_recall += x.r2_recall;
                acc.rl_recall += x.rl_recall;
                acc.r12_avg += x.r12_avg;
            }
            None => s.excluded += 1,
        }
    }
    if s.scored > 0 {
        let n = s.scored as f64;
        s.mean = Some(RougeScore {
            r1_recall: acc.r1_recall / n,
            r2_recall: acc.r2_recall / n,
            rl_recall: acc.rl_recall / n,
            r12_avg: acc.r12_avg / n,
        });
    }
    s
}

/// A generated text keyed by example id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: String,
    pub text: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenScoreReport {
    pub overall: GenScoreSummary,
    pub by_type: BTreeMap<String, GenScoreSummary>,
    /// Gold examples without a prediction.
    pub missing: Vec<String>,
    /// Predictions whose id matches no gold example.
    pub unmatched: Vec<String>,
}

/// Scores predictions against gold examples, overall and per span type.
pub fn score_predictions(predictions: &[Prediction], gold: &[GenerationExample]) -> GenScoreReport {
    let by_id: HashMap<&str, &Prediction> = predictions.iter().map(|p| (p.id.as_str(), p)).collect();
    let mut records: Vec<(CitationType, EvalRecord)> = Vec::new();
    let mut missing = Vec::new();
    for ex in gold {
        match by_id.get(ex.id.as_str()) {
            Some(p) => records.push((ex.span_type, evaluate_generation(&p.text, &ex.gold_target))),
            None => missing.push(ex.id.clone()),
        }
    }
    let gold_ids: std::collections::HashSet<&str> = gold.iter().map(|e| e.id.as_str()).collect();
    let unmatched = predictions
        .iter()
        .filter(|p| !gold_ids.contains(p.id.as_str()))
        .map(|p| p.id.clone())
        .collect();
    let mut by_type = BTreeMap::new();
    for t in [CitationType::Dominant, CitationType::Reference] {
        by_type.insert(
            t.as_str().to_string(),
            summarize(records.iter().filter(|(k, _)| *k == t).map(|(_, r)| r)),
        );
    }
    GenScoreReport {
        overall: summarize(records.iter().map(|(_, r)| r)),
        by_type,
        missing,
        unmatched,
    }
}

pub const ASPECTS: [&str; 4] = ["fluency", "relevance", "coherence", "overall"];

/// One instance to rate: the gold span and the outputs of a span-level and
/// a sentence-level system for it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanEvalItem {
    pub id: String,
    pub span_type: CitationType,
    pub context: String,
    pub cited_titles: Vec<String>,
    pub gold: String,
    pub span_output: String,
    pub sentence_output: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Gold,
    Span,
    Sentence,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetCandidate {
    pub label: String,
    pub text: String,
}

/// What raters see. Carries no system identity.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SheetEntry {
    pub item: usize,
    pub context: String,
    pub cited_titles: Vec<String>,
    pub candidates: Vec<SheetCandidate>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEntry {
    pub item: usize,
    pub example_id: String,
    pub span_type: CitationType,
    pub systems: BTreeMap<String, System>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnswerKey {
    pub seed: u64,
    pub entries: Vec<KeyEntry>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HumanEvalSheets {
    pub aspects: Vec<String>,
    pub entries: Vec<SheetEntry>,
    pub key: AnswerKey,
}

/// Samples `n_per_type` items of each span type and shuffles items and
/// candidate order. The answer key maps candidate labels back to systems.
pub fn sample_human_eval(items: &[HumanEvalItem], n_per_type: usize, seed: u64) -> Result<HumanEvalSheets, GenError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for kind in [CitationType::Dominant, CitationType::Reference] {
        let mut pool: Vec<&HumanEvalItem> = items.iter().filter(|i| i.span_type == kind).collect();
        if pool.len() < n_per_type {
            return Err(GenError::InsufficientRecords {
                kind,
                need: n_per_type,
                have: pool.len(),
            });
        }
        pool.shuffle(&mut rng);
        chosen.extend(pool.into_iter().take(n_per_type));
    }
    chosen.shuffle(&mut rng);
    let mut entries = Vec::with_capacity(chosen.len());
    let mut key = Vec::with_capacity(chosen.len());
    for (n, item) in chosen.into_iter().enumerate() {
        let mut systems = [
            (System::Gold, &item.gold),
            (System::Span, &item.span_output),
            (System::Sentence, &item.sentence_output),
        ];
        systems.shuffle(&mut rng);
        let labels = ["A", "B", "C"];
        entries.push(SheetEntry {
            item: n + 1,
            context: item.context.clone(),
            cited_titles: item.cited_titles.clone(),
            candidates: systems
                .iter()
                .zip(labels)
                .map(|((_, text), label)| SheetCandidate {
                    label: label.into(),
                    text: (*text).clone(),
                })
                .collect(),
        });
        key.push(KeyEntry {
            item: n + 1,
            example_id: item.id.clone(),
            span_type: item.span_type,
            systems: systems.iter().zip(labels).map(|((s, _), l)| (l.to_string(), *s)).collect(),
        });
    }
    Ok(HumanEvalSheets {
        aspects: ASPECTS.iter().map(|s| s.to_string()).collect(),
        entries,
        key: AnswerKey { seed, entries: key },
    })
}

/// Writes `sheet.csv` (one row per candidate with empty 1-5 rating
/// columns), `sheet.json` and, separately, `answer_key.json`.
pub fn write_sheets(sheets: &HumanEvalSheets, dir: &Path) -> Result<(), GenError> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join("sheet.csv"))?;
    let mut header = vec!["item".to_string(), "candidate".into(), "context".into(), "cited".into(), "text".into()];
    header.extend(sheets.aspects.iter().cloned());
    w.write_record(&header)?;
    for e in &sheets.entries {
        for c in &e.candidates {
            let mut row = vec![
                e.item.to_string(),
                c.label.clone(),
                e.context.clone(),
                e.cited_titles.join(" | "),
                c.text.clone(),
            ];
            row.extend(sheets.aspects.iter().map(|_| String::new()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    let pretty = |r: serde_json::Result<String>| r.map_err(|source| GenError::Json { line: 0, source });
    let sheet = serde_json::json!({ "aspects": sheets.aspects, "entries": sheets.entries });
    fs::write(dir.join("sheet.json"), pretty(serde_json::to_string_pretty(&sheet))?)?;
    fs::write(dir.join("answer_key.json"), pretty(serde_json::to_string_pretty(&sheets.key))?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn identical_and_mark_only_differences_score_one() {
        for (g, c) in [
            ("builds fast parsers", "builds fast parsers"),
            ("Lee et al. (2019) builds fast parsers.", "builds fast parsers"),
            ("parsers (Lee, 2019) are fast [3].", "parsers (Kim and Park, 2021) are fast."),
        ] {
            let r = evaluate_generation(c, g).rouge.unwrap();
            assert!(close(r.r1_recall, 1.0) && close(r.r2_recall, 1.0) && close(r.rl_recall, 1.0), "{g} / {c}");
        }
    }

    #[test]
    fn hand_counted_fixture() {
        // Gold after stripping: "the model uses a graph" (5 tokens, 4 bigrams).
        // Candidate: "a model uses the graph".
        // Unigrams all match: 5/5. Bigrams: "model uses" only: 1/4.
        // LCS: "model uses graph" = 3 -> 3/5.
        let r = evaluate_generation("a model uses the graph (Kim, 2020)", "The model (Lee, 2019) uses a graph.")
            .rouge
            .unwrap();
        assert!(close(r.r1_recall, 1.0));
        assert!(close(r.r2_recall, 0.25));
        assert!(close(r.rl_recall, 0.6));
        assert!(close(r.r12_avg, 0.625));
    }

    #[test]
    fn mark_only_gold_is_excluded() {
        let recs = [evaluate_generation("x", "(Lee, 2019)"), evaluate_generation("a b", "a b")];
        assert!(recs[0].excluded());
        let s = summarize(&recs);
        assert_eq!((s.scored, s.excluded), (1, 1));
        assert!(close(s.mean.unwrap().r1_recall, 1.0));
    }

    fn items(n: usize) -> Vec<HumanEvalItem> {
        (0..n)
            .map(|i| HumanEvalItem {
                id: format!("x{i}"),
                span_type: if i % 2 == 0 { CitationType::Dominant } else { CitationType::Reference },
                context: format!("context {i}"),
                cited_titles: vec![format!("title {i}")],
                gold: format!("original text {i}"),
                span_output: format!("first output {i}"),
                sentence_output: format!("second output {i}"),
            })
            .collect()
    }

    #[test]
    fn sheets_sample_per_type_and_blind() {
        let sheets = sample_human_eval(&items(40), 15, 3).unwrap();
        assert_eq!(sheets.entries.len(), 30);
        assert_eq!(sheets.aspects, vec!["fluency", "relevance", "coherence", "overall"]);
        let dom = sheets.key.entries.iter().filter(|k| k.span_type == CitationType::Dominant).count();
        assert_eq!(dom, 15);
        let visible = serde_json::to_string(&sheets.entries).unwrap();
        for word in ["\"gold\"", "\"span\"", "\"sentence\"", "span_type", "example_id", "dominant", "reference"] {
            assert!(!visible.contains(word), "{word}");
        }
        for (e, k) in sheets.entries.iter().zip(&sheets.key.entries) {
            let item = items(40).into_iter().find(|i| i.id == k.example_id).unwrap();
            for c in &e.candidates {
                let want = match k.systems[&c.label] {
                    System::Gold => &item.gold,
                    System::Span => &item.span_output,
                    System::Sentence => &item.sentence_output,
                };
                assert_eq!(&c.text, want);
            }
        }
        assert_eq!(sheets, sample_human_eval(&items(40), 15, 3).unwrap());
        let dir = tempfile::tempdir().unwrap();
        write_sheets(&sheets, dir.path()).unwrap();
        let csv = fs::read_to_string(dir.path().join("sheet.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 90);
        assert!(!csv.contains("gold"));
        assert!(dir.path().join("answer_key.json").exists());
    }

    #[test]
    fn too_few_records() {
        assert!(matches!(
            sample_human_eval(&items(20), 15, 0),
            Err(GenError::InsufficientRecords { need: 15, have: 10, .. })
        ));
    }

    proptest! {
        #[test]
        fn rouge_fields_in_unit_interval(g in "[a-z ]{1,40}", c in "[a-z ]{0,40}") {
            if let Some(r) = evaluate_generation(&c, &g).rouge {
                for v in [r.r1_recall, r.r2_recall, r.rl_recall, r.r12_avg] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
        }
    }
}
