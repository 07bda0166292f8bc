use std::fs;
use std::io::Write;
use std::path::Path;

use clap::Parser;
use corwa_cli::{eval, genscore, run, Cli, Command};
use corwa_core::schema::dataset::{load_labeled, load_unlabeled};
use corwa_core::tagger::load_model;
use corwa_core::validate;
use serde_json::{json, Value};
use tempfile::TempDir;

fn corwa(args: &[&str]) {
    let cli = Cli::try_parse_from(std::iter::once("corwa").chain(args.iter().copied())).unwrap();
    run(cli).unwrap();
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL: &str = r#"{"model": {"encoder": {"encoder_name": "hash-subword", "max_tokens": 512, "dim": 8, "seed": 1},
  "hidden": 16, "value_dim": 8}, "train": {"epochs": 2, "decoder_lr": 0.003, "steps_per_update": 1,
  "encoder_lr": 1e-5, "dropout": 0.0, "batch_size": 1, "seed": 0}}"#;

#[test]
fn ingest_extracts_links_and_splits() {
    let tmp = TempDir::new().unwrap();
    let records = [
        json!({"paper_id": "p1", "title": "One", "year": 2017, "body_text": [
            {"section": "Introduction", "text": "We study parsing.", "cite_spans": []},
            {"section": "2 Related Work", "text": "Lee et al. (2019) parse graphs. Kim (2020) tags.",
             "cite_spans": [{"start": 0, "end": 17, "ref_id": "BIBREF0"}, {"start": 32, "end": 42, "ref_id": "BIBREF1"}]}],
         "bib_entries": {"BIBREF0": {"title": "Graphs", "link": "c1"}, "BIBREF1": {"title": "Tags", "link": null}}}),
        json!({"paper_id": "p2", "year": 2020, "body_text": [
            {"section": "Prior Work", "text": "Early systems [1] used rules.", "cite_spans": [{"start": 14, "end": 17, "ref_id": "BIBREF0"}]}],
         "bib_entries": {}}),
        json!({"paper_id": "p3", "year": 2021, "body_text": [{"section": "Method", "text": "Nothing here.", "cite_spans": []}]}),
    ];
    let input = tmp.path().join("records.jsonl");
    let mut f = fs::File::create(&input).unwrap();
    for r in &records {
        writeln!(f, "{r}").unwrap();
    }
    writeln!(f, "{{not json").unwrap();
    let out = tmp.path().join("out");
    corwa(&["ingest", "--input", &input.to_string_lossy(), "--year-split", "2019", "--out", &out.to_string_lossy()]);

    let sections = load_unlabeled(&out.join("sections")).unwrap();
    assert_eq!(sections.len(), 2);
    let s1 = sections.iter().find(|s| s.paper_id == "p1").unwrap();
    let para = &s1.paragraphs[0];
    assert_eq!(para.sentences.len(), 2);
    assert_eq!(para.citation_marks[0].cited_paper_id.as_deref(), Some("c1"));
    assert_eq!(para.citation_marks[1].cited_paper_id, None);
    let splits = read_json(&out.join("splits.json"));
    assert_eq!(splits["train_ids"], json!(["p1"]));
    assert_eq!(splits["test_ids"], json!(["p2"]));
    let priority = read_json(&out.join("priority.json"));
    assert_eq!(priority[0][0], "p1");
}

#[test]
fn train_tag_eval_and_distant_pipeline() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    corwa(&["synth", "--sections", "6", "--seed", "1", "--out", &p(t, "gold")]);
    corwa(&["synth", "--sections", "4", "--seed", "2", "--unlabeled", "--out", &p(t, "raw")]);
    fs::write(t.join("config.json"), SMALL).unwrap();

    corwa(&[
        "train", "--data", &p(t, "gold"), "--folds", "2", "--config", &p(t, "config.json"), "--heldout", &p(t, "gold"),
        "--out", &p(t, "model"),
    ]);
    assert!(load_model(&t.join("model")).is_ok());
    let cv = read_json(&t.join("model/cv.json"));
    assert_eq!(cv["folds"].as_array().unwrap().len(), 2);
    let log = fs::read_to_string(t.join("model/train_log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    let epoch: Value = serde_json::from_str(log.lines().last().unwrap()).unwrap();
    assert!(epoch["heldout"]["disc"]["f1"].is_number());

    corwa(&["tag", "--model", &p(t, "model"), "--input", &p(t, "raw"), "--out", &p(t, "tagged")]);
    let tagged = load_labeled(&t.join("tagged")).unwrap();
    assert_eq!(tagged.len(), 4);
    assert!(tagged.iter().flat_map(|s| &s.paragraphs).all(|lp| validate(lp).is_empty()));

    let Command::Eval(args) =
        Cli::try_parse_from(["corwa", "eval", "--pred", &p(t, "gold"), "--gold", &p(t, "gold"), "--task", "all"])
            .unwrap()
            .command
    else {
        unreachable!()
    };
    let mut out = Vec::new();
    eval(&args, &mut out).unwrap();
    let report: Value = serde_json::from_slice(&out).unwrap();
    for task in ["disc", "cs", "ct"] {
        assert_eq!(report["scores"][task]["f1"], 1.0, "{task}");
    }

    corwa(&[
        "distant", "--model", &p(t, "model"), "--gold", &p(t, "gold"), "--unlabeled", &p(t, "raw"), "--rounds", "1",
        "--out", &p(t, "distant"),
    ]);
    assert!(load_model(&t.join("distant/round_1")).is_ok());
    assert_eq!(load_labeled(&t.join("distant/round_1/silver")).unwrap().len(), 4);
}

#[test]
fn analyze_writes_json_and_csv() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    corwa(&["synth", "--sections", "30", "--seed", "3", "--out", &p(t, "gold")]);
    fs::write(
        t.join("cited.json"),
        serde_json::to_string(&json!({"P1": ["Graph parsers are fast."], "P2": ["Tagging with graphs."]})).unwrap(),
    )
    .unwrap();
    for report in ["cooccurrence", "spans", "style", "patterns", "retrieval", "ratio"] {
        let out = t.join(format!("{report}.json"));
        corwa(&[
            "analyze", "--data", &p(t, "gold"), "--report", report, "--out", &out.to_string_lossy(), "--cited-sentences",
            &p(t, "cited.json"),
        ]);
        assert!(read_json(&out).is_object(), "{report}");
        let csv = fs::read_to_string(out.with_extension("csv")).unwrap();
        assert!(csv.lines().count() >= 2, "{report}: {csv}");
    }
}

fn generation_records(t: &Path) {
    let mut f = fs::File::create(t.join("papers.jsonl")).unwrap();
    for i in 0..30 {
        let r = json!({"paper_id": format!("S{i}"), "title": format!("Target {i}"), "body_text": [
            {"section": "1 Introduction", "text": format!("Paper {i} studies citation text.")}]});
        writeln!(f, "{r}").unwrap();
    }
    for i in 0..40 {
        let r = json!({"paper_id": format!("P{i}"), "title": format!("Cited {i}"), "abstract": format!("Abstract of cited paper {i}.")});
        writeln!(f, "{r}").unwrap();
    }
}

#[test]
fn generation_commands() {
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    corwa(&["synth", "--sections", "30", "--seed", "4", "--out", &p(t, "gold")]);
    generation_records(t);
    for unit in ["span", "sentence"] {
        corwa(&[
            "genprep", "--data", &p(t, "gold"), "--intros", &p(t, "papers.jsonl"), "--unit", unit, "--max-words", "400",
            "--out", &p(t, &format!("{unit}.jsonl")),
        ]);
    }
    let lines: Vec<Value> = fs::read_to_string(t.join("span.jsonl"))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert!(!lines.is_empty());
    assert!(lines.iter().all(|l| l["input"].as_str().unwrap().contains("Paper ")));
    assert!(lines.iter().any(|l| l["input"].as_str().unwrap().contains("Abstract of cited paper")));

    corwa(&[
        "generate", "--examples", &p(t, "span.jsonl"), "--memorize", &p(t, "span.jsonl"), "--out", &p(t, "span_pred.jsonl"),
    ]);
    corwa(&[
        "generate", "--examples", &p(t, "span.jsonl"), "--memorize", &p(t, "sentence.jsonl"), "--out",
        &p(t, "sentence_pred.jsonl"),
    ]);
    let Command::Genscore(args) =
        Cli::try_parse_from(["corwa", "genscore", "--pred", &p(t, "span_pred.jsonl"), "--gold", &p(t, "span.jsonl")])
            .unwrap()
            .command
    else {
        unreachable!()
    };
    let mut out = Vec::new();
    genscore(&args, &mut out).unwrap();
    let report: Value = serde_json::from_slice(&out).unwrap();
    assert!(report["overall"]["scored"].as_u64().unwrap() > 0);
    assert!(report["overall"]["mean"]["r1_recall"].as_f64().unwrap() > 0.99, "{report}");
    assert_eq!(report["missing"], json!([]));

    corwa(&[
        "geneval-sheets", "--gold", &p(t, "span.jsonl"), "--span-pred", &p(t, "span_pred.jsonl"), "--sentence-pred",
        &p(t, "sentence_pred.jsonl"), "--n", "3", "--seed", "7", "--out", &p(t, "sheets"),
    ]);
    let sheet = fs::read_to_string(t.join("sheets/sheet.json")).unwrap();
    assert!(!sheet.contains("\"span\"") && !sheet.contains("gold"));
    let key = read_json(&t.join("sheets/answer_key.json"));
    assert_eq!(key["entries"].as_array().unwrap().len(), 6);
}

#[test]
fn bad_usage_is_reported() {
    assert!(Cli::try_parse_from(["corwa", "analyze", "--data", "x", "--report", "nope", "--out", "y"]).is_err());
    let tmp = TempDir::new().unwrap();
    let t = tmp.path();
    corwa(&["synth", "--sections", "2", "--out", &p(t, "gold")]);
    let cli = Cli::try_parse_from(["corwa", "analyze", "--data", &p(t, "gold"), "--report", "retrieval", "--out", &p(t, "r.json")])
        .unwrap();
    assert!(matches!(run(cli), Err(corwa_cli::CliError::Usage(_))));
    let cli = Cli::try_parse_from(["corwa", "tag", "--model", &p(t, "missing"), "--input", &p(t, "gold"), "--out", &p(t, "o")]).unwrap();
    assert!(run(cli).is_err());
}
