use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use axum::Router;
use corwa_cli::server::{router, ANNOTATOR_HEADER};
use corwa_core::annotation::{fallback_labels, AnnotationService, Pretagger};
use corwa_core::corpus::{CitationMark, Paragraph, RelatedWorkSection};
use corwa_core::schema::{CitationSpan, CitationType, DiscourseLabel, LabeledParagraph};
use corwa_core::text::TextRange;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

const TEXT: &str = "Lee et al. (2019) builds parsers with graphs. They are fast. It is used by (Kim, 2020) for tagging.";

fn mark(start: usize, end: usize, key: &str) -> CitationMark {
    CitationMark {
        start,
        end,
        bib_key: key.into(),
        cited_paper_id: None,
    }
}

fn paragraph() -> Paragraph {
    Paragraph::from_text(TEXT, vec![mark(0, 17, "b0"), mark(75, 86, "b1")])
}

fn sections() -> Vec<RelatedWorkSection> {
    let plain = Paragraph::from_text("Parsing is old. It is still studied.", vec![]);
    vec![
        RelatedWorkSection {
            paper_id: "A".into(),
            year: Some(2020),
            title: "Related Work".into(),
            paragraphs: vec![paragraph(), plain],
        },
        RelatedWorkSection {
            paper_id: "B".into(),
            year: Some(2018),
            title: "Related Work".into(),
            paragraphs: vec![paragraph()],
        },
    ]
}

/// Labels every sentence `single_summ` and adds one dominant span over the
/// first sentence when it holds a mark.
struct Stub;

impl Pretagger for Stub {
    fn pretag(&self, p: &Paragraph) -> Result<LabeledParagraph, String> {
        let mut lp = fallback_labels(p);
        lp.sentence_labels = vec![DiscourseLabel::SingleSumm; p.sentences.len()];
        if p.citation_marks.first().is_some_and(|m| m.start == 0) {
            let toks = &p.tokens[p.sentence_token_ranges()[0].clone()];
            let range = TextRange::new(toks[0].start, toks[toks.len() - 1].end);
            lp.spans.push(CitationSpan::with_marks(p, range, |_| false));
        }
        Ok(lp)
    }
}

fn app() -> (Arc<AnnotationService>, Router) {
    let svc = Arc::new(AnnotationService::in_memory(sections()));
    (svc.clone(), router(svc))
}

async fn call(app: &Router, method: &str, uri: &str, who: Option<&str>, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if let Some(w) = who {
        req = req.header(ANNOTATOR_HEADER, w);
    }
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    (status, bytes)
}

async fn call_json(app: &Router, method: &str, uri: &str, who: Option<&str>, body: Option<Value>) -> (StatusCode, Value) {
    let (status, bytes) = call(app, method, uri, who, body).await;
    let v = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    (status, v)
}

async fn session(app: &Router, who: &str, ids: &[&str]) -> String {
    let (status, v) = call_json(app, "POST", "/sessions", Some(who), Some(json!({"section_ids": ids}))).await;
    assert_eq!(status, StatusCode::CREATED, "{v}");
    v["session_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn create_session_queues_paragraphs_in_order() {
    let (_, app) = app();
    let (status, v) = call_json(&app, "POST", "/sessions", Some("ann1"), Some(json!({"section_ids": ["A", "B", "A"]}))).await;
    assert_eq!(status, StatusCode::CREATED);
    let items = v["items"].as_array().unwrap();
    assert_eq!(items.len(), 3);
    assert_eq!(items[0]["section_id"], "A");
    assert_eq!(items[1]["paragraph_index"], 1);
    assert_eq!(items[2]["section_id"], "B");
    assert!(items.iter().all(|i| i["status"] == "pending"));

    let (status, _) = call_json(&app, "POST", "/sessions", Some("ann1"), Some(json!({"section_ids": []}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    let (status, v) = call_json(&app, "POST", "/sessions", Some("ann1"), Some(json!({"section_ids": ["Z"]}))).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["error"], "unknown_section");
}

#[tokio::test]
async fn annotator_header_is_required_and_enforced() {
    let (_, app) = app();
    let (status, v) = call_json(&app, "POST", "/sessions", None, Some(json!({"section_ids": ["A"]}))).await;
    assert_eq!(status, StatusCode::UNAUTHORIZED);
    assert_eq!(v["error"], "missing_annotator");

    let id = session(&app, "ann1", &["A"]).await;
    let (status, _) = call_json(&app, "GET", &format!("/sessions/{id}/items/0"), Some("ann2"), None).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = call_json(&app, "GET", &format!("/sessions/{id}"), Some("ann2"), None).await;
    assert_eq!(status, StatusCode::FORBIDDEN);
    let (status, _) = call_json(&app, "GET", "/sessions/nope/next", Some("ann1"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call_json(&app, "GET", &format!("/sessions/{id}/items/9"), Some("ann1"), None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = call(&app, "GET", "/health", None, None).await;
    assert_eq!(status, StatusCode::OK);
}

#[tokio::test]
async fn fetch_without_model_returns_editable_fallback() {
    let (_, app) = app();
    let id = session(&app, "ann1", &["A"]).await;
    let (status, v) = call_json(&app, "GET", &format!("/sessions/{id}/items/0"), Some("ann1"), None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["model_available"], false);
    assert_eq!(v["base_version"], 0);
    assert_eq!(v["paragraph"]["text"], TEXT);
    assert_eq!(v["paragraph"]["spans"].as_array().unwrap().len(), 0);
    assert!(v["paragraph"]["sentence_labels"].as_array().unwrap().iter().all(|l| l == "transition"));
}

#[tokio::test]
async fn refetch_is_cached_and_model_swap_retags() {
    let (svc, app) = app();
    let id = session(&app, "ann1", &["A"]).await;
    let uri = format!("/sessions/{id}/items/0");
    let (_, first) = call(&app, "GET", &uri, Some("ann1"), None).await;
    let (_, again) = call(&app, "GET", &uri, Some("ann1"), None).await;
    assert_eq!(first, again);

    svc.set_model(Some(Arc::new(Stub)));
    let (_, v) = call_json(&app, "GET", &uri, Some("ann1"), None).await;
    assert_eq!(v["model_available"], true);
    let before: Value = serde_json::from_slice(&first).unwrap();
    assert!(v["model_version"].as_u64().unwrap() > before["model_version"].as_u64().unwrap_or(0));
    assert_eq!(v["paragraph"]["spans"].as_array().unwrap().len(), 1);
    assert!(v["paragraph"]["sentence_labels"].as_array().unwrap().iter().all(|l| l == "single_summ"));
}

#[tokio::test]
async fn untouched_submit_round_trips_and_versions_increase() {
    let (svc, app) = app();
    svc.set_model(Some(Arc::new(Stub)));
    let id = session(&app, "ann1", &["A"]).await;
    let uri = format!("/sessions/{id}/items/0");
    let (_, fetched) = call_json(&app, "GET", &uri, Some("ann1"), None).await;
    let paragraph = fetched["paragraph"].clone();

    let (status, rec) = call_json(&app, "PUT", &uri, Some("ann1"), Some(json!({"base_version": 0, "paragraph": paragraph}))).await;
    assert_eq!(status, StatusCode::OK, "{rec}");
    assert_eq!(rec["version"], 1);
    assert_eq!(serde_json::to_vec(&rec["corrected"]).unwrap(), serde_json::to_vec(&paragraph).unwrap());

    let (status, v) = call_json(&app, "PUT", &uri, Some("ann1"), Some(json!({"base_version": 0, "paragraph": paragraph}))).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["based_on"], 0);
    assert_eq!(v["current"], 1);

    let (_, refetched) = call_json(&app, "GET", &uri, Some("ann1"), None).await;
    assert_eq!(refetched["base_version"], 1);
    assert_eq!(refetched["status"], "corrected");
    let (status, rec) = call_json(&app, "PUT", &uri, Some("ann1"), Some(json!({"base_version": 1, "paragraph": paragraph}))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(rec["version"], 2);

    let (_, next) = call_json(&app, "GET", &format!("/sessions/{id}/next"), Some("ann1"), None).await;
    assert_eq!(next["item"], 1);
}

#[tokio::test]
async fn invalid_corrections_are_rejected_with_violations() {
    let (_, app) = app();
    let id = session(&app, "ann1", &["A"]).await;
    let uri = format!("/sessions/{id}/items/0");
    let (_, fetched) = call_json(&app, "GET", &uri, Some("ann1"), None).await;
    let mut lp: LabeledParagraph = serde_json::from_value(fetched["paragraph"].clone()).unwrap();
    let p = lp.paragraph.clone();
    // A reference span running from the second sentence into the third.
    let range = TextRange::new(p.tokens[p.sentence_token_ranges()[1].start].start, 98);
    let span = CitationSpan::with_marks(&p, range, |_| true);
    assert_eq!(span.span_type, CitationType::Reference);
    lp.spans.push(span);

    let (status, v) = call_json(&app, "PUT", &uri, Some("ann1"), Some(json!({"base_version": 0, "paragraph": lp}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "invalid");
    assert!(!v["violations"].as_array().unwrap().is_empty());

    let mut changed = fetched["paragraph"].clone();
    changed["text"] = json!("Something else entirely.");
    let (status, v) = call_json(&app, "PUT", &uri, Some("ann1"), Some(json!({"base_version": 0, "paragraph": changed}))).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["error"], "paragraph_mismatch");

    let (status, _) = call(&app, "PUT", &uri, Some("ann1"), Some(json!({"paragraph": 3}))).await;
    assert!(status.is_client_error());
}

#[tokio::test]
async fn skip_moves_the_queue_forward() {
    let (_, app) = app();
    let id = session(&app, "ann1", &["A"]).await;
    let (status, _) = call(&app, "POST", &format!("/sessions/{id}/items/0/skip"), Some("ann1"), None).await;
    assert_eq!(status, StatusCode::NO_CONTENT);
    let (_, next) = call_json(&app, "GET", &format!("/sessions/{id}/next"), Some("ann1"), None).await;
    assert_eq!(next["item"], 1);
    call(&app, "POST", &format!("/sessions/{id}/items/1/skip"), Some("ann1"), None).await;
    let (_, next) = call_json(&app, "GET", &format!("/sessions/{id}/next"), Some("ann1"), None).await;
    assert_eq!(next["item"], Value::Null);
}

#[tokio::test]
async fn export_contains_corrections_verbatim_and_is_stable() {
    let (svc, app) = app();
    svc.set_model(Some(Arc::new(Stub)));
    let id = session(&app, "ann1", &["A", "B"]).await;
    let mut submitted = Vec::new();
    for item in [0, 2] {
        let uri = format!("/sessions/{id}/items/{item}");
        let (_, fetched) = call_json(&app, "GET", &uri, Some("ann1"), None).await;
        let (status, _) =
            call_json(&app, "PUT", &uri, Some("ann1"), Some(json!({"base_version": 0, "paragraph": fetched["paragraph"]}))).await;
        assert_eq!(status, StatusCode::OK);
        submitted.push(fetched["paragraph"].clone());
    }
    let (status, first) = call(&app, "GET", "/export", Some("ann1"), None).await;
    assert_eq!(status, StatusCode::OK);
    let (_, second) = call(&app, "GET", "/export", Some("ann1"), None).await;
    assert_eq!(first, second);

    let v: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(v["paragraphs"], 2);
    let exported: Vec<&Value> = v["sections"].as_array().unwrap().iter().flat_map(|s| s["paragraphs"].as_array().unwrap()).collect();
    for p in &submitted {
        assert!(exported.contains(&p));
    }

    let (_, v) = call_json(&app, "GET", "/export?section_ids=B", Some("ann1"), None).await;
    assert_eq!(v["paragraphs"], 1);
    let (_, v) = call_json(&app, "GET", "/export?annotator_id=ann9", Some("ann1"), None).await;
    assert_eq!(v["paragraphs"], 0);
    assert!(!v["warnings"].as_array().unwrap().is_empty());
}

#[tokio::test]
async fn paired_export_reports_agreement() {
    let (svc, app) = app();
    svc.set_model(Some(Arc::new(Stub)));
    for who in ["ann1", "ann2"] {
        let id = session(&app, who, &["A"]).await;
        let uri = format!("/sessions/{id}/items/0");
        let (_, fetched) = call_json(&app, "GET", &uri, Some(who), None).await;
        let base = fetched["base_version"].clone();
        let (status, v) =
            call_json(&app, "PUT", &uri, Some(who), Some(json!({"base_version": base, "paragraph": fetched["paragraph"]}))).await;
        assert_eq!(status, StatusCode::OK, "{v}");
    }
    let (status, v) = call_json(&app, "GET", "/export/paired?first=ann1&second=ann2", Some("ann1"), None).await;
    assert_eq!(status, StatusCode::OK, "{v}");
    assert_eq!(v["items"].as_array().unwrap().len(), 1);
    let d = &v["discourse"];
    assert_eq!(d[0], d[1]);
    let (status, _) = call_json(&app, "GET", "/export/paired?first=ann1&second=ann1", Some("ann1"), None).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
}
