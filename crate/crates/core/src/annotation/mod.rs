//! Correction-based annotation: sessions over queued paragraphs, model
//! pre-tags, versioned corrections in an append-only log, and exports in the
//! labeled-data format.
//!
//! Concurrency is optimistic. Every paragraph carries the version of its
//! latest correction; a submission names the version it was based on and is
//! rejected when another correction landed in between.

mod store;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{segment_paragraph, Paragraph, RelatedWorkSection};
use crate::metrics::{cohens_kappa, MetricError};
use crate::schema::{
    dataset, to_bio, validate, CsTag, CtTag, DiscourseLabel, LabeledParagraph, LabeledSection, Violation,
};
use crate::tagger::TaggerModel;

pub use store::{Event, LOG_FILE};
use store::EventLog;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("no section ids given")]
    EmptySectionList,
    #[error("unknown section `{0}`")]
    UnknownSection(String),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("session {session} has no item {item}")]
    UnknownItem { session: String, item: usize },
    #[error("session {session} belongs to another annotator")]
    WrongAnnotator { session: String },
    #[error("submitted paragraph text or citation marks differ from the source paragraph")]
    ParagraphMismatch,
    #[error("correction fails validation: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("stale version: submission based on version {based_on}, current is {current}")]
    Conflict { based_on: u64, current: u64 },
    #[error("{0}: {1}")]
    Io(PathBuf, #[source] std::io::Error),
    #[error("{path}:{line}: {source}")]
    LogFormat {
        path: PathBuf,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("log replay: {0}")]
    Replay(String),
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// Anything that can pre-tag a paragraph.
pub trait Pretagger: Send + Sync {
    fn pretag(&self, paragraph: &Paragraph) -> Result<LabeledParagraph, String>;
}

impl Pretagger for TaggerModel {
    fn pretag(&self, paragraph: &Paragraph) -> Result<LabeledParagraph, String> {
        self.predict(paragraph).map_err(|e| e.to_string())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ItemRef {
    pub section_id: String,
    pub paragraph_index: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemStatus {
    Pending,
    Corrected,
    Skipped,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionItem {
    #[serde(flatten)]
    pub item: ItemRef,
    pub status: ItemStatus,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSession {
    pub session_id: String,
    pub annotator_id: String,
    pub items: Vec<SessionItem>,
    pub created_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    #[serde(flatten)]
    pub item: ItemRef,
    pub session_id: String,
    pub annotator_id: String,
    pub version: u64,
    pub timestamp_ms: u64,
    pub model_version: Option<u64>,
    pub base: LabeledParagraph,
    pub corrected: LabeledParagraph,
}

/// A pre-tagged item as served to an annotator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pretagged {
    pub session_id: String,
    pub item: usize,
    #[serde(flatten)]
    pub item_ref: ItemRef,
    pub status: ItemStatus,
    /// False when no model is loaded or it failed; labels are then the
    /// fallback (all `transition`, no spans).
    pub model_available: bool,
    pub model_version: Option<u64>,
    /// Version of the latest correction (0 if none); submit against it.
    pub base_version: u64,
    pub paragraph: LabeledParagraph,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportFilter {
    pub annotator_id: Option<String>,
    pub section_ids: Option<BTreeSet<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Export {
    pub sections: Vec<LabeledSection>,
    pub paragraphs: usize,
    pub warnings: Vec<String>,
}

impl Export {
    pub fn write(&self, dir: &Path) -> Result<(), AnnotationError> {
        dataset::save_labeled(dir, &self.sections).map_err(|e| AnnotationError::Io(dir.to_path_buf(), e))
    }
}

/// Token- and sentence-level labels of paragraphs corrected by both
/// annotators, aligned for agreement statistics.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairedExport {
    pub annotators: [String; 2],
    pub items: Vec<ItemRef>,
    pub discourse: [Vec<DiscourseLabel>; 2],
    pub citation_type: [Vec<CtTag>; 2],
    pub citation_span: [Vec<CsTag>; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Agreement {
    pub discourse: f64,
    pub citation_type: f64,
    pub citation_span: f64,
}

impl PairedExport {
    pub fn kappas(&self) -> Result<Agreement, MetricError> {
        Ok(Agreement {
            discourse: cohens_kappa(&self.discourse[0], &self.discourse[1])?,
            citation_type: cohens_kappa(&self.citation_type[0], &self.citation_type[1])?,
            citation_span: cohens_kappa(&self.citation_span[0], &self.citation_span[1])?,
        })
    }
}

struct State {
    log: EventLog,
    sessions: BTreeMap<String, AnnotationSession>,
    latest: BTreeMap<ItemRef, u64>,
    records: Vec<CorrectionRecord>,
}

impl State {
    fn apply(&mut self, event: Event) -> Result<(), AnnotationError> {
        match event {
            Event::SessionCreated(s) => {
                self.sessions.insert(s.session_id.clone(), s);
            }
            Event::Skipped { session_id, item } => {
                let s = self
                    .sessions
                    .get_mut(&session_id)
                    .ok_or_else(|| AnnotationError::Replay(format!("skip in unknown session {session_id}")))?;
                if let Some(it) = s.items.get_mut(item) {
                    it.status = ItemStatus::Skipped;
                }
            }
            Event::Correction(r) => {
                let current = self.latest.get(&r.item).copied().unwrap_or(0);
                if r.version != current + 1 {
                    return Err(AnnotationError::Replay(format!(
                        "{}/{}: version {} after {current}",
                        r.item.section_id, r.item.paragraph_index, r.version
                    )));
                }
                if let Some(s) = self.sessions.get_mut(&r.session_id) {
                    for it in s.items.iter_mut().filter(|it| it.item == r.item) {
                        it.status = ItemStatus::Corrected;
                    }
                }
                self.latest.insert(r.item.clone(), r.version);
                self.records.push(*r);
            }
        }
        Ok(())
    }
}

struct ModelSlot {
    version: u64,
    model: Option<Arc<dyn Pretagger>>,
}

pub struct AnnotationService {
    sections: BTreeMap<String, RelatedWorkSection>,
    model: RwLock<ModelSlot>,
    cache: Mutex<HashMap<(ItemRef, u64), LabeledParagraph>>,
    state: Mutex<State>,
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64)
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

/// All-`transition` labels and no spans.
pub fn fallback_labels(paragraph: &Paragraph) -> LabeledParagraph {
    LabeledParagraph {
        paragraph: paragraph.clone(),
        sentence_labels: vec![DiscourseLabel::Transition; paragraph.sentences.len()],
        spans: Vec::new(),
    }
}

impl AnnotationService {
    /// A service whose log lives only in memory.
    pub fn in_memory(sections: Vec<RelatedWorkSection>) -> AnnotationService {
        AnnotationService::build(sections, EventLog::Memory)
    }

    /// A service backed by `dir/events.jsonl`, replaying existing events.
    pub fn open(sections: Vec<RelatedWorkSection>, dir: &Path) -> Result<AnnotationService, AnnotationError> {
        let (log, events) = EventLog::open(dir)?;
        let svc = AnnotationService::build(sections, log);
        {
            let mut st = lock(&svc.state);
            for e in events {
                st.apply(e)?;
            }
        }
        Ok(svc)
    }

    fn build(sections: Vec<RelatedWorkSection>, log: EventLog) -> AnnotationService {
        let sections = sections
            .into_iter()
            .map(|mut s| {
                for p in &mut s.paragraphs {
                    if p.tokens.is_empty() || p.sentences.is_empty() {
                        segment_paragraph(p);
                    }
                }
                (s.paper_id.clone(), s)
            })
            .collect();
        AnnotationService {
            sections,
            model: RwLock::new(ModelSlot {
                version: 0,
                model: None,
            }),
            cache: Mutex::new(HashMap::new()),
            state: Mutex::new(State {
                log,
                sessions: BTreeMap::new(),
                latest: BTreeMap::new(),
                records: Vec::new(),
            }),
        }
    }

    /// Installs (or removes) the pre-tagging model; bumps the model version.
    pub fn set_model(&self, model: Option<Arc<dyn Pretagger>>) -> u64 {
        let mut slot = self.model.write().unwrap_or_else(|e| e.into_inner());
        slot.version += 1;
        slot.model = model;
        slot.version
    }

    pub fn section_ids(&self) -> Vec<String> {
        self.sections.keys().cloned().collect()
    }

    pub fn source_paragraph(&self, item: &ItemRef) -> Option<&Paragraph> {
        self.sections.get(&item.section_id)?.paragraphs.get(item.paragraph_index)
    }

    pub fn create_session(
        &self,
        annotator_id: &str,
        section_ids: &[String],
    ) -> Result<AnnotationSession, AnnotationError> {
        if section_ids.is_empty() {
            return Err(AnnotationError::EmptySectionList);
        }
        let mut seen = BTreeSet::new();
        let mut items = Vec::new();
        for id in section_ids {
            if !seen.insert(id) {
                warn!("session for {annotator_id}: duplicate section id {id} ignored");
                continue;
            }
            let section = self
                .sections
                .get(id)
                .ok_or_else(|| AnnotationError::UnknownSection(id.clone()))?;
            items.extend((0..section.paragraphs.len()).map(|i| SessionItem {
                item: ItemRef {
                    section_id: id.clone(),
                    paragraph_index: i,
                },
                status: ItemStatus::Pending,
            }));
        }
        let mut st = lock(&self.state);
        let session = AnnotationSession {
            session_id: format!("s{}", st.sessions.len() + 1),
            annotator_id: annotator_id.to_string(),
            items,
            created_ms: now_ms(),
        };
        let event = Event::SessionCreated(session.clone());
        st.log.append(&event)?;
        st.apply(event)?;
        Ok(session)
    }

    pub fn session(&self, session_id: &str) -> Result<AnnotationSession, AnnotationError> {
        lock(&self.state)
            .sessions
            .get(session_id)
            .cloned()
            .ok_or_else(|| AnnotationError::UnknownSession(session_id.to_string()))
    }

    fn owned_session(&self, session_id: &str, annotator_id: &str) -> Result<AnnotationSession, AnnotationError> {
        let s = self.session(session_id)?;
        if s.annotator_id != annotator_id {
            return Err(AnnotationError::WrongAnnotator {
                session: session_id.to_string(),
            });
        }
        Ok(s)
    }

    fn owned_item(&self, session_id: &str, annotator_id: &str, item: usize) -> Result<SessionItem, AnnotationError> {
        let s = self.owned_session(session_id, annotator_id)?;
        s.items.get(item).cloned().ok_or_else(|| AnnotationError::UnknownItem {
            session: session_id.to_string(),
            item,
        })
    }

    /// Index of the first pending item.
    pub fn next_item(&self, session_id: &str, annotator_id: &str) -> Result<Option<usize>, AnnotationError> {
        let s = self.owned_session(session_id, annotator_id)?;
        Ok(s.items.iter().position(|it| it.status == ItemStatus::Pending))
    }

    pub fn skip_item(&self, session_id: &str, annotator_id: &str, item: usize) -> Result<(), AnnotationError> {
        self.owned_item(session_id, annotator_id, item)?;
        let mut st = lock(&self.state);
        let event = Event::Skipped {
            session_id: session_id.to_string(),
            item,
        };
        st.log.append(&event)?;
        st.apply(event)
    }

    /// The current model's labels for an item (cached per model version),
    /// or the fallback when no model is usable.
    fn pretag(&self, item: &ItemRef) -> Result<(LabeledParagraph, bool, Option<u64>), AnnotationError> {
        let paragraph = self
            .source_paragraph(item)
            .ok_or_else(|| AnnotationError::UnknownSection(item.section_id.clone()))?;
        let (version, model) = {
            let slot = self.model.read().unwrap_or_else(|e| e.into_inner());
            (slot.version, slot.model.clone())
        };
        let Some(model) = model else {
            return Ok((fallback_labels(paragraph), false, None));
        };
        let key = (item.clone(), version);
        if let Some(lp) = lock(&self.cache).get(&key) {
            return Ok((lp.clone(), true, Some(version)));
        }
        match model.pretag(paragraph) {
            Ok(lp) if validate(&lp).is_empty() && lp.paragraph == *paragraph => {
                lock(&self.cache).insert(key, lp.clone());
                Ok((lp, true, Some(version)))
            }
            Ok(_) => {
                warn!("{}/{}: model output rejected", item.section_id, item.paragraph_index);
                Ok((fallback_labels(paragraph), false, Some(version)))
            }
            Err(e) => {
                warn!("{}/{}: model failed: {e}", item.section_id, item.paragraph_index);
                Ok((fallback_labels(paragraph), false, Some(version)))
            }
        }
    }

    pub fn fetch_pretagged(&self, session_id: &str, annotator_id: &str, item: usize) -> Result<Pretagged, AnnotationError> {
        let it = self.owned_item(session_id, annotator_id, item)?;
        let (paragraph, model_available, model_version) = self.pretag(&it.item)?;
        let base_version = lock(&self.state).latest.get(&it.item).copied().unwrap_or(0);
        Ok(Pretagged {
            session_id: session_id.to_string(),
            item,
            item_ref: it.item,
            status: it.status,
            model_available,
            model_version,
            base_version,
            paragraph,
        })
    }

    /// Validates and persists a correction based on version `based_on`.
    pub fn submit_correction(
        &self,
        session_id: &str,
        annotator_id: &str,
        item: usize,
        corrected: LabeledParagraph,
        based_on: u64,
    ) -> Result<CorrectionRecord, AnnotationError> {
        let it = self.owned_item(session_id, annotator_id, item)?;
        let source = self
            .source_paragraph(&it.item)
            .ok_or_else(|| AnnotationError::UnknownSection(it.item.section_id.clone()))?;
        if corrected.paragraph.text != source.text || corrected.paragraph.citation_marks != source.citation_marks {
            return Err(AnnotationError::ParagraphMismatch);
        }
        let corrected = LabeledParagraph {
            paragraph: source.clone(),
            ..corrected
        };
        let violations = validate(&corrected);
        if !violations.is_empty() {
            return Err(AnnotationError::Invalid(violations));
        }
        let (base, _, model_version) = self.pretag(&it.item)?;
        let mut st = lock(&self.state);
        let current = st.latest.get(&it.item).copied().unwrap_or(0);
        if based_on != current {
            return Err(AnnotationError::Conflict { based_on, current });
        }
        let record = CorrectionRecord {
            item: it.item,
            session_id: session_id.to_string(),
            annotator_id: annotator_id.to_string(),
            version: current + 1,
            timestamp_ms: now_ms(),
            model_version,
            base,
            corrected,
        };
        let event = Event::Correction(Box::new(record.clone()));
        st.log.append(&event)?;
        st.apply(event)?;
        Ok(record)
    }

    /// Full correction history of one paragraph, oldest first.
    pub fn history(&self, item: &ItemRef) -> Vec<CorrectionRecord> {
        lock(&self.state).records.iter().filter(|r| &r.item == item).cloned().collect()
    }

    /// Latest matching correction per paragraph, grouped into sections in
    /// id order, paragraphs in index order.
    pub fn export_corrected(&self, filter: &ExportFilter) -> Export {
        let st = lock(&self.state);
        let mut latest: BTreeMap<&ItemRef, &CorrectionRecord> = BTreeMap::new();
        for r in &st.records {
            if filter.annotator_id.as_ref().is_some_and(|a| a != &r.annotator_id)
                || filter.section_ids.as_ref().is_some_and(|s| !s.contains(&r.item.section_id))
            {
                continue;
            }
            let slot = latest.entry(&r.item).or_insert(r);
            if r.version > slot.version {
                *slot = r;
            }
        }
        let mut warnings = Vec::new();
        let mut sections: BTreeMap<&str, LabeledSection> = BTreeMap::new();
        let mut paragraphs = 0;
        for (item, r) in latest {
            let violations = validate(&r.corrected);
            if !violations.is_empty() {
                warnings.push(format!(
                    "{}/{} version {} fails validation and was left out: {}",
                    item.section_id,
                    item.paragraph_index,
                    r.version,
                    join(&violations)
                ));
                continue;
            }
            paragraphs += 1;
            sections
                .entry(&item.section_id)
                .or_insert_with(|| LabeledSection {
                    paper_id: item.section_id.clone(),
                    year: self.sections.get(&item.section_id).and_then(|s| s.year),
                    paragraphs: Vec::new(),
                })
                .paragraphs
                .push(r.corrected.clone());
        }
        if paragraphs == 0 {
            warnings.push("no corrected paragraphs match the filter".into());
        }
        for w in &warnings {
            warn!("export: {w}");
        }
        Export {
            sections: sections.into_values().collect(),
            paragraphs,
            warnings,
        }
    }

    /// Paragraphs corrected by both annotators, each side at its latest
    /// version.
    pub fn paired_export(&self, first: &str, second: &str) -> Result<PairedExport, AnnotationError> {
        let a = self.export_map(first);
        let b = self.export_map(second);
        let mut out = PairedExport {
            annotators: [first.to_string(), second.to_string()],
            ..PairedExport::default()
        };
        for (item, x) in &a {
            let Some(y) = b.get(item) else { continue };
            let (tx, ty) = match (to_bio(x), to_bio(y)) {
                (Ok(tx), Ok(ty)) => (tx, ty),
                _ => continue,
            };
            out.items.push(item.clone());
            out.discourse[0].extend(&x.sentence_labels);
            out.discourse[1].extend(&y.sentence_labels);
            out.citation_type[0].extend(tx.ct_tags);
            out.citation_type[1].extend(ty.ct_tags);
            out.citation_span[0].extend(tx.cs_tags);
            out.citation_span[1].extend(ty.cs_tags);
        }
        Ok(out)
    }

    fn export_map(&self, annotator: &str) -> BTreeMap<ItemRef, LabeledParagraph> {
        let st = lock(&self.state);
        let mut m: BTreeMap<ItemRef, (u64, LabeledParagraph)> = BTreeMap::new();
        for r in st.records.iter().filter(|r| r.annotator_id == annotator) {
            if m.get(&r.item).is_none_or(|(v, _)| r.version > *v) {
                m.insert(r.item.clone(), (r.version, r.corrected.clone()));
            }
        }
        m.into_iter().map(|(k, (_, lp))| (k, lp)).collect()
    }
}
