use std::collections::BTreeMap;

use log::debug;

use super::{BibEntry, RelatedWorkSection};

/// Resolves every mark's `bib_key` to a cited paper id. Dangling keys and
/// entries without an id leave the mark unresolved; nothing aborts.
pub fn link_citations(
    mut section: RelatedWorkSection,
    bibliography: &BTreeMap<String, BibEntry>,
) -> RelatedWorkSection {
    for m in section.paragraphs.iter_mut().flat_map(|p| p.citation_marks.iter_mut()) {
        m.cited_paper_id = bibliography.get(&m.bib_key).and_then(|e| e.cited_paper_id.clone());
        if m.cited_paper_id.is_none() {
            debug!("{}: unresolved citation {}", section.paper_id, m.bib_key);
        }
    }
    section
}

/// Orders sections by citation availability, highest first (ties by paper
/// id). Sections without any marks sort last.
pub fn prioritize(sections: &[RelatedWorkSection]) -> Vec<(String, Option<f64>)> {
    let mut out: Vec<(String, Option<f64>)> = sections
        .iter()
        .map(|s| (s.paper_id.clone(), s.availability()))
        .collect();
    out.sort_by(|a, b| {
        let av = a.1.unwrap_or(-1.0);
        let bv = b.1.unwrap_or(-1.0);
        bv.total_cmp(&av).then_with(|| a.0.cmp(&b.0))
    });
    out
}
