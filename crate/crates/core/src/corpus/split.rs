use std::collections::BTreeSet;

use log::warn;
use serde::{Deserialize, Serialize};

use super::RelatedWorkSection;

/// Year-based train/test partition of paper ids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub year_threshold: i32,
    pub train_ids: BTreeSet<String>,
    pub test_ids: BTreeSet<String>,
}

impl SplitManifest {
    pub fn is_test(&self, paper_id: &str) -> bool {
        self.test_ids.contains(paper_id)
    }
}

/// Papers published in `year_threshold` or later form the test set; the rest
/// (including papers with unknown year, with a warning) form the train set.
pub fn make_splits(sections: &[RelatedWorkSection], year_threshold: i32) -> SplitManifest {
    let mut train_ids = BTreeSet::new();
    let mut test_ids = BTreeSet::new();
    for s in sections {
        match s.year {
            Some(y) if y >= year_threshold => {
                test_ids.insert(s.paper_id.clone());
            }
            Some(_) => {
                train_ids.insert(s.paper_id.clone());
            }
            None => {
                warn!("{}: unknown year, assigned to train", s.paper_id);
                train_ids.insert(s.paper_id.clone());
            }
        }
    }
    if test_ids.is_empty() {
        warn!("no paper published in {year_threshold} or later: test set is empty");
    }
    SplitManifest {
        year_threshold,
        train_ids,
        test_ids,
    }
}
