//! Append-only JSONL event log.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{AnnotationError, AnnotationSession, CorrectionRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionCreated(AnnotationSession),
    Correction(Box<CorrectionRecord>),
    Skipped { session_id: String, item: usize },
}

pub(super) enum EventLog {
    Memory,
    File { path: PathBuf, file: File },
}

pub const LOG_FILE: &str = "events.jsonl";

impl EventLog {
    /// Opens (creating if needed) `dir/events.jsonl` and returns the events
    /// already in it.
    pub(super) fn open(dir: &Path) -> Result<(EventLog, Vec<Event>), AnnotationError> {
        fs::create_dir_all(dir).map_err(|e| AnnotationError::Io(dir.to_path_buf(), e))?;
        let path = dir.join(LOG_FILE);
        let mut events = Vec::new();
        if path.exists() {
            let f = File::open(&path).map_err(|e| AnnotationError::Io(path.clone(), e))?;
            for (i, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| AnnotationError::Io(path.clone(), e))?;
                if line.trim().is_empty() {
                    continue;
                }
                events.push(serde_json::from_str(&line).map_err(|source| AnnotationError::LogFormat {
                    path: path.clone(),
                    line: i + 1,
                    source,
                })?);
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| AnnotationError::Io(path.clone(), e))?;
        Ok((EventLog::File { path, file }, events))
    }

    pub(super) fn append(&mut self, event: &Event) -> Result<(), AnnotationError> {
        match self {
            EventLog::Memory => Ok(()),
            EventLog::File { path, file } => {
                let mut line = serde_json::to_vec(event).map_err(|e| AnnotationError::Io(path.clone(), io::Error::other(e)))?;
                line.push(b'\n');
                file.write_all(&line)
                    .and_then(|_| file.flush())
                    .map_err(|e| AnnotationError::Io(path.clone(), e))
            }
        }
    }
}
