//! Append-only JSON Lines event log, one per study.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use acbc_core::io::record_to_line;
use acbc_core::RespondentRecord;
use serde::{Deserialize, Serialize};

use crate::error::OpenError;
use crate::session::Event;

pub const EVENT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EventRecord {
    pub schema_version: u32,
    pub seq: u64,
    pub session_id: String,
    #[serde(flatten)]
    pub event: Event,
}

/// Parses one stored event and checks its schema version.
pub fn parse_event_line(line: &str) -> Result<EventRecord, String> {
    let ev: EventRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if ev.schema_version != EVENT_SCHEMA_VERSION {
        return Err(format!("unsupported event schemaVersion {}", ev.schema_version));
    }
    Ok(ev)
}

pub struct EventLog {
    path: PathBuf,
    file: File,
    next_seq: u64,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> OpenError + '_ {
    move |source| OpenError::Io {
        path: path.display().to_string(),
        source,
    }
}

impl EventLog {
    /// Opens or creates the log and returns every stored event. A final line
    /// without a newline that fails to parse is a torn write and is cut off;
    /// any other bad line is an error.
    pub fn open(path: &Path) -> Result<(EventLog, Vec<EventRecord>), OpenError> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(io_err(path))?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io_err(path))?;

        let mut events = Vec::new();
        let mut offset = 0usize;
        let mut good_len = 0usize;
        for (i, line) in text.split_inclusive('\n').enumerate() {
            let complete = line.ends_with('\n');
            offset += line.len();
            let body = line.trim_end();
            if body.is_empty() {
                good_len = offset;
                continue;
            }
            match parse_event_line(body) {
                Ok(ev) => {
                    let expected = events.len() as u64 + 1;
                    if ev.seq != expected {
                        return Err(OpenError::Corrupt {
                            path: path.display().to_string(),
                            line: i + 1,
                            message: format!("sequence number {} where {expected} was expected", ev.seq),
                        });
                    }
                    events.push(ev);
                    good_len = offset;
                    if !complete {
                        file.write_all(b"\n").map_err(io_err(path))?;
                        good_len += 1;
                    }
                }
                Err(_) if !complete => break,
                Err(e) => {
                    return Err(OpenError::Corrupt {
                        path: path.display().to_string(),
                        line: i + 1,
                        message: e,
                    })
                }
            }
        }
        if good_len < text.len() {
            file.set_len(good_len as u64).map_err(io_err(path))?;
            file.seek(SeekFrom::End(0)).map_err(io_err(path))?;
        }
        let next_seq = events.len() as u64 + 1;
        Ok((
            EventLog {
                path: path.to_path_buf(),
                file,
                next_seq,
            },
            events,
        ))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes and syncs one event, returning its sequence number.
    pub fn append(&mut self, session_id: &str, event: &Event) -> std::io::Result<u64> {
        let rec = EventRecord {
            schema_version: EVENT_SCHEMA_VERSION,
            seq: self.next_seq,
            session_id: session_id.to_string(),
            event: event.clone(),
        };
        let mut line = serde_json::to_string(&rec).map_err(std::io::Error::other)?;
        line.push('\n');
        self.file.write_all(line.as_bytes())?;
        self.file.sync_data()?;
        self.next_seq += 1;
        Ok(rec.seq)
    }
}

/// Rewrites the derived records file atomically.
pub fn write_records_file(path: &Path, records: &[RespondentRecord]) -> std::io::Result<()> {
    let tmp = path.with_extension("jsonl.tmp");
    let mut out = String::new();
    for r in records {
        out.push_str(&record_to_line(r));
        out.push('\n');
    }
    fs::write(&tmp, out)?;
    fs::rename(tmp, path)
}

pub fn append_record(path: &Path, record: &RespondentRecord) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    writeln!(f, "{}", record_to_line(record))?;
    f.sync_data()
}
