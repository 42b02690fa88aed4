//! Append-only JSONL interaction log.
//!
//! One [`InteractionRecord`] per line, fields in declaration order, so equal
//! records always produce equal bytes. Ordinals count lines from zero and
//! continue across reopen.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::EvalError;
use crate::model::InteractionRecord;

pub fn serialize_record(record: &InteractionRecord) -> String {
    serde_json::to_string(record).expect("records serialize")
}

pub fn parse_record(line: &str) -> Result<InteractionRecord, String> {
    let rec: InteractionRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    rec.validate().map_err(|e| e.to_string())?;
    Ok(rec)
}

/// Destination for finalized records.
pub trait RecordSink {
    /// Assigns the next ordinal, stores the record and returns the ordinal.
    fn append(&mut self, record: InteractionRecord) -> Result<u64, EvalError>;
}

impl RecordSink for Vec<InteractionRecord> {
    fn append(&mut self, mut record: InteractionRecord) -> Result<u64, EvalError> {
        let ordinal = self.len() as u64;
        record.ordinal = ordinal;
        self.push(record);
        Ok(ordinal)
    }
}

#[derive(Debug)]
pub struct InteractionLog {
    path: PathBuf,
    file: File,
    next_ordinal: u64,
}

impl InteractionLog {
    /// Opens or creates the log; existing lines are validated and counted.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, EvalError> {
        let path = path.as_ref().to_path_buf();
        let existing = if path.exists() { read_log(&path)?.len() as u64 } else { 0 };
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        Ok(Self {
            path,
            file,
            next_ordinal: existing,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn len(&self) -> u64 {
        self.next_ordinal
    }

    pub fn is_empty(&self) -> bool {
        self.next_ordinal == 0
    }
}

impl RecordSink for InteractionLog {
    fn append(&mut self, mut record: InteractionRecord) -> Result<u64, EvalError> {
        record
            .validate()
            .map_err(|e| EvalError::InvalidRecord(e.to_string()))?;
        record.ordinal = self.next_ordinal;
        let mut line = serialize_record(&record);
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| EvalError::Io(format!("{}: {e}", self.path.display())))?;
        self.next_ordinal += 1;
        Ok(record.ordinal)
    }
}

/// Reads every record; the first malformed line aborts with its 1-based number.
pub fn read_log(path: &Path) -> Result<Vec<InteractionRecord>, EvalError> {
    let file = File::open(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (n, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| EvalError::Io(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = parse_record(&line).map_err(|message| EvalError::Malformed {
            line: n + 1,
            message,
        })?;
        out.push(rec);
    }
    Ok(out)
}
