//! Persistence for the added-line database: one JSON object per line,
//! UTF-8, LF-terminated, keys exactly `{"rev","file","line","text"}` in that
//! order. The file is the contract between the `extract` and `evaluate`
//! pipeline stages, byte-deterministic for a given database.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use thiserror::Error;

use crate::diff::AddedLine;

#[derive(Debug, Error)]
pub enum DbError {
    #[error("io-error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse-error at line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// The added-line database: records ordered by (revision, file, line_no).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AddedLineDb {
    records: Vec<AddedLine>,
}

impl AddedLineDb {
    /// Builds a database, sorting records into canonical order if needed.
    pub fn new(mut records: Vec<AddedLine>) -> Self {
        records.sort_by(|a, b| {
            (a.revision, &a.file, a.line_no).cmp(&(b.revision, &b.file, b.line_no))
        });
        AddedLineDb { records }
    }

    pub fn records(&self) -> &[AddedLine] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn max_revision(&self) -> Option<usize> {
        self.records.iter().map(|r| r.revision).max()
    }

    /// Records added at exactly `revision`.
    pub fn for_revision(&self, revision: usize) -> &[AddedLine] {
        let start = self.records.partition_point(|r| r.revision < revision);
        let end = self.records.partition_point(|r| r.revision <= revision);
        &self.records[start..end]
    }
}

/// Per-revision added-line counts plus the grand total.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DbStats {
    pub per_revision: BTreeMap<usize, usize>,
    pub total: usize,
}

pub fn db_stats(db: &AddedLineDb) -> DbStats {
    let mut per_revision: BTreeMap<usize, usize> = BTreeMap::new();
    for record in db.records() {
        *per_revision.entry(record.revision).or_insert(0) += 1;
    }
    DbStats {
        per_revision,
        total: db.len(),
    }
}

/// Serializes one record to its canonical JSON line (no trailing newline).
pub fn record_to_json(record: &AddedLine) -> String {
    serde_json::to_string(record).expect("added-line records always serialize")
}

/// Writes the database as JSONL. Byte-deterministic: fixed key order, no
/// extra whitespace, one LF after every record.
pub fn write_db(db: &AddedLineDb, path: &Path) -> Result<(), DbError> {
    let mut out = Vec::with_capacity(db.len() * 64);
    for record in db.records() {
        out.extend_from_slice(record_to_json(record).as_bytes());
        out.push(b'\n');
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

/// Result of reading a database file; `warnings` reports recoverable issues
/// such as out-of-order records (which are re-sorted).
#[derive(Debug, Clone)]
pub struct DbRead {
    pub db: AddedLineDb,
    pub warnings: Vec<String>,
}

/// Reads a JSONL database written by [`write_db`]. Malformed lines fail
/// with their line number; out-of-order records are reordered with a
/// warning.
pub fn read_db(path: &Path) -> Result<DbRead, DbError> {
    let text = fs::read_to_string(path)?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let record: AddedLine =
            serde_json::from_str(line).map_err(|e| DbError::Parse {
                line: idx + 1,
                reason: e.to_string(),
            })?;
        records.push(record);
    }
    let mut warnings = Vec::new();
    let in_order = records.windows(2).all(|pair| {
        (pair[0].revision, &pair[0].file, pair[0].line_no)
            <= (pair[1].revision, &pair[1].file, pair[1].line_no)
    });
    if !in_order {
        warnings.push("records were out of order and have been re-sorted".to_string());
    }
    Ok(DbRead {
        db: AddedLineDb::new(records),
        warnings,
    })
}
