use std::fmt::Write as _;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::{ReflectionVerdict, Report, ReportError};
use crate::clock::Clock;

/// Records included in the digest fed back into planning prompts.
pub const FEEDBACK_DIGEST_LEN: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeedbackRecord {
    pub run_id: String,
    pub query: String,
    pub verdict: ReflectionVerdict,
    pub sections: Vec<String>,
    pub timestamp: DateTime<Utc>,
}

/// Append-only JSON-lines log of negative reflection verdicts.
///
/// Appends go through one lock, and each record is written and flushed before
/// the lock is released, so the file is always a sequence of whole lines.
#[derive(Debug)]
pub struct FeedbackLog {
    path: Option<PathBuf>,
    records: Mutex<Vec<FeedbackRecord>>,
}

impl FeedbackLog {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            records: Mutex::new(Vec::new()),
        }
    }

    /// Opens (or starts) the log at `path`, loading existing records.
    pub fn open(path: &Path) -> Result<Self, ReportError> {
        let mut records = Vec::new();
        if path.exists() {
            let text = std::fs::read_to_string(path).map_err(|e| ReportError::StorageFailure(format!("{}: {e}", path.display())))?;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                records.push(
                    serde_json::from_str(line)
                        .map_err(|e| ReportError::StorageFailure(format!("{} line {}: {e}", path.display(), i + 1)))?,
                );
            }
        }
        Ok(Self {
            path: Some(path.to_path_buf()),
            records: Mutex::new(records),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn len(&self) -> usize {
        self.records.lock().unwrap().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn records(&self) -> Vec<FeedbackRecord> {
        self.records.lock().unwrap().clone()
    }

    /// Appends one record and returns the new length. A timestamp earlier than
    /// the last record's is raised to it, keeping the log ordered.
    pub fn append(&self, mut record: FeedbackRecord) -> Result<usize, ReportError> {
        let mut records = self.records.lock().unwrap();
        if let Some(last) = records.last() {
            record.timestamp = record.timestamp.max(last.timestamp);
        }
        if let Some(path) = &self.path {
            if let Some(dir) = path.parent() {
                std::fs::create_dir_all(dir).map_err(|e| ReportError::StorageFailure(e.to_string()))?;
            }
            let mut line = serde_json::to_string(&record).expect("record serializes");
            line.push('\n');
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)
                .map_err(|e| ReportError::StorageFailure(format!("{}: {e}", path.display())))?;
            f.write_all(line.as_bytes())
                .and_then(|_| f.flush())
                .map_err(|e| ReportError::StorageFailure(format!("{}: {e}", path.display())))?;
        }
        records.push(record);
        Ok(records.len())
    }

    /// Prompt block over the last `n` records, oldest first; empty when there are none.
    pub fn digest(&self, n: usize) -> String {
        let records = self.records.lock().unwrap();
        if records.is_empty() || n == 0 {
            return String::new();
        }
        let mut out = String::from("### Recent feedback\nEarlier reports had these problems; avoid repeating them.\n");
        for r in &records[records.len().saturating_sub(n)..] {
            let _ = write!(out, "- \"{}\": {}", r.query, r.verdict.issues.join("; "));
            if !r.verdict.relevant {
                out.push_str(" (judged not relevant)");
            }
            out.push('\n');
        }
        out
    }
}

/// Logs a verdict that found the report irrelevant or flagged issues.
pub fn record_feedback(
    verdict: &ReflectionVerdict,
    report: &Report,
    log: &FeedbackLog,
    clock: &dyn Clock,
) -> Result<usize, ReportError> {
    if verdict.relevant && verdict.issues.is_empty() {
        return Err(ReportError::PreconditionViolation(
            "only irrelevant verdicts or verdicts with issues are logged".into(),
        ));
    }
    log.append(FeedbackRecord {
        run_id: report.run_id.clone(),
        query: report.query.clone(),
        verdict: verdict.clone(),
        sections: verdict.sections.clone(),
        timestamp: clock.now(),
    })
}
