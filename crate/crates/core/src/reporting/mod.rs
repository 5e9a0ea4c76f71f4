//! Final report synthesis, reflection and the feedback log.
//!
//! A [`Report`] has one section per thematic group of artifacts in the trace,
//! each listing the node ids it draws on, plus a caveats section when anything
//! failed or was substituted. [`reflect`] asks the model whether the report
//! answers the query; [`revise`] rewrites flagged parts until it does or the
//! round budget runs out.

mod feedback;
mod prompts;
mod reflect;
pub mod sections;

use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::clock::Clock;
use crate::executor::{ExecutionTrace, TraceStatus};
use crate::planning::prompts::PROSE_TEMPERATURE;
use crate::planning::{Expertise, LanguageModel, ProviderError, UserQuery};

pub use feedback::{record_feedback, FeedbackLog, FeedbackRecord, FEEDBACK_DIGEST_LEN};
pub use reflect::{reflect, reflect_and_revise, revise, ReflectionVerdict, ReviewOutcome, DEFAULT_MAX_ROUNDS};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Section {
    pub heading: String,
    pub body: String,
    /// Findings the body was written from, each tagged with its node and field.
    pub facts: Vec<String>,
    pub sources: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub run_id: String,
    pub query: String,
    pub task: String,
    pub audience: Expertise,
    pub sections: Vec<Section>,
    pub summary: String,
    pub generated_at: DateTime<Utc>,
    pub revision_count: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub unresolved_issues: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("trace has no results to report on")]
    EmptyTrace,
    #[error("trace status is {0:?}; only succeeded or partial runs are reported")]
    NotReportable(TraceStatus),
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("reflection verdict unparseable after re-ask: {raw}")]
    UnparseableVerdict { raw: String },
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
    #[error("issues remain after {rounds} revision round(s): {}", .report.unresolved_issues.join("; "))]
    RevisionExhausted { report: Box<Report>, rounds: u32, verdicts: Vec<ReflectionVerdict> },
    #[error("feedback log: {0}")]
    StorageFailure(String),
}

impl Report {
    pub fn section(&self, heading: &str) -> Option<&Section> {
        self.sections.iter().find(|s| s.heading == heading)
    }

    /// Every node id cited by any section.
    pub fn cited_nodes(&self) -> std::collections::BTreeSet<&str> {
        self.sections.iter().flat_map(|s| s.sources.iter().map(String::as_str)).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text rendering with the original query in the header.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# Water-quality report");
        let _ = writeln!(out, "Query: {}", self.query);
        let _ = writeln!(
            out,
            "Run: {} | Audience: {} | Generated: {} | Revisions: {}",
            self.run_id,
            self.audience,
            self.generated_at.to_rfc3339(),
            self.revision_count
        );
        let _ = write!(out, "\n## {}\n{}\n", sections::SUMMARY, self.summary.trim());
        for s in &self.sections {
            let _ = write!(out, "\n## {}\n{}\n", s.heading, s.body.trim());
            if !s.sources.is_empty() {
                let _ = writeln!(out, "Sources: {}", s.sources.join(", "));
            }
        }
        if !self.unresolved_issues.is_empty() {
            let _ = writeln!(out, "\n## Unresolved issues");
            for i in &self.unresolved_issues {
                let _ = writeln!(out, "- {i}");
            }
        }
        out
    }
}

fn complete(provider: &dyn LanguageModel, (system, user): (String, String)) -> Result<String, ProviderError> {
    let text = provider.complete(&system, &user, PROSE_TEMPERATURE)?;
    let text = text.trim();
    if text.is_empty() {
        return Err(ProviderError::EmptyCompletion);
    }
    Ok(text.to_string())
}

/// Builds the report for a finished run.
///
/// `context` is the report-stage retrieval block (may be empty). Section bodies
/// and the summary come from `provider`; the caveats section is composed
/// directly from the trace.
pub fn generate_report(
    trace: &ExecutionTrace,
    query: &UserQuery,
    context: &str,
    provider: &dyn LanguageModel,
    clock: &dyn Clock,
) -> Result<Report, ReportError> {
    if trace.status == TraceStatus::Failed {
        return Err(ReportError::NotReportable(trace.status));
    }
    if trace.entries.iter().all(|e| e.artifact.is_none()) {
        return Err(ReportError::EmptyTrace);
    }
    let mut out = Vec::new();
    for (heading, material) in sections::gather(trace) {
        if material.sources.is_empty() && heading != sections::OVERVIEW {
            continue;
        }
        let body = complete(
            provider,
            prompts::section(&prompts::SectionPrompt {
                heading,
                audience: query.expertise,
                original: &query.original,
                rewritten: &query.rewritten,
                facts: &material.facts,
                context,
            }),
        )?;
        out.push(Section {
            heading: heading.to_string(),
            body,
            facts: material.facts,
            sources: material.sources.into_iter().collect(),
        });
    }
    let caveats = sections::caveats(trace);
    if !caveats.facts.is_empty() {
        out.push(Section {
            heading: sections::CAVEATS.to_string(),
            body: caveats.facts.iter().map(|f| format!("- {f}")).collect::<Vec<_>>().join("\n"),
            facts: caveats.facts,
            sources: caveats.sources.into_iter().collect(),
        });
    }
    let summary = complete(
        provider,
        prompts::summary(query.expertise, &query.original, &section_digest(&out)),
    )?;
    Ok(Report {
        run_id: trace.run_id.clone(),
        query: query.original.clone(),
        task: query.rewritten.clone(),
        audience: query.expertise,
        sections: out,
        summary,
        generated_at: clock.now(),
        revision_count: 0,
        unresolved_issues: Vec::new(),
    })
}

fn section_digest(sections: &[Section]) -> String {
    let mut s = String::new();
    for sec in sections {
        let _ = writeln!(s, "[{}] {}", sec.heading, sec.body.replace('\n', " "));
    }
    s
}

#[cfg(test)]
mod tests;
