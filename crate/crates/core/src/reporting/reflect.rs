use serde::{Deserialize, Serialize};

use super::{complete, prompts, sections, Report, ReportError};
use crate::planning::prompts::STRUCTURED_TEMPERATURE;
use crate::planning::{json_object, LanguageModel, UserQuery};

pub const DEFAULT_MAX_ROUNDS: u32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReflectionVerdict {
    pub relevant: bool,
    pub issues: Vec<String>,
    pub revise: bool,
    /// 1 for the first reflection in a run, then one more per call.
    pub attempt: u32,
    /// Headings the critic wants rewritten; "Summary" names the summary.
    #[serde(default)]
    pub sections: Vec<String>,
}

#[derive(Deserialize)]
struct RawVerdict {
    relevant: bool,
    revise: bool,
    #[serde(default)]
    issues: Vec<String>,
    #[serde(default)]
    sections: Vec<String>,
}

fn parse_verdict(text: &str, attempt: u32) -> Option<ReflectionVerdict> {
    let raw: RawVerdict = serde_json::from_str(json_object(text)?).ok()?;
    let issues: Vec<String> = raw.issues.into_iter().map(|i| i.trim().to_string()).filter(|i| !i.is_empty()).collect();
    if raw.revise && issues.is_empty() {
        return None;
    }
    Some(ReflectionVerdict {
        relevant: raw.relevant,
        issues,
        revise: raw.revise,
        attempt,
        sections: raw.sections,
    })
}

/// Asks the model whether `report` answers the query. `attempt` numbers the call within the run.
///
/// An answer that is not a verdict, including one asking for revision without
/// naming an issue, is re-asked once.
pub fn reflect(
    report: &Report,
    query: &UserQuery,
    provider: &dyn LanguageModel,
    attempt: u32,
) -> Result<ReflectionVerdict, ReportError> {
    let text = report.render_text();
    let (system, user) = prompts::reflect(&query.original, attempt, &text);
    let first = provider.complete(&system, &user, STRUCTURED_TEMPERATURE)?;
    if let Some(v) = parse_verdict(&first, attempt) {
        return Ok(v);
    }
    let (system, user) = prompts::reflect_reask(&query.original, attempt, &text, first.trim());
    let second = provider.complete(&system, &user, STRUCTURED_TEMPERATURE)?;
    parse_verdict(&second, attempt).ok_or(ReportError::UnparseableVerdict { raw: second })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReviewOutcome {
    pub report: Report,
    /// Every verdict produced, oldest first.
    pub verdicts: Vec<ReflectionVerdict>,
    /// The budget ran out with issues left.
    pub exhausted: bool,
}

impl ReviewOutcome {
    pub fn final_verdict(&self) -> &ReflectionVerdict {
        self.verdicts.last().expect("at least one verdict")
    }
}

fn flagged(report: &Report, verdict: &ReflectionVerdict) -> Vec<String> {
    let mut out: Vec<String> = verdict
        .sections
        .iter()
        .filter(|h| h.as_str() == sections::SUMMARY || report.section(h).is_some())
        .cloned()
        .collect();
    out.dedup();
    if out.is_empty() {
        out.push(sections::SUMMARY.to_string());
    }
    out
}

/// Rewrites the parts `verdict` flags and reflects again, for at most `max_rounds` rounds.
pub fn revise(
    report: Report,
    verdict: &ReflectionVerdict,
    query: &UserQuery,
    provider: &dyn LanguageModel,
    max_rounds: u32,
) -> Result<ReviewOutcome, ReportError> {
    if !verdict.revise {
        return Err(ReportError::PreconditionViolation("verdict does not ask for revision".into()));
    }
    if max_rounds == 0 {
        return Err(ReportError::PreconditionViolation("max_rounds must be at least 1".into()));
    }
    let mut report = report;
    let mut current = verdict.clone();
    let mut verdicts = Vec::new();
    for round in 1..=max_rounds {
        for heading in flagged(&report, &current) {
            let (body, facts) = if heading == sections::SUMMARY {
                (report.summary.clone(), Vec::new())
            } else {
                let s = report.section(&heading).unwrap();
                (s.body.clone(), s.facts.clone())
            };
            let rewritten = complete(
                provider,
                prompts::revise(&prompts::RevisePrompt {
                    heading: &heading,
                    audience: report.audience,
                    original: &query.original,
                    round,
                    issues: &current.issues,
                    current: &body,
                    facts: &facts,
                }),
            )?;
            if heading == sections::SUMMARY {
                report.summary = rewritten;
            } else if let Some(s) = report.sections.iter_mut().find(|s| s.heading == heading) {
                s.body = rewritten;
            }
        }
        report.revision_count += 1;
        current = reflect(&report, query, provider, current.attempt + 1)?;
        verdicts.push(current.clone());
        if !current.revise {
            report.unresolved_issues.clear();
            return Ok(ReviewOutcome {
                report,
                verdicts,
                exhausted: false,
            });
        }
    }
    report.unresolved_issues = current.issues.clone();
    Err(ReportError::RevisionExhausted {
        report: Box::new(report),
        rounds: max_rounds,
        verdicts,
    })
}

/// Reflects once and revises if asked. Running out of rounds is not an error
/// here: the last report comes back tagged with its unresolved issues.
pub fn reflect_and_revise(
    report: Report,
    query: &UserQuery,
    provider: &dyn LanguageModel,
    max_rounds: u32,
) -> Result<ReviewOutcome, ReportError> {
    let first = reflect(&report, query, provider, 1)?;
    if !first.revise || max_rounds == 0 {
        let mut report = report;
        report.unresolved_issues = if first.revise { first.issues.clone() } else { Vec::new() };
        return Ok(ReviewOutcome {
            report,
            exhausted: first.revise,
            verdicts: vec![first],
        });
    }
    match revise(report, &first, query, provider, max_rounds) {
        Ok(mut outcome) => {
            outcome.verdicts.insert(0, first);
            Ok(outcome)
        }
        Err(ReportError::RevisionExhausted { report, mut verdicts, .. }) => {
            verdicts.insert(0, first);
            Ok(ReviewOutcome {
                report: *report,
                verdicts,
                exhausted: true,
            })
        }
        Err(e) => Err(e),
    }
}
