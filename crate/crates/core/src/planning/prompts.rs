//! Prompt text for every provider-backed stage.
//!
//! Each system prompt opens with `[stage:NAME]` so scripted providers and
//! recorders can tell stages apart without parsing the rest.

use crate::workflow::ValidationReport;

pub const REWRITE: &str = "rewrite";
pub const EXTRACT: &str = "extract";
pub const PLAN: &str = "plan";
pub const REPAIR: &str = "repair";
pub const REPORT: &str = "report";
pub const SUMMARY: &str = "summary";
pub const REFLECT: &str = "reflect";
pub const REVISE: &str = "revise";

/// Decoding temperature for structured (JSON) answers.
pub const STRUCTURED_TEMPERATURE: f64 = 0.0;
/// Decoding temperature for report prose.
pub const PROSE_TEMPERATURE: f64 = 0.7;

pub fn system(stage: &str, body: &str) -> String {
    format!("[stage:{stage}]\n{}", body.trim_end())
}

pub fn rewrite(raw: &str) -> (String, String) {
    (
        system(
            REWRITE,
            "You rewrite questions about lakes and reservoirs into one precise inland-water \
monitoring task. Keep every place name, date and number from the question. Answer with the \
rewritten task only, on a single line.",
        ),
        raw.to_string(),
    )
}

const EXTRACT_BODY: &str = r#"Extract spatial and temporal parameters from the task. Answer with one JSON object and nothing else:
{"water_body_name": string|null, "lat_lon_polygon": [[lat, lon], ...]|null, "start_date": "YYYY-MM-DD"|null, "stop_date": "YYYY-MM-DD"|null, "expertise": "novice"|"practitioner"|"expert"|null}
Use null for anything the text does not state. Infer expertise from the phrasing."#;

pub fn extract(original: &str, rewritten: &str) -> (String, String) {
    (
        system(EXTRACT, EXTRACT_BODY),
        format!("Original query: {original}\nRewritten task: {rewritten}"),
    )
}

pub fn extract_reask(original: &str, rewritten: &str, previous: &str) -> (String, String) {
    (
        system(
            EXTRACT,
            &format!("{EXTRACT_BODY}\nYour previous answer was not valid JSON for this schema. Answer again."),
        ),
        format!("Original query: {original}\nRewritten task: {rewritten}\nPrevious answer: {previous}"),
    )
}

const PLAN_RULES: &str = r#"Build an execution plan as a JSON graph over the tools in the catalog. Answer with one JSON object and nothing else:
{"nodes": [{"id": string, "tool": string, "kind": "retrieval"|"transformation"|"report", "params": {...}, "fallback_for": string|null, "skip_if_cached": bool}], "edges": [["from", "to"], ...]}
Rules: exactly one node uses the terminal report tool and it has no outgoing edges; an edge from A to B means B needs an output of A; a parameter may reference an upstream output as "$nodeId.field"; a fallback node names the node it replaces in fallback_for and has no edges of its own; the graph must be acyclic."#;

pub struct PlanPromptInput<'a> {
    pub run_id: &'a str,
    pub original: &'a str,
    pub rewritten: &'a str,
    pub parameters: &'a str,
    pub catalog: &'a str,
    pub context: &'a str,
    pub feedback: &'a str,
}

pub fn plan(input: &PlanPromptInput<'_>) -> (String, String) {
    let mut body = format!("{PLAN_RULES}\n\nTool catalog:\n{}\n", input.catalog);
    if !input.context.is_empty() {
        body.push('\n');
        body.push_str(input.context);
    }
    if !input.feedback.is_empty() {
        body.push('\n');
        body.push_str(input.feedback);
    }
    (
        system(PLAN, &body),
        format!(
            "Task: {}\nOriginal query: {}\nParameters: {}\nRun id: {}",
            input.rewritten, input.original, input.parameters, input.run_id
        ),
    )
}

pub fn repair(
    catalog: &str,
    rewritten: &str,
    draft: &str,
    report: &ValidationReport,
    attempt: u32,
    max_attempts: u32,
) -> (String, String) {
    (
        system(
            REPAIR,
            &format!("{PLAN_RULES}\nA previous draft failed validation. Fix every listed violation.\n\nTool catalog:\n{catalog}\n"),
        ),
        format!(
            "Task: {rewritten}\nRepair attempt {attempt} of {max_attempts}\nPrevious draft:\n{draft}\nValidation errors:\n{}",
            report.describe()
        ),
    )
}
