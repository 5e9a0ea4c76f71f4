use crate::planning::prompts::{system, REFLECT, REPORT, REVISE, SUMMARY};
use crate::planning::Expertise;

fn style(audience: Expertise) -> &'static str {
    match audience {
        Expertise::Novice => {
            "Write for a member of the public with no remote-sensing background. Avoid jargon, \
say what the numbers mean for swimming, drinking water and fishing, and keep it short."
        }
        Expertise::Practitioner => {
            "Write for a water-quality practitioner. Use standard terms, give values with units \
and point out anything that needs follow-up sampling."
        }
        Expertise::Expert => {
            "Write for a remote-sensing scientist. Be precise: name indices, scenes, methods and \
their limitations, and quote values at full precision."
        }
    }
}

pub struct SectionPrompt<'a> {
    pub heading: &'a str,
    pub audience: Expertise,
    pub original: &'a str,
    pub rewritten: &'a str,
    pub facts: &'a [String],
    pub context: &'a str,
}

fn facts_block(facts: &[String]) -> String {
    if facts.is_empty() {
        return "(none)\n".into();
    }
    facts.iter().map(|f| format!("- {f}\n")).collect()
}

pub fn section(p: &SectionPrompt<'_>) -> (String, String) {
    let mut body = format!(
        "You write one section of an inland water-quality report from the findings given.\n\
Audience: {}. {}\nUse only the findings; do not invent values. Answer with the section text only.",
        p.audience,
        style(p.audience)
    );
    if !p.context.is_empty() {
        body.push_str("\n\n");
        body.push_str(p.context);
    }
    (
        system(REPORT, &body),
        format!(
            "Section: {}\nAudience: {}\nOriginal query: {}\nTask: {}\nFindings:\n{}",
            p.heading,
            p.audience,
            p.original,
            p.rewritten,
            facts_block(p.facts)
        ),
    )
}

pub fn summary(audience: Expertise, original: &str, sections: &str) -> (String, String) {
    (
        system(
            SUMMARY,
            &format!(
                "Summarize the report in two or three sentences that answer the original query directly, \
naming the place and the period covered.\nAudience: {audience}. {}\nAnswer with the summary only.",
                style(audience)
            ),
        ),
        format!("Audience: {audience}\nOriginal query: {original}\nReport sections:\n{sections}"),
    )
}

const REFLECT_BODY: &str = r#"You review a generated report against the user's original query. Check that it answers the question asked, covers the requested place and period, and does not contradict its own findings. Answer with one JSON object and nothing else:
{"relevant": bool, "revise": bool, "issues": [string, ...], "sections": [heading, ...]}
List every problem in issues and the headings that must be rewritten in sections ("Summary" for the summary). Set revise to true only when issues is non-empty."#;

pub fn reflect(original: &str, round: u32, report_text: &str) -> (String, String) {
    (
        system(REFLECT, REFLECT_BODY),
        format!("Original query: {original}\nReflection round {round}\nReport:\n{report_text}"),
    )
}

pub fn reflect_reask(original: &str, round: u32, report_text: &str, previous: &str) -> (String, String) {
    (
        system(
            REFLECT,
            &format!("{REFLECT_BODY}\nYour previous answer was not a valid verdict. Answer again."),
        ),
        format!("Original query: {original}\nReflection round {round}\nPrevious answer: {previous}\nReport:\n{report_text}"),
    )
}

pub struct RevisePrompt<'a> {
    pub heading: &'a str,
    pub audience: Expertise,
    pub original: &'a str,
    pub round: u32,
    pub issues: &'a [String],
    pub current: &'a str,
    pub facts: &'a [String],
}

pub fn revise(p: &RevisePrompt<'_>) -> (String, String) {
    (
        system(
            REVISE,
            &format!(
                "Rewrite one part of a water-quality report so that it fixes the listed issues. \
Keep correct content.\nAudience: {}. {}\nAnswer with the rewritten text only.",
                p.audience,
                style(p.audience)
            ),
        ),
        format!(
            "Revision round {}\nSection: {}\nOriginal query: {}\nIssues:\n{}Current text:\n{}\nFindings:\n{}",
            p.round,
            p.heading,
            p.original,
            facts_block(p.issues),
            p.current,
            facts_block(p.facts)
        ),
    )
}
