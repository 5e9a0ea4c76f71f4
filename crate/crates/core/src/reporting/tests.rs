use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::*;
use crate::clock::FixedClock;
use crate::executor::{Artifact, Attempt, AttemptOutcome, Provenance, Resolution, TraceEntry, TypedValue};
use crate::planning::{RecordingProvider, ScriptedProvider};

fn entry(node: &str, tool: &str, fields: &[(&str, &str, Value)]) -> TraceEntry {
    TraceEntry {
        node_id: node.into(),
        tool: tool.into(),
        attempts: vec![Attempt {
            attempt: 1,
            outcome: AttemptOutcome::Success,
            duration_ms: 0,
        }],
        artifact: Some(Artifact {
            producer: node.into(),
            fields: fields
                .iter()
                .map(|(n, t, v)| {
                    (
                        n.to_string(),
                        TypedValue {
                            semantic_type: t.to_string(),
                            value: v.clone(),
                        },
                    )
                })
                .collect::<BTreeMap<_, _>>(),
            provenance: Provenance::Live,
        }),
        resolution: Resolution::Executed,
        replaces: None,
        message: None,
    }
}

fn failed(node: &str, tool: &str, msg: &str) -> TraceEntry {
    TraceEntry {
        node_id: node.into(),
        tool: tool.into(),
        attempts: vec![Attempt {
            attempt: 1,
            outcome: AttemptOutcome::Failure { message: msg.into() },
            duration_ms: 0,
        }],
        artifact: None,
        resolution: Resolution::Failed,
        replaces: None,
        message: Some("retry budget of 1 exhausted".into()),
    }
}

fn trace(entries: Vec<TraceEntry>, status: TraceStatus) -> ExecutionTrace {
    let at = FixedClock::epoch().0;
    ExecutionTrace {
        run_id: "run-1".into(),
        entries,
        status,
        started_at: at,
        finished_at: at,
    }
}

fn weather_trace() -> ExecutionTrace {
    trace(
        vec![
            entry(
                "wx",
                "weather",
                &[(
                    "weather",
                    "weather-series",
                    json!({"location": {"lat": 38.5, "lon": 21.5}, "samples": [
                        {"date": "2024-07-01", "temperature_c": 25.0, "wind_speed_ms": 3.0, "precipitation_mm": 0.0},
                        {"date": "2024-07-02", "temperature_c": 27.0, "wind_speed_ms": 5.0, "precipitation_mm": 1.5}
                    ]}),
                )],
            ),
            entry("report", "report", &[("text", "report-text", json!("Data digest for Lake Trichonida"))]),
        ],
        TraceStatus::Succeeded,
    )
}

fn query(expertise: Expertise) -> UserQuery {
    UserQuery {
        id: "run-1".into(),
        original: "What was the weather at Lake Trichonida in early July 2024?".into(),
        rewritten: "Summarize weather for Lake Trichonida 2024-07-01 to 2024-07-02".into(),
        expertise,
    }
}

fn writer() -> ScriptedProvider {
    ScriptedProvider::new("scripted")
        .on("report", &[], "Generic section text.")
        .on("report", &["Section: Weather context"], "Warm and calm.")
        .on("report", &["Section: Weather context", "Audience: novice"], "It was warm with little wind.")
        .on("report", &["Section: Weather context", "Audience: expert"], "Mean 26.0 C, max wind 5.0 m/s.")
        .on("summary", &[], "Early July 2024 at Lake Trichonida was warm and calm.")
}

#[test]
fn weather_section_cites_weather_node_and_every_artifact_is_cited() {
    let t = weather_trace();
    let r = generate_report(&t, &query(Expertise::Practitioner), "", &writer(), &FixedClock::epoch()).unwrap();
    let headings: Vec<&str> = r.sections.iter().map(|s| s.heading.as_str()).collect();
    assert_eq!(headings, vec!["Overview", "Weather context"]);
    let wx = r.section("Weather context").unwrap();
    assert_eq!(wx.sources, vec!["wx".to_string()]);
    assert_eq!(wx.body, "Warm and calm.");
    assert!(wx.facts[0].contains("2 day(s) from 2024-07-01 to 2024-07-02"));
    let artifact_nodes: std::collections::BTreeSet<&str> =
        t.entries.iter().filter(|e| e.artifact.is_some()).map(|e| e.node_id.as_str()).collect();
    assert!(artifact_nodes.is_subset(&r.cited_nodes()));
    assert!(r.render_text().contains(&format!("Query: {}", query(Expertise::Practitioner).original)));
}

#[test]
fn partial_trace_gets_caveats_naming_failed_node() {
    let mut t = weather_trace();
    t.entries.insert(0, failed("bloom", "bloom-predict", "bloom service unavailable: down"));
    t.status = TraceStatus::Partial;
    let r = generate_report(&t, &query(Expertise::Practitioner), "", &writer(), &FixedClock::epoch()).unwrap();
    let c = r.section("Caveats").unwrap();
    assert_eq!(c.sources, vec!["bloom".to_string()]);
    assert!(c.body.contains("node `bloom` (bloom-predict) failed"));
}

#[test]
fn audience_changes_field_and_bodies() {
    let t = weather_trace();
    let novice = generate_report(&t, &query(Expertise::Novice), "", &writer(), &FixedClock::epoch()).unwrap();
    let expert = generate_report(&t, &query(Expertise::Expert), "", &writer(), &FixedClock::epoch()).unwrap();
    assert_eq!(novice.audience, Expertise::Novice);
    assert_eq!(expert.audience, Expertise::Expert);
    assert_ne!(
        novice.section("Weather context").unwrap().body,
        expert.section("Weather context").unwrap().body
    );
}

#[test]
fn failed_and_empty_traces_are_rejected() {
    let t = trace(vec![], TraceStatus::Failed);
    assert!(matches!(
        generate_report(&t, &query(Expertise::Novice), "", &writer(), &FixedClock::epoch()),
        Err(ReportError::NotReportable(_))
    ));
    let t = trace(vec![failed("a", "weather", "x")], TraceStatus::Partial);
    assert!(matches!(
        generate_report(&t, &query(Expertise::Novice), "", &writer(), &FixedClock::epoch()),
        Err(ReportError::EmptyTrace)
    ));
}

fn base_report() -> Report {
    generate_report(&weather_trace(), &query(Expertise::Practitioner), "", &writer(), &FixedClock::epoch()).unwrap()
}

const FLAG: &str = r#"{"relevant": false, "revise": true, "issues": ["window absent"], "sections": ["Summary"]}"#;
const CLEAR: &str = r#"{"relevant": true, "revise": false, "issues": []}"#;

#[test]
fn reflect_parses_flag_and_all_clear() {
    let p = ScriptedProvider::new("s").on("reflect", &[], FLAG);
    let v = reflect(&base_report(), &query(Expertise::Practitioner), &p, 1).unwrap();
    assert_eq!(
        v,
        ReflectionVerdict {
            relevant: false,
            issues: vec!["window absent".into()],
            revise: true,
            attempt: 1,
            sections: vec!["Summary".into()],
        }
    );
    let p = ScriptedProvider::new("s").on("reflect", &[], CLEAR);
    let v = reflect(&base_report(), &query(Expertise::Practitioner), &p, 3).unwrap();
    assert!(v.relevant && !v.revise && v.issues.is_empty());
    assert_eq!(v.attempt, 3);
}

#[test]
fn revise_without_issues_is_reasked_then_unparseable() {
    let p = RecordingProvider::new(ScriptedProvider::new("s").on("reflect", &[], r#"{"relevant": false, "revise": true, "issues": []}"#));
    let err = reflect(&base_report(), &query(Expertise::Practitioner), &p, 1).unwrap_err();
    assert!(matches!(err, ReportError::UnparseableVerdict { .. }));
    assert_eq!(p.calls_for_stage("reflect"), 2);
}

#[test]
fn one_flagged_section_fixed_in_one_round() {
    let p = RecordingProvider::new(
        ScriptedProvider::new("s")
            .on("reflect", &["Reflection round 2"], CLEAR)
            .on("revise", &["Section: Summary"], "Between 2024-07-01 and 2024-07-02 Lake Trichonida was warm."),
    );
    let first: ReflectionVerdict = ReflectionVerdict {
        relevant: false,
        issues: vec!["window absent".into()],
        revise: true,
        attempt: 1,
        sections: vec!["Summary".into()],
    };
    let before = base_report();
    let out = revise(before.clone(), &first, &query(Expertise::Practitioner), &p, 2).unwrap();
    assert_eq!(out.report.revision_count, 1);
    assert!(out.final_verdict().relevant);
    assert_eq!(out.final_verdict().attempt, 2);
    assert!(out.report.summary.contains("2024-07-01"));
    assert_eq!(out.report.sections, before.sections, "only the flagged part changes");
    assert_eq!(p.calls_for_stage("revise"), 1);
}

#[test]
fn never_satisfied_critic_exhausts_after_exactly_max_rounds() {
    let p = RecordingProvider::new(
        ScriptedProvider::new("s")
            .on("reflect", &[], FLAG)
            .on("revise", &[], "Still vague."),
    );
    let out = reflect_and_revise(base_report(), &query(Expertise::Practitioner), &p, 2).unwrap();
    assert!(out.exhausted);
    assert_eq!(out.report.revision_count, 2);
    assert_eq!(out.report.unresolved_issues, vec!["window absent".to_string()]);
    assert_eq!(p.calls_for_stage("revise"), 2);
    assert_eq!(p.calls_for_stage("reflect"), 3);
    let attempts: Vec<u32> = out.verdicts.iter().map(|v| v.attempt).collect();
    assert_eq!(attempts, vec![1, 2, 3]);

    let first = out.verdicts[0].clone();
    let err = revise(base_report(), &first, &query(Expertise::Practitioner), &p, 2).unwrap_err();
    assert!(matches!(err, ReportError::RevisionExhausted { rounds: 2, .. }));
}

#[test]
fn revise_requires_revise_verdict() {
    let v = ReflectionVerdict {
        relevant: true,
        issues: vec![],
        revise: false,
        attempt: 1,
        sections: vec![],
    };
    let p = ScriptedProvider::new("s");
    assert!(matches!(
        revise(base_report(), &v, &query(Expertise::Practitioner), &p, 2),
        Err(ReportError::PreconditionViolation(_))
    ));
}

#[test]
fn feedback_log_is_append_only_and_digest_lists_recent() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("feedback.jsonl");
    let log = FeedbackLog::open(&path).unwrap();
    let v = ReflectionVerdict {
        relevant: false,
        issues: vec!["window absent".into()],
        revise: true,
        attempt: 1,
        sections: vec!["Summary".into()],
    };
    let report = base_report();
    assert_eq!(record_feedback(&v, &report, &log, &FixedClock::epoch()).unwrap(), 1);
    let before = std::fs::read_to_string(&path).unwrap();
    assert_eq!(record_feedback(&v, &report, &log, &FixedClock::epoch()).unwrap(), 2);
    let after = std::fs::read_to_string(&path).unwrap();
    assert!(after.starts_with(&before));
    let reopened = FeedbackLog::open(&path).unwrap();
    assert_eq!(reopened.len(), 2);
    let ts: Vec<_> = reopened.records().iter().map(|r| r.timestamp).collect();
    assert!(ts.windows(2).all(|w| w[0] <= w[1]));
    let digest = reopened.digest(FEEDBACK_DIGEST_LEN);
    assert!(digest.starts_with("### Recent feedback\n"));
    assert_eq!(digest.matches("window absent").count(), 2);

    let clear = ReflectionVerdict {
        relevant: true,
        issues: vec![],
        revise: false,
        attempt: 1,
        sections: vec![],
    };
    assert!(record_feedback(&clear, &report, &log, &FixedClock::epoch()).is_err());
    assert_eq!(FeedbackLog::in_memory().digest(10), "");
}
