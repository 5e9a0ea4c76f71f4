use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use serde_json::json;

use super::*;
use crate::clock::FixedClock;
use crate::transport::RecordingTransport;
use crate::workflow::testkit::registry;
use crate::workflow::{prune, ArtifactCache, NodeKind, PlanGraph, PlanNode, ValidatedPlan};

fn aoi() -> Value {
    json!([[21.5, 38.5], [21.6, 38.5], [21.6, 38.6]])
}

fn window() -> Value {
    json!({"start": "2024-06-01", "stop": "2024-06-03"})
}

fn out(field: &str, v: Value) -> Result<ToolValues, ToolError> {
    Ok(ToolValues::from([(field.to_string(), v)]))
}

/// Handlers for the testkit registry. `weather` fails its first `weather_failures` calls.
fn handlers(weather_failures: u32, weather_calls: Arc<AtomicU32>) -> HandlerTable {
    let mut t = HandlerTable::new();
    t.insert("scene-search", |_: &ToolValues| out("scenes", json!(["S2A_1"])));
    t.insert("index", |_: &ToolValues| out("ndci", json!(0.1)));
    t.insert("chl", |i: &ToolValues| out("chl", json!(i["ndci"].as_f64().unwrap() * 100.0)));
    t.insert("weather", move |_: &ToolValues| {
        if weather_calls.fetch_add(1, Ordering::SeqCst) < weather_failures {
            Err(ToolError::Unavailable("weather down".into()))
        } else {
            out("weather", json!({"samples": []}))
        }
    });
    t.insert("climatology", |_: &ToolValues| out("series", json!({"normals": true})));
    t.insert("report", |i: &ToolValues| {
        let keys: Vec<&str> = i.keys().map(String::as_str).collect();
        out("text", json!(format!("report over {}", keys.join(","))))
    });
    t
}

fn full_plan(with_fallback: bool) -> ValidatedPlan {
    let mut g = PlanGraph::new("run-1")
        .with_node(
            PlanNode::new("search", "scene-search", NodeKind::Retrieval)
                .with_param("aoi", aoi())
                .with_param("window", window()),
        )
        .with_node(PlanNode::new("index", "index", NodeKind::Transformation).with_param("aoi", aoi()))
        .with_node(PlanNode::new("chl", "chl", NodeKind::Transformation))
        .with_node(
            PlanNode::new("w", "weather", NodeKind::Retrieval)
                .with_param("aoi", aoi())
                .with_param("window", window()),
        )
        .with_node(PlanNode::new("report", "report", NodeKind::Report))
        .with_edge("search", "index")
        .with_edge("index", "chl")
        .with_edge("chl", "report")
        .with_edge("w", "report");
    if with_fallback {
        g = g.with_node(
            PlanNode::new("clim", "climatology", NodeKind::Retrieval)
                .with_param("aoi", aoi())
                .with_param("window", window())
                .fallback_for("w"),
        );
    }
    ValidatedPlan::new(g, &registry()).unwrap()
}

fn run_with(plan: &PrunedPlan, table: &HandlerTable, workers: usize, retry: RetryPolicy) -> ExecutionTrace {
    let reg = registry();
    let transport = RecordingTransport::offline();
    let clock = FixedClock::epoch();
    let ctx = ExecutionContext {
        registry: &reg,
        handlers: table,
        transport: &transport,
        clock: &clock,
        options: ExecutorOptions {
            workers,
            retry,
            shuffle_seed: None,
        },
    };
    execute(plan, &ctx).unwrap()
}

fn position(trace: &ExecutionTrace, id: &str) -> usize {
    trace.entries.iter().position(|e| e.node_id == id).unwrap()
}

#[test]
fn happy_path_succeeds_in_dependency_order() {
    let plan = PrunedPlan::unpruned(full_plan(false));
    let table = handlers(0, Arc::new(AtomicU32::new(0)));
    let trace = run_with(&plan, &table, 4, RetryPolicy::immediate(2));
    assert_eq!(trace.status, TraceStatus::Succeeded);
    assert_eq!(trace.entries.len(), 5);
    for (a, b) in &plan.plan.graph().edges {
        assert!(position(&trace, a) < position(&trace, b));
    }
    let report = trace.entry("report").unwrap();
    assert_eq!(
        report.artifact.as_ref().unwrap().value("text"),
        Some(&json!("report over chl,ndci,weather"))
    );
    assert_eq!(trace.entry("chl").unwrap().artifact.as_ref().unwrap().value("chl"), Some(&json!(10.0)));
}

#[test]
fn trace_is_identical_across_worker_counts() {
    let plan = PrunedPlan::unpruned(full_plan(true));
    let a = run_with(&plan, &handlers(0, Arc::new(AtomicU32::new(0))), 1, RetryPolicy::immediate(2));
    let b = run_with(&plan, &handlers(0, Arc::new(AtomicU32::new(0))), 4, RetryPolicy::immediate(2));
    assert_eq!(a.to_json(), b.to_json());
}

#[test]
fn k_minus_one_failures_then_success() {
    let plan = PrunedPlan::unpruned(full_plan(false));
    let calls = Arc::new(AtomicU32::new(0));
    let table = handlers(2, calls.clone());
    let trace = run_with(&plan, &table, 2, RetryPolicy::immediate(3));
    let w = trace.entry("w").unwrap();
    assert_eq!(w.resolution, Resolution::Executed);
    assert_eq!(w.attempts.len(), 3);
    assert!(matches!(w.attempts[0].outcome, AttemptOutcome::Failure { .. }));
    assert_eq!(w.attempts[2].outcome, AttemptOutcome::Success);
    assert_eq!(trace.status, TraceStatus::Succeeded);
}

#[test]
fn exhausted_primary_hands_over_to_fallback() {
    let plan = PrunedPlan::unpruned(full_plan(true));
    let table = handlers(u32::MAX, Arc::new(AtomicU32::new(0)));
    let trace = run_with(&plan, &table, 4, RetryPolicy::immediate(2));
    let w = trace.entry("w").unwrap();
    assert_eq!(w.resolution, Resolution::Failed);
    assert_eq!(w.attempts.len(), 2);
    let clim = trace.entry("clim").unwrap();
    assert_eq!(clim.resolution, Resolution::ReplacedByFallback);
    assert_eq!(clim.replaces.as_deref(), Some("w"));
    assert_eq!(clim.artifact.as_ref().unwrap().provenance, Provenance::Fallback);
    assert!(position(&trace, "w") < position(&trace, "clim"));
    assert!(position(&trace, "clim") < position(&trace, "report"));
    assert_eq!(trace.status, TraceStatus::Succeeded);
    let text = trace.entry("report").unwrap().artifact.as_ref().unwrap().value("text").cloned();
    assert_eq!(text, Some(json!("report over chl,ndci,weather")));
}

#[test]
fn failure_without_fallback_blocks_dependents() {
    let plan = PrunedPlan::unpruned(full_plan(false));
    let mut table = handlers(0, Arc::new(AtomicU32::new(0)));
    table.insert("index", |_: &ToolValues| Err(ToolError::Failed("corrupt raster".into())));
    let trace = run_with(&plan, &table, 4, RetryPolicy::immediate(1));
    assert_eq!(trace.status, TraceStatus::Partial);
    let chl = trace.entry("chl").unwrap();
    assert!(chl.attempts.is_empty());
    assert!(chl.message.as_deref().unwrap().contains("index"));
    assert_eq!(trace.entry("report").unwrap().resolution, Resolution::Failed);
    assert_eq!(trace.entry("w").unwrap().resolution, Resolution::Executed);
    assert_eq!(trace.entries.len(), 5);
}

#[test]
fn unavailable_tool_routes_to_activated_fallback() {
    let avail = BTreeMap::from([("weather".to_string(), false)]);
    let plan = prune(&full_plan(true), &ArtifactCache::new(), &avail).unwrap();
    let calls = Arc::new(AtomicU32::new(0));
    let trace = run_with(&plan, &handlers(0, calls.clone()), 4, RetryPolicy::immediate(2));
    assert_eq!(calls.load(Ordering::SeqCst), 0);
    let w = trace.entry("w").unwrap();
    assert_eq!(w.resolution, Resolution::Failed);
    assert!(w.attempts.is_empty());
    assert_eq!(trace.entry("clim").unwrap().resolution, Resolution::ReplacedByFallback);
    assert_eq!(trace.status, TraceStatus::Succeeded);
}

#[test]
fn cached_nodes_are_not_invoked() {
    let mut params = BTreeMap::new();
    params.insert("aoi".to_string(), aoi());
    let cached = Artifact {
        producer: "old".into(),
        fields: BTreeMap::from([(
            "ndci".to_string(),
            TypedValue {
                semantic_type: "ndci-value".into(),
                value: json!(0.3),
            },
        )]),
        provenance: Provenance::Live,
    };
    let cache = BTreeMap::from([(crate::workflow::CacheKey::new("index", &params), cached)]);
    let mut g = full_plan(false).into_graph();
    g.nodes.iter_mut().find(|n| n.id == "index").unwrap().skip_if_cached = true;
    let plan = prune(&ValidatedPlan::new(g, &registry()).unwrap(), &cache, &BTreeMap::new()).unwrap();
    let mut table = handlers(0, Arc::new(AtomicU32::new(0)));
    table.insert("index", |_: &ToolValues| panic!("cached node invoked"));
    let trace = run_with(&plan, &table, 4, RetryPolicy::immediate(1));
    assert_eq!(trace.entry("index").unwrap().resolution, Resolution::SkippedCached);
    assert_eq!(trace.entry("chl").unwrap().artifact.as_ref().unwrap().value("chl"), Some(&json!(30.0)));
}

#[test]
fn resume_reuses_artifacts_and_continues_attempts() {
    let plan = PrunedPlan::unpruned(full_plan(false));
    let reg = registry();
    let transport = RecordingTransport::offline();
    let clock = FixedClock::epoch();
    let calls = Arc::new(AtomicU32::new(0));
    let table = handlers(2, calls.clone());
    let ctx = ExecutionContext {
        registry: &reg,
        handlers: &table,
        transport: &transport,
        clock: &clock,
        options: ExecutorOptions {
            workers: 4,
            retry: RetryPolicy::immediate(2),
            shuffle_seed: None,
        },
    };
    let first = execute(&plan, &ctx).unwrap();
    assert_eq!(first.status, TraceStatus::Partial);
    let resumed = resume(&first, &plan, &ctx).unwrap();
    assert_eq!(resumed.status, TraceStatus::Succeeded);
    let w = resumed.entry("w").unwrap();
    assert_eq!(w.attempts.iter().map(|a| a.attempt).collect::<Vec<_>>(), vec![1, 2, 3]);
    assert_eq!(resumed.entry("chl").unwrap().resolution, Resolution::SkippedCached);
    assert_eq!(resumed.entry("chl").unwrap().artifact.as_ref().unwrap().provenance, Provenance::Cached);
    assert!(matches!(resume(&resumed, &plan, &ctx), Err(ExecutorError::PreconditionViolation(_))));
}

#[test]
fn shuffled_dispatch_yields_same_trace() {
    let plan = PrunedPlan::unpruned(full_plan(true));
    let reg = registry();
    let transport = RecordingTransport::offline();
    let clock = FixedClock::epoch();
    let base = run_with(&plan, &handlers(0, Arc::new(AtomicU32::new(0))), 4, RetryPolicy::immediate(1));
    for seed in 0..8 {
        let table = handlers(0, Arc::new(AtomicU32::new(0)));
        let ctx = ExecutionContext {
            registry: &reg,
            handlers: &table,
            transport: &transport,
            clock: &clock,
            options: ExecutorOptions {
                workers: 3,
                retry: RetryPolicy::immediate(1),
                shuffle_seed: Some(seed),
            },
        };
        assert_eq!(execute(&plan, &ctx).unwrap(), base);
    }
}

#[test]
fn trace_json_round_trips() {
    let plan = PrunedPlan::unpruned(full_plan(true));
    let trace = run_with(&plan, &handlers(u32::MAX, Arc::new(AtomicU32::new(0))), 2, RetryPolicy::immediate(1));
    let back: ExecutionTrace = serde_json::from_str(&trace.to_json()).unwrap();
    assert_eq!(back, trace);
    let v: Value = serde_json::from_str(&trace.to_json()).unwrap();
    assert_eq!(v["status"], json!("succeeded"));
    assert_eq!(v["entries"][0]["attempts"][0]["outcome"]["status"], json!("success"));
}
