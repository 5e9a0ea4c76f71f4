//! Executes a small plan whose weather tool always fails. The executor
//! spends the retry budget, then hands the node's role to its fallback.

use std::sync::atomic::{AtomicU32, Ordering};
use std::sync::Arc;

use serde_json::json;

use aquaflow::clock::FixedClock;
use aquaflow::executor::{execute, ExecutionContext, ExecutorOptions, HandlerTable, RetryPolicy, ToolError, ToolValues};
use aquaflow::registry::{Binding, FieldSpec, TemporalScope, ToolDescriptor, ToolRegistry, TERMINAL_CONTEXT};
use aquaflow::transport::RecordingTransport;
use aquaflow::workflow::{NodeKind, PlanGraph, PlanNode, PrunedPlan, ValidatedPlan};

fn tool(name: &str, inputs: Vec<FieldSpec>, outputs: Vec<FieldSpec>, contexts: &[&str]) -> ToolDescriptor {
    ToolDescriptor {
        name: name.into(),
        description: String::new(),
        inputs,
        outputs,
        temporal_scope: TemporalScope::None,
        invocation_contexts: contexts.iter().map(|s| s.to_string()).collect(),
        binding: Binding::InProcess { handler: name.into() },
        retry_default: 0,
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let weather = || vec![FieldSpec::required("series", "weather-series")];
    let mut registry = ToolRegistry::new();
    registry.register_tool(tool("live_weather", vec![], weather(), &[]))?;
    registry.register_tool(tool("climatology", vec![], weather(), &[]))?;
    registry.register_tool(tool(
        "report",
        vec![FieldSpec::required("weather", "weather-series")],
        vec![FieldSpec::required("text", "report-text")],
        &[TERMINAL_CONTEXT],
    ))?;

    let calls = Arc::new(AtomicU32::new(0));
    let mut handlers = HandlerTable::new();
    let c = calls.clone();
    handlers.insert("live_weather", move |_: &ToolValues| {
        c.fetch_add(1, Ordering::SeqCst);
        Err(ToolError::Unavailable("weather service timed out".into()))
    });
    handlers.insert("climatology", |_: &ToolValues| {
        Ok(ToolValues::from([("series".into(), json!({"source": "climatology", "samples": []}))]))
    });
    handlers.insert("report", |inputs: &ToolValues| {
        Ok(ToolValues::from([("text".into(), json!(format!("weather from {}", inputs["weather"]["source"])))]))
    });

    let mut clim = PlanNode::new("clim", "climatology", NodeKind::Retrieval);
    clim.fallback_for = Some("wx".into());
    let mut report = PlanNode::new("report", "report", NodeKind::Report);
    report.params.insert("weather".into(), json!("$wx.series"));
    let graph = PlanGraph::new("demo")
        .with_node(PlanNode::new("wx", "live_weather", NodeKind::Retrieval))
        .with_node(clim)
        .with_node(report)
        .with_edge("wx", "report");

    let plan = PrunedPlan::unpruned(ValidatedPlan::new(graph, &registry)?);
    let transport = RecordingTransport::offline();
    let clock = FixedClock::epoch();
    let ctx = ExecutionContext {
        registry: &registry,
        handlers: &handlers,
        transport: &transport,
        clock: &clock,
        options: ExecutorOptions {
            workers: 2,
            retry: RetryPolicy::immediate(3),
            shuffle_seed: None,
        },
    };
    let trace = execute(&plan, &ctx)?;
    for e in &trace.entries {
        println!(
            "{:<7} {:?} attempts={} replaces={:?} {}",
            e.node_id,
            e.resolution,
            e.attempts.len(),
            e.replaces,
            e.message.as_deref().unwrap_or("")
        );
    }
    println!("live weather was called {} times; trace status {:?}", calls.load(Ordering::SeqCst), trace.status);
    Ok(())
}
