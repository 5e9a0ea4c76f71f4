use std::time::Duration;

use super::invoke::{invoke, HandlerTable, ToolValues};
use super::{Artifact, Attempt, AttemptOutcome, Provenance, Resolution, TraceEntry, TypedValue};
use crate::clock::Clock;
use crate::registry::{value_matches_type, ToolDescriptor};
use crate::transport::HttpTransport;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    /// Budget used when a descriptor leaves `retry_default` at 0.
    pub max_attempts: u32,
    /// Fixed delay between attempts.
    pub backoff: Duration,
    /// Per-attempt timeout for remote bindings that do not set one.
    pub remote_timeout: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_attempts: 2,
            backoff: Duration::from_secs(1),
            remote_timeout: Duration::from_secs(30),
        }
    }
}

impl RetryPolicy {
    pub fn immediate(max_attempts: u32) -> Self {
        Self {
            max_attempts,
            backoff: Duration::ZERO,
            ..Self::default()
        }
    }

    pub fn budget_for(&self, tool: &ToolDescriptor) -> u32 {
        if tool.retry_default > 0 {
            tool.retry_default
        } else {
            self.max_attempts.max(1)
        }
    }
}

pub struct NodeRuntime<'a> {
    pub handlers: &'a HandlerTable,
    pub transport: &'a dyn HttpTransport,
    pub clock: &'a dyn Clock,
}

/// Runs one node against its binding, retrying up to the tool's budget.
///
/// Never fails: the outcome is encoded in the returned entry. Missing required
/// inputs fail immediately without touching the binding.
pub fn run_node(
    node_id: &str,
    tool: &ToolDescriptor,
    inputs: &ToolValues,
    runtime: &NodeRuntime<'_>,
    policy: &RetryPolicy,
) -> TraceEntry {
    let mut entry = TraceEntry {
        node_id: node_id.to_string(),
        tool: tool.name.clone(),
        attempts: Vec::new(),
        artifact: None,
        resolution: Resolution::Failed,
        replaces: None,
        message: None,
    };

    let missing: Vec<&str> = tool
        .inputs
        .iter()
        .filter(|f| f.required && !inputs.contains_key(&f.name))
        .map(|f| f.name.as_str())
        .collect();
    if !missing.is_empty() {
        entry.message = Some(format!("missing required input(s): {}", missing.join(", ")));
        return entry;
    }

    let budget = policy.budget_for(tool);
    for attempt in 1..=budget {
        if attempt > 1 && !policy.backoff.is_zero() {
            std::thread::sleep(policy.backoff);
        }
        let started = runtime.clock.now();
        let result = invoke(&tool.binding, inputs, runtime.handlers, runtime.transport, policy.remote_timeout)
            .and_then(|outputs| artifact_from(node_id, tool, outputs));
        let duration_ms = (runtime.clock.now() - started).num_milliseconds().max(0) as u64;
        match result {
            Ok(artifact) => {
                entry.attempts.push(Attempt {
                    attempt,
                    outcome: AttemptOutcome::Success,
                    duration_ms,
                });
                entry.artifact = Some(artifact);
                entry.resolution = Resolution::Executed;
                return entry;
            }
            Err(message) => {
                tracing::debug!(node = node_id, attempt, %message, "tool attempt failed");
                entry.attempts.push(Attempt {
                    attempt,
                    outcome: AttemptOutcome::Failure { message },
                    duration_ms,
                });
            }
        }
    }
    entry.message = Some(format!("retry budget of {budget} exhausted"));
    entry
}

fn artifact_from(node_id: &str, tool: &ToolDescriptor, outputs: ToolValues) -> Result<Artifact, String> {
    let mut fields = std::collections::BTreeMap::new();
    for (name, value) in outputs {
        let spec = tool
            .output(&name)
            .ok_or_else(|| format!("tool emitted undeclared output `{name}`"))?;
        if !value_matches_type(&spec.semantic_type, &value) {
            return Err(format!("output `{name}` is not a valid {}", spec.semantic_type));
        }
        fields.insert(
            name,
            TypedValue {
                semantic_type: spec.semantic_type.clone(),
                value,
            },
        );
    }
    if let Some(missing) = tool.outputs.iter().find(|o| o.required && !fields.contains_key(&o.name)) {
        return Err(format!("tool did not produce required output `{}`", missing.name));
    }
    Ok(Artifact {
        producer: node_id.to_string(),
        fields,
        provenance: Provenance::Live,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::FixedClock;
    use crate::executor::invoke::ToolError;
    use crate::registry::{Binding, FieldSpec, TemporalScope};
    use crate::transport::{RecordingTransport, UreqTransport};
    use serde_json::json;
    use std::sync::atomic::{AtomicU32, Ordering};
    use std::sync::Arc;

    fn chl_tool() -> ToolDescriptor {
        ToolDescriptor {
            name: "chl".into(),
            description: String::new(),
            inputs: vec![FieldSpec::required("ndci", "ndci-value")],
            outputs: vec![FieldSpec::required("chl", "chl-a-ug-per-l")],
            temporal_scope: TemporalScope::None,
            invocation_contexts: vec![],
            binding: Binding::InProcess { handler: "chl".into() },
            retry_default: 0,
        }
    }

    fn table_with(calls: Arc<AtomicU32>, failures: u32) -> HandlerTable {
        let mut t = HandlerTable::new();
        t.insert("chl", move |inputs: &ToolValues| {
            let n = calls.fetch_add(1, Ordering::SeqCst);
            if n < failures {
                return Err(ToolError::Unavailable("flaky".into()));
            }
            let x = inputs["ndci"].as_f64().unwrap();
            Ok(ToolValues::from([("chl".to_string(), json!(x * 10.0))]))
        });
        t
    }

    fn runtime<'a>(t: &'a HandlerTable, transport: &'a dyn HttpTransport, clock: &'a FixedClock) -> NodeRuntime<'a> {
        NodeRuntime {
            handlers: t,
            transport,
            clock,
        }
    }

    #[test]
    fn in_process_success_single_attempt() {
        let calls = Arc::new(AtomicU32::new(0));
        let table = table_with(calls.clone(), 0);
        let transport = RecordingTransport::offline();
        let clock = FixedClock::epoch();
        let inputs = ToolValues::from([("ndci".to_string(), json!(0.5))]);
        let e = run_node("c", &chl_tool(), &inputs, &runtime(&table, &transport, &clock), &RetryPolicy::immediate(2));
        assert_eq!(e.resolution, Resolution::Executed);
        assert_eq!(e.attempts.len(), 1);
        assert_eq!(e.artifact.unwrap().fields["chl"].value, json!(5.0));
    }

    #[test]
    fn retries_until_success_within_budget() {
        let calls = Arc::new(AtomicU32::new(0));
        let table = table_with(calls.clone(), 2);
        let transport = RecordingTransport::offline();
        let clock = FixedClock::epoch();
        let mut tool = chl_tool();
        tool.retry_default = 3;
        let inputs = ToolValues::from([("ndci".to_string(), json!(0.5))]);
        let e = run_node("c", &tool, &inputs, &runtime(&table, &transport, &clock), &RetryPolicy::immediate(2));
        assert_eq!(e.resolution, Resolution::Executed);
        assert_eq!(e.attempts.len(), 3);
        assert_eq!(calls.load(Ordering::SeqCst), 3);
    }

    #[test]
    fn missing_required_input_makes_no_attempt() {
        let calls = Arc::new(AtomicU32::new(0));
        let table = table_with(calls.clone(), 0);
        let transport = RecordingTransport::offline();
        let clock = FixedClock::epoch();
        let e = run_node("c", &chl_tool(), &ToolValues::new(), &runtime(&table, &transport, &clock), &RetryPolicy::immediate(2));
        assert_eq!(e.resolution, Resolution::Failed);
        assert!(e.attempts.is_empty());
        assert_eq!(calls.load(Ordering::SeqCst), 0);
    }

    #[test]
    fn undeclared_or_mistyped_output_is_a_failed_attempt() {
        let mut t = HandlerTable::new();
        t.insert("chl", |_: &ToolValues| Ok(ToolValues::from([("chl".to_string(), json!(-4.0))])));
        let transport = RecordingTransport::offline();
        let clock = FixedClock::epoch();
        let inputs = ToolValues::from([("ndci".to_string(), json!(0.5))]);
        let e = run_node("c", &chl_tool(), &inputs, &runtime(&t, &transport, &clock), &RetryPolicy::immediate(1));
        assert_eq!(e.resolution, Resolution::Failed);
        assert!(matches!(&e.attempts[0].outcome, AttemptOutcome::Failure { message } if message.contains("not a valid")));
    }

    #[test]
    fn remote_tool_down_exhausts_budget() {
        let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        let port = listener.local_addr().unwrap().port();
        drop(listener);
        let mut tool = chl_tool();
        tool.binding = Binding::Remote {
            base_url: format!("http://127.0.0.1:{port}"),
            path: "/tools/chl".into(),
            timeout_secs: 2,
        };
        let table = HandlerTable::new();
        let transport = UreqTransport;
        let clock = FixedClock::epoch();
        let inputs = ToolValues::from([("ndci".to_string(), json!(0.5))]);
        let e = run_node("c", &tool, &inputs, &runtime(&table, &transport, &clock), &RetryPolicy::immediate(2));
        assert_eq!(e.resolution, Resolution::Failed);
        assert_eq!(e.attempts.len(), 2);
        assert!(e
            .attempts
            .iter()
            .all(|a| matches!(a.outcome, AttemptOutcome::Failure { .. })));
    }
}
