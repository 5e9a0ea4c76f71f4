//! Plan execution.
//!
//! Nodes run in waves: every node whose predecessors are resolved is eligible,
//! the eligible set runs concurrently on up to `workers` threads, and the wave's
//! entries are appended to the trace in node-id order once all of them finish.
//! That keeps the trace a linear extension of the plan and byte-stable across
//! runs, whatever the thread interleaving inside a wave was.
//!
//! A failing node never aborts the run. Its dependents are recorded as blocked,
//! its fallback (if declared) is activated, and the trace ends `partial`.

mod invoke;
mod node;

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::clock::Clock;
use crate::registry::ToolRegistry;
use crate::transport::HttpTransport;
use crate::workflow::{resolve_inputs, Disposition, InputBinding, InputSource, PrunedPlan};

pub use invoke::{HandlerTable, ToolError, ToolHandler, ToolValues};
pub use node::{run_node, NodeRuntime, RetryPolicy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Live,
    Cached,
    Fallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedValue {
    pub semantic_type: String,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub producer: String,
    pub fields: BTreeMap<String, TypedValue>,
    pub provenance: Provenance,
}

impl Artifact {
    pub fn value(&self, field: &str) -> Option<&Value> {
        self.fields.get(field).map(|t| &t.value)
    }

    /// First field carrying `semantic_type`, by field name.
    pub fn value_of_type(&self, semantic_type: &str) -> Option<&Value> {
        self.fields
            .values()
            .find(|t| t.semantic_type == semantic_type)
            .map(|t| &t.value)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AttemptOutcome {
    Success,
    Failure { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Attempt {
    pub attempt: u32,
    pub outcome: AttemptOutcome,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Executed,
    SkippedCached,
    ReplacedByFallback,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub node_id: String,
    pub tool: String,
    pub attempts: Vec<Attempt>,
    pub artifact: Option<Artifact>,
    pub resolution: Resolution,
    /// Primary node this fallback entry stands in for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replaces: Option<String>,
    /// Why the node failed without (or after) attempts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl TraceEntry {
    pub fn failure_messages(&self) -> impl Iterator<Item = &str> {
        self.attempts
            .iter()
            .filter_map(|a| match &a.outcome {
                AttemptOutcome::Failure { message } => Some(message.as_str()),
                AttemptOutcome::Success => None,
            })
            .chain(self.message.as_deref())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceStatus {
    Succeeded,
    Failed,
    Partial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub run_id: String,
    pub entries: Vec<TraceEntry>,
    pub status: TraceStatus,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
}

impl ExecutionTrace {
    pub fn entry(&self, node_id: &str) -> Option<&TraceEntry> {
        self.entries.iter().find(|e| e.node_id == node_id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("trace serializes")
    }

    /// A trace for a run that never reached execution.
    pub fn aborted(run_id: &str, at: DateTime<Utc>) -> Self {
        Self {
            run_id: run_id.to_string(),
            entries: Vec::new(),
            status: TraceStatus::Failed,
            started_at: at,
            finished_at: at,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecutorError {
    #[error("precondition violated: {0}")]
    PreconditionViolation(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExecutorOptions {
    pub workers: usize,
    pub retry: RetryPolicy,
    /// Shuffles dispatch order inside each wave; used to exercise interleavings.
    pub shuffle_seed: Option<u64>,
}

impl Default for ExecutorOptions {
    fn default() -> Self {
        Self {
            workers: 4,
            retry: RetryPolicy::default(),
            shuffle_seed: None,
        }
    }
}

pub struct ExecutionContext<'a> {
    pub registry: &'a ToolRegistry,
    pub handlers: &'a HandlerTable,
    pub transport: &'a dyn HttpTransport,
    pub clock: &'a dyn Clock,
    pub options: ExecutorOptions,
}

/// Executes a pruned plan to completion and returns the full trace.
pub fn execute(plan: &PrunedPlan, ctx: &ExecutionContext<'_>) -> Result<ExecutionTrace, ExecutorError> {
    let started = ctx.clock.now();
    run(plan, ctx, &BTreeMap::new(), started)
}

/// Continues a partial trace: nodes that already hold artifacts are reused as
/// cache, everything else runs again with its earlier attempts kept.
pub fn resume(
    trace: &ExecutionTrace,
    plan: &PrunedPlan,
    ctx: &ExecutionContext<'_>,
) -> Result<ExecutionTrace, ExecutorError> {
    if trace.status != TraceStatus::Partial {
        return Err(ExecutorError::PreconditionViolation(format!(
            "resume needs a partial trace, got {:?}",
            trace.status
        )));
    }
    if trace.run_id != plan.plan.run_id() {
        return Err(ExecutorError::PreconditionViolation(format!(
            "trace belongs to run `{}`, plan to `{}`",
            trace.run_id,
            plan.plan.run_id()
        )));
    }
    let prior: BTreeMap<String, Artifact> = trace
        .entries
        .iter()
        .filter_map(|e| e.artifact.clone().map(|a| (e.node_id.clone(), a)))
        .collect();
    let mut merged = run(plan, ctx, &prior, trace.started_at)?;
    for entry in merged.entries.iter_mut() {
        if entry.resolution == Resolution::SkippedCached && prior.contains_key(&entry.node_id) {
            continue;
        }
        if let Some(old) = trace.entry(&entry.node_id) {
            if old.attempts.is_empty() {
                continue;
            }
            let offset = old.attempts.len() as u32;
            let mut attempts = old.attempts.clone();
            attempts.extend(entry.attempts.drain(..).map(|mut a| {
                a.attempt += offset;
                a
            }));
            entry.attempts = attempts;
        }
    }
    Ok(merged)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Pending,
    Dormant,
    Done,
    Failed,
}

fn run(
    plan: &PrunedPlan,
    ctx: &ExecutionContext<'_>,
    prior: &BTreeMap<String, Artifact>,
    started_at: DateTime<Utc>,
) -> Result<ExecutionTrace, ExecutorError> {
    let graph = plan.plan.graph();
    for n in &graph.nodes {
        if ctx.registry.get_tool(&n.tool).is_none() {
            return Err(ExecutorError::PreconditionViolation(format!(
                "node `{}` uses unregistered tool `{}`",
                n.id, n.tool
            )));
        }
    }
    let preds = graph.predecessors();
    let bindings = resolve_inputs(graph, ctx.registry);
    let fallbacks = plan.plan.fallbacks();
    let report_id = plan.plan.report_node().id.clone();

    let mut state: BTreeMap<&str, State> = graph
        .nodes
        .iter()
        .map(|n| {
            let s = match plan.disposition(&n.id) {
                Disposition::Standby { .. } => State::Dormant,
                _ => State::Pending,
            };
            (n.id.as_str(), s)
        })
        .collect();
    // readable artifacts per node id; a replaced primary's slot holds its fallback's output
    let mut slots: BTreeMap<String, Artifact> = BTreeMap::new();
    let mut entries: Vec<TraceEntry> = Vec::new();
    let runtime = NodeRuntime {
        handlers: ctx.handlers,
        transport: ctx.transport,
        clock: ctx.clock,
    };
    let mut wave_no = 0u64;

    loop {
        // a predecessor is dead once it failed and no fallback can still stand in
        let dead = |state: &BTreeMap<&str, State>, id: &str| {
            state[id] == State::Failed
                && fallbacks
                    .get(id)
                    .map(|f| state[f.as_str()] == State::Failed)
                    .unwrap_or(true)
        };
        loop {
            let mut blocked = Vec::new();
            for (id, s) in &state {
                if *s != State::Pending || matches!(plan.disposition(id), Disposition::SkippedCached { .. }) {
                    continue;
                }
                if let Some(p) = preds[id].iter().find(|p| dead(&state, p)) {
                    blocked.push((id.to_string(), p.to_string()));
                }
            }
            if blocked.is_empty() {
                break;
            }
            for (id, upstream) in blocked {
                let node = graph.node(&id).unwrap();
                state.insert(graph.node(&id).map(|n| n.id.as_str()).unwrap(), State::Failed);
                entries.push(TraceEntry {
                    node_id: id.clone(),
                    tool: node.tool.clone(),
                    attempts: Vec::new(),
                    artifact: None,
                    resolution: Resolution::Failed,
                    replaces: None,
                    message: Some(format!("blocked: upstream `{upstream}` failed")),
                });
                activate_fallback(&id, &fallbacks, &mut state, graph);
            }
        }

        let ready: Vec<&str> = state
            .iter()
            .filter(|(id, s)| {
                **s == State::Pending
                    && match plan.disposition(id) {
                        // cached nodes only wait for their predecessors to settle
                        Disposition::SkippedCached { .. } => preds[*id]
                            .iter()
                            .all(|p| matches!(state[p], State::Done | State::Failed | State::Dormant)),
                        _ => preds[*id].iter().all(|p| slots.contains_key(*p)),
                    }
            })
            .map(|(id, _)| *id)
            .collect();
        if ready.is_empty() {
            break;
        }
        wave_no += 1;

        let mut dispatch: Vec<&str> = ready.clone();
        if let Some(seed) = ctx.options.shuffle_seed {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(wave_no));
            dispatch.shuffle(&mut rng);
        }
        let inputs: BTreeMap<&str, ToolValues> = dispatch
            .iter()
            .map(|id| (*id, gather_inputs(&bindings[*id], &slots)))
            .collect();

        let results: Mutex<BTreeMap<String, TraceEntry>> = Mutex::new(BTreeMap::new());
        let cursor = AtomicUsize::new(0);
        let workers = ctx.options.workers.max(1).min(dispatch.len());
        let work = |id: &str| -> TraceEntry {
            let node = graph.node(id).unwrap();
            let tool = ctx.registry.get_tool(&node.tool).unwrap();
            let replaces = node.fallback_for.clone();
            let mut entry = if let Some(artifact) = prior.get(id) {
                let mut artifact = artifact.clone();
                artifact.provenance = Provenance::Cached;
                TraceEntry {
                    node_id: id.to_string(),
                    tool: node.tool.clone(),
                    attempts: Vec::new(),
                    artifact: Some(artifact),
                    resolution: Resolution::SkippedCached,
                    replaces: None,
                    message: None,
                }
            } else {
                match plan.disposition(id) {
                    Disposition::SkippedCached { artifact } => TraceEntry {
                        node_id: id.to_string(),
                        tool: node.tool.clone(),
                        attempts: Vec::new(),
                        artifact: Some(artifact.clone()),
                        resolution: Resolution::SkippedCached,
                        replaces: None,
                        message: None,
                    },
                    Disposition::Unavailable { .. } => TraceEntry {
                        node_id: id.to_string(),
                        tool: node.tool.clone(),
                        attempts: Vec::new(),
                        artifact: None,
                        resolution: Resolution::Failed,
                        replaces: None,
                        message: Some(format!("tool `{}` unavailable", node.tool)),
                    },
                    _ => run_node(id, tool, &inputs[id], &runtime, &ctx.options.retry),
                }
            };
            if replaces.is_some() {
                if let Some(a) = entry.artifact.as_mut() {
                    if entry.resolution == Resolution::Executed {
                        a.provenance = Provenance::Fallback;
                    }
                    entry.resolution = Resolution::ReplacedByFallback;
                }
                entry.replaces = replaces;
            }
            entry
        };
        std::thread::scope(|scope| {
            for _ in 0..workers {
                scope.spawn(|| loop {
                    let i = cursor.fetch_add(1, Ordering::SeqCst);
                    let Some(id) = dispatch.get(i) else { break };
                    let entry = work(id);
                    results.lock().unwrap().insert(id.to_string(), entry);
                });
            }
        });

        for (id, entry) in results.into_inner().unwrap() {
            let key = graph.node(&id).unwrap().id.as_str();
            match &entry.artifact {
                Some(artifact) => {
                    state.insert(key, State::Done);
                    slots.insert(id.clone(), artifact.clone());
                    if let Some(primary) = &entry.replaces {
                        let primary_tool = &graph.node(primary).unwrap().tool;
                        let tool = ctx.registry.get_tool(primary_tool).unwrap();
                        slots.insert(primary.clone(), remap_for_primary(artifact, primary, tool));
                    }
                }
                None => {
                    state.insert(key, State::Failed);
                    activate_fallback(&id, &fallbacks, &mut state, graph);
                }
            }
            entries.push(entry);
        }
    }

    let status = if slots.contains_key(&report_id) {
        TraceStatus::Succeeded
    } else {
        TraceStatus::Partial
    };
    Ok(ExecutionTrace {
        run_id: graph.run_id.clone(),
        entries,
        status,
        started_at,
        finished_at: ctx.clock.now(),
    })
}

fn activate_fallback<'g>(
    primary: &str,
    fallbacks: &BTreeMap<String, String>,
    state: &mut BTreeMap<&'g str, State>,
    graph: &'g crate::workflow::PlanGraph,
) {
    if let Some(f) = fallbacks.get(primary) {
        let key = graph.node(f).unwrap().id.as_str();
        if state[key] == State::Dormant {
            state.insert(key, State::Pending);
        }
    }
}

fn gather_inputs(bindings: &[InputBinding], slots: &BTreeMap<String, Artifact>) -> ToolValues {
    let mut values = ToolValues::new();
    for b in bindings {
        let v = match &b.source {
            InputSource::Literal { value } => Some(value.clone()),
            InputSource::Reference { node, field } | InputSource::Inferred { node, field } => {
                slots.get(node).and_then(|a| a.value(field)).cloned()
            }
            InputSource::Missing => None,
        };
        if let Some(v) = v {
            values.insert(b.field.clone(), v);
        }
    }
    values
}

/// Renames a fallback's fields to the primary's declared outputs, matching by type.
fn remap_for_primary(artifact: &Artifact, primary: &str, primary_tool: &crate::registry::ToolDescriptor) -> Artifact {
    let mut fields = BTreeMap::new();
    for out in &primary_tool.outputs {
        let candidate = artifact
            .fields
            .get(&out.name)
            .filter(|t| t.semantic_type == out.semantic_type)
            .or_else(|| artifact.fields.values().find(|t| t.semantic_type == out.semantic_type));
        if let Some(t) = candidate {
            fields.insert(out.name.clone(), t.clone());
        }
    }
    Artifact {
        producer: primary.to_string(),
        fields,
        provenance: artifact.provenance,
    }
}

#[cfg(test)]
mod tests;
