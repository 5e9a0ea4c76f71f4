use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{EvalError, GoldTask};
use crate::executor::{ExecutionTrace, Resolution};
use crate::planning::{normalize_name, QueryParameters};
use crate::reporting::{ReflectionVerdict, Report};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreCard {
    pub task_id: String,
    pub input_correct: bool,
    pub tools_correct: bool,
    pub order_correct: bool,
    pub relevant: bool,
    pub anomalies: Vec<String>,
}

impl ScoreCard {
    /// Card for a run that could not be scored.
    pub fn failed(task_id: &str, anomaly: String) -> Self {
        Self {
            task_id: task_id.to_string(),
            input_correct: false,
            tools_correct: false,
            order_correct: false,
            relevant: false,
            anomalies: vec![anomaly],
        }
    }

    pub fn all_true(&self) -> bool {
        self.input_correct && self.tools_correct && self.order_correct && self.relevant
    }
}

/// Tool names in execution order, as the gold annotation would name them.
///
/// Failed nodes did not run. A fallback that stood in for a primary counts as
/// the primary's tool, since it delivered that tool's outputs.
pub fn executed_tools(trace: &ExecutionTrace) -> Vec<String> {
    let tool_of: BTreeMap<&str, &str> = trace.entries.iter().map(|e| (e.node_id.as_str(), e.tool.as_str())).collect();
    trace
        .entries
        .iter()
        .filter_map(|e| match e.resolution {
            Resolution::Executed | Resolution::SkippedCached => Some(e.tool.clone()),
            Resolution::ReplacedByFallback => Some(
                e.replaces
                    .as_deref()
                    .and_then(|p| tool_of.get(p))
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| e.tool.clone()),
            ),
            Resolution::Failed => None,
        })
        .collect()
}

/// Whether `needle` appears in `haystack` in order, gaps allowed.
pub fn is_subsequence(needle: &[String], haystack: &[String]) -> bool {
    let mut it = haystack.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

fn param_matches(key: &str, expected: &Value, params: &QueryParameters) -> bool {
    let date = |d: Option<chrono::NaiveDate>| d.map(|d| Value::String(d.to_string())).unwrap_or(Value::Null);
    match key {
        "water_body_name" => match (expected.as_str(), params.water_body_name.as_deref()) {
            (Some(e), Some(a)) => normalize_name(e) == normalize_name(a),
            (None, None) => expected.is_null(),
            _ => false,
        },
        "start_date" => *expected == date(params.window.as_ref().map(|w| w.start())),
        "stop_date" => *expected == date(params.window.as_ref().map(|w| w.stop())),
        "expertise" => *expected == serde_json::to_value(params.expertise).unwrap(),
        "has_aoi" => expected.as_bool() == Some(params.aoi.is_some()),
        _ => false,
    }
}

/// Scores one run against its gold task.
///
/// `params` is `None` when extraction failed. `report` must belong to the same
/// run as `trace` and answer the task's prompt.
pub fn score_task(
    task: &GoldTask,
    params: Option<&QueryParameters>,
    trace: &ExecutionTrace,
    report: Option<&Report>,
    verdict: Option<&ReflectionVerdict>,
) -> Result<ScoreCard, EvalError> {
    if let Some(r) = report {
        if r.run_id != trace.run_id || r.query != task.prompt {
            return Err(EvalError::RunMismatch {
                task: task.id.clone(),
                run: r.run_id.clone(),
            });
        }
    }
    let input_correct = params
        .map(|p| task.expected_params.iter().all(|(k, v)| param_matches(k, v, p)))
        .unwrap_or(false);
    let executed = executed_tools(trace);
    let executed_set: BTreeSet<String> = executed.iter().cloned().collect();
    let tools_correct = executed_set == task.expected_tools;
    let order_correct = is_subsequence(&task.expected_order, &executed);
    let relevant = task
        .relevant
        .unwrap_or_else(|| report.is_some() && verdict.map(|v| v.relevant).unwrap_or(false));

    let mut anomalies = Vec::new();
    for e in &trace.entries {
        if e.failure_messages().any(|m| m.contains("unavailable")) {
            anomalies.push(format!("service downtime: node `{}` ({})", e.node_id, e.tool));
        } else if e.resolution == Resolution::Failed {
            anomalies.push(format!("failed node: `{}` ({})", e.node_id, e.tool));
        }
        if let (Resolution::ReplacedByFallback, Some(p)) = (e.resolution, &e.replaces) {
            anomalies.push(format!("fallback: `{}` replaced `{p}`", e.node_id));
        }
    }
    for t in executed_set.difference(&task.expected_tools) {
        anomalies.push(format!("redundant tool: {t}"));
    }
    if report.is_none() {
        anomalies.push("no report".into());
    }
    Ok(ScoreCard {
        task_id: task.id.clone(),
        input_correct,
        tools_correct,
        order_correct,
        relevant,
        anomalies,
    })
}
