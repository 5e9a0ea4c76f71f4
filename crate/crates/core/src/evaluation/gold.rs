use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::EvalError;
use crate::planning::Expertise;

/// Parameter assertions a gold task may make about the extracted query parameters.
pub const PARAM_KEYS: [&str; 5] = ["water_body_name", "start_date", "stop_date", "expertise", "has_aoi"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldTask {
    pub id: String,
    pub prompt: String,
    #[serde(default)]
    pub expertise: Expertise,
    pub expected_tools: BTreeSet<String>,
    /// Must appear as a subsequence of the executed tool order.
    pub expected_order: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub expected_params: BTreeMap<String, Value>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    /// Manual relevancy judgment that replaces the reflection verdict.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relevant: Option<bool>,
}

impl GoldTask {
    fn check(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("id is empty".into());
        }
        if self.prompt.trim().is_empty() {
            return Err("prompt is empty".into());
        }
        if let Some(t) = self.expected_order.iter().find(|t| !self.expected_tools.contains(*t)) {
            return Err(format!("expected_order names `{t}`, which is not in expected_tools"));
        }
        if let Some(k) = self.expected_params.keys().find(|k| !PARAM_KEYS.contains(&k.as_str())) {
            return Err(format!("unknown expected_params key `{k}`"));
        }
        Ok(())
    }
}

/// Parses JSON-lines gold tasks; blank lines are skipped.
pub fn parse_gold(text: &str) -> Result<Vec<GoldTask>, EvalError> {
    let mut tasks = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let err = |reason: String| EvalError::Parse { line: i + 1, reason };
        let task: GoldTask = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
        task.check().map_err(err)?;
        if !ids.insert(task.id.clone()) {
            return Err(err(format!("duplicate task id `{}`", task.id)));
        }
        tasks.push(task);
    }
    if tasks.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    Ok(tasks)
}

pub fn load_gold(path: &Path) -> Result<Vec<GoldTask>, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
    parse_gold(&text)
}
