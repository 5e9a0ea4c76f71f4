//! Tool metadata and I/O compatibility.
//!
//! The registry owns a closed vocabulary of semantic type tags. Every input and
//! output field of a registered tool carries one of those tags, and two tools are
//! compatible exactly where an output tag of one equals an input tag of the other.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Semantic type tags every registry starts with.
pub const SEED_VOCABULARY: &[&str] = &[
    "aoi-polygon",
    "water-body-name",
    "time-window",
    "scene-list",
    "index-raster",
    "ndci-value",
    "ndwi-value",
    "chl-a-ug-per-l",
    "bloom-severity",
    "weather-series",
    "document-context",
    "report-text",
];

/// Tag reserved for terminal report output; no tool may consume it.
pub const REPORT_TEXT: &str = "report-text";
pub const TERMINAL_CONTEXT: &str = "terminal";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldSpec {
    pub name: String,
    pub semantic_type: String,
    pub required: bool,
}

impl FieldSpec {
    pub fn required(name: &str, semantic_type: &str) -> Self {
        Self {
            name: name.to_string(),
            semantic_type: semantic_type.to_string(),
            required: true,
        }
    }

    pub fn optional(name: &str, semantic_type: &str) -> Self {
        Self {
            name: name.to_string(),
            semantic_type: semantic_type.to_string(),
            required: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TemporalScope {
    Instant,
    Interval,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Binding {
    InProcess {
        handler: String,
    },
    Remote {
        base_url: String,
        path: String,
        timeout_secs: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolDescriptor {
    pub name: String,
    pub description: String,
    pub inputs: Vec<FieldSpec>,
    pub outputs: Vec<FieldSpec>,
    pub temporal_scope: TemporalScope,
    pub invocation_contexts: Vec<String>,
    pub binding: Binding,
    /// Attempts per node; 0 defers to the executor's default budget.
    pub retry_default: u32,
}

impl ToolDescriptor {
    pub fn is_terminal(&self) -> bool {
        self.invocation_contexts.iter().any(|c| c == TERMINAL_CONTEXT)
    }

    pub fn input(&self, name: &str) -> Option<&FieldSpec> {
        self.inputs.iter().find(|f| f.name == name)
    }

    pub fn output(&self, name: &str) -> Option<&FieldSpec> {
        self.outputs.iter().find(|f| f.name == name)
    }

    pub fn output_types(&self) -> BTreeSet<&str> {
        self.outputs.iter().map(|f| f.semantic_type.as_str()).collect()
    }
}

pub type ToolHandle = Arc<ToolDescriptor>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldMatch {
    pub output: String,
    pub input: String,
    pub semantic_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("tool `{0}` is already registered")]
    DuplicateName(String),
    #[error("invalid descriptor `{name}`: {reason}")]
    InvalidDescriptor { name: String, reason: String },
    #[error("unknown tool `{0}`")]
    UnknownTool(String),
}

#[derive(Debug, Clone)]
pub struct ToolRegistry {
    vocabulary: BTreeSet<String>,
    tools: BTreeMap<String, ToolHandle>,
}

impl Default for ToolRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl ToolRegistry {
    pub fn new() -> Self {
        Self::with_vocabulary(SEED_VOCABULARY.iter().map(|s| s.to_string()))
    }

    /// Seed vocabulary plus `extra` tags.
    pub fn with_vocabulary(extra: impl IntoIterator<Item = String>) -> Self {
        let mut vocabulary: BTreeSet<String> = SEED_VOCABULARY.iter().map(|s| s.to_string()).collect();
        vocabulary.extend(extra);
        Self {
            vocabulary,
            tools: BTreeMap::new(),
        }
    }

    pub fn vocabulary(&self) -> &BTreeSet<String> {
        &self.vocabulary
    }

    pub fn len(&self) -> usize {
        self.tools.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tools.is_empty()
    }

    pub fn register_tool(&mut self, descriptor: ToolDescriptor) -> Result<ToolHandle, RegistryError> {
        self.check_descriptor(&descriptor)?;
        if self.tools.contains_key(&descriptor.name) {
            return Err(RegistryError::DuplicateName(descriptor.name));
        }
        let handle = Arc::new(descriptor);
        self.tools.insert(handle.name.clone(), Arc::clone(&handle));
        Ok(handle)
    }

    fn check_descriptor(&self, d: &ToolDescriptor) -> Result<(), RegistryError> {
        let invalid = |reason: String| RegistryError::InvalidDescriptor {
            name: d.name.clone(),
            reason,
        };
        if d.name.trim().is_empty() {
            return Err(invalid("name is empty".into()));
        }
        for (side, fields) in [("input", &d.inputs), ("output", &d.outputs)] {
            let mut seen = BTreeSet::new();
            for f in fields.iter() {
                if f.name.is_empty() {
                    return Err(invalid(format!("{side} field with empty name")));
                }
                if !seen.insert(f.name.as_str()) {
                    return Err(invalid(format!("duplicate {side} field `{}`", f.name)));
                }
                if !self.vocabulary.contains(&f.semantic_type) {
                    return Err(invalid(format!(
                        "{side} field `{}` uses unknown semantic type `{}`",
                        f.name, f.semantic_type
                    )));
                }
            }
        }
        if let Some(f) = d.inputs.iter().find(|f| f.semantic_type == REPORT_TEXT) {
            return Err(invalid(format!("input `{}` consumes terminal report-text", f.name)));
        }
        if d.is_terminal() {
            if let Some(f) = d.outputs.iter().find(|f| f.semantic_type != REPORT_TEXT) {
                return Err(invalid(format!(
                    "terminal tool declares consumable output `{}` ({})",
                    f.name, f.semantic_type
                )));
            }
        } else if let Some(f) = d.outputs.iter().find(|f| f.semantic_type == REPORT_TEXT) {
            return Err(invalid(format!("non-terminal tool emits report-text field `{}`", f.name)));
        }
        if let Binding::Remote { base_url, .. } = &d.binding {
            if url::Url::parse(base_url).is_err() {
                return Err(invalid(format!("remote base_url `{base_url}` is not a URL")));
            }
        }
        Ok(())
    }

    pub fn get_tool(&self, name: &str) -> Option<&ToolHandle> {
        self.tools.get(name)
    }

    pub fn tool(&self, name: &str) -> Result<&ToolHandle, RegistryError> {
        self.get_tool(name)
            .ok_or_else(|| RegistryError::UnknownTool(name.to_string()))
    }

    /// Tools in name order.
    pub fn tools(&self) -> impl Iterator<Item = &ToolHandle> {
        self.tools.values()
    }

    /// Every (producer output, consumer input) pair with equal semantic types.
    pub fn compatible(&self, producer: &str, consumer: &str) -> Result<Vec<FieldMatch>, RegistryError> {
        let p = self.tool(producer)?;
        let c = self.tool(consumer)?;
        let mut matches = Vec::new();
        for out in &p.outputs {
            for inp in c.inputs.iter().filter(|i| i.semantic_type == out.semantic_type) {
                matches.push(FieldMatch {
                    output: out.name.clone(),
                    input: inp.name.clone(),
                    semantic_type: out.semantic_type.clone(),
                });
            }
        }
        Ok(matches)
    }

    /// JSON array of descriptors in name order.
    pub fn render_catalog(&self) -> String {
        let descriptors: Vec<&ToolDescriptor> = self.tools.values().map(|h| h.as_ref()).collect();
        serde_json::to_string_pretty(&descriptors).expect("descriptors serialize")
    }

    /// The same catalog as prompt prose. Empty registry renders as an empty string.
    pub fn render_catalog_prose(&self) -> String {
        let mut out = String::new();
        for d in self.tools.values() {
            let fields = |fs: &[FieldSpec]| {
                if fs.is_empty() {
                    return "none".to_string();
                }
                fs.iter()
                    .map(|f| {
                        format!(
                            "{}: {}{}",
                            f.name,
                            f.semantic_type,
                            if f.required { "" } else { " (optional)" }
                        )
                    })
                    .collect::<Vec<_>>()
                    .join(", ")
            };
            let _ = writeln!(out, "- {}: {}", d.name, d.description);
            let _ = writeln!(out, "  inputs: {}", fields(&d.inputs));
            let _ = writeln!(out, "  outputs: {}", fields(&d.outputs));
            let scope = match d.temporal_scope {
                TemporalScope::Instant => "instant",
                TemporalScope::Interval => "interval",
                TemporalScope::None => "none",
            };
            let _ = writeln!(out, "  temporal scope: {scope}");
            if !d.invocation_contexts.is_empty() {
                let _ = writeln!(out, "  contexts: {}", d.invocation_contexts.join(", "));
            }
        }
        out
    }
}

/// Structural check of a JSON value against a seed semantic type.
///
/// Tags added through configuration have no known shape and always pass.
pub fn value_matches_type(semantic_type: &str, value: &Value) -> bool {
    match semantic_type {
        "aoi-polygon" => value
            .as_array()
            .map(|vs| {
                vs.len() >= 3
                    && vs.iter().all(|v| {
                        v.as_array()
                            .map(|p| p.len() == 2 && p.iter().all(Value::is_number))
                            .unwrap_or(false)
                    })
            })
            .unwrap_or(false),
        "water-body-name" | "document-context" | "report-text" => value.is_string(),
        "time-window" => value.get("start").map(Value::is_string).unwrap_or(false)
            && value.get("stop").map(Value::is_string).unwrap_or(false),
        "scene-list" => value.is_array(),
        "index-raster" | "weather-series" | "bloom-severity" => value.is_object(),
        "ndci-value" | "ndwi-value" => value
            .as_f64()
            .map(|x| (-1.0..=1.0).contains(&x))
            .unwrap_or(false),
        "chl-a-ug-per-l" => value.as_f64().map(|x| x >= 0.0).unwrap_or(false),
        _ => true,
    }
}
