//! Tool handlers and binding dispatch.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use crate::registry::Binding;
use crate::transport::{join_url, HttpTransport};

pub type ToolValues = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ToolError {
    #[error("service unavailable: {0}")]
    Unavailable(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("{0}")]
    Failed(String),
}

/// An in-process tool implementation.
pub trait ToolHandler: Send + Sync {
    fn call(&self, inputs: &ToolValues) -> Result<ToolValues, ToolError>;
}

impl<F> ToolHandler for F
where
    F: Fn(&ToolValues) -> Result<ToolValues, ToolError> + Send + Sync,
{
    fn call(&self, inputs: &ToolValues) -> Result<ToolValues, ToolError> {
        self(inputs)
    }
}

/// In-process handlers keyed by the handler id named in a tool binding.
#[derive(Clone, Default)]
pub struct HandlerTable {
    handlers: BTreeMap<String, Arc<dyn ToolHandler>>,
}

impl HandlerTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, id: &str, handler: impl ToolHandler + 'static) {
        self.handlers.insert(id.to_string(), Arc::new(handler));
    }

    pub fn insert_arc(&mut self, id: &str, handler: Arc<dyn ToolHandler>) {
        self.handlers.insert(id.to_string(), handler);
    }

    pub fn get(&self, id: &str) -> Option<&Arc<dyn ToolHandler>> {
        self.handlers.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.handlers.keys().map(String::as_str)
    }
}

impl std::fmt::Debug for HandlerTable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.handlers.keys()).finish()
    }
}

/// Performs one invocation of a binding.
pub(crate) fn invoke(
    binding: &Binding,
    inputs: &ToolValues,
    handlers: &HandlerTable,
    transport: &dyn HttpTransport,
    default_timeout: Duration,
) -> Result<ToolValues, String> {
    match binding {
        Binding::InProcess { handler } => {
            let h = handlers
                .get(handler)
                .ok_or_else(|| format!("no in-process handler `{handler}`"))?;
            h.call(inputs).map_err(|e| e.to_string())
        }
        Binding::Remote {
            base_url,
            path,
            timeout_secs,
        } => {
            let url = join_url(base_url, path);
            let timeout = if *timeout_secs == 0 {
                default_timeout
            } else {
                Duration::from_secs(*timeout_secs)
            };
            let response = transport
                .post_json(&url, &json!({ "inputs": inputs }), timeout)
                .map_err(|e| match e {
                    crate::transport::TransportError::Status { status, body, .. } => {
                        let msg = serde_json::from_str::<Value>(&body)
                            .ok()
                            .and_then(|v| v.get("error").and_then(Value::as_str).map(str::to_string))
                            .unwrap_or(body);
                        format!("remote tool returned HTTP {status}: {msg}")
                    }
                    other => other.to_string(),
                })?;
            match response.get("outputs") {
                Some(Value::Object(map)) => Ok(map.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
                _ => Err(format!("remote tool at {url} answered without an `outputs` object")),
            }
        }
    }
}
