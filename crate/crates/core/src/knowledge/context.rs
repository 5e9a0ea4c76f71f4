use std::fmt;

use serde::{Deserialize, Serialize};

use super::store::RetrievedDocument;

/// Pipeline stage a context block is injected into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Planning,
    Tool,
    Report,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Planning => "planning",
            Stage::Tool => "tool",
            Stage::Report => "report",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub fn context_header(stage: Stage) -> String {
    format!("### Retrieved context [stage: {stage}]\n")
}

/// Concatenates ranked documents under a stage header, stopping at the first
/// document that would push the body past `budget` characters.
pub fn inject_context(stage: Stage, docs: &[RetrievedDocument], budget: usize) -> String {
    let mut body = String::new();
    let mut used = 0usize;
    for d in docs {
        let block = format!("[{}] {}\n{}\n\n", d.result.rank, d.document.title, d.document.body.trim());
        let len = block.chars().count();
        if used + len > budget {
            break;
        }
        used += len;
        body.push_str(&block);
    }
    if body.is_empty() {
        return String::new();
    }
    let mut out = context_header(stage);
    out.push_str(&body);
    out
}
