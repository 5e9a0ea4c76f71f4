use std::fmt;

use serde::Serialize;

use super::{resolve_inputs, InputBinding, InputSource, NodeKind, PrunedPlan, ValidatedPlan};
use crate::registry::ToolRegistry;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreviewStep {
    pub position: usize,
    pub node_id: String,
    pub tool: String,
    pub kind: NodeKind,
    pub status: &'static str,
    pub inputs: Vec<InputBinding>,
}

/// Dry-run view of a plan: execution order plus where each input comes from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanPreview {
    pub run_id: String,
    pub order: Vec<String>,
    pub steps: Vec<PreviewStep>,
}

pub fn preview(plan: &ValidatedPlan, registry: &ToolRegistry) -> PlanPreview {
    preview_pruned(&PrunedPlan::unpruned(plan.clone()), registry)
}

pub fn preview_pruned(pruned: &PrunedPlan, registry: &ToolRegistry) -> PlanPreview {
    let graph = pruned.plan.graph();
    let mut bindings = resolve_inputs(graph, registry);
    let steps = pruned
        .plan
        .order()
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let node = graph.node(id).expect("ordered ids exist");
            PreviewStep {
                position: i + 1,
                node_id: id.clone(),
                tool: node.tool.clone(),
                kind: node.kind,
                status: pruned.disposition(id).reason_tag(),
                inputs: bindings.remove(id).unwrap_or_default(),
            }
        })
        .collect();
    PlanPreview {
        run_id: graph.run_id.clone(),
        order: pruned.plan.order().to_vec(),
        steps,
    }
}

impl fmt::Display for PlanPreview {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "plan {} ({} nodes, dry run)", self.run_id, self.steps.len())?;
        for s in &self.steps {
            writeln!(f, "{:>2}. {} [{}] {}", s.position, s.node_id, s.tool, s.status)?;
            for b in &s.inputs {
                let src = match &b.source {
                    InputSource::Literal { value } => {
                        let mut text = value.to_string();
                        if text.len() > 48 {
                            text.truncate(45);
                            text.push_str("...");
                        }
                        format!("literal {text}")
                    }
                    InputSource::Reference { node, field } => format!("${node}.{field}"),
                    InputSource::Inferred { node, field } => format!("inferred from {node}.{field}"),
                    InputSource::Missing if b.required => "MISSING".to_string(),
                    InputSource::Missing => "absent (optional)".to_string(),
                };
                writeln!(f, "      {} <- {}", b.field, src)?;
            }
        }
        Ok(())
    }
}
