//! Declarative plan graphs.
//!
//! A [`PlanGraph`] is what the planner emits: nodes naming registered tools and
//! edges meaning "the source's output must exist before the target runs". Graphs
//! are validated ([`validate`]) before anything else may touch them; the
//! [`ValidatedPlan`] wrapper is the proof that happened.

mod order;
mod preview;
mod prune;
mod validate;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::registry::{FieldSpec, ToolRegistry};

pub use order::topological_order;
pub use preview::{preview, preview_pruned, PlanPreview, PreviewStep};
pub use prune::{canonical_params, prune, ArtifactCache, CacheKey, Disposition, PrunedPlan};
pub use validate::{validate, ValidationReport, Violation, ViolationCode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Retrieval,
    Transformation,
    Report,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanNode {
    pub id: String,
    pub tool: String,
    pub kind: NodeKind,
    #[serde(default)]
    pub params: BTreeMap<String, Value>,
    #[serde(default)]
    pub fallback_for: Option<String>,
    #[serde(default)]
    pub skip_if_cached: bool,
}

impl PlanNode {
    pub fn new(id: &str, tool: &str, kind: NodeKind) -> Self {
        Self {
            id: id.to_string(),
            tool: tool.to_string(),
            kind,
            params: BTreeMap::new(),
            fallback_for: None,
            skip_if_cached: false,
        }
    }

    pub fn with_param(mut self, field: &str, value: Value) -> Self {
        self.params.insert(field.to_string(), value);
        self
    }

    pub fn fallback_for(mut self, primary: &str) -> Self {
        self.fallback_for = Some(primary.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanGraph {
    pub run_id: String,
    pub nodes: Vec<PlanNode>,
    #[serde(default)]
    pub edges: Vec<(String, String)>,
}

#[derive(Debug, thiserror::Error)]
pub enum WorkflowError {
    #[error("plan has not passed validation ({} violation(s))", .0.violations.len())]
    NotValidated(ValidationReport),
    #[error("tool `{tool}` for node `{node}` is unavailable, has no fallback, and its outputs are needed downstream")]
    UnskippableUnavailable { node: String, tool: String },
    #[error("plan JSON: {0}")]
    Parse(#[from] serde_json::Error),
}

impl PlanGraph {
    pub fn new(run_id: &str) -> Self {
        Self {
            run_id: run_id.to_string(),
            nodes: Vec::new(),
            edges: Vec::new(),
        }
    }

    pub fn with_node(mut self, node: PlanNode) -> Self {
        self.nodes.push(node);
        self
    }

    pub fn with_edge(mut self, from: &str, to: &str) -> Self {
        self.edges.push((from.to_string(), to.to_string()));
        self
    }

    pub fn node(&self, id: &str) -> Option<&PlanNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WorkflowError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Direct predecessors of every node (only edges whose endpoints exist).
    pub(crate) fn predecessors(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let ids: BTreeSet<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        let mut preds: BTreeMap<&str, BTreeSet<&str>> = ids.iter().map(|id| (*id, BTreeSet::new())).collect();
        for (from, to) in &self.edges {
            if ids.contains(from.as_str()) && ids.contains(to.as_str()) {
                preds.get_mut(to.as_str()).unwrap().insert(from.as_str());
            }
        }
        preds
    }

    pub(crate) fn successors(&self) -> BTreeMap<&str, BTreeSet<&str>> {
        let ids: BTreeSet<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        let mut succs: BTreeMap<&str, BTreeSet<&str>> = ids.iter().map(|id| (*id, BTreeSet::new())).collect();
        for (from, to) in &self.edges {
            if ids.contains(from.as_str()) && ids.contains(to.as_str()) {
                succs.get_mut(from.as_str()).unwrap().insert(to.as_str());
            }
        }
        succs
    }

    /// Ancestors of `id` with their hop distance, excluding `id` itself.
    pub(crate) fn ancestors_with_distance<'a>(
        &'a self,
        preds: &BTreeMap<&'a str, BTreeSet<&'a str>>,
        id: &'a str,
    ) -> BTreeMap<&'a str, usize> {
        let mut dist = BTreeMap::new();
        let mut queue = VecDeque::from([(id, 0usize)]);
        while let Some((cur, d)) = queue.pop_front() {
            if let Some(ps) = preds.get(cur) {
                for p in ps {
                    if *p != id && !dist.contains_key(p) {
                        dist.insert(*p, d + 1);
                        queue.push_back((*p, d + 1));
                    }
                }
            }
        }
        dist
    }
}

/// A `"$node.field"` parameter value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamRef {
    pub node: String,
    pub field: String,
}

impl ParamRef {
    pub fn parse(value: &Value) -> Option<ParamRef> {
        let s = value.as_str()?.strip_prefix('$')?;
        let (node, field) = s.rsplit_once('.')?;
        if node.is_empty() || field.is_empty() {
            return None;
        }
        Some(ParamRef {
            node: node.to_string(),
            field: field.to_string(),
        })
    }

    pub fn render(&self) -> String {
        format!("${}.{}", self.node, self.field)
    }
}

/// Where a node input gets its value from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum InputSource {
    Literal { value: Value },
    Reference { node: String, field: String },
    /// Not named in params; taken from the nearest ancestor producing the type.
    Inferred { node: String, field: String },
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputBinding {
    pub field: String,
    pub semantic_type: String,
    pub required: bool,
    #[serde(flatten)]
    pub source: InputSource,
}

/// Resolves every declared input of every node to a source.
///
/// Unnamed inputs are inferred from the closest ancestor (fewest hops, then node
/// id) whose tool declares an output of the same semantic type.
pub fn resolve_inputs(graph: &PlanGraph, registry: &ToolRegistry) -> BTreeMap<String, Vec<InputBinding>> {
    let preds = graph.predecessors();
    let mut out = BTreeMap::new();
    for node in &graph.nodes {
        let Some(tool) = registry.get_tool(&node.tool) else {
            out.insert(node.id.clone(), Vec::new());
            continue;
        };
        let ancestors = graph.ancestors_with_distance(&preds, &node.id);
        let mut ranked: Vec<(&str, usize)> = ancestors.into_iter().collect();
        ranked.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(b.0)));
        let bindings = tool
            .inputs
            .iter()
            .map(|spec| binding_for(graph, registry, node, spec, &ranked))
            .collect();
        out.insert(node.id.clone(), bindings);
    }
    out
}

fn binding_for(
    graph: &PlanGraph,
    registry: &ToolRegistry,
    node: &PlanNode,
    spec: &FieldSpec,
    ranked_ancestors: &[(&str, usize)],
) -> InputBinding {
    let source = match node.params.get(&spec.name) {
        Some(v) => match ParamRef::parse(v) {
            Some(r) => InputSource::Reference {
                node: r.node,
                field: r.field,
            },
            None => InputSource::Literal { value: v.clone() },
        },
        None => ranked_ancestors
            .iter()
            .find_map(|(id, _)| {
                let producer = graph.node(id)?;
                let tool = registry.get_tool(&producer.tool)?;
                tool.outputs
                    .iter()
                    .find(|o| o.semantic_type == spec.semantic_type)
                    .map(|o| InputSource::Inferred {
                        node: id.to_string(),
                        field: o.name.clone(),
                    })
            })
            .unwrap_or(InputSource::Missing),
    };
    InputBinding {
        field: spec.name.clone(),
        semantic_type: spec.semantic_type.clone(),
        required: spec.required,
        source,
    }
}

/// A plan that passed validation against a registry, with its canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedPlan {
    graph: PlanGraph,
    order: Vec<String>,
}

impl ValidatedPlan {
    pub fn new(graph: PlanGraph, registry: &ToolRegistry) -> Result<Self, WorkflowError> {
        let report = validate(&graph, registry);
        if !report.ok {
            return Err(WorkflowError::NotValidated(report));
        }
        let order = topological_order(&graph)?;
        Ok(Self { graph, order })
    }

    pub fn graph(&self) -> &PlanGraph {
        &self.graph
    }

    pub fn into_graph(self) -> PlanGraph {
        self.graph
    }

    /// Linear extension of the edges, ties broken by node id.
    pub fn order(&self) -> &[String] {
        &self.order
    }

    pub fn run_id(&self) -> &str {
        &self.graph.run_id
    }

    pub fn report_node(&self) -> &PlanNode {
        self.graph
            .nodes
            .iter()
            .find(|n| n.kind == NodeKind::Report)
            .expect("validated plans have a report node")
    }

    /// Fallback node id for each primary.
    pub fn fallbacks(&self) -> BTreeMap<String, String> {
        self.graph
            .nodes
            .iter()
            .filter_map(|n| n.fallback_for.as_ref().map(|p| (p.clone(), n.id.clone())))
            .collect()
    }
}
