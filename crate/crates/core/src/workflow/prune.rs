use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{NodeKind, ValidatedPlan, WorkflowError};
use crate::executor::{Artifact, Provenance};

/// `(tool name, canonical params)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CacheKey {
    pub tool: String,
    pub params: String,
}

impl CacheKey {
    pub fn new(tool: &str, params: &BTreeMap<String, Value>) -> Self {
        Self {
            tool: tool.to_string(),
            params: canonical_params(params),
        }
    }
}

pub type ArtifactCache = BTreeMap<CacheKey, Artifact>;

/// Compact JSON with keys sorted at every depth.
pub fn canonical_params(params: &BTreeMap<String, Value>) -> String {
    // serde_json's Map is ordered by key unless `preserve_order` is enabled
    serde_json::to_string(params).expect("params serialize")
}

/// What the executor should do with a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "disposition", rename_all = "snake_case")]
pub enum Disposition {
    Scheduled,
    SkippedCached { artifact: Artifact },
    /// Tool is down. With a fallback, that node runs in its place.
    Unavailable { fallback: Option<String> },
    /// Fallback that only runs if its primary fails.
    Standby { primary: String },
    /// Fallback whose primary is known to be unavailable.
    FallbackActivated { primary: String },
}

impl Disposition {
    pub fn reason_tag(&self) -> &'static str {
        match self {
            Disposition::Scheduled => "scheduled",
            Disposition::SkippedCached { .. } => "skipped:cached",
            Disposition::Unavailable { fallback: Some(_) } => "unavailable:fallback",
            Disposition::Unavailable { fallback: None } => "unavailable",
            Disposition::Standby { .. } => "standby:fallback",
            Disposition::FallbackActivated { .. } => "fallback:activated",
        }
    }
}

/// A validated plan annotated with per-node dispositions. Topology is untouched.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedPlan {
    pub plan: ValidatedPlan,
    pub dispositions: BTreeMap<String, Disposition>,
}

impl PrunedPlan {
    /// Everything scheduled, fallbacks on standby.
    pub fn unpruned(plan: ValidatedPlan) -> Self {
        let dispositions = plan
            .graph()
            .nodes
            .iter()
            .map(|n| {
                let d = match &n.fallback_for {
                    Some(p) => Disposition::Standby { primary: p.clone() },
                    None => Disposition::Scheduled,
                };
                (n.id.clone(), d)
            })
            .collect();
        Self { plan, dispositions }
    }

    pub fn disposition(&self, node: &str) -> &Disposition {
        &self.dispositions[node]
    }
}

/// Marks cached nodes as skipped and routes unavailable tools to their fallbacks.
pub fn prune(
    plan: &ValidatedPlan,
    cache: &ArtifactCache,
    availability: &BTreeMap<String, bool>,
) -> Result<PrunedPlan, WorkflowError> {
    let graph = plan.graph();
    let available = |tool: &str| availability.get(tool).copied().unwrap_or(true);
    let fallbacks = plan.fallbacks();
    let succs = graph.successors();
    let mut out = PrunedPlan::unpruned(plan.clone());

    for node in &graph.nodes {
        if node.fallback_for.is_some() {
            continue;
        }
        if node.skip_if_cached {
            if let Some(hit) = cache.get(&CacheKey::new(&node.tool, &node.params)) {
                let mut artifact = hit.clone();
                artifact.producer = node.id.clone();
                artifact.provenance = Provenance::Cached;
                out.dispositions
                    .insert(node.id.clone(), Disposition::SkippedCached { artifact });
                continue;
            }
        }
        if available(&node.tool) {
            continue;
        }
        let usable_fallback = fallbacks
            .get(&node.id)
            .filter(|f| graph.node(f).map(|fnode| available(&fnode.tool)).unwrap_or(false))
            .cloned();
        match usable_fallback {
            Some(f) => {
                out.dispositions.insert(
                    node.id.clone(),
                    Disposition::Unavailable {
                        fallback: Some(f.clone()),
                    },
                );
                out.dispositions.insert(
                    f,
                    Disposition::FallbackActivated {
                        primary: node.id.clone(),
                    },
                );
            }
            None => {
                let needed = node.kind == NodeKind::Report
                    || succs.get(node.id.as_str()).map(|s| !s.is_empty()).unwrap_or(false);
                if needed {
                    return Err(WorkflowError::UnskippableUnavailable {
                        node: node.id.clone(),
                        tool: node.tool.clone(),
                    });
                }
                out.dispositions
                    .insert(node.id.clone(), Disposition::Unavailable { fallback: None });
            }
        }
    }
    Ok(out)
}
