//! Query intake and plan synthesis.
//!
//! A raw question is rewritten into a monitoring task, its place and dates are
//! extracted into [`QueryParameters`], and a draft [`PlanGraph`] is requested
//! from the language model. Drafts that fail validation go through a bounded
//! repair loop.

mod gazetteer;
pub mod prompts;
mod provider;

use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geo::Polygon;
use crate::registry::ToolRegistry;
use crate::window::TimeWindow;
use crate::workflow::{validate, PlanGraph, PlanNode, ValidatedPlan, ValidationReport};

pub use gazetteer::{normalize_name, Gazetteer, GazetteerEntry, GazetteerError};
pub use provider::{
    prompt_hash, stage_of, HttpProvider, LanguageModel, ProviderError, RecordedPrompt, RecordingProvider, Script,
    ScriptEntry, ScriptedProvider,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expertise {
    Novice,
    #[default]
    Practitioner,
    Expert,
}

impl Expertise {
    pub fn as_str(self) -> &'static str {
        match self {
            Expertise::Novice => "novice",
            Expertise::Practitioner => "practitioner",
            Expertise::Expert => "expert",
        }
    }
}

impl fmt::Display for Expertise {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Expertise {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_lowercase().as_str() {
            "novice" => Ok(Expertise::Novice),
            "practitioner" => Ok(Expertise::Practitioner),
            "expert" => Ok(Expertise::Expert),
            other => Err(format!("unknown expertise `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserQuery {
    pub id: String,
    pub original: String,
    pub rewritten: String,
    #[serde(default)]
    pub expertise: Expertise,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QueryParameters {
    pub water_body_name: Option<String>,
    /// Lon/lat vertices. When present this wins over the water-body name.
    pub aoi: Option<Polygon>,
    pub window: Option<TimeWindow>,
    /// Expertise the model read from the phrasing, if any.
    pub expertise: Option<Expertise>,
}

#[derive(Debug, thiserror::Error)]
pub enum PlanningError {
    #[error("query is empty")]
    EmptyQuery,
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error("parameter extraction did not return valid JSON: {raw}")]
    UnparseableExtraction { raw: String },
    #[error("unknown water body `{0}` and no coordinates given")]
    UnknownWaterBody(String),
    #[error("extracted window is invalid: {0}")]
    InvalidWindow(String),
    #[error("tool catalog is empty")]
    EmptyCatalog,
    #[error("plan is not valid plan JSON: {reason}")]
    UnparseablePlan { reason: String },
    #[error("plan still invalid after {attempts} repair attempt(s):\n{}", .report.describe())]
    PlanningExhausted { report: ValidationReport, attempts: u32 },
    #[error("max_attempts must be at least 1")]
    InvalidAttempts,
}

/// First `{...}` span in a completion, ignoring code fences and chatter.
pub(crate) fn json_object(text: &str) -> Option<&str> {
    let start = text.find('{')?;
    let end = text.rfind('}')?;
    (end > start).then(|| &text[start..=end])
}

fn complete_nonempty(
    provider: &dyn LanguageModel,
    (system, user): (String, String),
    temperature: f64,
) -> Result<String, PlanningError> {
    let text = provider.complete(&system, &user, temperature)?;
    let text = text.trim();
    if text.is_empty() {
        return Err(ProviderError::EmptyCompletion.into());
    }
    Ok(text.to_string())
}

pub fn rewrite_query(raw: &str, provider: &dyn LanguageModel) -> Result<UserQuery, PlanningError> {
    rewrite_query_with_id(raw, &uuid::Uuid::new_v4().to_string(), provider)
}

/// Like [`rewrite_query`] with a caller-chosen run id.
pub fn rewrite_query_with_id(raw: &str, id: &str, provider: &dyn LanguageModel) -> Result<UserQuery, PlanningError> {
    if raw.trim().is_empty() {
        return Err(PlanningError::EmptyQuery);
    }
    let rewritten = complete_nonempty(provider, prompts::rewrite(raw), prompts::STRUCTURED_TEMPERATURE)?;
    Ok(UserQuery {
        id: id.to_string(),
        original: raw.to_string(),
        rewritten,
        expertise: Expertise::default(),
    })
}

#[derive(Deserialize)]
struct ExtractionAnswer {
    #[serde(default)]
    water_body_name: Option<String>,
    #[serde(default)]
    lat_lon_polygon: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    start_date: Option<NaiveDate>,
    #[serde(default)]
    stop_date: Option<NaiveDate>,
    #[serde(default)]
    expertise: Option<Expertise>,
}

fn parse_extraction(text: &str) -> Option<ExtractionAnswer> {
    let answer: ExtractionAnswer = serde_json::from_str(json_object(text)?).ok()?;
    if let Some(p) = &answer.lat_lon_polygon {
        if p.len() < 3 || p.iter().any(|[lat, lon]| !(-90.0..=90.0).contains(lat) || !(-180.0..=180.0).contains(lon)) {
            return None;
        }
    }
    Some(answer)
}

/// Asks for the structured parameters and resolves names through the gazetteer.
///
/// A window needs both dates; a lone date is dropped rather than stretched.
pub fn extract_parameters(
    q: &UserQuery,
    provider: &dyn LanguageModel,
    gazetteer: &Gazetteer,
) -> Result<QueryParameters, PlanningError> {
    let first = complete_nonempty(
        provider,
        prompts::extract(&q.original, &q.rewritten),
        prompts::STRUCTURED_TEMPERATURE,
    )?;
    let answer = match parse_extraction(&first) {
        Some(a) => a,
        None => {
            let second = complete_nonempty(
                provider,
                prompts::extract_reask(&q.original, &q.rewritten, &first),
                prompts::STRUCTURED_TEMPERATURE,
            )?;
            parse_extraction(&second).ok_or(PlanningError::UnparseableExtraction { raw: second })?
        }
    };

    let window = match (answer.start_date, answer.stop_date) {
        (Some(start), Some(stop)) => {
            Some(TimeWindow::new(start, stop).map_err(|e| PlanningError::InvalidWindow(e.to_string()))?)
        }
        _ => None,
    };
    let name = answer
        .water_body_name
        .map(|n| n.trim().to_string())
        .filter(|n| !n.is_empty());
    let mut aoi = answer
        .lat_lon_polygon
        .map(|pts| Polygon(pts.into_iter().map(|[lat, lon]| [lon, lat]).collect()));
    let mut water_body_name = name.clone();
    if let Some(n) = &name {
        match gazetteer.resolve(n) {
            Some((canonical, entry)) => {
                water_body_name = Some(canonical.to_string());
                if aoi.is_none() {
                    aoi = Some(entry.polygon.clone());
                }
            }
            None if aoi.is_none() => return Err(PlanningError::UnknownWaterBody(n.clone())),
            None => {}
        }
    }
    Ok(QueryParameters {
        water_body_name,
        aoi,
        window,
        expertise: answer.expertise,
    })
}

fn parameters_json(params: &QueryParameters) -> String {
    serde_json::json!({
        "water_body_name": params.water_body_name,
        "aoi": params.aoi,
        "window": params.window,
    })
    .to_string()
}

#[derive(Deserialize)]
struct DraftPlan {
    nodes: Vec<PlanNode>,
    #[serde(default)]
    edges: Vec<(String, String)>,
}

fn parse_plan(text: &str, run_id: &str) -> Result<PlanGraph, PlanningError> {
    let block = json_object(text).ok_or_else(|| PlanningError::UnparseablePlan {
        reason: "no JSON object in answer".into(),
    })?;
    let draft: DraftPlan = serde_json::from_str(block).map_err(|e| PlanningError::UnparseablePlan {
        reason: e.to_string(),
    })?;
    Ok(PlanGraph {
        run_id: run_id.to_string(),
        nodes: draft.nodes,
        edges: draft.edges,
    })
}

/// Fills `aoi`, `window` and water-body inputs left empty by the model.
fn populate_params(graph: &mut PlanGraph, params: &QueryParameters, registry: &ToolRegistry) {
    for node in &mut graph.nodes {
        let Some(tool) = registry.get_tool(&node.tool) else { continue };
        for input in &tool.inputs {
            if node.params.contains_key(&input.name) {
                continue;
            }
            let value: Option<Value> = match input.semantic_type.as_str() {
                "aoi-polygon" => params.aoi.as_ref().map(|p| serde_json::to_value(p).unwrap()),
                "time-window" => params.window.map(|w| w.to_value()),
                "water-body-name" => params.water_body_name.clone().map(Value::String),
                _ => None,
            };
            if let Some(v) = value {
                node.params.insert(input.name.clone(), v);
            }
        }
    }
}

/// Asks the model for a draft plan. The draft is not validated here.
pub fn synthesize_plan(
    q: &UserQuery,
    params: &QueryParameters,
    registry: &ToolRegistry,
    context: &str,
    feedback: &str,
    provider: &dyn LanguageModel,
) -> Result<PlanGraph, PlanningError> {
    if registry.is_empty() {
        return Err(PlanningError::EmptyCatalog);
    }
    let catalog = registry.render_catalog();
    let parameters = parameters_json(params);
    let prompt = prompts::plan(&prompts::PlanPromptInput {
        run_id: &q.id,
        original: &q.original,
        rewritten: &q.rewritten,
        parameters: &parameters,
        catalog: &catalog,
        context,
        feedback,
    });
    let text = complete_nonempty(provider, prompt, prompts::STRUCTURED_TEMPERATURE)?;
    let mut graph = parse_plan(&text, &q.id)?;
    populate_params(&mut graph, params, registry);
    Ok(graph)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepairOutcome {
    pub plan: ValidatedPlan,
    /// Provider calls spent; 0 when the draft was already valid.
    pub attempts: u32,
}

/// Re-prompts with the validation errors until a draft validates.
///
/// Unparseable answers count as attempts and leave the last report in place.
pub fn repair_plan(
    draft: PlanGraph,
    errors: &ValidationReport,
    q: &UserQuery,
    params: &QueryParameters,
    registry: &ToolRegistry,
    provider: &dyn LanguageModel,
    max_attempts: u32,
) -> Result<RepairOutcome, PlanningError> {
    if max_attempts == 0 {
        return Err(PlanningError::InvalidAttempts);
    }
    // the caller's report may be stale; the validator has the final word
    let report = validate(&draft, registry);
    if report.ok {
        let plan = ValidatedPlan::new(draft, registry).expect("validated");
        return Ok(RepairOutcome { plan, attempts: 0 });
    }
    if report != *errors {
        tracing::debug!("caller-supplied validation report differs from a fresh validation");
    }
    repair_loop(draft, report, q, params, registry, provider, max_attempts)
}

fn repair_loop(
    draft: PlanGraph,
    mut report: ValidationReport,
    q: &UserQuery,
    params: &QueryParameters,
    registry: &ToolRegistry,
    provider: &dyn LanguageModel,
    max_attempts: u32,
) -> Result<RepairOutcome, PlanningError> {
    let catalog = registry.render_catalog();
    let mut current = draft.to_json();
    for attempt in 1..=max_attempts {
        let prompt = prompts::repair(&catalog, &q.rewritten, &current, &report, attempt, max_attempts);
        let text = complete_nonempty(provider, prompt, prompts::STRUCTURED_TEMPERATURE)?;
        let mut graph = match parse_plan(&text, &q.id) {
            Ok(g) => g,
            Err(e) => {
                tracing::debug!(attempt, error = %e, "repair answer unparseable");
                continue;
            }
        };
        populate_params(&mut graph, params, registry);
        let next = validate(&graph, registry);
        if next.ok {
            let plan = ValidatedPlan::new(graph, registry).expect("validated twice");
            return Ok(RepairOutcome { plan, attempts: attempt });
        }
        current = graph.to_json();
        report = next;
    }
    Err(PlanningError::PlanningExhausted {
        report,
        attempts: max_attempts,
    })
}
