//! Grouping of trace artifacts into report sections and their factual lines.

use std::collections::BTreeSet;

use serde_json::Value;

use crate::aquatools::{weather_summary_value, BloomPrediction, IndexStats, SceneRecord};
use crate::executor::{ExecutionTrace, Resolution, TypedValue};

pub const OVERVIEW: &str = "Overview";
pub const OBSERVATIONS: &str = "Observations";
pub const INDICES: &str = "Indices";
pub const PREDICTIONS: &str = "Predictions";
pub const WEATHER_CONTEXT: &str = "Weather context";
pub const CAVEATS: &str = "Caveats";
/// Heading reflection verdicts use to flag the summary.
pub const SUMMARY: &str = "Summary";

/// Thematic groups in report order. Caveats are built from failures, not artifacts.
pub const THEMES: [&str; 5] = [OVERVIEW, OBSERVATIONS, INDICES, PREDICTIONS, WEATHER_CONTEXT];

/// Section a semantic type belongs to. Unknown types land in the overview.
pub fn theme_of(semantic_type: &str) -> &'static str {
    match semantic_type {
        "scene-list" | "water-body-name" | "aoi-polygon" | "time-window" => OBSERVATIONS,
        "index-raster" | "ndci-value" | "ndwi-value" | "chl-a-ug-per-l" => INDICES,
        "bloom-severity" | "document-context" => PREDICTIONS,
        "weather-series" => WEATHER_CONTEXT,
        _ => OVERVIEW,
    }
}

/// Facts and source nodes gathered for one heading.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Material {
    pub facts: Vec<String>,
    pub sources: BTreeSet<String>,
}

/// Collects per-theme material from every artifact-bearing entry, in trace order.
pub fn gather(trace: &ExecutionTrace) -> Vec<(&'static str, Material)> {
    let mut out: Vec<(&'static str, Material)> = THEMES.iter().map(|t| (*t, Material::default())).collect();
    for entry in &trace.entries {
        let Some(artifact) = &entry.artifact else { continue };
        for (name, typed) in &artifact.fields {
            let theme = theme_of(&typed.semantic_type);
            let slot = &mut out.iter_mut().find(|(t, _)| *t == theme).unwrap().1;
            slot.sources.insert(entry.node_id.clone());
            slot.facts.extend(describe(&entry.node_id, name, typed));
        }
        if artifact.fields.is_empty() {
            out[0].1.sources.insert(entry.node_id.clone());
        }
    }
    out
}

/// Failure and substitution notes for the caveats section.
pub fn caveats(trace: &ExecutionTrace) -> Material {
    let mut m = Material::default();
    for e in &trace.entries {
        match e.resolution {
            Resolution::Failed => {
                let why = e.failure_messages().last().unwrap_or("no result");
                m.facts.push(format!("node `{}` ({}) failed: {why}", e.node_id, e.tool));
                m.sources.insert(e.node_id.clone());
            }
            Resolution::ReplacedByFallback => {
                let primary = e.replaces.as_deref().unwrap_or("?");
                m.facts
                    .push(format!("node `{}` ({}) stood in for failed node `{primary}`", e.node_id, e.tool));
                m.sources.insert(e.node_id.clone());
            }
            Resolution::SkippedCached => {
                m.facts.push(format!("node `{}` ({}) reused a cached result", e.node_id, e.tool));
                m.sources.insert(e.node_id.clone());
            }
            Resolution::Executed => {}
        }
    }
    m
}

fn describe(node: &str, field: &str, typed: &TypedValue) -> Vec<String> {
    let v = &typed.value;
    let line = match typed.semantic_type.as_str() {
        "scene-list" => match serde_json::from_value::<Vec<SceneRecord>>(v.clone()) {
            Ok(scenes) if scenes.is_empty() => "no scenes found".to_string(),
            Ok(scenes) => format!(
                "{} scene(s) from {} to {}: {}",
                scenes.len(),
                scenes.first().unwrap().date,
                scenes.last().unwrap().date,
                scenes.iter().map(|s| format!("{} ({:.0}% cloud)", s.id, s.cloud_cover)).collect::<Vec<_>>().join(", ")
            ),
            Err(_) => format!("{} scene(s)", v.as_array().map(Vec::len).unwrap_or(0)),
        },
        "ndci-value" => format!("NDCI = {}", number(v, 4)),
        "ndwi-value" => format!("NDWI = {}", number(v, 4)),
        "chl-a-ug-per-l" => format!("chlorophyll-a = {} ug/L", number(v, 2)),
        "index-raster" => match serde_json::from_value::<IndexStats>(v.clone()) {
            Ok(s) => format!(
                "{:?} zonal mean {:.4}, max {:.4} over {} pixels from {} ({})",
                s.index,
                s.mean,
                s.max,
                s.pixels,
                s.scene_ids.join(", "),
                s.date
            ),
            Err(_) => compact(v),
        },
        "bloom-severity" => match serde_json::from_value::<BloomPrediction>(v.clone()) {
            Ok(b) => format!(
                "bloom severity {} on {} ({:.0} cells/mL)",
                value_str(&serde_json::to_value(b.severity).unwrap()),
                b.date,
                b.density_cells_per_ml
            ),
            Err(_) => compact(v),
        },
        "weather-series" => weather_summary_value(v).unwrap_or_else(|| compact(v)),
        "document-context" | "report-text" | "water-body-name" => {
            return v
                .as_str()
                .unwrap_or_default()
                .lines()
                .filter(|l| !l.trim().is_empty())
                .map(|l| l.trim().to_string())
                .collect()
        }
        _ => compact(v),
    };
    vec![format!("{line} [{node}.{field}]")]
}

fn number(v: &Value, places: usize) -> String {
    v.as_f64().map(|x| format!("{x:.places$}")).unwrap_or_else(|| compact(v))
}

fn value_str(v: &Value) -> String {
    v.as_str().map(str::to_string).unwrap_or_else(|| compact(v))
}

fn compact(v: &Value) -> String {
    serde_json::to_string(v).unwrap_or_default()
}
