use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::geo::Polygon;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GazetteerEntry {
    pub polygon: Polygon,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surface_area_km2: Option<f64>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Full(GazetteerEntry),
    Bare(Polygon),
}

#[derive(Debug, thiserror::Error)]
#[error("gazetteer: {0}")]
pub struct GazetteerError(pub String);

/// Water-body names resolved to outline polygons.
///
/// Lookups ignore case, surrounding whitespace and a leading or trailing "lake".
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Gazetteer {
    entries: BTreeMap<String, (String, GazetteerEntry)>,
}

pub fn normalize_name(name: &str) -> String {
    let lower = name.trim().to_lowercase();
    let words: Vec<&str> = lower.split_whitespace().collect();
    let trimmed: &[&str] = match words.as_slice() {
        ["lake", rest @ ..] if !rest.is_empty() => rest,
        [rest @ .., "lake"] if !rest.is_empty() => rest,
        all => all,
    };
    trimmed.join(" ")
}

impl Gazetteer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: &str, entry: GazetteerEntry) {
        self.entries.insert(normalize_name(name), (name.to_string(), entry));
    }

    pub fn from_json(text: &str) -> Result<Self, GazetteerError> {
        let raw: BTreeMap<String, RawEntry> = serde_json::from_str(text).map_err(|e| GazetteerError(e.to_string()))?;
        let mut g = Self::new();
        for (name, entry) in raw {
            let entry = match entry {
                RawEntry::Full(e) => e,
                RawEntry::Bare(polygon) => GazetteerEntry {
                    polygon,
                    surface_area_km2: None,
                },
            };
            if entry.polygon.is_degenerate() {
                return Err(GazetteerError(format!("`{name}` has a degenerate polygon")));
            }
            g.insert(&name, entry);
        }
        Ok(g)
    }

    pub fn load(path: &Path) -> Result<Self, GazetteerError> {
        let text = std::fs::read_to_string(path).map_err(|e| GazetteerError(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Canonical name and entry.
    pub fn resolve(&self, name: &str) -> Option<(&str, &GazetteerEntry)> {
        self.entries
            .get(&normalize_name(name))
            .map(|(canonical, e)| (canonical.as_str(), e))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.values().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"{
        "Trichonida": {"polygon": [[21.5, 38.5], [21.7, 38.5], [21.7, 38.6], [21.5, 38.6]], "surface_area_km2": 97.0},
        "Mornos": [[22.0, 38.5], [22.1, 38.5], [22.1, 38.55]]
    }"#;

    #[test]
    fn lookup_is_forgiving_about_case_and_lake() {
        let g = Gazetteer::from_json(SAMPLE).unwrap();
        for q in ["Trichonida", "lake trichonida", "TRICHONIDA LAKE", "  Lake Trichonida "] {
            assert_eq!(g.resolve(q).unwrap().0, "Trichonida");
        }
        assert!(g.resolve("lake atlantis").is_none());
        assert_eq!(g.resolve("mornos").unwrap().1.surface_area_km2, None);
        assert_eq!(normalize_name("Lake"), "lake");
    }

    #[test]
    fn degenerate_polygons_rejected() {
        assert!(Gazetteer::from_json(r#"{"X": [[0,0],[1,1],[2,2]]}"#).is_err());
    }
}
