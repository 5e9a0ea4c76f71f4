use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::geo::Polygon;
use crate::transport::HttpTransport;
use crate::window::TimeWindow;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub id: String,
    pub date: NaiveDate,
    pub tile_id: String,
    pub cloud_cover: f64,
    pub footprint: Polygon,
    /// Band name to file locator (path relative to the asset root, or URL).
    pub assets: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CatalogError {
    #[error("catalog unavailable: {0}")]
    CatalogUnavailable(String),
    #[error("window start {start} is after stop {stop}")]
    InvalidWindow { start: NaiveDate, stop: NaiveDate },
    #[error("area of interest is degenerate")]
    DegenerateAoi,
    #[error("catalog data malformed: {0}")]
    Malformed(String),
}

/// Source of scene metadata. Implementations may over-return; [`search_scenes`] filters.
pub trait SceneCatalog: Send + Sync {
    fn query(&self, aoi: &Polygon, window: &TimeWindow) -> Result<Vec<SceneRecord>, CatalogError>;
}

/// Scenes intersecting `aoi` and acquired within `start..=stop`, oldest first.
pub fn search_scenes(
    aoi: &Polygon,
    start: NaiveDate,
    stop: NaiveDate,
    catalog: &dyn SceneCatalog,
) -> Result<Vec<SceneRecord>, CatalogError> {
    let window = TimeWindow::new(start, stop).map_err(|_| CatalogError::InvalidWindow { start, stop })?;
    if aoi.is_degenerate() {
        return Err(CatalogError::DegenerateAoi);
    }
    let mut scenes: Vec<SceneRecord> = catalog
        .query(aoi, &window)?
        .into_iter()
        .filter(|s| window.contains(s.date) && s.footprint.intersects(aoi))
        .collect();
    scenes.sort_by(|a, b| a.date.cmp(&b.date).then_with(|| a.id.cmp(&b.id)));
    Ok(scenes)
}

/// Lowest cloud cover, then most recent, then smallest id.
pub fn best_scene(scenes: &[SceneRecord]) -> Option<&SceneRecord> {
    scenes.iter().min_by(|a, b| {
        a.cloud_cover
            .total_cmp(&b.cloud_cover)
            .then(b.date.cmp(&a.date))
            .then(a.id.cmp(&b.id))
    })
}

/// JSON array of scene records held in memory.
#[derive(Debug, Clone, Default)]
pub struct MockCatalog {
    scenes: Vec<SceneRecord>,
    offline: bool,
}

impl MockCatalog {
    pub fn new(scenes: Vec<SceneRecord>) -> Result<Self, CatalogError> {
        if let Some(s) = scenes.iter().find(|s| !(0.0..=100.0).contains(&s.cloud_cover)) {
            return Err(CatalogError::Malformed(format!("scene {} cloud cover {}", s.id, s.cloud_cover)));
        }
        Ok(Self { scenes, offline: false })
    }

    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        Self::new(serde_json::from_str(text).map_err(|e| CatalogError::Malformed(e.to_string()))?)
    }

    pub fn load(path: &Path) -> Result<Self, CatalogError> {
        let text = std::fs::read_to_string(path).map_err(|e| CatalogError::Malformed(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn offline() -> Self {
        Self {
            scenes: Vec::new(),
            offline: true,
        }
    }

    pub fn scenes(&self) -> &[SceneRecord] {
        &self.scenes
    }
}

impl SceneCatalog for MockCatalog {
    fn query(&self, _aoi: &Polygon, _window: &TimeWindow) -> Result<Vec<SceneRecord>, CatalogError> {
        if self.offline {
            return Err(CatalogError::CatalogUnavailable("mock catalog offline".into()));
        }
        Ok(self.scenes.clone())
    }
}

/// STAC item search (`POST /search`) over a Sentinel-2 L2A collection.
pub struct StacCatalog {
    pub search_url: String,
    pub collection: String,
    pub timeout: Duration,
    transport: Arc<dyn HttpTransport>,
}

impl StacCatalog {
    pub fn new(search_url: &str, transport: Arc<dyn HttpTransport>) -> Self {
        Self {
            search_url: search_url.to_string(),
            collection: "sentinel-2-l2a".into(),
            timeout: Duration::from_secs(30),
            transport,
        }
    }

    pub fn request_body(&self, aoi: &Polygon, window: &TimeWindow) -> Value {
        let b = aoi.bbox();
        json!({
            "collections": [self.collection],
            "bbox": [b.min_lon, b.min_lat, b.max_lon, b.max_lat],
            "datetime": format!("{}T00:00:00Z/{}T23:59:59Z", window.start(), window.stop()),
            "limit": 100,
        })
    }

    fn parse_feature(f: &Value) -> Result<SceneRecord, String> {
        let id = f["id"].as_str().ok_or("feature without id")?.to_string();
        let props = &f["properties"];
        let datetime = props["datetime"].as_str().ok_or("feature without datetime")?;
        let date: NaiveDate = datetime.get(..10).unwrap_or("").parse().map_err(|e| format!("{id}: {e}"))?;
        let ring: Vec<[f64; 2]> = serde_json::from_value(f["geometry"]["coordinates"][0].clone())
            .map_err(|e| format!("{id} geometry: {e}"))?;
        let assets = f["assets"]
            .as_object()
            .map(|m| {
                m.iter()
                    .filter_map(|(k, v)| v["href"].as_str().map(|h| (k.clone(), h.to_string())))
                    .collect()
            })
            .unwrap_or_default();
        Ok(SceneRecord {
            id,
            date,
            tile_id: props["s2:mgrs_tile"].as_str().unwrap_or("").to_string(),
            cloud_cover: props["eo:cloud_cover"].as_f64().unwrap_or(100.0),
            footprint: Polygon(ring),
            assets,
        })
    }
}

impl SceneCatalog for StacCatalog {
    fn query(&self, aoi: &Polygon, window: &TimeWindow) -> Result<Vec<SceneRecord>, CatalogError> {
        let v = self
            .transport
            .post_json(&self.search_url, &self.request_body(aoi, window), self.timeout)
            .map_err(|e| CatalogError::CatalogUnavailable(e.to_string()))?;
        v["features"]
            .as_array()
            .ok_or_else(|| CatalogError::Malformed("search answer has no features".into()))?
            .iter()
            .map(|f| Self::parse_feature(f).map_err(CatalogError::Malformed))
            .collect()
    }
}
