//! Descriptors and in-process handlers for the built-in tool suite.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::bloom::{predict_bloom, BloomClient, BloomError, BloomPrediction, BloomThresholds};
use super::catalog::{best_scene, search_scenes, CatalogError, SceneCatalog, SceneRecord};
use super::chlorophyll::ChlorophyllModel;
use super::index::{compute_index, IndexKind};
use super::raster::RasterGrid;
use super::weather::{fetch_weather, WeatherClient, WeatherError, WeatherSeries};
use super::zonal::{zone_values, ZonalError};
use crate::executor::{HandlerTable, ToolError, ToolValues};
use crate::geo::Polygon;
use crate::knowledge::{inject_context, Embedder, KnowledgeStore, Stage};
use crate::registry::{Binding, FieldSpec, RegistryError, TemporalScope, ToolDescriptor, ToolRegistry, TERMINAL_CONTEXT};
use crate::window::TimeWindow;

pub const SCENE_SEARCH: &str = "scene-search";
pub const NDCI_INDEX: &str = "ndci-index";
pub const NDWI_INDEX: &str = "ndwi-index";
pub const CHL_ESTIMATE: &str = "chl-estimate";
pub const BLOOM_PREDICT: &str = "bloom-predict";
pub const WEATHER: &str = "weather";
pub const CLIMATOLOGY: &str = "climatology";
pub const REPORT: &str = "report";

/// How an index tool turns several scenes into one value.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneAggregation {
    /// Lowest cloud cover, then most recent.
    #[default]
    BestScene,
    /// Mean of per-scene zonal means over every usable scene.
    WindowMean,
}

/// Supplies domain notes for enriching raw tool outputs.
pub trait Enricher: Send + Sync {
    fn enrich(&self, query: &str) -> Result<String, String>;
}

/// Retrieves from the tool-stage tanks and formats the hits as a context block.
pub struct KnowledgeEnricher {
    pub store: Arc<KnowledgeStore>,
    pub embedder: Arc<dyn Embedder>,
    pub tanks: Vec<String>,
    pub k: usize,
    pub budget: usize,
}

impl Enricher for KnowledgeEnricher {
    fn enrich(&self, query: &str) -> Result<String, String> {
        if self.k == 0 {
            return Ok(String::new());
        }
        let docs = self
            .store
            .retrieve_across(query, &self.tanks, self.k, self.embedder.as_ref())
            .map_err(|e| e.to_string())?;
        Ok(inject_context(Stage::Tool, &docs, self.budget))
    }
}

/// The tool suite with its service clients.
#[derive(Clone)]
pub struct AquaTools {
    pub catalog: Arc<dyn SceneCatalog>,
    pub weather: Arc<dyn WeatherClient>,
    pub climatology: Arc<dyn WeatherClient>,
    pub bloom: Arc<dyn BloomClient>,
    /// Directory that relative band locators resolve against.
    pub asset_root: PathBuf,
    pub chlorophyll: ChlorophyllModel,
    pub thresholds: BloomThresholds,
    pub aggregation: SceneAggregation,
    pub enricher: Option<Arc<dyn Enricher>>,
}

fn aoi() -> FieldSpec {
    FieldSpec::required("aoi", "aoi-polygon")
}

fn window() -> FieldSpec {
    FieldSpec::required("window", "time-window")
}

fn descriptor(
    name: &str,
    description: &str,
    inputs: Vec<FieldSpec>,
    outputs: Vec<FieldSpec>,
    temporal_scope: TemporalScope,
    contexts: &[&str],
) -> ToolDescriptor {
    ToolDescriptor {
        name: name.to_string(),
        description: description.to_string(),
        inputs,
        outputs,
        temporal_scope,
        invocation_contexts: contexts.iter().map(|s| s.to_string()).collect(),
        binding: Binding::InProcess {
            handler: name.to_string(),
        },
        retry_default: 0,
    }
}

/// Descriptors for every built-in tool, bound to in-process handlers of the same name.
pub fn descriptors() -> Vec<ToolDescriptor> {
    let index_tool = |name: &str, label: &str, field: &str, ty: &str| {
        descriptor(
            name,
            &format!("Computes {label} over the area of interest from the clearest scene and returns its zonal mean, plus mean/max statistics."),
            vec![FieldSpec::required("scenes", "scene-list"), aoi()],
            vec![FieldSpec::required(field, ty), FieldSpec::optional("stats", "index-raster")],
            TemporalScope::Instant,
            &["requires-aoi"],
        )
    };
    vec![
        descriptor(
            SCENE_SEARCH,
            "Finds Sentinel-2 scenes that intersect the area of interest within the time window.",
            vec![aoi(), window()],
            vec![FieldSpec::required("scenes", "scene-list")],
            TemporalScope::Interval,
            &["requires-aoi", "requires-window"],
        ),
        index_tool(NDCI_INDEX, "the Normalized Difference Chlorophyll Index (NDCI)", "ndci", "ndci-value"),
        index_tool(NDWI_INDEX, "the Normalized Difference Water Index (NDWI)", "ndwi", "ndwi-value"),
        descriptor(
            CHL_ESTIMATE,
            "Estimates chlorophyll-a concentration (ug/L) from an NDCI value with an empirical quadratic model.",
            vec![FieldSpec::required("ndci", "ndci-value")],
            vec![FieldSpec::required("chl", "chl-a-ug-per-l")],
            TemporalScope::None,
            &[],
        ),
        descriptor(
            BLOOM_PREDICT,
            "Asks the bloom-prediction service for cyanobacteria density at the area's centroid on the last day of the window and adds guidance notes.",
            vec![aoi(), window()],
            vec![FieldSpec::required("bloom", "bloom-severity"), FieldSpec::optional("guidance", "document-context")],
            TemporalScope::Instant,
            &["requires-aoi", "remote-service"],
        ),
        descriptor(
            WEATHER,
            "Fetches daily temperature, wind speed and precipitation for the area's centroid over the window.",
            vec![aoi(), window()],
            vec![FieldSpec::required("weather", "weather-series")],
            TemporalScope::Interval,
            &["requires-aoi", "remote-service"],
        ),
        descriptor(
            CLIMATOLOGY,
            "Long-term monthly weather normals for the area, served as a daily series. Use as the fallback for weather.",
            vec![aoi(), window()],
            vec![FieldSpec::required("weather", "weather-series")],
            TemporalScope::Interval,
            &["requires-aoi", "fallback"],
        ),
        descriptor(
            REPORT,
            "Terminal node: collects every upstream result into the data digest the final report is written from.",
            vec![
                FieldSpec::optional("water_body", "water-body-name"),
                FieldSpec::optional("aoi", "aoi-polygon"),
                FieldSpec::optional("window", "time-window"),
                FieldSpec::optional("scenes", "scene-list"),
                FieldSpec::optional("ndci", "ndci-value"),
                FieldSpec::optional("ndwi", "ndwi-value"),
                FieldSpec::optional("stats", "index-raster"),
                FieldSpec::optional("chl", "chl-a-ug-per-l"),
                FieldSpec::optional("bloom", "bloom-severity"),
                FieldSpec::optional("weather", "weather-series"),
                FieldSpec::optional("guidance", "document-context"),
            ],
            vec![FieldSpec::required("text", "report-text")],
            TemporalScope::None,
            &[TERMINAL_CONTEXT],
        ),
    ]
}

fn input<'a>(inputs: &'a ToolValues, name: &str) -> Result<&'a Value, ToolError> {
    inputs
        .get(name)
        .ok_or_else(|| ToolError::InvalidInput(format!("missing `{name}`")))
}

fn parse<T: serde::de::DeserializeOwned>(inputs: &ToolValues, name: &str) -> Result<T, ToolError> {
    serde_json::from_value(input(inputs, name)?.clone()).map_err(|e| ToolError::InvalidInput(format!("`{name}`: {e}")))
}

fn one(field: &str, value: Value) -> ToolValues {
    ToolValues::from([(field.to_string(), value)])
}

fn centroid_lat_lon(aoi: &Polygon) -> (f64, f64) {
    let [lon, lat] = aoi.centroid();
    (lat, lon)
}

impl From<CatalogError> for ToolError {
    fn from(e: CatalogError) -> Self {
        match e {
            CatalogError::CatalogUnavailable(m) => ToolError::Unavailable(m),
            other => ToolError::InvalidInput(other.to_string()),
        }
    }
}

impl From<WeatherError> for ToolError {
    fn from(e: WeatherError) -> Self {
        match e {
            WeatherError::ServiceUnavailable(m) => ToolError::Unavailable(m),
            WeatherError::InvalidWindow(m) => ToolError::InvalidInput(m),
            other => ToolError::Failed(other.to_string()),
        }
    }
}

impl From<BloomError> for ToolError {
    fn from(e: BloomError) -> Self {
        match e {
            BloomError::ServiceUnavailable(m) => ToolError::Unavailable(m),
            BloomError::InvalidCoordinates(m) => ToolError::InvalidInput(m),
            other => ToolError::Failed(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexStats {
    pub index: IndexKind,
    pub aggregation: SceneAggregation,
    pub scene_ids: Vec<String>,
    pub date: NaiveDate,
    pub mean: f64,
    pub max: f64,
    pub pixels: usize,
}

impl AquaTools {
    /// Registers every descriptor and its handler.
    pub fn register(&self, registry: &mut ToolRegistry, handlers: &mut HandlerTable) -> Result<(), RegistryError> {
        for d in descriptors() {
            registry.register_tool(d)?;
        }
        self.install_handlers(handlers);
        Ok(())
    }

    pub fn install_handlers(&self, handlers: &mut HandlerTable) {
        let t = self.clone();
        handlers.insert(SCENE_SEARCH, move |i: &ToolValues| t.scene_search(i));
        let t = self.clone();
        handlers.insert(NDCI_INDEX, move |i: &ToolValues| t.index(i, IndexKind::Ndci));
        let t = self.clone();
        handlers.insert(NDWI_INDEX, move |i: &ToolValues| t.index(i, IndexKind::Ndwi));
        let t = self.clone();
        handlers.insert(CHL_ESTIMATE, move |i: &ToolValues| t.chl(i));
        let t = self.clone();
        handlers.insert(BLOOM_PREDICT, move |i: &ToolValues| t.bloom(i));
        let t = self.clone();
        handlers.insert(WEATHER, move |i: &ToolValues| t.weather_series(i, t.weather.as_ref()));
        let t = self.clone();
        handlers.insert(CLIMATOLOGY, move |i: &ToolValues| t.weather_series(i, t.climatology.as_ref()));
        handlers.insert(REPORT, |i: &ToolValues| Ok(one("text", Value::String(data_digest(i)))));
    }

    fn scene_search(&self, inputs: &ToolValues) -> Result<ToolValues, ToolError> {
        let aoi: Polygon = parse(inputs, "aoi")?;
        let window: TimeWindow = parse(inputs, "window")?;
        let scenes = search_scenes(&aoi, window.start(), window.stop(), self.catalog.as_ref())?;
        Ok(one("scenes", serde_json::to_value(scenes).unwrap()))
    }

    fn load_band(&self, locator: &str) -> Result<RasterGrid, ToolError> {
        if locator.starts_with("http://") || locator.starts_with("https://") {
            return Err(ToolError::Failed(format!("remote band asset {locator} needs a cloud-optimized GeoTIFF reader")));
        }
        let path = if Path::new(locator).is_absolute() {
            PathBuf::from(locator)
        } else {
            self.asset_root.join(locator)
        };
        RasterGrid::read_file(&path).map_err(|e| ToolError::Failed(e.to_string()))
    }

    /// Zonal values of one scene's index over `aoi`.
    fn scene_index(&self, scene: &SceneRecord, aoi: &Polygon, kind: IndexKind) -> Result<Vec<f64>, ToolError> {
        let (x, y) = kind.bands();
        let mut bands = BTreeMap::new();
        for b in [x, y] {
            let loc = scene
                .assets
                .get(b)
                .ok_or_else(|| ToolError::Failed(format!("scene {} has no {b} asset", scene.id)))?;
            bands.insert(b.to_string(), self.load_band(loc)?);
        }
        let raster = compute_index(&bands, kind).map_err(|e| ToolError::Failed(e.to_string()))?;
        zone_values(&raster, aoi).map_err(|e| match e {
            ZonalError::DegenerateZone => ToolError::InvalidInput(e.to_string()),
            _ => ToolError::Failed(format!("scene {}: {e}", scene.id)),
        })
    }

    fn index(&self, inputs: &ToolValues, kind: IndexKind) -> Result<ToolValues, ToolError> {
        let scenes: Vec<SceneRecord> = parse(inputs, "scenes")?;
        let aoi: Polygon = parse(inputs, "aoi")?;
        if scenes.is_empty() {
            return Err(ToolError::Failed("no scenes to compute an index from".into()));
        }
        let stats = match self.aggregation {
            SceneAggregation::BestScene => {
                let scene = best_scene(&scenes).expect("non-empty");
                let values = self.scene_index(scene, &aoi, kind)?;
                IndexStats {
                    index: kind,
                    aggregation: self.aggregation,
                    scene_ids: vec![scene.id.clone()],
                    date: scene.date,
                    mean: values.iter().sum::<f64>() / values.len() as f64,
                    max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    pixels: values.len(),
                }
            }
            SceneAggregation::WindowMean => {
                let mut used = Vec::new();
                let (mut sum_of_means, mut max, mut pixels) = (0.0, f64::NEG_INFINITY, 0);
                let mut last_error = None;
                for s in &scenes {
                    match self.scene_index(s, &aoi, kind) {
                        Ok(values) => {
                            sum_of_means += values.iter().sum::<f64>() / values.len() as f64;
                            max = values.iter().copied().fold(max, f64::max);
                            pixels += values.len();
                            used.push(s);
                        }
                        Err(e) => last_error = Some(e),
                    }
                }
                if used.is_empty() {
                    return Err(last_error.expect("some scene failed"));
                }
                IndexStats {
                    index: kind,
                    aggregation: self.aggregation,
                    scene_ids: used.iter().map(|s| s.id.clone()).collect(),
                    date: used.last().unwrap().date,
                    mean: sum_of_means / used.len() as f64,
                    max,
                    pixels,
                }
            }
        };
        let field = match kind {
            IndexKind::Ndci => "ndci",
            IndexKind::Ndwi => "ndwi",
        };
        Ok(ToolValues::from([
            (field.to_string(), json!(stats.mean)),
            ("stats".to_string(), serde_json::to_value(&stats).unwrap()),
        ]))
    }

    fn chl(&self, inputs: &ToolValues) -> Result<ToolValues, ToolError> {
        let ndci = input(inputs, "ndci")?
            .as_f64()
            .ok_or_else(|| ToolError::InvalidInput("`ndci` is not a number".into()))?;
        let chl = self
            .chlorophyll
            .estimate(ndci)
            .map_err(|e| ToolError::InvalidInput(e.to_string()))?;
        Ok(one("chl", json!(chl)))
    }

    fn bloom(&self, inputs: &ToolValues) -> Result<ToolValues, ToolError> {
        let aoi: Polygon = parse(inputs, "aoi")?;
        let window: TimeWindow = parse(inputs, "window")?;
        let (lat, lon) = centroid_lat_lon(&aoi);
        let p: BloomPrediction = predict_bloom(lat, lon, window.stop(), self.bloom.as_ref(), &self.thresholds)?;
        let mut out = one("bloom", serde_json::to_value(&p).unwrap());
        if let Some(enricher) = &self.enricher {
            let severity = serde_json::to_value(p.severity).unwrap();
            let query = format!(
                "cyanobacteria bloom {} severity health guidance for lake water use",
                severity.as_str().unwrap_or_default()
            );
            match enricher.enrich(&query) {
                Ok(text) if !text.is_empty() => {
                    out.insert("guidance".into(), Value::String(text));
                }
                Ok(_) => {}
                Err(e) => tracing::warn!(error = %e, "bloom guidance enrichment failed"),
            }
        }
        Ok(out)
    }

    fn weather_series(&self, inputs: &ToolValues, client: &dyn WeatherClient) -> Result<ToolValues, ToolError> {
        let aoi: Polygon = parse(inputs, "aoi")?;
        let window: TimeWindow = parse(inputs, "window")?;
        let (lat, lon) = centroid_lat_lon(&aoi);
        let series: WeatherSeries = fetch_weather(lat, lon, &window, client)?;
        Ok(one("weather", serde_json::to_value(series).unwrap()))
    }
}

/// Plain-text digest of whatever reached the report node, in a fixed order.
pub fn data_digest(inputs: &ToolValues) -> String {
    let mut out = String::new();
    let place = inputs
        .get("water_body")
        .and_then(Value::as_str)
        .map(|n| format!("Lake {n}"))
        .unwrap_or_else(|| "the area of interest".to_string());
    let _ = write!(out, "Data digest for {place}");
    if let Ok(w) = serde_json::from_value::<TimeWindow>(inputs.get("window").cloned().unwrap_or_default()) {
        let _ = write!(out, ", {w}");
    }
    out.push('\n');
    if let Some(Value::Array(scenes)) = inputs.get("scenes") {
        let _ = writeln!(out, "- scenes found: {}", scenes.len());
    }
    if let Ok(s) = serde_json::from_value::<IndexStats>(inputs.get("stats").cloned().unwrap_or_default()) {
        let _ = writeln!(
            out,
            "- {:?} from {} ({}): mean {:.4}, max {:.4} over {} pixels",
            s.index,
            s.scene_ids.join(", "),
            s.date,
            s.mean,
            s.max,
            s.pixels
        );
    }
    if let Some(v) = inputs.get("ndci").and_then(Value::as_f64) {
        let _ = writeln!(out, "- NDCI: {v:.4}");
    }
    if let Some(v) = inputs.get("ndwi").and_then(Value::as_f64) {
        let _ = writeln!(out, "- NDWI: {v:.4}");
    }
    if let Some(v) = inputs.get("chl").and_then(Value::as_f64) {
        let _ = writeln!(out, "- chlorophyll-a: {v:.2} ug/L");
    }
    if let Ok(b) = serde_json::from_value::<BloomPrediction>(inputs.get("bloom").cloned().unwrap_or_default()) {
        let severity = serde_json::to_value(b.severity).unwrap();
        let _ = writeln!(
            out,
            "- bloom on {}: {} ({:.0} cells/mL)",
            b.date,
            severity.as_str().unwrap_or_default(),
            b.density_cells_per_ml
        );
    }
    if let Ok(w) = serde_json::from_value::<WeatherSeries>(inputs.get("weather").cloned().unwrap_or_default()) {
        let _ = writeln!(out, "- weather: {}", weather_summary(&w));
    }
    if inputs.get("guidance").and_then(Value::as_str).is_some() {
        let _ = writeln!(out, "- guidance notes attached");
    }
    out
}

/// [`weather_summary`] of a serialized series, if it parses.
pub fn weather_summary_value(v: &Value) -> Option<String> {
    serde_json::from_value::<WeatherSeries>(v.clone()).ok().map(|w| weather_summary(&w))
}

pub fn weather_summary(w: &WeatherSeries) -> String {
    let n = w.samples.len();
    if n == 0 {
        return "no samples".into();
    }
    let mean_t = w.samples.iter().map(|s| s.temperature_c).sum::<f64>() / n as f64;
    let max_wind = w.samples.iter().map(|s| s.wind_speed_ms).fold(f64::NEG_INFINITY, f64::max);
    let rain = w.samples.iter().map(|s| s.precipitation_mm).sum::<f64>();
    format!(
        "{n} day(s) from {} to {}, mean {mean_t:.1} C, max wind {max_wind:.1} m/s, total precipitation {rain:.1} mm",
        w.samples[0].date,
        w.samples[n - 1].date
    )
}
