//! Water-quality tools: scene search, spectral indices, chlorophyll, bloom
//! prediction and weather, plus the report digest node.

pub mod bloom;
pub mod catalog;
pub mod chlorophyll;
pub mod index;
pub mod raster;
pub mod tools;
pub mod weather;
pub mod zonal;

pub use bloom::{predict_bloom, BloomClient, BloomError, BloomPrediction, BloomThresholds, HttpBloomClient, Location, Severity, StubBloomClient};
pub use catalog::{best_scene, search_scenes, CatalogError, MockCatalog, SceneCatalog, SceneRecord, StacCatalog};
pub use chlorophyll::{estimate_chlorophyll, ChlorophyllModel, OutOfRangeNdci};
pub use index::{compute_index, normalized_difference, IndexError, IndexKind};
pub use raster::{GeoTransform, RasterError, RasterGrid, DEFAULT_NODATA};
pub use tools::{data_digest, descriptors, weather_summary, weather_summary_value, AquaTools, Enricher, IndexStats, KnowledgeEnricher, SceneAggregation};
pub use weather::{fetch_weather, ClimatologyClient, OpenMeteoClient, StubWeatherClient, WeatherClient, WeatherError, WeatherSample, WeatherSeries};
pub use zonal::{zonal_stats, zone_values, ZonalError, ZonalStat};
