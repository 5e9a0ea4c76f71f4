//! `EngineConfig`: one JSON file plus `NAIAD_*` environment overrides.
//!
//! Relative paths in the file resolve against the file's own directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aquatools::{BloomThresholds, ChlorophyllModel, SceneAggregation};
use crate::knowledge::{Stage, DEFAULT_EMBEDDING_MODEL, HASH_EMBEDDER_DIMENSION};

pub const ENV_CONFIG: &str = "NAIAD_CONFIG";
pub const ENV_DATA_DIR: &str = "NAIAD_DATA_DIR";
pub const ENV_PROVIDER_URL: &str = "NAIAD_PROVIDER_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProviderConfig {
    /// Replays a response table; no network.
    Scripted { script: PathBuf },
    /// Self-hosted model server.
    Endpoint { url: String, model: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EmbeddingConfig {
    Hash {
        #[serde(default = "default_hash_dimension")]
        dimension: usize,
    },
    Endpoint {
        url: String,
        #[serde(default = "default_embedding_model")]
        model: String,
        dimension: usize,
    },
}

fn default_hash_dimension() -> usize {
    HASH_EMBEDDER_DIMENSION
}

fn default_embedding_model() -> String {
    DEFAULT_EMBEDDING_MODEL.to_string()
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        EmbeddingConfig::Hash {
            dimension: HASH_EMBEDDER_DIMENSION,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetryConfig {
    pub max_attempts: u32,
    pub backoff_ms: u64,
    pub remote_timeout_secs: u64,
}

impl Default for RetryConfig {
    fn default() -> Self {
        Self {
            max_attempts: 2,
            backoff_ms: 1000,
            remote_timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k: usize,
    pub context_budget: usize,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: 3,
            context_budget: 1500,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CatalogConfig {
    Mock { path: PathBuf },
    Stac { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeatherConfig {
    Stub { dir: PathBuf },
    OpenMeteo { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BloomConfig {
    Stub { path: PathBuf },
    Endpoint { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToolsConfig {
    pub catalog: CatalogConfig,
    /// Root for relative band asset locators.
    pub assets_dir: PathBuf,
    pub weather: WeatherConfig,
    /// Monthly normals file backing the climatology fallback.
    pub climatology: PathBuf,
    pub bloom: BloomConfig,
    /// Tool name to base URL; these tools are invoked remotely at `/tools/<name>`.
    #[serde(default)]
    pub endpoints: BTreeMap<String, String>,
    /// Tools treated as down when plans are pruned.
    #[serde(default)]
    pub unavailable: Vec<String>,
    #[serde(default)]
    pub scene_aggregation: SceneAggregation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    /// Runs, evaluations, ingested tanks and the feedback log live here.
    pub data_dir: PathBuf,
    pub provider: ProviderConfig,
    #[serde(default)]
    pub embedding: EmbeddingConfig,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default)]
    pub retry: RetryConfig,
    #[serde(default = "default_repair_attempts")]
    pub repair_attempts: u32,
    #[serde(default = "default_reflection_rounds")]
    pub reflection_rounds: u32,
    #[serde(default)]
    pub retrieval: RetrievalConfig,
    /// Tank name to the stages it is consulted at.
    #[serde(default)]
    pub tanks: BTreeMap<String, Vec<Stage>>,
    /// Seed tank files loaded at startup.
    #[serde(default)]
    pub knowledge_dir: Option<PathBuf>,
    pub gazetteer: PathBuf,
    pub tools: ToolsConfig,
    #[serde(default)]
    pub thresholds: BloomThresholds,
    #[serde(default)]
    pub chlorophyll: ChlorophyllModel,
    /// Frozen clock and sequential run ids, for reproducible runs.
    #[serde(default)]
    pub deterministic: bool,
    #[serde(default = "default_listen")]
    pub listen: String,
    /// Label for the parameters column of evaluation summaries.
    #[serde(default = "default_model_parameters")]
    pub model_parameters: String,
}

fn default_workers() -> usize {
    4
}
fn default_repair_attempts() -> u32 {
    3
}
fn default_reflection_rounds() -> u32 {
    2
}
fn default_model_parameters() -> String {
    "n/a".into()
}
fn default_listen() -> String {
    "127.0.0.1:8080".into()
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfigError {
    #[error("config field `{field}` is invalid: {reason}")]
    Invalid { field: String, reason: String },
    #[error("config file {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("no configuration given; pass --config or set {ENV_CONFIG}")]
    Missing,
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn check_url(field: &str, value: &str) -> Result<(), ConfigError> {
    match url::Url::parse(value) {
        Ok(u) if matches!(u.scheme(), "http" | "https") && u.host().is_some() => Ok(()),
        Ok(u) => Err(invalid(field, format!("`{value}` must be an http(s) URL with a host, got scheme `{}`", u.scheme()))),
        Err(e) => Err(invalid(field, format!("`{value}` is not a URL: {e}"))),
    }
}

fn resolve(base: &Path, p: &mut PathBuf) {
    if p.is_relative() {
        *p = base.join(&*p);
    }
}

impl EngineConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, ConfigError> {
        let mut c: EngineConfig = serde_json::from_str(text).map_err(|e| ConfigError::Read {
            path: base_dir.display().to_string(),
            reason: e.to_string(),
        })?;
        c.resolve_paths(base_dir);
        Ok(c)
    }

    /// Reads `path`, applies overrides from `env`, and validates.
    pub fn load(path: &Path, env: &dyn Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut c = Self::read(path)?;
        c.apply_env(env);
        c.validate()?;
        Ok(c)
    }

    /// Reads and path-resolves `path` without overrides or validation.
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let mut c: EngineConfig = serde_json::from_str(&text).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        c.resolve_paths(base);
        Ok(c)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.data_dir);
        if let ProviderConfig::Scripted { script } = &mut self.provider {
            resolve(base, script);
        }
        if let Some(k) = &mut self.knowledge_dir {
            resolve(base, k);
        }
        resolve(base, &mut self.gazetteer);
        let t = &mut self.tools;
        if let CatalogConfig::Mock { path } = &mut t.catalog {
            resolve(base, path);
        }
        resolve(base, &mut t.assets_dir);
        if let WeatherConfig::Stub { dir } = &mut t.weather {
            resolve(base, dir);
        }
        resolve(base, &mut t.climatology);
        if let BloomConfig::Stub { path } = &mut t.bloom {
            resolve(base, path);
        }
    }

    /// `NAIAD_DATA_DIR` replaces the data directory; `NAIAD_PROVIDER_URL`
    /// switches to an endpoint provider, keeping a configured model id.
    pub fn apply_env(&mut self, env: &dyn Fn(&str) -> Option<String>) {
        if let Some(d) = env(ENV_DATA_DIR).filter(|d| !d.is_empty()) {
            self.data_dir = PathBuf::from(d);
        }
        if let Some(url) = env(ENV_PROVIDER_URL).filter(|u| !u.is_empty()) {
            let model = match &self.provider {
                ProviderConfig::Endpoint { model, .. } => model.clone(),
                ProviderConfig::Scripted { .. } => "default".to_string(),
            };
            self.provider = ProviderConfig::Endpoint { url, model };
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if let ProviderConfig::Endpoint { url, model } = &self.provider {
            check_url("provider.url", url)?;
            if model.trim().is_empty() {
                return Err(invalid("provider.model", "model id is empty"));
            }
        }
        match &self.embedding {
            EmbeddingConfig::Hash { dimension } if *dimension == 0 => {
                return Err(invalid("embedding.dimension", "must be positive"))
            }
            EmbeddingConfig::Endpoint { url, dimension, .. } => {
                check_url("embedding.url", url)?;
                if *dimension == 0 {
                    return Err(invalid("embedding.dimension", "must be positive"));
                }
            }
            _ => {}
        }
        if self.workers == 0 {
            return Err(invalid("workers", "must be positive"));
        }
        if self.retry.max_attempts == 0 {
            return Err(invalid("retry.max_attempts", "must be positive"));
        }
        if self.retry.remote_timeout_secs == 0 {
            return Err(invalid("retry.remote_timeout_secs", "must be positive"));
        }
        if self.repair_attempts == 0 {
            return Err(invalid("repair_attempts", "must be positive"));
        }
        if self.reflection_rounds == 0 {
            return Err(invalid("reflection_rounds", "must be positive"));
        }
        if self.retrieval.k == 0 || self.retrieval.context_budget == 0 {
            return Err(invalid("retrieval", "k and context_budget must be positive"));
        }
        if let CatalogConfig::Stac { url } = &self.tools.catalog {
            check_url("tools.catalog.url", url)?;
        }
        if let WeatherConfig::OpenMeteo { url } = &self.tools.weather {
            check_url("tools.weather.url", url)?;
        }
        if let BloomConfig::Endpoint { url } = &self.tools.bloom {
            check_url("tools.bloom.url", url)?;
        }
        for (tool, url) in &self.tools.endpoints {
            check_url(&format!("tools.endpoints.{tool}"), url)?;
        }
        if !self.thresholds.is_valid() {
            return Err(invalid("thresholds", "need 0 < moderate < high"));
        }
        if self.listen.parse::<std::net::SocketAddr>().is_err() {
            return Err(invalid("listen", format!("`{}` is not host:port", self.listen)));
        }
        Ok(())
    }

    /// Stage to tanks, inverted from the tank-keyed map.
    pub fn stage_tanks(&self) -> BTreeMap<Stage, Vec<String>> {
        let mut out: BTreeMap<Stage, Vec<String>> = BTreeMap::new();
        for (tank, stages) in &self.tanks {
            for s in stages {
                out.entry(*s).or_default().push(tank.clone());
            }
        }
        out
    }

    pub fn runs_dir(&self) -> PathBuf {
        self.data_dir.join("runs")
    }

    pub fn evals_dir(&self) -> PathBuf {
        self.data_dir.join("evals")
    }

    pub fn ingested_dir(&self) -> PathBuf {
        self.data_dir.join("knowledge")
    }

    pub fn feedback_path(&self) -> PathBuf {
        self.data_dir.join("feedback.jsonl")
    }
}
