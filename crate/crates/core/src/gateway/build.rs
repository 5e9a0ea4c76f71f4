//! Assembles an [`Engine`] from an [`EngineConfig`].

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use serde::Deserialize;

use super::config::{BloomConfig, CatalogConfig, EmbeddingConfig, EngineConfig, ProviderConfig, WeatherConfig};
use crate::aquatools::{
    descriptors, AquaTools, BloomClient, ClimatologyClient, HttpBloomClient, KnowledgeEnricher, MockCatalog,
    OpenMeteoClient, SceneCatalog, StacCatalog, StubBloomClient, StubWeatherClient, WeatherClient,
};
use crate::clock::{Clock, FixedClock, RunIds, SequentialRunIds, SystemClock, UuidRunIds};
use crate::engine::{Engine, EngineSettings};
use crate::executor::{ExecutorOptions, HandlerTable, RetryPolicy};
use crate::knowledge::{Document, DocumentSource, Embedder, HashEmbedder, HttpEmbedder, KnowledgeStore, Stage};
use crate::planning::{Gazetteer, HttpProvider, LanguageModel, ScriptedProvider};
use crate::registry::{Binding, ToolRegistry};
use crate::reporting::FeedbackLog;
use crate::transport::HttpTransport;

#[derive(Debug, thiserror::Error)]
#[error("{component}: {reason}")]
pub struct BuildError {
    pub component: &'static str,
    pub reason: String,
}

fn fail(component: &'static str) -> impl Fn(String) -> BuildError {
    move |reason| BuildError { component, reason }
}

/// One seed document in a `*.jsonl` file under `knowledge_dir`.
#[derive(Deserialize)]
struct SeedDocument {
    tank: String,
    id: String,
    title: String,
    body: String,
    #[serde(default)]
    source: DocumentSource,
}

pub fn build_provider(config: &ProviderConfig, transport: Arc<dyn HttpTransport>) -> Result<Arc<dyn LanguageModel>, BuildError> {
    Ok(match config {
        ProviderConfig::Scripted { script } => {
            Arc::new(ScriptedProvider::load(script).map_err(|e| fail("provider")(e.to_string()))?)
        }
        ProviderConfig::Endpoint { url, model } => Arc::new(HttpProvider::new(url, model, transport)),
    })
}

fn build_embedder(config: &EmbeddingConfig, transport: Arc<dyn HttpTransport>) -> Arc<dyn Embedder> {
    match config {
        EmbeddingConfig::Hash { dimension } => Arc::new(HashEmbedder::new(*dimension)),
        EmbeddingConfig::Endpoint { url, model, dimension } => {
            Arc::new(HttpEmbedder::new(url, model, *dimension, transport))
        }
    }
}

/// Seeds from `knowledge_dir`, then persisted tanks from the data directory,
/// which replace seeds of the same name.
pub fn load_knowledge(config: &EngineConfig, store: &KnowledgeStore, embedder: &dyn Embedder) -> Result<(), BuildError> {
    let err = fail("knowledge");
    if let Some(dir) = &config.knowledge_dir {
        let mut files: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| err(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        files.sort();
        for path in files {
            let text = std::fs::read_to_string(&path).map_err(|e| err(format!("{}: {e}", path.display())))?;
            let mut docs = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let d: SeedDocument =
                    serde_json::from_str(line).map_err(|e| err(format!("{} line {}: {e}", path.display(), i + 1)))?;
                docs.push(Document {
                    id: d.id,
                    tank: d.tank,
                    title: d.title,
                    body: d.body,
                    source: d.source,
                });
            }
            store.ingest_batch(docs, embedder).map_err(|e| err(e.to_string()))?;
        }
    }
    store
        .load_dir(&config.ingested_dir())
        .map_err(|e| err(e.to_string()))?;
    for tank in config.tanks.keys() {
        store.create_tank(tank);
    }
    Ok(())
}

fn tools(config: &EngineConfig, transport: &Arc<dyn HttpTransport>, enricher: KnowledgeEnricher) -> Result<AquaTools, BuildError> {
    let t = &config.tools;
    let catalog: Arc<dyn SceneCatalog> = match &t.catalog {
        CatalogConfig::Mock { path } => Arc::new(MockCatalog::load(path).map_err(|e| fail("catalog")(e.to_string()))?),
        CatalogConfig::Stac { url } => Arc::new(StacCatalog::new(url, transport.clone())),
    };
    let weather: Arc<dyn WeatherClient> = match &t.weather {
        WeatherConfig::Stub { dir } => {
            Arc::new(StubWeatherClient::load_dir(dir).map_err(|e| fail("weather")(e.to_string()))?)
        }
        WeatherConfig::OpenMeteo { url } => Arc::new(OpenMeteoClient::new(url, transport.clone())),
    };
    let bloom: Arc<dyn BloomClient> = match &t.bloom {
        BloomConfig::Stub { path } => Arc::new(StubBloomClient::load(path).map_err(|e| fail("bloom")(e.to_string()))?),
        BloomConfig::Endpoint { url } => Arc::new(HttpBloomClient::new(url, transport.clone())),
    };
    let climatology = ClimatologyClient::load(&t.climatology).map_err(|e| fail("climatology")(e.to_string()))?;
    Ok(AquaTools {
        catalog,
        weather,
        climatology: Arc::new(climatology),
        bloom,
        asset_root: t.assets_dir.clone(),
        chlorophyll: config.chlorophyll,
        thresholds: config.thresholds,
        aggregation: t.scene_aggregation,
        enricher: Some(Arc::new(enricher)),
    })
}

/// Registers the built-in tools, rebinding the ones listed under
/// `tools.endpoints` to `POST <base>/tools/<name>`.
pub fn build_registry(config: &EngineConfig, suite: &AquaTools) -> Result<(ToolRegistry, HandlerTable), BuildError> {
    let mut registry = ToolRegistry::new();
    let mut handlers = HandlerTable::new();
    for mut d in descriptors() {
        if let Some(base) = config.tools.endpoints.get(&d.name) {
            d.binding = Binding::Remote {
                base_url: base.clone(),
                path: format!("/tools/{}", d.name),
                timeout_secs: 0,
            };
        }
        registry.register_tool(d).map_err(|e| fail("registry")(e.to_string()))?;
    }
    suite.install_handlers(&mut handlers);
    Ok((registry, handlers))
}

fn settings(config: &EngineConfig) -> EngineSettings {
    EngineSettings {
        executor: ExecutorOptions {
            workers: config.workers,
            retry: RetryPolicy {
                max_attempts: config.retry.max_attempts,
                backoff: Duration::from_millis(config.retry.backoff_ms),
                remote_timeout: Duration::from_secs(config.retry.remote_timeout_secs),
            },
            shuffle_seed: None,
        },
        repair_attempts: config.repair_attempts,
        reflection_rounds: config.reflection_rounds,
        retrieval_k: config.retrieval.k,
        context_budget: config.retrieval.context_budget,
        stage_tanks: config.stage_tanks(),
    }
}

/// Builds a ready engine. Every outbound call (provider, embedder, remote
/// services and tools) goes through `transport`.
pub fn build_engine(config: &EngineConfig, transport: Arc<dyn HttpTransport>) -> Result<Engine, BuildError> {
    config.validate().map_err(|e| fail("config")(e.to_string()))?;
    let provider = build_provider(&config.provider, transport.clone())?;
    let embedder = build_embedder(&config.embedding, transport.clone());
    let knowledge = Arc::new(KnowledgeStore::new(embedder.dimension()));
    load_knowledge(config, &knowledge, embedder.as_ref())?;

    let stage_tanks = config.stage_tanks();
    let enricher = KnowledgeEnricher {
        store: knowledge.clone(),
        embedder: embedder.clone(),
        tanks: stage_tanks.get(&Stage::Tool).cloned().unwrap_or_default(),
        k: config.retrieval.k,
        budget: config.retrieval.context_budget,
    };
    let suite = tools(config, &transport, enricher)?;
    let (registry, handlers) = build_registry(config, &suite)?;

    let gazetteer = Gazetteer::load(&config.gazetteer).map_err(|e| fail("gazetteer")(e.to_string()))?;
    std::fs::create_dir_all(&config.data_dir).map_err(|e| fail("data_dir")(format!("{}: {e}", config.data_dir.display())))?;
    let feedback = FeedbackLog::open(&config.feedback_path()).map_err(|e| fail("feedback")(e.to_string()))?;
    let (clock, run_ids): (Arc<dyn Clock>, Arc<dyn RunIds>) = if config.deterministic {
        (Arc::new(FixedClock::epoch()), Arc::new(SequentialRunIds::new("run")))
    } else {
        (Arc::new(SystemClock), Arc::new(UuidRunIds))
    };

    let mut engine = Engine::new(registry, handlers, provider);
    engine.embedder = embedder;
    engine.knowledge = knowledge;
    engine.gazetteer = gazetteer;
    engine.feedback = Arc::new(feedback);
    engine.transport = transport;
    engine.clock = clock;
    engine.run_ids = run_ids;
    engine.settings = settings(config);
    engine.availability = config
        .tools
        .unavailable
        .iter()
        .map(|t| (t.clone(), false))
        .collect::<BTreeMap<_, _>>();
    engine.runs_dir = Some(config.runs_dir());
    Ok(engine)
}

/// Writes `tank` to the data directory so it survives a restart.
pub fn persist_tank(config: &EngineConfig, store: &KnowledgeStore, tank: &str) -> Result<(), BuildError> {
    store
        .save_tank(tank, &config.ingested_dir())
        .map(|_| ())
        .map_err(|e| fail("knowledge")(e.to_string()))
}

