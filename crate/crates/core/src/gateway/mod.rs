//! Configuration, engine assembly, the HTTP API and the CLI.

mod build;
pub mod cli;
mod config;
mod server;

pub use build::{build_engine, build_provider, build_registry, load_knowledge, persist_tank, BuildError};
pub use cli::{run_cli, CliContext, OutputFormat, ProviderKind};
pub use config::{
    BloomConfig, CatalogConfig, ConfigError, EmbeddingConfig, EngineConfig, ProviderConfig, RetrievalConfig,
    RetryConfig, ToolsConfig, WeatherConfig, ENV_CONFIG, ENV_DATA_DIR, ENV_PROVIDER_URL,
};
pub use server::{router, AppState, ServeError, Server};
