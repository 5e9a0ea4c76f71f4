//! Command-line front end. [`run_cli`] takes its environment and streams
//! explicitly so it can be driven from tests.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use super::build::{build_engine, persist_tank};
use super::config::{ConfigError, EngineConfig, ProviderConfig, ENV_CONFIG, ENV_PROVIDER_URL};
use super::server::{AppState, Server};
use crate::engine::{Engine, RunStatus};
use crate::evaluation::{load_gold, run_suite, SuiteOptions};
use crate::knowledge::Document;
use crate::planning::Expertise;
use crate::transport::{HttpTransport, UreqTransport};
use crate::workflow::{preview_pruned, prune, validate, ArtifactCache, PlanGraph, ValidatedPlan};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ProviderKind {
    Endpoint,
    Scripted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    Json,
    #[default]
    Text,
}

#[derive(Debug, Parser)]
#[command(name = "aquaflow", version, about = "Plan and run water-quality analyses over satellite data")]
struct Cli {
    /// Configuration file; falls back to NAIAD_CONFIG.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    provider: Option<ProviderKind>,
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Text)]
    output: OutputFormat,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Plan and run one query.
    Query {
        prompt: String,
        /// Plan and preview only; no tool is invoked.
        #[arg(long)]
        dry_run: bool,
        #[arg(long)]
        expertise: Option<Expertise>,
    },
    /// Start the HTTP gateway.
    Serve {
        #[arg(long)]
        listen: Option<String>,
    },
    /// Add documents from a JSONL file (`{id, title, body, source?}` per line) to a tank.
    Ingest {
        #[arg(long)]
        tank: String,
        file: PathBuf,
    },
    /// List registered tools.
    Tools,
    /// Run a gold task suite and print the summary table.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        id: Option<String>,
    },
    /// Validate a plan file and show its execution preview.
    Preview {
        #[arg(long)]
        plan: PathBuf,
    },
}

/// What the CLI sees of the outside world.
pub struct CliContext {
    pub env: BTreeMap<String, String>,
    pub transport: Arc<dyn HttpTransport>,
}

impl CliContext {
    pub fn from_process() -> Self {
        Self {
            env: std::env::vars().collect(),
            transport: Arc::new(UreqTransport),
        }
    }
}

struct Failure {
    kind: &'static str,
    message: String,
}

impl Failure {
    fn new(kind: &'static str, message: impl ToString) -> Self {
        Self {
            kind,
            message: message.to_string(),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let kind = match e {
            ConfigError::Invalid { .. } => "config_invalid",
            _ => "config",
        };
        Failure::new(kind, e)
    }
}

fn write_error(err: &mut dyn Write, kind: &str, message: &str) {
    let _ = writeln!(err, "{}", json!({ "error": { "kind": kind, "message": message } }));
}

/// Runs the CLI. Returns 0 on success, 2 on usage errors and 1 otherwise.
pub fn run_cli<I, S>(args: I, ctx: &CliContext, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return 0;
            }
            write_error(err, "usage", e.render().to_string().trim_end());
            return 2;
        }
    };
    match dispatch(&cli, ctx, out) {
        Ok(()) => 0,
        Err(f) => {
            write_error(err, f.kind, &f.message);
            1
        }
    }
}

fn load_config(cli: &Cli, ctx: &CliContext) -> Result<EngineConfig, Failure> {
    let path = cli
        .config
        .clone()
        .or_else(|| ctx.env.get(ENV_CONFIG).filter(|p| !p.is_empty()).map(PathBuf::from))
        .ok_or(ConfigError::Missing)?;
    let mut config = EngineConfig::read(&path)?;
    let env = |k: &str| {
        if k == ENV_PROVIDER_URL && cli.provider == Some(ProviderKind::Scripted) {
            return None;
        }
        ctx.env.get(k).cloned()
    };
    config.apply_env(&env);
    match (cli.provider, &config.provider) {
        (Some(ProviderKind::Scripted), ProviderConfig::Endpoint { .. }) => {
            return Err(ConfigError::Invalid {
                field: "provider".into(),
                reason: "--provider scripted needs a scripted provider in the config".into(),
            }
            .into())
        }
        (Some(ProviderKind::Endpoint), ProviderConfig::Scripted { .. }) => {
            return Err(ConfigError::Invalid {
                field: "provider.url".into(),
                reason: format!("--provider endpoint needs an endpoint in the config or {ENV_PROVIDER_URL}"),
            }
            .into())
        }
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

fn engine(config: &EngineConfig, ctx: &CliContext) -> Result<Engine, Failure> {
    build_engine(config, ctx.transport.clone()).map_err(|e| Failure::new("build", e))
}

fn print(out: &mut dyn Write, text: &str) -> Result<(), Failure> {
    writeln!(out, "{}", text.trim_end()).map_err(|e| Failure::new("io", e))
}

fn print_json(out: &mut dyn Write, v: &Value) -> Result<(), Failure> {
    print(out, &serde_json::to_string_pretty(v).unwrap())
}

fn dispatch(cli: &Cli, ctx: &CliContext, out: &mut dyn Write) -> Result<(), Failure> {
    let config = load_config(cli, ctx)?;
    let json_out = cli.output == OutputFormat::Json;
    match &cli.command {
        Command::Query {
            prompt,
            dry_run: true,
            expertise,
        } => {
            let engine = engine(&config, ctx)?;
            let dry = engine.dry_run(prompt, *expertise).map_err(|e| Failure::new("planning", e))?;
            if json_out {
                print_json(out, &serde_json::to_value(&dry).unwrap())
            } else {
                print(out, &dry.preview.to_string())
            }
        }
        Command::Query {
            prompt,
            dry_run: false,
            expertise,
        } => {
            let engine = engine(&config, ctx)?;
            let rec = engine.run(prompt, *expertise);
            if rec.status == RunStatus::Failed {
                return Err(Failure::new("run_failed", rec.error.unwrap_or_else(|| format!("run {} failed", rec.run_id))));
            }
            if json_out {
                print_json(
                    out,
                    &json!({ "run_id": rec.run_id, "status": rec.status, "report": rec.report, "error": rec.error }),
                )
            } else {
                print(out, &rec.report.map(|r| r.render_text()).unwrap_or_default())
            }
        }
        Command::Serve { listen } => {
            let engine = Arc::new(engine(&config, ctx)?);
            let listen = listen.clone().unwrap_or_else(|| config.listen.clone());
            let state = Arc::new(AppState::new(engine, Arc::new(config)));
            let server = Server::start(&listen, state).map_err(|e| Failure::new("serve", e))?;
            print(out, &format!("listening on {}", server.url()))?;
            let _ = out.flush();
            server.wait().map_err(|e| Failure::new("serve", e))
        }
        Command::Ingest { tank, file } => {
            let engine = engine(&config, ctx)?;
            let text = std::fs::read_to_string(file).map_err(|e| Failure::new("io", format!("{}: {e}", file.display())))?;
            let mut docs = Vec::new();
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let mut v: Value =
                    serde_json::from_str(line).map_err(|e| Failure::new("input", format!("line {}: {e}", i + 1)))?;
                if let Some(o) = v.as_object_mut() {
                    o.insert("tank".into(), json!(tank));
                }
                let d: Document =
                    serde_json::from_value(v).map_err(|e| Failure::new("input", format!("line {}: {e}", i + 1)))?;
                docs.push(d);
            }
            let ids = engine
                .knowledge
                .ingest_batch(docs, engine.embedder.as_ref())
                .map_err(|e| Failure::new("knowledge", e))?;
            persist_tank(&config, &engine.knowledge, tank).map_err(|e| Failure::new("storage", e))?;
            if json_out {
                print_json(out, &json!({ "tank": tank, "ingested": ids }))
            } else {
                print(out, &format!("ingested {} document(s) into `{tank}`", ids.len()))
            }
        }
        Command::Tools => {
            let engine = engine(&config, ctx)?;
            if json_out {
                print(out, &engine.registry.render_catalog())
            } else {
                print(out, &engine.registry.render_catalog_prose())
            }
        }
        Command::Eval { gold, workers, id } => {
            let tasks = load_gold(gold).map_err(|e| Failure::new("gold", e))?;
            let engine = engine(&config, ctx)?;
            let eval_id = id
                .clone()
                .unwrap_or_else(|| format!("eval-{}", engine.clock.now().format("%Y%m%dT%H%M%S")));
            let evals = config.evals_dir();
            let opts = SuiteOptions {
                eval_id: &eval_id,
                workers: workers.unwrap_or(config.workers),
                parameters: &config.model_parameters,
                out_dir: Some(&evals),
            };
            let summary = run_suite(&tasks, &engine, &opts).map_err(|e| Failure::new("eval", e))?;
            if json_out {
                print_json(out, &json!({ "eval_id": eval_id, "summary": summary }))
            } else {
                print(out, &summary.render_table())
            }
        }
        Command::Preview { plan } => {
            let engine = engine(&config, ctx)?;
            let text = std::fs::read_to_string(plan).map_err(|e| Failure::new("io", format!("{}: {e}", plan.display())))?;
            let graph: PlanGraph = serde_json::from_str(&text).map_err(|e| Failure::new("input", e))?;
            let report = validate(&graph, &engine.registry);
            if !report.ok {
                let msg = serde_json::to_string(&report.violations).unwrap();
                return Err(Failure::new("plan_invalid", msg));
            }
            let plan = ValidatedPlan::new(graph, &engine.registry).map_err(|e| Failure::new("plan_invalid", e))?;
            let pruned = prune(&plan, &ArtifactCache::new(), &engine.availability).map_err(|e| Failure::new("plan_invalid", e))?;
            let preview = preview_pruned(&pruned, &engine.registry);
            if json_out {
                print_json(out, &serde_json::to_value(&preview).unwrap())
            } else {
                print(out, &preview.to_string())
            }
        }
    }
}
