//! The end-to-end pipeline: rewrite, extract, plan, execute, report, reflect.
//!
//! [`Engine::run`] never fails outright. Whatever stage stops a run, the
//! returned [`RunRecord`] holds everything produced up to that point and the
//! error, and the run directory is written either way.

mod persist;

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::clock::{Clock, FixedClock, RunIds, SequentialRunIds};
use crate::evaluation::{RunOutcome, TaskRunner};
use crate::executor::{execute, ExecutionContext, ExecutionTrace, ExecutorError, ExecutorOptions, HandlerTable, Resolution, TraceStatus};
use crate::knowledge::{inject_context, Embedder, HashEmbedder, KnowledgeStore, Stage};
use crate::planning::{
    extract_parameters, repair_plan, rewrite_query_with_id, synthesize_plan, Expertise, Gazetteer, LanguageModel,
    PlanningError, QueryParameters, UserQuery,
};
use crate::registry::ToolRegistry;
use crate::reporting::{
    generate_report, record_feedback, reflect_and_revise, FeedbackLog, ReflectionVerdict, Report, ReportError,
    DEFAULT_MAX_ROUNDS, FEEDBACK_DIGEST_LEN,
};
use crate::transport::{HttpTransport, RecordingTransport};
use crate::workflow::{preview_pruned, prune, validate, ArtifactCache, CacheKey, PlanGraph, PlanPreview, ValidatedPlan, WorkflowError};

pub use persist::{load_run, write_run, RunFiles};

#[derive(Debug, thiserror::Error)]
pub enum EngineError {
    #[error(transparent)]
    Planning(#[from] PlanningError),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Executor(#[from] ExecutorError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("run storage: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EngineSettings {
    pub executor: ExecutorOptions,
    /// Provider calls allowed for repairing an invalid draft plan.
    pub repair_attempts: u32,
    pub reflection_rounds: u32,
    /// Documents retrieved per stage.
    pub retrieval_k: usize,
    /// Character budget of one injected context block.
    pub context_budget: usize,
    /// Tanks consulted at each stage.
    pub stage_tanks: BTreeMap<Stage, Vec<String>>,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            executor: ExecutorOptions::default(),
            repair_attempts: 3,
            reflection_rounds: DEFAULT_MAX_ROUNDS,
            retrieval_k: 3,
            context_budget: 1500,
            stage_tanks: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Succeeded,
    Partial,
    Failed,
}

/// Everything one run produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub prompt: String,
    pub status: RunStatus,
    pub query: Option<UserQuery>,
    pub params: Option<QueryParameters>,
    pub plan: Option<PlanGraph>,
    pub repair_attempts: u32,
    pub trace: ExecutionTrace,
    pub report: Option<Report>,
    pub verdicts: Vec<ReflectionVerdict>,
    pub error: Option<String>,
}

impl RunRecord {
    pub fn outcome(&self) -> RunOutcome {
        RunOutcome {
            params: self.params.clone(),
            plan: self.plan.clone(),
            trace: self.trace.clone(),
            report: self.report.clone(),
            verdict: self.verdicts.last().cloned(),
            error: self.error.clone(),
        }
    }
}

/// A plan built without executing anything.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DryRun {
    pub query: UserQuery,
    pub params: QueryParameters,
    pub plan: PlanGraph,
    pub repair_attempts: u32,
    pub preview: PlanPreview,
}

struct Planned {
    query: UserQuery,
    params: QueryParameters,
    plan: ValidatedPlan,
    repair_attempts: u32,
}

pub struct Engine {
    pub registry: ToolRegistry,
    pub handlers: HandlerTable,
    pub provider: Arc<dyn LanguageModel>,
    pub embedder: Arc<dyn Embedder>,
    pub knowledge: Arc<KnowledgeStore>,
    pub gazetteer: Gazetteer,
    pub feedback: Arc<FeedbackLog>,
    /// Used for remote tool bindings.
    pub transport: Arc<dyn HttpTransport>,
    pub clock: Arc<dyn Clock>,
    pub run_ids: Arc<dyn RunIds>,
    pub settings: EngineSettings,
    /// Tools known to be down; missing entries count as available.
    pub availability: BTreeMap<String, bool>,
    /// Run directories are written under here when set.
    pub runs_dir: Option<PathBuf>,
    cache: Mutex<ArtifactCache>,
}

impl Engine {
    /// An engine with in-memory knowledge and feedback, a frozen clock,
    /// sequential run ids and an offline transport.
    pub fn new(registry: ToolRegistry, handlers: HandlerTable, provider: Arc<dyn LanguageModel>) -> Self {
        let embedder = HashEmbedder::default();
        Self {
            registry,
            handlers,
            provider,
            knowledge: Arc::new(KnowledgeStore::new(embedder.dimension())),
            embedder: Arc::new(embedder),
            gazetteer: Gazetteer::new(),
            feedback: Arc::new(FeedbackLog::in_memory()),
            transport: Arc::new(RecordingTransport::offline()),
            clock: Arc::new(FixedClock::epoch()),
            run_ids: Arc::new(SequentialRunIds::new("run")),
            settings: EngineSettings::default(),
            availability: BTreeMap::new(),
            runs_dir: None,
            cache: Mutex::new(ArtifactCache::new()),
        }
    }

    /// Retrieval block for `stage`: the best `retrieval_k` documents across the
    /// stage's tanks, by score and then id.
    pub fn context(&self, stage: Stage, text: &str) -> String {
        let Some(tanks) = self.settings.stage_tanks.get(&stage) else {
            return String::new();
        };
        let k = self.settings.retrieval_k;
        if k == 0 {
            return String::new();
        }
        match self.knowledge.retrieve_across(text, tanks, k, self.embedder.as_ref()) {
            Ok(docs) => inject_context(stage, &docs, self.settings.context_budget),
            Err(e) => {
                tracing::warn!(%stage, error = %e, "retrieval failed");
                String::new()
            }
        }
    }

    fn plan_stage(&self, prompt: &str, expertise: Option<Expertise>, run_id: &str) -> Result<Planned, (Option<UserQuery>, Option<QueryParameters>, EngineError)> {
        let provider = self.provider.as_ref();
        let mut query = rewrite_query_with_id(prompt, run_id, provider).map_err(|e| (None, None, e.into()))?;
        let params = extract_parameters(&query, provider, &self.gazetteer).map_err(|e| (Some(query.clone()), None, e.into()))?;
        query.expertise = expertise.or(params.expertise).unwrap_or_default();
        let fail = |e: EngineError| (Some(query.clone()), Some(params.clone()), e);

        let context = self.context(Stage::Planning, &query.rewritten);
        let feedback = self.feedback.digest(FEEDBACK_DIGEST_LEN);
        let draft = synthesize_plan(&query, &params, &self.registry, &context, &feedback, provider).map_err(|e| fail(e.into()))?;
        let report = validate(&draft, &self.registry);
        let (plan, repair_attempts) = if report.ok {
            (ValidatedPlan::new(draft, &self.registry).map_err(|e| fail(e.into()))?, 0)
        } else {
            let out = repair_plan(draft, &report, &query, &params, &self.registry, provider, self.settings.repair_attempts)
                .map_err(|e| fail(e.into()))?;
            (out.plan, out.attempts)
        };
        Ok(Planned {
            query,
            params,
            plan,
            repair_attempts,
        })
    }

    /// Plans `prompt` and previews execution without invoking any tool.
    pub fn dry_run(&self, prompt: &str, expertise: Option<Expertise>) -> Result<DryRun, EngineError> {
        let run_id = self.run_ids.next_id();
        let planned = self.plan_stage(prompt, expertise, &run_id).map_err(|(_, _, e)| e)?;
        let pruned = prune(&planned.plan, &self.cache.lock().unwrap(), &self.availability)?;
        Ok(DryRun {
            preview: preview_pruned(&pruned, &self.registry),
            query: planned.query,
            params: planned.params,
            plan: planned.plan.into_graph(),
            repair_attempts: planned.repair_attempts,
        })
    }

    pub fn run(&self, prompt: &str, expertise: Option<Expertise>) -> RunRecord {
        let id = self.run_ids.next_id();
        self.run_with_id(prompt, expertise, &id)
    }

    pub fn run_with_id(&self, prompt: &str, expertise: Option<Expertise>, run_id: &str) -> RunRecord {
        let mut rec = RunRecord {
            run_id: run_id.to_string(),
            prompt: prompt.to_string(),
            status: RunStatus::Failed,
            query: None,
            params: None,
            plan: None,
            repair_attempts: 0,
            trace: ExecutionTrace::aborted(run_id, self.clock.now()),
            report: None,
            verdicts: Vec::new(),
            error: None,
        };
        if let Err(e) = self.run_stages(prompt, expertise, &mut rec) {
            tracing::warn!(run = run_id, error = %e, "run stopped early");
            rec.error = Some(e.to_string());
        }
        rec.status = match (&rec.report, rec.trace.status) {
            (None, _) => RunStatus::Failed,
            (Some(_), TraceStatus::Succeeded) if rec.error.is_none() => RunStatus::Succeeded,
            (Some(_), _) => RunStatus::Partial,
        };
        if let Some(dir) = &self.runs_dir {
            if let Err(e) = write_run(dir, &rec) {
                tracing::error!(run = run_id, error = %e, "could not persist run");
                rec.error.get_or_insert(e.to_string());
            }
        }
        rec
    }

    fn run_stages(&self, prompt: &str, expertise: Option<Expertise>, rec: &mut RunRecord) -> Result<(), EngineError> {
        let planned = match self.plan_stage(prompt, expertise, &rec.run_id) {
            Ok(p) => p,
            Err((query, params, e)) => {
                rec.query = query;
                rec.params = params;
                return Err(e);
            }
        };
        rec.query = Some(planned.query.clone());
        rec.params = Some(planned.params.clone());
        rec.plan = Some(planned.plan.graph().clone());
        rec.repair_attempts = planned.repair_attempts;

        let pruned = prune(&planned.plan, &self.cache.lock().unwrap(), &self.availability)?;
        let ctx = ExecutionContext {
            registry: &self.registry,
            handlers: &self.handlers,
            transport: self.transport.as_ref(),
            clock: self.clock.as_ref(),
            options: self.settings.executor.clone(),
        };
        rec.trace = execute(&pruned, &ctx)?;
        self.remember(&planned.plan, &rec.trace);

        let query = &planned.query;
        let context = self.context(Stage::Report, &query.rewritten);
        let report = generate_report(&rec.trace, query, &context, self.provider.as_ref(), self.clock.as_ref())?;
        rec.report = Some(report.clone());
        let review = reflect_and_revise(report, query, self.provider.as_ref(), self.settings.reflection_rounds)?;
        let verdict = review.final_verdict().clone();
        rec.report = Some(review.report);
        rec.verdicts = review.verdicts;
        if !verdict.relevant || !verdict.issues.is_empty() {
            record_feedback(&verdict, rec.report.as_ref().unwrap(), &self.feedback, self.clock.as_ref())?;
        }
        Ok(())
    }

    /// Caches artifacts of executed source nodes, whose outputs depend only on their params.
    fn remember(&self, plan: &ValidatedPlan, trace: &ExecutionTrace) {
        let graph = plan.graph();
        let mut cache = self.cache.lock().unwrap();
        for e in &trace.entries {
            let (Resolution::Executed, Some(artifact)) = (e.resolution, &e.artifact) else { continue };
            let Some(node) = graph.node(&e.node_id) else { continue };
            if graph.edges.iter().any(|(_, to)| to == &node.id) || node.fallback_for.is_some() {
                continue;
            }
            cache.insert(CacheKey::new(&node.tool, &node.params), artifact.clone());
        }
    }

    pub fn cache_len(&self) -> usize {
        self.cache.lock().unwrap().len()
    }
}

impl TaskRunner for Engine {
    fn run_task(&self, prompt: &str, expertise: Expertise, run_id: &str) -> RunOutcome {
        self.run_with_id(prompt, Some(expertise), run_id).outcome()
    }

    fn model_id(&self) -> String {
        self.provider.model_id().to_string()
    }
}
