use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::Serialize;

use super::{aggregate, score_task, EvalError, EvalSummary, GoldTask, ScoreCard};
use crate::executor::ExecutionTrace;
use crate::planning::{Expertise, QueryParameters};
use crate::reporting::{ReflectionVerdict, Report};
use crate::workflow::PlanGraph;

/// Everything one end-to-end run leaves behind, as far as it got.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunOutcome {
    pub params: Option<QueryParameters>,
    pub plan: Option<PlanGraph>,
    pub trace: ExecutionTrace,
    pub report: Option<Report>,
    pub verdict: Option<ReflectionVerdict>,
    /// Why the run stopped early, if it did.
    pub error: Option<String>,
}

/// Runs a prompt end to end; implemented by the engine.
pub trait TaskRunner: Sync {
    fn run_task(&self, prompt: &str, expertise: Expertise, run_id: &str) -> RunOutcome;
    fn model_id(&self) -> String;
}

pub struct SuiteOptions<'a> {
    pub eval_id: &'a str,
    pub workers: usize,
    /// Label for the summary's parameters column.
    pub parameters: &'a str,
    /// Where `<eval_id>/` gets written; nothing is persisted when `None`.
    pub out_dir: Option<&'a Path>,
}

fn write_atomic(path: &Path, contents: &str) -> Result<(), EvalError> {
    let io = |e: std::io::Error| EvalError::Io(format!("{}: {e}", path.display()));
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents).map_err(io)?;
    std::fs::rename(&tmp, path).map_err(io)
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializes")
}

/// Runs, scores and aggregates every task. Run ids are `<eval_id>-<task id>`.
///
/// A task that fails anywhere still yields a card (all judgments false unless
/// the run got far enough to be scored) tagged with the failure.
pub fn run_suite(tasks: &[GoldTask], runner: &dyn TaskRunner, opts: &SuiteOptions<'_>) -> Result<EvalSummary, EvalError> {
    if tasks.is_empty() {
        return Err(EvalError::EmptyDataset);
    }
    let results: Vec<Mutex<Option<(RunOutcome, ScoreCard)>>> = tasks.iter().map(|_| Mutex::new(None)).collect();
    let cursor = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..opts.workers.clamp(1, tasks.len()) {
            s.spawn(|| loop {
                let i = cursor.fetch_add(1, Ordering::SeqCst);
                let Some(task) = tasks.get(i) else { break };
                let run_id = format!("{}-{}", opts.eval_id, task.id);
                let outcome = runner.run_task(&task.prompt, task.expertise, &run_id);
                let card = score_outcome(task, &outcome);
                *results[i].lock().unwrap() = Some((outcome, card));
            });
        }
    });
    let results: Vec<(RunOutcome, ScoreCard)> = results.into_iter().map(|m| m.into_inner().unwrap().unwrap()).collect();
    let cards: Vec<ScoreCard> = results.iter().map(|(_, c)| c.clone()).collect();
    let mut summary = aggregate(&cards)?;
    summary.model = runner.model_id();
    summary.parameters = opts.parameters.to_string();

    if let Some(root) = opts.out_dir {
        let dir = root.join(opts.eval_id);
        for (task, (outcome, card)) in tasks.iter().zip(&results) {
            let t = dir.join("tasks").join(&task.id);
            if let Some(plan) = &outcome.plan {
                write_atomic(&t.join("plan.json"), &plan.to_json())?;
            }
            write_atomic(&t.join("trace.json"), &outcome.trace.to_json())?;
            if let Some(report) = &outcome.report {
                write_atomic(&t.join("report.json"), &report.to_json())?;
            }
            write_atomic(&t.join("card.json"), &pretty(card))?;
        }
        write_atomic(&dir.join("summary.json"), &summary.to_json())?;
        write_atomic(&dir.join("summary.txt"), &summary.render_table())?;
    }
    Ok(summary)
}

fn score_outcome(task: &GoldTask, outcome: &RunOutcome) -> ScoreCard {
    let mut card = match score_task(
        task,
        outcome.params.as_ref(),
        &outcome.trace,
        outcome.report.as_ref(),
        outcome.verdict.as_ref(),
    ) {
        Ok(c) => c,
        Err(e) => ScoreCard::failed(&task.id, e.to_string()),
    };
    if let Some(err) = &outcome.error {
        if outcome.plan.is_none() {
            card = ScoreCard::failed(&task.id, format!("run failed: {err}"));
        } else {
            card.anomalies.push(format!("run error: {err}"));
        }
    }
    card
}
