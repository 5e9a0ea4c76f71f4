//! Gold-task scoring and the correctness/relevancy metrics.
//!
//! Each run is judged on four yes/no questions: were the parameters read
//! correctly, was exactly the expected tool set invoked, did the expected order
//! occur as a subsequence of execution, and was the final report relevant. The
//! correctness rate is the mean of the first three rates.

mod gold;
mod score;
mod suite;
mod summary;

pub use gold::{load_gold, parse_gold, GoldTask, PARAM_KEYS};
pub use score::{executed_tools, is_subsequence, score_task, ScoreCard};
pub use suite::{run_suite, RunOutcome, SuiteOptions, TaskRunner};
pub use summary::{aggregate, format_percent, percent_hundredths, EvalSummary};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("gold file line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("gold file has no tasks")]
    EmptyDataset,
    #[error("no score cards to aggregate")]
    EmptyInput,
    #[error("report for run `{run}` does not belong to task `{task}`")]
    RunMismatch { task: String, run: String },
    #[error("{0}")]
    Io(String),
}
