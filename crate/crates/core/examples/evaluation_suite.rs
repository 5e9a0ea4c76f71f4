//! Scores the scripted fixture agent against the gold task set and prints the
//! summary table.
//!
//!     cargo run --example evaluation_suite

use std::path::Path;
use std::sync::Arc;

use aquaflow::evaluation::{load_gold, run_suite, SuiteOptions};
use aquaflow::gateway::{build_engine, EngineConfig};
use aquaflow::transport::RecordingTransport;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let data = tempfile::tempdir()?;
    let mut config = EngineConfig::load(&fixtures.join("config.json"), &|_| None)?;
    config.data_dir = data.path().to_path_buf();
    let engine = build_engine(&config, Arc::new(RecordingTransport::offline()))?;

    let gold = load_gold(&fixtures.join("gold.jsonl"))?;
    let out = config.evals_dir();
    let summary = run_suite(
        &gold,
        &engine,
        &SuiteOptions {
            eval_id: "example",
            workers: config.workers,
            parameters: &config.model_parameters,
            out_dir: Some(&out),
        },
    )?;

    for card in &summary.cards {
        println!(
            "{}: input={} tools={} order={} relevant={} {}",
            card.task_id,
            card.input_correct,
            card.tools_correct,
            card.order_correct,
            card.relevant,
            card.anomalies.join("; ")
        );
    }
    println!("\n{}", summary.render_table());
    Ok(())
}
