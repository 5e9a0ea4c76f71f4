//! Runs one fixture query through planning, execution, reporting and
//! reflection, then prints the report and the execution trace.
//!
//!     cargo run --example end_to_end_query

use std::path::Path;
use std::sync::Arc;

use aquaflow::gateway::{build_engine, EngineConfig};
use aquaflow::planning::Expertise;
use aquaflow::transport::RecordingTransport;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let data = tempfile::tempdir()?;
    let mut config = EngineConfig::load(&fixtures.join("config.json"), &|_| None)?;
    config.data_dir = data.path().to_path_buf();
    let engine = build_engine(&config, Arc::new(RecordingTransport::offline()))?;

    let rec = engine.run(
        "Is it safe to swim in Lake Trichonida at the end of July 2024, or is there an algae bloom?",
        Some(Expertise::Novice),
    );
    println!("run {} finished {:?}", rec.run_id, rec.status);
    for e in &rec.trace.entries {
        println!("  {:<8} {:<22} {:?} ({} attempt(s))", e.node_id, e.tool, e.resolution, e.attempts.len());
    }
    if let Some(report) = &rec.report {
        println!("\n{}", report.render_text());
    }
    Ok(())
}
