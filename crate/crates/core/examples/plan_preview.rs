//! Plans a query with the fixture configuration and prints the DAG without
//! running any tool.
//!
//!     cargo run --example plan_preview -- "Compute NDCI for Lake Lysimachia for June 2024."

use std::path::Path;
use std::sync::Arc;

use aquaflow::gateway::{build_engine, EngineConfig};
use aquaflow::transport::RecordingTransport;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let prompt = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "Compute NDCI for Lake Lysimachia for June 2024.".into());
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let data = tempfile::tempdir()?;
    let mut config = EngineConfig::load(&fixtures.join("config.json"), &|_| None)?;
    config.data_dir = data.path().to_path_buf();

    let transport = Arc::new(RecordingTransport::offline());
    let engine = build_engine(&config, transport.clone())?;
    let dry = engine.dry_run(&prompt, None)?;

    println!("rewritten: {}", dry.query.rewritten);
    println!("{}", dry.preview);
    println!("plan json: {}", serde_json::to_string(&dry.plan)?);
    println!("transport calls: {}", transport.call_count());
    Ok(())
}
