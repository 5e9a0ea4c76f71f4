//! Starts the HTTP gateway on an ephemeral port, submits a query, polls it to
//! completion and fetches the report.
//!
//!     cargo run --example serve_gateway

use std::path::Path;
use std::sync::Arc;
use std::time::Duration;

use serde_json::{json, Value};

use aquaflow::gateway::{build_engine, AppState, EngineConfig, Server};
use aquaflow::transport::RecordingTransport;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures");
    let data = tempfile::tempdir()?;
    let mut config = EngineConfig::load(&fixtures.join("config.json"), &|_| None)?;
    config.data_dir = data.path().to_path_buf();
    let engine = build_engine(&config, Arc::new(RecordingTransport::offline()))?;

    let server = Server::start("127.0.0.1:0", Arc::new(AppState::new(Arc::new(engine), Arc::new(config))))?;
    let base = server.url();
    println!("listening on {base}");

    let health: Value = ureq::get(&format!("{base}/health")).call()?.into_json()?;
    println!("health: {health}");

    let accepted: Value = ureq::post(&format!("{base}/query"))
        .send_json(json!({"prompt": "Compute NDCI for Lake Lysimachia for June 2024."}))?
        .into_json()?;
    let run_id = accepted["run_id"].as_str().unwrap_or_default().to_string();
    println!("accepted {run_id}");

    let status = loop {
        let s: Value = ureq::get(&format!("{base}/runs/{run_id}")).call()?.into_json()?;
        if s["status"] != "running" {
            break s;
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    println!("status: {status}");

    let report: Value = ureq::get(&format!("{base}/runs/{run_id}/report")).call()?.into_json()?;
    for section in report["sections"].as_array().into_iter().flatten() {
        println!("## {}", section["heading"].as_str().unwrap_or(""));
    }
    server.stop()?;
    Ok(())
}
