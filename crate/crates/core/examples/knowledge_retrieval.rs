//! Ingests a few documents into a tank, retrieves by cosine similarity and
//! shows the context block injected into a stage prompt.

use aquaflow::knowledge::{inject_context, Document, HashEmbedder, KnowledgeStore, Stage};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let embedder = HashEmbedder::default();
    let store = KnowledgeStore::new(64);
    store.ingest_batch(
        vec![
            Document::new("limnology", "ndci-basics", "NDCI", "NDCI contrasts red-edge and red reflectance to track chlorophyll-a."),
            Document::new("limnology", "ndwi-basics", "NDWI", "NDWI separates open water from land using green and near-infrared bands."),
            Document::new("limnology", "blooms", "Cyanobacteria", "Warm calm weather and high nutrients favour cyanobacterial blooms."),
        ],
        &embedder,
    )?;

    let query = "chlorophyll-a from red-edge reflectance";
    let hits = store.retrieve_documents(query, "limnology", 2, &embedder)?;
    for h in &hits {
        println!("#{} {} (score {:.3})", h.result.rank, h.result.document_id, h.result.score);
    }

    println!("\n{}", inject_context(Stage::Planning, &hits, 400));
    Ok(())
}
