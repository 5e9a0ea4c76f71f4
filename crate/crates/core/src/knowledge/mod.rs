//! Content tanks, embeddings and stage-scoped context injection.

mod context;
mod embed;
mod store;

pub use context::{context_header, inject_context, Stage};
pub use embed::{
    cosine, EmbedError, Embedder, HashEmbedder, HttpEmbedder, DEFAULT_EMBEDDING_MODEL, HASH_EMBEDDER_DIMENSION,
};
pub use store::{
    Document, DocumentSource, KnowledgeError, KnowledgeStore, RetrievalResult, RetrievedDocument, DEFAULT_TOP_K,
};
