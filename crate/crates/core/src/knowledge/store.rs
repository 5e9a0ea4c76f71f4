use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};

use super::embed::{cosine, EmbedError, Embedder};

pub const DEFAULT_TOP_K: usize = 10;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DocumentSource {
    #[serde(default)]
    pub origin: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tank: String,
    pub title: String,
    pub body: String,
    #[serde(default)]
    pub source: DocumentSource,
}

impl Document {
    pub fn new(tank: &str, id: &str, title: &str, body: &str) -> Self {
        Self {
            id: id.to_string(),
            tank: tank.to_string(),
            title: title.to_string(),
            body: body.to_string(),
            source: DocumentSource::default(),
        }
    }

    /// Text that gets embedded.
    pub fn embedding_text(&self) -> String {
        format!("{}\n{}", self.title, self.body)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub document_id: String,
    pub score: f64,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetrievedDocument {
    pub result: RetrievalResult,
    pub document: Document,
}

#[derive(Debug, thiserror::Error)]
pub enum KnowledgeError {
    #[error("document `{id}` already exists in tank `{tank}`")]
    DuplicateId { tank: String, id: String },
    #[error("unknown tank `{0}`")]
    UnknownTank(String),
    #[error("invalid document: {0}")]
    InvalidDocument(String),
    #[error(transparent)]
    Embedder(#[from] EmbedError),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("tank file {path}: {reason}")]
    Persistence { path: PathBuf, reason: String },
}

#[derive(Debug, Clone)]
struct Entry {
    document: Document,
    embedding: Vec<f64>,
}

#[derive(Debug, Default)]
struct Tank {
    entries: Vec<Entry>,
    index: BTreeMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct TankFile {
    tank: String,
    dimension: usize,
    documents: Vec<StoredDocument>,
}

#[derive(Serialize, Deserialize)]
struct StoredDocument {
    id: String,
    title: String,
    body: String,
    embedding: Vec<f64>,
    #[serde(default)]
    source: DocumentSource,
}

/// Named content tanks with exact cosine retrieval.
///
/// Each tank sits behind its own lock: ingestion into one tank excludes
/// readers of that tank only.
#[derive(Debug)]
pub struct KnowledgeStore {
    dimension: usize,
    tanks: RwLock<BTreeMap<String, Arc<RwLock<Tank>>>>,
}

impl KnowledgeStore {
    pub fn new(dimension: usize) -> Self {
        Self {
            dimension,
            tanks: RwLock::new(BTreeMap::new()),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn tank_names(&self) -> Vec<String> {
        self.tanks.read().unwrap().keys().cloned().collect()
    }

    pub fn tank_size(&self, tank: &str) -> Option<usize> {
        self.tank(tank).map(|t| t.read().unwrap().entries.len())
    }

    pub fn create_tank(&self, name: &str) {
        self.tanks
            .write()
            .unwrap()
            .entry(name.to_string())
            .or_default();
    }

    fn tank(&self, name: &str) -> Option<Arc<RwLock<Tank>>> {
        self.tanks.read().unwrap().get(name).cloned()
    }

    pub fn document(&self, tank: &str, id: &str) -> Option<Document> {
        let t = self.tank(tank)?;
        let t = t.read().unwrap();
        t.index.get(id).map(|i| t.entries[*i].document.clone())
    }

    pub fn ingest(&self, doc: Document, embedder: &dyn Embedder) -> Result<String, KnowledgeError> {
        let mut ids = self.ingest_batch(vec![doc], embedder)?;
        Ok(ids.remove(0))
    }

    /// Embeds and stores documents; all or nothing.
    pub fn ingest_batch(&self, docs: Vec<Document>, embedder: &dyn Embedder) -> Result<Vec<String>, KnowledgeError> {
        let mut seen = BTreeMap::new();
        for d in &docs {
            if d.id.trim().is_empty() || d.tank.trim().is_empty() {
                return Err(KnowledgeError::InvalidDocument("id and tank must be non-empty".into()));
            }
            if d.body.trim().is_empty() {
                return Err(KnowledgeError::InvalidDocument(format!("document `{}` has an empty body", d.id)));
            }
            if seen.insert((d.tank.clone(), d.id.clone()), ()).is_some() {
                return Err(KnowledgeError::DuplicateId {
                    tank: d.tank.clone(),
                    id: d.id.clone(),
                });
            }
        }
        let texts: Vec<String> = docs.iter().map(Document::embedding_text).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let vectors = if refs.is_empty() { Vec::new() } else { embedder.embed(&refs)? };
        if let Some(v) = vectors.iter().find(|v| v.len() != self.dimension || v.iter().any(|x| !x.is_finite())) {
            return Err(EmbedError(format!(
                "vector of dimension {} does not fit store dimension {}",
                v.len(),
                self.dimension
            ))
            .into());
        }

        let mut by_tank: BTreeMap<String, Vec<Entry>> = BTreeMap::new();
        for (document, embedding) in docs.into_iter().zip(vectors) {
            by_tank
                .entry(document.tank.clone())
                .or_default()
                .push(Entry { document, embedding });
        }
        for name in by_tank.keys() {
            self.create_tank(name);
        }
        let locks: Vec<_> = by_tank.keys().map(|n| self.tank(n).unwrap()).collect();
        let mut guards: Vec<_> = locks.iter().map(|l| l.write().unwrap()).collect();
        for (guard, entries) in guards.iter().zip(by_tank.values()) {
            if let Some(e) = entries.iter().find(|e| guard.index.contains_key(&e.document.id)) {
                return Err(KnowledgeError::DuplicateId {
                    tank: e.document.tank.clone(),
                    id: e.document.id.clone(),
                });
            }
        }
        let mut ids = Vec::new();
        for (guard, entries) in guards.iter_mut().zip(by_tank.into_values()) {
            for e in entries {
                ids.push(e.document.id.clone());
                let pos = guard.entries.len();
                guard.index.insert(e.document.id.clone(), pos);
                guard.entries.push(e);
            }
        }
        Ok(ids)
    }

    /// Exact top-`k` by cosine similarity, ties by document id ascending.
    pub fn retrieve(
        &self,
        query: &str,
        tank: &str,
        k: usize,
        embedder: &dyn Embedder,
    ) -> Result<Vec<RetrievalResult>, KnowledgeError> {
        Ok(self
            .retrieve_documents(query, tank, k, embedder)?
            .into_iter()
            .map(|r| r.result)
            .collect())
    }

    pub fn retrieve_documents(
        &self,
        query: &str,
        tank: &str,
        k: usize,
        embedder: &dyn Embedder,
    ) -> Result<Vec<RetrievedDocument>, KnowledgeError> {
        if k == 0 {
            return Err(KnowledgeError::InvalidK);
        }
        let lock = self.tank(tank).ok_or_else(|| KnowledgeError::UnknownTank(tank.to_string()))?;
        let q = embedder.embed_one(query)?;
        let t = lock.read().unwrap();
        let mut scored: Vec<(f64, &Entry)> = t.entries.iter().map(|e| (cosine(&q, &e.embedding), e)).collect();
        let order = |a: &(f64, &Entry), b: &(f64, &Entry)| {
            b.0.total_cmp(&a.0).then_with(|| a.1.document.id.cmp(&b.1.document.id))
        };
        let k = k.min(scored.len());
        if k < scored.len() {
            scored.select_nth_unstable_by(k, order);
            scored.truncate(k);
        }
        scored.sort_by(order);
        Ok(scored
            .into_iter()
            .enumerate()
            .map(|(i, (score, e))| RetrievedDocument {
                result: RetrievalResult {
                    document_id: e.document.id.clone(),
                    score,
                    rank: i + 1,
                },
                document: e.document.clone(),
            })
            .collect())
    }

    /// Best `k` documents over several tanks, by score, then tank, then id.
    /// Unknown and empty tanks are skipped. Ranks are renumbered over the merge.
    pub fn retrieve_across(
        &self,
        query: &str,
        tanks: &[String],
        k: usize,
        embedder: &dyn Embedder,
    ) -> Result<Vec<RetrievedDocument>, KnowledgeError> {
        if k == 0 {
            return Err(KnowledgeError::InvalidK);
        }
        let mut docs = Vec::new();
        for tank in tanks {
            if self.tank_size(tank).unwrap_or(0) > 0 {
                docs.extend(self.retrieve_documents(query, tank, k, embedder)?);
            }
        }
        docs.sort_by(|a, b| {
            b.result
                .score
                .total_cmp(&a.result.score)
                .then_with(|| a.document.tank.cmp(&b.document.tank))
                .then_with(|| a.result.document_id.cmp(&b.result.document_id))
        });
        docs.truncate(k);
        for (i, d) in docs.iter_mut().enumerate() {
            d.result.rank = i + 1;
        }
        Ok(docs)
    }

    pub fn save_tank(&self, tank: &str, dir: &Path) -> Result<PathBuf, KnowledgeError> {
        let lock = self.tank(tank).ok_or_else(|| KnowledgeError::UnknownTank(tank.to_string()))?;
        let t = lock.read().unwrap();
        let file = TankFile {
            tank: tank.to_string(),
            dimension: self.dimension,
            documents: t
                .entries
                .iter()
                .map(|e| StoredDocument {
                    id: e.document.id.clone(),
                    title: e.document.title.clone(),
                    body: e.document.body.clone(),
                    embedding: e.embedding.clone(),
                    source: e.document.source.clone(),
                })
                .collect(),
        };
        let path = dir.join(format!("{tank}.json"));
        let io = |reason: String| KnowledgeError::Persistence {
            path: path.clone(),
            reason,
        };
        fs::create_dir_all(dir).map_err(|e| io(e.to_string()))?;
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, serde_json::to_vec_pretty(&file).unwrap()).map_err(|e| io(e.to_string()))?;
        fs::rename(&tmp, &path).map_err(|e| io(e.to_string()))?;
        Ok(path)
    }

    pub fn save_all(&self, dir: &Path) -> Result<(), KnowledgeError> {
        for name in self.tank_names() {
            self.save_tank(&name, dir)?;
        }
        Ok(())
    }

    /// Loads one persisted tank, replacing any tank of the same name.
    pub fn load_tank(&self, path: &Path) -> Result<String, KnowledgeError> {
        let err = |reason: String| KnowledgeError::Persistence {
            path: path.to_path_buf(),
            reason,
        };
        let text = fs::read_to_string(path).map_err(|e| err(e.to_string()))?;
        let file: TankFile = serde_json::from_str(&text).map_err(|e| err(e.to_string()))?;
        if file.dimension != self.dimension {
            return Err(err(format!(
                "dimension {} does not match store dimension {}",
                file.dimension, self.dimension
            )));
        }
        let mut tank = Tank::default();
        for d in file.documents {
            if d.embedding.len() != self.dimension {
                return Err(err(format!("document `{}` has a malformed embedding", d.id)));
            }
            if tank.index.contains_key(&d.id) {
                return Err(err(format!("duplicate document id `{}`", d.id)));
            }
            tank.index.insert(d.id.clone(), tank.entries.len());
            tank.entries.push(Entry {
                document: Document {
                    id: d.id,
                    tank: file.tank.clone(),
                    title: d.title,
                    body: d.body,
                    source: d.source,
                },
                embedding: d.embedding,
            });
        }
        self.tanks
            .write()
            .unwrap()
            .insert(file.tank.clone(), Arc::new(RwLock::new(tank)));
        Ok(file.tank)
    }

    /// Loads every `*.json` tank file in `dir`, in file-name order.
    pub fn load_dir(&self, dir: &Path) -> Result<Vec<String>, KnowledgeError> {
        let mut paths: Vec<PathBuf> = match fs::read_dir(dir) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|x| x == "json").unwrap_or(false))
                .collect(),
            Err(_) => return Ok(Vec::new()),
        };
        paths.sort();
        paths.iter().map(|p| self.load_tank(p)).collect()
    }
}
