//! Language-model providers.

use std::path::Path;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::transport::HttpTransport;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProviderError {
    #[error("provider transport: {0}")]
    Transport(String),
    #[error("provider returned an empty completion")]
    EmptyCompletion,
    #[error("scripted provider has no response for stage `{stage}` (prompt sha256 {hash})")]
    NoScriptedResponse { stage: String, hash: String },
    #[error("temperature {0} outside [0, 2]")]
    InvalidTemperature(f64),
    #[error("provider script: {0}")]
    Script(String),
}

/// A text-completion backend.
pub trait LanguageModel: Send + Sync {
    fn complete(&self, system: &str, user: &str, temperature: f64) -> Result<String, ProviderError>;
    fn model_id(&self) -> &str;
}

impl<T: LanguageModel + ?Sized> LanguageModel for Arc<T> {
    fn complete(&self, system: &str, user: &str, temperature: f64) -> Result<String, ProviderError> {
        (**self).complete(system, user, temperature)
    }
    fn model_id(&self) -> &str {
        (**self).model_id()
    }
}

pub(crate) fn check_temperature(t: f64) -> Result<(), ProviderError> {
    if (0.0..=2.0).contains(&t) {
        Ok(())
    } else {
        Err(ProviderError::InvalidTemperature(t))
    }
}

/// Hex SHA-256 of `system`, a NUL byte, then `user`.
pub fn prompt_hash(system: &str, user: &str) -> String {
    let mut h = Sha256::new();
    h.update(system.as_bytes());
    h.update([0u8]);
    h.update(user.as_bytes());
    hex::encode(h.finalize())
}

/// Stage tag from a system prompt's leading `[stage:NAME]` marker.
pub fn stage_of(system: &str) -> &str {
    system
        .strip_prefix("[stage:")
        .and_then(|rest| rest.split_once(']'))
        .map(|(stage, _)| stage)
        .unwrap_or("")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScriptEntry {
    /// Exact match on [`prompt_hash`]; takes precedence over everything else.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prompt_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage: Option<String>,
    /// Case-insensitive needles that must all occur in the prompt.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub contains: Vec<String>,
    pub response: String,
}

impl ScriptEntry {
    fn specificity(&self) -> usize {
        self.contains.iter().map(|c| c.len()).sum::<usize>() + self.contains.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Script {
    #[serde(default = "default_scripted_model")]
    pub model_id: String,
    pub entries: Vec<ScriptEntry>,
}

fn default_scripted_model() -> String {
    "scripted".to_string()
}

/// Fixed response table. Stateless, so the same prompt always yields the same bytes.
///
/// Lookup: an entry whose `prompt_sha256` equals the prompt hash; otherwise, among
/// entries whose stage matches (or is unset) and whose needles all occur in
/// `system + "\n" + user`, the one with the most needle text, earliest on ties.
#[derive(Debug, Clone)]
pub struct ScriptedProvider {
    script: Script,
}

impl ScriptedProvider {
    pub fn new(model_id: &str) -> Self {
        Self {
            script: Script {
                model_id: model_id.to_string(),
                entries: Vec::new(),
            },
        }
    }

    pub fn from_script(script: Script) -> Self {
        Self { script }
    }

    pub fn from_json(text: &str) -> Result<Self, ProviderError> {
        serde_json::from_str(text)
            .map(Self::from_script)
            .map_err(|e| ProviderError::Script(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ProviderError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProviderError::Script(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn on(mut self, stage: &str, contains: &[&str], response: &str) -> Self {
        self.push(ScriptEntry {
            prompt_sha256: None,
            stage: Some(stage.to_string()),
            contains: contains.iter().map(|s| s.to_string()).collect(),
            response: response.to_string(),
        });
        self
    }

    pub fn on_prompt(mut self, system: &str, user: &str, response: &str) -> Self {
        self.push(ScriptEntry {
            prompt_sha256: Some(prompt_hash(system, user)),
            stage: None,
            contains: Vec::new(),
            response: response.to_string(),
        });
        self
    }

    pub fn push(&mut self, entry: ScriptEntry) {
        self.script.entries.push(entry);
    }

    pub fn script(&self) -> &Script {
        &self.script
    }

    fn lookup(&self, system: &str, user: &str) -> Option<&ScriptEntry> {
        let hash = prompt_hash(system, user);
        if let Some(e) = self
            .script
            .entries
            .iter()
            .find(|e| e.prompt_sha256.as_deref() == Some(hash.as_str()))
        {
            return Some(e);
        }
        let stage = stage_of(system);
        let haystack = format!("{system}\n{user}").to_lowercase();
        let mut best: Option<&ScriptEntry> = None;
        for e in &self.script.entries {
            if e.prompt_sha256.is_some() {
                continue;
            }
            if e.stage.as_deref().map(|s| s != stage).unwrap_or(false) {
                continue;
            }
            if !e.contains.iter().all(|c| haystack.contains(&c.to_lowercase())) {
                continue;
            }
            if best.map(|b| e.specificity() > b.specificity()).unwrap_or(true) {
                best = Some(e);
            }
        }
        best
    }
}

impl LanguageModel for ScriptedProvider {
    fn complete(&self, system: &str, user: &str, temperature: f64) -> Result<String, ProviderError> {
        check_temperature(temperature)?;
        self.lookup(system, user)
            .map(|e| e.response.clone())
            .ok_or_else(|| ProviderError::NoScriptedResponse {
                stage: stage_of(system).to_string(),
                hash: prompt_hash(system, user),
            })
    }

    fn model_id(&self) -> &str {
        &self.script.model_id
    }
}

/// Self-hosted model server: `POST {model, system, prompt, temperature}` answered by `{text}`.
pub struct HttpProvider {
    pub url: String,
    pub model: String,
    pub timeout: Duration,
    transport: Arc<dyn HttpTransport>,
}

impl HttpProvider {
    pub fn new(url: &str, model: &str, transport: Arc<dyn HttpTransport>) -> Self {
        Self {
            url: url.to_string(),
            model: model.to_string(),
            timeout: Duration::from_secs(120),
            transport,
        }
    }
}

impl LanguageModel for HttpProvider {
    fn complete(&self, system: &str, user: &str, temperature: f64) -> Result<String, ProviderError> {
        check_temperature(temperature)?;
        let body = json!({
            "model": self.model,
            "system": system,
            "prompt": user,
            "temperature": temperature,
        });
        let v = self
            .transport
            .post_json(&self.url, &body, self.timeout)
            .map_err(|e| ProviderError::Transport(e.to_string()))?;
        v.get("text")
            .and_then(|t| t.as_str())
            .map(str::to_string)
            .ok_or_else(|| ProviderError::Transport("response has no `text` field".into()))
    }

    fn model_id(&self) -> &str {
        &self.model
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecordedPrompt {
    pub system: String,
    pub user: String,
    pub temperature: f64,
}

impl RecordedPrompt {
    pub fn stage(&self) -> &str {
        stage_of(&self.system)
    }
}

/// Wraps a provider and keeps every prompt it was sent.
pub struct RecordingProvider<P> {
    inner: P,
    prompts: Mutex<Vec<RecordedPrompt>>,
}

impl<P: LanguageModel> RecordingProvider<P> {
    pub fn new(inner: P) -> Self {
        Self {
            inner,
            prompts: Mutex::new(Vec::new()),
        }
    }

    pub fn prompts(&self) -> Vec<RecordedPrompt> {
        self.prompts.lock().unwrap().clone()
    }

    pub fn call_count(&self) -> usize {
        self.prompts.lock().unwrap().len()
    }

    pub fn calls_for_stage(&self, stage: &str) -> usize {
        self.prompts.lock().unwrap().iter().filter(|p| p.stage() == stage).count()
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: LanguageModel> LanguageModel for RecordingProvider<P> {
    fn complete(&self, system: &str, user: &str, temperature: f64) -> Result<String, ProviderError> {
        self.prompts.lock().unwrap().push(RecordedPrompt {
            system: system.to_string(),
            user: user.to_string(),
            temperature,
        });
        self.inner.complete(system, user, temperature)
    }

    fn model_id(&self) -> &str {
        self.inner.model_id()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::RecordingTransport;

    #[test]
    fn hash_matches_independent_digest() {
        let expected = hex::encode(Sha256::digest(b"sys\0user"));
        assert_eq!(prompt_hash("sys", "user"), expected);
    }

    #[test]
    fn stage_tag_parsing() {
        assert_eq!(stage_of("[stage:plan]\nrest"), "plan");
        assert_eq!(stage_of("no tag"), "");
    }

    #[test]
    fn most_specific_entry_wins() {
        let p = ScriptedProvider::new("m")
            .on("rewrite", &[], "generic")
            .on("rewrite", &["mornos"], "about mornos")
            .on("rewrite", &["algae", "mornos"], "algae in mornos")
            .on("extract", &["mornos"], "wrong stage");
        assert_eq!(p.complete("[stage:rewrite]", "algae in Mornos?", 0.0).unwrap(), "algae in mornos");
        assert_eq!(p.complete("[stage:rewrite]", "Mornos weather", 0.0).unwrap(), "about mornos");
        assert_eq!(p.complete("[stage:rewrite]", "anything", 0.0).unwrap(), "generic");
        assert!(matches!(
            p.complete("[stage:plan]", "anything", 0.0),
            Err(ProviderError::NoScriptedResponse { .. })
        ));
    }

    #[test]
    fn hash_entry_beats_needles() {
        let p = ScriptedProvider::new("m")
            .on("rewrite", &["x"], "needle")
            .on_prompt("[stage:rewrite]", "x", "exact");
        assert_eq!(p.complete("[stage:rewrite]", "x", 0.0).unwrap(), "exact");
        assert_eq!(p.complete("[stage:rewrite]", "x y", 0.0).unwrap(), "needle");
    }

    #[test]
    fn script_json_round_trip_and_determinism() {
        let p = ScriptedProvider::new("m").on("report", &["novice"], "plain words");
        let text = serde_json::to_string(p.script()).unwrap();
        let q = ScriptedProvider::from_json(&text).unwrap();
        let a = q.complete("[stage:report]", "audience: novice", 0.7).unwrap();
        let b = q.complete("[stage:report]", "audience: novice", 0.7).unwrap();
        assert_eq!(a, b);
        assert!(matches!(q.complete("[stage:report]", "x", 2.5), Err(ProviderError::InvalidTemperature(_))));
    }

    #[test]
    fn http_provider_surfaces_transport_failure() {
        let t = Arc::new(RecordingTransport::offline());
        let p = HttpProvider::new("http://llm.invalid/generate", "qwen", t.clone());
        assert!(matches!(p.complete("s", "u", 0.0), Err(ProviderError::Transport(_))));
        let call = &t.calls()[0];
        assert_eq!(call.body.as_ref().unwrap()["prompt"], "u");
    }

    #[test]
    fn recording_provider_counts_by_stage() {
        let p = RecordingProvider::new(ScriptedProvider::new("m").on("plan", &[], "{}"));
        p.complete("[stage:plan]", "a", 0.0).unwrap();
        let _ = p.complete("[stage:rewrite]", "b", 0.0);
        assert_eq!(p.call_count(), 2);
        assert_eq!(p.calls_for_stage("plan"), 1);
    }
}
