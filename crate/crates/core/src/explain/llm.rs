//! Pluggable text-completion transport.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRequest {
    pub prompt: String,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl CompletionRequest {
    pub fn new(prompt: impl Into<String>) -> Self {
        CompletionRequest {
            prompt: prompt.into(),
            temperature: 0.0,
            max_tokens: 600,
        }
    }
}

pub trait TextCompletion: Send + Sync {
    fn complete(&self, request: &CompletionRequest) -> Result<String>;
}

/// Hex sha256 of the prompt, the fixture key for [`ReplayClient`].
pub fn prompt_digest(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Canned responses keyed by prompt digest.
#[derive(Debug, Clone, Default)]
pub struct ReplayClient {
    responses: BTreeMap<String, String>,
}

impl ReplayClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, prompt: &str, response: impl Into<String>) {
        self.responses
            .insert(prompt_digest(prompt), response.into());
    }

    /// Reads every `<digest>.txt` file in `dir`.
    pub fn from_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut responses = BTreeMap::new();
        for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let path = entry.map_err(|e| Error::io(dir, e))?.path();
            if path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
                continue;
            };
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            responses.insert(stem.to_string(), text);
        }
        Ok(ReplayClient { responses })
    }
}

impl TextCompletion for ReplayClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let key = prompt_digest(&request.prompt);
        self.responses
            .get(&key)
            .cloned()
            .ok_or_else(|| Error::Llm(format!("no replay fixture for prompt {key}")))
    }
}

/// Chat-completions style HTTP endpoint.
#[cfg(feature = "http-llm")]
pub struct HttpClient {
    pub base_url: String,
    pub model: String,
    api_key: String,
    client: reqwest::blocking::Client,
}

#[cfg(feature = "http-llm")]
impl HttpClient {
    /// `api_key_env` names the environment variable holding the credential.
    pub fn from_env(
        base_url: impl Into<String>,
        model: impl Into<String>,
        api_key_env: &str,
        timeout: std::time::Duration,
    ) -> Result<Self> {
        let api_key = std::env::var(api_key_env)
            .map_err(|_| Error::Llm(format!("{api_key_env} is not set")))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| Error::Llm(e.to_string()))?;
        Ok(HttpClient {
            base_url: base_url.into(),
            model: model.into(),
            api_key,
            client,
        })
    }
}

#[cfg(feature = "http-llm")]
impl TextCompletion for HttpClient {
    fn complete(&self, request: &CompletionRequest) -> Result<String> {
        let body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let url = format!(
            "{}/v1/chat/completions",
            self.base_url.trim_end_matches('/')
        );
        let resp: serde_json::Value = self
            .client
            .post(url)
            .bearer_auth(&self.api_key)
            .json(&body)
            .send()
            .and_then(|r| r.error_for_status())
            .and_then(|r| r.json())
            .map_err(|e| Error::Llm(e.to_string()))?;
        resp["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| Error::Llm("response has no message content".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replay_by_digest() {
        let mut c = ReplayClient::new();
        c.insert("hello", "world");
        assert_eq!(
            c.complete(&CompletionRequest::new("hello")).unwrap(),
            "world"
        );
        assert!(c.complete(&CompletionRequest::new("other")).is_err());
    }

    #[test]
    fn replay_from_dir() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join(format!("{}.txt", prompt_digest("p"))), "r").unwrap();
        std::fs::write(dir.path().join("notes.md"), "ignored").unwrap();
        let c = ReplayClient::from_dir(dir.path()).unwrap();
        assert_eq!(c.complete(&CompletionRequest::new("p")).unwrap(), "r");
    }
}
