//! Server configuration: a TOML file with environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, ServiceError};

pub const ENV_BIND: &str = "CEF_BIND";
pub const ENV_PORT: &str = "CEF_PORT";
pub const ENV_DATA_DIR: &str = "CEF_DATA_DIR";
pub const ENV_ADMIN_TOKEN: &str = "CEF_ADMIN_TOKEN";
pub const ENV_TOKEN_SECRET: &str = "CEF_TOKEN_SECRET";
pub const ENV_LLM_MODE: &str = "CEF_LLM_MODE";

/// How a new session gets its condition.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BalanceMode {
    /// The server assigns the least-filled condition; requests may not pick one.
    #[default]
    Auto,
    /// Requests may name a condition; omitted ones are balanced.
    Client,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlmMode {
    /// Template rendering only.
    #[default]
    Off,
    /// Canned completions from `replay_dir`.
    Replay,
    /// A chat-completions endpoint; needs the `http-llm` feature.
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmConfig {
    pub mode: LlmMode,
    pub replay_dir: Option<PathBuf>,
    pub base_url: Option<String>,
    pub model: Option<String>,
    /// Name of the environment variable that holds the API key.
    pub api_key_env: String,
    pub timeout_secs: u64,
}

impl Default for LlmConfig {
    fn default() -> Self {
        LlmConfig {
            mode: LlmMode::Off,
            replay_dir: None,
            base_url: None,
            model: None,
            api_key_env: "CEF_LLM_API_KEY".into(),
            timeout_secs: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ApiConfig {
    pub bind: SocketAddr,
    pub study_id: String,
    pub study_seed: u64,
    /// The event log lives in `data_dir/study_id/`.
    pub data_dir: PathBuf,
    pub balance: BalanceMode,
    pub llm: LlmConfig,
    /// Origins allowed by CORS; empty disables the CORS layer.
    pub cors_origins: Vec<String>,
    /// Built web UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
    /// Bearer token for admin routes; admin routes refuse every request when unset.
    #[serde(skip_serializing)]
    pub admin_token: Option<String>,
    /// Secret mixed into session tokens and finish codes.
    #[serde(skip_serializing)]
    pub token_secret: Option<String>,
}

impl Default for ApiConfig {
    fn default() -> Self {
        ApiConfig {
            bind: SocketAddr::from(([127, 0, 0, 1], 8080)),
            study_id: "study".into(),
            study_seed: cef_core::bootstrap::DEFAULT_SEED,
            data_dir: PathBuf::from("data"),
            balance: BalanceMode::Auto,
            llm: LlmConfig::default(),
            cors_origins: Vec::new(),
            static_dir: None,
            admin_token: None,
            token_secret: None,
        }
    }
}

fn invalid(field: &str, reason: impl Into<String>) -> ServiceError {
    ServiceError::Config {
        field: field.to_string(),
        reason: reason.into(),
    }
}

impl ApiConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| invalid("config", e.message().to_string()))
    }

    /// Read `path`, then apply overrides from the process environment.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::io(path, e))?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    /// Override fields from `lookup` (normally the process environment).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(v) = lookup(ENV_BIND) {
            self.bind = v.parse().map_err(|_| invalid(ENV_BIND, format!("`{v}` is not host:port")))?;
        }
        if let Some(v) = lookup(ENV_PORT) {
            let port: u16 = v.parse().map_err(|_| invalid(ENV_PORT, format!("`{v}` is not a port")))?;
            self.bind.set_port(port);
        }
        if let Some(v) = lookup(ENV_DATA_DIR) {
            self.data_dir = PathBuf::from(v);
        }
        if let Some(v) = lookup(ENV_ADMIN_TOKEN) {
            self.admin_token = Some(v);
        }
        if let Some(v) = lookup(ENV_TOKEN_SECRET) {
            self.token_secret = Some(v);
        }
        if let Some(v) = lookup(ENV_LLM_MODE) {
            self.llm.mode = serde_json::from_value(serde_json::Value::String(v.clone()))
                .map_err(|_| invalid(ENV_LLM_MODE, format!("`{v}` is not off, replay or http")))?;
        }
        Ok(())
    }

    /// Directory holding this study's event log.
    pub fn study_dir(&self) -> PathBuf {
        self.data_dir.join(&self.study_id)
    }

    /// Check the settings and make sure the study directory is writable.
    pub fn validate(&self) -> Result<()> {
        if self.bind.port() == 0 {
            return Err(invalid("bind", "port must be 1..=65535"));
        }
        if self.study_id.is_empty() || !self.study_id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(invalid("study_id", "use ASCII letters, digits, '-' or '_'"));
        }
        if self.admin_token.as_deref().is_some_and(|t| t.len() < 16) {
            return Err(invalid("admin_token", "must be at least 16 characters"));
        }
        match self.llm.mode {
            LlmMode::Off => {}
            LlmMode::Replay => {
                if self.llm.replay_dir.is_none() {
                    return Err(invalid("llm.replay_dir", "required for replay mode"));
                }
            }
            LlmMode::Http => {
                if !cfg!(feature = "http-llm") {
                    return Err(invalid("llm.mode", "http needs a build with the http-llm feature"));
                }
                if self.llm.base_url.is_none() || self.llm.model.is_none() {
                    return Err(invalid("llm", "http mode needs base_url and model"));
                }
            }
        }
        if let Some(dir) = &self.static_dir {
            if !dir.is_dir() {
                return Err(invalid("static_dir", format!("{} is not a directory", dir.display())));
            }
        }
        let dir = self.study_dir();
        std::fs::create_dir_all(&dir).map_err(|e| ServiceError::io(&dir, e))?;
        let probe = dir.join(".write-probe");
        std::fs::write(&probe, b"").map_err(|e| ServiceError::io(&probe, e))?;
        std::fs::remove_file(&probe).map_err(|e| ServiceError::io(&probe, e))?;
        Ok(())
    }
}
