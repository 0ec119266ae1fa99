//! Service configuration: a JSON file plus `EPMEM_*` environment overrides.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use epmem_core::capture::{CaptionProviderConfig, CaptionProviderKind, DEFAULT_SAMPLE_RATE_HZ};
use epmem_core::memory::{ChunkerConfig, DEFAULT_EMBEDDING_BATCH, DEFAULT_EMBEDDING_DIM};
use epmem_core::qa::{DEFAULT_CONTEXT_BUDGET_TOKENS, DEFAULT_K, DEFAULT_PROMPT_TEMPLATE};
use serde::{Deserialize, Serialize};

/// Prefix for environment overrides, e.g. `EPMEM_PORT=9000`.
pub const ENV_PREFIX: &str = "EPMEM_";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("invalid value for {key}: {value:?}")]
    Env { key: String, value: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingKind {
    HashedBow,
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbeddingConfig {
    pub kind: EmbeddingKind,
    pub endpoint: Option<String>,
    pub batch_size: usize,
    pub timeout_ms: u64,
    pub max_retries: u32,
    /// Hashed-BOW only; the external provider announces its own.
    pub dim: usize,
    pub seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            kind: EmbeddingKind::HashedBow,
            endpoint: None,
            batch_size: DEFAULT_EMBEDDING_BATCH,
            timeout_ms: 30_000,
            max_retries: 3,
            dim: DEFAULT_EMBEDDING_DIM,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatConfig {
    pub endpoint: String,
    pub timeout_ms: u64,
    pub max_retries: u32,
    pub max_tokens: u32,
    pub temperature: f32,
}

impl Default for ChatConfig {
    fn default() -> Self {
        Self {
            endpoint: String::new(),
            timeout_ms: 60_000,
            max_retries: 3,
            max_tokens: 256,
            temperature: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CaptureConfig {
    pub sample_rate_hz: f64,
    pub workers: usize,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            workers: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RetrievalConfig {
    pub k: usize,
    pub context_budget_tokens: usize,
    pub prompt_template: String,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        Self {
            k: DEFAULT_K,
            context_budget_tokens: DEFAULT_CONTEXT_BUDGET_TOKENS,
            prompt_template: DEFAULT_PROMPT_TEMPLATE.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    /// Directory holding the console bundle, served at `/`.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServerConfig {
    fn default() -> Self {
        Self {
            bind: "127.0.0.1".to_string(),
            port: 8787,
            static_dir: None,
        }
    }
}

impl ServerConfig {
    pub fn addr(&self) -> Result<SocketAddr, ConfigError> {
        format!("{}:{}", self.bind, self.port)
            .parse()
            .map_err(|_| ConfigError::Invalid(format!("bad bind address {}:{}", self.bind, self.port)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AppConfig {
    pub store_path: PathBuf,
    pub embedding: EmbeddingConfig,
    pub caption: CaptionProviderConfig,
    /// Absent means answers come from the extractive answerer.
    pub chat: Option<ChatConfig>,
    pub capture: CaptureConfig,
    pub chunker: ChunkerConfig,
    pub retrieval: RetrievalConfig,
    pub server: ServerConfig,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self {
            store_path: PathBuf::from("memory.store"),
            embedding: EmbeddingConfig::default(),
            caption: CaptionProviderConfig::default(),
            chat: None,
            capture: CaptureConfig::default(),
            chunker: ChunkerConfig::default(),
            retrieval: RetrievalConfig::default(),
            server: ServerConfig::default(),
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value.parse().map_err(|_| ConfigError::Env {
        key: key.to_string(),
        value: value.to_string(),
    })
}

impl AppConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg: AppConfig = serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source,
        })?;
        // Relative paths in the file are relative to the file.
        if let Some(dir) = path.parent() {
            cfg.rebase(dir);
        }
        Ok(cfg)
    }

    fn rebase(&mut self, dir: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        fix(&mut self.store_path);
        if let Some(p) = self.caption.script_path.as_mut() {
            fix(p);
        }
        if let Some(p) = self.server.static_dir.as_mut() {
            fix(p);
        }
    }

    /// Loads `path` if given, else defaults; then applies the environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => Self::default(),
        };
        cfg.apply_env(std::env::vars())?;
        Ok(cfg)
    }

    /// Applies `EPMEM_*` overrides. Unknown `EPMEM_*` keys are ignored.
    pub fn apply_env<I>(&mut self, vars: I) -> Result<(), ConfigError>
    where
        I: IntoIterator<Item = (String, String)>,
    {
        for (key, value) in vars {
            let Some(name) = key.strip_prefix(ENV_PREFIX) else {
                continue;
            };
            match name {
                "STORE_PATH" => self.store_path = PathBuf::from(&value),
                "EMBEDDING_ENDPOINT" => {
                    self.embedding.kind = EmbeddingKind::External;
                    self.embedding.endpoint = Some(value);
                }
                "CAPTION_ENDPOINT" => {
                    self.caption.kind = CaptionProviderKind::ExternalService;
                    self.caption.endpoint = Some(value);
                }
                "CAPTION_SCRIPT" => {
                    self.caption.kind = CaptionProviderKind::Scripted;
                    self.caption.script_path = Some(PathBuf::from(value));
                }
                "CHAT_ENDPOINT" => {
                    let mut chat = self.chat.take().unwrap_or_default();
                    chat.endpoint = value;
                    self.chat = Some(chat);
                }
                "K" => self.retrieval.k = parse(&key, &value)?,
                "CONTEXT_BUDGET" => self.retrieval.context_budget_tokens = parse(&key, &value)?,
                "WORKERS" => self.capture.workers = parse(&key, &value)?,
                "SAMPLE_RATE_HZ" => self.capture.sample_rate_hz = parse(&key, &value)?,
                "BIND" => self.server.bind = value,
                "PORT" => self.server.port = parse(&key, &value)?,
                "STATIC_DIR" => self.server.static_dir = Some(PathBuf::from(value)),
                _ => {}
            }
        }
        Ok(())
    }

    /// True if any provider needs the network.
    pub fn uses_external_providers(&self) -> bool {
        self.embedding.kind == EmbeddingKind::External
            || self.caption.kind == CaptionProviderKind::ExternalService
            || self.chat.is_some()
    }

    /// Startup checks. `offline` forbids external providers outright.
    pub fn validate(&self, offline: bool) -> Result<(), ConfigError> {
        if offline && self.uses_external_providers() {
            return Err(ConfigError::Invalid(
                "--offline cannot be combined with external provider endpoints in the config".into(),
            ));
        }
        self.caption
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.chunker
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.embedding.kind == EmbeddingKind::External && self.embedding.endpoint.is_none() {
            return Err(ConfigError::Invalid("external embedding provider requires an endpoint".into()));
        }
        if self.embedding.batch_size == 0 || self.embedding.batch_size > DEFAULT_EMBEDDING_BATCH {
            return Err(ConfigError::Invalid(format!(
                "embedding.batch_size must be in 1..={DEFAULT_EMBEDDING_BATCH}"
            )));
        }
        if self.embedding.dim == 0 {
            return Err(ConfigError::Invalid("embedding.dim must be > 0".into()));
        }
        if let Some(chat) = &self.chat {
            if chat.endpoint.is_empty() {
                return Err(ConfigError::Invalid("chat.endpoint is empty".into()));
            }
        }
        if self.retrieval.k == 0 {
            return Err(ConfigError::Invalid("retrieval.k must be >= 1".into()));
        }
        if self.capture.workers == 0 {
            return Err(ConfigError::Invalid("capture.workers must be >= 1".into()));
        }
        let rate = self.capture.sample_rate_hz;
        if rate.is_nan() || rate <= 0.0 {
            return Err(ConfigError::Invalid("capture.sample_rate_hz must be > 0".into()));
        }
        if let Some(p) = &self.caption.script_path {
            if !p.is_file() {
                return Err(ConfigError::Invalid(format!("caption script {} not found", p.display())));
            }
        }
        if let Some(d) = &self.server.static_dir {
            if !d.is_dir() {
                return Err(ConfigError::Invalid(format!("static_dir {} not found", d.display())));
            }
        }
        let parent = self
            .store_path
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        if !parent.is_dir() {
            return Err(ConfigError::Invalid(format!(
                "store directory {} does not exist",
                parent.display()
            )));
        }
        self.server.addr()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env(pairs: &[(&str, &str)]) -> Vec<(String, String)> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn defaults_are_offline_and_valid() {
        let cfg = AppConfig::default();
        assert!(!cfg.uses_external_providers());
        cfg.validate(true).unwrap();
    }

    #[test]
    fn env_overrides() {
        let mut cfg = AppConfig::default();
        cfg.apply_env(env(&[
            ("EPMEM_PORT", "9001"),
            ("EPMEM_K", "7"),
            ("EPMEM_CHAT_ENDPOINT", "http://x/chat"),
            ("OTHER", "ignored"),
        ]))
        .unwrap();
        assert_eq!(cfg.server.port, 9001);
        assert_eq!(cfg.retrieval.k, 7);
        assert_eq!(cfg.chat.unwrap().endpoint, "http://x/chat");
    }

    #[test]
    fn bad_env_value_rejected() {
        let mut cfg = AppConfig::default();
        assert!(matches!(
            cfg.apply_env(env(&[("EPMEM_PORT", "lots")])),
            Err(ConfigError::Env { .. })
        ));
    }

    #[test]
    fn offline_with_external_is_error() {
        let mut cfg = AppConfig::default();
        cfg.caption.kind = CaptionProviderKind::ExternalService;
        cfg.caption.endpoint = Some("http://127.0.0.1:1/caption".into());
        cfg.validate(false).unwrap();
        assert!(cfg.validate(true).is_err());
    }

    #[test]
    fn file_paths_relative_to_config() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.json");
        std::fs::write(&p, r#"{"store_path":"m.store","retrieval":{"k":2}}"#).unwrap();
        let cfg = AppConfig::from_file(&p).unwrap();
        assert_eq!(cfg.store_path, dir.path().join("m.store"));
        assert_eq!(cfg.retrieval.k, 2);
        assert_eq!(cfg.retrieval.context_budget_tokens, DEFAULT_CONTEXT_BUDGET_TOKENS);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("cfg.json");
        std::fs::write(&p, r#"{"stor_path":"m.store"}"#).unwrap();
        assert!(matches!(AppConfig::from_file(&p), Err(ConfigError::Parse { .. })));
    }
}
