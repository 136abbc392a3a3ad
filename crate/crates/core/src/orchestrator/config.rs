use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::OrchestratorError;
use crate::encoder::TrainConfig;

const DATA_DIR: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/data");

fn data(name: &str) -> PathBuf {
    Path::new(DATA_DIR).join(name)
}

/// Runtime settings. Loaded from TOML, then `SQLCLARIFY_*` variables win.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub schemas: PathBuf,
    pub examples: PathBuf,
    pub embeddings: PathBuf,
    pub model: PathBuf,
    pub stop_words: Option<PathBuf>,
    pub templates: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    /// Endpoint spec, see `ParserEndpoint::from_spec`.
    pub endpoint: String,
    pub timeout_ms: u64,
    /// Base URL of a service exposing `POST /encode`; static encoding when unset.
    pub encoder_url: Option<String>,
    /// Combinations simulated per example; 0 disables the cap.
    pub cap: usize,
    /// Options per question, Value and None included.
    pub k: usize,
    pub session_ttl_secs: u64,
    pub session_log: Option<PathBuf>,
    pub train: TrainConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            schemas: data("schemas.jsonl"),
            examples: data("examples.jsonl"),
            embeddings: data("embeddings.txt"),
            model: data("model.json"),
            stop_words: None,
            templates: None,
            rules: None,
            endpoint: "toy".into(),
            timeout_ms: 30_000,
            encoder_url: None,
            cap: 100,
            k: 5,
            session_ttl_secs: 3600,
            session_log: None,
            train: TrainConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, OrchestratorError> {
        toml::from_str(text).map_err(|e| OrchestratorError::Config(e.to_string()))
    }

    /// Reads `path` when given, then applies the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, OrchestratorError> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| OrchestratorError::Config(format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<(), OrchestratorError> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, OrchestratorError> {
            v.trim().parse().map_err(|_| OrchestratorError::Config(format!("{key}={v:?} is not a number")))
        }
        if let Some(v) = var("SQLCLARIFY_SCHEMAS") {
            self.schemas = v.into();
        }
        if let Some(v) = var("SQLCLARIFY_EXAMPLES") {
            self.examples = v.into();
        }
        if let Some(v) = var("SQLCLARIFY_EMBEDDINGS") {
            self.embeddings = v.into();
        }
        if let Some(v) = var("SQLCLARIFY_MODEL") {
            self.model = v.into();
        }
        if let Some(v) = var("SQLCLARIFY_STOP_WORDS") {
            self.stop_words = Some(v.into());
        }
        if let Some(v) = var("SQLCLARIFY_TEMPLATES") {
            self.templates = Some(v.into());
        }
        if let Some(v) = var("SQLCLARIFY_RULES") {
            self.rules = Some(v.into());
        }
        if let Some(v) = var("SQLCLARIFY_ENDPOINT") {
            self.endpoint = v;
        }
        if let Some(v) = var("SQLCLARIFY_TIMEOUT_MS") {
            self.timeout_ms = num("SQLCLARIFY_TIMEOUT_MS", &v)?;
        }
        if let Some(v) = var("SQLCLARIFY_ENCODER_URL") {
            self.encoder_url = Some(v).filter(|s| !s.is_empty());
        }
        if let Some(v) = var("SQLCLARIFY_CAP") {
            self.cap = num("SQLCLARIFY_CAP", &v)?;
        }
        if let Some(v) = var("SQLCLARIFY_K") {
            self.k = num("SQLCLARIFY_K", &v)?;
        }
        if let Some(v) = var("SQLCLARIFY_SESSION_TTL") {
            self.session_ttl_secs = num("SQLCLARIFY_SESSION_TTL", &v)?;
        }
        if let Some(v) = var("SQLCLARIFY_SESSION_LOG") {
            self.session_log = Some(v.into());
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), OrchestratorError> {
        if self.k < 3 {
            return Err(OrchestratorError::Config(format!("k = {} but questions need at least 3 options", self.k)));
        }
        self.train.validate().map_err(|e| OrchestratorError::Config(e.to_string()))
    }

    pub fn cap(&self) -> Option<usize> {
        (self.cap > 0).then_some(self.cap)
    }
}
