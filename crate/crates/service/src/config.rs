use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use serde::{Deserialize, Serialize};

pub const DEFAULT_BIND: &str = "127.0.0.1:8080";
pub const DEFAULT_MAX_BODY_BYTES: usize = 1 << 20;
pub const DEFAULT_TIMEOUT_MS: u64 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    /// Model bundle directory. Without one, classification answers 503.
    pub models: Option<PathBuf>,
    /// Directory holding `corpus.jsonl` and the `votes.jsonl` log.
    pub store: Option<PathBuf>,
    /// Lexicon directory; missing files fall back to the bundled lists.
    pub lexicons: Option<PathBuf>,
    pub max_body_bytes: usize,
    pub request_timeout_ms: u64,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: DEFAULT_BIND.parse().expect("default bind address"),
            models: None,
            store: None,
            lexicons: None,
            max_body_bytes: DEFAULT_MAX_BODY_BYTES,
            request_timeout_ms: DEFAULT_TIMEOUT_MS,
        }
    }
}

/// Values given explicitly (command-line flags or a config file).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConfigOverrides {
    pub bind: Option<SocketAddr>,
    pub models: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub lexicons: Option<PathBuf>,
    pub max_body_bytes: Option<usize>,
    pub request_timeout_ms: Option<u64>,
}

pub const ENV_VARS: [&str; 6] = [
    "PSYLING_BIND",
    "PSYLING_MODELS",
    "PSYLING_STORE",
    "PSYLING_LEXICONS",
    "PSYLING_MAX_BODY_BYTES",
    "PSYLING_REQUEST_TIMEOUT_MS",
];

impl ConfigOverrides {
    /// Reads the `PSYLING_*` variables through `get`.
    pub fn from_env_with(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        fn parse<T: std::str::FromStr>(key: &str, v: Option<String>) -> Result<Option<T>, String>
        where
            T::Err: std::fmt::Display,
        {
            v.map(|s| s.parse().map_err(|e| format!("{key}={s:?}: {e}"))).transpose()
        }
        let [bind, models, store, lexicons, body, timeout] = ENV_VARS;
        Ok(ConfigOverrides {
            bind: parse(bind, get(bind))?,
            models: get(models).map(PathBuf::from),
            store: get(store).map(PathBuf::from),
            lexicons: get(lexicons).map(PathBuf::from),
            max_body_bytes: parse(body, get(body))?,
            request_timeout_ms: parse(timeout, get(timeout))?,
        })
    }

    pub fn from_env() -> Result<Self, String> {
        Self::from_env_with(|k| std::env::var(k).ok())
    }

    /// Fields set in `self` win over `lower`.
    pub fn or(self, lower: ConfigOverrides) -> ConfigOverrides {
        ConfigOverrides {
            bind: self.bind.or(lower.bind),
            models: self.models.or(lower.models),
            store: self.store.or(lower.store),
            lexicons: self.lexicons.or(lower.lexicons),
            max_body_bytes: self.max_body_bytes.or(lower.max_body_bytes),
            request_timeout_ms: self.request_timeout_ms.or(lower.request_timeout_ms),
        }
    }

    pub fn resolve(self) -> ServiceConfig {
        let d = ServiceConfig::default();
        ServiceConfig {
            bind: self.bind.unwrap_or(d.bind),
            models: self.models,
            store: self.store,
            lexicons: self.lexicons,
            max_body_bytes: self.max_body_bytes.unwrap_or(d.max_body_bytes),
            request_timeout_ms: self.request_timeout_ms.unwrap_or(d.request_timeout_ms),
        }
    }
}

impl ServiceConfig {
    pub fn timeout(&self) -> Duration {
        Duration::from_millis(self.request_timeout_ms)
    }
}
