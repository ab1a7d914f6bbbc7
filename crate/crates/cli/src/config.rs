//! Server configuration.
//!
//! Values are resolved in this order, later wins:
//!
//! 1. built-in defaults
//! 2. the TOML config file
//! 3. `RIVERECHO_*` environment variables
//!
//! | variable                      | field               |
//! |-------------------------------|---------------------|
//! | `RIVERECHO_LISTEN`            | `listen`            |
//! | `RIVERECHO_GRAPH`             | `graph`             |
//! | `RIVERECHO_STATIC_DIR`        | `static_dir`        |
//! | `RIVERECHO_CORS_ALLOW`        | `cors_allow` (comma separated) |
//! | `RIVERECHO_METRICS_RETENTION` | `metrics_retention` |
//! | `RIVERECHO_BENCH_SESSIONS`    | `bench_sessions`    |
//!
//! Relative paths in the file are resolved against the file's directory.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use riverecho_core::backends::BackendConfig;
use riverecho_core::gateway::DEFAULT_RETENTION;
use riverecho_core::PipelineConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServerConfig {
    pub listen: String,
    /// Persisted graph. When absent the bundled sample corpus is ingested
    /// and built at startup.
    pub graph: Option<PathBuf>,
    pub static_dir: Option<PathBuf>,
    /// Allowed browser origins; empty disables CORS headers.
    pub cors_allow: Vec<String>,
    pub metrics_retention: usize,
    pub bench_sessions: usize,
    pub pipeline: PipelineConfig,
    pub backends: BackendConfig,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig {
            listen: "127.0.0.1:8080".into(),
            graph: None,
            static_dir: None,
            cors_allow: Vec::new(),
            metrics_retention: DEFAULT_RETENTION,
            bench_sessions: 10,
            pipeline: PipelineConfig::default(),
            backends: BackendConfig::default(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("environment variable {var}: {message}")]
    Env { var: &'static str, message: String },
    #[error("{location}: {message}")]
    Invalid { location: String, message: String },
}

impl ServerConfig {
    /// Defaults, then `path` (if any), then the process environment.
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        Self::load_with_env(path, |k| std::env::var(k).ok())
    }

    pub fn load_with_env(
        path: Option<&Path>,
        env: impl Fn(&str) -> Option<String>,
    ) -> Result<Self, ConfigError> {
        let mut cfg = match path {
            Some(p) => Self::from_file(p)?,
            None => ServerConfig::default(),
        };
        cfg.apply_env(env)?;
        cfg.validate(path)?;
        Ok(cfg)
    }

    fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        let mut cfg = Self::from_toml(&text).map_err(|message| ConfigError::Parse {
            path: path.display().to_string(),
            message,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.graph, &mut cfg.static_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Parse errors carry the line and column of the offending key.
    pub fn from_toml(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| {
            let mut msg = e.message().to_owned();
            if let Some(span) = e.span() {
                let (line, col) = line_col(text, span.start);
                msg = format!("line {line}, column {col}: {msg}");
            }
            msg
        })
    }

    fn apply_env(&mut self, env: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = env("RIVERECHO_LISTEN") {
            self.listen = v;
        }
        if let Some(v) = env("RIVERECHO_GRAPH") {
            self.graph = Some(PathBuf::from(v));
        }
        if let Some(v) = env("RIVERECHO_STATIC_DIR") {
            self.static_dir = Some(PathBuf::from(v));
        }
        if let Some(v) = env("RIVERECHO_CORS_ALLOW") {
            self.cors_allow = v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
        }
        if let Some(v) = env("RIVERECHO_METRICS_RETENTION") {
            self.metrics_retention = parse_env("RIVERECHO_METRICS_RETENTION", &v)?;
        }
        if let Some(v) = env("RIVERECHO_BENCH_SESSIONS") {
            self.bench_sessions = parse_env("RIVERECHO_BENCH_SESSIONS", &v)?;
        }
        Ok(())
    }

    pub fn validate(&self, path: Option<&Path>) -> Result<(), ConfigError> {
        let file = path.map_or_else(|| "<defaults>".to_owned(), |p| p.display().to_string());
        let invalid = |field: &str, message: String| ConfigError::Invalid {
            location: format!("{file}: {field}"),
            message,
        };
        self.listen_addr()
            .map_err(|e| invalid("listen", format!("{:?} is not a socket address: {e}", self.listen)))?;
        if self.metrics_retention == 0 {
            return Err(invalid("metrics_retention", "must be > 0".into()));
        }
        if self.bench_sessions == 0 {
            return Err(invalid("bench_sessions", "must be > 0".into()));
        }
        for origin in &self.cors_allow {
            if origin.parse::<axum::http::HeaderValue>().is_err() {
                return Err(invalid("cors_allow", format!("{origin:?} is not a valid origin")));
            }
        }
        self.pipeline.validate().map_err(|m| invalid("pipeline", m))?;
        self.backends.validate().map_err(|m| invalid("backends", m))?;
        Ok(())
    }

    pub fn listen_addr(&self) -> Result<SocketAddr, std::net::AddrParseError> {
        self.listen.parse()
    }
}

fn parse_env<T: std::str::FromStr>(var: &'static str, v: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    v.trim().parse().map_err(|e: T::Err| ConfigError::Env {
        var,
        message: format!("{v:?}: {e}"),
    })
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}
