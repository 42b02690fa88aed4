//! Service configuration: one TOML file plus `AGENTBUDDY_*` overrides.
//!
//! Every scalar key can be overridden from the environment. The variable name
//! is `AGENTBUDDY_` followed by the key path in upper case with dots turned
//! into underscores, e.g. `AGENTBUDDY_TOKEN` or `AGENTBUDDY_POLICY_ALPHA`.
//! Relative paths are resolved against the directory holding the file.

use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use deskbandit::clarifier::AmbiguityConfig;
use deskbandit::featurizer::FeaturizerConfig;
use deskbandit::policy::PolicyConfig;
use serde::{Deserialize, Serialize};

use crate::ServiceError;

pub const ENV_PREFIX: &str = "AGENTBUDDY_";

/// Hashed context width used by the service. Per-arm state is `d × d`.
pub const SERVICE_FEATURE_DIM: u32 = 256;

fn default_ttl() -> u64 {
    24 * 60 * 60 * 1000
}

fn default_top_k() -> usize {
    3
}

fn default_featurizer() -> FeaturizerConfig {
    FeaturizerConfig {
        dimension: SERVICE_FEATURE_DIM,
        ..FeaturizerConfig::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClarifierSettings {
    /// Size of the initial candidate set taken from search.
    pub top_candidates: usize,
    pub near_ratio: f64,
    pub min_near: usize,
    pub margin: f64,
    /// Candidate count at or below which the clarification resolves.
    pub resolve_threshold: usize,
    /// Append a confirmed term to the session history.
    pub refeaturize: bool,
}

impl Default for ClarifierSettings {
    fn default() -> Self {
        let a = AmbiguityConfig::default();
        Self {
            top_candidates: 20,
            near_ratio: a.near_ratio,
            min_near: a.min_near,
            margin: a.margin,
            resolve_threshold: 3,
            refeaturize: true,
        }
    }
}

impl ClarifierSettings {
    pub fn ambiguity(&self) -> AmbiguityConfig {
        AmbiguityConfig {
            near_ratio: self.near_ratio,
            min_near: self.min_near,
            margin: self.margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RemoteArmConfig {
    pub name: String,
    pub endpoint: String,
    #[serde(default = "default_remote_timeout")]
    pub timeout_ms: u64,
}

fn default_remote_timeout() -> u64 {
    500
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub listen: String,
    pub token: String,
    pub corpus_path: PathBuf,
    pub faq_path: PathBuf,
    pub log_path: PathBuf,
    pub snapshot_path: PathBuf,
    #[serde(default = "default_ttl")]
    pub feedback_ttl_ms: u64,
    #[serde(default)]
    pub seed: u64,
    /// Titles listed by the search arm.
    #[serde(default = "default_top_k")]
    pub search_top_k: usize,
    #[serde(default)]
    pub policy: PolicyConfig,
    #[serde(default = "default_featurizer")]
    pub featurizer: FeaturizerConfig,
    #[serde(default)]
    pub clarifier: ClarifierSettings,
    #[serde(default)]
    pub remote_arms: Vec<RemoteArmConfig>,
}

fn bad(msg: impl Into<String>) -> ServiceError {
    ServiceError::Config(msg.into())
}

/// Overwrites scalar leaves whose env name is present in `vars`.
fn apply_overrides(value: &mut toml::Value, path: &str, vars: &[(String, String)]) -> Result<(), ServiceError> {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t.iter_mut() {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                apply_overrides(v, &p, vars)?;
            }
        }
        toml::Value::Array(_) => {}
        leaf => {
            let name = format!("{ENV_PREFIX}{}", path.replace('.', "_").to_uppercase());
            if let Some((_, raw)) = vars.iter().find(|(k, _)| *k == name) {
                *leaf = if leaf.is_str() {
                    toml::Value::String(raw.clone())
                } else {
                    let doc: toml::Table = format!("v = {raw}")
                        .parse()
                        .map_err(|_| bad(format!("{name}: cannot parse {raw:?}")))?;
                    doc["v"].clone()
                };
            }
        }
    }
    Ok(())
}

impl ServiceConfig {
    /// Parses, applies environment overrides and resolves relative paths
    /// against `base`. Does not validate.
    pub fn parse(text: &str, base: &Path, vars: &[(String, String)]) -> Result<Self, ServiceError> {
        let parsed: ServiceConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        let mut value = toml::Value::try_from(&parsed).map_err(|e| bad(e.to_string()))?;
        apply_overrides(&mut value, "", vars)?;
        let mut cfg: ServiceConfig = value.try_into().map_err(|e: toml::de::Error| bad(e.to_string()))?;
        for p in [
            &mut cfg.corpus_path,
            &mut cfg.faq_path,
            &mut cfg.log_path,
            &mut cfg.snapshot_path,
        ] {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    /// Reads the file, applies the process environment and validates.
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        let vars: Vec<(String, String)> = std::env::vars().filter(|(k, _)| k.starts_with(ENV_PREFIX)).collect();
        let base = path.parent().unwrap_or(Path::new("."));
        let cfg = Self::parse(&text, base, &vars)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn listen_addr(&self) -> Result<SocketAddr, ServiceError> {
        self.listen
            .parse()
            .map_err(|_| bad(format!("listen: not a socket address: {:?}", self.listen)))
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        if self.token.trim().is_empty() {
            return Err(bad("token must be non-empty"));
        }
        self.listen_addr()?;
        for (key, p) in [("corpus_path", &self.corpus_path), ("faq_path", &self.faq_path)] {
            if !p.exists() {
                return Err(bad(format!("{key}: {} does not exist", p.display())));
            }
        }
        for (key, p) in [("log_path", &self.log_path), ("snapshot_path", &self.snapshot_path)] {
            let parent = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
            if !parent.is_dir() {
                return Err(bad(format!("{key}: directory {} does not exist", parent.display())));
            }
        }
        if self.feedback_ttl_ms == 0 {
            return Err(bad("feedback_ttl_ms must be positive"));
        }
        if self.search_top_k == 0 || self.clarifier.top_candidates == 0 {
            return Err(bad("search_top_k and clarifier.top_candidates must be positive"));
        }
        self.policy.validate().map_err(|e| bad(e.to_string()))?;
        self.featurizer.validate().map_err(|e| bad(e.to_string()))?;
        let mut names: Vec<&str> = self.remote_arms.iter().map(|r| r.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(bad("remote arm names must be unique"));
        }
        Ok(())
    }
}
