//! Service configuration: one TOML file, with `A2T_PORT` and `A2T_DATA_DIR`
//! overriding the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::{Result, ServiceError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    pub data_dir: PathBuf,
    /// Write a state snapshot after this many appended judgments; 0 disables.
    pub snapshot_every: u64,
    pub auth: AuthConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuthConfig {
    /// When false, the annotator named in the request is trusted.
    pub required: bool,
    pub session_ttl_secs: u64,
    /// Annotator id -> pre-issued access code. Annotators without a code
    /// cannot open sessions while auth is required.
    pub access_codes: BTreeMap<String, String>,
    /// Bearer token for the analysis export (carries system tags).
    pub admin_token: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            host: "127.0.0.1".into(),
            port: 8080,
            data_dir: PathBuf::from("data"),
            snapshot_every: 100,
            auth: AuthConfig::default(),
        }
    }
}

impl Default for AuthConfig {
    fn default() -> Self {
        AuthConfig {
            required: true,
            session_ttl_secs: 8 * 3600,
            access_codes: BTreeMap::new(),
            admin_token: None,
        }
    }
}

impl ServiceConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| ServiceError::Config {
            path: origin.to_path_buf(),
            message: e.message().to_string(),
        })
    }

    /// Read the file if given, then apply environment overrides.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => Self::parse(&std::fs::read_to_string(p).map_err(ServiceError::file(p))?, p)?,
            None => ServiceConfig::default(),
        };
        cfg.apply_env(|k| std::env::var(k).ok())?;
        Ok(cfg)
    }

    pub fn apply_env(&mut self, var: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(port) = var("A2T_PORT") {
            self.port = port.parse().map_err(|_| ServiceError::Config {
                path: "A2T_PORT".into(),
                message: format!("not a port number: {port:?}"),
            })?;
        }
        if let Some(dir) = var("A2T_DATA_DIR") {
            self.data_dir = dir.into();
        }
        Ok(())
    }
}
