//! Run-time configuration: live endpoint base URLs and environment variables.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

/// Environment variable naming a fixture registry directory.
pub const ENV_REGISTRY: &str = "CHRONO_REGISTRY";
/// Environment variable naming the response memoization directory for the
/// live backend.
pub const ENV_CACHE: &str = "CHRONO_CACHE";

/// Base URLs for the live backend and for source-artifact URL construction.
#[derive(Debug, Clone, Deserialize, PartialEq, Eq)]
#[serde(default)]
pub struct Endpoints {
    /// Package metadata service (release histories and timelines).
    pub cran_db: String,
    /// CRAN mirror used for source tarball URLs and interpreter sources.
    pub cran_mirror: String,
    /// Bioconductor web root (release-train package indexes and tarballs).
    pub bioc: String,
    /// Code hosting API root.
    pub github_api: String,
    /// Raw file access for code hosting (DESCRIPTION at a commit).
    pub github_raw: String,
    /// Tarball-at-commit download root.
    pub github_codeload: String,
}

impl Default for Endpoints {
    fn default() -> Self {
        Endpoints {
            cran_db: "https://crandb.r-pkg.org".to_string(),
            cran_mirror: "https://cran.r-project.org".to_string(),
            bioc: "https://bioconductor.org".to_string(),
            github_api: "https://api.github.com".to_string(),
            github_raw: "https://raw.githubusercontent.com".to_string(),
            github_codeload: "https://codeload.github.com".to_string(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default)]
pub struct Config {
    pub endpoints: Endpoints,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Schema {
            what: format!("config file {}", path.display()),
            field: String::new(),
            reason: e.to_string(),
        })
    }
}

/// Fixture registry directory from the environment, if set and non-empty.
pub fn registry_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(ENV_REGISTRY)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}

/// Memoization cache directory from the environment, if set and non-empty.
pub fn cache_dir_from_env() -> Option<PathBuf> {
    std::env::var_os(ENV_CACHE)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
}
