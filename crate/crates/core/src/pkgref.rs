//! Package references: source-qualified package identifiers.
//!
//! The canonical text grammar is
//!
//! ```text
//! ref    := [prefix "::"] body ["@" pin]
//! prefix := "cran" | "bioc" | "github" | "local"
//! body   := name | owner "/" repo | path
//! ```
//!
//! Shorthands are accepted on input: a bare `owner/repo` token is a GitHub
//! reference, and a bare name is disambiguated against a set of known
//! Bioconductor package names (Bioconductor wins when listed, with a
//! diagnostic; everything else is CRAN).

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The set of package names treated as Bioconductor when disambiguating
/// shorthands.
pub type BiocNames = BTreeSet<String>;

/// Where a package is published.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Cran,
    Bioc,
    Github,
    Local,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Cran => "cran",
            Source::Bioc => "bioc",
            Source::Github => "github",
            Source::Local => "local",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A parsed, source-qualified package identifier.
///
/// `qualifier` is source-specific: `owner/repo` for GitHub, a filesystem path
/// for local packages, and empty for CRAN/Bioconductor. `pin` is an exact
/// version (CRAN/Bioconductor) or commit identifier (GitHub).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PackageRef {
    pub source: Source,
    pub name: String,
    pub qualifier: String,
    pub pin: Option<String>,
}

impl PackageRef {
    pub fn cran(name: impl Into<String>) -> Self {
        PackageRef {
            source: Source::Cran,
            name: name.into(),
            qualifier: String::new(),
            pin: None,
        }
    }

    pub fn bioc(name: impl Into<String>) -> Self {
        PackageRef {
            source: Source::Bioc,
            name: name.into(),
            qualifier: String::new(),
            pin: None,
        }
    }

    pub fn github(owner: &str, repo: &str) -> Self {
        PackageRef {
            source: Source::Github,
            name: repo.to_string(),
            qualifier: format!("{owner}/{repo}"),
            pin: None,
        }
    }

    /// Local package rooted at `path`; the package name is the last path
    /// component.
    pub fn local(path: &str) -> Result<Self> {
        let name = local_name(path)?;
        Ok(PackageRef {
            source: Source::Local,
            name,
            qualifier: path.to_string(),
            pin: None,
        })
    }

    pub fn with_pin(mut self, pin: impl Into<String>) -> Self {
        self.pin = Some(pin.into());
        self
    }

    /// The locator part of the canonical form (`owner/repo` for GitHub, the
    /// path for local, the name otherwise).
    pub fn locator(&self) -> &str {
        match self.source {
            Source::Cran | Source::Bioc => &self.name,
            Source::Github | Source::Local => &self.qualifier,
        }
    }

    /// Same reference without its pin.
    pub fn unpinned(&self) -> PackageRef {
        PackageRef {
            pin: None,
            ..self.clone()
        }
    }
}

impl fmt::Display for PackageRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_ref(self))
    }
}

/// Render the canonical text form `source::locator[@pin]`.
pub fn render_ref(r: &PackageRef) -> String {
    match &r.pin {
        Some(pin) => format!("{}::{}@{}", r.source, r.locator(), pin),
        None => format!("{}::{}", r.source, r.locator()),
    }
}

/// Parse a package reference, honoring explicit prefixes and converting
/// shorthands.
///
/// Bare `owner/repo` tokens become GitHub references; bare names resolve to
/// Bioconductor when listed in `bioc_names` and to CRAN otherwise.
pub fn parse_ref(raw: &str, bioc_names: &BiocNames) -> Result<PackageRef> {
    parse_ref_with_diagnostics(raw, bioc_names, &mut Vec::new())
}

/// Like [`parse_ref`], but records a diagnostic when the bioc-wins shorthand
/// rule fires, so callers can surface the disambiguation.
pub fn parse_ref_with_diagnostics(
    raw: &str,
    bioc_names: &BiocNames,
    diagnostics: &mut Vec<String>,
) -> Result<PackageRef> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(err(raw, "empty reference"));
    }

    let (prefix, rest) = match trimmed.split_once("::") {
        Some((p, rest)) => (Some(p), rest),
        None => (None, trimmed),
    };

    let (body, pin) = match rest.split_once('@') {
        Some((body, pin)) => {
            if pin.is_empty() {
                return Err(err(raw, "empty pin after '@'"));
            }
            (body, Some(pin.to_string()))
        }
        None => (rest, None),
    };
    if body.is_empty() {
        return Err(err(raw, "empty reference body"));
    }

    let mut r = match prefix {
        Some("cran") => {
            check_name(raw, body)?;
            PackageRef::cran(body)
        }
        Some("bioc") => {
            check_name(raw, body)?;
            PackageRef::bioc(body)
        }
        Some("github") => parse_github(raw, body)?,
        Some("local") => PackageRef::local(body).map_err(|_| err(raw, "empty local path"))?,
        Some(other) => {
            return Err(err(raw, &format!("unknown prefix {other:?}")));
        }
        None => {
            if body.contains('/') {
                parse_github(raw, body)?
            } else {
                check_name(raw, body)?;
                if bioc_names.contains(body) {
                    diagnostics.push(format!(
                        "{body}: bare name is listed as a Bioconductor package; \
                         resolved to bioc::{body} (use cran::{body} to override)"
                    ));
                    PackageRef::bioc(body)
                } else {
                    PackageRef::cran(body)
                }
            }
        }
    };
    r.pin = pin;
    Ok(r)
}

fn parse_github(raw: &str, body: &str) -> Result<PackageRef> {
    let parts: Vec<&str> = body.split('/').collect();
    if parts.len() != 2 {
        return Err(err(
            raw,
            "a github reference must be owner/repo with exactly one slash",
        ));
    }
    let (owner, repo) = (parts[0], parts[1]);
    if owner.is_empty() || repo.is_empty() {
        return Err(err(raw, "github owner and repo must be non-empty"));
    }
    check_name(raw, owner)?;
    check_name(raw, repo)?;
    Ok(PackageRef::github(owner, repo))
}

// Names may not contain whitespace, commas or parentheses; github owners and
// repos are held to the same rule.
fn check_name(raw: &str, name: &str) -> Result<()> {
    if name.is_empty() {
        return Err(err(raw, "empty name"));
    }
    if name
        .chars()
        .any(|c| c.is_whitespace() || c == ',' || c == '(' || c == ')')
    {
        return Err(err(
            raw,
            "names may not contain whitespace, commas or parentheses",
        ));
    }
    Ok(())
}

fn local_name(path: &str) -> Result<String> {
    let trimmed = path.trim_end_matches('/');
    let base = trimmed.rsplit('/').next().unwrap_or("");
    if base.is_empty() || base == "." || base == ".." {
        return Err(Error::RefParse {
            input: path.to_string(),
            reason: "local path has no package name component".to_string(),
        });
    }
    Ok(base.to_string())
}

fn err(input: &str, reason: &str) -> Error {
    Error::RefParse {
        input: input.to_string(),
        reason: reason.to_string(),
    }
}
