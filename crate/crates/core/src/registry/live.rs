//! Live registry backend.
//!
//! Queries public web services for release histories and memoizes every
//! response body to the cache directory (`CHRONO_CACHE`) keyed by the request
//! URL, so a resolution can be replayed offline. This backend is best-effort
//! by design: the hermetic fixture backend is the tested surface, and nothing
//! in the test suite touches the network.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::OnceLock;

use chrono::NaiveDate;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::config::Endpoints;
use crate::data::BiocRelease;
use crate::error::{Error, Result};
use crate::metadata::{
    parse_dcf, parse_dep_field, release_from_dcf, DepKind, DependencySpec, ReleaseRecord, Version,
};

use super::fixture::sort_releases;

const USER_AGENT: &str = concat!("chronoenv/", env!("CARGO_PKG_VERSION"));
/// Upper bound on commits inspected when listing a repository's history.
const GITHUB_HISTORY_LIMIT: usize = 50;

pub struct LiveClient {
    endpoints: Endpoints,
    cache_dir: Option<PathBuf>,
    http: OnceLock<reqwest::blocking::Client>,
}

impl LiveClient {
    pub fn new(endpoints: Endpoints, cache_dir: Option<PathBuf>) -> LiveClient {
        LiveClient {
            endpoints,
            cache_dir,
            http: OnceLock::new(),
        }
    }

    fn client(&self) -> Result<&reqwest::blocking::Client> {
        if self.http.get().is_none() {
            let built = reqwest::blocking::Client::builder()
                .user_agent(USER_AGENT)
                .build()
                .map_err(|e| Error::Transport {
                    context: "building http client".to_string(),
                    reason: e.to_string(),
                })?;
            let _ = self.http.set(built);
        }
        Ok(self.http.get().expect("client just set"))
    }

    /// GET `url`, memoized. `Ok(None)` means a definitive 404 (also cached).
    fn get(&self, url: &str, context: &str) -> Result<Option<String>> {
        if let Some(cached) = self.cache_read(url)? {
            return Ok(if cached == "\u{0}404" {
                None
            } else {
                Some(cached)
            });
        }
        let response = self
            .client()?
            .get(url)
            .send()
            .map_err(|e| transport(context, &e.to_string()))?;
        let status = response.status();
        if status == reqwest::StatusCode::NOT_FOUND {
            self.cache_write(url, "\u{0}404")?;
            return Ok(None);
        }
        if !status.is_success() {
            return Err(transport(context, &format!("{url} answered {status}")));
        }
        let body = response
            .text()
            .map_err(|e| transport(context, &e.to_string()))?;
        self.cache_write(url, &body)?;
        Ok(Some(body))
    }

    fn cache_path(&self, url: &str) -> Option<PathBuf> {
        let dir = self.cache_dir.as_ref()?;
        let mut hasher = Sha256::new();
        hasher.update(url.as_bytes());
        Some(dir.join(format!("{:x}.http", hasher.finalize())))
    }

    fn cache_read(&self, url: &str) -> Result<Option<String>> {
        match self.cache_path(url) {
            Some(path) if path.is_file() => std::fs::read_to_string(&path)
                .map(Some)
                .map_err(|e| Error::io(path, e)),
            _ => Ok(None),
        }
    }

    fn cache_write(&self, url: &str, body: &str) -> Result<()> {
        if let Some(path) = self.cache_path(url) {
            if let Some(parent) = path.parent() {
                std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
            }
            std::fs::write(&path, body).map_err(|e| Error::io(path, e))?;
        }
        Ok(())
    }

    pub fn cran_history(&self, name: &str) -> Result<Vec<ReleaseRecord>> {
        let url = format!("{}/{}/all", self.endpoints.cran_db, name);
        let body = self
            .get(&url, &format!("fetching release history of {name}"))?
            .ok_or_else(|| Error::NotFound {
                what: format!("package reference cran::{name}"),
            })?;
        parse_crandb_history(name, &body)
    }

    pub fn bioc_history(&self, name: &str, calendar: &[BiocRelease]) -> Result<Vec<ReleaseRecord>> {
        let mut records = Vec::new();
        for train in calendar {
            let train_txt = train.bioc_version.raw();
            let url = format!(
                "{}/packages/json/{}/bioc/packages.json",
                self.endpoints.bioc, train_txt
            );
            let Some(body) = self.get(&url, &format!("fetching bioc index {train_txt}"))? else {
                continue;
            };
            if let Some(mut record) = parse_bioc_index_entry(name, &body)? {
                record.published = train.start_date;
                records.push(record);
            }
        }
        if records.is_empty() {
            return Err(Error::NotFound {
                what: format!("package reference bioc::{name}"),
            });
        }
        sort_releases(&mut records);
        // A package keeps its version across trains unless it was updated;
        // collapse consecutive identical versions to the first train.
        records.dedup_by(|b, a| a.version == b.version);
        Ok(records)
    }

    pub fn github_history(&self, slug: &str) -> Result<Vec<ReleaseRecord>> {
        let url = format!(
            "{}/repos/{}/commits?per_page={}",
            self.endpoints.github_api, slug, GITHUB_HISTORY_LIMIT
        );
        let body = self
            .get(&url, &format!("listing commits of {slug}"))?
            .ok_or_else(|| Error::NotFound {
                what: format!("package reference github::{slug}"),
            })?;
        let commits = parse_github_commits(&body)?;
        let mut records = Vec::new();
        for (sha, date) in commits {
            let raw_url = format!("{}/{}/{}/DESCRIPTION", self.endpoints.github_raw, slug, sha);
            let Some(desc) =
                self.get(&raw_url, &format!("fetching DESCRIPTION of {slug}@{sha}"))?
            else {
                continue; // commit without a DESCRIPTION is not a release
            };
            let dcf = match parse_dcf(&desc) {
                Ok(dcf) => dcf,
                Err(_) => continue,
            };
            let Ok(mut record) = release_from_dcf(&dcf, date) else {
                continue;
            };
            record.commit = Some(sha);
            records.push(record);
        }
        if records.is_empty() {
            return Err(Error::NotFound {
                what: format!("github::{slug} has no commit with a parseable DESCRIPTION"),
            });
        }
        sort_releases(&mut records);
        Ok(records)
    }
}

fn transport(context: &str, reason: &str) -> Error {
    Error::Transport {
        context: context.to_string(),
        reason: reason.to_string(),
    }
}

#[derive(Debug, Deserialize)]
struct CrandbDoc {
    #[serde(default)]
    versions: BTreeMap<String, CrandbVersion>,
    #[serde(default)]
    timeline: BTreeMap<String, String>,
}

#[derive(Debug, Deserialize)]
struct CrandbVersion {
    #[serde(rename = "Depends", default)]
    depends: BTreeMap<String, String>,
    #[serde(rename = "Imports", default)]
    imports: BTreeMap<String, String>,
    #[serde(rename = "LinkingTo", default)]
    linking_to: BTreeMap<String, String>,
    #[serde(rename = "Suggests", default)]
    suggests: BTreeMap<String, String>,
    #[serde(rename = "Enhances", default)]
    enhances: BTreeMap<String, String>,
    #[serde(rename = "SystemRequirements", default)]
    system_requirements: Option<String>,
}

/// Parse a crandb `/{pkg}/all` document into release records.
pub(crate) fn parse_crandb_history(name: &str, body: &str) -> Result<Vec<ReleaseRecord>> {
    let doc: CrandbDoc = serde_json::from_str(body).map_err(|e| Error::Schema {
        what: format!("crandb document for {name}"),
        field: String::new(),
        reason: e.to_string(),
    })?;
    let mut records = Vec::new();
    for (ver_text, ver) in &doc.versions {
        let Some(stamp) = doc.timeline.get(ver_text) else {
            continue;
        };
        let Some(published) = parse_timestamp(stamp) else {
            continue;
        };
        let Ok(version) = Version::parse(ver_text) else {
            continue;
        };
        let mut deps = Vec::new();
        for (kind, map) in [
            (DepKind::Depends, &ver.depends),
            (DepKind::Imports, &ver.imports),
            (DepKind::LinkingTo, &ver.linking_to),
            (DepKind::Suggests, &ver.suggests),
            (DepKind::Enhances, &ver.enhances),
        ] {
            for (dep_name, constraint_text) in map {
                let element = if constraint_text.trim().is_empty() || constraint_text == "*" {
                    dep_name.clone()
                } else {
                    format!("{dep_name} ({constraint_text})")
                };
                match parse_dep_field(&element, kind) {
                    Ok(parsed) => deps.extend(parsed),
                    Err(_) => deps.push(DependencySpec {
                        name: dep_name.clone(),
                        kind,
                        constraint: None,
                    }),
                }
            }
        }
        let mut record = ReleaseRecord {
            name: name.to_string(),
            version,
            published,
            deps,
            sysreqs: ver.system_requirements.clone().unwrap_or_default(),
            r_constraint: None,
            commit: None,
        };
        record.normalize();
        records.push(record);
    }
    if records.is_empty() {
        return Err(Error::NotFound {
            what: format!("package reference cran::{name}"),
        });
    }
    sort_releases(&mut records);
    Ok(records)
}

/// Parse one package's entry out of a Bioconductor release-train index.
pub(crate) fn parse_bioc_index_entry(name: &str, body: &str) -> Result<Option<ReleaseRecord>> {
    #[derive(Deserialize)]
    struct Entry {
        #[serde(rename = "Version")]
        version: String,
        #[serde(rename = "Depends", default)]
        depends: Vec<String>,
        #[serde(rename = "Imports", default)]
        imports: Vec<String>,
        #[serde(rename = "LinkingTo", default)]
        linking_to: Vec<String>,
        #[serde(rename = "Suggests", default)]
        suggests: Vec<String>,
        #[serde(rename = "SystemRequirements", default)]
        system_requirements: Option<String>,
    }
    let index: BTreeMap<String, serde_json::Value> =
        serde_json::from_str(body).map_err(|e| Error::Schema {
            what: "bioconductor package index".to_string(),
            field: String::new(),
            reason: e.to_string(),
        })?;
    let Some(value) = index.get(name) else {
        return Ok(None);
    };
    let entry: Entry = serde_json::from_value(value.clone()).map_err(|e| Error::Schema {
        what: format!("bioconductor index entry for {name}"),
        field: String::new(),
        reason: e.to_string(),
    })?;
    let Ok(version) = Version::parse(&entry.version) else {
        return Ok(None);
    };
    let mut deps = Vec::new();
    for (kind, list) in [
        (DepKind::Depends, &entry.depends),
        (DepKind::Imports, &entry.imports),
        (DepKind::LinkingTo, &entry.linking_to),
        (DepKind::Suggests, &entry.suggests),
    ] {
        for element in list {
            if let Ok(parsed) = parse_dep_field(element, kind) {
                deps.extend(parsed);
            }
        }
    }
    let mut record = ReleaseRecord {
        name: name.to_string(),
        version,
        published: super::support_floor(), // caller re-dates to the train start
        deps,
        sysreqs: entry.system_requirements.unwrap_or_default(),
        r_constraint: None,
        commit: None,
    };
    record.normalize();
    Ok(Some(record))
}

/// Parse a commit listing into `(sha, commit date)` pairs, newest first as
/// the API returns them.
pub(crate) fn parse_github_commits(body: &str) -> Result<Vec<(String, NaiveDate)>> {
    #[derive(Deserialize)]
    struct Commit {
        sha: String,
        commit: CommitInner,
    }
    #[derive(Deserialize)]
    struct CommitInner {
        committer: Option<Person>,
        author: Option<Person>,
    }
    #[derive(Deserialize)]
    struct Person {
        date: Option<String>,
    }
    let commits: Vec<Commit> = serde_json::from_str(body).map_err(|e| Error::Schema {
        what: "github commit listing".to_string(),
        field: String::new(),
        reason: e.to_string(),
    })?;
    let mut out = Vec::new();
    for c in commits {
        let stamp = c
            .commit
            .committer
            .and_then(|p| p.date)
            .or(c.commit.author.and_then(|p| p.date));
        if let Some(date) = stamp.as_deref().and_then(parse_timestamp) {
            out.push((c.sha, date));
        }
    }
    Ok(out)
}

fn parse_timestamp(stamp: &str) -> Option<NaiveDate> {
    // Both RFC 3339 timestamps and bare dates appear in the wild.
    stamp
        .get(..10)
        .and_then(|prefix| prefix.parse::<NaiveDate>().ok())
}
