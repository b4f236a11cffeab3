//! On-disk fixture registry.
//!
//! Layout (all JSON, UTF-8):
//!
//! ```text
//! <root>/
//!   r_releases.json            # optional override of the shipped table
//!   bioc_releases.json         # optional override of the shipped calendar
//!   cran/<pkg>.json            # release list for one CRAN package
//!   bioc/<train>/<pkg>.json    # release list within one release train
//!   github/<owner>/<repo>.json # commit "releases" for one repository
//! ```
//!
//! Each package file is a list of release objects
//! `{version, date, deps: [{name, kind, op?, ver?}], sysreqs?, r_constraint?,
//! commit?}`. The `commit` field applies to github entries and carries the
//! commit identifier the entry was taken from; the `date` of a github entry is
//! the commit timestamp chosen by the fixture curator.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use serde::Deserialize;

use crate::data::{BiocRelease, InterpreterRelease};
use crate::error::{Error, Result};
use crate::metadata::{
    ConstraintOp, DepKind, DependencySpec, ReleaseRecord, Version, VersionConstraint,
};

#[derive(Debug, Deserialize)]
struct RawRelease {
    version: String,
    date: NaiveDate,
    #[serde(default)]
    deps: Vec<RawDep>,
    #[serde(default)]
    sysreqs: String,
    #[serde(default)]
    r_constraint: Option<RawConstraint>,
    #[serde(default)]
    commit: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawDep {
    name: String,
    kind: String,
    #[serde(default)]
    op: Option<String>,
    #[serde(default)]
    ver: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawConstraint {
    op: String,
    ver: String,
}

/// In-memory form of a fixture registry. Also constructible directly for
/// hermetic tests.
#[derive(Debug, Default)]
pub struct FixtureStore {
    pub cran: BTreeMap<String, Vec<ReleaseRecord>>,
    /// train version text -> package -> releases
    pub bioc: BTreeMap<String, BTreeMap<String, Vec<ReleaseRecord>>>,
    /// "owner/repo" -> releases
    pub github: BTreeMap<String, Vec<ReleaseRecord>>,
    pub r_releases: Option<Vec<InterpreterRelease>>,
    pub bioc_releases: Option<Vec<BiocRelease>>,
    pub diagnostics: Vec<String>,
}

impl FixtureStore {
    /// A store with only CRAN entries, for tests and programmatic use.
    pub fn from_cran_records(cran: BTreeMap<String, Vec<ReleaseRecord>>) -> Self {
        let mut store = FixtureStore {
            cran,
            ..FixtureStore::default()
        };
        for records in store.cran.values_mut() {
            sort_releases(records);
        }
        store
    }

    pub fn load(root: &Path) -> Result<FixtureStore> {
        if !root.is_dir() {
            return Err(Error::io(
                root,
                std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    "fixture root is not a directory",
                ),
            ));
        }
        let mut store = FixtureStore::default();

        let r_releases_path = root.join("r_releases.json");
        if r_releases_path.is_file() {
            let text = read(&r_releases_path)?;
            store.r_releases = Some(crate::data::parse_r_releases(&text)?);
        }
        let bioc_releases_path = root.join("bioc_releases.json");
        if bioc_releases_path.is_file() {
            let text = read(&bioc_releases_path)?;
            store.bioc_releases = Some(crate::data::parse_bioc_releases(&text)?);
        }

        let cran_dir = root.join("cran");
        if cran_dir.is_dir() {
            for (stem, path) in json_files(&cran_dir)? {
                let records = load_release_file(&path, &stem, &mut store.diagnostics)?;
                store.cran.insert(stem, records);
            }
        }

        let bioc_dir = root.join("bioc");
        if bioc_dir.is_dir() {
            for train in sorted_subdirs(&bioc_dir)? {
                let train_name = dir_name(&train);
                let mut packages = BTreeMap::new();
                for (stem, path) in json_files(&train)? {
                    let records = load_release_file(&path, &stem, &mut store.diagnostics)?;
                    packages.insert(stem, records);
                }
                store.bioc.insert(train_name, packages);
            }
        }

        let github_dir = root.join("github");
        if github_dir.is_dir() {
            for owner in sorted_subdirs(&github_dir)? {
                let owner_name = dir_name(&owner);
                for (stem, path) in json_files(&owner)? {
                    let mut records = load_release_file(&path, &stem, &mut store.diagnostics)?;
                    for r in &mut records {
                        if r.commit.is_none() {
                            store.diagnostics.push(format!(
                                "github fixture {owner_name}/{stem} {}: no commit; \
                                 the version text will be used as the download ref",
                                r.version
                            ));
                        }
                    }
                    store.github.insert(format!("{owner_name}/{stem}"), records);
                }
            }
        }

        Ok(store)
    }

    /// All package names present under any bioc train, used to extend the
    /// shorthand disambiguation list.
    pub fn bioc_package_names(&self) -> impl Iterator<Item = &String> {
        self.bioc.values().flat_map(|pkgs| pkgs.keys())
    }

    /// Union of a bioc package's releases across all trains, ascending by
    /// (date, version).
    pub fn bioc_history(&self, name: &str) -> Vec<ReleaseRecord> {
        let mut out: Vec<ReleaseRecord> = self
            .bioc
            .values()
            .filter_map(|pkgs| pkgs.get(name))
            .flatten()
            .cloned()
            .collect();
        sort_releases(&mut out);
        out
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn dir_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default()
}

fn sorted_subdirs(dir: &Path) -> Result<Vec<std::path::PathBuf>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        if entry.path().is_dir() {
            out.push(entry.path());
        }
    }
    out.sort();
    Ok(out)
}

fn json_files(dir: &Path) -> Result<Vec<(String, std::path::PathBuf)>> {
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) == Some("json") && path.is_file() {
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            out.push((stem, path));
        }
    }
    out.sort();
    Ok(out)
}

fn load_release_file(
    path: &Path,
    name: &str,
    diagnostics: &mut Vec<String>,
) -> Result<Vec<ReleaseRecord>> {
    let text = read(path)?;
    let raw: Vec<RawRelease> = serde_json::from_str(&text).map_err(|e| Error::Schema {
        what: path.display().to_string(),
        field: String::new(),
        reason: e.to_string(),
    })?;
    let mut records = Vec::with_capacity(raw.len());
    for r in raw {
        records.push(convert_release(path, name, r, diagnostics)?);
    }
    sort_releases(&mut records);
    Ok(records)
}

fn convert_release(
    path: &Path,
    name: &str,
    raw: RawRelease,
    diagnostics: &mut Vec<String>,
) -> Result<ReleaseRecord> {
    let schema = |field: &str, reason: String| Error::Schema {
        what: path.display().to_string(),
        field: field.to_string(),
        reason,
    };
    let version = Version::parse(&raw.version).map_err(|e| schema("version", e.to_string()))?;
    let mut deps = Vec::with_capacity(raw.deps.len());
    for d in raw.deps {
        let kind: DepKind = d
            .kind
            .parse()
            .map_err(|_| schema("deps.kind", format!("unknown kind {:?}", d.kind)))?;
        let constraint = match (d.op, d.ver) {
            (Some(op), Some(ver)) => Some(
                parse_constraint(&op, &ver)
                    .map_err(|e| schema("deps", format!("{}: {e}", d.name)))?,
            ),
            (None, None) => None,
            _ => {
                return Err(schema(
                    "deps",
                    format!("{}: op and ver must be given together", d.name),
                ))
            }
        };
        deps.push(DependencySpec {
            name: d.name,
            kind,
            constraint,
        });
    }
    let r_constraint = match raw.r_constraint {
        Some(c) => Some(
            parse_constraint(&c.op, &c.ver).map_err(|e| schema("r_constraint", e.to_string()))?,
        ),
        None => None,
    };
    let mut record = ReleaseRecord {
        name: name.to_string(),
        version,
        published: raw.date,
        deps,
        sysreqs: raw.sysreqs,
        r_constraint,
        commit: raw.commit,
    };
    for diag in record.normalize() {
        diagnostics.push(format!("{}: {diag}", path.display()));
    }
    Ok(record)
}

fn parse_constraint(op: &str, ver: &str) -> Result<VersionConstraint> {
    let op = match op {
        ">=" => ConstraintOp::Ge,
        "<=" => ConstraintOp::Le,
        ">" => ConstraintOp::Gt,
        "<" => ConstraintOp::Lt,
        "==" => ConstraintOp::Eq,
        other => {
            return Err(Error::DepField {
                element: other.to_string(),
                reason: "unknown constraint operator".to_string(),
            })
        }
    };
    Ok(VersionConstraint {
        op,
        version: Version::parse(ver)?,
    })
}

/// Ascending by (date, version); ties on date are broken by version so the
/// later scan "last wins" picks the higher version.
pub(crate) fn sort_releases(records: &mut [ReleaseRecord]) {
    records.sort_by(|a, b| {
        a.published
            .cmp(&b.published)
            .then_with(|| a.version.cmp(&b.version))
    });
}
