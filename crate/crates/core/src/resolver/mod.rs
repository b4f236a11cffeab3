//! Snapshot-dated dependency resolution: computes the transitive dependency
//! graph pinned at a snapshot date, its installation order, and its exports.

mod lock;

pub use lock::{export_graph, load_lock, ExportFormat};

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use chrono::NaiveDate;

use crate::data;
use crate::error::{Error, Result};
use crate::metadata::{DepKind, ReleaseRecord, Version};
use crate::pkgref::{PackageRef, Source};
use crate::registry::{support_floor, SnapshotRegistry};

/// One resolved package.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResolvedNode {
    pub source: Source,
    /// `owner/repo` for GitHub, filesystem path for local, empty otherwise.
    pub qualifier: String,
    pub version: Version,
    pub published: NaiveDate,
    pub sysreqs: String,
    /// Download locator for the exact source artifact; empty for local
    /// packages (their sources are copied, not downloaded).
    pub source_url: String,
}

impl ResolvedNode {
    pub fn package_ref(&self, name: &str) -> PackageRef {
        PackageRef {
            source: self.source,
            name: name.to_string(),
            qualifier: self.qualifier.clone(),
            pin: None,
        }
    }
}

/// A dependency edge: `from` needs `to`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub kind: DepKind,
}

/// The output of resolution: every package pinned to its version on the
/// snapshot date.
///
/// Equality deliberately ignores `diagnostics`: they are advisory and are not
/// part of the lockfile contract, so an export/load round trip compares
/// equal.
#[derive(Debug, Clone)]
pub struct ResolvedGraph {
    pub snapshot_date: NaiveDate,
    pub r_version: Version,
    pub os: String,
    pub roots: Vec<PackageRef>,
    pub nodes: BTreeMap<String, ResolvedNode>,
    pub edges: Vec<Edge>,
    pub diagnostics: Vec<String>,
}

impl PartialEq for ResolvedGraph {
    fn eq(&self, other: &Self) -> bool {
        self.snapshot_date == other.snapshot_date
            && self.r_version == other.r_version
            && self.os == other.os
            && self.roots == other.roots
            && self.nodes == other.nodes
            && self.edges == other.edges
    }
}
impl Eq for ResolvedGraph {}

/// Resolution knobs beyond the required arguments.
#[derive(Debug, Clone, Default)]
pub struct ResolveOptions {
    /// Also follow Suggests and Enhances edges (weak dependencies).
    pub include_suggests: bool,
    /// Pin the interpreter explicitly instead of deriving it from the date.
    pub r_version_override: Option<Version>,
}

/// Resolve the transitive dependency graph of `refs` as of `snapshot_date`.
///
/// Strong dependencies (Depends, Imports, LinkingTo) are followed
/// breadth-first, each pinned by the latest release on or before the
/// snapshot date. Packages bundled with the interpreter are recorded as
/// satisfied by it and excluded from the node set. Roots fail hard when they
/// cannot be resolved; transitive dependencies degrade to diagnostics so a
/// period-appropriate best effort is still produced.
pub fn resolve(
    refs: &[PackageRef],
    snapshot_date: NaiveDate,
    os: &str,
    registry: &SnapshotRegistry,
    options: &ResolveOptions,
) -> Result<ResolvedGraph> {
    if refs.is_empty() {
        return Err(Error::InvalidOption(
            "at least one package reference is required".to_string(),
        ));
    }
    if snapshot_date < support_floor() {
        return Err(Error::UnsupportedEra {
            date: snapshot_date,
            floor: support_floor(),
        });
    }

    let r_version = match &options.r_version_override {
        Some(v) => v.clone(),
        None => registry.interpreter_version_at(snapshot_date)?,
    };
    let base_packages = data::base_packages_for(&r_version);

    let mut diagnostics: Vec<String> = Vec::new();
    let mut nodes: BTreeMap<String, ResolvedNode> = BTreeMap::new();
    let mut records: BTreeMap<String, ReleaseRecord> = BTreeMap::new();
    let mut edges: BTreeSet<Edge> = BTreeSet::new();
    let mut queue: VecDeque<String> = VecDeque::new();
    let mut unresolved: BTreeSet<String> = BTreeSet::new();
    let mut base_hits: BTreeSet<String> = BTreeSet::new();

    let mut roots: Vec<PackageRef> = Vec::new();
    for r in refs {
        if roots.contains(r) {
            continue;
        }
        roots.push(r.clone());
        let record = resolve_root(r, snapshot_date, registry)?;
        // The declared package name wins over the reference spelling: a
        // github repo or local directory may be named differently from the
        // package it contains, and dependency edges use the declared name.
        let name = record.name.clone();
        if nodes.contains_key(&name) {
            diagnostics.push(format!(
                "root {r}: package name {name} already resolved from an earlier root; keeping the first"
            ));
            continue;
        }
        let node = make_node(r, &record, snapshot_date, registry)?;
        queue.push_back(name.clone());
        nodes.insert(name.clone(), node);
        records.insert(name, record);
    }

    while let Some(name) = queue.pop_front() {
        let record = records
            .get(&name)
            .expect("queued node has a record")
            .clone();
        if let Some(rc) = &record.r_constraint {
            if !rc.satisfied_by(&r_version) {
                diagnostics.push(format!(
                    "{name} {} requires R ({rc}) but the snapshot interpreter is {r_version}",
                    record.version
                ));
            }
        }
        for dep in &record.deps {
            if !dep.kind.is_strong() && !options.include_suggests {
                continue;
            }
            if base_packages.contains(&dep.name) {
                base_hits.insert(dep.name.clone());
                continue;
            }
            if !nodes.contains_key(&dep.name) {
                if unresolved.contains(&dep.name) {
                    continue;
                }
                let dep_ref = if registry.bioc_names().contains(&dep.name) {
                    PackageRef::bioc(&dep.name)
                } else {
                    PackageRef::cran(&dep.name)
                };
                match registry.latest_at(&dep_ref, snapshot_date) {
                    Ok(dep_record) => {
                        let node = make_node(&dep_ref, &dep_record, snapshot_date, registry)?;
                        queue.push_back(dep.name.clone());
                        nodes.insert(dep.name.clone(), node);
                        records.insert(dep.name.clone(), dep_record);
                    }
                    Err(e @ (Error::NotFound { .. } | Error::NotAvailableAtDate { .. })) => {
                        diagnostics.push(format!("unresolved dependency of {name}: {e}"));
                        unresolved.insert(dep.name.clone());
                        continue;
                    }
                    Err(other) => return Err(other),
                }
            }
            edges.insert(Edge {
                from: name.clone(),
                to: dep.name.clone(),
                kind: dep.kind,
            });
            if let Some(constraint) = &dep.constraint {
                let pinned = &nodes[&dep.name].version;
                if !constraint.satisfied_by(pinned) {
                    diagnostics.push(format!(
                        "{name} {} requires {} ({constraint}) but {pinned} is pinned at the snapshot",
                        record.version, dep.name
                    ));
                }
            }
        }
    }

    if !base_hits.is_empty() {
        let list: Vec<&str> = base_hits.iter().map(String::as_str).collect();
        diagnostics.push(format!(
            "satisfied by interpreter {r_version}: {}",
            list.join(", ")
        ));
    }

    Ok(ResolvedGraph {
        snapshot_date,
        r_version,
        os: os.to_string(),
        roots,
        nodes,
        edges: edges.into_iter().collect(),
        diagnostics,
    })
}

/// Resolve a root reference, honoring an exact pin when present.
fn resolve_root(
    r: &PackageRef,
    snapshot_date: NaiveDate,
    registry: &SnapshotRegistry,
) -> Result<ReleaseRecord> {
    let Some(pin) = &r.pin else {
        return registry.latest_at(r, snapshot_date);
    };
    let history = registry.release_history(r)?;
    let record = if r.source == Source::Github {
        history
            .iter()
            .find(|rec| rec.commit.as_deref() == Some(pin.as_str()))
            .or_else(|| {
                history.iter().find(|rec| {
                    rec.commit
                        .as_deref()
                        .map(|c| c.starts_with(pin.as_str()))
                        .unwrap_or(false)
                })
            })
    } else {
        let pinned_version = Version::parse(pin)?;
        history.iter().find(|rec| rec.version == pinned_version)
    };
    let record = record.cloned().ok_or_else(|| Error::NotFound {
        what: format!("pinned release {r}"),
    })?;
    if record.published > snapshot_date {
        return Err(Error::NotAvailableAtDate {
            name: r.to_string(),
            date: snapshot_date,
            earliest: record.published,
        });
    }
    Ok(record)
}

fn make_node(
    r: &PackageRef,
    record: &ReleaseRecord,
    snapshot_date: NaiveDate,
    registry: &SnapshotRegistry,
) -> Result<ResolvedNode> {
    let source_url = source_url(r, record, snapshot_date, registry)?;
    Ok(ResolvedNode {
        source: r.source,
        qualifier: r.qualifier.clone(),
        version: record.version.clone(),
        published: record.published,
        sysreqs: record.sysreqs.clone(),
        source_url,
    })
}

/// The stable public download location for one release.
///
/// CRAN keeps only the newest release under `src/contrib`; superseded ones
/// live in the immutable `Archive` tree. Bioconductor tarballs sit under the
/// release train that shipped them, and GitHub sources are fetched as a
/// tarball at the exact commit.
fn source_url(
    r: &PackageRef,
    record: &ReleaseRecord,
    snapshot_date: NaiveDate,
    registry: &SnapshotRegistry,
) -> Result<String> {
    let ep = registry.endpoints();
    let name = &record.name;
    let ver = record.version.raw();
    match r.source {
        Source::Cran => {
            if registry.is_latest_overall(r, &record.version)? {
                Ok(format!(
                    "{}/src/contrib/{name}_{ver}.tar.gz",
                    ep.cran_mirror
                ))
            } else {
                Ok(format!(
                    "{}/src/contrib/Archive/{name}/{name}_{ver}.tar.gz",
                    ep.cran_mirror
                ))
            }
        }
        Source::Bioc => {
            let train = registry
                .bioc_version_at(record.published)
                .or_else(|_| registry.bioc_version_at(snapshot_date))?;
            Ok(format!(
                "{}/packages/{}/bioc/src/contrib/{name}_{ver}.tar.gz",
                ep.bioc,
                train.raw()
            ))
        }
        Source::Github => {
            let git_ref = record.commit.clone().unwrap_or_else(|| ver.to_string());
            Ok(format!(
                "{}/{}/tar.gz/{git_ref}",
                ep.github_codeload, r.qualifier
            ))
        }
        Source::Local => Ok(String::new()),
    }
}

/// A dependency-respecting installation order plus any cycle diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstallOrder {
    pub order: Vec<String>,
    pub diagnostics: Vec<String>,
}

/// Topological order over the strong-dependency edges.
///
/// Every package appears after all of its dependencies; ties among ready
/// nodes break lexicographically so the order is deterministic. Cycles are
/// broken at the edge that closes the cycle during a deterministic walk, with
/// a diagnostic naming the cycle, and ordering proceeds — the result is
/// always a complete permutation of the node set.
pub fn install_order(graph: &ResolvedGraph) -> InstallOrder {
    let mut deps: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut dependents: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for name in graph.nodes.keys() {
        deps.insert(name, BTreeSet::new());
        dependents.insert(name, BTreeSet::new());
    }
    for edge in &graph.edges {
        if !edge.kind.is_strong() {
            continue;
        }
        if edge.from == edge.to {
            continue; // self-loops cannot constrain an order
        }
        if deps.contains_key(edge.from.as_str()) && deps.contains_key(edge.to.as_str()) {
            deps.get_mut(edge.from.as_str()).unwrap().insert(&edge.to);
            dependents
                .get_mut(edge.to.as_str())
                .unwrap()
                .insert(&edge.from);
        }
    }

    let mut diagnostics = Vec::new();
    let mut order: Vec<String> = Vec::with_capacity(graph.nodes.len());
    let mut ready: BTreeSet<&str> = deps
        .iter()
        .filter(|(_, d)| d.is_empty())
        .map(|(n, _)| *n)
        .collect();
    let mut placed: BTreeSet<&str> = BTreeSet::new();

    while order.len() < graph.nodes.len() {
        if let Some(&next) = ready.iter().next() {
            ready.remove(next);
            placed.insert(next);
            order.push(next.to_string());
            for dependent in dependents.get(next).cloned().unwrap_or_default() {
                if let Some(d) = deps.get_mut(dependent) {
                    d.remove(next);
                    if d.is_empty() && !placed.contains(dependent) {
                        ready.insert(dependent);
                    }
                }
            }
            continue;
        }
        // Every remaining node waits on another remaining node: walk the
        // smallest one until a node repeats, then drop the closing edge.
        let start = deps
            .iter()
            .find(|(n, d)| !placed.contains(*n) && !d.is_empty())
            .map(|(n, _)| *n)
            .expect("stuck order implies a waiting node");
        let mut path: Vec<&str> = vec![start];
        let mut on_path: BTreeSet<&str> = path.iter().copied().collect();
        let (from, to) = loop {
            let current = *path.last().expect("path is non-empty");
            let next = *deps[current]
                .iter()
                .next()
                .expect("waiting node has a pending dependency");
            if on_path.contains(next) {
                break (current, next);
            }
            on_path.insert(next);
            path.push(next);
        };
        let cycle_start = path.iter().position(|n| *n == to).unwrap_or(0);
        let mut cycle: Vec<&str> = path[cycle_start..].to_vec();
        cycle.push(to);
        diagnostics.push(format!(
            "dependency cycle broken for ordering: {} (ignored edge {from} -> {to})",
            cycle.join(" -> ")
        ));
        deps.get_mut(from).map(|d| d.remove(to));
        dependents.get_mut(to).map(|d| d.remove(from));
        if deps[from].is_empty() {
            ready.insert(from);
        }
    }

    InstallOrder { order, diagnostics }
}
