//! Shared helpers for the integration suites.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::PathBuf;

use chrono::NaiveDate;
use chronoenv::metadata::{DepKind, DependencySpec, ReleaseRecord, Version};
use chronoenv::pkgref::{PackageRef, Source};
use chronoenv::registry::SnapshotRegistry;
use chronoenv::resolver::{Edge, ResolvedGraph, ResolvedNode};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn golden_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/goldens")
        .join(name)
}

pub fn main_registry() -> SnapshotRegistry {
    SnapshotRegistry::from_fixture_dir(&fixture_path("registry")).expect("fixture registry loads")
}

pub fn date(s: &str) -> NaiveDate {
    s.parse().expect("valid date literal")
}

pub fn version(s: &str) -> Version {
    Version::parse(s).expect("valid version literal")
}

pub fn release(name: &str, ver: &str, published: &str, deps: &[(&str, DepKind)]) -> ReleaseRecord {
    ReleaseRecord {
        name: name.to_string(),
        version: version(ver),
        published: date(published),
        deps: deps
            .iter()
            .map(|(n, k)| DependencySpec {
                name: n.to_string(),
                kind: *k,
                constraint: None,
            })
            .collect(),
        sysreqs: String::new(),
        r_constraint: None,
        commit: None,
    }
}

/// Build a graph directly (for ordering and emission tests that do not need
/// a registry).
pub fn graph_of(nodes: &[(&str, &str)], edges: &[(&str, &str)]) -> ResolvedGraph {
    let mut node_map = BTreeMap::new();
    for (name, ver) in nodes {
        node_map.insert(
            name.to_string(),
            ResolvedNode {
                source: Source::Cran,
                qualifier: String::new(),
                version: version(ver),
                published: date("2015-01-01"),
                sysreqs: String::new(),
                source_url: format!("https://example.invalid/{name}_{ver}.tar.gz"),
            },
        );
    }
    ResolvedGraph {
        snapshot_date: date("2016-01-01"),
        r_version: version("3.2.3"),
        os: "ubuntu-18.04".to_string(),
        roots: nodes
            .first()
            .map(|(n, _)| vec![PackageRef::cran(*n)])
            .unwrap_or_default(),
        nodes: node_map,
        edges: edges
            .iter()
            .map(|(from, to)| Edge {
                from: from.to_string(),
                to: to.to_string(),
                kind: DepKind::Imports,
            })
            .collect(),
        diagnostics: Vec::new(),
    }
}
