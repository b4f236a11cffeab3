//! Graph exports: the canonical JSON lockfile plus DOT and edge-list text.
//!
//! Lockfile layout (JSON, UTF-8, object keys sorted, trailing newline):
//!
//! ```text
//! {
//!   "edges": [[from, to, kind], ...],
//!   "nodes": {name: {published, qualifier, source, source_url, sysreqs, version}},
//!   "os": "...",
//!   "r_version": "...",
//!   "roots": ["cran::pkg", ...],
//!   "schema_version": 1,
//!   "snapshot_date": "YYYY-MM-DD"
//! }
//! ```
//!
//! Unknown extra fields load with a diagnostic rather than an error, so a
//! lockfile written by a newer schema still drives `dockerize`.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metadata::{DepKind, Version};
use crate::pkgref::{parse_ref, BiocNames, Source};

use super::{Edge, ResolvedGraph, ResolvedNode};

pub const SCHEMA_VERSION: u64 = 1;

/// Text formats a graph can be exported to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    /// Graphviz DOT: one node statement per package (labeled `name@version`),
    /// one edge statement per dependency edge.
    Dot,
    /// `dependent<TAB>dependency<TAB>kind` lines.
    EdgeList,
    /// The canonical JSON lockfile.
    Lock,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dot" => Ok(ExportFormat::Dot),
            "edgelist" => Ok(ExportFormat::EdgeList),
            "lock" => Ok(ExportFormat::Lock),
            other => Err(Error::InvalidOption(format!(
                "unknown export format {other:?} (expected dot, edgelist or lock)"
            ))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct LockFile {
    schema_version: u64,
    snapshot_date: NaiveDate,
    r_version: Version,
    os: String,
    roots: Vec<String>,
    nodes: BTreeMap<String, LockNode>,
    edges: Vec<(String, String, DepKind)>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LockNode {
    source: Source,
    qualifier: String,
    version: Version,
    published: NaiveDate,
    sysreqs: String,
    source_url: String,
}

/// Render `graph` in the requested format. All outputs are byte-deterministic
/// functions of the graph (nodes and edges are emitted sorted).
pub fn export_graph(graph: &ResolvedGraph, format: ExportFormat) -> String {
    match format {
        ExportFormat::Dot => export_dot(graph),
        ExportFormat::EdgeList => export_edgelist(graph),
        ExportFormat::Lock => export_lock(graph),
    }
}

fn export_dot(graph: &ResolvedGraph) -> String {
    let mut out = String::from("digraph dependencies {\n");
    for (name, node) in &graph.nodes {
        out.push_str(&format!(
            "  \"{name}\" [label=\"{name}@{}\"];\n",
            node.version
        ));
    }
    let mut edges: Vec<&Edge> = graph.edges.iter().collect();
    edges.sort();
    for e in edges {
        out.push_str(&format!(
            "  \"{}\" -> \"{}\" [label=\"{}\"];\n",
            e.from, e.to, e.kind
        ));
    }
    out.push_str("}\n");
    out
}

fn export_edgelist(graph: &ResolvedGraph) -> String {
    let mut edges: Vec<&Edge> = graph.edges.iter().collect();
    edges.sort();
    let mut out = String::new();
    for e in edges {
        out.push_str(&format!("{}\t{}\t{}\n", e.from, e.to, e.kind));
    }
    out
}

fn export_lock(graph: &ResolvedGraph) -> String {
    let mut edges: Vec<(String, String, DepKind)> = graph
        .edges
        .iter()
        .map(|e| (e.from.clone(), e.to.clone(), e.kind))
        .collect();
    edges.sort();
    let lock = LockFile {
        schema_version: SCHEMA_VERSION,
        snapshot_date: graph.snapshot_date,
        r_version: graph.r_version.clone(),
        os: graph.os.clone(),
        roots: graph.roots.iter().map(|r| r.to_string()).collect(),
        nodes: graph
            .nodes
            .iter()
            .map(|(name, n)| {
                (
                    name.clone(),
                    LockNode {
                        source: n.source,
                        qualifier: n.qualifier.clone(),
                        version: n.version.clone(),
                        published: n.published,
                        sysreqs: n.sysreqs.clone(),
                        source_url: n.source_url.clone(),
                    },
                )
            })
            .collect(),
        edges,
    };
    // serializing via Value sorts all object keys
    let value = serde_json::to_value(&lock).expect("lockfile serializes");
    let mut text = serde_json::to_string_pretty(&value).expect("lockfile serializes");
    text.push('\n');
    text
}

const KNOWN_TOP_LEVEL: &[&str] = &[
    "schema_version",
    "snapshot_date",
    "r_version",
    "os",
    "roots",
    "nodes",
    "edges",
];
const KNOWN_NODE_FIELDS: &[&str] = &[
    "source",
    "qualifier",
    "version",
    "published",
    "sysreqs",
    "source_url",
];

/// Load a lockfile back into a graph.
///
/// Missing or ill-typed required fields are schema errors naming the field;
/// unknown extra fields are accepted and reported through the graph's
/// diagnostics.
pub fn load_lock(text: &str) -> Result<ResolvedGraph> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Schema {
        what: "lockfile".to_string(),
        field: String::new(),
        reason: format!("not valid JSON: {e}"),
    })?;

    let mut diagnostics = Vec::new();
    if let Some(object) = value.as_object() {
        for key in object.keys() {
            if !KNOWN_TOP_LEVEL.contains(&key.as_str()) {
                diagnostics.push(format!("lockfile: ignoring unknown field {key:?}"));
            }
        }
        if let Some(nodes) = object.get("nodes").and_then(|n| n.as_object()) {
            for (name, node) in nodes {
                if let Some(fields) = node.as_object() {
                    for key in fields.keys() {
                        if !KNOWN_NODE_FIELDS.contains(&key.as_str()) {
                            diagnostics.push(format!(
                                "lockfile: ignoring unknown field {key:?} on node {name:?}"
                            ));
                        }
                    }
                }
            }
        }
    }

    let lock: LockFile = serde_json::from_value(value).map_err(|e| {
        let message = e.to_string();
        let field = message.split('`').nth(1).unwrap_or_default().to_string();
        Error::Schema {
            what: "lockfile".to_string(),
            field,
            reason: message,
        }
    })?;

    if lock.schema_version != SCHEMA_VERSION {
        diagnostics.push(format!(
            "lockfile: schema_version {} is newer than {}; loading best-effort",
            lock.schema_version, SCHEMA_VERSION
        ));
    }

    let no_names: BiocNames = BiocNames::new();
    let mut roots = Vec::with_capacity(lock.roots.len());
    for raw in &lock.roots {
        let r = parse_ref(raw, &no_names).map_err(|e| Error::Schema {
            what: "lockfile".to_string(),
            field: "roots".to_string(),
            reason: e.to_string(),
        })?;
        roots.push(r);
    }

    let nodes: BTreeMap<String, ResolvedNode> = lock
        .nodes
        .into_iter()
        .map(|(name, n)| {
            (
                name,
                ResolvedNode {
                    source: n.source,
                    qualifier: n.qualifier,
                    version: n.version,
                    published: n.published,
                    sysreqs: n.sysreqs,
                    source_url: n.source_url,
                },
            )
        })
        .collect();

    let mut edges = Vec::with_capacity(lock.edges.len());
    for (from, to, kind) in lock.edges {
        for endpoint in [&from, &to] {
            if !nodes.contains_key(endpoint) {
                return Err(Error::Schema {
                    what: "lockfile".to_string(),
                    field: "edges".to_string(),
                    reason: format!("edge endpoint {endpoint:?} is not a node"),
                });
            }
        }
        edges.push(Edge { from, to, kind });
    }

    Ok(ResolvedGraph {
        snapshot_date: lock.snapshot_date,
        r_version: lock.r_version,
        os: lock.os,
        roots,
        nodes,
        edges,
        diagnostics,
    })
}
