//! Package metadata: DCF (DESCRIPTION) parsing, dependency fields, and the
//! total order on version strings.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{de, Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A package version: one or more non-negative integer components separated
/// by `.` or `-`.
///
/// Ordering is componentwise; when one version is a strict prefix of the
/// other, the longer one is greater. The two separators are equivalent, so
/// `1.0-1` and `1.0.1` compare equal even though they render differently.
#[derive(Debug, Clone)]
pub struct Version {
    components: Vec<u64>,
    raw: String,
}

impl Version {
    pub fn parse(raw: &str) -> Result<Version> {
        let reason = |r: &str| Error::Version {
            input: raw.to_string(),
            reason: r.to_string(),
        };
        if raw.is_empty() {
            return Err(reason("empty"));
        }
        let mut components = Vec::new();
        for part in raw.split(['.', '-']) {
            if part.is_empty() {
                return Err(reason("empty component"));
            }
            if !part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(reason("components must be non-negative integers"));
            }
            components.push(
                part.parse::<u64>()
                    .map_err(|_| reason("component exceeds the integer range"))?,
            );
        }
        Ok(Version {
            components,
            raw: raw.to_string(),
        })
    }

    pub fn components(&self) -> &[u64] {
        &self.components
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }
}

impl FromStr for Version {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Version::parse(s)
    }
}

// Display prints the original spelling, not a normalization.
impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

impl PartialEq for Version {
    fn eq(&self, other: &Self) -> bool {
        self.components == other.components
    }
}
impl Eq for Version {}

impl PartialOrd for Version {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Version {
    fn cmp(&self, other: &Self) -> Ordering {
        // Vec ordering is lexicographic with a shorter prefix comparing less,
        // which is exactly the documented rule.
        self.components.cmp(&other.components)
    }
}

impl std::hash::Hash for Version {
    fn hash<H: std::hash::Hasher>(&self, state: &mut H) {
        self.components.hash(state);
    }
}

impl Serialize for Version {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.raw)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Version::parse(&raw).map_err(de::Error::custom)
    }
}

/// Compare two versions (componentwise, prefix-is-less).
pub fn compare_versions(a: &Version, b: &Version) -> Ordering {
    a.cmp(b)
}

/// Comparison operators allowed in dependency constraints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintOp {
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "==")]
    Eq,
}

impl ConstraintOp {
    pub fn as_str(self) -> &'static str {
        match self {
            ConstraintOp::Ge => ">=",
            ConstraintOp::Le => "<=",
            ConstraintOp::Gt => ">",
            ConstraintOp::Lt => "<",
            ConstraintOp::Eq => "==",
        }
    }

    fn from_text(s: &str) -> Option<Self> {
        match s {
            ">=" => Some(ConstraintOp::Ge),
            "<=" => Some(ConstraintOp::Le),
            ">" => Some(ConstraintOp::Gt),
            "<" => Some(ConstraintOp::Lt),
            "==" => Some(ConstraintOp::Eq),
            _ => None,
        }
    }
}

impl fmt::Display for ConstraintOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A version bound such as `(>= 3.1.0)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionConstraint {
    pub op: ConstraintOp,
    pub version: Version,
}

impl VersionConstraint {
    pub fn satisfied_by(&self, v: &Version) -> bool {
        match self.op {
            ConstraintOp::Ge => v >= &self.version,
            ConstraintOp::Le => v <= &self.version,
            ConstraintOp::Gt => v > &self.version,
            ConstraintOp::Lt => v < &self.version,
            ConstraintOp::Eq => v == &self.version,
        }
    }
}

impl fmt::Display for VersionConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.op, self.version)
    }
}

/// Dependency field kinds. Depends/Imports/LinkingTo are the "strong" kinds
/// required for installation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DepKind {
    Depends,
    Imports,
    LinkingTo,
    Suggests,
    Enhances,
}

impl DepKind {
    pub const ALL: [DepKind; 5] = [
        DepKind::Depends,
        DepKind::Imports,
        DepKind::LinkingTo,
        DepKind::Suggests,
        DepKind::Enhances,
    ];

    pub fn is_strong(self) -> bool {
        matches!(
            self,
            DepKind::Depends | DepKind::Imports | DepKind::LinkingTo
        )
    }

    /// The DCF field name carrying this kind.
    pub fn field_name(self) -> &'static str {
        match self {
            DepKind::Depends => "Depends",
            DepKind::Imports => "Imports",
            DepKind::LinkingTo => "LinkingTo",
            DepKind::Suggests => "Suggests",
            DepKind::Enhances => "Enhances",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DepKind::Depends => "depends",
            DepKind::Imports => "imports",
            DepKind::LinkingTo => "linking_to",
            DepKind::Suggests => "suggests",
            DepKind::Enhances => "enhances",
        }
    }
}

impl fmt::Display for DepKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DepKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depends" => Ok(DepKind::Depends),
            "imports" => Ok(DepKind::Imports),
            "linking_to" => Ok(DepKind::LinkingTo),
            "suggests" => Ok(DepKind::Suggests),
            "enhances" => Ok(DepKind::Enhances),
            other => Err(Error::DepField {
                element: other.to_string(),
                reason: "unknown dependency kind".to_string(),
            }),
        }
    }
}

/// One declared dependency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DependencySpec {
    pub name: String,
    pub kind: DepKind,
    pub constraint: Option<VersionConstraint>,
}

/// One published version of a package.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReleaseRecord {
    pub name: String,
    pub version: Version,
    pub published: NaiveDate,
    pub deps: Vec<DependencySpec>,
    pub sysreqs: String,
    pub r_constraint: Option<VersionConstraint>,
    /// Commit identifier for releases that are VCS commits (GitHub).
    pub commit: Option<String>,
}

impl ReleaseRecord {
    /// Normalize a raw dependency list into record invariants: the interpreter
    /// pseudo-dependency `R` moves into `r_constraint` (and is dropped from
    /// other kinds), and duplicate `(name, kind)` entries keep the first
    /// occurrence.
    pub fn normalize(&mut self) -> Vec<String> {
        let mut diagnostics = Vec::new();
        let mut seen = std::collections::BTreeSet::new();
        let mut kept = Vec::with_capacity(self.deps.len());
        for dep in self.deps.drain(..) {
            if dep.name == "R" {
                if dep.kind == DepKind::Depends {
                    if self.r_constraint.is_none() {
                        self.r_constraint = dep.constraint;
                    }
                } else {
                    diagnostics.push(format!(
                        "{} {}: dependency on R under {} ignored",
                        self.name, self.version, dep.kind
                    ));
                }
                continue;
            }
            if !seen.insert((dep.name.clone(), dep.kind)) {
                diagnostics.push(format!(
                    "{} {}: duplicate dependency {} ({}) dropped",
                    self.name, self.version, dep.name, dep.kind
                ));
                continue;
            }
            kept.push(dep);
        }
        self.deps = kept;
        diagnostics
    }
}

/// A parsed DCF document: field map plus the warnings produced while reading
/// it (duplicate keys are overridden, later wins).
#[derive(Debug, Clone, Default)]
pub struct Dcf {
    pub fields: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl Dcf {
    pub fn get(&self, field: &str) -> Option<&str> {
        self.fields.get(field).map(String::as_str)
    }
}

/// Parse DCF text (`Name: value` lines, whitespace continuation).
///
/// Continuation lines fold into the previous field with a single space.
/// Blank lines are skipped. Field names are case-sensitive.
pub fn parse_dcf(text: &str) -> Result<Dcf> {
    let mut dcf = Dcf::default();
    let mut current: Option<(String, String)> = None;

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            flush(&mut dcf, &mut current);
            continue;
        }
        if line.starts_with(' ') || line.starts_with('\t') {
            match current.as_mut() {
                Some((_, value)) => {
                    if !value.is_empty() {
                        value.push(' ');
                    }
                    value.push_str(line.trim());
                }
                None => {
                    return Err(Error::Dcf {
                        line: lineno,
                        reason: "continuation line without a preceding field".to_string(),
                    });
                }
            }
            continue;
        }
        match line.split_once(':') {
            Some((key, value)) => {
                flush(&mut dcf, &mut current);
                current = Some((key.trim().to_string(), value.trim().to_string()));
            }
            None => {
                return Err(Error::Dcf {
                    line: lineno,
                    reason: "expected 'Field: value'".to_string(),
                });
            }
        }
    }
    flush(&mut dcf, &mut current);
    Ok(dcf)
}

fn flush(dcf: &mut Dcf, current: &mut Option<(String, String)>) {
    if let Some((key, value)) = current.take() {
        if dcf.fields.contains_key(&key) {
            dcf.warnings
                .push(format!("duplicate field {key:?} overrides earlier value"));
        }
        dcf.fields.insert(key, value);
    }
}

/// Parse a comma-separated dependency field such as
/// `R (>= 3.1.0), methods, Matrix (>= 1.2)`.
///
/// An `R` entry is kept only under `depends`; under any other kind it is
/// dropped (the record type cannot represent it and it carries no
/// installation meaning there).
pub fn parse_dep_field(value: &str, kind: DepKind) -> Result<Vec<DependencySpec>> {
    let mut out = Vec::new();
    for element in value.split(',') {
        let element = element.trim();
        if element.is_empty() {
            continue;
        }
        let (name, constraint) = split_constraint(element)?;
        if name == "R" && kind != DepKind::Depends {
            continue;
        }
        out.push(DependencySpec {
            name: name.to_string(),
            kind,
            constraint,
        });
    }
    Ok(out)
}

fn split_constraint(element: &str) -> Result<(&str, Option<VersionConstraint>)> {
    let malformed = |reason: &str| Error::DepField {
        element: element.to_string(),
        reason: reason.to_string(),
    };
    match element.find('(') {
        None => {
            if element.contains(')') {
                return Err(malformed("unbalanced parenthesis"));
            }
            let name = element.trim();
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(malformed("invalid package name"));
            }
            Ok((name, None))
        }
        Some(open) => {
            let name = element[..open].trim();
            if name.is_empty() || name.chars().any(char::is_whitespace) {
                return Err(malformed("invalid package name"));
            }
            let rest = element[open + 1..].trim_end();
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| malformed("missing closing parenthesis"))?;
            if inner.contains('(') || inner.contains(')') {
                return Err(malformed("nested parentheses"));
            }
            let mut parts = inner.split_whitespace();
            let op = parts
                .next()
                .and_then(ConstraintOp::from_text)
                .ok_or_else(|| malformed("expected one of >=, <=, >, <, =="))?;
            let ver = parts
                .next()
                .ok_or_else(|| malformed("missing version in constraint"))?;
            if parts.next().is_some() {
                return Err(malformed("trailing tokens in constraint"));
            }
            let version = Version::parse(ver).map_err(|e| malformed(&e.to_string()))?;
            Ok((name, Some(VersionConstraint { op, version })))
        }
    }
}

/// Render a dependency list back to field text (inverse of
/// [`parse_dep_field`]).
pub fn render_dep_field(deps: &[DependencySpec]) -> String {
    deps.iter()
        .map(|d| match &d.constraint {
            Some(c) => format!("{} ({})", d.name, c),
            None => d.name.clone(),
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// Build a [`ReleaseRecord`] from a parsed DESCRIPTION.
///
/// `published` is supplied by the caller (archive index date, commit date, or
/// the snapshot date for local packages).
pub fn release_from_dcf(dcf: &Dcf, published: NaiveDate) -> Result<ReleaseRecord> {
    let missing = |field: &str| Error::Schema {
        what: "DESCRIPTION".to_string(),
        field: field.to_string(),
        reason: "missing".to_string(),
    };
    let name = dcf.get("Package").ok_or_else(|| missing("Package"))?;
    let version = Version::parse(dcf.get("Version").ok_or_else(|| missing("Version"))?)?;
    let mut deps = Vec::new();
    for kind in DepKind::ALL {
        if let Some(value) = dcf.get(kind.field_name()) {
            deps.extend(parse_dep_field(value, kind)?);
        }
    }
    let mut record = ReleaseRecord {
        name: name.to_string(),
        version,
        published,
        deps,
        sysreqs: dcf.get("SystemRequirements").unwrap_or("").to_string(),
        r_constraint: None,
        commit: None,
    };
    record.normalize();
    Ok(record)
}
