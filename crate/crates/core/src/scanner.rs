//! Project scanning: extract package references from a directory of R
//! sources, and import pins from renv lockfiles and sessionInfo records.
//!
//! Detection is token-based after comment stripping, not full language
//! parsing: `library(x)`, `library("x")`, `require(x)`,
//! `requireNamespace("x")` and the namespace operators `x::f` / `x:::f` are
//! recognized in `.R`/`.r` files and inside ```` ```{r} ```` chunks of
//! `.Rmd`/`.rmd` files; DESCRIPTION files contribute their strong dependency
//! fields. Matches that start inside string literals are ignored, as is
//! everything behind a `#` comment. Calls whose first argument is computed
//! (not a name or string literal) are skipped with a diagnostic.
//!
//! Scanning reports only CRAN/Bioconductor references: bare names are
//! disambiguated against the Bioconductor name list, and interpreter-bundled
//! packages are never reported. Loader wrappers such as `pacman::p_load`,
//! `.Rprofile` files and notebook formats other than Rmd are out of scope.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;
use serde::Deserialize;

use crate::data;
use crate::error::{Error, Result};
use crate::pkgref::{BiocNames, PackageRef};

/// Detected references plus per-file diagnostics.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ScanOutcome {
    /// Deduplicated, sorted by package name.
    pub refs: Vec<PackageRef>,
    pub diagnostics: Vec<String>,
}

fn sorted_refs(refs: BTreeSet<PackageRef>) -> Vec<PackageRef> {
    let mut out: Vec<PackageRef> = refs.into_iter().collect();
    out.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.cmp(b)));
    out
}

/// Recursively scan a project directory for package usage.
///
/// Unreadable individual files degrade to diagnostics; an unreadable root is
/// an error. Output is independent of directory traversal order.
pub fn scan_dir(path: &Path, bioc_names: &BiocNames) -> Result<ScanOutcome> {
    if !path.is_dir() {
        return Err(Error::io(
            path,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a directory"),
        ));
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
        if entry.file_type().is_file() {
            files.push(entry.into_path());
        }
    }
    files.sort();

    let mut names = BTreeSet::new();
    let mut diagnostics = Vec::new();
    for file in files {
        let kind = match classify(&file) {
            Some(kind) => kind,
            None => continue,
        };
        let text = match read_lossy(&file, &mut diagnostics) {
            Some(text) => text,
            None => continue,
        };
        let mut file_diags = Vec::new();
        match kind {
            FileKind::RScript => scan_r_source(&text, &mut names, &mut file_diags),
            FileKind::RMarkdown => scan_rmd(&text, &mut names, &mut file_diags),
            FileKind::Description => scan_description(&text, &mut names, &mut file_diags),
        }
        for d in file_diags {
            diagnostics.push(format!("{}: {d}", file.display()));
        }
    }

    let base = data::all_base_package_names();
    let refs = names
        .into_iter()
        .filter(|n| !base.contains(n))
        .map(|n| disambiguate(&n, bioc_names))
        .collect();
    Ok(ScanOutcome { refs, diagnostics })
}

enum FileKind {
    RScript,
    RMarkdown,
    Description,
}

fn classify(path: &Path) -> Option<FileKind> {
    if path.file_name().and_then(|n| n.to_str()) == Some("DESCRIPTION") {
        return Some(FileKind::Description);
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("R") | Some("r") => Some(FileKind::RScript),
        Some("Rmd") | Some("rmd") => Some(FileKind::RMarkdown),
        _ => None,
    }
}

fn read_lossy(path: &Path, diagnostics: &mut Vec<String>) -> Option<String> {
    match std::fs::read(path) {
        Ok(bytes) => match String::from_utf8(bytes) {
            Ok(text) => Some(text),
            Err(err) => {
                diagnostics.push(format!(
                    "{}: invalid UTF-8 bytes replaced before scanning",
                    path.display()
                ));
                Some(String::from_utf8_lossy(err.as_bytes()).into_owned())
            }
        },
        Err(e) => {
            diagnostics.push(format!("{}: unreadable, skipped: {e}", path.display()));
            None
        }
    }
}

fn disambiguate(name: &str, bioc_names: &BiocNames) -> PackageRef {
    if bioc_names.contains(name) {
        PackageRef::bioc(name)
    } else {
        PackageRef::cran(name)
    }
}

fn call_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"\b(library|require|requireNamespace)\s*\(").expect("static regex")
    })
}

fn namespace_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        Regex::new(r"([A-Za-z][A-Za-z0-9.]*)\s*:::?\s*[A-Za-z._`]").expect("static regex")
    })
}

fn valid_name(name: &str) -> bool {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"^[A-Za-z][A-Za-z0-9.]*$").expect("static regex"));
    re.is_match(name)
}

/// Scan one R source text line by line.
fn scan_r_source(text: &str, names: &mut BTreeSet<String>, diagnostics: &mut Vec<String>) {
    for (idx, raw_line) in text.lines().enumerate() {
        let line = strip_comment(raw_line);

        for m in call_regex().captures_iter(line) {
            let whole = m.get(0).expect("capture 0");
            if in_string(line, whole.start()) {
                continue;
            }
            let after = &line[whole.end()..];
            match first_argument(after) {
                Argument::Name(name) => {
                    names.insert(name);
                }
                Argument::Computed(expr) => diagnostics.push(format!(
                    "line {}: {} call with computed argument {expr:?} skipped",
                    idx + 1,
                    &m[1]
                )),
                Argument::Empty => {}
            }
        }

        for m in namespace_regex().captures_iter(line) {
            let whole = m.get(0).expect("capture 0");
            if in_string(line, whole.start()) {
                continue;
            }
            let name = m[1].to_string();
            if valid_name(&name) {
                names.insert(name);
            }
        }
    }
}

enum Argument {
    Name(String),
    Computed(String),
    Empty,
}

/// Extract the first argument of a call given the text after the opening
/// parenthesis (single line only).
fn first_argument(after_paren: &str) -> Argument {
    let mut depth = 0usize;
    let mut end = after_paren.len();
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in after_paren.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        if let Some(q) = quote {
            if c == '\\' {
                escaped = true;
            } else if c == q {
                quote = None;
            }
            continue;
        }
        match c {
            '\'' | '"' => quote = Some(c),
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' if depth > 0 => depth -= 1,
            ')' | ',' => {
                end = i;
                break;
            }
            _ => {}
        }
    }
    let arg = after_paren[..end].trim();
    if arg.is_empty() {
        return Argument::Empty;
    }
    let unquoted = arg
        .strip_prefix('"')
        .and_then(|s| s.strip_suffix('"'))
        .or_else(|| arg.strip_prefix('\'').and_then(|s| s.strip_suffix('\'')));
    let candidate = unquoted.unwrap_or(arg);
    if valid_name(candidate) {
        Argument::Name(candidate.to_string())
    } else {
        Argument::Computed(arg.to_string())
    }
}

/// Truncate a line at the first `#` that is not inside a string literal.
fn strip_comment(line: &str) -> &str {
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        if escaped {
            escaped = false;
            continue;
        }
        match quote {
            Some(q) => {
                if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
            }
            None => {
                if c == '"' || c == '\'' {
                    quote = Some(c);
                } else if c == '#' {
                    return &line[..i];
                }
            }
        }
    }
    line
}

/// Whether byte offset `pos` falls inside a string literal.
fn in_string(line: &str, pos: usize) -> bool {
    let mut quote: Option<char> = None;
    let mut escaped = false;
    for (i, c) in line.char_indices() {
        if i >= pos {
            break;
        }
        if escaped {
            escaped = false;
            continue;
        }
        match quote {
            Some(q) => {
                if c == '\\' {
                    escaped = true;
                } else if c == q {
                    quote = None;
                }
            }
            None => {
                if c == '"' || c == '\'' {
                    quote = Some(c);
                }
            }
        }
    }
    quote.is_some()
}

fn chunk_open_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*`{3,}\s*\{\s*[rR]\b[^}]*\}").expect("static regex"))
}

fn chunk_close_regex() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\s*`{3,}\s*$").expect("static regex"))
}

/// Scan an R Markdown document: only fenced chunks opened with ```` ```{r} ````
/// are treated as code; inline spans and other engines are ignored.
fn scan_rmd(text: &str, names: &mut BTreeSet<String>, diagnostics: &mut Vec<String>) {
    let mut chunk = String::new();
    let mut in_chunk = false;
    for line in text.lines() {
        if in_chunk {
            if chunk_close_regex().is_match(line) {
                in_chunk = false;
                scan_r_source(&chunk, names, diagnostics);
                chunk.clear();
            } else {
                chunk.push_str(line);
                chunk.push('\n');
            }
        } else if chunk_open_regex().is_match(line) {
            in_chunk = true;
        }
    }
    if in_chunk {
        // unterminated chunk: scan what was collected
        scan_r_source(&chunk, names, diagnostics);
    }
}

/// Take the strong dependency fields of a DESCRIPTION file.
fn scan_description(text: &str, names: &mut BTreeSet<String>, diagnostics: &mut Vec<String>) {
    let dcf = match crate::metadata::parse_dcf(text) {
        Ok(dcf) => dcf,
        Err(e) => {
            diagnostics.push(format!("unparseable DESCRIPTION skipped: {e}"));
            return;
        }
    };
    for kind in [
        crate::metadata::DepKind::Depends,
        crate::metadata::DepKind::Imports,
        crate::metadata::DepKind::LinkingTo,
    ] {
        let Some(value) = dcf.get(kind.field_name()) else {
            continue;
        };
        match crate::metadata::parse_dep_field(value, kind) {
            Ok(deps) => {
                for dep in deps {
                    if dep.name != "R" && valid_name(&dep.name) {
                        names.insert(dep.name);
                    }
                }
            }
            Err(e) => diagnostics.push(format!("{} field skipped: {e}", kind.field_name())),
        }
    }
}

#[derive(Debug, Deserialize)]
struct RenvLock {
    #[serde(rename = "Packages")]
    packages: Option<std::collections::BTreeMap<String, RenvPackage>>,
}

#[derive(Debug, Deserialize)]
struct RenvPackage {
    #[serde(rename = "Package")]
    package: Option<String>,
    #[serde(rename = "Version")]
    version: Option<String>,
    #[serde(rename = "Source", default)]
    source: String,
    #[serde(rename = "Repository", default)]
    repository: String,
    #[serde(rename = "RemoteUsername")]
    remote_username: Option<String>,
    #[serde(rename = "RemoteRepo")]
    remote_repo: Option<String>,
    #[serde(rename = "RemoteSha")]
    remote_sha: Option<String>,
}

/// Import pinned references from a renv-style lockfile.
pub fn import_renv_lock(text: &str) -> Result<ScanOutcome> {
    let schema = |reason: String| Error::Schema {
        what: "renv lockfile".to_string(),
        field: "Packages".to_string(),
        reason,
    };
    let lock: RenvLock = serde_json::from_str(text).map_err(|e| schema(e.to_string()))?;
    let packages = lock
        .packages
        .ok_or_else(|| schema("missing Packages map".to_string()))?;

    let mut refs = BTreeSet::new();
    let mut diagnostics = Vec::new();
    for (key, entry) in packages {
        let name = entry.package.unwrap_or_else(|| key.clone());
        let source = entry.source.as_str();
        let make_pinned = |r: PackageRef| match &entry.version {
            Some(v) => r.with_pin(v.clone()),
            None => r,
        };
        match source {
            "Repository" | "CRAN" => {
                if source == "Repository"
                    && !entry.repository.is_empty()
                    && !entry.repository.eq_ignore_ascii_case("cran")
                {
                    diagnostics.push(format!(
                        "{name}: repository {:?} treated as CRAN-compatible",
                        entry.repository
                    ));
                }
                refs.insert(make_pinned(PackageRef::cran(&name)));
            }
            "Bioconductor" => {
                refs.insert(make_pinned(PackageRef::bioc(&name)));
            }
            "GitHub" | "github" => {
                match (
                    entry.remote_username.as_deref(),
                    entry.remote_repo.as_deref(),
                ) {
                    (Some(owner), Some(repo)) => {
                        let r = PackageRef::github(owner, repo);
                        let r = match (&entry.remote_sha, &entry.version) {
                            (Some(sha), _) => r.with_pin(sha.clone()),
                            (None, Some(v)) => r.with_pin(v.clone()),
                            (None, None) => r,
                        };
                        refs.insert(r);
                    }
                    _ => diagnostics.push(format!(
                        "{name}: GitHub source without RemoteUsername/RemoteRepo skipped"
                    )),
                }
            }
            other => diagnostics.push(format!("{name}: unsupported source {other:?} skipped")),
        }
    }
    Ok(ScanOutcome {
        refs: sorted_refs(refs),
        diagnostics,
    })
}

/// Import pinned references from a plain-text sessionInfo record.
///
/// Only the "other attached packages" and "loaded via a namespace" sections
/// are read; `name_version` tokens become pinned references. No recognizable
/// tokens is a diagnostic, not an error.
pub fn import_session_info(text: &str, bioc_names: &BiocNames) -> Result<ScanOutcome> {
    static TOKEN: OnceLock<Regex> = OnceLock::new();
    let token = TOKEN.get_or_init(|| {
        Regex::new(r"([A-Za-z][A-Za-z0-9.]*)_([0-9][0-9.\-]*)").expect("static regex")
    });

    let mut refs = BTreeSet::new();
    let mut diagnostics = Vec::new();
    let mut in_section = false;
    let base = data::all_base_package_names();
    for line in text.lines() {
        let lower = line.to_ascii_lowercase();
        if lower.contains("other attached packages") || lower.contains("loaded via a namespace") {
            in_section = true;
            continue;
        }
        if !in_section {
            continue;
        }
        if line.trim().is_empty() || line.trim_end().ends_with(':') {
            in_section = false;
            continue;
        }
        for cap in token.captures_iter(line) {
            let name = cap[1].to_string();
            let version = cap[2].trim_end_matches(['.', '-']).to_string();
            if base.contains(&name) {
                continue;
            }
            refs.insert(disambiguate(&name, bioc_names).with_pin(version));
        }
    }
    if refs.is_empty() {
        diagnostics.push("no package tokens recognized in session record".to_string());
    }
    Ok(ScanOutcome {
        refs: sorted_refs(refs),
        diagnostics,
    })
}
