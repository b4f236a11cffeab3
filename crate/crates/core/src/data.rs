//! Shipped data tables: interpreter and Bioconductor release calendars, base
//! package sets, the Bioconductor name list, sysreqs mapping rules, and the
//! Debian era table for source builds.
//!
//! Everything here is small, append-only public history embedded at compile
//! time so that no component depends on the network for it. Each table can be
//! overridden at run time where the relevant module allows it.

use std::collections::BTreeSet;
use std::sync::OnceLock;

use chrono::NaiveDate;
use serde::Deserialize;

use crate::metadata::Version;
use crate::pkgref::BiocNames;

const R_RELEASES_JSON: &str = include_str!("../data/r_releases.json");
const BIOC_RELEASES_JSON: &str = include_str!("../data/bioc_releases.json");
const BASE_PACKAGES_JSON: &str = include_str!("../data/base_packages.json");
const BIOC_PACKAGES_TXT: &str = include_str!("../data/bioc_packages.txt");
const DEBIAN_ERAS_JSON: &str = include_str!("../data/debian_eras.json");

pub(crate) const SYSREQS_RULES_JSON: &str = include_str!("../data/sysreqs_rules.json");

/// One interpreter release.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct InterpreterRelease {
    pub version: Version,
    #[serde(rename = "date")]
    pub released: NaiveDate,
}

/// One Bioconductor release train.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct BiocRelease {
    #[serde(rename = "version")]
    pub bioc_version: Version,
    #[serde(rename = "date")]
    pub start_date: NaiveDate,
}

#[derive(Debug, Deserialize)]
struct BasePackageRow {
    min_r: Version,
    packages: Vec<String>,
}

/// One row of the Debian era table used for interpreter source builds.
#[derive(Debug, Clone, Deserialize)]
pub struct DebianEra {
    pub min_r: Version,
    pub image: String,
    pub digest: Option<String>,
}

fn parse_json<T: for<'de> Deserialize<'de>>(which: &str, text: &str) -> T {
    serde_json::from_str(text).unwrap_or_else(|e| panic!("shipped {which} table is invalid: {e}"))
}

/// The shipped interpreter release table, ascending in version and date.
pub fn r_releases() -> &'static [InterpreterRelease] {
    static TABLE: OnceLock<Vec<InterpreterRelease>> = OnceLock::new();
    TABLE.get_or_init(|| parse_json("r_releases", R_RELEASES_JSON))
}

/// The shipped Bioconductor release calendar, ascending in date.
pub fn bioc_releases() -> &'static [BiocRelease] {
    static TABLE: OnceLock<Vec<BiocRelease>> = OnceLock::new();
    TABLE.get_or_init(|| parse_json("bioc_releases", BIOC_RELEASES_JSON))
}

/// Parse interpreter release JSON (same schema as the shipped table), for
/// fixture overrides.
pub fn parse_r_releases(text: &str) -> crate::Result<Vec<InterpreterRelease>> {
    serde_json::from_str(text).map_err(|e| crate::Error::Schema {
        what: "r_releases.json".to_string(),
        field: String::new(),
        reason: e.to_string(),
    })
}

/// Parse a Bioconductor release calendar JSON, for fixture overrides.
pub fn parse_bioc_releases(text: &str) -> crate::Result<Vec<BiocRelease>> {
    serde_json::from_str(text).map_err(|e| crate::Error::Schema {
        what: "bioc_releases.json".to_string(),
        field: String::new(),
        reason: e.to_string(),
    })
}

/// Packages bundled with the interpreter at `r_version`: these are satisfied
/// by the interpreter itself and never resolved as nodes.
///
/// The set is keyed by era because pre-1.9 interpreters bundled a different
/// collection than the modern split.
pub fn base_packages_for(r_version: &Version) -> &'static BTreeSet<String> {
    static TABLE: OnceLock<Vec<(Version, BTreeSet<String>)>> = OnceLock::new();
    let rows = TABLE.get_or_init(|| {
        let rows: Vec<BasePackageRow> = parse_json("base_packages", BASE_PACKAGES_JSON);
        rows.into_iter()
            .map(|r| (r.min_r, r.packages.into_iter().collect()))
            .collect()
    });
    rows.iter()
        .rev()
        .find(|(min_r, _)| min_r <= r_version)
        .map(|(_, pkgs)| pkgs)
        .unwrap_or_else(|| &rows[0].1)
}

/// Union of every era's interpreter-bundled package names; useful for
/// filtering names that are never installable from a registry.
pub fn all_base_package_names() -> &'static BTreeSet<String> {
    static NAMES: OnceLock<BTreeSet<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let rows: Vec<BasePackageRow> = parse_json("base_packages", BASE_PACKAGES_JSON);
        rows.into_iter().flat_map(|r| r.packages).collect()
    })
}

/// The shipped Bioconductor package name list.
pub fn shipped_bioc_names() -> &'static BiocNames {
    static NAMES: OnceLock<BiocNames> = OnceLock::new();
    NAMES.get_or_init(|| parse_bioc_names(BIOC_PACKAGES_TXT))
}

/// Parse a Bioconductor name list: one name per line, `#` comments.
pub fn parse_bioc_names(text: &str) -> BiocNames {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

/// The Debian era table: pick the row with the greatest `min_r` that is still
/// `<= r_version`.
pub fn debian_era_for(r_version: &Version) -> &'static DebianEra {
    static TABLE: OnceLock<Vec<DebianEra>> = OnceLock::new();
    let rows = TABLE.get_or_init(|| parse_json("debian_eras", DEBIAN_ERAS_JSON));
    rows.iter()
        .rev()
        .find(|era| &era.min_r <= r_version)
        .unwrap_or(&rows[0])
}
