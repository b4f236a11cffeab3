//! Mapping free-text SystemRequirements declarations to OS package lists.
//!
//! The mapping is a data-file property: a table of case-insensitive regular
//! expressions, each scoped to one OS identifier and naming the packages to
//! install. A table ships with the crate and can be replaced at run time.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::OnceLock;

use regex::RegexBuilder;
use serde::Deserialize;

use crate::data;
use crate::error::{Error, Result};

/// One mapping rule.
#[derive(Debug, Clone, Deserialize)]
pub struct SysreqRule {
    /// Case-insensitive regular expression over requirement text.
    pub pattern: String,
    /// OS identifier the rule applies to (e.g. `ubuntu-18.04`).
    pub os: String,
    /// OS packages to install when the pattern matches.
    pub packages: Vec<String>,
}

/// A validated, compiled rule table.
#[derive(Debug, Clone)]
pub struct RuleTable {
    rules: Vec<(SysreqRule, regex::Regex)>,
    supported_os: BTreeSet<String>,
}

impl RuleTable {
    pub fn from_json(text: &str) -> Result<RuleTable> {
        let rules: Vec<SysreqRule> = serde_json::from_str(text).map_err(|e| Error::Schema {
            what: "sysreqs rule table".to_string(),
            field: String::new(),
            reason: e.to_string(),
        })?;
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        let mut compiled = Vec::with_capacity(rules.len());
        let mut supported_os = BTreeSet::new();
        for rule in rules {
            if rule.packages.is_empty() {
                return Err(Error::Schema {
                    what: "sysreqs rule table".to_string(),
                    field: "packages".to_string(),
                    reason: format!("rule {:?} maps to no packages", rule.pattern),
                });
            }
            if !seen.insert((rule.pattern.clone(), rule.os.clone())) {
                return Err(Error::Schema {
                    what: "sysreqs rule table".to_string(),
                    field: "pattern".to_string(),
                    reason: format!(
                        "duplicate (pattern, os): ({:?}, {:?})",
                        rule.pattern, rule.os
                    ),
                });
            }
            let regex = RegexBuilder::new(&rule.pattern)
                .case_insensitive(true)
                .build()
                .map_err(|e| Error::Schema {
                    what: "sysreqs rule table".to_string(),
                    field: "pattern".to_string(),
                    reason: e.to_string(),
                })?;
            supported_os.insert(rule.os.clone());
            compiled.push((rule, regex));
        }
        Ok(RuleTable {
            rules: compiled,
            supported_os,
        })
    }

    pub fn from_file(path: &Path) -> Result<RuleTable> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RuleTable::from_json(&text)
    }

    /// The table shipped with the crate.
    pub fn shipped() -> &'static RuleTable {
        static TABLE: OnceLock<RuleTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            RuleTable::from_json(data::SYSREQS_RULES_JSON).expect("shipped sysreqs table is valid")
        })
    }

    pub fn supported_os(&self) -> impl Iterator<Item = &str> {
        self.supported_os.iter().map(String::as_str)
    }

    pub fn rules(&self) -> impl Iterator<Item = &SysreqRule> {
        self.rules.iter().map(|(r, _)| r)
    }
}

/// Result of mapping requirement texts for one OS: the deduplicated sorted
/// package list plus the requirement texts no rule matched.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SysreqMapping {
    pub packages: Vec<String>,
    pub unmatched: Vec<String>,
}

/// Map free-text requirement declarations to OS packages for `os`.
///
/// Output is the sorted union over all matching rules, independent of input
/// order. Unmatched non-empty texts are reported, never fatal. An OS with no
/// rules at all is an error listing the supported identifiers.
pub fn map_sysreqs<S: AsRef<str>>(
    sysreqs_texts: &[S],
    os: &str,
    rules: &RuleTable,
) -> Result<SysreqMapping> {
    if !rules.supported_os.contains(os) {
        return Err(Error::UnsupportedOs {
            os: os.to_string(),
            supported: rules.supported_os.iter().cloned().collect(),
        });
    }
    let mut packages = BTreeSet::new();
    let mut unmatched = BTreeSet::new();
    for text in sysreqs_texts {
        let text = text.as_ref().trim();
        if text.is_empty() {
            continue;
        }
        let mut hit = false;
        for (rule, regex) in &rules.rules {
            if rule.os == os && regex.is_match(text) {
                packages.extend(rule.packages.iter().cloned());
                hit = true;
            }
        }
        if !hit {
            unmatched.insert(text.to_string());
        }
    }
    Ok(SysreqMapping {
        packages: packages.into_iter().collect(),
        unmatched: unmatched.into_iter().collect(),
    })
}

/// Test vectors exercising every rule in the shipped table; used by the test
/// suite to keep the table and its coverage in lockstep.
#[cfg(test)]
fn shipped_test_vectors() -> std::collections::BTreeMap<&'static str, Vec<&'static str>> {
    let mut v = std::collections::BTreeMap::new();
    v.insert("libxml2: libxml2 (>= 2.7.0)", vec!["libxml2-dev"]);
    v.insert("OpenSSL >= 1.0", vec!["libssl-dev"]);
    v.insert("libcurl: libcurl-devel (rpm)", vec!["libcurl4-openssl-dev"]);
    v.insert("GNU make", vec!["make"]);
    v.insert("CMake (>= 3.10)", vec!["cmake"]);
    v.insert("Java (>= 8)", vec!["default-jdk"]);
    v.insert("pandoc (>= 1.14) for vignettes", vec!["pandoc"]);
    v.insert("ICU4C (>= 52.1)", vec!["libicu-dev"]);
    v.insert("GNU GSL", vec!["libgsl-dev"]);
    v.insert("libpng", vec!["libpng-dev"]);
    v.insert("libjpeg", vec!["libjpeg-dev"]);
    v.insert("zlib headers and library", vec!["zlib1g-dev"]);
    v.insert("fftw3 (>= 3.1.2)", vec!["libfftw3-dev"]);
    v.insert("C++11", vec!["g++"]);
    v.insert("git with shallow clone support", vec!["git"]);
    v.insert("GDAL (>= 2.0.1)", vec!["libgdal-dev"]);
    v.insert("GEOS (>= 3.4.0)", vec!["libgeos-dev"]);
    v
}
