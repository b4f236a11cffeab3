//! Snapshot registry: release histories, the interpreter release calendar,
//! and the Bioconductor release calendar behind one query interface.
//!
//! Two backends exist: an on-disk fixture store (see [`fixture`]) that
//! answers every query without network access, and a live HTTP client
//! ([`live`]) whose responses are memoized to a cache directory so a run can
//! be replayed offline. Repeated identical queries within one process return
//! identical answers; histories are cached per reference.

pub mod fixture;
pub mod live;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::NaiveDate;

use crate::config::Endpoints;
use crate::data::{self, BiocRelease, InterpreterRelease};
use crate::error::{Error, Result};
use crate::metadata::{parse_dcf, release_from_dcf, ReleaseRecord, Version};
use crate::pkgref::{BiocNames, PackageRef, Source};

pub use fixture::FixtureStore;
pub use live::LiveClient;

/// Earliest supported snapshot date: the first supported interpreter release.
pub fn support_floor() -> NaiveDate {
    NaiveDate::from_ymd_opt(2001, 8, 31).expect("static date")
}

enum Backend {
    /// Hermetic store (loaded from disk or built in memory); performs no I/O
    /// beyond local DESCRIPTION parsing for `local::` references.
    Fixture(FixtureStore),
    Live(LiveClient),
}

/// Queryable store of release histories and release calendars.
pub struct SnapshotRegistry {
    backend: Backend,
    endpoints: Endpoints,
    r_releases: Vec<InterpreterRelease>,
    bioc_releases: Vec<BiocRelease>,
    bioc_names: BiocNames,
    memo: Mutex<HashMap<String, Arc<Vec<ReleaseRecord>>>>,
}

impl SnapshotRegistry {
    /// Open a fixture registry rooted at `root`.
    pub fn from_fixture_dir(root: &Path) -> Result<SnapshotRegistry> {
        let store = FixtureStore::load(root)?;
        Ok(Self::from_store(store, Endpoints::default()))
    }

    /// Build a hermetic registry from in-memory records (tests, embedders).
    pub fn in_memory(cran: BTreeMap<String, Vec<ReleaseRecord>>) -> SnapshotRegistry {
        Self::from_store(FixtureStore::from_cran_records(cran), Endpoints::default())
    }

    /// Build a hermetic registry from a fully populated store.
    pub fn from_store(store: FixtureStore, endpoints: Endpoints) -> SnapshotRegistry {
        let r_releases = store
            .r_releases
            .clone()
            .unwrap_or_else(|| data::r_releases().to_vec());
        let bioc_releases = store
            .bioc_releases
            .clone()
            .unwrap_or_else(|| data::bioc_releases().to_vec());
        let mut bioc_names = data::shipped_bioc_names().clone();
        bioc_names.extend(store.bioc_package_names().cloned());
        SnapshotRegistry {
            backend: Backend::Fixture(store),
            endpoints,
            r_releases,
            bioc_releases,
            bioc_names,
            memo: Mutex::new(HashMap::new()),
        }
    }

    /// Live registry over the configured endpoints, memoizing responses to
    /// `cache_dir` when given.
    pub fn live(endpoints: Endpoints, cache_dir: Option<PathBuf>) -> SnapshotRegistry {
        let client = LiveClient::new(endpoints.clone(), cache_dir);
        SnapshotRegistry {
            backend: Backend::Live(client),
            endpoints,
            r_releases: data::r_releases().to_vec(),
            bioc_releases: data::bioc_releases().to_vec(),
            bioc_names: data::shipped_bioc_names().clone(),
            memo: Mutex::new(HashMap::new()),
        }
    }

    /// Registry selected by environment: fixture when `CHRONO_REGISTRY` is
    /// set, live otherwise.
    pub fn from_env(endpoints: Endpoints) -> Result<SnapshotRegistry> {
        match crate::config::registry_dir_from_env() {
            Some(dir) => {
                let store = FixtureStore::load(&dir)?;
                Ok(Self::from_store(store, endpoints))
            }
            None => Ok(Self::live(endpoints, crate::config::cache_dir_from_env())),
        }
    }

    pub fn is_fixture(&self) -> bool {
        matches!(self.backend, Backend::Fixture(_))
    }

    pub fn endpoints(&self) -> &Endpoints {
        &self.endpoints
    }

    /// Names treated as Bioconductor when disambiguating bare references:
    /// the shipped list plus everything present in the store.
    pub fn bioc_names(&self) -> &BiocNames {
        &self.bioc_names
    }

    /// Extend the disambiguation list (configuration override).
    pub fn add_bioc_names(&mut self, names: impl IntoIterator<Item = String>) {
        self.bioc_names.extend(names);
    }

    /// Diagnostics accumulated while loading the fixture store, if any.
    pub fn store_diagnostics(&self) -> &[String] {
        match &self.backend {
            Backend::Fixture(store) => &store.diagnostics,
            Backend::Live(_) => &[],
        }
    }

    /// All known releases of `r`, ascending by (publication date, version).
    ///
    /// For GitHub references the "releases" are commits on the default
    /// branch, each carrying the DESCRIPTION parsed at that commit. For local
    /// references this is a single synthetic release parsed from the path's
    /// DESCRIPTION; since a plain history query carries no snapshot date, the
    /// synthetic release is dated at the support floor (a local package is
    /// available at every supported date). [`Self::latest_at`] dates it at the
    /// queried snapshot instead.
    pub fn release_history(&self, r: &PackageRef) -> Result<Arc<Vec<ReleaseRecord>>> {
        let key = r.unpinned().to_string();
        if let Some(hit) = self.memo.lock().unwrap().get(&key) {
            return Ok(Arc::clone(hit));
        }
        let records = self.fetch_history(r)?;
        let records = Arc::new(records);
        self.memo.lock().unwrap().insert(key, Arc::clone(&records));
        Ok(records)
    }

    fn fetch_history(&self, r: &PackageRef) -> Result<Vec<ReleaseRecord>> {
        match (&self.backend, r.source) {
            (_, Source::Local) => Ok(vec![local_release(&r.qualifier, support_floor())?]),
            (Backend::Fixture(store), Source::Cran) => {
                store.cran.get(&r.name).cloned().ok_or_else(|| not_found(r))
            }
            (Backend::Fixture(store), Source::Bioc) => {
                let history = store.bioc_history(&r.name);
                if history.is_empty() {
                    Err(not_found(r))
                } else {
                    Ok(history)
                }
            }
            (Backend::Fixture(store), Source::Github) => store
                .github
                .get(&r.qualifier)
                .cloned()
                .ok_or_else(|| not_found(r)),
            (Backend::Live(client), Source::Cran) => client.cran_history(&r.name),
            (Backend::Live(client), Source::Bioc) => {
                client.bioc_history(&r.name, &self.bioc_releases)
            }
            (Backend::Live(client), Source::Github) => client.github_history(&r.qualifier),
        }
    }

    /// The release of `r` with the greatest publication date `<= date`; ties
    /// on the date are broken by the higher version.
    ///
    /// Local references always succeed (given a parseable DESCRIPTION) and
    /// are dated at the queried snapshot.
    pub fn latest_at(&self, r: &PackageRef, date: NaiveDate) -> Result<ReleaseRecord> {
        if date < support_floor() {
            return Err(Error::UnsupportedEra {
                date,
                floor: support_floor(),
            });
        }
        if r.source == Source::Local {
            return local_release(&r.qualifier, date);
        }
        let history = self.release_history(r)?;
        // History is ascending in (date, version); the last qualifying entry
        // is the winner under both rules.
        history
            .iter()
            .rev()
            .find(|rec| rec.published <= date)
            .cloned()
            .ok_or_else(|| Error::NotAvailableAtDate {
                name: r.to_string(),
                date,
                earliest: history.first().map(|r| r.published).unwrap_or(date),
            })
    }

    /// The interpreter version current at `date`.
    pub fn interpreter_version_at(&self, date: NaiveDate) -> Result<Version> {
        let floor = self
            .r_releases
            .first()
            .map(|r| r.released)
            .unwrap_or_else(support_floor);
        self.r_releases
            .iter()
            .rev()
            .find(|rel| rel.released <= date)
            .map(|rel| rel.version.clone())
            .ok_or(Error::UnsupportedEra { date, floor })
    }

    /// The Bioconductor release train active at `date`.
    pub fn bioc_version_at(&self, date: NaiveDate) -> Result<Version> {
        let first = self
            .bioc_releases
            .first()
            .map(|r| r.start_date)
            .unwrap_or_else(support_floor);
        self.bioc_releases
            .iter()
            .rev()
            .find(|rel| rel.start_date <= date)
            .map(|rel| rel.bioc_version.clone())
            .ok_or(Error::BeforeCalendar { date, first })
    }

    /// Whether `version` is the newest release in the whole history of `r`
    /// (decides current-vs-archive source URL layout for CRAN).
    pub fn is_latest_overall(&self, r: &PackageRef, version: &Version) -> Result<bool> {
        let history = self.release_history(r)?;
        Ok(history
            .iter()
            .map(|rec| &rec.version)
            .max()
            .map(|max| max == version)
            .unwrap_or(false))
    }
}

fn not_found(r: &PackageRef) -> Error {
    Error::NotFound {
        what: format!("package reference {r}"),
    }
}

/// Parse a local package directory's DESCRIPTION into a synthetic release.
fn local_release(path: &str, published: NaiveDate) -> Result<ReleaseRecord> {
    let desc_path = Path::new(path).join("DESCRIPTION");
    let text = std::fs::read_to_string(&desc_path).map_err(|e| Error::io(&desc_path, e))?;
    let dcf = parse_dcf(&text)?;
    release_from_dcf(&dcf, published)
}
