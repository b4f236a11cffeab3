use std::path::PathBuf;

use chrono::NaiveDate;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// All failure modes surfaced by the library.
///
/// Not-found conditions are deliberately distinct from transport failures so
/// callers can tell "the registry answered and the package is absent" apart
/// from "the registry could not be reached".
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid package reference {input:?}: {reason}")]
    RefParse { input: String, reason: String },

    #[error("invalid DCF input at line {line}: {reason}")]
    Dcf { line: usize, reason: String },

    #[error("invalid version string {input:?}: {reason}")]
    Version { input: String, reason: String },

    #[error("invalid dependency field element {element:?}: {reason}")]
    DepField { element: String, reason: String },

    #[error("{what} is not known to the registry")]
    NotFound { what: String },

    #[error("{name} has no release on or before {date} (earliest known: {earliest})")]
    NotAvailableAtDate {
        name: String,
        date: NaiveDate,
        earliest: NaiveDate,
    },

    #[error("snapshot date {date} predates the earliest supported interpreter release ({floor})")]
    UnsupportedEra { date: NaiveDate, floor: NaiveDate },

    #[error("date {date} predates the release calendar (first entry: {first})")]
    BeforeCalendar { date: NaiveDate, first: NaiveDate },

    #[error("transport failure while {context}: {reason}")]
    Transport { context: String, reason: String },

    #[error("unsupported os {os:?}; supported: {}", supported.join(", "))]
    UnsupportedOs { os: String, supported: Vec<String> },

    #[error("schema violation in {what}: field {field:?}: {reason}")]
    Schema {
        what: String,
        field: String,
        reason: String,
    },

    #[error("conflicting options: {0}")]
    OptionConflict(String),

    #[error("invalid option: {0}")]
    InvalidOption(String),

    #[error("download of {name} from {url} failed: {reason}")]
    Download {
        name: String,
        url: String,
        reason: String,
    },

    #[error("output path {0} already exists and is not empty (use force to overwrite)")]
    OutputCollision(PathBuf),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable category, used on the CLI error line.
    pub fn category(&self) -> &'static str {
        match self {
            Error::RefParse { .. } => "ref-parse",
            Error::Dcf { .. } => "dcf-parse",
            Error::Version { .. } => "version-parse",
            Error::DepField { .. } => "dep-field-parse",
            Error::NotFound { .. } => "not-found",
            Error::NotAvailableAtDate { .. } => "not-available-at-date",
            Error::UnsupportedEra { .. } => "unsupported-era",
            Error::BeforeCalendar { .. } => "before-calendar",
            Error::Transport { .. } => "transport",
            Error::UnsupportedOs { .. } => "unsupported-os",
            Error::Schema { .. } => "schema",
            Error::OptionConflict(..) => "option-conflict",
            Error::InvalidOption(..) => "invalid-option",
            Error::Download { .. } => "download",
            Error::OutputCollision(..) => "output-collision",
            Error::Io { .. } => "io",
        }
    }
}
