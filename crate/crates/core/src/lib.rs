//! Date-pinned reconstruction of R computational environments.
//!
//! Given a set of package references and a snapshot date, this crate resolves
//! the transitive dependency graph as it existed on that date, selects the
//! matching interpreter release, maps free-text system requirements to OS
//! packages, and emits a deterministic container build recipe plus a
//! Makefile-driven executable compendium.
//!
//! The crate is organized around two artifacts:
//!
//! * a lockfile ([`resolver::ResolvedGraph`]) that pins every package to the
//!   version current on the snapshot date, and
//! * a build context ([`container::ContainerPlan`]) generated from the
//!   lockfile without any further registry access.
//!
//! All registry access goes through [`registry::SnapshotRegistry`], which has
//! a hermetic on-disk fixture backend (`CHRONO_REGISTRY`) next to the live
//! HTTP one, so the whole pipeline can run without network access.

pub mod cli;
pub mod config;
pub mod container;
pub mod data;
mod error;
pub mod metadata;
pub mod pkgref;
pub mod registry;
pub mod resolver;
pub mod scanner;
pub mod sysreqs;

pub use error::{Error, Result};
