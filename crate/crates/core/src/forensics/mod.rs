//! Driver blob forensics: build-ids and version strings from ELF files, and
//! firmware update-delay analytics over catalogs of firmware metadata.

mod delay;
mod elf;
mod fingerprint;
mod version;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use delay::{aggregate_delays, estimate_delay, load_catalog, read_catalog, DelayAggregate, DelayReport, DelayStats, FirmwareRecord};
pub use elf::{extract_build_id, extract_strings, BuildId};
pub use fingerprint::{fingerprint_match, FingerprintDb, FingerprintHit, DEFAULT_THRESHOLD};
pub use version::{parse_version, BlobVersion, VersionFinding};

#[derive(Debug, Error)]
pub enum ForensicsError {
    #[error("malformed ELF: {0}")]
    MalformedElf(String),
    #[error("no GNU build-id note")]
    NotFound,
    #[error("no version string")]
    NoVersionString,
    #[error("no fingerprint label reaches the threshold")]
    NoMatch,
    #[error("bad fingerprint database: {0}")]
    BadFingerprintDb(String),
    #[error("unrecognized blob version `{0}`")]
    BadVersion(String),
    #[error("bad catalog: {0}")]
    Catalog(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("cannot read {0}: {1}")]
    Io(String, std::io::Error),
}

/// Everything `inspect-blob` reports about one file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlobIdentity {
    pub build_id: Option<String>,
    pub version: BlobVersion,
    /// The string the version came from, when a pattern matched.
    pub version_source: Option<String>,
    pub also_matched: Vec<String>,
    pub fingerprint_tie: bool,
    pub string_count: usize,
}

/// Version patterns first, then the fingerprint database, then the
/// build-id alone.
pub fn identify_blob(data: &[u8], db: Option<&FingerprintDb>, threshold: f64, min_len: usize) -> Result<BlobIdentity, ForensicsError> {
    let build_id = match extract_build_id(data) {
        Ok(id) => Some(id.hex()),
        Err(ForensicsError::NotFound) => None,
        Err(e) => return Err(e),
    };
    let strings: BTreeSet<String> = extract_strings(data, min_len)?;
    let mut id = BlobIdentity {
        build_id,
        version: BlobVersion::BuildIdOnly,
        version_source: None,
        also_matched: Vec::new(),
        fingerprint_tie: false,
        string_count: strings.len(),
    };
    if let Ok(f) = parse_version(&strings) {
        id.version = f.version;
        id.version_source = Some(f.source);
        id.also_matched = f.also_matched;
    } else if let Some(Ok(hit)) = db.map(|db| fingerprint_match(&strings, db, threshold)) {
        id.version = BlobVersion::FingerprintMatch { label: hit.label, score: hit.score };
        id.fingerprint_tie = hit.tie;
    }
    Ok(id)
}
