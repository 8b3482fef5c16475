//! Version identification by overlap with known distinctive strings.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ForensicsError;

/// Label → strings that identify it. Stored as TOML, one key per label:
/// `"llvm-9" = ["gvn-hoist", "mergeicmps"]`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FingerprintDb {
    pub entries: BTreeMap<String, BTreeSet<String>>,
}

impl FingerprintDb {
    pub fn from_toml(text: &str) -> Result<FingerprintDb, ForensicsError> {
        let db: FingerprintDb = toml::from_str(text).map_err(|e| ForensicsError::BadFingerprintDb(e.to_string()))?;
        if let Some((label, _)) = db.entries.iter().find(|(_, s)| s.is_empty()) {
            return Err(ForensicsError::BadFingerprintDb(format!("label `{label}` has no strings")));
        }
        Ok(db)
    }

    pub fn load(path: &Path) -> Result<FingerprintDb, ForensicsError> {
        let text = std::fs::read_to_string(path).map_err(|e| ForensicsError::Io(path.display().to_string(), e))?;
        FingerprintDb::from_toml(&text)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FingerprintHit {
    pub label: String,
    pub score: f64,
    /// Another label scored the same; the smallest label was chosen.
    pub tie: bool,
}

pub const DEFAULT_THRESHOLD: f64 = 0.3;

/// Score of a label is the fraction of its strings present in `strings`.
pub fn fingerprint_match(strings: &BTreeSet<String>, db: &FingerprintDb, threshold: f64) -> Result<FingerprintHit, ForensicsError> {
    if db.entries.is_empty() {
        return Err(ForensicsError::BadFingerprintDb("empty database".into()));
    }
    let mut best: Option<(usize, usize, &String)> = None;
    let mut tie = false;
    // Labels iterate in ascending order, so a strictly greater score is
    // needed to displace the current best.
    for (label, set) in &db.entries {
        let hits = set.iter().filter(|s| strings.contains(*s)).count();
        match best {
            Some((h, n, _)) if hits * n == h * set.len() => tie = true,
            Some((h, n, _)) if hits * n < h * set.len() => {}
            _ => {
                best = Some((hits, set.len(), label));
                tie = false;
            }
        }
    }
    let (hits, n, label) = best.expect("non-empty database");
    let score = hits as f64 / n as f64;
    if hits == 0 || score < threshold {
        return Err(ForensicsError::NoMatch);
    }
    Ok(FingerprintHit { label: label.clone(), score, tie })
}
