//! Blob version schemes, their parsing from strings and catalogs, and the
//! within-scheme ordering.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::ForensicsError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "snake_case")]
pub enum BlobVersion {
    /// `EV031.42.23.11`; three or four components.
    QualcommInternal {
        components: Vec<u32>,
    },
    /// `r32p1`.
    ArmRp {
        major: u32,
        patch: u32,
    },
    LlvmVersion {
        major: u32,
        minor: u32,
        patch: u32,
        commit: Option<String>,
    },
    FingerprintMatch {
        label: String,
        score: f64,
    },
    /// Only a build-id is known; no ordering exists.
    BuildIdOnly,
}

impl BlobVersion {
    pub fn scheme(&self) -> &'static str {
        match self {
            BlobVersion::QualcommInternal { .. } => "qc",
            BlobVersion::ArmRp { .. } => "arm",
            BlobVersion::LlvmVersion { .. } => "llvm",
            BlobVersion::FingerprintMatch { .. } => "fp",
            BlobVersion::BuildIdOnly => "buildid",
        }
    }

    /// Ordering within a scheme; `None` across schemes and for build-ids.
    /// Three-part Qualcomm versions compare as if extended with 0. LLVM
    /// commits and fingerprint scores do not take part.
    pub fn compare(&self, other: &BlobVersion) -> Option<Ordering> {
        use BlobVersion::*;
        match (self, other) {
            (QualcommInternal { components: a }, QualcommInternal { components: b }) => {
                let pad = |v: &[u32]| -> Vec<u32> { (0..4).map(|i| v.get(i).copied().unwrap_or(0)).collect() };
                Some(pad(a).cmp(&pad(b)))
            }
            (ArmRp { major: a, patch: p }, ArmRp { major: b, patch: q }) => Some((a, p).cmp(&(b, q))),
            (LlvmVersion { major: a, minor: b, patch: c, .. }, LlvmVersion { major: x, minor: y, patch: z, .. }) => {
                Some((a, b, c).cmp(&(x, y, z)))
            }
            (FingerprintMatch { label: a, .. }, FingerprintMatch { label: b, .. }) => Some(natural_cmp(a, b)),
            _ => None,
        }
    }

    pub fn same_version(&self, other: &BlobVersion) -> bool {
        self.compare(other) == Some(Ordering::Equal)
    }
}

/// Digit runs compare numerically, so `llvm-10` sorts after `llvm-9`.
fn natural_cmp(a: &str, b: &str) -> Ordering {
    static CHUNK: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\d+|\D+").unwrap());
    let split = |s: &str| -> Vec<String> { CHUNK.find_iter(s).map(|m| m.as_str().to_string()).collect() };
    let (x, y) = (split(a), split(b));
    for (p, q) in x.iter().zip(&y) {
        let o = match (p.parse::<u128>(), q.parse::<u128>()) {
            (Ok(m), Ok(n)) => m.cmp(&n),
            _ => p.cmp(q),
        };
        if o != Ordering::Equal {
            return o;
        }
    }
    x.len().cmp(&y.len()).then_with(|| a.cmp(b))
}

/// Catalog form: `qc:31.42.23.11`, `arm:r32p1`, `llvm:9.0.0[.commit]`,
/// `fp:label`, `buildid`.
impl fmt::Display for BlobVersion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlobVersion::QualcommInternal { components } => {
                let parts: Vec<String> = components.iter().map(u32::to_string).collect();
                write!(f, "qc:{}", parts.join("."))
            }
            BlobVersion::ArmRp { major, patch } => write!(f, "arm:r{major}p{patch}"),
            BlobVersion::LlvmVersion { major, minor, patch, commit } => {
                write!(f, "llvm:{major}.{minor}.{patch}")?;
                match commit {
                    Some(c) => write!(f, ".{c}"),
                    None => Ok(()),
                }
            }
            BlobVersion::FingerprintMatch { label, .. } => write!(f, "fp:{label}"),
            BlobVersion::BuildIdOnly => f.write_str("buildid"),
        }
    }
}

impl FromStr for BlobVersion {
    type Err = ForensicsError;
    fn from_str(s: &str) -> Result<Self, ForensicsError> {
        let bad = || ForensicsError::BadVersion(s.to_string());
        let s = s.trim();
        if s.is_empty() || s == "buildid" {
            return Ok(BlobVersion::BuildIdOnly);
        }
        let (scheme, rest) = s.split_once(':').ok_or_else(bad)?;
        let whole = |re: &Regex| re.captures(rest).filter(|c| c.get(0).unwrap().as_str() == rest);
        match scheme {
            "qc" => {
                let components: Vec<u32> = rest.split('.').map(|p| p.parse().map_err(|_| bad())).collect::<Result<_, _>>()?;
                if !(3..=4).contains(&components.len()) {
                    return Err(bad());
                }
                Ok(BlobVersion::QualcommInternal { components })
            }
            "arm" => whole(&ARM).map(|c| arm(&c)).ok_or_else(bad),
            "llvm" => {
                let mut parts = rest.splitn(4, '.');
                let mut num = || parts.next().and_then(|p| p.parse::<u32>().ok()).ok_or_else(bad);
                let (major, minor, patch) = (num()?, num()?, num()?);
                let commit = parts.next().map(str::to_string);
                Ok(BlobVersion::LlvmVersion { major, minor, patch, commit })
            }
            "fp" if !rest.is_empty() => Ok(BlobVersion::FingerprintMatch { label: rest.to_string(), score: 1.0 }),
            _ => Err(bad()),
        }
    }
}

static QC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"EV?(\d+(?:\.\d+){2,3})").unwrap());
static ARM: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\br(\d+)p(\d+)\b").unwrap());
static LLVM: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?:\bLLVM\b\D{0,16}(\d+)\.(\d+)\.(\d+)(?:[.\-]([0-9a-f]{7,40}))?)|(?:\b(\d+)\.(\d+)\.(\d+)\.([0-9a-f]{7,40})\b)").unwrap()
});

fn arm(c: &regex::Captures) -> BlobVersion {
    BlobVersion::ArmRp { major: c[1].parse().unwrap_or(u32::MAX), patch: c[2].parse().unwrap_or(u32::MAX) }
}

fn qc(c: &regex::Captures) -> Option<BlobVersion> {
    let components = c[1].split('.').map(|p| p.parse().ok()).collect::<Option<Vec<u32>>>()?;
    Some(BlobVersion::QualcommInternal { components })
}

fn llvm(c: &regex::Captures) -> Option<BlobVersion> {
    let base = if c.get(1).is_some() { 1 } else { 5 };
    let n = |i: usize| c.get(base + i).and_then(|m| m.as_str().parse().ok());
    Some(BlobVersion::LlvmVersion { major: n(0)?, minor: n(1)?, patch: n(2)?, commit: c.get(base + 3).map(|m| m.as_str().to_string()) })
}

/// A parsed version, the string it came from, and other schemes that
/// also matched somewhere in the input.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VersionFinding {
    pub version: BlobVersion,
    pub source: String,
    pub also_matched: Vec<String>,
}

/// Tries Qualcomm, then ARM, then LLVM patterns. Within a scheme the first
/// string in sorted order wins.
pub fn parse_version(strings: &BTreeSet<String>) -> Result<VersionFinding, ForensicsError> {
    let mut found: Vec<(BlobVersion, String)> = Vec::new();
    type Build = fn(&regex::Captures) -> Option<BlobVersion>;
    let schemes: [(&Regex, Build); 3] = [(&QC, qc), (&ARM, |c| Some(arm(c))), (&LLVM, llvm)];
    for (re, build) in schemes {
        if let Some((v, s)) = strings.iter().find_map(|s| re.captures(s).and_then(|c| build(&c)).map(|v| (v, s.clone()))) {
            found.push((v, s));
        }
    }
    let mut it = found.into_iter();
    let (version, source) = it.next().ok_or(ForensicsError::NoVersionString)?;
    Ok(VersionFinding { version, source, also_matched: it.map(|(v, _)| v.scheme().to_string()).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(xs: &[&str]) -> BTreeSet<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn schemes() {
        let v = parse_version(&set(&["EV031.42.23.11"])).unwrap().version;
        assert_eq!(v, BlobVersion::QualcommInternal { components: vec![31, 42, 23, 11] });
        assert_eq!(parse_version(&set(&["r32p1"])).unwrap().version, BlobVersion::ArmRp { major: 32, patch: 1 });
        assert_eq!(
            parse_version(&set(&["LLVM version 9.0.0"])).unwrap().version,
            BlobVersion::LlvmVersion { major: 9, minor: 0, patch: 0, commit: None }
        );
        assert_eq!(
            parse_version(&set(&["10.0.1.3c2fb4e8a"])).unwrap().version,
            BlobVersion::LlvmVersion { major: 10, minor: 0, patch: 1, commit: Some("3c2fb4e8a".into()) }
        );
        assert!(matches!(parse_version(&set(&["hello", "world"])), Err(ForensicsError::NoVersionString)));
        assert!(parse_version(&set(&["error2p1x"])).is_err());
    }

    #[test]
    fn qualcomm_wins_ties_across_schemes() {
        let f = parse_version(&set(&["r32p1-01eac0", "EV031.42.23.11"])).unwrap();
        assert_eq!(f.version.scheme(), "qc");
        assert_eq!(f.also_matched, vec!["arm".to_string()]);
    }

    #[test]
    fn ordering_is_per_scheme() {
        let p = |s: &str| s.parse::<BlobVersion>().unwrap();
        assert_eq!(p("qc:31.42.23").compare(&p("qc:31.42.23.0")), Some(Ordering::Equal));
        assert_eq!(p("qc:31.42.23.11").compare(&p("qc:31.43.0")), Some(Ordering::Less));
        assert_eq!(p("arm:r32p1").compare(&p("arm:r9p9")), Some(Ordering::Greater));
        assert_eq!(p("fp:llvm-10").compare(&p("fp:llvm-9")), Some(Ordering::Greater));
        assert_eq!(p("qc:1.2.3").compare(&p("arm:r1p2")), None);
        assert_eq!(p("buildid").compare(&p("buildid")), None);
        for s in ["qc:31.42.23.11", "arm:r32p1", "llvm:9.0.0", "llvm:9.0.1.abcdef0", "fp:llvm-9", "buildid"] {
            assert_eq!(p(s).to_string(), s);
        }
        assert!("qc:1.2".parse::<BlobVersion>().is_err());
        assert!("zz:1".parse::<BlobVersion>().is_err());
    }
}
