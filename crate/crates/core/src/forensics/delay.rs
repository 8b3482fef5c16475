//! How long a firmware image kept shipping an old GPU blob after a newer
//! one was available for the same GPU.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::version::BlobVersion;
use super::ForensicsError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FirmwareRecord {
    pub vendor: String,
    pub device: String,
    pub gpu_model: String,
    pub release_date: NaiveDate,
    pub blob_build_id: String,
    pub blob_version: BlobVersion,
}

#[derive(Deserialize)]
struct Row {
    vendor: String,
    device: String,
    gpu_model: String,
    release_date: String,
    blob_build_id: String,
    blob_version: String,
}

/// Reads a catalog CSV with header
/// `vendor,device,gpu_model,release_date,blob_build_id,blob_version`.
pub fn read_catalog<R: std::io::Read>(reader: R) -> Result<Vec<FirmwareRecord>, ForensicsError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let line = i + 2;
        let bad = |m: String| ForensicsError::Catalog(format!("line {line}: {m}"));
        let row = row.map_err(|e| bad(e.to_string()))?;
        if row.gpu_model.is_empty() {
            return Err(bad("empty gpu_model".into()));
        }
        let release_date = NaiveDate::parse_from_str(&row.release_date, "%Y-%m-%d")
            .map_err(|e| bad(format!("release_date `{}`: {e}", row.release_date)))?;
        let blob_version = row.blob_version.parse().map_err(|e: ForensicsError| bad(e.to_string()))?;
        out.push(FirmwareRecord {
            vendor: row.vendor,
            device: row.device,
            gpu_model: row.gpu_model,
            release_date,
            blob_build_id: row.blob_build_id.to_ascii_lowercase(),
            blob_version,
        });
    }
    Ok(out)
}

pub fn load_catalog(path: &Path) -> Result<Vec<FirmwareRecord>, ForensicsError> {
    let f = std::fs::File::open(path).map_err(|e| ForensicsError::Io(path.display().to_string(), e))?;
    read_catalog(f)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayReport {
    pub target: FirmwareRecord,
    /// First release of the target's blob anywhere in the catalog.
    pub r_o: NaiveDate,
    /// Latest version available for the GPU before the target shipped.
    pub v_l: BlobVersion,
    /// First release carrying `v_l`.
    pub r_l: NaiveDate,
    pub delay_days: u32,
    pub outdated: bool,
}

/// Order-insensitive over `catalog`. The target's own version competes
/// for `v_l`, so a target already on the newest version is current.
pub fn estimate_delay(catalog: &[FirmwareRecord], target: &FirmwareRecord) -> Result<DelayReport, ForensicsError> {
    let insufficient = |m: &str| Err(ForensicsError::InsufficientData(m.to_string()));
    let v_o = &target.blob_version;
    if matches!(v_o, BlobVersion::BuildIdOnly) {
        return insufficient("target has no ordered version");
    }
    let r_o = catalog
        .iter()
        .filter(|r| !target.blob_build_id.is_empty() && r.blob_build_id == target.blob_build_id)
        .map(|r| r.release_date)
        .chain([target.release_date])
        .min()
        .expect("target date");
    let candidates: Vec<&FirmwareRecord> =
        catalog.iter().filter(|r| r.gpu_model == target.gpu_model && r.release_date < target.release_date).collect();
    if candidates.is_empty() {
        return insufficient("no earlier firmware for this GPU");
    }
    let mut v_l = v_o;
    for c in &candidates {
        match c.blob_version.compare(v_l) {
            None => return insufficient("versions for this GPU are not comparable"),
            Some(std::cmp::Ordering::Greater) => v_l = &c.blob_version,
            Some(_) => {}
        }
    }
    let outdated = !v_l.same_version(v_o);
    let r_l = catalog
        .iter()
        .filter(|r| r.blob_version.same_version(v_l))
        .map(|r| r.release_date)
        .chain((!outdated).then_some(target.release_date))
        .min()
        .expect("v_l comes from a record");
    let delay_days = if outdated { (r_l - r_o).num_days().max(0) as u32 } else { 0 };
    Ok(DelayReport { target: target.clone(), r_o, v_l: v_l.clone(), r_l, delay_days, outdated })
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub records: usize,
    /// Records with a delay estimate.
    pub estimated: usize,
    pub outdated: usize,
    pub fraction_outdated: Option<f64>,
    /// Over outdated records only.
    pub median_delay_days: Option<f64>,
    pub max_delay_days: Option<u32>,
}

impl DelayStats {
    fn from_reports(records: usize, reports: &[&DelayReport]) -> DelayStats {
        let mut delays: Vec<u32> = reports.iter().filter(|r| r.outdated).map(|r| r.delay_days).collect();
        delays.sort_unstable();
        let median = match delays.len() {
            0 => None,
            n if n % 2 == 1 => Some(delays[n / 2] as f64),
            n => Some((delays[n / 2 - 1] as f64 + delays[n / 2] as f64) / 2.0),
        };
        DelayStats {
            records,
            estimated: reports.len(),
            outdated: delays.len(),
            fraction_outdated: (!reports.is_empty()).then(|| delays.len() as f64 / reports.len() as f64),
            median_delay_days: median,
            max_delay_days: delays.last().copied(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DelayAggregate {
    pub overall: DelayStats,
    pub per_vendor: BTreeMap<String, DelayStats>,
    /// Per-record results in catalog order.
    pub reports: Vec<DelayReport>,
    /// Records skipped for lack of data, with reasons.
    pub skipped: Vec<String>,
}

pub fn aggregate_delays(catalog: &[FirmwareRecord]) -> DelayAggregate {
    let results: Vec<Result<DelayReport, ForensicsError>> = catalog.par_iter().map(|t| estimate_delay(catalog, t)).collect();
    let mut agg = DelayAggregate::default();
    for (rec, r) in catalog.iter().zip(results) {
        match r {
            Ok(d) => agg.reports.push(d),
            Err(e) => agg.skipped.push(format!("{}/{} {}: {e}", rec.vendor, rec.device, rec.release_date)),
        }
    }
    let all: Vec<&DelayReport> = agg.reports.iter().collect();
    agg.overall = DelayStats::from_reports(catalog.len(), &all);
    let mut vendors: BTreeMap<&str, usize> = BTreeMap::new();
    for r in catalog {
        *vendors.entry(&r.vendor).or_default() += 1;
    }
    for (v, n) in vendors {
        let mine: Vec<&DelayReport> = agg.reports.iter().filter(|r| r.target.vendor == v).collect();
        agg.per_vendor.insert(v.to_string(), DelayStats::from_reports(n, &mine));
    }
    agg
}
