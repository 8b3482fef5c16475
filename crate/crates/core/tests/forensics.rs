use std::collections::BTreeSet;
use std::path::PathBuf;

use blobfuzz_core::forensics::*;

fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(rel)
}

fn blob(name: &str) -> Vec<u8> {
    std::fs::read(fixture(&format!("elf/{name}.so"))).unwrap()
}

const BLOBS: [&str; 4] = ["qcom_blob", "mali_blob", "llvm_blob", "no_build_id"];

#[test]
fn build_ids_match_readelf() {
    for name in BLOBS {
        let golden = std::fs::read_to_string(fixture(&format!("elf/{name}.build_id"))).unwrap();
        let golden = golden.trim();
        match extract_build_id(&blob(name)) {
            Ok(id) => {
                assert_eq!(id.hex(), golden, "{name}");
                assert_eq!(id.hex().len(), 2 * id.bytes.len());
            }
            Err(ForensicsError::NotFound) => assert!(golden.is_empty(), "{name}"),
            Err(e) => panic!("{name}: {e}"),
        }
    }
    assert!(matches!(extract_build_id(&blob("no_build_id")), Err(ForensicsError::NotFound)));
}

#[test]
fn strings_match_the_strings_tool() {
    for name in BLOBS {
        let golden: BTreeSet<String> =
            std::fs::read_to_string(fixture(&format!("elf/{name}.strings"))).unwrap().lines().map(str::to_string).collect();
        assert_eq!(extract_strings(&blob(name), 4).unwrap(), golden, "{name}");
    }
    let plain = extract_strings(&blob("no_build_id"), 4).unwrap();
    assert!(plain.contains("hello"));
    assert!(!plain.contains("abc"));
    assert!(extract_strings(&blob("no_build_id"), 3).unwrap().contains("abc"));
    assert!(extract_strings(&blob("qcom_blob"), 4).unwrap().contains("EV031.42.23.11"));
}

#[test]
fn planted_versions_are_recovered() {
    let version = |name: &str| parse_version(&extract_strings(&blob(name), 4).unwrap()).unwrap().version;
    assert_eq!(version("qcom_blob"), BlobVersion::QualcommInternal { components: vec![31, 42, 23, 11] });
    assert_eq!(version("mali_blob"), BlobVersion::ArmRp { major: 32, patch: 1 });
    assert_eq!(version("llvm_blob"), BlobVersion::LlvmVersion { major: 9, minor: 0, patch: 0, commit: None });
    assert!(matches!(parse_version(&extract_strings(&blob("no_build_id"), 4).unwrap()), Err(ForensicsError::NoVersionString)));
}

#[test]
fn fingerprints_identify_unversioned_blobs() {
    let db = FingerprintDb::load(&fixture("fingerprints.toml")).unwrap();
    let strings = extract_strings(&blob("llvm_blob"), 4).unwrap();
    let hit = fingerprint_match(&strings, &db, DEFAULT_THRESHOLD).unwrap();
    assert_eq!(hit.label, "llvm-9");
    assert_eq!(hit.score, 1.0);
    let id = identify_blob(&blob("no_build_id"), Some(&db), DEFAULT_THRESHOLD, 4).unwrap();
    assert_eq!(id.version, BlobVersion::BuildIdOnly);
    assert_eq!(id.build_id, None);
    let id = identify_blob(&blob("qcom_blob"), Some(&db), DEFAULT_THRESHOLD, 4).unwrap();
    assert_eq!(id.version_source.as_deref(), Some("EV031.42.23.11"));
    assert!(id.build_id.is_some());
}

#[test]
fn malformed_inputs() {
    assert!(matches!(extract_build_id(&[1, 2, 3, 4]), Err(ForensicsError::MalformedElf(_))));
    assert!(matches!(extract_strings(&[1, 2, 3, 4], 4), Err(ForensicsError::MalformedElf(_))));
    let mut elf32 = blob("qcom_blob");
    elf32[4] = 1;
    match extract_build_id(&elf32) {
        Err(ForensicsError::MalformedElf(m)) => assert!(m.contains("32-bit"), "{m}"),
        other => panic!("{other:?}"),
    }
    let mut bad_magic = blob("qcom_blob");
    bad_magic[1] = b'X';
    assert!(matches!(extract_build_id(&bad_magic), Err(ForensicsError::MalformedElf(_))));
    // Section headers point past the end.
    let truncated = &blob("qcom_blob")[..2000];
    assert!(matches!(extract_build_id(truncated), Err(ForensicsError::MalformedElf(_))));
}

#[test]
fn program_headers_are_the_fallback() {
    let mut b = blob("qcom_blob");
    // Drop the section header table: e_shoff, e_shnum, e_shstrndx.
    b[0x28..0x30].fill(0);
    b[0x3c..0x40].fill(0);
    let id = extract_build_id(&b).unwrap();
    assert_eq!(id, extract_build_id(&blob("qcom_blob")).unwrap());
    assert!(extract_strings(&b, 4).unwrap().contains("EV031.42.23.11"));
}

fn catalog() -> Vec<FirmwareRecord> {
    load_catalog(&fixture("catalog/catalog.csv")).unwrap()
}

#[test]
fn hand_computed_delay() {
    let c = catalog();
    let target = c.iter().find(|r| r.device == "a3").unwrap();
    let d = estimate_delay(&c, target).unwrap();
    assert_eq!(d.r_o.to_string(), "2020-01-01");
    assert_eq!(d.r_l.to_string(), "2020-06-01");
    assert_eq!(d.v_l.to_string(), "qc:31.43.0.5");
    assert_eq!(d.delay_days, 152);
    assert!(d.outdated);
    let current = estimate_delay(&c, c.iter().find(|r| r.device == "a2").unwrap()).unwrap();
    assert_eq!((current.delay_days, current.outdated), (0, false));
    assert!(current.v_l.same_version(&current.target.blob_version));
    assert!(matches!(estimate_delay(&c, &c[0]), Err(ForensicsError::InsufficientData(_))));
}

#[test]
fn aggregate_matches_golden() {
    let golden: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("catalog/aggregate.golden.json")).unwrap()).unwrap();
    let agg = aggregate_delays(&catalog());
    assert_eq!(serde_json::to_value(&agg.overall).unwrap(), golden["overall"]);
    assert_eq!(serde_json::to_value(&agg.per_vendor).unwrap(), golden["per_vendor"]);
    for r in &agg.reports {
        assert_eq!(golden["delays"][&r.target.device], serde_json::json!(r.delay_days), "{}", r.target.device);
    }
    assert_eq!(agg.skipped.len(), 2);
}

#[test]
fn order_does_not_matter() {
    let c = catalog();
    let mut shuffled = c.clone();
    shuffled.reverse();
    shuffled.rotate_left(2);
    for t in &c {
        let a = estimate_delay(&c, t).ok();
        let b = estimate_delay(&shuffled, t).ok();
        assert_eq!(a, b);
    }
}

#[test]
fn degenerate_catalogs() {
    let mut c = catalog();
    for r in &mut c {
        r.blob_version = BlobVersion::BuildIdOnly;
    }
    assert!(c.iter().all(|t| matches!(estimate_delay(&c, t), Err(ForensicsError::InsufficientData(_)))));
    let one = &catalog()[..1];
    let agg = aggregate_delays(one);
    assert_eq!(agg.overall.estimated, 0);
    assert_eq!(agg.overall.fraction_outdated, None);
    assert_eq!(agg.overall.median_delay_days, None);
    let current: Vec<FirmwareRecord> = catalog().into_iter().filter(|r| r.device != "a3" && r.device != "b3").collect();
    assert_eq!(aggregate_delays(&current).overall.fraction_outdated, Some(0.0));
    // A GPU that changes scheme midway cannot be compared.
    let mut mixed = catalog();
    mixed[1].blob_version = "arm:r1p0".parse().unwrap();
    assert!(matches!(estimate_delay(&mixed, &mixed[2].clone()), Err(ForensicsError::InsufficientData(_))));
}

#[test]
fn delays_are_never_negative() {
    // Inconsistent catalog: the newer version predates the target's blob.
    let csv = "vendor,device,gpu_model,release_date,blob_build_id,blob_version\n\
               v,x,G,2020-01-01,new,qc:2.0.0\n\
               v,y,G,2020-05-01,old,qc:1.0.0\n";
    let c = read_catalog(csv.as_bytes()).unwrap();
    let d = estimate_delay(&c, &c[1]).unwrap();
    assert!(d.outdated);
    assert_eq!(d.delay_days, 0);
    assert!(
        read_catalog("vendor,device,gpu_model,release_date,blob_build_id,blob_version\nv,x,G,2020-13-01,b,qc:1.0.0\n".as_bytes()).is_err()
    );
}
