use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn core(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(rel)
}

fn blobfuzz(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blobfuzz")).args(args).current_dir(dir).env_remove("BLOBFUZZ_SEED").output().expect("runs")
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_everywhere() {
    let dir = tempfile::tempdir().unwrap();
    for cmd in ["fuzz", "transform", "run", "reduce", "inspect-blob", "delay-report"] {
        let out = blobfuzz(&[cmd, "--help"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{cmd}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{cmd}");
    }
    assert_eq!(blobfuzz(&["--bogus"], dir.path()).status.code(), Some(64));
    assert_eq!(blobfuzz(&["run", "--input", "x", "--nope"], dir.path()).status.code(), Some(64));
    assert_eq!(blobfuzz(&[], dir.path()).status.code(), Some(64));
}

#[test]
fn fuzz_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = core("manifest.toml");
    let clean = blobfuzz(&["--seed", "1", "fuzz", "--corpus", s(&manifest), "--variants", "200", "-o", "clean.jsonl"], dir.path());
    assert_eq!(clean.status.code(), Some(0), "{}", String::from_utf8_lossy(&clean.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("clean.jsonl")).unwrap(), "");
    let stats = json(&clean);
    assert_eq!(stats["variants_tested"].as_u64().unwrap() + stats["generation_failures"].as_u64().unwrap(), 23 * 200);
    assert!(stats["throughput"].as_f64().unwrap() > 0.0);

    let bad = blobfuzz(
        &["--seed", "1", "fuzz", "--corpus", s(&manifest), "--variants", "200", "--inject", "dce_drops_live_store", "-o", "dce.jsonl"],
        dir.path(),
    );
    assert_eq!(bad.status.code(), Some(2));
    let reports = std::fs::read_to_string(dir.path().join("dce.jsonl")).unwrap();
    assert!(reports.lines().count() >= 1);
    for line in reports.lines() {
        let r: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(r["kind"], "SemanticDivergence");
        assert_eq!(r["localization"]["faulting_pass"], "Dce");
        assert_eq!(r["injection_set"], serde_json::json!(["dce_drops_live_store"]));
    }

    // Reduce reproduces what fuzz found.
    let red = blobfuzz(&["reduce", "--corpus", s(&manifest), "--reports", "dce.jsonl", "--index", "0"], dir.path());
    assert_eq!(red.status.code(), Some(0), "{}", String::from_utf8_lossy(&red.stderr));
    let line: serde_json::Value = serde_json::from_slice(&red.stdout).unwrap();
    assert_eq!(line["kind"], "SemanticDivergence");

    let missing = blobfuzz(&["fuzz", "--corpus", "/nonexistent/manifest.toml", "--variants", "1"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("cannot read"));
    assert_eq!(blobfuzz(&["fuzz", "--corpus", s(&manifest), "--variants", "0"], dir.path()).status.code(), Some(64));
    assert_eq!(blobfuzz(&["fuzz", "--corpus", s(&manifest), "--inject", "nonsense"], dir.path()).status.code(), Some(64));
}

#[test]
fn fuzz_is_deterministic_across_threads() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = core("manifest.toml");
    for (t, name) in [("1", "a.jsonl"), ("6", "b.jsonl")] {
        let out = blobfuzz(
            &["--threads", t, "fuzz", "--corpus", s(&manifest), "--variants", "10", "--inject", "instcombine_wrong_identity", "-o", name],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(2));
    }
    let a = std::fs::read(dir.path().join("a.jsonl")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, std::fs::read(dir.path().join("b.jsonl")).unwrap());
}

#[test]
fn transform_is_repeatable_and_verified() {
    let dir = tempfile::tempdir().unwrap();
    let input = core("corpus/branchy.frag");
    let manifest = core("manifest.toml");
    for out in ["v1.frag", "v2.frag"] {
        let r = blobfuzz(
            &["--seed", "9", "-o", out, "transform", "--input", s(&input), "--depth", "5", "--corpus", s(&manifest), "--verify"],
            dir.path(),
        );
        assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let read = |n: &str| std::fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("v1.frag"), read("v2.frag"));
    assert_eq!(read("v1.frag.recipe.json"), read("v2.frag.recipe.json"));
    // Replaying the recipe gives the same text.
    let r = blobfuzz(
        &["-o", "v3.frag", "transform", "--input", s(&input), "--corpus", s(&manifest), "--recipe", "v1.frag.recipe.json"],
        dir.path(),
    );
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    assert_eq!(read("v1.frag"), read("v3.frag"));
    assert_eq!(blobfuzz(&["transform", "--input", s(&input), "--depth", "0"], dir.path()).status.code(), Some(64));
}

#[test]
fn run_golden_and_ir_input() {
    let dir = tempfile::tempdir().unwrap();
    let input = core("corpus/blur_loop.frag");
    let out = blobfuzz(&["--seed", "42", "run", "--input", s(&input)], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["hash"], "f86c2802ee5b7ed7");
    assert_eq!(v["status"], "Ok");
    assert!(v.get("outputs").is_none());
    for extra in [&["--interpret"][..], &["--optimize"][..]] {
        let mut args = vec!["--seed", "42", "run", "--input", s(&input)];
        args.extend_from_slice(extra);
        assert_eq!(json(&blobfuzz(&args, dir.path()))["hash"], "f86c2802ee5b7ed7");
    }
    let dumped = json(&blobfuzz(&["--seed", "42", "run", "--input", s(&input), "--dump-outputs"], dir.path()));
    assert!(dumped["outputs"].as_object().is_some_and(|o| !o.is_empty()));

    let ir = "@o = output global float\n\ndefine void @llvm_main() {\nbb0:\n  %0 = call void @llvm.qgpu.fset(@o, float 0x3F800000)\n  ret void\n}\n";
    std::fs::write(dir.path().join("one.ir"), ir).unwrap();
    let r = json(&blobfuzz(&["run", "--input", "one.ir", "--dump-outputs"], dir.path()));
    assert_eq!(r["outputs"]["o"], serde_json::json!([1.0]));
    std::fs::write(dir.path().join("bad.frag"), "void main( {").unwrap();
    assert_eq!(blobfuzz(&["run", "--input", "bad.frag"], dir.path()).status.code(), Some(1));
}

#[test]
fn forensics_commands() {
    let dir = tempfile::tempdir().unwrap();
    let out = blobfuzz(&["inspect-blob", s(&core("elf/qcom_blob.so"))], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let golden = std::fs::read_to_string(core("elf/qcom_blob.build_id")).unwrap();
    assert_eq!(v["build_id"], golden.trim());
    assert_eq!(v["version"]["components"], serde_json::json!([31, 42, 23, 11]));
    let fp = blobfuzz(&["inspect-blob", s(&core("elf/no_build_id.so")), "--fingerprints", s(&core("fingerprints.toml"))], dir.path());
    assert_eq!(json(&fp)["version"]["scheme"], "build_id_only");
    std::fs::write(dir.path().join("junk"), b"1234").unwrap();
    assert_eq!(blobfuzz(&["inspect-blob", "junk"], dir.path()).status.code(), Some(1));

    let catalog = core("catalog/catalog.csv");
    let d = json(&blobfuzz(&["delay-report", "--catalog", s(&catalog), "--device", "a3"], dir.path()));
    assert_eq!(d["delay_days"], 152);
    assert_eq!(d["outdated"], true);
    let agg = json(&blobfuzz(&["delay-report", "--catalog", s(&catalog)], dir.path()));
    assert_eq!(agg["overall"]["median_delay_days"], 83.0);
    std::fs::write(dir.path().join("empty.csv"), "vendor,device,gpu_model,release_date,blob_build_id,blob_version\n").unwrap();
    assert_eq!(blobfuzz(&["delay-report", "--catalog", "empty.csv"], dir.path()).status.code(), Some(1));
}

#[test]
fn environment_mirrors_flags() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_blobfuzz"))
        .args(["run"])
        .env("BLOBFUZZ_SEED", "42")
        .env("BLOBFUZZ_INPUT", core("corpus/blur_loop.frag"))
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(json(&out)["hash"], "f86c2802ee5b7ed7");
}
