use std::path::PathBuf;
use std::time::Duration;

use blobfuzz_core::exec::{ExecResult, ExecStatus, TrapReason};
use blobfuzz_core::harness::*;
#[cfg(feature = "bug-injection")]
use blobfuzz_core::lang::typecheck;
use blobfuzz_core::lang::{check_text, load_corpus, SourceShader};
#[cfg(feature = "bug-injection")]
use blobfuzz_core::metamorph::{
    applicable_sites, apply_step, content_hash, donors_from, replay_recipe, Step, TransformKind, VariantRecipe,
};
use blobfuzz_core::opt::{BugId, PipelineConfig};

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/manifest.toml")
}

fn corpus() -> Vec<SourceShader> {
    load_corpus(&manifest()).unwrap()
}

fn config(variants: u32, bugs: &[BugId]) -> CampaignConfig {
    CampaignConfig {
        manifest: manifest(),
        variants_per_reference: variants,
        pipeline: PipelineConfig::with_bugs(bugs.iter().copied()),
        ..Default::default()
    }
}

fn stub() -> String {
    env!("CARGO_BIN_EXE_blobfuzz-stub-adapter").to_string()
}

fn adapter(args: &[&str]) -> AdapterConfig {
    let mut command = vec![stub()];
    command.extend(args.iter().map(|s| s.to_string()));
    AdapterConfig { command, mix: MixConvention::Native }
}

fn ok(outputs: &[(&str, f32)]) -> ExecResult {
    let map = outputs.iter().map(|(n, v)| (n.to_string(), vec![v.to_bits()])).collect();
    ExecResult::finish(ExecStatus::Ok, 1, map, vec![])
}

#[test]
fn decision_table() {
    let outs = vec!["o".to_string()];
    let r = ok(&[("o", 1.0)]);
    let compiled = CompileStatus::Compiled;
    assert_eq!(classify_result(&r, &compiled, Some(&ok(&[("o", 1.0)])), &outs), None);
    assert_eq!(classify_result(&r, &compiled, Some(&ok(&[("o", 2.0)])), &outs), Some(AnomalyKind::SemanticDivergence));
    // Extra outputs in the variant are not compared.
    assert_eq!(classify_result(&r, &compiled, Some(&ok(&[("o", 1.0), ("donated0", 5.0)])), &outs), None);
    let trap = ExecResult::finish(ExecStatus::Trap(TrapReason::IntDivByZero), 1, Default::default(), vec![]);
    assert_eq!(classify_result(&r, &compiled, Some(&trap), &outs), Some(AnomalyKind::SemanticDivergence));
    let spin = ExecResult::finish(ExecStatus::StepBudgetExceeded, 1, Default::default(), vec![]);
    assert_eq!(classify_result(&r, &compiled, Some(&spin), &outs), Some(AnomalyKind::Stall));
    let crash = CompileStatus::Crash { faulting_pass: None, detail: "killed by signal 6".into() };
    assert_eq!(classify_result(&r, &crash, None, &outs), Some(AnomalyKind::Crash));
    let stall = CompileStatus::Stall { faulting_pass: None, detail: "timed out".into() };
    assert_eq!(classify_result(&r, &stall, None, &outs), Some(AnomalyKind::Stall));
    assert_ne!(outcome_hash(&trap, &outs), outcome_hash(&r, &outs));
}

#[test]
fn clean_pipeline_reports_nothing() {
    let out = run_campaign(&config(200, &[])).unwrap();
    let s = &out.stats;
    assert!(out.reports.is_empty(), "{}", out.reports[0].to_json());
    assert!(s.reference_errors.is_empty(), "{:?}", s.reference_errors);
    assert!(s.variant_errors.is_empty(), "{:?}", s.variant_errors);
    assert!(s.oracle_mismatches.is_empty(), "{:?}", s.oracle_mismatches);
    assert_eq!(s.variants_tested + s.generation_failures, s.variants_requested);
    assert_eq!(s.variants_requested, corpus().len() as u64 * 200);
    assert!(s.throughput > 0.0);
    assert!((s.throughput - s.variants_tested as f64 / s.wall_time_secs).abs() < 1e-6 * s.throughput.max(1.0));
}

#[cfg(feature = "bug-injection")]
/// A minimized recipe must replay, still show `kind`, and lose that when
/// any single step is dropped.
fn check_minimal(report: &AnomalyReport, cfg: &CampaignConfig) {
    let shaders = corpus();
    let donors = donors_from(&shaders).unwrap();
    let src = shaders.iter().find(|s| s.name == report.reference_name).unwrap();
    let backend = cfg.backend();
    let reference = prepare_reference(&backend, src, &cfg.exec_seeds).unwrap();
    let reproduces = |r: &VariantRecipe| {
        let Ok(v) = replay_recipe(&reference.typed, &reference.name, &donors, r) else { return false };
        let typed = typecheck(&v.ast).unwrap();
        matches!(evaluate(&backend, &reference, &typed, &cfg.exec_seeds, false), Ok(Some(x)) if x.kind == report.kind)
    };
    let min = report.minimized_recipe.as_ref().expect("minimized");
    assert!(min.chain.len() <= report.recipe.chain.len());
    assert!(reproduces(min), "{}", report.to_json());
    if min.chain.len() > 1 {
        for i in 0..min.chain.len() {
            let mut c = min.chain.clone();
            c.remove(i);
            assert!(!reproduces(&min.with_chain(c)), "not 1-minimal: {}", report.to_json());
        }
    }
}

#[cfg(feature = "bug-injection")]
fn injected(bug: BugId, variants: u32) -> (CampaignConfig, Vec<AnomalyReport>) {
    let cfg = config(variants, &[bug]);
    let out = run_campaign(&cfg).unwrap();
    assert!(out.stats.oracle_mismatches.is_empty());
    assert_eq!(out.stats.minimization_failures, 0);
    (cfg, out.reports)
}

#[cfg(feature = "bug-injection")]
#[test]
fn instcombine_fault_is_found_and_localized() {
    let (cfg, reports) = injected(BugId::InstCombineWrongIdentity, 20);
    assert!(!reports.is_empty());
    for r in &reports {
        assert_eq!(r.kind, AnomalyKind::SemanticDivergence);
        assert_eq!(r.localization.faulting_pass.as_deref(), Some("InstCombine"), "{}", r.to_json());
        let (a, b) = &r.hashes;
        assert!(a.is_some() && b.is_some() && a != b);
        assert_eq!(r.injection_set, vec![BugId::InstCombineWrongIdentity]);
        assert!(r.localization.ddg_summary.as_ref().is_some_and(|d| !d.is_empty()));
    }
    assert!(reports.iter().any(|r| r.minimized_recipe.as_ref().unwrap().chain.len() == 1));
    for r in reports.iter().take(12) {
        check_minimal(r, &cfg);
    }
}

#[cfg(feature = "bug-injection")]
#[test]
fn dce_fault_leaves_a_flagged_undef() {
    let (cfg, reports) = injected(BugId::DceDropsLiveStore, 60);
    assert!(!reports.is_empty());
    for r in &reports {
        assert_eq!(r.kind, AnomalyKind::SemanticDivergence);
        assert_eq!(r.localization.faulting_pass.as_deref(), Some("Dce"));
        let d = r.localization.ddg_summary.as_ref().unwrap();
        assert!(!d.undef_sites.is_empty(), "{d}");
        let (a, b) = &r.hashes;
        assert!(a.is_some() && b.is_some() && a != b);
        check_minimal(r, &cfg);
    }
}

#[cfg(feature = "bug-injection")]
#[test]
fn peephole_fault_is_a_crash() {
    let (cfg, reports) = injected(BugId::PeepholeNullDeref, 60);
    assert!(!reports.is_empty());
    for r in &reports {
        assert_eq!(r.kind, AnomalyKind::Crash);
        assert_eq!(r.localization.faulting_pass.as_deref(), Some("Peephole"));
        assert!(r.localization.detail.is_some());
        check_minimal(r, &cfg);
        assert_eq!(r.minimized_recipe.as_ref().unwrap().chain.len(), 1);
    }
}

#[cfg(feature = "bug-injection")]
#[test]
fn unroll_fault_is_a_stall() {
    let (cfg, reports) = injected(BugId::UnrollNonterminating, 10);
    assert!(!reports.is_empty());
    for r in &reports {
        assert_eq!(r.kind, AnomalyKind::Stall);
        assert_eq!(r.localization.faulting_pass.as_deref(), Some("LoopUnroll"));
    }
    for r in reports.iter().take(4) {
        check_minimal(r, &cfg);
    }
}

#[cfg(feature = "bug-injection")]
#[test]
fn one_trigger_among_eight_minimizes_to_it() {
    let shaders = corpus();
    let src = shaders.iter().find(|s| s.name == "branchy").unwrap();
    let mut typed = check_text(&src.text).unwrap();
    let mut chain = Vec::new();
    for k in 0..8u64 {
        let sites = applicable_sites(&typed, false);
        let want = if k == 2 { TransformKind::IfToSwitch } else { TransformKind::MixWrap };
        let (kind, site) = *sites.iter().find(|(kind, _)| *kind == want).expect("site");
        let step = Step { kind, site, param: k, donor: None };
        typed = typecheck(&apply_step(&typed, &step, &[]).unwrap()).unwrap();
        chain.push(step);
    }
    let recipe = VariantRecipe {
        seed: 0,
        attempt: 0,
        chain,
        donor_names: vec![],
        reference_hash: format!("{:016x}", content_hash(&check_text(&src.text).unwrap().ast)),
        donor_hashes: Default::default(),
    };
    let cfg = config(1, &[BugId::PeepholeNullDeref]);
    let backend = cfg.backend();
    let reference = prepare_reference(&backend, src, &cfg.exec_seeds).unwrap();
    let min = minimize(&backend, &reference, &[], &recipe, AnomalyKind::Crash, &cfg.exec_seeds).unwrap();
    assert_eq!(min.chain.len(), 1);
    assert_eq!(min.chain[0], recipe.chain[2]);
    // Already minimal stays put.
    assert_eq!(minimize(&backend, &reference, &[], &min, AnomalyKind::Crash, &cfg.exec_seeds).unwrap(), min);
    // A clean pipeline cannot reproduce it.
    let clean = Backend::InRepo(PipelineConfig::default());
    let reference = prepare_reference(&clean, src, &cfg.exec_seeds).unwrap();
    assert!(matches!(
        minimize(&clean, &reference, &[], &recipe, AnomalyKind::Crash, &cfg.exec_seeds),
        Err(HarnessError::NonReproducible(_))
    ));
}

#[cfg(feature = "bug-injection")]
#[test]
fn reports_do_not_depend_on_parallelism() {
    let mut cfg = config(15, &[BugId::InstCombineWrongIdentity]);
    cfg.parallelism = 1;
    let one = run_campaign(&cfg).unwrap().reports;
    cfg.parallelism = 8;
    let many = run_campaign(&cfg).unwrap().reports;
    assert!(!one.is_empty());
    let lines = |rs: &[AnomalyReport]| rs.iter().map(|r| r.to_json()).collect::<Vec<_>>();
    assert_eq!(lines(&one), lines(&many));
    let dir = tempfile::tempdir().unwrap();
    write_reports(&dir.path().join("a.jsonl"), &one).unwrap();
    write_reports(&dir.path().join("b.jsonl"), &many).unwrap();
    assert_eq!(std::fs::read(dir.path().join("a.jsonl")).unwrap(), std::fs::read(dir.path().join("b.jsonl")).unwrap());
}

#[cfg(not(feature = "bug-injection"))]
#[test]
fn injections_need_the_feature() {
    assert!(matches!(run_campaign(&config(1, &[BugId::PeepholeNullDeref])), Err(HarnessError::Pipeline(_))));
}

#[test]
fn invalid_configs_are_rejected() {
    let mut cfg = config(1, &[]);
    cfg.exec_seeds.clear();
    assert!(matches!(run_campaign(&cfg), Err(HarnessError::InvalidConfig(_))));
    let mut cfg = config(1, &[]);
    cfg.timeout_ms = 0;
    assert!(matches!(run_campaign(&cfg), Err(HarnessError::InvalidConfig(_))));
    let mut cfg = config(1, &[]);
    cfg.manifest = "/nonexistent/manifest.toml".into();
    assert!(matches!(run_campaign(&cfg), Err(HarnessError::Corpus(_))));
}

const SHADER: &str = "in float x;\nout float o;\nvoid main() {\n  o = mix(x, 2.0, 0.25);\n}\n";

#[test]
fn adapter_protocol() {
    let t = Duration::from_secs(20);
    match adapter_compile(SHADER, &adapter(&["identity"]), t).unwrap() {
        AdapterOutcome::Compiled(m) => assert_eq!(m.output_names(), vec!["o".to_string()]),
        other => panic!("{other:?}"),
    }
    assert!(matches!(adapter_compile(SHADER, &adapter(&["sleep", "5000"]), Duration::from_millis(200)).unwrap(), AdapterOutcome::TimedOut));
    match adapter_compile(SHADER, &adapter(&["abort"]), t).unwrap() {
        AdapterOutcome::Crashed(d) => assert!(d.contains("signal"), "{d}"),
        other => panic!("{other:?}"),
    }
    match adapter_compile(SHADER, &adapter(&["exit", "3"]), t).unwrap() {
        AdapterOutcome::Crashed(d) => assert!(d.contains('3'), "{d}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(adapter_compile(SHADER, &adapter(&["garbage"]), t), Err(AdapterError::Protocol(_))));
    let missing = AdapterConfig { command: vec!["/nonexistent/compiler".into()], mix: MixConvention::Native };
    assert!(matches!(adapter_compile(SHADER, &missing, t), Err(AdapterError::Spawn(..))));
}

#[test]
fn glsl_convention_swaps_mix_operands() {
    let typed = check_text(SHADER).unwrap();
    assert!(wire_text(&typed.ast, MixConvention::Native).contains("mix(x, 2.0, 0.25)"));
    assert!(wire_text(&typed.ast, MixConvention::Glsl).contains("mix(2.0, x, 0.25)"));
}

#[test]
fn adapter_campaigns() {
    let mut cfg = config(3, &[]);
    cfg.adapter = Some(adapter(&["identity"]));
    let out = run_campaign(&cfg).unwrap();
    assert!(out.reports.is_empty(), "{}", out.reports[0].to_json());
    assert!(out.stats.variants_tested > 0);
}

#[cfg(feature = "bug-injection")]
#[test]
fn adapter_campaigns_with_faults() {
    let mut cfg = config(8, &[]);
    cfg.adapter = Some(adapter(&["optimize", "instcombine_wrong_identity"]));
    let out = run_campaign(&cfg).unwrap();
    assert!(!out.reports.is_empty());
    for r in &out.reports {
        assert_eq!(r.kind, AnomalyKind::SemanticDivergence);
        assert_eq!(r.localization.faulting_pass, None);
        assert!(r.localization.detail.as_deref().unwrap().contains("unavailable"));
        assert!(r.localization.ddg_summary.is_some());
    }

    cfg.variants_per_reference = 10;
    cfg.adapter = Some(adapter(&["optimize", "peephole_null_deref"]));
    let out = run_campaign(&cfg).unwrap();
    assert!(!out.reports.is_empty());
    for r in &out.reports {
        assert_eq!(r.kind, AnomalyKind::Crash);
        assert!(r.localization.detail.as_deref().unwrap().contains("signal"));
    }
}
