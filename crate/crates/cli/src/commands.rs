use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use thiserror::Error;

use blobfuzz_core::exec::{execute, ExecEnv, ExecResult};
use blobfuzz_core::forensics::{self, FingerprintDb, ForensicsError};
use blobfuzz_core::harness::{
    self, minimize, prepare_reference, AdapterConfig, AnomalyReport, CampaignConfig, HarnessError, MixConvention,
};
use blobfuzz_core::ir::{lower, parse_module, verify};
use blobfuzz_core::lang::interp::interpret;
use blobfuzz_core::lang::{check_text, load_corpus, SourceShader, Stage};
use blobfuzz_core::metamorph::{donors_from, generate_variant, replay_recipe, VariantRecipe};
use blobfuzz_core::opt::{run_pipeline, PipelineConfig};

use crate::{Cli, Command, DelayArgs, FuzzArgs, InspectArgs, MixFlag, PipelineArgs, ReduceArgs, RunArgs, TransformArgs};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Forensics(#[from] ForensicsError),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 64,
            _ => 1,
        }
    }
}

fn failed(e: impl std::fmt::Display) -> CliError {
    CliError::Failed(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| failed(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| failed(format!("cannot write {}: {e}", path.display())))
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string_pretty(v).expect("serializable"));
}

pub fn dispatch(cli: &Cli) -> Result<u8, CliError> {
    match &cli.command {
        Command::Fuzz(a) => fuzz(cli, a),
        Command::Transform(a) => transform(cli, a),
        Command::Run(a) => run(cli, a),
        Command::Reduce(a) => reduce(cli, a),
        Command::InspectBlob(a) => inspect_blob(a),
        Command::DelayReport(a) => delay_report(a),
    }
}

fn pipeline_config(p: &PipelineArgs) -> PipelineConfig {
    let mut cfg = PipelineConfig::with_bugs(p.inject.iter().copied());
    if !p.passes.is_empty() {
        cfg.passes = p.passes.clone();
    }
    cfg.fixpoint_budget = p.fixpoint_budget;
    cfg
}

fn fuzz(cli: &Cli, a: &FuzzArgs) -> Result<u8, CliError> {
    let mut cfg = CampaignConfig {
        manifest: a.corpus.clone(),
        variants_per_reference: a.variants,
        depth_min: a.depth_min,
        depth_max: a.depth_max,
        seed: cli.seed,
        exec_seeds: a.exec_seeds.clone(),
        pipeline: pipeline_config(&a.pipeline),
        adapter: None,
        timeout_ms: a.timeout_ms,
        minimize: !a.no_minimize,
        check_oracle: !a.no_oracle,
        ..Default::default()
    };
    if let Some(t) = cli.threads {
        cfg.parallelism = t;
    }
    if let Some(cmd) = &a.adapter {
        let mix = match a.adapter_mix {
            MixFlag::Native => MixConvention::Native,
            MixFlag::Glsl => MixConvention::Glsl,
        };
        cfg.adapter = Some(AdapterConfig { command: cmd.split_whitespace().map(str::to_string).collect(), mix });
    }
    if a.variants == 0 {
        return Err(CliError::Usage("--variants must be at least 1".into()));
    }
    if let Err(e @ (HarnessError::InvalidConfig(_) | HarnessError::Pipeline(_))) = cfg.validate() {
        return Err(CliError::Usage(e.to_string()));
    }
    let out = harness::run_campaign(&cfg)?;
    let path = cli.output.clone().unwrap_or_else(|| PathBuf::from("reports.jsonl"));
    harness::write_reports(&path, &out.reports)?;
    let stats = serde_json::to_string_pretty(&out.stats).expect("stats serialize");
    if let Some(p) = &a.stats {
        write(p, &stats)?;
    }
    println!("{stats}");
    let s = &out.stats;
    if cli.verbosity >= 1 {
        eprintln!(
            "{} variants tested in {:.1}s ({:.0}/s), {} anomalies, reports in {}",
            s.variants_tested,
            s.wall_time_secs,
            s.throughput,
            out.reports.len(),
            path.display()
        );
    }
    for e in &s.reference_errors {
        eprintln!("warning: reference skipped: {e}");
    }
    if !s.oracle_mismatches.is_empty() {
        return Err(failed(format!(
            "{} variants disagree with their reference in the interpreter (first: {})",
            s.oracle_mismatches.len(),
            s.oracle_mismatches[0]
        )));
    }
    if !s.variant_errors.is_empty() {
        return Err(failed(format!("{} variants could not be processed (first: {})", s.variant_errors.len(), s.variant_errors[0])));
    }
    Ok(if out.reports.is_empty() { 0 } else { 2 })
}

fn source_from(path: &Path) -> Result<SourceShader, CliError> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("shader").to_string();
    let stage = path.extension().and_then(|x| x.to_str()).and_then(Stage::from_extension).unwrap_or(Stage::Fragment);
    Ok(SourceShader { name, stage, text: read(path)? })
}

fn transform(cli: &Cli, a: &TransformArgs) -> Result<u8, CliError> {
    let src = source_from(&a.input)?;
    let typed = check_text(&src.text).map_err(failed)?;
    let pool = match &a.corpus {
        Some(m) => load_corpus(m).map_err(failed)?,
        None => vec![src.clone()],
    };
    let donors = donors_from(&pool).map_err(failed)?;
    let variant = match &a.recipe {
        Some(p) => {
            let recipe = VariantRecipe::from_json(&read(p)?).map_err(failed)?;
            replay_recipe(&typed, &src.name, &donors, &recipe).map_err(failed)?
        }
        None => generate_variant(&typed, &src.name, &donors, cli.seed, a.depth).map_err(failed)?,
    };
    if a.verify {
        let vt = check_text(&variant.text).map_err(failed)?;
        let outputs: Vec<String> = lower(&typed).map_err(failed)?.output_names();
        for s in 0..4 {
            let env = ExecEnv::with_seed(s);
            if interpret(&typed, &env).hash_over(&outputs) != interpret(&vt, &env).hash_over(&outputs) {
                return Err(failed(format!("variant disagrees with the reference under seed {s}")));
            }
        }
    }
    let recipe = variant.recipe.to_json();
    match &cli.output {
        Some(p) => {
            write(p, &variant.text)?;
            let mut rp = p.clone().into_os_string();
            rp.push(".recipe.json");
            write(Path::new(&rp), &recipe)?;
            print_json(&variant.recipe);
        }
        None => print_json(&json!({ "text": variant.text, "recipe": variant.recipe })),
    }
    Ok(0)
}

fn result_json(r: &ExecResult, dump: bool) -> Value {
    let mut v = json!({
        "status": r.status,
        "hash": r.output_hash.map(|h| format!("{h:016x}")),
        "steps": r.steps,
    });
    if dump {
        let outs: BTreeMap<&String, Vec<f32>> =
            r.outputs.iter().map(|(k, lanes)| (k, lanes.iter().map(|b| f32::from_bits(*b)).collect())).collect();
        v["outputs"] = json!(outs);
    }
    if !r.diagnostics.is_empty() {
        v["diagnostics"] = json!(r.diagnostics);
    }
    v
}

fn run(cli: &Cli, a: &RunArgs) -> Result<u8, CliError> {
    let text = read(&a.input)?;
    let env = ExecEnv::with_seed(cli.seed);
    let is_ir = a.ir || matches!(a.input.extension().and_then(|x| x.to_str()), Some("ir" | "ll"));
    if a.interpret {
        let typed = check_text(&text).map_err(failed)?;
        print_json(&result_json(&interpret(&typed, &env), a.dump_outputs));
        return Ok(0);
    }
    let mut m = if is_ir {
        let m = parse_module(&text).map_err(failed)?;
        verify(&m).map_err(failed)?;
        m
    } else {
        lower(&check_text(&text).map_err(failed)?).map_err(failed)?
    };
    let mut pipeline = Value::Null;
    if a.optimize {
        let mut cfg = pipeline_config(&a.pipeline);
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        cfg.trace = a.trace_dir.is_some();
        let out = run_pipeline(&m, &cfg);
        if let (Some(dir), Some(t)) = (&a.trace_dir, &out.trace) {
            t.dump(dir).map_err(failed)?;
        }
        pipeline = json!({ "status": out.status, "iterations": out.iterations });
        m = out.ir;
    }
    let mut v = result_json(&execute(&m, &env), a.dump_outputs);
    if !pipeline.is_null() {
        v["pipeline"] = pipeline;
    }
    print_json(&v);
    Ok(0)
}

fn reduce(cli: &Cli, a: &ReduceArgs) -> Result<u8, CliError> {
    let corpus = load_corpus(&a.corpus).map_err(HarnessError::from)?;
    let donors = donors_from(&corpus).map_err(failed)?;
    let text = read(&a.reports)?;
    let reports: Vec<AnomalyReport> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| failed(format!("bad report: {e}"))))
        .collect::<Result<_, _>>()?;
    let picked: Vec<&AnomalyReport> = match a.index {
        Some(i) => vec![reports.get(i).ok_or_else(|| CliError::Usage(format!("no report at index {i}")))?],
        None => reports.iter().collect(),
    };
    let mut lines = Vec::new();
    let mut failures = 0;
    for r in picked {
        let src = corpus
            .iter()
            .find(|s| s.name == r.reference_name)
            .ok_or_else(|| failed(format!("reference `{}` is not in the corpus", r.reference_name)))?;
        let backend = harness::Backend::InRepo(PipelineConfig::with_bugs(r.injection_set.iter().copied()));
        let reference = prepare_reference(&backend, src, &a.exec_seeds).map_err(failed)?;
        match minimize(&backend, &reference, &donors, &r.recipe, r.kind, &a.exec_seeds) {
            Ok(m) => lines.push(json!({ "reference_name": r.reference_name, "kind": r.kind, "minimized_recipe": m }).to_string()),
            Err(e) => {
                failures += 1;
                eprintln!("{}#{}: {e}", r.reference_name, r.variant_index);
            }
        }
        if cli.verbosity >= 2 {
            eprintln!("reduced {}#{}", r.reference_name, r.variant_index);
        }
    }
    let body = lines.iter().map(|l| format!("{l}\n")).collect::<String>();
    match &cli.output {
        Some(p) => write(p, &body)?,
        None => print!("{body}"),
    }
    Ok(if failures == 0 { 0 } else { 1 })
}

fn inspect_blob(a: &InspectArgs) -> Result<u8, CliError> {
    let data = std::fs::read(&a.file).map_err(|e| failed(format!("cannot read {}: {e}", a.file.display())))?;
    let db = a.fingerprints.as_deref().map(FingerprintDb::load).transpose()?;
    let id = forensics::identify_blob(&data, db.as_ref(), a.threshold, a.min_len)?;
    let mut v = serde_json::to_value(&id).expect("serializable");
    if a.strings {
        v["strings"] = json!(forensics::extract_strings(&data, a.min_len)?);
    }
    print_json(&v);
    Ok(0)
}

fn delay_report(a: &DelayArgs) -> Result<u8, CliError> {
    let catalog = forensics::load_catalog(&a.catalog)?;
    if catalog.is_empty() {
        return Err(failed(format!("{} has no records", a.catalog.display())));
    }
    match &a.device {
        Some(d) => {
            let target = catalog.iter().find(|r| &r.device == d).ok_or_else(|| failed(format!("no device `{d}` in catalog")))?;
            print_json(&forensics::estimate_delay(&catalog, target)?);
        }
        None => print_json(&forensics::aggregate_delays(&catalog)),
    }
    Ok(0)
}
