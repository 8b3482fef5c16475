//! Differential campaigns: generate variants of every corpus shader,
//! compile them with the compiler under test, compare their outputs with
//! the reference's, then classify, localize and minimize what differs.

mod adapter;
mod classify;
mod localize;
mod minimize;

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use adapter::{adapter_compile, wire_text, AdapterConfig, AdapterError, AdapterOutcome, MixConvention};
pub use classify::{classify_result, evaluate, AnomalyKind, Backend, BackendError, CompileStatus, Compiled, ReferenceRun, Verdict};
pub use localize::{divergence_summary, localize, Localization};
pub use minimize::minimize;

use crate::exec::{execute, fnv1a64, ExecEnv, ExecResult};
use crate::lang::interp::interpret;
use crate::lang::{check_text, load_corpus, typecheck, CorpusError, SourceShader};
use crate::metamorph::{donors_from, generate_variant, Donor, VariantRecipe, MAX_DEPTH};
use crate::opt::{BugId, ConfigError, PipelineConfig};
use crate::rng::derive;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CampaignConfig {
    pub manifest: PathBuf,
    pub variants_per_reference: u32,
    pub depth_min: u32,
    pub depth_max: u32,
    pub seed: u64,
    /// Execution seeds every variant runs under.
    pub exec_seeds: Vec<u64>,
    pub pipeline: PipelineConfig,
    /// External compiler; the in-repo pipeline when absent.
    pub adapter: Option<AdapterConfig>,
    /// Per-compilation limit for adapters.
    pub timeout_ms: u64,
    pub parallelism: usize,
    pub minimize: bool,
    /// Also check each variant against its reference in the interpreter.
    pub check_oracle: bool,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            manifest: PathBuf::from("corpus/manifest.toml"),
            variants_per_reference: 200,
            depth_min: 1,
            depth_max: 6,
            seed: 0,
            exec_seeds: vec![1, 2, 3],
            pipeline: PipelineConfig::default(),
            adapter: None,
            timeout_ms: 10_000,
            parallelism: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            minimize: true,
            check_oracle: true,
        }
    }
}

impl CampaignConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::InvalidConfig(m.to_string()));
        if self.depth_min == 0 || self.depth_min > self.depth_max || self.depth_max > MAX_DEPTH {
            return bad(&format!("depth range must satisfy 1 <= min <= max <= {MAX_DEPTH}"));
        }
        if self.exec_seeds.is_empty() {
            return bad("at least one execution seed is needed");
        }
        if self.parallelism == 0 {
            return bad("parallelism must be at least 1");
        }
        if self.timeout_ms == 0 {
            return bad("timeout must be positive");
        }
        if matches!(&self.adapter, Some(a) if a.command.is_empty()) {
            return bad("adapter command is empty");
        }
        self.pipeline.validate()?;
        Ok(())
    }

    pub fn backend(&self) -> Backend {
        match &self.adapter {
            Some(a) => Backend::Adapter { config: a.clone(), timeout: Duration::from_millis(self.timeout_ms) },
            None => Backend::InRepo(self.pipeline.clone()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub kind: AnomalyKind,
    pub reference_name: String,
    pub variant_index: u32,
    pub recipe: VariantRecipe,
    pub minimized_recipe: Option<VariantRecipe>,
    pub localization: Localization,
    /// Output hashes (reference, variant) in hex over the reference's
    /// outputs; absent where a run produced nothing.
    pub hashes: (Option<String>, Option<String>),
    pub exec_seed: u64,
    pub injection_set: Vec<BugId>,
}

impl AnomalyReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CampaignStats {
    pub references: usize,
    /// References that could not be compiled or run cleanly, with reasons.
    pub reference_errors: Vec<String>,
    pub variants_requested: u64,
    pub variants_tested: u64,
    pub generation_failures: u64,
    /// Variants the harness itself could not process.
    pub variant_errors: Vec<String>,
    /// Variants whose interpreted outputs differ from their reference's.
    /// Nonzero means a transform is unsound.
    pub oracle_mismatches: Vec<String>,
    pub anomalies: BTreeMap<AnomalyKind, u64>,
    pub minimization_failures: u64,
    pub wall_time_secs: f64,
    /// Variants tested per second.
    pub throughput: f64,
}

#[derive(Clone, Debug)]
pub struct CampaignOutcome {
    /// Ordered by reference name, then variant index.
    pub reports: Vec<AnomalyReport>,
    pub stats: CampaignStats,
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("corpus shader `{0}` is invalid: {1}")]
    InvalidShader(String, String),
    #[error("invalid campaign configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Pipeline(#[from] ConfigError),
    #[error("anomaly in `{0}` does not reproduce")]
    NonReproducible(String),
    #[error("cannot write reports: {0}")]
    Io(#[from] std::io::Error),
}

/// Compiles and runs a reference under every seed. Errors are reasons the
/// reference cannot serve as an oracle.
pub fn prepare_reference(backend: &Backend, shader: &SourceShader, seeds: &[u64]) -> Result<ReferenceRun, String> {
    let typed = check_text(&shader.text).map_err(|e| e.to_string())?;
    let compiled = backend.compile(&typed, false).map_err(|e| e.to_string())?;
    let ir = match (compiled.status, compiled.ir) {
        (CompileStatus::Compiled, Some(ir)) => ir,
        (CompileStatus::Crash { detail, .. }, _) => return Err(format!("reference crashes the compiler: {detail}")),
        (CompileStatus::Stall { detail, .. }, _) => return Err(format!("reference stalls the compiler: {detail}")),
        (CompileStatus::Compiled, None) => unreachable!(),
    };
    let mut execs = Vec::new();
    let mut oracle = Vec::new();
    let outputs: Vec<String> = ir.output_names();
    for &s in seeds {
        let env = ExecEnv::with_seed(s);
        let r = execute(&ir, &env);
        if !r.is_ok() {
            return Err(format!("reference does not run under seed {s}: {:?}", r.status));
        }
        execs.push(r);
        oracle.push(interpret(&typed, &env).hash_over(&outputs));
    }
    Ok(ReferenceRun { name: shader.name.clone(), typed, outputs, ir, execs, oracle })
}

/// Output hash of a completed run. A trapped or exhausted run hashes its
/// status instead, so it still compares unequal to any completed run.
pub fn outcome_hash(r: &ExecResult, outputs: &[String]) -> u64 {
    r.hash_over(outputs).unwrap_or_else(|| fnv1a64(format!("{:?}", r.status).into_bytes()))
}

/// Seed of variant `k` of `reference`.
pub fn variant_seed(campaign_seed: u64, reference: &str, k: u32) -> u64 {
    derive(campaign_seed, &[fnv1a64(reference.bytes()), k as u64])
}

fn variant_depth(cfg: &CampaignConfig, vseed: u64) -> u32 {
    let span = (cfg.depth_max - cfg.depth_min + 1) as u64;
    cfg.depth_min + (derive(vseed, &[0xDE97]) % span) as u32
}

enum Unit {
    Clean,
    GenerationFailed,
    VariantError(String),
    OracleMismatch(String),
    Anomaly(Box<AnomalyReport>, bool),
}

struct Ctx<'a> {
    cfg: &'a CampaignConfig,
    backend: Backend,
    donors: &'a [Donor],
}

fn run_unit(ctx: &Ctx, reference: &ReferenceRun, k: u32) -> Unit {
    let cfg = ctx.cfg;
    let vseed = variant_seed(cfg.seed, &reference.name, k);
    let tag = format!("{}#{k}", reference.name);
    let Ok(v) = generate_variant(&reference.typed, &reference.name, ctx.donors, vseed, variant_depth(cfg, vseed)) else {
        return Unit::GenerationFailed;
    };
    let typed = match typecheck(&v.ast) {
        Ok(t) => t,
        Err(e) => return Unit::VariantError(format!("{tag}: {e}")),
    };
    if cfg.check_oracle {
        for (i, &s) in cfg.exec_seeds.iter().enumerate() {
            if interpret(&typed, &ExecEnv::with_seed(s)).hash_over(&reference.outputs) != reference.oracle[i] {
                return Unit::OracleMismatch(format!("{tag} under seed {s}"));
            }
        }
    }
    let verdict = match evaluate(&ctx.backend, reference, &typed, &cfg.exec_seeds, false) {
        Ok(Some(v)) => v,
        Ok(None) => return Unit::Clean,
        Err(e) => return Unit::VariantError(format!("{tag}: {e}")),
    };
    // Rerun with a trace only when something went wrong.
    let verdict = if ctx.backend.has_trace() {
        match evaluate(&ctx.backend, reference, &typed, &cfg.exec_seeds, true) {
            Ok(Some(t)) if t.kind == verdict.kind => t,
            _ => verdict,
        }
    } else {
        verdict
    };
    let localization = localize(&verdict, reference, &cfg.exec_seeds);
    let hex = |h: Option<u64>| h.map(|h| format!("{h:016x}"));
    let ref_hash = hex(reference.execs[verdict.seed_index].hash_over(&reference.outputs));
    let var_hash = hex(verdict.exec.as_ref().map(|r| outcome_hash(r, &reference.outputs)));
    let (minimized_recipe, min_failed) = if cfg.minimize {
        match minimize(&ctx.backend, reference, ctx.donors, &v.recipe, verdict.kind, &cfg.exec_seeds) {
            Ok(r) => (Some(r), false),
            Err(_) => (None, true),
        }
    } else {
        (None, false)
    };
    Unit::Anomaly(
        Box::new(AnomalyReport {
            kind: verdict.kind,
            reference_name: reference.name.clone(),
            variant_index: k,
            recipe: v.recipe,
            minimized_recipe,
            localization,
            hashes: (ref_hash, var_hash),
            exec_seed: cfg.exec_seeds[verdict.seed_index],
            injection_set: cfg.pipeline.injected_bugs.iter().copied().collect(),
        }),
        min_failed,
    )
}

pub fn run_campaign(cfg: &CampaignConfig) -> Result<CampaignOutcome, HarnessError> {
    cfg.validate()?;
    let corpus = load_corpus(&cfg.manifest)?;
    run_campaign_on(&corpus, cfg)
}

/// A campaign over an already loaded corpus; `cfg.manifest` is ignored.
pub fn run_campaign_on(corpus: &[SourceShader], cfg: &CampaignConfig) -> Result<CampaignOutcome, HarnessError> {
    cfg.validate()?;
    let start = Instant::now();
    let donors = donors_from(corpus).map_err(|e| HarnessError::InvalidShader("corpus".into(), e.to_string()))?;
    let pool =
        rayon::ThreadPoolBuilder::new().num_threads(cfg.parallelism).build().map_err(|e| HarnessError::InvalidConfig(e.to_string()))?;
    let ctx = Ctx { cfg, backend: cfg.backend(), donors: &donors };
    let mut shaders: Vec<&SourceShader> = corpus.iter().collect();
    shaders.sort_by(|a, b| a.name.cmp(&b.name));

    let (refs, units) = pool.install(|| {
        let refs: Vec<Result<ReferenceRun, String>> =
            shaders.par_iter().map(|s| prepare_reference(&ctx.backend, s, &cfg.exec_seeds)).collect();
        let jobs: Vec<(usize, u32)> = refs
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_ok())
            .flat_map(|(i, _)| (0..cfg.variants_per_reference).map(move |k| (i, k)))
            .collect();
        let units: Vec<Unit> = jobs.par_iter().map(|&(i, k)| run_unit(&ctx, refs[i].as_ref().expect("prepared"), k)).collect();
        (refs, units)
    });

    let mut stats = CampaignStats { references: shaders.len(), ..Default::default() };
    for (s, r) in shaders.iter().zip(&refs) {
        if let Err(e) = r {
            stats.reference_errors.push(format!("{}: {e}", s.name));
        }
    }
    stats.variants_requested = (refs.iter().filter(|r| r.is_ok()).count() as u64) * cfg.variants_per_reference as u64;
    let mut reports = Vec::new();
    for u in units {
        match u {
            Unit::Clean => stats.variants_tested += 1,
            Unit::GenerationFailed => stats.generation_failures += 1,
            Unit::VariantError(e) => stats.variant_errors.push(e),
            Unit::OracleMismatch(e) => {
                stats.variants_tested += 1;
                stats.oracle_mismatches.push(e)
            }
            Unit::Anomaly(r, min_failed) => {
                stats.variants_tested += 1;
                stats.minimization_failures += min_failed as u64;
                *stats.anomalies.entry(r.kind).or_default() += 1;
                reports.push(*r);
            }
        }
    }
    reports.sort_by(|a, b| (&a.reference_name, a.variant_index).cmp(&(&b.reference_name, b.variant_index)));
    stats.wall_time_secs = start.elapsed().as_secs_f64();
    stats.throughput = stats.variants_tested as f64 / stats.wall_time_secs.max(1e-9);
    Ok(CampaignOutcome { reports, stats })
}

/// One JSON report per line.
pub fn write_reports(path: &Path, reports: &[AnomalyReport]) -> Result<(), HarnessError> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    for r in reports {
        writeln!(f, "{}", r.to_json())?;
    }
    f.flush()?;
    Ok(())
}

/// Distinct faulting passes named across reports.
pub fn faulting_passes(reports: &[AnomalyReport]) -> BTreeSet<String> {
    reports.iter().filter_map(|r| r.localization.faulting_pass.clone()).collect()
}
