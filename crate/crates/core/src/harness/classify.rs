//! Compiling one shader through the backend under test and deciding
//! whether its behaviour departs from the reference.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::adapter::{adapter_compile, wire_text, AdapterConfig, AdapterError, AdapterOutcome};
use crate::exec::{execute, ExecEnv, ExecResult, ExecStatus};
use crate::ir::{lower, IrModule, LowerError};
use crate::lang::TypedAst;
use crate::opt::{run_pipeline, PassTrace, PipelineConfig, PipelineStatus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnomalyKind {
    Crash,
    Stall,
    SemanticDivergence,
}

impl AnomalyKind {
    pub fn name(self) -> &'static str {
        match self {
            AnomalyKind::Crash => "Crash",
            AnomalyKind::Stall => "Stall",
            AnomalyKind::SemanticDivergence => "SemanticDivergence",
        }
    }
}

/// How compilation ended.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CompileStatus {
    Compiled,
    Crash { faulting_pass: Option<String>, detail: String },
    Stall { faulting_pass: Option<String>, detail: String },
}

pub struct Compiled {
    pub status: CompileStatus,
    pub ir: Option<IrModule>,
    pub trace: Option<PassTrace>,
}

/// The compiler under test.
#[derive(Clone, Debug)]
pub enum Backend {
    InRepo(PipelineConfig),
    Adapter { config: AdapterConfig, timeout: Duration },
}

#[derive(Debug, thiserror::Error)]
pub enum BackendError {
    #[error(transparent)]
    Lower(#[from] LowerError),
    #[error(transparent)]
    Adapter(#[from] AdapterError),
}

impl Backend {
    pub fn has_trace(&self) -> bool {
        matches!(self, Backend::InRepo(_))
    }

    pub fn compile(&self, typed: &TypedAst, trace: bool) -> Result<Compiled, BackendError> {
        match self {
            Backend::InRepo(cfg) => {
                let m = lower(typed)?;
                let mut cfg = cfg.clone();
                cfg.trace = trace;
                let out = run_pipeline(&m, &cfg);
                let status = match out.status {
                    PipelineStatus::Completed => CompileStatus::Compiled,
                    PipelineStatus::InternalFault { pass, detail } => {
                        CompileStatus::Crash { faulting_pass: Some(pass.name().into()), detail }
                    }
                    PipelineStatus::StallBudgetExceeded => CompileStatus::Stall {
                        faulting_pass: out.last_changed.first().map(|p| p.name().to_string()),
                        detail: format!("no fixpoint after {} iterations", out.iterations),
                    },
                };
                let ir = (status == CompileStatus::Compiled).then_some(out.ir);
                Ok(Compiled { status, ir, trace: out.trace })
            }
            Backend::Adapter { config, timeout } => {
                let text = wire_text(&typed.ast, config.mix);
                Ok(match adapter_compile(&text, config, *timeout)? {
                    AdapterOutcome::Compiled(m) => Compiled { status: CompileStatus::Compiled, ir: Some(m), trace: None },
                    AdapterOutcome::Crashed(detail) => {
                        Compiled { status: CompileStatus::Crash { faulting_pass: None, detail }, ir: None, trace: None }
                    }
                    AdapterOutcome::TimedOut => Compiled {
                        status: CompileStatus::Stall {
                            faulting_pass: None,
                            detail: format!("adapter timed out after {} ms", timeout.as_millis()),
                        },
                        ir: None,
                        trace: None,
                    },
                })
            }
        }
    }
}

/// The anomaly, if any, for one execution seed. `outputs` are the
/// reference's output slots; outputs a variant adds are ignored.
pub fn classify_result(
    reference: &ExecResult,
    compiled: &CompileStatus,
    variant: Option<&ExecResult>,
    outputs: &[String],
) -> Option<AnomalyKind> {
    match compiled {
        CompileStatus::Crash { .. } => return Some(AnomalyKind::Crash),
        CompileStatus::Stall { .. } => return Some(AnomalyKind::Stall),
        CompileStatus::Compiled => {}
    }
    let v = variant?;
    if !reference.is_ok() {
        return None;
    }
    match v.status {
        ExecStatus::StepBudgetExceeded => Some(AnomalyKind::Stall),
        ExecStatus::Trap(_) => Some(AnomalyKind::SemanticDivergence),
        ExecStatus::Ok => (v.hash_over(outputs) != reference.hash_over(outputs)).then_some(AnomalyKind::SemanticDivergence),
    }
}

/// What the reference produced under each execution seed.
pub struct ReferenceRun {
    pub name: String,
    pub typed: TypedAst,
    pub outputs: Vec<String>,
    pub ir: IrModule,
    pub execs: Vec<ExecResult>,
    /// Interpreter hashes per seed, the oracle for variant soundness.
    pub oracle: Vec<Option<u64>>,
}

/// One classified run of a variant.
pub struct Verdict {
    pub kind: AnomalyKind,
    /// Index into the execution seeds; 0 for compile-time anomalies.
    pub seed_index: usize,
    pub compiled: Compiled,
    pub exec: Option<ExecResult>,
}

/// Compiles and runs a variant, returning the first anomaly across seeds.
pub fn evaluate(
    backend: &Backend,
    reference: &ReferenceRun,
    variant: &TypedAst,
    seeds: &[u64],
    trace: bool,
) -> Result<Option<Verdict>, BackendError> {
    let compiled = backend.compile(variant, trace)?;
    if compiled.status != CompileStatus::Compiled {
        let kind = classify_result(&reference.execs[0], &compiled.status, None, &reference.outputs);
        return Ok(kind.map(|kind| Verdict { kind, seed_index: 0, compiled, exec: None }));
    }
    let m = compiled.ir.as_ref().expect("compiled module");
    for (i, &s) in seeds.iter().enumerate() {
        let r = execute(m, &ExecEnv::with_seed(s));
        if let Some(kind) = classify_result(&reference.execs[i], &compiled.status, Some(&r), &reference.outputs) {
            return Ok(Some(Verdict { kind, seed_index: i, compiled, exec: Some(r) }));
        }
    }
    Ok(None)
}
