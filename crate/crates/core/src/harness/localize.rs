//! Pinning an anomaly on a pass and on the instructions that changed.

use serde::{Deserialize, Serialize};

use super::classify::{AnomalyKind, CompileStatus, ReferenceRun, Verdict};
use crate::exec::ExecEnv;
use crate::ir::ddg::{build_ddg, ddg_diff, slice_outputs, DivergenceSummary};
use crate::ir::IrModule;
use crate::opt::first_divergent_snapshot_over;

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Localization {
    pub faulting_pass: Option<String>,
    pub ddg_summary: Option<DivergenceSummary>,
    /// Crash or stall detail, or why no pass could be named.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

/// Diffs the chains of the first reference output whose value differs.
/// A trapped variant is compared on the first output.
pub fn divergence_summary(
    reference: &ReferenceRun,
    seed_index: usize,
    variant_ir: &IrModule,
    variant_exec: Option<&crate::exec::ExecResult>,
) -> Option<DivergenceSummary> {
    let want = &reference.execs[seed_index];
    let output = reference
        .outputs
        .iter()
        .find(|o| match variant_exec {
            Some(v) if v.is_ok() => v.outputs.get(*o) != want.outputs.get(*o),
            _ => false,
        })
        .or(reference.outputs.first())?;
    let vs = slice_outputs(variant_ir, &build_ddg(variant_ir));
    let rs = slice_outputs(&reference.ir, &build_ddg(&reference.ir));
    Some(ddg_diff(vs.get(output)?, rs.get(output)?))
}

/// `verdict` must come from a run with tracing on when the backend has a
/// trace. Without a trace no pass is named for a divergence.
pub fn localize(verdict: &Verdict, reference: &ReferenceRun, seeds: &[u64]) -> Localization {
    match (&verdict.kind, &verdict.compiled.status) {
        (_, CompileStatus::Crash { faulting_pass, detail }) | (_, CompileStatus::Stall { faulting_pass, detail }) => {
            Localization { faulting_pass: faulting_pass.clone(), ddg_summary: None, detail: Some(detail.clone()) }
        }
        (kind, CompileStatus::Compiled) => {
            let ir = verdict.compiled.ir.as_ref().expect("compiled module");
            let ddg_summary = divergence_summary(reference, verdict.seed_index, ir, verdict.exec.as_ref());
            let env = ExecEnv::with_seed(seeds[verdict.seed_index]);
            let (faulting_pass, detail) = match &verdict.compiled.trace {
                Some(t) => match first_divergent_snapshot_over(t, &env, Some(&reference.outputs)) {
                    Ok(Some(p)) => (Some(p), None),
                    Ok(None) => (None, Some("every snapshot agrees with the first".to_string())),
                    Err(e) => (None, Some(e.to_string())),
                },
                None => (None, Some("localization unavailable: no pass trace".to_string())),
            };
            let detail = match (kind, detail) {
                (AnomalyKind::Stall, d) => d.or_else(|| Some("execution step budget exhausted".into())),
                (_, d) => d,
            };
            Localization { faulting_pass, ddg_summary, detail }
        }
    }
}
