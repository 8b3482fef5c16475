//! The optimizing middle end: passes, a fixpoint pass manager with
//! per-application tracing, and controllable faults for self-testing.

mod cfg;
mod combine;
mod dce;
mod fold;
mod half;
mod loops;
mod peephole;
pub(crate) mod util;

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{execute, ExecEnv};
use crate::ir::{parse_module, print_module, IrModule};

pub use loops::UNROLL_LIMIT;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PassId {
    HalfPromote,
    ConstFold,
    InstCombine,
    Peephole,
    Dce,
    CfgSimplify,
    LoopUnroll,
    LoopSplit,
}

impl PassId {
    pub const ALL: [PassId; 8] = [
        PassId::HalfPromote,
        PassId::ConstFold,
        PassId::InstCombine,
        PassId::Peephole,
        PassId::Dce,
        PassId::CfgSimplify,
        PassId::LoopUnroll,
        PassId::LoopSplit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PassId::HalfPromote => "HalfPromote",
            PassId::ConstFold => "ConstFold",
            PassId::InstCombine => "InstCombine",
            PassId::Peephole => "Peephole",
            PassId::Dce => "Dce",
            PassId::CfgSimplify => "CfgSimplify",
            PassId::LoopUnroll => "LoopUnroll",
            PassId::LoopSplit => "LoopSplit",
        }
    }

    /// Passes that compute on values and so must not see half types.
    fn is_arithmetic(self) -> bool {
        !matches!(self, PassId::HalfPromote)
    }
}

impl fmt::Display for PassId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PassId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        PassId::ALL.into_iter().find(|p| p.name().eq_ignore_ascii_case(s)).ok_or_else(|| format!("unknown pass `{s}`"))
    }
}

/// Controllable faults. Compiled in only with the `bug-injection` feature.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BugId {
    /// Miscompile: dead-code elimination deletes values carried into a phi
    /// out of a switch case, leaving `undef` behind.
    DceDropsLiveStore,
    /// Miscompile: the mix identity `mix(x, u, 1.0)` (that is, x * 1.0) is
    /// rewritten to 0.0 instead of x.
    InstCombineWrongIdentity,
    /// Crash: an internal fault on a `zext` feeding a `switch`.
    PeepholeNullDeref,
    /// Stall: loop unrolling reports a change on single-trip loops forever.
    UnrollNonterminating,
}

impl BugId {
    pub const ALL: [BugId; 4] =
        [BugId::DceDropsLiveStore, BugId::InstCombineWrongIdentity, BugId::PeepholeNullDeref, BugId::UnrollNonterminating];

    pub fn name(self) -> &'static str {
        match self {
            BugId::DceDropsLiveStore => "dce_drops_live_store",
            BugId::InstCombineWrongIdentity => "instcombine_wrong_identity",
            BugId::PeepholeNullDeref => "peephole_null_deref",
            BugId::UnrollNonterminating => "unroll_nonterminating",
        }
    }

    /// The pass the fault lives in.
    pub fn pass(self) -> PassId {
        match self {
            BugId::DceDropsLiveStore => PassId::Dce,
            BugId::InstCombineWrongIdentity => PassId::InstCombine,
            BugId::PeepholeNullDeref => PassId::Peephole,
            BugId::UnrollNonterminating => PassId::LoopUnroll,
        }
    }
}

impl fmt::Display for BugId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BugId {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        BugId::ALL.into_iter().find(|b| b.name() == s).ok_or_else(|| format!("unknown injection `{s}`"))
    }
}

/// Whether `b` is active under `bugs`. Always false without the
/// `bug-injection` feature.
pub(crate) fn active(bugs: &BTreeSet<BugId>, b: BugId) -> bool {
    cfg!(feature = "bug-injection") && bugs.contains(&b)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub passes: Vec<PassId>,
    pub fixpoint_budget: u32,
    pub trace: bool,
    #[serde(default)]
    pub injected_bugs: BTreeSet<BugId>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig { passes: PassId::ALL.to_vec(), fixpoint_budget: 64, trace: false, injected_bugs: BTreeSet::new() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("fixpoint budget must be at least 1")]
    ZeroBudget,
    #[error("HalfPromote must run before {0}")]
    HalfPromoteOrder(PassId),
    #[error("this build has no bug-injection support")]
    InjectionUnavailable,
}

impl PipelineConfig {
    pub fn with_bugs(bugs: impl IntoIterator<Item = BugId>) -> Self {
        PipelineConfig { injected_bugs: bugs.into_iter().collect(), ..Default::default() }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.fixpoint_budget == 0 {
            return Err(ConfigError::ZeroBudget);
        }
        if let Some(h) = self.passes.iter().position(|p| *p == PassId::HalfPromote) {
            if let Some(p) = self.passes[..h].iter().find(|p| p.is_arithmetic()) {
                return Err(ConfigError::HalfPromoteOrder(*p));
            }
        }
        if !self.injected_bugs.is_empty() && !cfg!(feature = "bug-injection") {
            return Err(ConfigError::InjectionUnavailable);
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Snapshot {
    pub pass: String,
    pub iteration: u32,
    pub ir: String,
}

/// IR text after every pass application, in order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PassTrace {
    pub snapshots: Vec<Snapshot>,
}

impl PassTrace {
    /// Writes `{index:04}_{pass}.ir` files into `dir`.
    pub fn dump(&self, dir: &std::path::Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (i, s) in self.snapshots.iter().enumerate() {
            std::fs::write(dir.join(format!("{i:04}_{}.ir", s.pass)), &s.ir)?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PipelineStatus {
    Completed,
    StallBudgetExceeded,
    InternalFault { pass: PassId, detail: String },
}

#[derive(Clone, Debug)]
pub struct PipelineOutput {
    pub ir: IrModule,
    pub trace: Option<PassTrace>,
    pub status: PipelineStatus,
    /// Full iterations over the pass list that were started.
    pub iterations: u32,
    /// Passes that reported a change during the last iteration run. Names
    /// the culprit when the budget runs out.
    pub last_changed: Vec<PassId>,
}

/// A pass-internal fault (the crash analog).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fault(pub String);

pub type PassResult = Result<(IrModule, bool), Fault>;

/// Runs one pass. `changed == false` means the module is returned as is.
pub fn run_pass(p: PassId, m: &IrModule, bugs: &BTreeSet<BugId>) -> PassResult {
    let mut out = m.clone();
    let changed = match p {
        PassId::HalfPromote => half::half_promote(&mut out),
        PassId::ConstFold => fold::const_fold(&mut out),
        PassId::InstCombine => combine::inst_combine(&mut out, bugs),
        PassId::Peephole => peephole::peephole(&mut out, bugs)?,
        PassId::Dce => dce::dce(&mut out, bugs),
        PassId::CfgSimplify => cfg::cfg_simplify(&mut out),
        PassId::LoopUnroll => loops::loop_unroll(&mut out, bugs),
        PassId::LoopSplit => loops::loop_split(&mut out),
    };
    if !changed {
        return Ok((m.clone(), false));
    }
    Ok((out, true))
}

/// Iterates the pass list until no pass reports a change, or the budget
/// of full iterations runs out.
pub fn run_pipeline(m: &IrModule, cfg: &PipelineConfig) -> PipelineOutput {
    let mut cur = m.clone();
    let mut trace = cfg.trace.then(PassTrace::default);
    let mut iterations = 0;
    let mut status = PipelineStatus::StallBudgetExceeded;
    let mut last_changed = Vec::new();
    'outer: while iterations < cfg.fixpoint_budget {
        iterations += 1;
        let mut any = false;
        last_changed.clear();
        for &p in &cfg.passes {
            match run_pass(p, &cur, &cfg.injected_bugs) {
                Ok((next, changed)) => {
                    any |= changed;
                    if changed {
                        last_changed.push(p);
                    }
                    cur = next;
                }
                Err(Fault(detail)) => {
                    status = PipelineStatus::InternalFault { pass: p, detail };
                    break 'outer;
                }
            }
            if let Some(t) = trace.as_mut() {
                t.snapshots.push(Snapshot { pass: p.name().into(), iteration: iterations - 1, ir: print_module(&cur) });
            }
        }
        if !any {
            status = PipelineStatus::Completed;
            break;
        }
    }
    PipelineOutput { ir: cur, trace, status, iterations, last_changed }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TraceError {
    #[error("snapshot {0} does not parse: {1}")]
    SnapshotUnparseable(usize, String),
    #[error("empty trace")]
    Empty,
}

/// Name of the first pass whose snapshot hashes differently from snapshot
/// 0 under `env`, restricted to `outputs` when given.
pub fn first_divergent_snapshot_over(trace: &PassTrace, env: &ExecEnv, outputs: Option<&[String]>) -> Result<Option<String>, TraceError> {
    let hash = |i: usize, text: &str| -> Result<Option<u64>, TraceError> {
        let m = parse_module(text).map_err(|e| TraceError::SnapshotUnparseable(i, e.to_string()))?;
        let r = execute(&m, env);
        Ok(match outputs {
            Some(names) => r.hash_over(names),
            None => r.output_hash,
        })
    };
    let first = trace.snapshots.first().ok_or(TraceError::Empty)?;
    let base = hash(0, &first.ir)?;
    let mut prev_text = &first.ir;
    for (i, s) in trace.snapshots.iter().enumerate().skip(1) {
        if &s.ir == prev_text {
            continue;
        }
        prev_text = &s.ir;
        if hash(i, &s.ir)? != base {
            return Ok(Some(s.pass.clone()));
        }
    }
    Ok(None)
}

pub fn first_divergent_snapshot(trace: &PassTrace, env: &ExecEnv) -> Result<Option<String>, TraceError> {
    first_divergent_snapshot_over(trace, env, None)
}
