//! Semantics-preserving shader variants: expression wrapping, control-flow
//! rewrites, and code donation, chained under a seeded generator and
//! recorded as replayable recipes.

mod donate;
mod transforms;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::{fnv1a64, ExecEnv, ExecStatus};
use crate::lang::{
    check_text, interp::interpret, pretty_print, typecheck, FrontendError, NodeId, ShaderAst, SourceShader, Stmt, StmtKind, TypeError,
    TypedAst,
};
use crate::rng::{derive, SplitMix64};

pub use donate::Donor;
pub use transforms::{counted, Counted};

/// Largest trip count the source-level unroller will peel.
pub const UNROLL_MAX_TRIP: u32 = 8;
const SPLIT_MAX_TRIP: u32 = 4096;
pub const MAX_DEPTH: u32 = 32;
pub const MAX_ATTEMPTS: u32 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransformKind {
    MixWrap,
    IfToSwitch,
    ForToWhile,
    WhileToFor,
    SingleIterationLoopWrap,
    LoopUnroll,
    LoopSplit,
    CodeDonation,
}

impl TransformKind {
    pub const ALL: [TransformKind; 8] = [
        TransformKind::MixWrap,
        TransformKind::IfToSwitch,
        TransformKind::ForToWhile,
        TransformKind::WhileToFor,
        TransformKind::SingleIterationLoopWrap,
        TransformKind::LoopUnroll,
        TransformKind::LoopSplit,
        TransformKind::CodeDonation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TransformKind::MixWrap => "MixWrap",
            TransformKind::IfToSwitch => "IfToSwitch",
            TransformKind::ForToWhile => "ForToWhile",
            TransformKind::WhileToFor => "WhileToFor",
            TransformKind::SingleIterationLoopWrap => "SingleIterationLoopWrap",
            TransformKind::LoopUnroll => "LoopUnroll",
            TransformKind::LoopSplit => "LoopSplit",
            TransformKind::CodeDonation => "CodeDonation",
        }
    }
}

impl fmt::Display for TransformKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TransformKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        TransformKind::ALL.into_iter().find(|k| k.name() == s).ok_or_else(|| format!("unknown transform `{s}`"))
    }
}

/// One rewrite: what, where, and the seed for its own choices (the `mix`
/// filler, peel count, split point, region and insertion point).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub kind: TransformKind,
    pub site: NodeId,
    pub param: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub donor: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariantRecipe {
    pub seed: u64,
    /// Which regeneration attempt produced the chain.
    pub attempt: u32,
    pub chain: Vec<Step>,
    pub donor_names: Vec<String>,
    /// Content hashes (hex) of the reference and of each donor used.
    pub reference_hash: String,
    pub donor_hashes: BTreeMap<String, String>,
}

impl VariantRecipe {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("recipe serializes")
    }

    pub fn from_json(s: &str) -> Result<VariantRecipe, serde_json::Error> {
        serde_json::from_str(s)
    }

    /// The same recipe restricted to the chain entries in `keep`.
    pub fn with_chain(&self, chain: Vec<Step>) -> VariantRecipe {
        let mut r = self.clone();
        r.chain = chain;
        r
    }
}

#[derive(Clone, Debug)]
pub struct VariantShader {
    pub ast: ShaderAst,
    pub text: String,
    pub recipe: VariantRecipe,
    pub reference_name: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum TransformError {
    #[error("transform not applicable: {0}")]
    NotApplicable(String),
    #[error("no donatable region")]
    NoDonatableRegion,
    #[error("unknown donor `{0}`")]
    UnknownDonor(String),
}

#[derive(Debug, Error)]
pub enum MetamorphError {
    #[error("depth must be in 1..={MAX_DEPTH}, got {0}")]
    InvalidDepth(u32),
    #[error("generation exhausted after {0} rejected attempts")]
    GenerationExhausted(u32),
    #[error("recipe mismatch: {0}")]
    RecipeMismatch(String),
    #[error("step {index} ({kind}) failed: {source}")]
    Step { index: usize, kind: TransformKind, source: TransformError },
    #[error("variant does not type check: {0}")]
    Type(#[from] TypeError),
    #[error("variant does not reparse: {0}")]
    Reparse(#[from] FrontendError),
}

pub fn content_hash(ast: &ShaderAst) -> u64 {
    fnv1a64(pretty_print(ast).into_bytes())
}

fn hex(h: u64) -> String {
    format!("{h:016x}")
}

/// Type checks every shader in a corpus for use as donors.
pub fn donors_from(corpus: &[SourceShader]) -> Result<Vec<Donor>, FrontendError> {
    let mut out: Vec<Donor> = corpus
        .iter()
        .map(|s| {
            let typed = check_text(&s.text)?;
            Ok(Donor { name: s.name.clone(), hash: content_hash(&typed.ast), typed })
        })
        .collect::<Result<_, FrontendError>>()?;
    out.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(out)
}

/// Expression-level rewrite: `e` becomes `mix(e, u, 1.0)`.
pub fn mutate_statement(typed: &TypedAst, site: NodeId, rng: &mut SplitMix64) -> Result<ShaderAst, TransformError> {
    transforms::mix_wrap(typed, site, rng)
}

pub fn mutate_control_flow(ast: &ShaderAst, site: NodeId, kind: TransformKind, rng: &mut SplitMix64) -> Result<ShaderAst, TransformError> {
    match kind {
        TransformKind::IfToSwitch => transforms::if_to_switch(ast, site),
        TransformKind::ForToWhile => transforms::for_to_while(ast, site),
        TransformKind::WhileToFor => transforms::while_to_for(ast, site),
        TransformKind::SingleIterationLoopWrap => transforms::single_iteration_wrap(ast, site),
        TransformKind::LoopUnroll => transforms::loop_unroll(ast, site, rng),
        TransformKind::LoopSplit => transforms::loop_split(ast, site, rng),
        k => Err(TransformError::NotApplicable(format!("{k} is not a control-flow rewrite"))),
    }
}

/// Donates into a random block of `main`.
pub fn donate_code(target: &ShaderAst, donor: &Donor, rng: &mut SplitMix64) -> Result<ShaderAst, TransformError> {
    let mut blocks = Vec::new();
    tree::block_ids(&target.main().ok_or(TransformError::NoDonatableRegion)?.body, &mut blocks);
    let site = blocks[rng.index(blocks.len())];
    donate::donate(target, site, donor, rng)
}

fn all_stmts(ast: &ShaderAst) -> Vec<&Stmt> {
    let mut out = Vec::new();
    for f in &ast.functions {
        tree::positioned(&f.body, &mut out);
    }
    out
}

/// Every `(kind, site)` pair where a rewrite applies.
pub fn applicable_sites(typed: &TypedAst, donors_available: bool) -> Vec<(TransformKind, NodeId)> {
    let ast = &typed.ast;
    let mut out = Vec::new();
    let mut exprs = Vec::new();
    for f in &ast.functions {
        f.body.visit(&mut |_| {}, &mut |e| {
            if typed.types.get(&e.id).is_some_and(|t| t.is_float_like()) {
                exprs.push(e.id);
            }
        });
    }
    out.extend(exprs.into_iter().map(|e| (TransformKind::MixWrap, e)));
    for s in all_stmts(ast) {
        let kinds: &[TransformKind] = match &s.kind {
            StmtKind::If { then_branch, else_branch, .. }
                if !then_branch.has_free_jump(false) && !else_branch.as_ref().is_some_and(|e| e.has_free_jump(false)) =>
            {
                &[TransformKind::IfToSwitch]
            }
            StmtKind::While { .. } => &[TransformKind::WhileToFor],
            _ => &[],
        };
        out.extend(kinds.iter().map(|k| (*k, s.id)));
        if let StmtKind::For { init: Some(init), cond: Some(_), body, .. } = &s.kind {
            if matches!(init.kind, StmtKind::Decl { .. }) && !tree::has_own_continue(body) {
                out.push((TransformKind::ForToWhile, s.id));
            }
        }
        if transforms::wrappable(s) {
            out.push((TransformKind::SingleIterationLoopWrap, s.id));
        }
        if counted(s, UNROLL_MAX_TRIP).is_some() {
            out.push((TransformKind::LoopUnroll, s.id));
        }
        if counted(s, SPLIT_MAX_TRIP).is_some_and(|c| transforms::splittable(&c)) {
            out.push((TransformKind::LoopSplit, s.id));
        }
    }
    if donors_available {
        if let Some(main) = ast.main() {
            let mut blocks = Vec::new();
            tree::block_ids(&main.body, &mut blocks);
            out.extend(blocks.into_iter().map(|b| (TransformKind::CodeDonation, b)));
        }
    }
    out
}

pub fn apply_step(typed: &TypedAst, step: &Step, donors: &[Donor]) -> Result<ShaderAst, TransformError> {
    let mut rng = SplitMix64::new(step.param);
    match step.kind {
        TransformKind::MixWrap => mutate_statement(typed, step.site, &mut rng),
        TransformKind::CodeDonation => {
            let name = step.donor.as_deref().unwrap_or_default();
            let donor = donors.iter().find(|d| d.name == name).ok_or_else(|| TransformError::UnknownDonor(name.to_string()))?;
            donate::donate(&typed.ast, step.site, donor, &mut rng)
        }
        k => mutate_control_flow(&typed.ast, step.site, k, &mut rng),
    }
}

/// Closure and budget checks on a finished chain.
fn finish(ast: ShaderAst) -> Result<(ShaderAst, String, bool), MetamorphError> {
    let typed = typecheck(&ast)?;
    let text = pretty_print(&ast);
    check_text(&text)?;
    let within_budget = interpret(&typed, &ExecEnv::with_seed(0)).status != ExecStatus::StepBudgetExceeded;
    Ok((ast, text, within_budget))
}

/// Chains `depth` randomly chosen rewrites, uniform over applicable
/// `(kind, site)` pairs. Variants that blow the interpreter step budget are
/// regenerated from a derived seed, at most [`MAX_ATTEMPTS`] times.
pub fn generate_variant(
    reference: &TypedAst,
    reference_name: &str,
    donors: &[Donor],
    seed: u64,
    depth: u32,
) -> Result<VariantShader, MetamorphError> {
    if !(1..=MAX_DEPTH).contains(&depth) {
        return Err(MetamorphError::InvalidDepth(depth));
    }
    let eligible: Vec<&Donor> = donors.iter().filter(|d| donate::has_region(d)).collect();
    for attempt in 0..MAX_ATTEMPTS {
        let mut rng = SplitMix64::new(derive(seed, &[attempt as u64]));
        let mut typed = reference.clone();
        let mut chain = Vec::new();
        let mut used = BTreeMap::new();
        let mut tries = 0;
        while (chain.len() as u32) < depth && tries < depth * 4 {
            tries += 1;
            let sites = applicable_sites(&typed, !eligible.is_empty());
            if sites.is_empty() {
                break;
            }
            let (kind, site) = sites[rng.index(sites.len())];
            let mut step = Step { kind, site, param: rng.next_u64(), donor: None };
            if kind == TransformKind::CodeDonation {
                step.donor = Some(eligible[rng.index(eligible.len())].name.clone());
            }
            let Ok(ast) = apply_step(&typed, &step, donors) else { continue };
            if let Some(d) = donors.iter().find(|d| step.donor.as_ref() == Some(&d.name)) {
                used.insert(d.name.clone(), hex(d.hash));
            }
            typed = typecheck(&ast)?;
            chain.push(step);
        }
        if chain.is_empty() {
            continue;
        }
        let (ast, text, within_budget) = finish(typed.ast)?;
        if !within_budget {
            continue;
        }
        let recipe = VariantRecipe {
            seed,
            attempt,
            chain,
            donor_names: used.keys().cloned().collect(),
            reference_hash: hex(content_hash(&reference.ast)),
            donor_hashes: used,
        };
        return Ok(VariantShader { ast, text, recipe, reference_name: reference_name.to_string() });
    }
    Err(MetamorphError::GenerationExhausted(MAX_ATTEMPTS))
}

/// Rebuilds a variant from its recipe. Every donor the recipe names must be
/// present with the recorded content.
pub fn replay_recipe(
    reference: &TypedAst,
    reference_name: &str,
    donors: &[Donor],
    recipe: &VariantRecipe,
) -> Result<VariantShader, MetamorphError> {
    if hex(content_hash(&reference.ast)) != recipe.reference_hash {
        return Err(MetamorphError::RecipeMismatch(format!("reference `{reference_name}` changed")));
    }
    let mut pinned = Vec::new();
    for (name, h) in &recipe.donor_hashes {
        match donors.iter().find(|d| &d.name == name) {
            Some(d) if &hex(d.hash) == h => pinned.push(d.clone()),
            Some(_) => return Err(MetamorphError::RecipeMismatch(format!("donor `{name}` changed"))),
            None => return Err(MetamorphError::RecipeMismatch(format!("donor `{name}` missing"))),
        }
    }
    let mut typed = reference.clone();
    for (index, step) in recipe.chain.iter().enumerate() {
        let ast = apply_step(&typed, step, &pinned).map_err(|source| MetamorphError::Step { index, kind: step.kind, source })?;
        typed = typecheck(&ast)?;
    }
    let text = pretty_print(&typed.ast);
    Ok(VariantShader { ast: typed.ast, text, recipe: recipe.clone(), reference_name: reference_name.to_string() })
}
