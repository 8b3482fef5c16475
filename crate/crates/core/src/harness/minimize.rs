//! Greedy one-step-at-a-time reduction of a transform chain.

use super::classify::{evaluate, AnomalyKind, Backend, ReferenceRun};
use super::HarnessError;
use crate::lang::typecheck;
use crate::metamorph::{replay_recipe, Donor, VariantRecipe};

fn reproduces(
    backend: &Backend,
    reference: &ReferenceRun,
    donors: &[Donor],
    recipe: &VariantRecipe,
    kind: AnomalyKind,
    seeds: &[u64],
) -> bool {
    let Ok(v) = replay_recipe(&reference.typed, &reference.name, donors, recipe) else { return false };
    let Ok(typed) = typecheck(&v.ast) else { return false };
    matches!(evaluate(backend, reference, &typed, seeds, false), Ok(Some(verdict)) if verdict.kind == kind)
}

/// Restricts a recipe to `chain`, dropping hashes of donors no step uses.
fn restrict(recipe: &VariantRecipe, chain: Vec<crate::metamorph::Step>) -> VariantRecipe {
    let mut r = recipe.with_chain(chain);
    let used: Vec<String> = r.chain.iter().filter_map(|s| s.donor.clone()).collect();
    r.donor_hashes.retain(|k, _| used.contains(k));
    r.donor_names.retain(|k| used.contains(k));
    r
}

/// Returns the first step that reproduces the anomaly on its own, if any.
/// Otherwise drops steps while the same kind of anomaly persists, until no
/// single removal keeps it. Steps whose sites vanish with an earlier step simply
/// fail to replay, so such candidates are skipped.
pub fn minimize(
    backend: &Backend,
    reference: &ReferenceRun,
    donors: &[Donor],
    recipe: &VariantRecipe,
    kind: AnomalyKind,
    seeds: &[u64],
) -> Result<VariantRecipe, HarnessError> {
    if !reproduces(backend, reference, donors, recipe, kind, seeds) {
        return Err(HarnessError::NonReproducible(reference.name.clone()));
    }
    if recipe.chain.len() > 1 {
        for step in &recipe.chain {
            let cand = restrict(recipe, vec![step.clone()]);
            if reproduces(backend, reference, donors, &cand, kind, seeds) {
                return Ok(cand);
            }
        }
    }
    let mut cur = restrict(recipe, recipe.chain.clone());
    'shrink: loop {
        for i in 0..cur.chain.len() {
            if cur.chain.len() == 1 {
                break 'shrink;
            }
            let mut chain = cur.chain.clone();
            chain.remove(i);
            let cand = restrict(&cur, chain);
            if reproduces(backend, reference, donors, &cand, kind, seeds) {
                cur = cand;
                continue 'shrink;
            }
        }
        break;
    }
    Ok(cur)
}
