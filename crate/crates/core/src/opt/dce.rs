//! Dead code elimination by liveness marking from side effects and
//! terminator operands; dead phi cycles go too.

use std::collections::{BTreeSet, HashMap, HashSet};

use super::util::entry_mut;
use super::{active, BugId};
use crate::ir::{BlockId, CastOp, Function, Inst, IrModule, Op, Operand, Terminator, ValueId};

pub fn dce(m: &mut IrModule, bugs: &BTreeSet<BugId>) -> bool {
    let Some(f) = entry_mut(m) else { return false };
    let mut changed = false;
    if active(bugs, BugId::DceDropsLiveStore) {
        changed |= drop_case_values(f);
    }
    let defs: HashMap<ValueId, &Inst> = f.insts().map(|i| (i.id, i)).collect();
    let mut live: HashSet<ValueId> = HashSet::new();
    let mut work: Vec<ValueId> = Vec::new();
    for b in &f.blocks {
        for i in b.insts.iter().filter(|i| i.has_side_effect()) {
            work.push(i.id);
        }
        if let Some(Operand::Value(v)) = b.term.as_ref().and_then(Terminator::operand) {
            work.push(*v);
        }
    }
    while let Some(v) = work.pop() {
        if live.insert(v) {
            if let Some(i) = defs.get(&v) {
                work.extend(i.value_operands());
            }
        }
    }
    for b in &mut f.blocks {
        let before = b.insts.len();
        b.insts.retain(|i| live.contains(&i.id));
        changed |= b.insts.len() != before;
    }
    changed
}

/// The injected fault: values defined in a switch target block and used
/// only by phis are treated as dead and replaced by `undef`.
fn drop_case_values(f: &mut Function) -> bool {
    let widened: HashSet<ValueId> = f.insts().filter(|i| i.op == Op::Cast(CastOp::ZExt)).map(|i| i.id).collect();
    // Only switches over a widened bool count.
    let targets: HashSet<BlockId> = f
        .blocks
        .iter()
        .filter_map(|b| match &b.term {
            Some(Terminator::Switch(Operand::Value(v), ..)) if widened.contains(v) => Some(b.successors()),
            _ => None,
        })
        .flatten()
        .collect();
    let mut phi_only: HashMap<ValueId, bool> = HashMap::new();
    for b in &f.blocks {
        for i in &b.insts {
            for v in i.value_operands() {
                let e = phi_only.entry(v).or_insert(true);
                *e &= i.is_phi();
            }
        }
        if let Some(Operand::Value(v)) = b.term.as_ref().and_then(Terminator::operand) {
            phi_only.insert(*v, false);
        }
    }
    let mut doomed = HashMap::new();
    for b in f.blocks.iter().filter(|b| targets.contains(&b.id)) {
        for i in &b.insts {
            if !i.is_phi() && !i.has_side_effect() && phi_only.get(&i.id) == Some(&true) {
                if let Some(ty) = i.ty {
                    doomed.insert(i.id, Operand::Undef(ty));
                }
            }
        }
    }
    super::util::replace_all(f, &doomed)
}
