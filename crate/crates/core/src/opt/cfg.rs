//! Control-flow cleanup: constant branches, unreachable blocks, trivial
//! phis, straight-line merging, and empty forwarding blocks.

use std::collections::HashMap;

use super::util::{entry_mut, replace_all};
use crate::ir::cleanup::{merge_straight_line, prune_phis, remove_unreachable};
use crate::ir::{Function, IrModule, Op, Operand, Terminator, ValueId};

pub fn cfg_simplify(m: &mut IrModule) -> bool {
    let Some(f) = entry_mut(m) else { return false };
    let mut changed = false;
    loop {
        let mut round = fold_branches(f);
        round |= remove_unreachable(f);
        round |= simplify_phis(f);
        round |= merge_straight_line(f);
        round |= skip_forwarders(f);
        if !round {
            return changed;
        }
        changed = true;
    }
}

fn fold_branches(f: &mut Function) -> bool {
    let mut changed = false;
    for b in &mut f.blocks {
        let new = match &b.term {
            Some(Terminator::CondBr(Operand::Const(c), t, e)) => Some(Terminator::Br(if c.lanes[0] & 1 == 1 { *t } else { *e })),
            Some(Terminator::CondBr(c, t, e)) if t == e && !matches!(c, Operand::Undef(_)) => Some(Terminator::Br(*t)),
            Some(Terminator::Switch(Operand::Const(c), d, cases)) => {
                let k = c.lanes[0] as i32;
                Some(Terminator::Br(cases.iter().find(|(l, _)| *l == k).map(|(_, t)| *t).unwrap_or(*d)))
            }
            Some(Terminator::Switch(c, d, cases)) if cases.iter().all(|(_, t)| t == d) && !matches!(c, Operand::Undef(_)) => {
                Some(Terminator::Br(*d))
            }
            _ => None,
        };
        if let Some(t) = new {
            b.term = Some(t);
            changed = true;
        }
    }
    if changed {
        prune_phis(f);
    }
    changed
}

/// Phis whose incomings (ignoring self references) are all the same operand.
fn simplify_phis(f: &mut Function) -> bool {
    let mut map: HashMap<ValueId, Operand> = HashMap::new();
    for i in f.insts().filter(|i| i.is_phi()) {
        let mut same: Option<&Operand> = None;
        let mut trivial = true;
        for a in &i.args {
            if *a == Operand::Value(i.id) || Some(a) == same {
                continue;
            }
            if same.is_some() {
                trivial = false;
                break;
            }
            same = Some(a);
        }
        if trivial {
            if let Some(s) = same {
                map.insert(i.id, s.clone());
            }
        }
    }
    replace_all(f, &map)
}

/// Redirects predecessors of an empty block that only branches onward.
fn skip_forwarders(f: &mut Function) -> bool {
    let entry = match f.blocks.first() {
        Some(b) => b.id,
        None => return false,
    };
    let preds = f.predecessors();
    for b in &f.blocks {
        let Some(Terminator::Br(s)) = b.term else { continue };
        if b.id == entry || s == b.id || !b.insts.is_empty() {
            continue;
        }
        let ps = &preds[&b.id];
        let target = f.block(s).unwrap();
        let has_phis = target.insts.first().is_some_and(|i| i.is_phi());
        // With phis in the target, only a lone predecessor that is not
        // already an incoming edge can take over this block's edge.
        if has_phis && (ps.len() != 1 || preds[&s].contains(&ps[0])) {
            continue;
        }
        let (from, ps) = (b.id, ps.clone());
        for p in &ps {
            let pi = f.block_index(*p).unwrap();
            f.blocks[pi].term.as_mut().unwrap().retarget(from, s);
        }
        if has_phis {
            let si = f.block_index(s).unwrap();
            for i in &mut f.blocks[si].insts {
                if let Op::Phi(inc) = &mut i.op {
                    for x in inc.iter_mut() {
                        if *x == from {
                            *x = ps[0];
                        }
                    }
                }
            }
        }
        remove_unreachable(f);
        return true;
    }
    false
}
