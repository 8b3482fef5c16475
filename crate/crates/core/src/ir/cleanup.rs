//! Small CFG repairs shared by lowering and the optimizer.

use std::collections::HashSet;

use super::analysis::Cfg;
use super::types::*;

/// Drops blocks not reachable from the entry and removes phi incomings
/// from dropped predecessors. Returns whether anything changed.
pub fn remove_unreachable(f: &mut Function) -> bool {
    let cfg = Cfg::new(f);
    let before = f.blocks.len();
    f.blocks.retain(|b| cfg.is_reachable(b.id));
    if f.blocks.len() == before {
        return false;
    }
    prune_phis(f);
    true
}

/// Makes every phi's incoming list match the block's current predecessors:
/// entries from non-predecessors are dropped. Missing incomings become undef.
pub fn prune_phis(f: &mut Function) {
    let preds = f.predecessors();
    for b in &mut f.blocks {
        let ps = preds.get(&b.id).cloned().unwrap_or_default();
        let pset: HashSet<BlockId> = ps.iter().copied().collect();
        for i in b.insts.iter_mut().filter(|i| i.is_phi()) {
            let Op::Phi(inc) = &i.op else { unreachable!() };
            let ty = i.ty.expect("phi has a type");
            let mut blocks = Vec::with_capacity(ps.len());
            let mut args = Vec::with_capacity(ps.len());
            for (from, a) in inc.iter().zip(&i.args) {
                if pset.contains(from) && !blocks.contains(from) {
                    blocks.push(*from);
                    args.push(a.clone());
                }
            }
            for p in &ps {
                if !blocks.contains(p) {
                    blocks.push(*p);
                    args.push(Operand::Undef(ty));
                }
            }
            i.op = Op::Phi(blocks);
            i.args = args;
        }
    }
}

/// Folds a block into its predecessor when the predecessor ends in an
/// unconditional branch to it and it has no other predecessor. Returns
/// whether anything changed.
pub fn merge_straight_line(f: &mut Function) -> bool {
    let mut changed = false;
    loop {
        let preds = f.predecessors();
        let entry = match f.blocks.first() {
            Some(b) => b.id,
            None => return changed,
        };
        let pair = f.blocks.iter().find_map(|p| match p.term {
            Some(Terminator::Br(s)) if s != entry && s != p.id && preds.get(&s).map(Vec::len) == Some(1) => Some((p.id, s)),
            _ => None,
        });
        let Some((p, s)) = pair else { return changed };
        changed = true;
        let si = f.block_index(s).unwrap();
        let mut succ = f.blocks.remove(si);
        // Single-predecessor phis are copies.
        let phis: Vec<Inst> = succ.insts.iter().filter(|i| i.is_phi()).cloned().collect();
        succ.insts.retain(|i| !i.is_phi());
        let pi = f.block_index(p).unwrap();
        f.blocks[pi].insts.append(&mut succ.insts);
        f.blocks[pi].term = succ.term.take();
        for phi in phis {
            let with = phi.args.first().cloned().unwrap_or(Operand::Undef(phi.ty.unwrap()));
            f.replace_uses(phi.id, &with);
        }
        for b in &mut f.blocks {
            for i in b.insts.iter_mut() {
                if let Op::Phi(inc) = &mut i.op {
                    for x in inc.iter_mut() {
                        if *x == s {
                            *x = p;
                        }
                    }
                }
            }
        }
    }
}
