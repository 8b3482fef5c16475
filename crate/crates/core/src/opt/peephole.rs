//! Local rewrites of short instruction pairs.

use std::collections::{BTreeSet, HashMap};

use super::util::{entry_mut, replace_all, splat_of};
use super::{active, BugId, Fault};
use crate::ir::{BinOp, CastOp, Const, Inst, IrModule, Op, Operand, Pred, Terminator, ValueId};

pub fn peephole(m: &mut IrModule, bugs: &BTreeSet<BugId>) -> Result<bool, Fault> {
    let Some(f) = entry_mut(m) else { return Ok(false) };
    if active(bugs, BugId::PeepholeNullDeref) {
        let defs: HashMap<ValueId, &Inst> = f.insts().map(|i| (i.id, i)).collect();
        for b in &f.blocks {
            if let Some(Terminator::Switch(Operand::Value(v), ..)) = &b.term {
                if defs.get(v).is_some_and(|i| i.op == Op::Cast(CastOp::ZExt)) {
                    return Err(Fault(format!("null dereference visiting zext {v} feeding switch in {}", b.id)));
                }
            }
        }
    }
    let mut changed = false;
    loop {
        let defs: HashMap<ValueId, Inst> = f.insts().map(|i| (i.id, i.clone())).collect();
        let def = |o: &Operand| o.value().and_then(|v| defs.get(&v));
        let mut map = HashMap::new();
        let mut rewritten: Vec<Inst> = Vec::new();
        for i in f.insts() {
            let a = i.args.first();
            match &i.op {
                // -(-x) == x
                Op::FNeg => {
                    if let Some(inner) = a.and_then(def).filter(|d| d.op == Op::FNeg) {
                        map.insert(i.id, inner.args[0].clone());
                    }
                }
                // !!x == x
                Op::Bin(BinOp::Xor) if splat_of(&i.args[1], 1) => {
                    if let Some(inner) = def(&i.args[0]).filter(|d| d.op == Op::Bin(BinOp::Xor) && splat_of(&d.args[1], 1)) {
                        map.insert(i.id, inner.args[0].clone());
                    }
                }
                // (zext b) != 0 is b
                Op::ICmp(Pred::Ne) if splat_of(&i.args[1], 0) => {
                    if let Some(inner) = def(&i.args[0]).filter(|d| d.op == Op::Cast(CastOp::ZExt)) {
                        map.insert(i.id, inner.args[0].clone());
                    }
                }
                Op::Shuffle(mask) => {
                    let src_ty = match &i.args[0] {
                        Operand::Value(v) => defs.get(v).and_then(|d| d.ty),
                        Operand::Const(c) => Some(c.ty),
                        Operand::Undef(t) => Some(*t),
                        Operand::Slot(_) => None,
                    };
                    let identity =
                        src_ty.is_some_and(|t| t.lanes as usize == mask.len()) && mask.iter().enumerate().all(|(k, l)| *l as usize == k);
                    if identity {
                        map.insert(i.id, i.args[0].clone());
                    } else if let Some(inner) = def(&i.args[0]).filter(|d| matches!(d.op, Op::Shuffle(_))) {
                        let Op::Shuffle(inner_mask) = &inner.op else { unreachable!() };
                        let composed = mask.iter().map(|l| inner_mask[*l as usize]).collect();
                        rewritten.push(Inst { op: Op::Shuffle(composed), args: vec![inner.args[0].clone()], ..i.clone() });
                    }
                }
                // extract(insert(v, x, k), k) == x
                Op::Extract => {
                    if let (Some(inner), Operand::Const(k)) = (def(&i.args[0]), &i.args[1]) {
                        if inner.op == Op::Insert && inner.args[2] == Operand::Const(k.clone()) {
                            map.insert(i.id, inner.args[1].clone());
                        } else if let Op::Shuffle(mask) = &inner.op {
                            let lane = mask[k.lanes[0] as usize];
                            let scalar_src = match &inner.args[0] {
                                Operand::Value(v) => defs.get(v).and_then(|d| d.ty).is_some_and(|t| t.lanes == 1),
                                Operand::Const(c) => c.ty.lanes == 1,
                                Operand::Undef(t) => t.lanes == 1,
                                Operand::Slot(_) => false,
                            };
                            if scalar_src {
                                map.insert(i.id, inner.args[0].clone());
                                continue;
                            }
                            rewritten
                                .push(Inst { args: vec![inner.args[0].clone(), Operand::Const(Const::i32(lane as i32))], ..i.clone() });
                        }
                    }
                }
                _ => {}
            }
        }
        let any_rewrite = !rewritten.is_empty();
        if any_rewrite {
            let by_id: HashMap<ValueId, Inst> = rewritten.into_iter().map(|i| (i.id, i)).collect();
            for b in &mut f.blocks {
                for i in &mut b.insts {
                    if let Some(r) = by_id.get(&i.id) {
                        *i = r.clone();
                    }
                }
            }
        }
        if !replace_all(f, &map) && !any_rewrite {
            return Ok(changed);
        }
        changed = true;
    }
}
