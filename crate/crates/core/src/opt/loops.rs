//! Full unrolling of short counted loops and splitting of longer ones.
//!
//! Both work on a canonical shape: a natural loop with one latch, a header
//! with exactly one outside predecessor, and a single exit edge leaving the
//! header's conditional branch. The branch tests `icmp pred %iv, C` where
//! `%iv` is a header phi that starts at a constant and is advanced by
//! `add %iv, step` along the back edge.

use std::collections::{BTreeSet, HashMap};

use super::util::entry_mut;
use super::{active, BugId};
use crate::exec::eval::{eval_bin, eval_icmp};
use crate::ir::analysis::Cfg;
use crate::ir::{BinOp, Block, BlockId, Const, Elem, Function, Inst, IrModule, Op, Operand, Pred, Terminator, ValueId};

/// Largest trip count that is fully unrolled.
pub const UNROLL_LIMIT: u32 = 8;
/// Longest loop LoopSplit will touch.
const SPLIT_LIMIT: u32 = 64;
/// Cap on instructions produced by one unroll.
const UNROLL_BUDGET: usize = 2048;
/// Unrolling stops once the function reaches this many instructions.
const FUNCTION_BUDGET: usize = 8192;
const TRIP_CAP: u32 = 4096;

#[derive(Clone, Debug)]
struct Canonical {
    header: BlockId,
    latch: BlockId,
    pre: BlockId,
    exit: BlockId,
    /// Successor of the header that stays in the loop.
    inside: BlockId,
    body: BTreeSet<BlockId>,
    iv: ValueId,
    cmp: ValueId,
    pred: Pred,
    step: i32,
    enter_on_true: bool,
    trip: u32,
}

fn find_inst(f: &Function, v: ValueId) -> Option<(BlockId, &Inst)> {
    f.blocks.iter().find_map(|b| b.insts.iter().find(|i| i.id == v).map(|i| (b.id, i)))
}

fn const_i32(o: &Operand) -> Option<i32> {
    match o {
        Operand::Const(c) if c.ty.elem == Elem::I32 && c.ty.lanes == 1 => Some(c.lanes[0] as i32),
        _ => None,
    }
}

fn canonical_loops(f: &Function) -> Vec<Canonical> {
    let cfg = Cfg::new(f);
    let mut out: Vec<Canonical> =
        cfg.natural_loops().into_iter().filter_map(|l| canonical(f, &cfg, l.header, &l.latches, l.body)).collect();
    out.sort_by_key(|c| c.body.len());
    out
}

fn canonical(f: &Function, cfg: &Cfg, header: BlockId, latches: &[BlockId], body: BTreeSet<BlockId>) -> Option<Canonical> {
    let [latch] = latches else { return None };
    let preds = &cfg.preds[&header];
    if preds.len() != 2 {
        return None;
    }
    let pre = *preds.iter().find(|p| !body.contains(p))?;
    let hb = f.block(header)?;
    let Some(Terminator::CondBr(Operand::Value(cmp), t, e)) = &hb.term else { return None };
    let (inside, exit, enter_on_true) = match (body.contains(t), body.contains(e)) {
        (true, false) => (*t, *e, true),
        (false, true) => (*e, *t, false),
        _ => return None,
    };
    // No other edge may leave the loop.
    for b in &body {
        if *b != header && cfg.succs[b].iter().any(|s| !body.contains(s)) {
            return None;
        }
    }
    let ci = hb.insts.iter().find(|i| i.id == *cmp)?;
    let Op::ICmp(pred) = ci.op else { return None };
    let (Operand::Value(iv), bound) = (&ci.args[0], const_i32(&ci.args[1])?) else { return None };
    let phi = hb.insts.iter().find(|i| i.id == *iv)?;
    let Op::Phi(inc) = &phi.op else { return None };
    let from = |b: BlockId| inc.iter().position(|x| *x == b).map(|k| &phi.args[k]);
    let init = const_i32(from(pre)?)?;
    let Operand::Value(next) = from(*latch)? else { return None };
    let (nb, ni) = find_inst(f, *next)?;
    if !body.contains(&nb) || ni.op != Op::Bin(BinOp::Add) {
        return None;
    }
    let step = match (&ni.args[0], &ni.args[1]) {
        (Operand::Value(v), s) if v == iv => const_i32(s)?,
        (s, Operand::Value(v)) if v == iv => const_i32(s)?,
        _ => return None,
    };
    let trip = trip_count(pred, init, bound, step, enter_on_true)?;
    Some(Canonical { header, latch: *latch, pre, exit, inside, body, iv: *iv, cmp: *cmp, pred, step, enter_on_true, trip })
}

fn trip_count(pred: Pred, init: i32, bound: i32, step: i32, enter_on_true: bool) -> Option<u32> {
    let mut v = init as u32;
    for n in 0..=TRIP_CAP {
        let c = eval_icmp(pred, &[v], &[bound as u32])[0] == 1;
        if c != enter_on_true {
            return Some(n);
        }
        v = eval_bin(BinOp::Add, &[v], &[step as u32]).ok()?[0];
    }
    None
}

fn remap(map: &HashMap<ValueId, Operand>, o: &Operand) -> Operand {
    match o {
        Operand::Value(v) => map.get(v).cloned().unwrap_or_else(|| o.clone()),
        _ => o.clone(),
    }
}

fn phi_incoming(i: &Inst, b: BlockId) -> Option<&Operand> {
    let Op::Phi(inc) = &i.op else { return None };
    inc.iter().position(|x| *x == b).map(|k| &i.args[k])
}

fn map_targets(t: &mut Terminator, rb: &dyn Fn(BlockId) -> BlockId) {
    let fix = |b: &mut BlockId| *b = rb(*b);
    match t {
        Terminator::Br(b) => fix(b),
        Terminator::CondBr(_, x, y) => {
            fix(x);
            fix(y);
        }
        Terminator::Switch(_, d, cases) => {
            fix(d);
            cases.iter_mut().for_each(|c| fix(&mut c.1));
        }
        Terminator::Ret => {}
    }
}

/// Copies a block under a fresh id. `map` must already hold the fresh value
/// ids; `targets` renames successors and `incoming` renames phi edges.
fn clone_block(
    src: &Block,
    id: BlockId,
    map: &HashMap<ValueId, Operand>,
    targets: &dyn Fn(BlockId) -> BlockId,
    incoming: &dyn Fn(BlockId) -> BlockId,
) -> Block {
    let mut nb = Block::new(id);
    for i in &src.insts {
        let Some(Operand::Value(nid)) = map.get(&i.id) else { continue };
        let op = match &i.op {
            Op::Phi(inc) => Op::Phi(inc.iter().map(|b| incoming(*b)).collect()),
            o => o.clone(),
        };
        nb.insts.push(Inst { id: *nid, ty: i.ty, op, args: i.args.iter().map(|a| remap(map, a)).collect() });
    }
    nb.term = src.term.clone().map(|mut t| {
        map_targets(&mut t, targets);
        if let Some(o) = t.operand_mut() {
            *o = remap(map, o);
        }
        t
    });
    nb
}

/// Rewrites operands of blocks outside the loop and renames phi incoming
/// edges from the old header to `new_header`.
fn fix_outside(f: &mut Function, skip: &BTreeSet<BlockId>, old_header: BlockId, new_header: BlockId, map: &HashMap<ValueId, Operand>) {
    for b in f.blocks.iter_mut().filter(|b| !skip.contains(&b.id)) {
        for i in &mut b.insts {
            for a in &mut i.args {
                *a = remap(map, a);
            }
            if let Op::Phi(inc) = &mut i.op {
                for x in inc.iter_mut() {
                    if *x == old_header {
                        *x = new_header;
                    }
                }
            }
        }
        if let Some(o) = b.term.as_mut().and_then(Terminator::operand_mut) {
            *o = remap(map, o);
        }
    }
}

fn full_unroll(f: &mut Function, c: &Canonical) {
    let n = c.trip as usize;
    let h = c.header;
    let mut next_v = f.next_value_id();
    let mut next_b = f.next_block_id();
    let order: Vec<BlockId> = f.blocks.iter().map(|b| b.id).filter(|b| c.body.contains(b) && *b != h).collect();
    let hdr: Vec<BlockId> = (0..=n).map(|k| BlockId(next_b + k as u32)).collect();
    next_b += n as u32 + 1;
    let mut copies: Vec<HashMap<BlockId, BlockId>> = Vec::new();
    for _ in 0..n {
        copies.push(
            order
                .iter()
                .map(|b| {
                    (
                        *b,
                        BlockId({
                            next_b += 1;
                            next_b - 1
                        }),
                    )
                })
                .collect(),
        );
    }
    let hb = f.block(h).unwrap().clone();
    let mut maps: Vec<HashMap<ValueId, Operand>> = Vec::new();
    for k in 0..=n {
        let mut map = HashMap::new();
        for i in &hb.insts {
            let v = if i.is_phi() {
                match k {
                    0 => phi_incoming(i, c.pre).unwrap().clone(),
                    _ => remap(&maps[k - 1], phi_incoming(i, c.latch).unwrap()),
                }
            } else {
                next_v += 1;
                Operand::Value(ValueId(next_v - 1))
            };
            map.insert(i.id, v);
        }
        if k < n {
            for b in &order {
                for i in &f.block(*b).unwrap().insts {
                    next_v += 1;
                    map.insert(i.id, Operand::Value(ValueId(next_v - 1)));
                }
            }
        }
        maps.push(map);
    }
    let mut fresh = Vec::new();
    for k in 0..=n {
        let map = &maps[k];
        let mut nh = Block::new(hdr[k]);
        for i in hb.insts.iter().filter(|i| !i.is_phi()) {
            let Operand::Value(id) = map[&i.id] else { unreachable!() };
            nh.insts.push(Inst { id, ty: i.ty, op: i.op.clone(), args: i.args.iter().map(|a| remap(map, a)).collect() });
        }
        nh.term = Some(Terminator::Br(if k == n {
            c.exit
        } else if c.inside == h {
            hdr[k + 1]
        } else {
            copies[k][&c.inside]
        }));
        fresh.push(nh);
        if k < n {
            let cp = &copies[k];
            let rb = |b: BlockId| if b == h { hdr[k + 1] } else { *cp.get(&b).unwrap_or(&b) };
            // Phi incomings naming the header refer to this iteration's copy.
            let rb_phi = |b: BlockId| if b == h { hdr[k] } else { *cp.get(&b).unwrap_or(&b) };
            for b in &order {
                fresh.push(clone_block(f.block(*b).unwrap(), cp[b], map, &rb, &rb_phi));
            }
        }
    }
    let pi = f.block_index(c.pre).unwrap();
    f.blocks[pi].term.as_mut().unwrap().retarget(h, hdr[0]);
    fix_outside(f, &c.body, h, hdr[n], &maps[n]);
    let mut blocks = Vec::with_capacity(f.blocks.len() + fresh.len());
    for b in std::mem::take(&mut f.blocks) {
        if b.id == h {
            blocks.append(&mut fresh);
        } else if !c.body.contains(&b.id) {
            blocks.push(b);
        }
    }
    f.blocks = blocks;
}

pub fn loop_unroll(m: &mut IrModule, bugs: &BTreeSet<BugId>) -> bool {
    let Some(f) = entry_mut(m) else { return false };
    if active(bugs, BugId::UnrollNonterminating) && canonical_loops(f).iter().any(|c| c.trip == 1) {
        // Claims progress on a loop it never rewrites.
        return true;
    }
    let mut changed = false;
    loop {
        let size = |c: &Canonical| c.body.iter().map(|b| f.block(*b).unwrap().insts.len()).sum::<usize>();
        let pick = canonical_loops(f).into_iter().find(|c| {
            c.trip <= UNROLL_LIMIT
                && size(c) * (c.trip as usize + 1) <= UNROLL_BUDGET
                && f.inst_count() + size(c) * c.trip as usize <= FUNCTION_BUDGET
        });
        match pick {
            Some(c) => {
                full_unroll(f, &c);
                changed = true;
            }
            None => return changed,
        }
    }
}

/// Runs the first half of a long `slt` loop in the original and the rest in
/// a clone, so each half can be unrolled on its own.
pub fn loop_split(m: &mut IrModule) -> bool {
    let Some(f) = entry_mut(m) else { return false };
    let uses = |f: &Function, v: ValueId| -> usize {
        f.insts().map(|i| i.value_operands().filter(|x| *x == v).count()).sum::<usize>()
            + f.blocks.iter().filter(|b| b.term.as_ref().and_then(Terminator::operand) == Some(&Operand::Value(v))).count()
    };
    let pick = canonical_loops(f).into_iter().find(|c| {
        c.pred == Pred::Lt && c.step == 1 && c.enter_on_true && c.trip > UNROLL_LIMIT && c.trip <= SPLIT_LIMIT && uses(f, c.cmp) == 1
    });
    let Some(c) = pick else { return false };
    split(f, &c);
    true
}

fn split(f: &mut Function, c: &Canonical) {
    let h = c.header;
    let half = (c.trip / 2) as i32;
    let init = {
        let phi = f.block(h).unwrap().insts.iter().find(|i| i.id == c.iv).unwrap();
        const_i32(phi_incoming(phi, c.pre).unwrap()).unwrap()
    };
    let mut next_v = f.next_value_id();
    let mut next_b = f.next_block_id();
    let order: Vec<BlockId> = f.blocks.iter().map(|b| b.id).filter(|b| c.body.contains(b)).collect();
    let bmap: HashMap<BlockId, BlockId> = order
        .iter()
        .map(|b| {
            (
                *b,
                BlockId({
                    next_b += 1;
                    next_b - 1
                }),
            )
        })
        .collect();
    let mut map: HashMap<ValueId, Operand> = HashMap::new();
    for b in &order {
        for i in &f.block(*b).unwrap().insts {
            next_v += 1;
            map.insert(i.id, Operand::Value(ValueId(next_v - 1)));
        }
    }
    let rb = |b: BlockId| *bmap.get(&b).unwrap_or(&b);
    let mut fresh: Vec<Block> = order.iter().map(|b| clone_block(f.block(*b).unwrap(), bmap[b], &map, &rb, &rb)).collect();
    // The clone is entered from the first loop's header with its phis' values.
    let h2 = bmap[&h];
    let hi = order.iter().position(|b| *b == h).unwrap();
    let originals = f.block(h).unwrap().insts.iter().filter(|i| i.is_phi());
    for (i, old) in fresh[hi].insts.iter_mut().filter(|i| i.is_phi()).zip(originals) {
        let Op::Phi(inc) = &mut i.op else { unreachable!() };
        let k = inc.iter().position(|x| *x == c.pre).unwrap();
        inc[k] = h;
        // The counter leaves the first half at exactly init + half.
        i.args[k] = if old.id == c.iv { Operand::Const(Const::i32(init.wrapping_add(half))) } else { Operand::Value(old.id) };
    }
    fix_outside(f, &c.body, h, h2, &map);
    let hb = f.block_index(h).unwrap();
    let cmp = f.blocks[hb].insts.iter_mut().find(|i| i.id == c.cmp).unwrap();
    cmp.args[1] = Operand::Const(Const::i32(init.wrapping_add(half)));
    f.blocks[hb].term.as_mut().unwrap().retarget(c.exit, h2);
    let at = f.blocks.iter().rposition(|b| c.body.contains(&b.id)).unwrap() + 1;
    f.blocks.splice(at..at, fresh);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_module, verify};

    const COUNTED: &str = "@o = output global float

define void @llvm_main() {
bb0:
  br bb1
bb1:
  %0 = phi i32 [i32 0, bb0], [%3, bb2]
  %1 = phi float [float 0x00000000, bb0], [%4, bb2]
  %2 = icmp slt i1 %0, i32 TRIP
  br %2, bb2, bb3
bb2:
  %3 = add i32 %0, i32 1
  %4 = fadd float %1, float 0x3F800000
  br bb1
bb3:
  %5 = call void @llvm.qgpu.fset(@o, %1)
  ret void
}
";

    fn counted(trip: u32) -> IrModule {
        parse_module(&COUNTED.replace("TRIP", &trip.to_string())).unwrap()
    }

    #[test]
    fn trip_counts() {
        assert_eq!(trip_count(Pred::Lt, 0, 4, 1, true), Some(4));
        assert_eq!(trip_count(Pred::Lt, 5, 4, 1, true), Some(0));
        assert_eq!(trip_count(Pred::Ge, 10, 0, -3, true), Some(4));
        assert_eq!(trip_count(Pred::Ne, 0, 1, 2, true), None);
    }

    #[test]
    fn unroll_removes_the_loop() {
        let mut m = counted(3);
        assert!(loop_unroll(&mut m, &BTreeSet::new()));
        verify(&m).unwrap();
        assert!(canonical_loops(&m.functions[0]).is_empty());
        assert!(Cfg::new(&m.functions[0]).natural_loops().is_empty());
    }

    #[test]
    fn long_loops_are_left_alone_by_unroll_and_split() {
        let mut m = counted(20);
        assert!(!loop_unroll(&mut m, &BTreeSet::new()));
        assert!(loop_split(&mut m));
        verify(&m).unwrap();
        let trips: Vec<u32> = canonical_loops(&m.functions[0]).iter().map(|c| c.trip).collect();
        assert_eq!(trips, vec![10, 10]);
    }
}
