//! Algebraic identities that hold bit-exactly in IEEE single precision.
//! Nothing here reassociates or changes rounding.

use std::collections::{BTreeSet, HashMap};

use super::util::{entry_mut, replace_all, splat_of, zero_of};
use super::{active, BugId};
use crate::ir::{BinOp, Const, Inst, Intrinsic, IrModule, Op, Operand, Pred};

const ONE: u32 = 0x3F80_0000;
const POS_ZERO: u32 = 0;
const NEG_ZERO: u32 = 0x8000_0000;

fn rewrite(i: &Inst, bugs: &BTreeSet<BugId>) -> Option<Operand> {
    let a = i.args.first()?;
    let b = i.args.get(1);
    let ty = i.ty?;
    let either = |bits: u32| -> Option<Operand> {
        let b = b?;
        if splat_of(b, bits) {
            Some(a.clone())
        } else if splat_of(a, bits) {
            Some(b.clone())
        } else {
            None
        }
    };
    let right = |bits: u32| -> Option<Operand> { splat_of(b?, bits).then(|| a.clone()) };
    match &i.op {
        Op::Bin(BinOp::FMul) => either(ONE),
        Op::Bin(BinOp::FDiv) => right(ONE),
        Op::Bin(BinOp::FAdd) => either(NEG_ZERO),
        Op::Bin(BinOp::FSub) => right(POS_ZERO),
        Op::Bin(BinOp::Add) => either(0),
        Op::Bin(BinOp::Sub) => right(0),
        Op::Bin(BinOp::Mul) => either(1),
        Op::Bin(BinOp::SDiv) => right(1),
        Op::Bin(BinOp::And) => either(1).or_else(|| (splat_of(a, 0) || splat_of(b?, 0)).then(|| zero_of(ty))),
        Op::Bin(BinOp::Or) => either(0).or_else(|| (splat_of(a, 1) || splat_of(b?, 1)).then(|| Operand::Const(Const::splat(ty, 1)))),
        Op::Bin(BinOp::Xor) => either(0),
        Op::Select if i.args[1] == i.args[2] => Some(i.args[1].clone()),
        Op::ICmp(p) if Some(a) == b && !matches!(a, Operand::Undef(_)) => {
            Some(Operand::Const(Const::bool(matches!(p, Pred::Eq | Pred::Le | Pred::Ge))))
        }
        Op::Call(Intrinsic::FMin | Intrinsic::FMax | Intrinsic::SMin | Intrinsic::SMax) if Some(a) == b => Some(a.clone()),
        Op::Call(Intrinsic::Mix) if splat_of(&i.args[2], ONE) => {
            if active(bugs, BugId::InstCombineWrongIdentity) {
                return Some(zero_of(ty));
            }
            Some(a.clone())
        }
        Op::Call(Intrinsic::Mix) if splat_of(&i.args[2], POS_ZERO) => Some(i.args[1].clone()),
        _ => None,
    }
}

pub fn inst_combine(m: &mut IrModule, bugs: &BTreeSet<BugId>) -> bool {
    let Some(f) = entry_mut(m) else { return false };
    let mut changed = false;
    loop {
        let mut map = HashMap::new();
        for i in f.insts() {
            if let Some(to) = rewrite(i, bugs) {
                if to != Operand::Value(i.id) {
                    map.insert(i.id, to);
                }
            }
        }
        if !replace_all(f, &map) {
            return changed;
        }
        changed = true;
    }
}
