//! Constant folding through the runtime's own lane semantics, so a folded
//! value is bit-identical to what execution would produce.

use std::collections::HashMap;

use super::util::{entry_mut, replace_all};
use crate::exec::eval;
use crate::ir::{Const, Inst, Intrinsic, IrModule, Op, Operand};

/// Folded value of an instruction whose operands are all constants.
/// Instructions that would trap are left alone.
pub fn fold_inst(i: &Inst) -> Option<Const> {
    let ty = i.ty?;
    let c: Vec<&Const> = i.args.iter().map(Operand::as_const).collect::<Option<_>>()?;
    let lanes = match &i.op {
        Op::Bin(op) => eval::eval_bin(*op, &c[0].lanes, &c[1].lanes).ok()?,
        Op::FNeg => eval::eval_fneg(&c[0].lanes),
        Op::ICmp(p) => eval::eval_icmp(*p, &c[0].lanes, &c[1].lanes),
        Op::FCmp(p) => eval::eval_fcmp(*p, &c[0].lanes, &c[1].lanes),
        Op::Select => {
            if c[0].lanes[0] & 1 == 1 {
                c[1].lanes.clone()
            } else {
                c[2].lanes.clone()
            }
        }
        Op::Cast(op) => eval::eval_cast(*op, &c[0].lanes),
        Op::Extract => vec![*c[0].lanes.get(c[1].lanes[0] as usize)?],
        Op::Insert => {
            let mut v = c[0].lanes.clone();
            *v.get_mut(c[2].lanes[0] as usize)? = c[1].lanes[0];
            v
        }
        Op::Shuffle(mask) => mask.iter().map(|l| c[0].lanes.get(*l as usize).copied()).collect::<Option<_>>()?,
        Op::Call(intr) if !intr.is_env_dependent() => {
            let args: Vec<&[u32]> = c.iter().map(|x| x.lanes.as_slice()).collect();
            eval::eval_math(*intr, ty, &args).ok()?
        }
        Op::Call(Intrinsic::FGet | Intrinsic::FSet | Intrinsic::Sampler) | Op::Call(_) | Op::Phi(_) => return None,
    };
    (lanes.len() == ty.lanes as usize).then_some(Const { ty, lanes })
}

pub fn const_fold(m: &mut IrModule) -> bool {
    let Some(f) = entry_mut(m) else { return false };
    let mut changed = false;
    loop {
        let mut map = HashMap::new();
        for i in f.insts() {
            if let Some(c) = fold_inst(i) {
                map.insert(i.id, Operand::Const(c));
            } else if let Op::Phi(_) = i.op {
                // A phi whose incomings are one and the same constant.
                if let Some(Operand::Const(first)) = i.args.first() {
                    if i.args.iter().all(|a| a == &Operand::Const(first.clone())) {
                        map.insert(i.id, Operand::Const(first.clone()));
                    }
                }
            }
        }
        if !replace_all(f, &map) {
            return changed;
        }
        changed = true;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{parse_module, print_module};

    #[test]
    fn folds_float_add() {
        let mut m = parse_module(
            "@o = output global float
define void @llvm_main() {
bb0:
  %0 = fadd float float 0x40000000, float 0x40400000
  %1 = call void @llvm.qgpu.fset(@o, %0)
  ret void
}
",
        )
        .unwrap();
        assert!(const_fold(&mut m));
        let text = print_module(&m);
        assert!(text.contains("@llvm.qgpu.fset(@o, float 0x40A00000)"), "{text}");
    }

    #[test]
    fn leaves_trapping_division() {
        let mut m = parse_module(
            "define void @llvm_main() {
bb0:
  %0 = sdiv i32 i32 1, i32 0
  ret void
}
",
        )
        .unwrap();
        assert!(!const_fold(&mut m));
    }
}
