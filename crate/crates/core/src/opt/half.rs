//! Half-precision promotion. Half-typed values already carry single
//! precision bits, so retyping everything to f32 and turning precision
//! casts into aliases is exact.

use std::collections::HashMap;

use super::util::{entry_mut, replace_all};
use crate::ir::{CastOp, Elem, IrModule, IrType, Op, Operand};

fn promote(t: &mut IrType) {
    if t.elem == Elem::F16 {
        t.elem = Elem::F32;
    }
}

pub fn half_promote(m: &mut IrModule) -> bool {
    if !m.mentions_f16() {
        return false;
    }
    let Some(f) = entry_mut(m) else { return false };
    let mut aliases = HashMap::new();
    for b in &mut f.blocks {
        for i in &mut b.insts {
            if let Some(t) = i.ty.as_mut() {
                promote(t);
            }
            for a in &mut i.args {
                match a {
                    Operand::Const(c) => promote(&mut c.ty),
                    Operand::Undef(t) => promote(t),
                    _ => {}
                }
            }
            if matches!(i.op, Op::Cast(CastOp::FpTrunc | CastOp::FpExt)) {
                aliases.insert(i.id, i.args[0].clone());
            }
        }
        if let Some(Operand::Const(c)) = b.term.as_mut().and_then(|t| t.operand_mut()) {
            promote(&mut c.ty);
        }
    }
    replace_all(f, &aliases);
    true
}
