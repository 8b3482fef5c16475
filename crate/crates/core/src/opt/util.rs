//! Helpers shared by the passes.

use std::collections::HashMap;

use crate::ir::{Const, Function, IrModule, IrType, Operand, Terminator, ValueId, ENTRY_NAME};

pub fn entry_mut(m: &mut IrModule) -> Option<&mut Function> {
    m.functions.iter_mut().find(|f| f.name == ENTRY_NAME)
}

pub fn splat_of(o: &Operand, bits: u32) -> bool {
    matches!(o, Operand::Const(c) if c.is_splat_of(bits))
}

/// Follows a replacement chain to its end.
fn resolve(map: &HashMap<ValueId, Operand>, mut o: Operand) -> Operand {
    let mut hops = 0;
    while let Operand::Value(v) = o {
        match map.get(&v) {
            Some(next) if hops <= map.len() => {
                o = next.clone();
                hops += 1;
            }
            _ => break,
        }
    }
    o
}

/// Deletes the instructions in `map` and rewrites their uses to the mapped
/// operands. Returns whether anything was replaced.
pub fn replace_all(f: &mut Function, map: &HashMap<ValueId, Operand>) -> bool {
    if map.is_empty() {
        return false;
    }
    for b in &mut f.blocks {
        b.insts.retain(|i| !map.contains_key(&i.id));
        for i in &mut b.insts {
            for a in &mut i.args {
                if matches!(a, Operand::Value(v) if map.contains_key(v)) {
                    *a = resolve(map, a.clone());
                }
            }
        }
        if let Some(op) = b.term.as_mut().and_then(Terminator::operand_mut) {
            if matches!(op, Operand::Value(v) if map.contains_key(v)) {
                *op = resolve(map, op.clone());
            }
        }
    }
    true
}

pub fn zero_of(ty: IrType) -> Operand {
    Operand::Const(Const::zero(ty))
}
