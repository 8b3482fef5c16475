use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::analysis::{def_blocks, Cfg};
use super::types::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerifyErrorKind {
    NoEntry,
    SsaViolation,
    MissingTerminator,
    UndefinedValue,
    DominanceViolation,
    TypeMismatch,
    ArityMismatch,
    BadSlot,
    BadBranchTarget,
    PhiMismatch,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct VerifyError {
    pub kind: VerifyErrorKind,
    pub block: Option<BlockId>,
    pub inst: Option<ValueId>,
    pub message: String,
}

impl fmt::Display for VerifyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.kind)?;
        if let Some(i) = self.inst {
            write!(f, " at {i}")?;
        } else if let Some(b) = self.block {
            write!(f, " in {b}")?;
        }
        write!(f, ": {}", self.message)
    }
}

type VResult = Result<(), VerifyError>;

fn fail(kind: VerifyErrorKind, block: Option<BlockId>, inst: Option<ValueId>, message: impl Into<String>) -> VerifyError {
    VerifyError { kind, block, inst, message: message.into() }
}

/// Checks every structural invariant and reports the first violation.
pub fn verify(m: &IrModule) -> VResult {
    let mut names = HashSet::new();
    for g in &m.globals {
        if !names.insert(&g.name) {
            return Err(fail(VerifyErrorKind::BadSlot, None, None, format!("duplicate slot @{}", g.name)));
        }
        if g.ty.is_none() && g.role != SlotRole::Uniform {
            return Err(fail(VerifyErrorKind::BadSlot, None, None, format!("sampler @{} must be uniform", g.name)));
        }
    }
    if m.entry().is_none() {
        return Err(fail(VerifyErrorKind::NoEntry, None, None, format!("no function @{ENTRY_NAME}")));
    }
    for f in &m.functions {
        verify_function(m, f)?;
    }
    Ok(())
}

fn verify_function(m: &IrModule, f: &Function) -> VResult {
    use VerifyErrorKind::*;
    if f.blocks.is_empty() {
        return Err(fail(MissingTerminator, None, None, format!("@{} has no blocks", f.name)));
    }
    let mut block_ids = HashSet::new();
    for b in &f.blocks {
        if !block_ids.insert(b.id) {
            return Err(fail(SsaViolation, Some(b.id), None, format!("block {} defined twice", b.id)));
        }
    }
    let mut types: HashMap<ValueId, Option<IrType>> = HashMap::new();
    for b in &f.blocks {
        for i in &b.insts {
            if types.insert(i.id, i.ty).is_some() {
                return Err(fail(SsaViolation, Some(b.id), Some(i.id), format!("{} defined more than once", i.id)));
            }
        }
        let Some(t) = &b.term else {
            return Err(fail(MissingTerminator, Some(b.id), None, format!("{} falls through", b.id)));
        };
        for s in t.successors() {
            if !block_ids.contains(&s) {
                return Err(fail(BadBranchTarget, Some(b.id), None, format!("branch to unknown {s}")));
            }
            if s == f.blocks[0].id {
                return Err(fail(BadBranchTarget, Some(b.id), None, "branch to the entry block"));
            }
        }
    }
    let cfg = Cfg::new(f);
    let defs = def_blocks(f);
    let positions: HashMap<ValueId, usize> = f.blocks.iter().flat_map(|b| b.insts.iter().enumerate().map(|(k, i)| (i.id, k))).collect();
    let check_use = |v: ValueId, use_block: BlockId, use_pos: usize, inst: Option<ValueId>| -> VResult {
        let Some(&db) = defs.get(&v) else {
            return Err(fail(UndefinedValue, Some(use_block), inst, format!("{v} is never defined")));
        };
        let ok = if db == use_block { positions[&v] < use_pos } else { cfg.dominates(db, use_block) };
        if !ok && cfg.is_reachable(use_block) {
            return Err(fail(DominanceViolation, Some(use_block), inst, format!("{v} does not dominate its use")));
        }
        Ok(())
    };
    for b in &f.blocks {
        let mut seen_non_phi = false;
        for (k, i) in b.insts.iter().enumerate() {
            if let Op::Phi(incoming) = &i.op {
                if seen_non_phi {
                    return Err(fail(PhiMismatch, Some(b.id), Some(i.id), "phi after a non-phi instruction"));
                }
                let want: BTreeSet<BlockId> = cfg.preds[&b.id].iter().copied().collect();
                let got: BTreeSet<BlockId> = incoming.iter().copied().collect();
                if incoming.len() != i.args.len() || got.len() != incoming.len() || got != want {
                    return Err(fail(PhiMismatch, Some(b.id), Some(i.id), "phi incoming blocks differ from predecessors"));
                }
                for (a, pred) in i.args.iter().zip(incoming) {
                    if let Operand::Value(v) = a {
                        let Some(&db) = defs.get(v) else {
                            return Err(fail(UndefinedValue, Some(b.id), Some(i.id), format!("{v} is never defined")));
                        };
                        if cfg.is_reachable(*pred) && !cfg.dominates(db, *pred) {
                            return Err(fail(DominanceViolation, Some(b.id), Some(i.id), format!("{v} does not reach {pred}")));
                        }
                    }
                }
            } else {
                seen_non_phi = true;
                for v in i.value_operands() {
                    check_use(v, b.id, k, Some(i.id))?;
                }
            }
            check_inst(m, &types, i).map_err(|(kind, msg)| fail(kind, Some(b.id), Some(i.id), msg))?;
        }
        let t = b.term.as_ref().expect("checked above");
        if let Some(op) = t.operand() {
            if let Operand::Value(v) = op {
                check_use(*v, b.id, b.insts.len(), None)?;
            }
            let want = if matches!(t, Terminator::CondBr(..)) { IrType::I1 } else { IrType::I32 };
            let got = operand_type(&types, op).map_err(|(k, msg)| fail(k, Some(b.id), None, msg))?;
            if got != want {
                return Err(fail(TypeMismatch, Some(b.id), None, format!("branch operand is {got}, expected {want}")));
            }
        }
        if let Terminator::Switch(_, _, cases) = t {
            let labels: HashSet<i32> = cases.iter().map(|c| c.0).collect();
            if labels.len() != cases.len() {
                return Err(fail(BadBranchTarget, Some(b.id), None, "duplicate switch label"));
            }
        }
    }
    Ok(())
}

type Check = Result<(), (VerifyErrorKind, String)>;

fn operand_type(types: &HashMap<ValueId, Option<IrType>>, o: &Operand) -> Result<IrType, (VerifyErrorKind, String)> {
    match o {
        Operand::Value(v) => match types.get(v) {
            Some(Some(t)) => Ok(*t),
            Some(None) => Err((VerifyErrorKind::TypeMismatch, format!("{v} has no value"))),
            None => Err((VerifyErrorKind::UndefinedValue, format!("{v} is never defined"))),
        },
        Operand::Const(c) => {
            if c.lanes.len() != c.ty.lanes as usize {
                Err((VerifyErrorKind::TypeMismatch, format!("{} constant with {} lanes", c.ty, c.lanes.len())))
            } else if c.ty.elem == Elem::I1 && c.lanes.iter().any(|l| *l > 1) {
                Err((VerifyErrorKind::TypeMismatch, "i1 constant out of range".into()))
            } else {
                Ok(c.ty)
            }
        }
        Operand::Undef(t) => Ok(*t),
        Operand::Slot(s) => Err((VerifyErrorKind::BadSlot, format!("slot @{s} used as a value"))),
    }
}

fn check_inst(m: &IrModule, types: &HashMap<ValueId, Option<IrType>>, i: &Inst) -> Check {
    use VerifyErrorKind::*;
    let arity = |n: usize| -> Check {
        if i.args.len() == n {
            Ok(())
        } else {
            Err((ArityMismatch, format!("{} takes {n} operands, got {}", i.op.mnemonic(), i.args.len())))
        }
    };
    let mismatch = |what: String| -> Check { Err((TypeMismatch, what)) };
    if let Op::Call(Intrinsic::FSet) = i.op {
        arity(2)?;
        if i.ty.is_some() {
            return mismatch("fset returns void".into());
        }
        let Operand::Slot(s) = &i.args[0] else { return Err((BadSlot, "fset needs a slot operand".into())) };
        let g = m.global(s).ok_or((BadSlot, format!("unknown slot @{s}")))?;
        if g.role != SlotRole::Output {
            return Err((BadSlot, format!("fset to non-output @{s}")));
        }
        let vt = operand_type(types, &i.args[1])?;
        return if Some(vt) == g.ty { Ok(()) } else { mismatch(format!("fset of {vt} to @{s}")) };
    }
    let Some(ty) = i.ty else { return mismatch(format!("{} must produce a value", i.op.mnemonic())) };
    if let Op::Call(Intrinsic::FGet) = i.op {
        arity(1)?;
        let Operand::Slot(s) = &i.args[0] else { return Err((BadSlot, "fget needs a slot operand".into())) };
        let g = m.global(s).ok_or((BadSlot, format!("unknown slot @{s}")))?;
        if g.role == SlotRole::Output || g.ty.is_none() {
            return Err((BadSlot, format!("fget from @{s}")));
        }
        return if g.ty == Some(ty) { Ok(()) } else { mismatch(format!("fget of @{s} as {ty}")) };
    }
    let mut ts = Vec::with_capacity(i.args.len());
    for a in &i.args {
        ts.push(operand_type(types, a)?);
    }
    let all_ty = |ts: &[IrType]| ts.iter().all(|t| *t == ty);
    let const_index = |o: &Operand, lanes: u8| -> Check {
        match o {
            Operand::Const(c) if c.ty == IrType::I32 && (c.lanes[0] as i32) >= 0 && c.lanes[0] < lanes as u32 => Ok(()),
            _ => mismatch("lane index must be an in-range i32 constant".into()),
        }
    };
    match &i.op {
        Op::Bin(b) => {
            arity(2)?;
            if !all_ty(&ts) || !b.accepts(ty.elem) {
                return mismatch(format!("{} on {} and {} producing {ty}", b.name(), ts[0], ts[1]));
            }
        }
        Op::FNeg => {
            arity(1)?;
            if !all_ty(&ts) || !ty.elem.is_float() {
                return mismatch(format!("fneg of {}", ts[0]));
            }
        }
        Op::ICmp(p) | Op::FCmp(p) => {
            arity(2)?;
            let ok_elem = match i.op {
                Op::ICmp(_) => ts[0].elem == Elem::I32 || (ts[0].elem == Elem::I1 && matches!(p, Pred::Eq | Pred::Ne)),
                _ => ts[0].elem.is_float(),
            };
            if ts[0] != ts[1] || !ok_elem || ty != IrType::new(Elem::I1, ts[0].lanes) {
                return mismatch(format!("compare of {} and {} producing {ty}", ts[0], ts[1]));
            }
        }
        Op::Select => {
            arity(3)?;
            if ts[0] != IrType::I1 || !all_ty(&ts[1..]) {
                return mismatch("select needs i1 and two operands of the result type".into());
            }
        }
        Op::Phi(blocks) => {
            if blocks.len() != i.args.len() {
                return Err((ArityMismatch, "phi operand/block count differ".into()));
            }
            if !all_ty(&ts) {
                return mismatch(format!("phi operand type differs from {ty}"));
            }
        }
        Op::Cast(c) => {
            arity(1)?;
            if ts[0].lanes != ty.lanes || !c.accepts(ts[0].elem, ty.elem) {
                return mismatch(format!("{} from {} to {ty}", c.name(), ts[0]));
            }
        }
        Op::Extract => {
            arity(2)?;
            if !ts[0].is_vector() || ts[0].scalar() != ty {
                return mismatch(format!("extractelement {ty} from {}", ts[0]));
            }
            const_index(&i.args[1], ts[0].lanes)?;
        }
        Op::Insert => {
            arity(3)?;
            if !ty.is_vector() || ts[0] != ty || ts[1] != ty.scalar() {
                return mismatch(format!("insertelement {} into {}", ts[1], ts[0]));
            }
            const_index(&i.args[2], ty.lanes)?;
        }
        Op::Shuffle(mask) => {
            arity(1)?;
            if mask.len() != ty.lanes as usize || ts[0].elem != ty.elem || mask.iter().any(|l| *l >= ts[0].lanes) {
                return mismatch(format!("shufflevector of {} to {ty}", ts[0]));
            }
        }
        Op::Call(intr) => check_call(*intr, ty, &ts).map_err(|m| (ArityMismatch, m)).and_then(|ok| {
            if ok {
                Ok(())
            } else {
                Err((TypeMismatch, format!("bad operand types for {}", intr.name())))
            }
        })?,
    }
    Ok(())
}

/// `Err` on arity problems, `Ok(false)` on type problems.
fn check_call(intr: Intrinsic, ty: IrType, ts: &[IrType]) -> Result<bool, String> {
    let arity = |n: usize| {
        if ts.len() == n {
            Ok(())
        } else {
            Err(format!("{} takes {n} operands, got {}", intr.name(), ts.len()))
        }
    };
    Ok(match intr {
        Intrinsic::FGet | Intrinsic::FSet => unreachable!("handled by caller"),
        Intrinsic::Sampler => {
            arity(3)?;
            ts[0] == IrType::I32 && ts[1] == IrType::new(Elem::F32, 2) && ts[2] == IrType::F32 && ty == IrType::new(Elem::F32, 4)
        }
        Intrinsic::Rsq | Intrinsic::Sqrt | Intrinsic::Sin | Intrinsic::Cos | Intrinsic::Floor | Intrinsic::FAbs | Intrinsic::Normalize => {
            arity(1)?;
            ts[0] == ty && ty.elem.is_float()
        }
        Intrinsic::FMin | Intrinsic::FMax => {
            arity(2)?;
            ts.iter().all(|t| *t == ty) && ty.elem.is_float()
        }
        Intrinsic::SMin | Intrinsic::SMax => {
            arity(2)?;
            ts.iter().all(|t| *t == ty) && ty.elem == Elem::I32
        }
        Intrinsic::IAbs => {
            arity(1)?;
            ts[0] == ty && ty.elem == Elem::I32
        }
        Intrinsic::Mix => {
            arity(3)?;
            ty.elem.is_float() && ts[0] == ty && ts[1] == ty && (ts[2] == ty || ts[2] == ty.scalar())
        }
        Intrinsic::Dot => {
            arity(2)?;
            ts[0] == ts[1] && ts[0].elem.is_float() && ty == ts[0].scalar()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::text::parse_module;

    fn kind(src: &str) -> VerifyErrorKind {
        verify(&parse_module(src).unwrap()).unwrap_err().kind
    }

    #[test]
    fn valid_module_verifies() {
        let m = parse_module(
            "@o = output global float
define void @llvm_main() {
bb0:
  %0 = fadd float float 0x3F800000, float 0x40000000
  %1 = call void @llvm.qgpu.fset(@o, %0)
  ret void
}
",
        )
        .unwrap();
        verify(&m).unwrap();
    }

    #[test]
    fn duplicated_value_id() {
        assert_eq!(
            kind("define void @llvm_main() {\nbb0:\n  %0 = fneg float float 0x0\n  %0 = fneg float float 0x0\n  ret void\n}\n"),
            VerifyErrorKind::SsaViolation
        );
    }

    #[test]
    fn fallthrough_block() {
        assert_eq!(
            kind("define void @llvm_main() {\nbb0:\n  br bb1\nbb1:\n  %0 = fneg float float 0x0\n}\n"),
            VerifyErrorKind::MissingTerminator
        );
    }

    #[test]
    fn other_violations() {
        assert_eq!(kind("define void @llvm_main() {\nbb0:\n  %0 = fneg float %7\n  ret void\n}\n"), VerifyErrorKind::UndefinedValue);
        assert_eq!(
            kind("define void @llvm_main() {\nbb0:\n  %0 = fadd float i32 1, float 0x0\n  ret void\n}\n"),
            VerifyErrorKind::TypeMismatch
        );
        assert_eq!(kind("define void @llvm_main() {\nbb0:\n  %0 = fadd float float 0x0\n  ret void\n}\n"), VerifyErrorKind::ArityMismatch);
        assert_eq!(kind("define void @llvm_main() {\nbb0:\n  br bb5\n}\n"), VerifyErrorKind::BadBranchTarget);
        assert_eq!(kind("define void @other() {\nbb0:\n  ret void\n}\n"), VerifyErrorKind::NoEntry);
        assert_eq!(
            kind("define void @llvm_main() {\nbb0:\n  br bb1\nbb1:\n  %0 = phi float [float 0x0, bb0], [float 0x0, bb2]\n  ret void\n}\n"),
            VerifyErrorKind::PhiMismatch
        );
    }
}
