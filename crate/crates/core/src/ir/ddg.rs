//! Data dependency graphs over the entry function, output slicing, and a
//! cheap structural diff of slices.
//!
//! Diffing matches instructions by opcode, type, arity and constant
//! operands under a greedy bijection; it is not graph isomorphism.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::text::inst_text;
use super::types::*;

/// Nodes are instructions; an edge `(a, b)` means `b` consumes `a`.
/// Repeated operands give repeated edges.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ddg {
    pub nodes: Vec<ValueId>,
    pub edges: Vec<(ValueId, ValueId)>,
}

impl Ddg {
    pub fn uses_of(&self, v: ValueId) -> impl Iterator<Item = ValueId> + '_ {
        self.edges.iter().filter(move |(a, _)| *a == v).map(|(_, b)| *b)
    }
}

pub fn build_ddg(m: &IrModule) -> Ddg {
    let mut d = Ddg::default();
    let Some(f) = m.entry() else { return d };
    for i in f.insts() {
        d.nodes.push(i.id);
        for v in i.value_operands() {
            d.edges.push((v, i.id));
        }
    }
    d
}

/// Instructions an output depends on, in program order.
#[derive(Clone, Debug, PartialEq)]
pub struct Slice {
    pub output: String,
    pub insts: Vec<Inst>,
}

/// One slice per output slot, backtracking from its fset calls. Outputs
/// that are never written get an empty slice.
pub fn slice_outputs(m: &IrModule, d: &Ddg) -> BTreeMap<String, Slice> {
    let mut preds: HashMap<ValueId, Vec<ValueId>> = HashMap::new();
    for (a, b) in &d.edges {
        preds.entry(*b).or_default().push(*a);
    }
    let insts: Vec<&Inst> = m.entry().map(|f| f.insts().collect()).unwrap_or_default();
    let mut out = BTreeMap::new();
    for name in m.output_names() {
        let mut seen = BTreeSet::new();
        let mut stack: Vec<ValueId> = insts
            .iter()
            .filter(|i| i.is_call(Intrinsic::FSet) && i.args.first() == Some(&Operand::Slot(name.clone())))
            .map(|i| i.id)
            .collect();
        while let Some(v) = stack.pop() {
            if seen.insert(v) {
                stack.extend(preds.get(&v).into_iter().flatten().copied());
            }
        }
        let chain = insts.iter().filter(|i| seen.contains(&i.id)).map(|i| (*i).clone()).collect();
        out.insert(name.clone(), Slice { output: name, insts: chain });
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DivergenceSummary {
    pub output: String,
    /// Variant instructions with no counterpart in the reference chain.
    pub variant_only: Vec<String>,
    /// Reference instructions with no counterpart in the variant chain.
    pub reference_only: Vec<String>,
    /// Opcode pairs (variant, reference) of unmatched instructions, paired in order.
    pub rewritten: Vec<(String, String)>,
    /// Variant instructions that consume `undef`.
    pub undef_sites: Vec<String>,
}

impl DivergenceSummary {
    pub fn is_empty(&self) -> bool {
        self.variant_only.is_empty() && self.reference_only.is_empty() && self.undef_sites.is_empty()
    }
}

impl fmt::Display for DivergenceSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_empty() {
            return write!(f, "@{}: chains match", self.output);
        }
        writeln!(f, "@{}:", self.output)?;
        for s in &self.undef_sites {
            writeln!(f, "  undef operand: {s}")?;
        }
        for (a, b) in &self.rewritten {
            writeln!(f, "  rewritten: {b} -> {a}")?;
        }
        for s in &self.variant_only {
            writeln!(f, "  variant only: {s}")?;
        }
        for s in &self.reference_only {
            writeln!(f, "  reference only: {s}")?;
        }
        Ok(())
    }
}

/// Matching key: opcode, type, arity, and constant operands by position.
fn key(i: &Inst) -> String {
    let mut k = format!("{} {:?} {}", i.op.mnemonic(), i.ty, i.args.len());
    for a in &i.args {
        match a {
            Operand::Const(c) => k.push_str(&format!(" {:?}", c.lanes)),
            Operand::Slot(s) => k.push_str(&format!(" @{s}")),
            Operand::Undef(_) => k.push_str(" undef"),
            Operand::Value(_) => k.push_str(" _"),
        }
    }
    k
}

pub fn ddg_diff(variant: &Slice, reference: &Slice) -> DivergenceSummary {
    let mut used = vec![false; reference.insts.len()];
    let ref_keys: Vec<String> = reference.insts.iter().map(key).collect();
    let mut variant_only = Vec::new();
    let mut v_ops = Vec::new();
    for i in &variant.insts {
        let k = key(i);
        match (0..ref_keys.len()).find(|j| !used[*j] && ref_keys[*j] == k) {
            Some(j) => used[j] = true,
            None => {
                variant_only.push(inst_text(i));
                v_ops.push(i.op.mnemonic());
            }
        }
    }
    let unmatched_ref: Vec<&Inst> = reference.insts.iter().zip(&used).filter(|(_, u)| !**u).map(|(i, _)| i).collect();
    let rewritten = v_ops.into_iter().zip(unmatched_ref.iter().map(|i| i.op.mnemonic())).collect();
    DivergenceSummary {
        output: variant.output.clone(),
        variant_only,
        reference_only: unmatched_ref.into_iter().map(inst_text).collect(),
        rewritten,
        undef_sites: variant.insts.iter().filter(|i| i.args.iter().any(|a| matches!(a, Operand::Undef(_)))).map(inst_text).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::parse_module;

    const STRAIGHT: &str = "@a = input global float
@o = output global float
define void @llvm_main() {
bb0:
  %0 = call float @llvm.qgpu.fget(@a)
  %1 = call float @llvm.qgpu.fget(@a)
  %2 = fadd float %0, %1
  %3 = fmul float float 0x40000000, float 0x40400000
  %4 = call void @llvm.qgpu.fset(@o, %2)
  ret void
}
";

    #[test]
    fn edges_follow_operands() {
        let m = parse_module(STRAIGHT).unwrap();
        let d = build_ddg(&m);
        assert_eq!(d.nodes.len(), 5);
        assert_eq!(d.edges, vec![(ValueId(0), ValueId(2)), (ValueId(1), ValueId(2)), (ValueId(2), ValueId(4))]);
        assert_eq!(d.uses_of(ValueId(3)).count(), 0);
    }

    #[test]
    fn dead_arithmetic_is_not_sliced() {
        let m = parse_module(STRAIGHT).unwrap();
        let s = slice_outputs(&m, &build_ddg(&m));
        let ids: Vec<u32> = s["o"].insts.iter().map(|i| i.id.0).collect();
        assert_eq!(ids, vec![0, 1, 2, 4]);
    }

    #[test]
    fn identical_chains_diff_empty_and_undef_flagged() {
        let m = parse_module(STRAIGHT).unwrap();
        let s = slice_outputs(&m, &build_ddg(&m));
        assert!(ddg_diff(&s["o"], &s["o"]).is_empty());
        let bad = parse_module(&STRAIGHT.replace("fadd float %0, %1", "fadd float %0, float undef")).unwrap();
        let sb = slice_outputs(&bad, &build_ddg(&bad));
        let d = ddg_diff(&sb["o"], &s["o"]);
        assert_eq!(d.undef_sites.len(), 1);
        assert!(d.undef_sites[0].contains("undef"), "{d}");
    }
}
