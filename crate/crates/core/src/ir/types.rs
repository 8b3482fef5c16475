use std::collections::{BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Elem {
    I1,
    I32,
    F16,
    F32,
}

impl Elem {
    pub fn name(self) -> &'static str {
        match self {
            Elem::I1 => "i1",
            Elem::I32 => "i32",
            Elem::F16 => "half",
            Elem::F32 => "float",
        }
    }

    pub fn is_float(self) -> bool {
        matches!(self, Elem::F16 | Elem::F32)
    }
}

/// A first-class IR type: a scalar (`lanes == 1`) or a short vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IrType {
    pub elem: Elem,
    pub lanes: u8,
}

impl IrType {
    pub const I1: IrType = IrType { elem: Elem::I1, lanes: 1 };
    pub const I32: IrType = IrType { elem: Elem::I32, lanes: 1 };
    pub const F16: IrType = IrType { elem: Elem::F16, lanes: 1 };
    pub const F32: IrType = IrType { elem: Elem::F32, lanes: 1 };

    pub fn new(elem: Elem, lanes: u8) -> IrType {
        IrType { elem, lanes }
    }

    pub fn scalar(self) -> IrType {
        IrType { elem: self.elem, lanes: 1 }
    }

    pub fn with_lanes(self, lanes: u8) -> IrType {
        IrType { elem: self.elem, lanes }
    }

    pub fn with_elem(self, elem: Elem) -> IrType {
        IrType { elem, lanes: self.lanes }
    }

    pub fn is_vector(self) -> bool {
        self.lanes > 1
    }
}

impl fmt::Display for IrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.lanes == 1 {
            f.write_str(self.elem.name())
        } else {
            write!(f, "<{} x {}>", self.lanes, self.elem.name())
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ValueId(pub u32);

impl fmt::Display for ValueId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "%{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BlockId(pub u32);

impl fmt::Display for BlockId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bb{}", self.0)
    }
}

/// A typed constant. Lanes are raw bits: IEEE single for float and half
/// (half-typed constants keep their single-precision value), two's
/// complement for `i32`, 0/1 for `i1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Const {
    pub ty: IrType,
    pub lanes: Vec<u32>,
}

impl Const {
    pub fn f32(v: f32) -> Const {
        Const { ty: IrType::F32, lanes: vec![v.to_bits()] }
    }

    pub fn i32(v: i32) -> Const {
        Const { ty: IrType::I32, lanes: vec![v as u32] }
    }

    pub fn bool(v: bool) -> Const {
        Const { ty: IrType::I1, lanes: vec![v as u32] }
    }

    pub fn zero(ty: IrType) -> Const {
        Const { ty, lanes: vec![0; ty.lanes as usize] }
    }

    pub fn splat(ty: IrType, bits: u32) -> Const {
        Const { ty, lanes: vec![bits; ty.lanes as usize] }
    }

    pub fn is_splat_of(&self, bits: u32) -> bool {
        self.lanes.iter().all(|l| *l == bits)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Operand {
    Value(ValueId),
    Const(Const),
    Undef(IrType),
    /// A global slot name; only valid as the first argument of fget/fset.
    Slot(String),
}

impl Operand {
    pub fn value(&self) -> Option<ValueId> {
        match self {
            Operand::Value(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_const(&self) -> Option<&Const> {
        match self {
            Operand::Const(c) => Some(c),
            _ => None,
        }
    }
}

impl From<ValueId> for Operand {
    fn from(v: ValueId) -> Operand {
        Operand::Value(v)
    }
}

impl From<Const> for Operand {
    fn from(c: Const) -> Operand {
        Operand::Const(c)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    SDiv,
    SRem,
    FAdd,
    FSub,
    FMul,
    FDiv,
    And,
    Or,
    Xor,
}

impl BinOp {
    pub const ALL: [BinOp; 12] = [
        BinOp::Add,
        BinOp::Sub,
        BinOp::Mul,
        BinOp::SDiv,
        BinOp::SRem,
        BinOp::FAdd,
        BinOp::FSub,
        BinOp::FMul,
        BinOp::FDiv,
        BinOp::And,
        BinOp::Or,
        BinOp::Xor,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BinOp::Add => "add",
            BinOp::Sub => "sub",
            BinOp::Mul => "mul",
            BinOp::SDiv => "sdiv",
            BinOp::SRem => "srem",
            BinOp::FAdd => "fadd",
            BinOp::FSub => "fsub",
            BinOp::FMul => "fmul",
            BinOp::FDiv => "fdiv",
            BinOp::And => "and",
            BinOp::Or => "or",
            BinOp::Xor => "xor",
        }
    }

    /// Element kind the operands must have.
    pub fn accepts(self, e: Elem) -> bool {
        match self {
            BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::SDiv | BinOp::SRem => e == Elem::I32,
            BinOp::FAdd | BinOp::FSub | BinOp::FMul | BinOp::FDiv => e.is_float(),
            BinOp::And | BinOp::Or | BinOp::Xor => e == Elem::I1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Pred {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Pred {
    pub const ALL: [Pred; 6] = [Pred::Eq, Pred::Ne, Pred::Lt, Pred::Le, Pred::Gt, Pred::Ge];

    pub fn icmp_name(self) -> &'static str {
        match self {
            Pred::Eq => "eq",
            Pred::Ne => "ne",
            Pred::Lt => "slt",
            Pred::Le => "sle",
            Pred::Gt => "sgt",
            Pred::Ge => "sge",
        }
    }

    /// Float predicates are ordered except `une`, which is true on NaN.
    pub fn fcmp_name(self) -> &'static str {
        match self {
            Pred::Eq => "oeq",
            Pred::Ne => "une",
            Pred::Lt => "olt",
            Pred::Le => "ole",
            Pred::Gt => "ogt",
            Pred::Ge => "oge",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CastOp {
    SiToFp,
    FpToSi,
    UiToFp,
    ZExt,
    FpTrunc,
    FpExt,
    Bitcast,
}

impl CastOp {
    pub const ALL: [CastOp; 7] =
        [CastOp::SiToFp, CastOp::FpToSi, CastOp::UiToFp, CastOp::ZExt, CastOp::FpTrunc, CastOp::FpExt, CastOp::Bitcast];

    pub fn name(self) -> &'static str {
        match self {
            CastOp::SiToFp => "sitofp",
            CastOp::FpToSi => "fptosi",
            CastOp::UiToFp => "uitofp",
            CastOp::ZExt => "zext",
            CastOp::FpTrunc => "fptrunc",
            CastOp::FpExt => "fpext",
            CastOp::Bitcast => "bitcast",
        }
    }

    /// Valid (source, destination) element pairs.
    pub fn accepts(self, from: Elem, to: Elem) -> bool {
        match self {
            CastOp::SiToFp => from == Elem::I32 && to.is_float(),
            CastOp::FpToSi => from.is_float() && to == Elem::I32,
            CastOp::UiToFp => from == Elem::I1 && to.is_float(),
            CastOp::ZExt => from == Elem::I1 && to == Elem::I32,
            CastOp::FpTrunc => from == Elem::F32 && to == Elem::F16,
            CastOp::FpExt => from == Elem::F16 && to == Elem::F32,
            CastOp::Bitcast => from == to || (from.is_float() && to.is_float()),
        }
    }
}

/// The fixed intrinsic table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Intrinsic {
    FGet,
    FSet,
    Sampler,
    Rsq,
    Sqrt,
    Sin,
    Cos,
    Floor,
    FAbs,
    FMin,
    FMax,
    SMin,
    SMax,
    IAbs,
    Mix,
    Dot,
    Normalize,
}

impl Intrinsic {
    pub const ALL: [Intrinsic; 17] = [
        Intrinsic::FGet,
        Intrinsic::FSet,
        Intrinsic::Sampler,
        Intrinsic::Rsq,
        Intrinsic::Sqrt,
        Intrinsic::Sin,
        Intrinsic::Cos,
        Intrinsic::Floor,
        Intrinsic::FAbs,
        Intrinsic::FMin,
        Intrinsic::FMax,
        Intrinsic::SMin,
        Intrinsic::SMax,
        Intrinsic::IAbs,
        Intrinsic::Mix,
        Intrinsic::Dot,
        Intrinsic::Normalize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Intrinsic::FGet => "llvm.qgpu.fget",
            Intrinsic::FSet => "llvm.qgpu.fset",
            Intrinsic::Sampler => "llvm.qgpu.fsampler",
            Intrinsic::Rsq => "llvm.qgpu.rsqf",
            Intrinsic::Sqrt => "llvm.qgpu.sqrt",
            Intrinsic::Sin => "llvm.qgpu.sin",
            Intrinsic::Cos => "llvm.qgpu.cos",
            Intrinsic::Floor => "llvm.qgpu.floor",
            Intrinsic::FAbs => "llvm.qgpu.fabs",
            Intrinsic::FMin => "llvm.qgpu.fmin",
            Intrinsic::FMax => "llvm.qgpu.fmax",
            Intrinsic::SMin => "llvm.qgpu.smin",
            Intrinsic::SMax => "llvm.qgpu.smax",
            Intrinsic::IAbs => "llvm.qgpu.iabs",
            Intrinsic::Mix => "llvm.qgpu.mix",
            Intrinsic::Dot => "llvm.qgpu.dot",
            Intrinsic::Normalize => "llvm.qgpu.normalize",
        }
    }

    pub fn from_name(name: &str) -> Option<Intrinsic> {
        Intrinsic::ALL.iter().copied().find(|i| i.name() == name)
    }

    /// Intrinsics whose result depends on the execution environment or
    /// that write state.
    pub fn is_env_dependent(self) -> bool {
        matches!(self, Intrinsic::FGet | Intrinsic::FSet | Intrinsic::Sampler)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    Bin(BinOp),
    FNeg,
    ICmp(Pred),
    FCmp(Pred),
    /// `select i1 c, a, b`
    Select,
    /// Incoming blocks, parallel to the operand list.
    Phi(Vec<BlockId>),
    Cast(CastOp),
    /// `extractelement v, i32 k`
    Extract,
    /// `insertelement v, x, i32 k`
    Insert,
    /// Lane gather from one scalar or vector source.
    Shuffle(Vec<u8>),
    Call(Intrinsic),
}

impl Op {
    pub fn mnemonic(&self) -> String {
        match self {
            Op::Bin(b) => b.name().to_string(),
            Op::FNeg => "fneg".into(),
            Op::ICmp(p) => format!("icmp {}", p.icmp_name()),
            Op::FCmp(p) => format!("fcmp {}", p.fcmp_name()),
            Op::Select => "select".into(),
            Op::Phi(_) => "phi".into(),
            Op::Cast(c) => c.name().to_string(),
            Op::Extract => "extractelement".into(),
            Op::Insert => "insertelement".into(),
            Op::Shuffle(_) => "shufflevector".into(),
            Op::Call(i) => format!("call {}", i.name()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Inst {
    pub id: ValueId,
    /// `None` for void results (`fset`).
    pub ty: Option<IrType>,
    pub op: Op,
    pub args: Vec<Operand>,
}

impl Inst {
    pub fn is_phi(&self) -> bool {
        matches!(self.op, Op::Phi(_))
    }

    pub fn is_call(&self, i: Intrinsic) -> bool {
        self.op == Op::Call(i)
    }

    /// Instructions that must not be removed even when unused.
    pub fn has_side_effect(&self) -> bool {
        match &self.op {
            Op::Call(Intrinsic::FSet) => true,
            Op::Bin(BinOp::SDiv | BinOp::SRem) => {
                // Division by a non-zero constant cannot trap.
                !matches!(self.args.get(1), Some(Operand::Const(c)) if c.lanes.iter().all(|l| *l != 0))
            }
            _ => false,
        }
    }

    pub fn value_operands(&self) -> impl Iterator<Item = ValueId> + '_ {
        self.args.iter().filter_map(Operand::value)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Terminator {
    Br(BlockId),
    CondBr(Operand, BlockId, BlockId),
    Switch(Operand, BlockId, Vec<(i32, BlockId)>),
    Ret,
}

impl Terminator {
    pub fn successors(&self) -> Vec<BlockId> {
        match self {
            Terminator::Br(b) => vec![*b],
            Terminator::CondBr(_, t, f) => vec![*t, *f],
            Terminator::Switch(_, d, cases) => {
                let mut v = vec![*d];
                v.extend(cases.iter().map(|c| c.1));
                v
            }
            Terminator::Ret => Vec::new(),
        }
    }

    pub fn operand(&self) -> Option<&Operand> {
        match self {
            Terminator::CondBr(c, ..) | Terminator::Switch(c, ..) => Some(c),
            _ => None,
        }
    }

    pub fn operand_mut(&mut self) -> Option<&mut Operand> {
        match self {
            Terminator::CondBr(c, ..) | Terminator::Switch(c, ..) => Some(c),
            _ => None,
        }
    }

    pub fn retarget(&mut self, from: BlockId, to: BlockId) {
        let fix = |b: &mut BlockId| {
            if *b == from {
                *b = to;
            }
        };
        match self {
            Terminator::Br(b) => fix(b),
            Terminator::CondBr(_, t, f) => {
                fix(t);
                fix(f);
            }
            Terminator::Switch(_, d, cases) => {
                fix(d);
                for c in cases {
                    fix(&mut c.1);
                }
            }
            Terminator::Ret => {}
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub id: BlockId,
    pub insts: Vec<Inst>,
    /// `None` only in malformed modules; `verify` rejects it.
    pub term: Option<Terminator>,
}

impl Block {
    pub fn new(id: BlockId) -> Block {
        Block { id, insts: Vec::new(), term: None }
    }

    pub fn successors(&self) -> Vec<BlockId> {
        self.term.as_ref().map(Terminator::successors).unwrap_or_default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SlotRole {
    Input,
    Output,
    Uniform,
}

impl SlotRole {
    pub fn keyword(self) -> &'static str {
        match self {
            SlotRole::Input => "input",
            SlotRole::Output => "output",
            SlotRole::Uniform => "uniform",
        }
    }
}

/// A global interface slot. `ty == None` marks a sampler.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GlobalSlot {
    pub name: String,
    pub role: SlotRole,
    pub ty: Option<IrType>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Function {
    pub name: String,
    /// The first block is the entry.
    pub blocks: Vec<Block>,
}

pub const ENTRY_NAME: &str = "llvm_main";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IrModule {
    pub globals: Vec<GlobalSlot>,
    pub functions: Vec<Function>,
}

impl Function {
    pub fn block(&self, id: BlockId) -> Option<&Block> {
        self.blocks.iter().find(|b| b.id == id)
    }

    pub fn block_index(&self, id: BlockId) -> Option<usize> {
        self.blocks.iter().position(|b| b.id == id)
    }

    pub fn insts(&self) -> impl Iterator<Item = &Inst> {
        self.blocks.iter().flat_map(|b| b.insts.iter())
    }

    pub fn inst_count(&self) -> usize {
        self.blocks.iter().map(|b| b.insts.len()).sum()
    }

    pub fn next_value_id(&self) -> u32 {
        self.insts().map(|i| i.id.0 + 1).max().unwrap_or(0)
    }

    pub fn next_block_id(&self) -> u32 {
        self.blocks.iter().map(|b| b.id.0 + 1).max().unwrap_or(0)
    }

    /// Result types of every defined value.
    pub fn value_types(&self) -> HashMap<ValueId, Option<IrType>> {
        self.insts().map(|i| (i.id, i.ty)).collect()
    }

    pub fn predecessors(&self) -> HashMap<BlockId, Vec<BlockId>> {
        let mut preds: HashMap<BlockId, Vec<BlockId>> = self.blocks.iter().map(|b| (b.id, Vec::new())).collect();
        for b in &self.blocks {
            let mut seen = BTreeSet::new();
            for s in b.successors() {
                if seen.insert(s) {
                    preds.entry(s).or_default().push(b.id);
                }
            }
        }
        preds
    }

    /// Replaces every use of `from` (instruction operands and terminators).
    pub fn replace_uses(&mut self, from: ValueId, to: &Operand) {
        for b in &mut self.blocks {
            for i in &mut b.insts {
                for a in &mut i.args {
                    if *a == Operand::Value(from) {
                        *a = to.clone();
                    }
                }
            }
            if let Some(op) = b.term.as_mut().and_then(Terminator::operand_mut) {
                if *op == Operand::Value(from) {
                    *op = to.clone();
                }
            }
        }
    }

    pub fn use_counts(&self) -> HashMap<ValueId, usize> {
        let mut counts = HashMap::new();
        for b in &self.blocks {
            for i in &b.insts {
                for v in i.value_operands() {
                    *counts.entry(v).or_insert(0) += 1;
                }
            }
            if let Some(Operand::Value(v)) = b.term.as_ref().and_then(Terminator::operand) {
                *counts.entry(*v).or_insert(0) += 1;
            }
        }
        counts
    }
}

impl IrModule {
    pub fn entry(&self) -> Option<&Function> {
        self.functions.iter().find(|f| f.name == ENTRY_NAME)
    }

    pub fn global(&self, name: &str) -> Option<&GlobalSlot> {
        self.globals.iter().find(|g| g.name == name)
    }

    pub fn output_names(&self) -> Vec<String> {
        self.globals.iter().filter(|g| g.role == SlotRole::Output).map(|g| g.name.clone()).collect()
    }

    pub fn inst_count(&self) -> usize {
        self.functions.iter().map(Function::inst_count).sum()
    }

    /// True when any instruction, operand, or phi carries an f16 type.
    pub fn mentions_f16(&self) -> bool {
        let half = |t: &IrType| t.elem == Elem::F16;
        self.functions.iter().flat_map(|f| f.insts()).any(|i| {
            i.ty.as_ref().is_some_and(half)
                || i.args.iter().any(|a| match a {
                    Operand::Const(c) => half(&c.ty),
                    Operand::Undef(t) => half(t),
                    _ => false,
                })
        })
    }

    /// Count of arithmetic instructions (binary, negation, compare, math
    /// intrinsics) computing on f16 values.
    pub fn f16_arith_count(&self, types: &HashMap<ValueId, Option<IrType>>) -> usize {
        let is_half = |a: &Operand| match a {
            Operand::Value(v) => types.get(v).copied().flatten().is_some_and(|t| t.elem == Elem::F16),
            Operand::Const(c) => c.ty.elem == Elem::F16,
            Operand::Undef(t) => t.elem == Elem::F16,
            Operand::Slot(_) => false,
        };
        self.functions
            .iter()
            .flat_map(|f| f.insts())
            .filter(|i| match &i.op {
                Op::Bin(_) | Op::FNeg | Op::FCmp(_) | Op::Select => i.args.iter().any(is_half) || i.ty.is_some_and(|t| t.elem == Elem::F16),
                Op::Call(c) if !c.is_env_dependent() => i.args.iter().any(is_half),
                _ => false,
            })
            .count()
    }
}
