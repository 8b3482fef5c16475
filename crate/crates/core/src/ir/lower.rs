//! AST to SSA lowering.
//!
//! SSA is built on the fly (Braun et al., "Simple and Efficient
//! Construction of Static Single Assignment Form"): every source variable
//! is an abstract variable, reads look up the reaching definition through
//! predecessors, and phis are placed lazily in unsealed blocks. Trivial
//! phis are aliased away as they are discovered. User functions are inlined.

use std::collections::HashMap;

use thiserror::Error;

use super::types::*;
use crate::exec::eval;
use crate::lang::{self, AssignOp, Expr, ExprKind, Qualifier, Scalar, Stmt, StmtKind, Type, TypedAst, UnOp};

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LowerError {
    #[error("LoweringUnsupported: {0}")]
    Unsupported(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LowerOptions {
    /// When false, `mediump` is ignored and everything lowers to f32.
    pub honor_precision: bool,
}

impl Default for LowerOptions {
    fn default() -> Self {
        LowerOptions { honor_precision: true }
    }
}

pub fn lower(typed: &TypedAst) -> Result<IrModule, LowerError> {
    lower_with(typed, LowerOptions::default())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
struct VarId(u32);

#[derive(Clone, Debug)]
enum Binding {
    Local(VarId),
    /// Read through fget; `half` adds an fptrunc after the read.
    Fetch {
        slot: String,
        ty: IrType,
        half: bool,
    },
    Output {
        slot: String,
        var: VarId,
    },
    Sampler(u32),
}

struct Jump {
    brk: BlockId,
    cont: Option<BlockId>,
}

struct FnCtx {
    exit: BlockId,
    ret: Option<VarId>,
}

struct Builder<'a> {
    typed: &'a TypedAst,
    opts: LowerOptions,
    blocks: Vec<Block>,
    preds: Vec<Vec<BlockId>>,
    sealed: Vec<bool>,
    cur: Option<BlockId>,
    next_value: u32,
    value_types: HashMap<ValueId, IrType>,
    var_types: Vec<IrType>,
    current_def: HashMap<(VarId, BlockId), Operand>,
    incomplete: HashMap<BlockId, Vec<(VarId, ValueId)>>,
    alias: HashMap<ValueId, Operand>,
    globals: HashMap<String, Binding>,
    scopes: Vec<HashMap<String, VarId>>,
    jumps: Vec<Jump>,
    fns: Vec<FnCtx>,
}

fn scalar_elem(s: Scalar) -> Elem {
    match s {
        Scalar::Float => Elem::F32,
        Scalar::Int => Elem::I32,
        Scalar::Bool => Elem::I1,
    }
}

fn ir_type(t: Type) -> Result<IrType, LowerError> {
    match t {
        Type::Scalar(s) => Ok(IrType::new(scalar_elem(s), 1)),
        Type::Vector(s, n) => Ok(IrType::new(scalar_elem(s), n)),
        other => Err(LowerError::Unsupported(format!("no IR value type for {other}"))),
    }
}

pub fn lower_with(typed: &TypedAst, opts: LowerOptions) -> Result<IrModule, LowerError> {
    let ast = &typed.ast;
    let main = ast.main().ok_or_else(|| LowerError::Unsupported("no main".into()))?;
    let mut b = Builder {
        typed,
        opts,
        blocks: Vec::new(),
        preds: Vec::new(),
        sealed: Vec::new(),
        cur: None,
        next_value: 0,
        value_types: HashMap::new(),
        var_types: Vec::new(),
        current_def: HashMap::new(),
        incomplete: HashMap::new(),
        alias: HashMap::new(),
        globals: HashMap::new(),
        scopes: Vec::new(),
        jumps: Vec::new(),
        fns: Vec::new(),
    };
    let entry = b.new_block();
    b.seal(entry);
    b.cur = Some(entry);

    let mut globals = Vec::new();
    let mut sampler_unit = 0;
    for g in &ast.globals {
        if g.ty == Type::Sampler2D {
            globals.push(GlobalSlot { name: g.name.clone(), role: SlotRole::Uniform, ty: None });
            b.globals.insert(g.name.clone(), Binding::Sampler(sampler_unit));
            sampler_unit += 1;
            continue;
        }
        let ty = ir_type(g.ty)?;
        let half = b.is_half(g.precision, g.ty);
        let role = match g.qualifier {
            Qualifier::In => SlotRole::Input,
            Qualifier::Out => SlotRole::Output,
            Qualifier::Uniform => SlotRole::Uniform,
        };
        globals.push(GlobalSlot { name: g.name.clone(), role, ty: Some(ty) });
        let binding = if role == SlotRole::Output {
            let vty = if half { ty.with_elem(Elem::F16) } else { ty };
            let var = b.new_var(vty);
            b.write_var(var, entry, Operand::Const(Const::zero(vty)));
            Binding::Output { slot: g.name.clone(), var }
        } else {
            Binding::Fetch { slot: g.name.clone(), ty, half }
        };
        b.globals.insert(g.name.clone(), binding);
    }

    let exit = b.new_block();
    b.fns.push(FnCtx { exit, ret: None });
    b.scopes.push(HashMap::new());
    b.block(&main.body)?;
    b.scopes.pop();
    if b.cur.is_some() {
        b.br(exit);
    }
    b.seal(exit);
    b.cur = Some(exit);
    b.set_term(Terminator::Ret);

    let func = b.finish();
    let mut m = IrModule { globals, functions: vec![Function { name: ENTRY_NAME.into(), blocks: func }] };
    super::cleanup::remove_unreachable(&mut m.functions[0]);
    super::cleanup::merge_straight_line(&mut m.functions[0]);
    Ok(m)
}

impl<'a> Builder<'a> {
    fn is_half(&self, precision: Option<lang::Precision>, t: Type) -> bool {
        self.opts.honor_precision && precision == Some(lang::Precision::Mediump) && t.scalar() == Some(Scalar::Float)
    }

    // ---- blocks and instructions ----

    fn new_block(&mut self) -> BlockId {
        let id = BlockId(self.blocks.len() as u32);
        self.blocks.push(Block::new(id));
        self.preds.push(Vec::new());
        self.sealed.push(false);
        id
    }

    /// The current block, creating a detached one when lowering code that
    /// follows a jump.
    fn cur_block(&mut self) -> BlockId {
        match self.cur {
            Some(b) => b,
            None => {
                let b = self.new_block();
                self.seal(b);
                self.cur = Some(b);
                b
            }
        }
    }

    fn set_term(&mut self, t: Terminator) {
        let b = self.cur_block();
        let mut seen = Vec::new();
        for s in t.successors() {
            if !seen.contains(&s) {
                seen.push(s);
                self.preds[s.0 as usize].push(b);
            }
        }
        self.blocks[b.0 as usize].term = Some(t);
        self.cur = None;
    }

    fn br(&mut self, target: BlockId) {
        self.set_term(Terminator::Br(target));
    }

    fn has_preds(&self, b: BlockId) -> bool {
        !self.preds[b.0 as usize].is_empty()
    }

    /// Continue in `b` if anything can reach it.
    fn enter(&mut self, b: BlockId) {
        self.cur = self.has_preds(b).then_some(b);
    }

    fn fresh(&mut self, ty: IrType) -> ValueId {
        let v = ValueId(self.next_value);
        self.next_value += 1;
        self.value_types.insert(v, ty);
        v
    }

    fn emit(&mut self, op: Op, ty: IrType, args: Vec<Operand>) -> Operand {
        let b = self.cur_block();
        let id = self.fresh(ty);
        self.blocks[b.0 as usize].insts.push(Inst { id, ty: Some(ty), op, args });
        Operand::Value(id)
    }

    fn emit_void(&mut self, op: Op, args: Vec<Operand>) {
        let b = self.cur_block();
        let id = ValueId(self.next_value);
        self.next_value += 1;
        self.blocks[b.0 as usize].insts.push(Inst { id, ty: None, op, args });
    }

    fn type_of(&self, o: &Operand) -> IrType {
        match o {
            Operand::Value(v) => self.value_types[v],
            Operand::Const(c) => c.ty,
            Operand::Undef(t) => *t,
            Operand::Slot(_) => unreachable!("slots are not values"),
        }
    }

    // ---- SSA construction ----

    fn new_var(&mut self, ty: IrType) -> VarId {
        self.var_types.push(ty);
        VarId(self.var_types.len() as u32 - 1)
    }

    fn write_var(&mut self, v: VarId, b: BlockId, val: Operand) {
        self.current_def.insert((v, b), val);
    }

    fn resolve(&self, mut o: Operand) -> Operand {
        while let Operand::Value(v) = o {
            match self.alias.get(&v) {
                Some(next) => o = next.clone(),
                None => break,
            }
        }
        o
    }

    fn read_var(&mut self, v: VarId, b: BlockId) -> Operand {
        if let Some(val) = self.current_def.get(&(v, b)) {
            return self.resolve(val.clone());
        }
        self.read_var_recursive(v, b)
    }

    fn read_var_recursive(&mut self, v: VarId, b: BlockId) -> Operand {
        let ty = self.var_types[v.0 as usize];
        let preds = self.preds[b.0 as usize].clone();
        let val = if !self.sealed[b.0 as usize] {
            let phi = self.new_phi(b, ty);
            self.incomplete.entry(b).or_default().push((v, phi));
            Operand::Value(phi)
        } else if preds.is_empty() {
            // No reaching definition: a declaration skipped by a jump.
            Operand::Const(Const::zero(ty))
        } else if preds.len() == 1 {
            self.read_var(v, preds[0])
        } else {
            let phi = self.new_phi(b, ty);
            self.write_var(v, b, Operand::Value(phi));
            self.add_phi_operands(v, phi, b)
        };
        self.write_var(v, b, val.clone());
        val
    }

    fn new_phi(&mut self, b: BlockId, ty: IrType) -> ValueId {
        let id = self.fresh(ty);
        let insts = &mut self.blocks[b.0 as usize].insts;
        let at = insts.iter().take_while(|i| i.is_phi()).count();
        insts.insert(at, Inst { id, ty: Some(ty), op: Op::Phi(Vec::new()), args: Vec::new() });
        id
    }

    fn add_phi_operands(&mut self, v: VarId, phi: ValueId, b: BlockId) -> Operand {
        let preds = self.preds[b.0 as usize].clone();
        let mut args = Vec::with_capacity(preds.len());
        for p in &preds {
            args.push(self.read_var(v, *p));
        }
        let inst = self.blocks[b.0 as usize].insts.iter_mut().find(|i| i.id == phi).expect("phi exists");
        inst.op = Op::Phi(preds);
        inst.args = args;
        self.try_remove_trivial_phi(phi, b)
    }

    fn try_remove_trivial_phi(&mut self, phi: ValueId, b: BlockId) -> Operand {
        let inst = self.blocks[b.0 as usize].insts.iter().find(|i| i.id == phi).expect("phi exists");
        let ty = inst.ty.expect("phi has a type");
        let mut same: Option<Operand> = None;
        for a in inst.args.clone() {
            let a = self.resolve(a);
            if Some(&a) == same.as_ref() || a == Operand::Value(phi) {
                continue;
            }
            if same.is_some() {
                return Operand::Value(phi);
            }
            same = Some(a);
        }
        let same = same.unwrap_or(Operand::Undef(ty));
        self.alias.insert(phi, same.clone());
        same
    }

    fn seal(&mut self, b: BlockId) {
        if let Some(pending) = self.incomplete.remove(&b) {
            for (v, phi) in pending {
                self.add_phi_operands(v, phi, b);
            }
        }
        self.sealed[b.0 as usize] = true;
    }

    /// Drops aliased phis and rewrites every operand through the alias map.
    fn finish(mut self) -> Vec<Block> {
        let mut blocks = std::mem::take(&mut self.blocks);
        for b in &mut blocks {
            b.insts.retain(|i| !self.alias.contains_key(&i.id));
            for i in &mut b.insts {
                for a in &mut i.args {
                    *a = self.resolve(a.clone());
                }
            }
            if let Some(op) = b.term.as_mut().and_then(Terminator::operand_mut) {
                *op = self.resolve(op.clone());
            }
            if b.term.is_none() {
                // Detached blocks created after jumps.
                b.term = Some(Terminator::Ret);
            }
        }
        blocks
    }

    // ---- names ----

    fn lookup(&self, name: &str) -> Binding {
        for s in self.scopes.iter().rev() {
            if let Some(v) = s.get(name) {
                return Binding::Local(*v);
            }
        }
        self.globals.get(name).cloned().unwrap_or_else(|| panic!("typechecked: `{name}` is declared"))
    }

    fn read_name(&mut self, name: &str) -> Operand {
        match self.lookup(name) {
            Binding::Local(v) | Binding::Output { var: v, .. } => {
                let b = self.cur_block();
                self.read_var(v, b)
            }
            Binding::Fetch { slot, ty, half } => {
                let val = self.emit(Op::Call(Intrinsic::FGet), ty, vec![Operand::Slot(slot)]);
                if half {
                    self.to_half(val)
                } else {
                    val
                }
            }
            Binding::Sampler(_) => unreachable!("samplers are only texture2D arguments"),
        }
    }

    fn write_name(&mut self, name: &str, val: Operand) {
        let b = self.cur_block();
        match self.lookup(name) {
            Binding::Local(v) => {
                let val = self.coerce_float(val, self.var_types[v.0 as usize]);
                self.write_var(v, b, val);
            }
            Binding::Output { slot, var } => {
                let val = self.coerce_float(val, self.var_types[var.0 as usize]);
                self.write_var(var, b, val.clone());
                let single = self.to_single(val);
                self.emit_void(Op::Call(Intrinsic::FSet), vec![Operand::Slot(slot), single]);
            }
            _ => unreachable!("typechecked: assignment target"),
        }
    }

    fn name_type(&self, name: &str) -> IrType {
        match self.lookup(name) {
            Binding::Local(v) | Binding::Output { var: v, .. } => self.var_types[v.0 as usize],
            Binding::Fetch { ty, half: true, .. } => ty.with_elem(Elem::F16),
            Binding::Fetch { ty, .. } => ty,
            Binding::Sampler(_) => unreachable!(),
        }
    }

    // ---- precision ----

    fn to_half(&mut self, o: Operand) -> Operand {
        let ty = self.type_of(&o);
        if ty.elem != Elem::F32 {
            return o;
        }
        let hty = ty.with_elem(Elem::F16);
        match o {
            Operand::Const(c) => Operand::Const(Const { ty: hty, lanes: c.lanes }),
            Operand::Undef(_) => Operand::Undef(hty),
            v => self.emit(Op::Cast(CastOp::FpTrunc), hty, vec![v]),
        }
    }

    fn to_single(&mut self, o: Operand) -> Operand {
        let ty = self.type_of(&o);
        if ty.elem != Elem::F16 {
            return o;
        }
        let sty = ty.with_elem(Elem::F32);
        match o {
            Operand::Const(c) => Operand::Const(Const { ty: sty, lanes: c.lanes }),
            Operand::Undef(_) => Operand::Undef(sty),
            v => self.emit(Op::Cast(CastOp::FpExt), sty, vec![v]),
        }
    }

    fn coerce_float(&mut self, o: Operand, want: IrType) -> Operand {
        match want.elem {
            Elem::F16 => self.to_half(o),
            Elem::F32 => self.to_single(o),
            _ => o,
        }
    }

    /// Brings two float operands to a common precision: half only when
    /// both are half, or one is half and the other a constant.
    fn unify(&mut self, a: Operand, b: Operand) -> (Operand, Operand) {
        let (ta, tb) = (self.type_of(&a), self.type_of(&b));
        if !ta.elem.is_float() || ta.elem == tb.elem && !matches!(a, Operand::Const(_)) && !matches!(b, Operand::Const(_)) {
            return (a, b);
        }
        let half_a = ta.elem == Elem::F16;
        let half_b = tb.elem == Elem::F16;
        let use_half = (half_a && (half_b || matches!(b, Operand::Const(_)))) || (half_b && matches!(a, Operand::Const(_)));
        if use_half {
            (self.to_half(a), self.to_half(b))
        } else {
            (self.to_single(a), self.to_single(b))
        }
    }

    // ---- statements ----

    fn block(&mut self, b: &lang::Block) -> Result<(), LowerError> {
        self.scopes.push(HashMap::new());
        let r = self.stmts(&b.stmts);
        self.scopes.pop();
        r
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Result<(), LowerError> {
        for s in stmts {
            if self.cur.is_some() {
                self.stmt(s)?;
            } else if let StmtKind::Decl { precision, ty, name, .. } = &s.kind {
                // Unreachable, but later switch cases may still name it.
                let mut irt = ir_type(*ty)?;
                if self.is_half(*precision, *ty) {
                    irt = irt.with_elem(Elem::F16);
                }
                self.decl_var(name, irt);
            }
        }
        Ok(())
    }

    fn scoped(&mut self, s: &Stmt) -> Result<(), LowerError> {
        self.scopes.push(HashMap::new());
        let r = self.stmt(s);
        self.scopes.pop();
        r
    }

    /// Variable for a declaration; reuses one pre-registered in the same scope.
    fn decl_var(&mut self, name: &str, ty: IrType) -> VarId {
        if let Some(v) = self.scopes.last().unwrap().get(name) {
            return *v;
        }
        let v = self.new_var(ty);
        self.scopes.last_mut().unwrap().insert(name.to_string(), v);
        v
    }

    fn declare(&mut self, name: &str, ty: IrType, init: Operand) {
        let v = self.decl_var(name, ty);
        let init = self.coerce_float(init, ty);
        let b = self.cur_block();
        self.write_var(v, b, init);
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), LowerError> {
        match &s.kind {
            StmtKind::Decl { precision, ty, name, init } => {
                let mut irt = ir_type(*ty)?;
                if self.is_half(*precision, *ty) {
                    irt = irt.with_elem(Elem::F16);
                }
                let v = match init {
                    Some(e) => self.expr(e)?,
                    None => Operand::Const(Const::zero(irt)),
                };
                self.declare(name, irt, v);
            }
            StmtKind::Assign { target, op, value } => {
                let new = match (op, value) {
                    (AssignOp::Set, Some(e)) => self.expr(e)?,
                    (AssignOp::Inc | AssignOp::Dec, _) => {
                        let cur = self.read_name(target);
                        let ty = self.type_of(&cur);
                        let one = if ty.elem.is_float() { Const::splat(ty, 1.0f32.to_bits()) } else { Const::splat(ty, 1) };
                        let bop = if *op == AssignOp::Inc { lang::BinOp::Add } else { lang::BinOp::Sub };
                        self.arith(bop, cur, Operand::Const(one))
                    }
                    (_, Some(e)) => {
                        let cur = self.read_name(target);
                        let rhs = self.expr(e)?;
                        self.arith(op.binary().expect("compound"), cur, rhs)
                    }
                    (_, None) => return Err(LowerError::Unsupported("assignment without value".into())),
                };
                self.write_name(target, new);
            }
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::Block(b) => self.block(b)?,
            StmtKind::If { cond, then_branch, else_branch } => {
                let c = self.expr(cond)?;
                let then_b = self.new_block();
                let merge = self.new_block();
                let else_b = if else_branch.is_some() { self.new_block() } else { merge };
                self.set_term(Terminator::CondBr(c, then_b, else_b));
                self.seal(then_b);
                self.cur = Some(then_b);
                self.scoped(then_branch)?;
                if self.cur.is_some() {
                    self.br(merge);
                }
                if let Some(e) = else_branch {
                    self.seal(else_b);
                    self.cur = Some(else_b);
                    self.scoped(e)?;
                    if self.cur.is_some() {
                        self.br(merge);
                    }
                }
                self.seal(merge);
                self.enter(merge);
            }
            StmtKind::Switch { selector, cases } => {
                let sel = self.expr(selector)?;
                let exit = self.new_block();
                let case_blocks: Vec<BlockId> = cases.iter().map(|_| self.new_block()).collect();
                let default = cases.iter().position(|c| c.label.is_none()).map(|k| case_blocks[k]).unwrap_or(exit);
                let labeled = cases.iter().zip(&case_blocks).filter_map(|(c, b)| c.label.map(|l| (l, *b))).collect();
                let here = self.cur_block();
                self.set_term(Terminator::Switch(sel, default, labeled));
                self.jumps.push(Jump { brk: exit, cont: None });
                self.scopes.push(HashMap::new());
                // Case-level declarations are zero on every entry into the switch.
                for c in cases {
                    for st in &c.body {
                        if let StmtKind::Decl { precision, ty, name, .. } = &st.kind {
                            let mut irt = ir_type(*ty)?;
                            if self.is_half(*precision, *ty) {
                                irt = irt.with_elem(Elem::F16);
                            }
                            let v = self.decl_var(name, irt);
                            self.write_var(v, here, Operand::Const(Const::zero(irt)));
                        }
                    }
                }
                for (k, c) in cases.iter().enumerate() {
                    let b = case_blocks[k];
                    if self.cur.is_some() {
                        self.br(b);
                    }
                    self.seal(b);
                    self.cur = Some(b);
                    self.stmts(&c.body)?;
                }
                if self.cur.is_some() {
                    self.br(exit);
                }
                self.scopes.pop();
                self.jumps.pop();
                self.seal(exit);
                self.enter(exit);
            }
            StmtKind::For { init, cond, step, body } => {
                self.scopes.push(HashMap::new());
                if let Some(i) = init {
                    self.stmt(i)?;
                }
                let header = self.new_block();
                let body_b = self.new_block();
                let latch = self.new_block();
                let exit = self.new_block();
                self.br(header);
                self.cur = Some(header);
                match cond {
                    Some(c) => {
                        let c = self.expr(c)?;
                        self.set_term(Terminator::CondBr(c, body_b, exit));
                    }
                    None => self.br(body_b),
                }
                self.seal(body_b);
                self.cur = Some(body_b);
                self.jumps.push(Jump { brk: exit, cont: Some(latch) });
                self.scoped(body)?;
                self.jumps.pop();
                if self.cur.is_some() {
                    self.br(latch);
                }
                self.seal(latch);
                if self.has_preds(latch) {
                    self.cur = Some(latch);
                    if let Some(s) = step {
                        self.stmt(s)?;
                    }
                    self.br(header);
                }
                self.seal(header);
                self.seal(exit);
                self.enter(exit);
                self.scopes.pop();
            }
            StmtKind::While { cond, body } => {
                let header = self.new_block();
                let body_b = self.new_block();
                let exit = self.new_block();
                self.br(header);
                self.cur = Some(header);
                let c = self.expr(cond)?;
                self.set_term(Terminator::CondBr(c, body_b, exit));
                self.seal(body_b);
                self.cur = Some(body_b);
                self.jumps.push(Jump { brk: exit, cont: Some(header) });
                self.scoped(body)?;
                self.jumps.pop();
                if self.cur.is_some() {
                    self.br(header);
                }
                self.seal(header);
                self.seal(exit);
                self.enter(exit);
            }
            StmtKind::DoWhile { body, cond } => {
                let body_b = self.new_block();
                let cond_b = self.new_block();
                let exit = self.new_block();
                self.br(body_b);
                self.cur = Some(body_b);
                self.jumps.push(Jump { brk: exit, cont: Some(cond_b) });
                self.scoped(body)?;
                self.jumps.pop();
                if self.cur.is_some() {
                    self.br(cond_b);
                }
                self.seal(cond_b);
                if self.has_preds(cond_b) {
                    self.cur = Some(cond_b);
                    let c = self.expr(cond)?;
                    self.set_term(Terminator::CondBr(c, body_b, exit));
                }
                self.seal(body_b);
                self.seal(exit);
                self.enter(exit);
            }
            StmtKind::Break => {
                let t = self.jumps.last().expect("parser: break inside loop or switch").brk;
                self.br(t);
            }
            StmtKind::Continue => {
                let t = self.jumps.iter().rev().find_map(|j| j.cont).expect("parser: continue inside loop");
                self.br(t);
            }
            StmtKind::Return(e) => {
                let val = match e {
                    Some(e) => Some(self.expr(e)?),
                    None => None,
                };
                let ctx = self.fns.last().expect("inside a function");
                let (exit, ret) = (ctx.exit, ctx.ret);
                if let (Some(r), Some(v)) = (ret, val) {
                    let v = self.coerce_float(v, self.var_types[r.0 as usize]);
                    let b = self.cur_block();
                    self.write_var(r, b, v);
                }
                self.br(exit);
            }
        }
        Ok(())
    }

    // ---- expressions ----

    fn expr_type(&self, e: &Expr) -> Type {
        self.typed.type_of(e)
    }

    /// Whether evaluating `e` unconditionally is unobservable: no integer
    /// division (which may trap) and no user calls.
    fn speculatable(&self, e: &Expr) -> bool {
        let mut ok = true;
        e.visit(&mut |x| match &x.kind {
            ExprKind::Binary(lang::BinOp::Div | lang::BinOp::Rem, a, _) if self.typed.type_of(a).scalar() == Some(Scalar::Int) => {
                ok = false
            }
            ExprKind::Call(name, _) if Type::from_name(name).is_none() && !lang::typeck::is_builtin(name) => ok = false,
            _ => {}
        });
        ok
    }

    fn expr(&mut self, e: &Expr) -> Result<Operand, LowerError> {
        Ok(match &e.kind {
            ExprKind::FloatLit(b) => Operand::Const(Const { ty: IrType::F32, lanes: vec![*b] }),
            ExprKind::IntLit(i) => Operand::Const(Const::i32(*i)),
            ExprKind::BoolLit(b) => Operand::Const(Const::bool(*b)),
            ExprKind::Var(n) => self.read_name(n),
            ExprKind::Unary(op, a) => {
                let v = self.expr(a)?;
                let ty = self.type_of(&v);
                match (op, ty.elem) {
                    (UnOp::Neg, Elem::F16 | Elem::F32) => self.emit(Op::FNeg, ty, vec![v]),
                    (UnOp::Neg, _) => self.emit(Op::Bin(BinOp::Sub), ty, vec![Operand::Const(Const::zero(ty)), v]),
                    (UnOp::Not, _) => self.emit(Op::Bin(BinOp::Xor), ty, vec![v, Operand::Const(Const::splat(ty, 1))]),
                }
            }
            ExprKind::Binary(op @ (lang::BinOp::And | lang::BinOp::Or), a, b) => {
                let l = self.expr(a)?;
                if self.speculatable(b) {
                    let r = self.expr(b)?;
                    let bop = if *op == lang::BinOp::And { BinOp::And } else { BinOp::Or };
                    self.emit(Op::Bin(bop), IrType::I1, vec![l, r])
                } else {
                    let tmp = self.new_var(IrType::I1);
                    let here = self.cur_block();
                    self.write_var(tmp, here, l.clone());
                    let rhs_b = self.new_block();
                    let merge = self.new_block();
                    let t = if *op == lang::BinOp::And { Terminator::CondBr(l, rhs_b, merge) } else { Terminator::CondBr(l, merge, rhs_b) };
                    self.set_term(t);
                    self.seal(rhs_b);
                    self.cur = Some(rhs_b);
                    let r = self.expr(b)?;
                    let rb = self.cur_block();
                    self.write_var(tmp, rb, r);
                    self.br(merge);
                    self.seal(merge);
                    self.cur = Some(merge);
                    self.read_var(tmp, merge)
                }
            }
            ExprKind::Binary(op, a, b) => {
                let l = self.expr(a)?;
                let r = self.expr(b)?;
                if op.is_comparison() {
                    self.compare(*op, l, r)
                } else {
                    self.arith(*op, l, r)
                }
            }
            ExprKind::Ternary(c, a, b) => {
                let cv = self.expr(c)?;
                if self.speculatable(a) && self.speculatable(b) {
                    let x = self.expr(a)?;
                    let y = self.expr(b)?;
                    let (x, y) = self.unify(x, y);
                    let ty = self.type_of(&x);
                    self.emit(Op::Select, ty, vec![cv, x, y])
                } else {
                    let mut ty = ir_type(self.expr_type(e))?;
                    let arm_half = |s: &Self, x: &Expr| s.half_expr(x);
                    if arm_half(self, a) && arm_half(self, b) {
                        ty = ty.with_elem(Elem::F16);
                    }
                    let tmp = self.new_var(ty);
                    let tb = self.new_block();
                    let fb = self.new_block();
                    let merge = self.new_block();
                    self.set_term(Terminator::CondBr(cv, tb, fb));
                    for (blk, arm) in [(tb, a), (fb, b)] {
                        self.seal(blk);
                        self.cur = Some(blk);
                        let v = self.expr(arm)?;
                        let v = self.coerce_float(v, ty);
                        let end = self.cur_block();
                        self.write_var(tmp, end, v);
                        self.br(merge);
                    }
                    self.seal(merge);
                    self.cur = Some(merge);
                    self.read_var(tmp, merge)
                }
            }
            ExprKind::Swizzle(base, sw) => {
                let v = self.expr(base)?;
                let lanes = lang::swizzle_lanes(sw).expect("parser validated swizzle");
                self.shuffle(v, &lanes)
            }
            ExprKind::Call(name, args) => self.call(e, name, args)?,
        })
    }

    /// Whether an expression lowers to a half-typed value.
    fn half_expr(&self, e: &Expr) -> bool {
        match &e.kind {
            ExprKind::Var(n) => self.name_type(n).elem == Elem::F16,
            ExprKind::Swizzle(b, _) | ExprKind::Unary(_, b) => self.half_expr(b),
            _ => false,
        }
    }

    fn shuffle(&mut self, v: Operand, lanes: &[u8]) -> Operand {
        let ty = self.type_of(&v);
        if lanes.len() == ty.lanes as usize && lanes.iter().enumerate().all(|(k, l)| *l as usize == k) {
            return v;
        }
        let out_ty = ty.with_lanes(lanes.len() as u8);
        if let Operand::Const(c) = &v {
            return Operand::Const(Const { ty: out_ty, lanes: lanes.iter().map(|l| c.lanes[*l as usize]).collect() });
        }
        if lanes.len() == 1 && ty.is_vector() {
            return self.emit(Op::Extract, out_ty, vec![v, Operand::Const(Const::i32(lanes[0] as i32))]);
        }
        self.emit(Op::Shuffle(lanes.to_vec()), out_ty, vec![v])
    }

    fn splat_to(&mut self, v: Operand, lanes: u8) -> Operand {
        let ty = self.type_of(&v);
        if ty.lanes == lanes {
            return v;
        }
        self.shuffle(v, &vec![0; lanes as usize])
    }

    fn arith(&mut self, op: lang::BinOp, l: Operand, r: Operand) -> Operand {
        let (l, r) = self.unify(l, r);
        let n = self.type_of(&l).lanes.max(self.type_of(&r).lanes);
        let l = self.splat_to(l, n);
        let r = self.splat_to(r, n);
        let ty = self.type_of(&l);
        let float = ty.elem.is_float();
        let bop = match op {
            lang::BinOp::Add if float => BinOp::FAdd,
            lang::BinOp::Sub if float => BinOp::FSub,
            lang::BinOp::Mul if float => BinOp::FMul,
            lang::BinOp::Div if float => BinOp::FDiv,
            lang::BinOp::Add => BinOp::Add,
            lang::BinOp::Sub => BinOp::Sub,
            lang::BinOp::Mul => BinOp::Mul,
            lang::BinOp::Div => BinOp::SDiv,
            lang::BinOp::Rem => BinOp::SRem,
            _ => unreachable!("not arithmetic"),
        };
        self.emit(Op::Bin(bop), ty, vec![l, r])
    }

    fn compare(&mut self, op: lang::BinOp, l: Operand, r: Operand) -> Operand {
        let (l, r) = self.unify(l, r);
        let pred = match op {
            lang::BinOp::Lt => Pred::Lt,
            lang::BinOp::Le => Pred::Le,
            lang::BinOp::Gt => Pred::Gt,
            lang::BinOp::Ge => Pred::Ge,
            lang::BinOp::Eq => Pred::Eq,
            _ => Pred::Ne,
        };
        let op = if self.type_of(&l).elem.is_float() { Op::FCmp(pred) } else { Op::ICmp(pred) };
        self.emit(op, IrType::I1, vec![l, r])
    }

    /// Converts lanes to another scalar kind, keeping the lane count.
    fn convert(&mut self, v: Operand, to: Elem) -> Operand {
        let ty = self.type_of(&v);
        let from = ty.elem;
        if from == to || (from.is_float() && to.is_float()) {
            return if to == Elem::F32 { self.to_single(v) } else { v };
        }
        let v = self.to_single(v);
        let from = self.type_of(&v).elem;
        let out = ty.with_elem(to);
        if let Operand::Const(c) = &v {
            return Operand::Const(Const { ty: out, lanes: eval::convert_lanes(from, to, &c.lanes) });
        }
        match (from, to) {
            (Elem::I32, Elem::F32) => self.emit(Op::Cast(CastOp::SiToFp), out, vec![v]),
            (Elem::F32, Elem::I32) => self.emit(Op::Cast(CastOp::FpToSi), out, vec![v]),
            (Elem::I1, Elem::F32) => self.emit(Op::Cast(CastOp::UiToFp), out, vec![v]),
            (Elem::I1, Elem::I32) => self.emit(Op::Cast(CastOp::ZExt), out, vec![v]),
            (Elem::I32, Elem::I1) => {
                let zero = Operand::Const(Const::zero(ty.with_elem(Elem::I32)));
                self.emit(Op::ICmp(Pred::Ne), out, vec![v, zero])
            }
            (Elem::F32, Elem::I1) => {
                let zero = Operand::Const(Const::zero(ty.with_elem(Elem::F32)));
                self.emit(Op::FCmp(Pred::Ne), out, vec![v, zero])
            }
            _ => unreachable!(),
        }
    }

    fn construct(&mut self, t: Type, args: Vec<Operand>) -> Result<Operand, LowerError> {
        let ty = ir_type(t)?;
        let want = ty.lanes as usize;
        let conv: Vec<Operand> = args.into_iter().map(|a| self.convert(a, ty.elem)).collect();
        if conv.len() == 1 {
            let a = conv.into_iter().next().unwrap();
            let n = self.type_of(&a).lanes as usize;
            let lanes: Vec<u8> = if n == 1 { vec![0; want] } else { (0..want as u8).collect() };
            return Ok(self.shuffle(a, &lanes));
        }
        if conv.iter().all(|a| matches!(a, Operand::Const(_))) {
            let lanes: Vec<u32> = conv.iter().flat_map(|a| a.as_const().unwrap().lanes.clone()).take(want).collect();
            return Ok(Operand::Const(Const { ty, lanes }));
        }
        let mut acc = Operand::Const(Const::zero(ty));
        let mut k = 0;
        'outer: for a in conv {
            let aty = self.type_of(&a);
            for l in 0..aty.lanes {
                if k == want {
                    break 'outer;
                }
                let lane = if aty.is_vector() { self.shuffle(a.clone(), &[l]) } else { a.clone() };
                acc = match (&acc, &lane) {
                    (Operand::Const(c), Operand::Const(x)) => {
                        let mut c = c.clone();
                        c.lanes[k] = x.lanes[0];
                        Operand::Const(c)
                    }
                    _ => self.emit(Op::Insert, ty, vec![acc, lane, Operand::Const(Const::i32(k as i32))]),
                };
                k += 1;
            }
        }
        Ok(acc)
    }

    fn call(&mut self, e: &Expr, name: &str, args: &[Expr]) -> Result<Operand, LowerError> {
        if let Some(t) = Type::from_name(name) {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                vals.push(self.expr(a)?);
            }
            return self.construct(t, vals);
        }
        if name == "texture2D" {
            let ExprKind::Var(s) = &args[0].kind else { unreachable!("typechecked texture2D") };
            let Binding::Sampler(unit) = self.lookup(s) else { unreachable!("typechecked sampler") };
            let uv = self.expr(&args[1])?;
            let uv = self.to_single(uv);
            let args = vec![Operand::Const(Const::i32(unit as i32)), uv, Operand::Const(Const::f32(0.0))];
            return Ok(self.emit(Op::Call(Intrinsic::Sampler), IrType::new(Elem::F32, 4), args));
        }
        if lang::typeck::is_builtin(name) {
            let mut vals = Vec::with_capacity(args.len());
            for a in args {
                let v = self.expr(a)?;
                vals.push(self.to_single(v));
            }
            return Ok(self.builtin(name, vals));
        }
        self.inline_call(e, name, args)
    }

    fn builtin(&mut self, name: &str, mut vals: Vec<Operand>) -> Operand {
        let ty = self.type_of(&vals[0]);
        let float = ty.elem.is_float();
        let intr = match name {
            "mix" => Intrinsic::Mix,
            "min" if float => Intrinsic::FMin,
            "min" => Intrinsic::SMin,
            "max" if float => Intrinsic::FMax,
            "max" => Intrinsic::SMax,
            "abs" if float => Intrinsic::FAbs,
            "abs" => Intrinsic::IAbs,
            "sqrt" => Intrinsic::Sqrt,
            "inversesqrt" => Intrinsic::Rsq,
            "sin" => Intrinsic::Sin,
            "cos" => Intrinsic::Cos,
            "floor" => Intrinsic::Floor,
            "dot" => Intrinsic::Dot,
            "normalize" => Intrinsic::Normalize,
            "clamp" => {
                let (lo, hi) = (vals[1].clone(), vals[2].clone());
                let lo = self.splat_to(lo, ty.lanes);
                let hi = self.splat_to(hi, ty.lanes);
                let (mx, mn) = if float { (Intrinsic::FMax, Intrinsic::FMin) } else { (Intrinsic::SMax, Intrinsic::SMin) };
                let t = self.emit(Op::Call(mx), ty, vec![vals[0].clone(), lo]);
                return self.emit(Op::Call(mn), ty, vec![t, hi]);
            }
            _ => unreachable!("typechecked builtin `{name}`"),
        };
        if matches!(intr, Intrinsic::FMin | Intrinsic::FMax | Intrinsic::SMin | Intrinsic::SMax) {
            vals[1] = self.splat_to(vals[1].clone(), ty.lanes);
        }
        let rty = if intr == Intrinsic::Dot { ty.scalar() } else { ty };
        self.emit(Op::Call(intr), rty, vals)
    }

    fn inline_call(&mut self, e: &Expr, name: &str, args: &[Expr]) -> Result<Operand, LowerError> {
        let f = self.typed.ast.function(name).expect("typechecked call");
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.expr(a)?);
        }
        let saved_scopes = std::mem::take(&mut self.scopes);
        let saved_jumps = std::mem::take(&mut self.jumps);
        self.scopes.push(HashMap::new());
        for (p, v) in f.params.iter().zip(vals) {
            let mut ty = ir_type(p.ty)?;
            if self.is_half(p.precision, p.ty) {
                ty = ty.with_elem(Elem::F16);
            }
            self.declare(&p.name, ty, v);
        }
        let exit = self.new_block();
        let ret = if f.ret == Type::Void { None } else { Some(self.new_var(ir_type(f.ret)?)) };
        self.fns.push(FnCtx { exit, ret });
        self.block(&f.body)?;
        self.fns.pop();
        if self.cur.is_some() {
            self.br(exit);
        }
        self.seal(exit);
        self.scopes = saved_scopes;
        self.jumps = saved_jumps;
        self.enter(exit);
        Ok(match ret {
            Some(r) => {
                let b = self.cur_block();
                self.read_var(r, b)
            }
            None => Operand::Const(Const::zero(ir_type(self.expr_type(e)).unwrap_or(IrType::I1))),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{print_module, verify};
    use crate::lang::check_text;

    fn lower_src(src: &str) -> IrModule {
        let m = lower(&check_text(src).unwrap()).unwrap();
        verify(&m).unwrap_or_else(|e| panic!("{e}\n{}", print_module(&m)));
        m
    }

    #[test]
    fn copy_input_to_output() {
        let m = lower_src("in vec4 a_color; out vec4 v_out; void main() { v_out = a_color; }");
        let text = print_module(&m);
        assert!(text.contains("@a_color = input global <4 x float>"), "{text}");
        assert!(text.contains("call <4 x float> @llvm.qgpu.fget(@a_color)"), "{text}");
        assert!(text.contains("call void @llvm.qgpu.fset(@v_out, %0)"), "{text}");
    }

    #[test]
    fn mediump_declaration_truncates() {
        let m = lower_src("in float x; out float o; void main() { mediump float h = x; o = h; }");
        let text = print_module(&m);
        assert!(text.contains("fptrunc half %0"), "{text}");
        assert!(text.contains("fpext float"), "{text}");
    }

    #[test]
    fn empty_main_is_a_single_return() {
        let m = lower_src("void main() {}");
        let f = &m.functions[0];
        assert_eq!(f.blocks.len(), 1);
        assert_eq!(f.inst_count(), 0);
        assert_eq!(f.blocks[0].term, Some(Terminator::Ret));
    }

    #[test]
    fn loops_produce_phis() {
        let m = lower_src("out float o; void main() { float s = 0.0; for (int i = 0; i < 4; i++) { s += float(i); } o = s; }");
        let text = print_module(&m);
        assert_eq!(text.matches(" = phi ").count(), 2, "{text}");
    }

    #[test]
    fn everything_lowers_and_verifies() {
        lower_src(
            "in vec4 a; uniform sampler2D t; uniform int k; out vec4 o; out float p;
             float f(mediump float x, int n) { if (n > 2) { return x; } return -x; }
             void main() {
               mediump vec2 h = a.xy * 0.5;
               float s = 0.0; int j = k;
               switch (j % 3) { case 0: float q = 1.0; s += q; case 1: s -= q; break; default: s = 2.0; }
               while (j > 0) { j--; if (j == 3) continue; if (j == 1) break; }
               do { s += 0.5; } while (s < 4.0);
               bool b = !(s > 1.0) && (j == 0 || 10 / (j + 1) > 2);
               float c = b ? s : f(s, j);
               o = texture2D(t, h) * mix(a, vec4(c), 1.0) + vec4(clamp(s, 0.0, 1.0), ivec2(j, 2), dot(a.xyz, a.zyx));
               p = inversesqrt(abs(s) + 1.0) + float(min(j, 3)) + normalize(a).w;
             }",
        );
    }
}
