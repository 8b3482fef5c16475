//! Tree-walking reference interpreter. It shares lane arithmetic, input
//! seeding, sampling, and hashing with the IR runtime, so a shader and its
//! compiled module are directly comparable.

use std::collections::{BTreeMap, HashMap};

use super::ast::*;
use super::typeck::TypedAst;
use crate::exec::{self, math, ExecEnv, ExecResult, ExecStatus, SlotDesc, SlotKind, TrapReason};

#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    F(Vec<f32>),
    I(Vec<i32>),
    B(Vec<bool>),
    Sampler(u32),
}

impl Value {
    fn zero(ty: Type) -> Value {
        let n = ty.lanes() as usize;
        match ty.scalar() {
            Some(Scalar::Float) => Value::F(vec![0.0; n]),
            Some(Scalar::Int) => Value::I(vec![0; n]),
            Some(Scalar::Bool) => Value::B(vec![false; n]),
            None => Value::Sampler(0),
        }
    }

    fn from_bits(ty: Type, bits: &[u32]) -> Value {
        match ty.scalar() {
            Some(Scalar::Float) => Value::F(bits.iter().map(|b| f32::from_bits(*b)).collect()),
            Some(Scalar::Int) => Value::I(bits.iter().map(|b| *b as i32).collect()),
            Some(Scalar::Bool) => Value::B(bits.iter().map(|b| *b != 0).collect()),
            None => Value::Sampler(0),
        }
    }

    fn to_bits(&self) -> Vec<u32> {
        match self {
            Value::F(v) => v.iter().map(|f| f.to_bits()).collect(),
            Value::I(v) => v.iter().map(|i| *i as u32).collect(),
            Value::B(v) => v.iter().map(|b| *b as u32).collect(),
            Value::Sampler(u) => vec![*u],
        }
    }

    fn len(&self) -> usize {
        match self {
            Value::F(v) => v.len(),
            Value::I(v) => v.len(),
            Value::B(v) => v.len(),
            Value::Sampler(_) => 1,
        }
    }

    fn floats(&self) -> &[f32] {
        match self {
            Value::F(v) => v,
            _ => unreachable!("typechecked: expected float"),
        }
    }

    fn ints(&self) -> &[i32] {
        match self {
            Value::I(v) => v,
            _ => unreachable!("typechecked: expected int"),
        }
    }

    fn truth(&self) -> bool {
        match self {
            Value::B(v) => v[0],
            _ => unreachable!("typechecked: expected bool"),
        }
    }

    /// Lane `i`, or lane 0 for scalars used against vectors.
    fn lane_f(&self, i: usize) -> f32 {
        let v = self.floats();
        v[if v.len() == 1 { 0 } else { i }]
    }

    fn lane_i(&self, i: usize) -> i32 {
        let v = self.ints();
        v[if v.len() == 1 { 0 } else { i }]
    }

    fn lanes_as(&self, s: Scalar) -> Value {
        match (self, s) {
            (Value::F(v), Scalar::Float) => Value::F(v.clone()),
            (Value::F(v), Scalar::Int) => Value::I(v.iter().map(|f| math::f32_to_i32(*f)).collect()),
            (Value::F(v), Scalar::Bool) => Value::B(v.iter().map(|f| *f != 0.0).collect()),
            (Value::I(v), Scalar::Float) => Value::F(v.iter().map(|i| math::i32_to_f32(*i)).collect()),
            (Value::I(v), Scalar::Int) => Value::I(v.clone()),
            (Value::I(v), Scalar::Bool) => Value::B(v.iter().map(|i| *i != 0).collect()),
            (Value::B(v), Scalar::Float) => Value::F(v.iter().map(|b| *b as i32 as f32).collect()),
            (Value::B(v), Scalar::Int) => Value::I(v.iter().map(|b| *b as i32).collect()),
            (Value::B(v), Scalar::Bool) => Value::B(v.clone()),
            (Value::Sampler(_), _) => unreachable!("typechecked: sampler conversion"),
        }
    }

    fn select(&self, lanes: &[u8]) -> Value {
        match self {
            Value::F(v) => Value::F(lanes.iter().map(|l| v[*l as usize]).collect()),
            Value::I(v) => Value::I(lanes.iter().map(|l| v[*l as usize]).collect()),
            Value::B(v) => Value::B(lanes.iter().map(|l| v[*l as usize]).collect()),
            Value::Sampler(_) => unreachable!(),
        }
    }
}

fn concat(parts: Vec<Value>, s: Scalar, want: usize) -> Value {
    let parts: Vec<Value> = parts.iter().map(|p| p.lanes_as(s)).collect();
    if parts.len() == 1 && parts[0].len() == 1 && want > 1 {
        return parts[0].select(&vec![0; want]);
    }
    let mut out = match s {
        Scalar::Float => Value::F(Vec::new()),
        Scalar::Int => Value::I(Vec::new()),
        Scalar::Bool => Value::B(Vec::new()),
    };
    for p in parts {
        match (&mut out, p) {
            (Value::F(o), Value::F(v)) => o.extend(v),
            (Value::I(o), Value::I(v)) => o.extend(v),
            (Value::B(o), Value::B(v)) => o.extend(v),
            _ => unreachable!(),
        }
    }
    let idx: Vec<u8> = (0..want as u8).collect();
    out.select(&idx)
}

enum Flow {
    Normal,
    Break,
    Continue,
    Return(Option<Value>),
}

enum Stop {
    Trap(TrapReason),
    Budget,
}

type Run<T> = Result<T, Stop>;

struct Interp<'a> {
    typed: &'a TypedAst,
    env: &'a ExecEnv,
    globals: HashMap<String, Value>,
    written: HashMap<String, bool>,
    /// Scope stack of the innermost active function.
    scopes: Vec<HashMap<String, Value>>,
    steps: u64,
}

/// Interface slots of a shader in declaration order.
pub fn interface_slots(ast: &ShaderAst) -> Vec<SlotDesc> {
    ast.globals
        .iter()
        .map(|g| SlotDesc {
            name: g.name.clone(),
            kind: match (g.qualifier, g.ty) {
                (_, Type::Sampler2D) => SlotKind::Sampler,
                (Qualifier::In, _) => SlotKind::Input,
                (Qualifier::Out, _) => SlotKind::Output,
                (Qualifier::Uniform, _) => SlotKind::Uniform,
            },
            lanes: g.ty.lanes(),
            is_int: g.ty.scalar() == Some(Scalar::Int),
        })
        .collect()
}

/// Runs `main` of a type-checked shader. Each executed statement and each
/// loop iteration costs one step.
pub fn interpret(typed: &TypedAst, env: &ExecEnv) -> ExecResult {
    let ast = &typed.ast;
    let seeded = exec::seed_inputs(&interface_slots(ast), env);
    let mut globals = HashMap::new();
    for g in &ast.globals {
        let v = if g.ty == Type::Sampler2D {
            Value::Sampler(seeded.sampler_units[&g.name])
        } else if let Some(bits) = seeded.values.get(&g.name) {
            Value::from_bits(g.ty, bits)
        } else {
            Value::zero(g.ty)
        };
        globals.insert(g.name.clone(), v);
    }
    let mut it = Interp { typed, env, globals, written: HashMap::new(), scopes: Vec::new(), steps: 0 };
    let main = ast.main().expect("typechecked shader has main");
    let status = match it.call_body(&main.body, Vec::new()) {
        Ok(_) => ExecStatus::Ok,
        Err(Stop::Trap(t)) => ExecStatus::Trap(t),
        Err(Stop::Budget) => ExecStatus::StepBudgetExceeded,
    };
    let mut outputs = BTreeMap::new();
    let mut diagnostics = Vec::new();
    for g in ast.globals.iter().filter(|g| g.qualifier == Qualifier::Out) {
        if !it.written.contains_key(&g.name) {
            diagnostics.push(format!("output `{}` never written; reads as zero", g.name));
        }
        outputs.insert(g.name.clone(), it.globals[&g.name].to_bits());
    }
    ExecResult::finish(status, it.steps, outputs, diagnostics)
}

impl<'a> Interp<'a> {
    fn tick(&mut self) -> Run<()> {
        self.steps += 1;
        if self.steps >= self.env.step_budget {
            return Err(Stop::Budget);
        }
        Ok(())
    }

    fn call_body(&mut self, body: &Block, params: Vec<(String, Value)>) -> Run<Option<Value>> {
        let saved = std::mem::take(&mut self.scopes);
        self.scopes.push(params.into_iter().collect());
        let r = self.block(body);
        self.scopes = saved;
        match r? {
            Flow::Return(v) => Ok(v),
            _ => Ok(None),
        }
    }

    fn lookup(&self, name: &str) -> &Value {
        for s in self.scopes.iter().rev() {
            if let Some(v) = s.get(name) {
                return v;
            }
        }
        &self.globals[name]
    }

    fn store(&mut self, name: &str, v: Value) {
        for s in self.scopes.iter_mut().rev() {
            if let Some(slot) = s.get_mut(name) {
                *slot = v;
                return;
            }
        }
        self.written.insert(name.to_string(), true);
        *self.globals.get_mut(name).expect("typechecked: declared") = v;
    }

    fn block(&mut self, b: &Block) -> Run<Flow> {
        self.scopes.push(HashMap::new());
        let r = self.stmts(&b.stmts);
        self.scopes.pop();
        r
    }

    fn stmts(&mut self, stmts: &[Stmt]) -> Run<Flow> {
        for s in stmts {
            match self.stmt(s)? {
                Flow::Normal => {}
                other => return Ok(other),
            }
        }
        Ok(Flow::Normal)
    }

    fn stmt(&mut self, s: &Stmt) -> Run<Flow> {
        self.tick()?;
        match &s.kind {
            StmtKind::Decl { ty, name, init, .. } => {
                let v = match init {
                    Some(e) => self.expr(e)?,
                    None => Value::zero(*ty),
                };
                self.scopes.last_mut().unwrap().insert(name.clone(), v);
            }
            StmtKind::Assign { target, op, value } => {
                let cur = self.lookup(target).clone();
                let v = match (op, value) {
                    (AssignOp::Set, Some(e)) => self.expr(e)?,
                    (AssignOp::Inc | AssignOp::Dec, _) => {
                        let one = match cur {
                            Value::F(_) => Value::F(vec![1.0]),
                            _ => Value::I(vec![1]),
                        };
                        let bop = if *op == AssignOp::Inc { BinOp::Add } else { BinOp::Sub };
                        arith(bop, &cur, &one)?
                    }
                    (_, Some(e)) => {
                        let rhs = self.expr(e)?;
                        arith(op.binary().expect("compound op"), &cur, &rhs)?
                    }
                    (_, None) => unreachable!("parser: assignment without value"),
                };
                self.store(target, v);
            }
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::Block(b) => return self.block(b),
            StmtKind::If { cond, then_branch, else_branch } => {
                if self.expr(cond)?.truth() {
                    return self.scoped(then_branch);
                } else if let Some(e) = else_branch {
                    return self.scoped(e);
                }
            }
            StmtKind::Switch { selector, cases } => {
                let sel = self.expr(selector)?.ints()[0];
                let start = cases.iter().position(|c| c.label == Some(sel)).or_else(|| cases.iter().position(|c| c.label.is_none()));
                if let Some(start) = start {
                    // Declarations in skipped cases are still in scope; they read as zero.
                    let mut shared = HashMap::new();
                    for c in &cases[..start] {
                        for s in &c.body {
                            if let StmtKind::Decl { ty, name, .. } = &s.kind {
                                shared.insert(name.clone(), Value::zero(*ty));
                            }
                        }
                    }
                    self.scopes.push(shared);
                    let mut flow = Flow::Normal;
                    for c in &cases[start..] {
                        match self.stmts(&c.body) {
                            Ok(Flow::Normal) => continue,
                            Ok(f) => {
                                flow = f;
                                break;
                            }
                            Err(e) => {
                                self.scopes.pop();
                                return Err(e);
                            }
                        }
                    }
                    self.scopes.pop();
                    return Ok(match flow {
                        Flow::Break => Flow::Normal,
                        f => f,
                    });
                }
            }
            StmtKind::For { init, cond, step, body } => {
                self.scopes.push(HashMap::new());
                let r = self.for_loop(init.as_deref(), cond.as_ref(), step.as_deref(), body);
                self.scopes.pop();
                return r;
            }
            StmtKind::While { cond, body } => loop {
                if !self.expr(cond)?.truth() {
                    break;
                }
                self.tick()?;
                match self.scoped(body)? {
                    Flow::Break => break,
                    Flow::Return(v) => return Ok(Flow::Return(v)),
                    _ => {}
                }
            },
            StmtKind::DoWhile { body, cond } => loop {
                self.tick()?;
                match self.scoped(body)? {
                    Flow::Break => break,
                    Flow::Return(v) => return Ok(Flow::Return(v)),
                    _ => {}
                }
                if !self.expr(cond)?.truth() {
                    break;
                }
            },
            StmtKind::Break => return Ok(Flow::Break),
            StmtKind::Continue => return Ok(Flow::Continue),
            StmtKind::Return(e) => {
                let v = match e {
                    Some(e) => Some(self.expr(e)?),
                    None => None,
                };
                return Ok(Flow::Return(v));
            }
        }
        Ok(Flow::Normal)
    }

    /// A branch or loop body gets its own scope even without braces.
    fn scoped(&mut self, s: &Stmt) -> Run<Flow> {
        self.scopes.push(HashMap::new());
        let r = self.stmt(s);
        self.scopes.pop();
        r
    }

    fn for_loop(&mut self, init: Option<&Stmt>, cond: Option<&Expr>, step: Option<&Stmt>, body: &Stmt) -> Run<Flow> {
        if let Some(i) = init {
            self.stmt(i)?;
        }
        loop {
            if let Some(c) = cond {
                if !self.expr(c)?.truth() {
                    break;
                }
            }
            self.tick()?;
            match self.scoped(body)? {
                Flow::Break => break,
                Flow::Return(v) => return Ok(Flow::Return(v)),
                _ => {}
            }
            if let Some(s) = step {
                self.stmt(s)?;
            }
        }
        Ok(Flow::Normal)
    }

    fn expr(&mut self, e: &Expr) -> Run<Value> {
        Ok(match &e.kind {
            ExprKind::FloatLit(b) => Value::F(vec![f32::from_bits(*b)]),
            ExprKind::IntLit(i) => Value::I(vec![*i]),
            ExprKind::BoolLit(b) => Value::B(vec![*b]),
            ExprKind::Var(n) => self.lookup(n).clone(),
            ExprKind::Unary(op, a) => {
                let v = self.expr(a)?;
                match (op, v) {
                    (UnOp::Neg, Value::F(v)) => Value::F(v.iter().map(|x| -x).collect()),
                    (UnOp::Neg, Value::I(v)) => Value::I(v.iter().map(|x| x.wrapping_neg()).collect()),
                    (UnOp::Not, Value::B(v)) => Value::B(v.iter().map(|x| !x).collect()),
                    _ => unreachable!("typechecked unary"),
                }
            }
            ExprKind::Binary(BinOp::And, a, b) => {
                let l = self.expr(a)?.truth();
                Value::B(vec![l && self.expr(b)?.truth()])
            }
            ExprKind::Binary(BinOp::Or, a, b) => {
                let l = self.expr(a)?.truth();
                Value::B(vec![l || self.expr(b)?.truth()])
            }
            ExprKind::Binary(op, a, b) => {
                let (l, r) = (self.expr(a)?, self.expr(b)?);
                if op.is_comparison() {
                    Value::B(vec![compare(*op, &l, &r)])
                } else {
                    arith(*op, &l, &r)?
                }
            }
            ExprKind::Ternary(c, a, b) => {
                if self.expr(c)?.truth() {
                    self.expr(a)?
                } else {
                    self.expr(b)?
                }
            }
            ExprKind::Swizzle(base, sw) => {
                let v = self.expr(base)?;
                v.select(&swizzle_lanes(sw).expect("parser validated swizzle"))
            }
            ExprKind::Call(name, args) => self.call(e, name, args)?,
        })
    }

    fn call(&mut self, e: &Expr, name: &str, args: &[Expr]) -> Run<Value> {
        if let Some(t) = Type::from_name(name) {
            let mut parts = Vec::with_capacity(args.len());
            for a in args {
                parts.push(self.expr(a)?);
            }
            return Ok(concat(parts, t.scalar().expect("constructible"), t.lanes() as usize));
        }
        if name == "texture2D" {
            let ExprKind::Var(s) = &args[0].kind else { unreachable!("typechecked texture2D") };
            let Value::Sampler(unit) = *self.lookup(s) else { unreachable!() };
            let uv = self.expr(&args[1])?;
            let c = uv.floats();
            return Ok(Value::F(exec::sample(self.env.sampler_seed, unit, [c[0], c[1]]).to_vec()));
        }
        let mut vals = Vec::with_capacity(args.len());
        for a in args {
            vals.push(self.expr(a)?);
        }
        if let Some(v) = builtin(name, &vals) {
            return Ok(v);
        }
        let f = self.typed.ast.function(name).expect("typechecked call");
        let params = f.params.iter().map(|p| p.name.clone()).zip(vals).collect();
        let ret = self.call_body(&f.body, params)?;
        Ok(ret.unwrap_or_else(|| Value::zero(self.typed.type_of(e))))
    }
}

fn compare(op: BinOp, l: &Value, r: &Value) -> bool {
    match (l, r) {
        (Value::F(a), Value::F(b)) => {
            let (a, b) = (a[0], b[0]);
            match op {
                BinOp::Lt => a < b,
                BinOp::Le => a <= b,
                BinOp::Gt => a > b,
                BinOp::Ge => a >= b,
                BinOp::Eq => a == b,
                _ => a != b,
            }
        }
        (Value::I(a), Value::I(b)) => {
            let (a, b) = (a[0], b[0]);
            match op {
                BinOp::Lt => a < b,
                BinOp::Le => a <= b,
                BinOp::Gt => a > b,
                BinOp::Ge => a >= b,
                BinOp::Eq => a == b,
                _ => a != b,
            }
        }
        (Value::B(a), Value::B(b)) => {
            if op == BinOp::Eq {
                a[0] == b[0]
            } else {
                a[0] != b[0]
            }
        }
        _ => unreachable!("typechecked comparison"),
    }
}

fn arith(op: BinOp, l: &Value, r: &Value) -> Run<Value> {
    let n = l.len().max(r.len());
    Ok(match l {
        Value::F(_) => Value::F((0..n).map(|i| float_op(op, l.lane_f(i), r.lane_f(i))).collect()),
        Value::I(_) => {
            let mut out = Vec::with_capacity(n);
            for i in 0..n {
                out.push(int_op(op, l.lane_i(i), r.lane_i(i)).map_err(Stop::Trap)?);
            }
            Value::I(out)
        }
        _ => unreachable!("typechecked arithmetic"),
    })
}

pub(crate) fn float_op(op: BinOp, a: f32, b: f32) -> f32 {
    match op {
        BinOp::Add => a + b,
        BinOp::Sub => a - b,
        BinOp::Mul => a * b,
        BinOp::Div => a / b,
        _ => unreachable!("not a float arithmetic op"),
    }
}

pub(crate) fn int_op(op: BinOp, a: i32, b: i32) -> Result<i32, TrapReason> {
    Ok(match op {
        BinOp::Add => a.wrapping_add(b),
        BinOp::Sub => a.wrapping_sub(b),
        BinOp::Mul => a.wrapping_mul(b),
        BinOp::Div | BinOp::Rem if b == 0 => return Err(TrapReason::IntDivByZero),
        BinOp::Div => a.wrapping_div(b),
        BinOp::Rem => a.wrapping_rem(b),
        _ => unreachable!("not an int arithmetic op"),
    })
}

fn lanewise_f(args: &[Value], f: impl Fn(&[f32]) -> f32) -> Value {
    let n = args[0].len();
    Value::F(
        (0..n)
            .map(|i| {
                let lane: Vec<f32> = args.iter().map(|a| a.lane_f(i)).collect();
                f(&lane)
            })
            .collect(),
    )
}

fn lanewise_i(args: &[Value], f: impl Fn(&[i32]) -> i32) -> Value {
    let n = args[0].len();
    Value::I(
        (0..n)
            .map(|i| {
                let lane: Vec<i32> = args.iter().map(|a| a.lane_i(i)).collect();
                f(&lane)
            })
            .collect(),
    )
}

fn builtin(name: &str, a: &[Value]) -> Option<Value> {
    let is_int = matches!(a.first(), Some(Value::I(_)));
    Some(match name {
        "mix" => lanewise_f(a, |l| math::mix(l[0], l[1], l[2])),
        "clamp" if is_int => lanewise_i(a, |l| math::iclamp(l[0], l[1], l[2])),
        "clamp" => lanewise_f(a, |l| math::fclamp(l[0], l[1], l[2])),
        "min" if is_int => lanewise_i(a, |l| l[0].min(l[1])),
        "min" => lanewise_f(a, |l| math::fmin(l[0], l[1])),
        "max" if is_int => lanewise_i(a, |l| l[0].max(l[1])),
        "max" => lanewise_f(a, |l| math::fmax(l[0], l[1])),
        "abs" if is_int => lanewise_i(a, |l| l[0].wrapping_abs()),
        "abs" => lanewise_f(a, |l| math::fabs(l[0])),
        "sqrt" => lanewise_f(a, |l| math::sqrt(l[0])),
        "inversesqrt" => lanewise_f(a, |l| math::rsq(l[0])),
        "sin" => lanewise_f(a, |l| math::sin(l[0])),
        "cos" => lanewise_f(a, |l| math::cos(l[0])),
        "floor" => lanewise_f(a, |l| math::floor(l[0])),
        "dot" => Value::F(vec![math::dot(a[0].floats(), a[1].floats())]),
        "normalize" => Value::F(math::normalize(a[0].floats())),
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::check_text;

    fn run(src: &str) -> ExecResult {
        interpret(&check_text(src).unwrap(), &ExecEnv::with_seed(1))
    }

    fn out_f(r: &ExecResult, name: &str) -> Vec<f32> {
        r.outputs[name].iter().map(|b| f32::from_bits(*b)).collect()
    }

    #[test]
    fn straight_line_arithmetic() {
        let r = run("out vec2 o; void main() { float x = 1.5; o = vec2(x * 2.0, x - 0.5); }");
        assert!(r.is_ok());
        assert_eq!(out_f(&r, "o"), vec![3.0, 1.0]);
    }

    #[test]
    fn loops_switch_and_functions() {
        let r = run("out float o;
             float sq(float v) { return v * v; }
             void main() {
               float s = 0.0;
               for (int i = 0; i < 4; i++) { if (i == 2) continue; s += float(i); }
               int k = 0;
               while (true) { k++; if (k > 5) break; }
               switch (k) { case 6: s += 10.0; case 7: s += 100.0; break; default: s = -1.0; }
               do { k--; } while (k > 0);
               o = sq(s) + float(k);
             }");
        assert!(r.is_ok(), "{:?}", r.status);
        // s = 0+1+3 = 4, then +10 +100 (fallthrough) = 114
        assert_eq!(out_f(&r, "o"), vec![114.0 * 114.0]);
    }

    #[test]
    fn int_division_by_zero_traps() {
        let r = run("out float o; void main() { int z = 0; o = float(3 / z); }");
        assert_eq!(r.status, ExecStatus::Trap(TrapReason::IntDivByZero));
        assert_eq!(r.output_hash, None);
    }

    #[test]
    fn infinite_loop_hits_budget() {
        let mut env = ExecEnv::with_seed(1);
        env.step_budget = 500;
        let t = check_text("out float o; void main() { while (true) { o = 1.0; } }").unwrap();
        let r = interpret(&t, &env);
        assert_eq!(r.status, ExecStatus::StepBudgetExceeded);
        assert!(r.steps <= 500);
    }

    #[test]
    fn mix_with_unit_weight_is_identity() {
        let a = run("in vec4 a; out vec4 o; void main() { o = a * 3.0; }");
        let b = run("in vec4 a; out vec4 o; void main() { o = mix(a * 3.0, vec4(9.0), 1.0); }");
        assert_eq!(a.output_hash, b.output_hash);
    }

    #[test]
    fn constructors_broadcast_and_truncate() {
        let r = run("out vec4 o; void main() { vec3 v = vec3(2.0); vec2 t = vec2(v); o = vec4(t, ivec2(3, -1)); }");
        assert_eq!(out_f(&r, "o"), vec![2.0, 2.0, 3.0, -1.0]);
    }

    #[test]
    fn unwritten_output_reads_zero_with_diagnostic() {
        let r = run("out vec4 o; out float p; void main() { p = 1.0; }");
        assert_eq!(out_f(&r, "o"), vec![0.0; 4]);
        assert_eq!(r.diagnostics.len(), 1);
    }

    #[test]
    fn inputs_are_seeded_and_deterministic() {
        let src = "in vec4 a; uniform float u; uniform sampler2D t; out vec4 o; void main() { o = a + texture2D(t, a.xy) * u; }";
        let r1 = run(src);
        let r2 = run(src);
        assert_eq!(r1.output_hash, r2.output_hash);
        let r3 = interpret(&check_text(src).unwrap(), &ExecEnv::with_seed(2));
        assert_ne!(r1.output_hash, r3.output_hash);
    }
}
