use std::collections::{HashMap, HashSet};
use std::fmt;

use thiserror::Error;

use super::ast::*;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum TypeErrorKind {
    UndeclaredIdentifier,
    TypeMismatch,
    ArityMismatch,
    MultipleMain,
    InvalidQualifier,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct TypeError {
    pub pos: Pos,
    pub kind: TypeErrorKind,
    pub message: String,
}

impl fmt::Display for TypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "type error at {} ({:?}): {}", self.pos, self.kind, self.message)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Warning {
    Shadowing { name: String, pos: Pos },
    OutputNeverWritten { name: String },
}

/// A type-checked tree. Expression types live in a side table keyed by node
/// id so the tree itself stays a plain syntax value.
#[derive(Clone, Debug)]
pub struct TypedAst {
    pub ast: ShaderAst,
    pub types: HashMap<NodeId, Type>,
    pub warnings: Vec<Warning>,
}

impl TypedAst {
    pub fn type_of(&self, e: &Expr) -> Type {
        self.types[&e.id]
    }
}

fn err(pos: Pos, kind: TypeErrorKind, message: impl Into<String>) -> TypeError {
    TypeError { pos, kind, message: message.into() }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum VarOrigin {
    Global(Qualifier),
    Local,
}

#[derive(Clone, Debug)]
struct VarInfo {
    ty: Type,
    origin: VarOrigin,
}

struct Checker<'a> {
    ast: &'a ShaderAst,
    types: HashMap<NodeId, Type>,
    warnings: Vec<Warning>,
    scopes: Vec<HashMap<String, VarInfo>>,
    /// Functions visible to calls (declared before the current one).
    visible_fns: HashMap<String, &'a FunctionDecl>,
    ret: Type,
    written: HashSet<String>,
    seen_ids: HashSet<NodeId>,
}

pub fn typecheck(ast: &ShaderAst) -> Result<TypedAst, TypeError> {
    let mut c = Checker {
        ast,
        types: HashMap::new(),
        warnings: Vec::new(),
        scopes: vec![HashMap::new()],
        visible_fns: HashMap::new(),
        ret: Type::Void,
        written: HashSet::new(),
        seen_ids: HashSet::new(),
    };
    c.check_globals()?;
    c.check_functions()?;
    for g in &ast.globals {
        if g.qualifier == Qualifier::Out && !c.written.contains(&g.name) {
            c.warnings.push(Warning::OutputNeverWritten { name: g.name.clone() });
        }
    }
    Ok(TypedAst { ast: ast.clone(), types: c.types, warnings: c.warnings })
}

impl<'a> Checker<'a> {
    fn check_globals(&mut self) -> Result<(), TypeError> {
        for g in &self.ast.globals {
            let ok = match g.qualifier {
                Qualifier::In | Qualifier::Out => g.ty.is_float_like(),
                Qualifier::Uniform => g.ty.is_numeric() || g.ty == Type::Sampler2D,
            };
            if !ok {
                return Err(err(
                    g.pos,
                    TypeErrorKind::InvalidQualifier,
                    format!("`{}` globals cannot have type {}", g.qualifier.keyword(), g.ty),
                ));
            }
            if self.scopes[0].contains_key(&g.name) {
                return Err(err(g.pos, TypeErrorKind::TypeMismatch, format!("`{}` redeclared", g.name)));
            }
            self.scopes[0].insert(g.name.clone(), VarInfo { ty: g.ty, origin: VarOrigin::Global(g.qualifier) });
        }
        Ok(())
    }

    fn check_functions(&mut self) -> Result<(), TypeError> {
        let mains: Vec<&FunctionDecl> = self.ast.functions.iter().filter(|f| f.name == "main").collect();
        if mains.len() != 1 {
            let pos = mains.get(1).map(|f| f.pos).unwrap_or_default();
            return Err(err(pos, TypeErrorKind::MultipleMain, format!("expected exactly one `main`, found {}", mains.len())));
        }
        let main = mains[0];
        if main.ret != Type::Void || !main.params.is_empty() {
            return Err(err(main.pos, TypeErrorKind::TypeMismatch, "`main` must be `void main()`"));
        }
        for f in &self.ast.functions {
            if self.visible_fns.contains_key(&f.name) || self.scopes[0].contains_key(&f.name) {
                return Err(err(f.pos, TypeErrorKind::TypeMismatch, format!("`{}` redefined", f.name)));
            }
            if is_builtin(&f.name) {
                return Err(err(f.pos, TypeErrorKind::TypeMismatch, format!("`{}` redefines a builtin", f.name)));
            }
            if f.ret == Type::Sampler2D {
                return Err(err(f.pos, TypeErrorKind::InvalidQualifier, "functions cannot return samplers"));
            }
            self.check_function(f)?;
            self.visible_fns.insert(f.name.clone(), f);
        }
        Ok(())
    }

    fn check_function(&mut self, f: &'a FunctionDecl) -> Result<(), TypeError> {
        self.ret = f.ret;
        self.scopes.push(HashMap::new());
        for p in &f.params {
            if matches!(p.ty, Type::Void | Type::Sampler2D) {
                return Err(err(f.pos, TypeErrorKind::InvalidQualifier, format!("parameter `{}` has type {}", p.name, p.ty)));
            }
            if self.scopes.last().unwrap().contains_key(&p.name) {
                return Err(err(f.pos, TypeErrorKind::TypeMismatch, format!("duplicate parameter `{}`", p.name)));
            }
            self.declare(&p.name, p.ty, f.pos)?;
        }
        if f.ret != Type::Void && !matches!(f.body.stmts.last().map(|s| &s.kind), Some(StmtKind::Return(Some(_)))) {
            return Err(err(f.pos, TypeErrorKind::TypeMismatch, format!("`{}` must end with a return statement", f.name)));
        }
        let r = self.block_stmts(&f.body.stmts, false);
        self.scopes.pop();
        self.note_id(f.body.id, f.pos)?;
        r
    }

    fn note_id(&mut self, id: NodeId, pos: Pos) -> Result<(), TypeError> {
        if !self.seen_ids.insert(id) {
            return Err(err(pos, TypeErrorKind::TypeMismatch, format!("duplicate node id {id}")));
        }
        Ok(())
    }

    fn lookup(&self, name: &str) -> Option<&VarInfo> {
        self.scopes.iter().rev().find_map(|s| s.get(name))
    }

    fn declare(&mut self, name: &str, ty: Type, pos: Pos) -> Result<(), TypeError> {
        if self.scopes.last().unwrap().contains_key(name) {
            return Err(err(pos, TypeErrorKind::TypeMismatch, format!("`{name}` redeclared in the same scope")));
        }
        if self.lookup(name).is_some() || self.visible_fns.contains_key(name) {
            self.warnings.push(Warning::Shadowing { name: name.to_string(), pos });
        }
        self.scopes.last_mut().unwrap().insert(name.to_string(), VarInfo { ty, origin: VarOrigin::Local });
        Ok(())
    }

    fn block_stmts(&mut self, stmts: &[Stmt], new_scope: bool) -> Result<(), TypeError> {
        if new_scope {
            self.scopes.push(HashMap::new());
        }
        let r = stmts.iter().try_for_each(|s| self.stmt(s));
        if new_scope {
            self.scopes.pop();
        }
        r
    }

    /// A statement in its own scope (loop and branch bodies).
    fn scoped_stmt(&mut self, s: &Stmt) -> Result<(), TypeError> {
        self.scopes.push(HashMap::new());
        let r = self.stmt(s);
        self.scopes.pop();
        r
    }

    fn expect(&mut self, e: &Expr, want: Type, what: &str) -> Result<(), TypeError> {
        let got = self.expr(e)?;
        if got != want {
            return Err(err(e.pos, TypeErrorKind::TypeMismatch, format!("{what}: expected {want}, found {got}")));
        }
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> Result<(), TypeError> {
        self.note_id(s.id, s.pos)?;
        match &s.kind {
            StmtKind::Decl { ty, name, init, .. } => {
                if matches!(ty, Type::Void | Type::Sampler2D) {
                    return Err(err(s.pos, TypeErrorKind::InvalidQualifier, format!("local `{name}` cannot have type {ty}")));
                }
                if let Some(e) = init {
                    self.expect(e, *ty, &format!("initializer of `{name}`"))?;
                }
                self.declare(name, *ty, s.pos)?;
            }
            StmtKind::Assign { target, op, value } => {
                let Some(info) = self.lookup(target).cloned() else {
                    return Err(err(s.pos, TypeErrorKind::UndeclaredIdentifier, format!("`{target}` is not declared")));
                };
                if let VarOrigin::Global(q) = info.origin {
                    if q != Qualifier::Out {
                        return Err(err(
                            s.pos,
                            TypeErrorKind::InvalidQualifier,
                            format!("cannot assign to `{}` global `{target}`", q.keyword()),
                        ));
                    }
                    self.written.insert(target.clone());
                }
                match (op, value) {
                    (AssignOp::Inc | AssignOp::Dec, _) => {
                        if !info.ty.is_numeric() {
                            return Err(err(s.pos, TypeErrorKind::TypeMismatch, format!("cannot increment {}", info.ty)));
                        }
                    }
                    (AssignOp::Set, Some(v)) => self.expect(v, info.ty, &format!("assignment to `{target}`"))?,
                    (op, Some(v)) => {
                        let vt = self.expr(v)?;
                        let result = arith_result(op.binary().unwrap(), info.ty, vt);
                        if result != Some(info.ty) {
                            return Err(err(
                                s.pos,
                                TypeErrorKind::TypeMismatch,
                                format!("`{target} {} ...`: cannot combine {} with {vt}", op.symbol(), info.ty),
                            ));
                        }
                    }
                    (_, None) => return Err(err(s.pos, TypeErrorKind::TypeMismatch, "assignment without a value")),
                }
            }
            StmtKind::Expr(e) => {
                self.expr(e)?;
            }
            StmtKind::Block(b) => {
                self.note_id(b.id, s.pos)?;
                self.block_stmts(&b.stmts, true)?;
            }
            StmtKind::If { cond, then_branch, else_branch } => {
                self.expect(cond, Type::BOOL, "if condition")?;
                self.scoped_stmt(then_branch)?;
                if let Some(e) = else_branch {
                    self.scoped_stmt(e)?;
                }
            }
            StmtKind::Switch { selector, cases } => {
                self.expect(selector, Type::INT, "switch selector")?;
                let mut labels = HashSet::new();
                for c in cases {
                    if !labels.insert(c.label) {
                        return Err(err(s.pos, TypeErrorKind::TypeMismatch, "duplicate case label"));
                    }
                }
                // All cases share one scope, as in C.
                self.scopes.push(HashMap::new());
                let r = cases.iter().try_for_each(|c| c.body.iter().try_for_each(|st| self.stmt(st)));
                self.scopes.pop();
                r?;
            }
            StmtKind::For { init, cond, step, body } => {
                self.scopes.push(HashMap::new());
                let r = (|| {
                    if let Some(i) = init {
                        self.stmt(i)?;
                    }
                    if let Some(c) = cond {
                        self.expect(c, Type::BOOL, "for condition")?;
                    }
                    if let Some(st) = step {
                        self.stmt(st)?;
                    }
                    self.scoped_stmt(body)
                })();
                self.scopes.pop();
                r?;
            }
            StmtKind::While { cond, body } => {
                self.expect(cond, Type::BOOL, "while condition")?;
                self.scoped_stmt(body)?;
            }
            StmtKind::DoWhile { body, cond } => {
                self.scoped_stmt(body)?;
                self.expect(cond, Type::BOOL, "do-while condition")?;
            }
            StmtKind::Break | StmtKind::Continue => {}
            StmtKind::Return(v) => match (v, self.ret) {
                (None, Type::Void) => {}
                (Some(e), t) if t != Type::Void => self.expect(e, t, "return value")?,
                _ => return Err(err(s.pos, TypeErrorKind::TypeMismatch, "return does not match the function type")),
            },
        }
        Ok(())
    }

    fn expr(&mut self, e: &Expr) -> Result<Type, TypeError> {
        self.note_id(e.id, e.pos)?;
        let ty = self.expr_inner(e)?;
        self.types.insert(e.id, ty);
        Ok(ty)
    }

    fn expr_inner(&mut self, e: &Expr) -> Result<Type, TypeError> {
        let mismatch = |m: String| err(e.pos, TypeErrorKind::TypeMismatch, m);
        Ok(match &e.kind {
            ExprKind::FloatLit(_) => Type::FLOAT,
            ExprKind::IntLit(_) => Type::INT,
            ExprKind::BoolLit(_) => Type::BOOL,
            ExprKind::Var(name) => match self.lookup(name) {
                Some(v) => v.ty,
                None => {
                    return Err(err(e.pos, TypeErrorKind::UndeclaredIdentifier, format!("`{name}` is not declared")));
                }
            },
            ExprKind::Unary(op, inner) => {
                let t = self.expr(inner)?;
                match op {
                    UnOp::Neg if t.is_numeric() => t,
                    UnOp::Not if t == Type::BOOL => t,
                    _ => return Err(mismatch(format!("invalid operand {t} for unary operator"))),
                }
            }
            ExprKind::Binary(op, a, b) => {
                let ta = self.expr(a)?;
                let tb = self.expr(b)?;
                binary_result(*op, ta, tb).ok_or_else(|| mismatch(format!("invalid operands {ta} {} {tb}", op.symbol())))?
            }
            ExprKind::Ternary(c, a, b) => {
                self.expect(c, Type::BOOL, "ternary condition")?;
                let ta = self.expr(a)?;
                let tb = self.expr(b)?;
                if ta != tb || matches!(ta, Type::Void | Type::Sampler2D) {
                    return Err(mismatch(format!("ternary branches differ: {ta} vs {tb}")));
                }
                ta
            }
            ExprKind::Swizzle(base, sw) => {
                let bt = self.expr(base)?;
                let lanes = swizzle_lanes(sw).ok_or_else(|| mismatch(format!("invalid swizzle `{sw}`")))?;
                match bt {
                    Type::Vector(s, n) if lanes.iter().all(|l| *l < n) => Type::with_lanes(s, lanes.len() as u8),
                    _ => return Err(mismatch(format!("swizzle `{sw}` not valid on {bt}"))),
                }
            }
            ExprKind::Call(name, args) => {
                let mut tys = Vec::with_capacity(args.len());
                for a in args {
                    tys.push(self.expr(a)?);
                }
                if let Some(t) = Type::from_name(name) {
                    return constructor_result(t, &tys).map_err(|m| err(e.pos, m.0, m.1));
                }
                if is_builtin(name) {
                    if name == "texture2D" && !matches!(args.first().map(|a| &a.kind), Some(ExprKind::Var(_))) {
                        return Err(mismatch("texture2D expects a sampler uniform".into()));
                    }
                    return builtin_result(name, &tys).map_err(|m| err(e.pos, m.0, m.1));
                }
                if self.lookup(name).is_some() {
                    return Err(mismatch(format!("`{name}` is not a function")));
                }
                let Some(f) = self.visible_fns.get(name).copied() else {
                    return Err(err(e.pos, TypeErrorKind::UndeclaredIdentifier, format!("function `{name}` is not declared")));
                };
                if f.params.len() != args.len() {
                    return Err(err(
                        e.pos,
                        TypeErrorKind::ArityMismatch,
                        format!("`{name}` takes {} arguments, got {}", f.params.len(), args.len()),
                    ));
                }
                for (p, t) in f.params.iter().zip(&tys) {
                    if p.ty != *t {
                        return Err(mismatch(format!("argument `{}` of `{name}`: expected {}, found {t}", p.name, p.ty)));
                    }
                }
                if tys.contains(&Type::Sampler2D) {
                    return Err(mismatch("samplers cannot be passed to functions".into()));
                }
                f.ret
            }
        })
    }
}

pub const BUILTINS: &[&str] =
    &["mix", "clamp", "min", "max", "abs", "sqrt", "inversesqrt", "sin", "cos", "floor", "dot", "normalize", "texture2D"];

pub fn is_builtin(name: &str) -> bool {
    BUILTINS.contains(&name)
}

/// Result type of `+ - * / %` on the given operand types.
pub fn arith_result(op: BinOp, a: Type, b: Type) -> Option<Type> {
    let (sa, sb) = (a.scalar()?, b.scalar()?);
    if sa != sb || sa == Scalar::Bool {
        return None;
    }
    if op == BinOp::Rem && sa != Scalar::Int {
        return None;
    }
    match (a, b) {
        _ if a == b => Some(a),
        (Type::Scalar(_), Type::Vector(..)) => Some(b),
        (Type::Vector(..), Type::Scalar(_)) => Some(a),
        _ => None,
    }
}

pub fn binary_result(op: BinOp, a: Type, b: Type) -> Option<Type> {
    match op {
        BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem => arith_result(op, a, b),
        BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
            (a == b && matches!(a, Type::Scalar(Scalar::Float | Scalar::Int))).then_some(Type::BOOL)
        }
        BinOp::Eq | BinOp::Ne => (a == b && matches!(a, Type::Scalar(_))).then_some(Type::BOOL),
        BinOp::And | BinOp::Or => (a == Type::BOOL && b == Type::BOOL).then_some(Type::BOOL),
    }
}

type SigError = (TypeErrorKind, String);

fn constructor_result(t: Type, args: &[Type]) -> Result<Type, SigError> {
    let bad = |m: String| (TypeErrorKind::TypeMismatch, m);
    if matches!(t, Type::Void | Type::Sampler2D) {
        return Err(bad(format!("{t} is not constructible")));
    }
    if args.is_empty() {
        return Err((TypeErrorKind::ArityMismatch, format!("{t}() needs arguments")));
    }
    if args.iter().any(|a| a.scalar().is_none()) {
        return Err(bad(format!("invalid argument to {t} constructor")));
    }
    let want = t.lanes() as usize;
    match t {
        Type::Scalar(_) => {
            if args.len() != 1 || args[0].lanes() != 1 {
                return Err((TypeErrorKind::ArityMismatch, format!("{t}(...) takes one scalar")));
            }
        }
        _ => {
            let total: usize = args.iter().map(|a| a.lanes() as usize).sum();
            let ok = (args.len() == 1 && (args[0].lanes() == 1 || total >= want)) || total == want;
            if !ok {
                return Err((TypeErrorKind::ArityMismatch, format!("{t} needs {want} components, got {total}")));
            }
        }
    }
    Ok(t)
}

fn builtin_result(name: &str, args: &[Type]) -> Result<Type, SigError> {
    let arity = |n: usize| {
        if args.len() != n {
            Err((TypeErrorKind::ArityMismatch, format!("`{name}` takes {n} arguments, got {}", args.len())))
        } else {
            Ok(())
        }
    };
    let bad = || (TypeErrorKind::TypeMismatch, format!("no overload of `{name}` for ({})", list(args)));
    match name {
        "mix" => {
            arity(3)?;
            let t = args[0];
            if t.is_float_like() && args[1] == t && (args[2] == Type::FLOAT || args[2] == t) {
                Ok(t)
            } else {
                Err(bad())
            }
        }
        "clamp" => {
            arity(3)?;
            let t = args[0];
            let scalar = t.scalar().map(Type::Scalar);
            let ok = t.is_numeric() && ((args[1] == t && args[2] == t) || (Some(args[1]) == scalar && Some(args[2]) == scalar));
            if ok {
                Ok(t)
            } else {
                Err(bad())
            }
        }
        "min" | "max" => {
            arity(2)?;
            let t = args[0];
            let ok = t.is_numeric() && (args[1] == t || Some(args[1]) == t.scalar().map(Type::Scalar));
            if ok {
                Ok(t)
            } else {
                Err(bad())
            }
        }
        "abs" => {
            arity(1)?;
            if args[0].is_numeric() {
                Ok(args[0])
            } else {
                Err(bad())
            }
        }
        "sqrt" | "inversesqrt" | "sin" | "cos" | "floor" | "normalize" => {
            arity(1)?;
            if args[0].is_float_like() {
                Ok(args[0])
            } else {
                Err(bad())
            }
        }
        "dot" => {
            arity(2)?;
            if args[0].is_float_like() && args[0] == args[1] {
                Ok(Type::FLOAT)
            } else {
                Err(bad())
            }
        }
        "texture2D" => {
            arity(2)?;
            if args[0] == Type::Sampler2D && args[1] == Type::vec(2) {
                Ok(Type::vec(4))
            } else {
                Err(bad())
            }
        }
        _ => Err(bad()),
    }
}

fn list(args: &[Type]) -> String {
    args.iter().map(|t| t.name()).collect::<Vec<_>>().join(", ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_text;

    fn check(src: &str) -> Result<TypedAst, TypeError> {
        typecheck(&parse_text(src).unwrap())
    }

    fn kind(src: &str) -> TypeErrorKind {
        check(src).unwrap_err().kind
    }

    #[test]
    fn float_sum_is_float() {
        let t = check("void main() { float x = 1.0 + 2.0; }").unwrap();
        let main = t.ast.main().unwrap();
        let StmtKind::Decl { init: Some(e), .. } = &main.body.stmts[0].kind else { panic!() };
        assert_eq!(t.type_of(e), Type::FLOAT);
    }

    #[test]
    fn vec_size_mismatch() {
        assert_eq!(kind("void main() { vec3 v = vec2(1.0, 2.0); }"), TypeErrorKind::TypeMismatch);
    }

    #[test]
    fn mix_of_vec4_is_vec4() {
        let t = check("in vec4 a; in vec4 b; out vec4 o; void main() { o = mix(a, b, 1.0); }").unwrap();
        let main = t.ast.main().unwrap();
        let StmtKind::Assign { value: Some(e), .. } = &main.body.stmts[0].kind else { panic!() };
        assert_eq!(t.type_of(e), Type::vec(4));
    }

    #[test]
    fn builtin_signatures() {
        assert!(check("uniform sampler2D t; void main() { vec4 c = texture2D(t, vec2(0.5)); }").is_ok());
        assert!(check("void main() { float r = inversesqrt(2.0); float d = dot(vec3(1.0), vec3(2.0)); }").is_ok());
        assert_eq!(kind("void main() { float d = dot(vec3(1.0), vec2(2.0)); }"), TypeErrorKind::TypeMismatch);
        assert_eq!(kind("void main() { float d = sqrt(1.0, 2.0); }"), TypeErrorKind::ArityMismatch);
    }

    #[test]
    fn error_kinds() {
        assert_eq!(kind("void main() { x = 1.0; }"), TypeErrorKind::UndeclaredIdentifier);
        assert_eq!(kind("void main() {} void main() {}"), TypeErrorKind::MultipleMain);
        assert_eq!(kind("float f() { return 1.0; }"), TypeErrorKind::MultipleMain);
        assert_eq!(kind("in vec4 a; void main() { a = vec4(1.0); }"), TypeErrorKind::InvalidQualifier);
        assert_eq!(kind("in bool a; void main() { }"), TypeErrorKind::InvalidQualifier);
        assert_eq!(kind("float f(float x) { return x; } void main() { float y = f(1.0, 2.0); }"), TypeErrorKind::ArityMismatch);
    }

    #[test]
    fn recursion_is_rejected() {
        assert_eq!(kind("float f(float x) { return f(x); } void main() { }"), TypeErrorKind::UndeclaredIdentifier);
    }

    #[test]
    fn shadowing_and_unwritten_outputs_warn() {
        let t = check("out vec4 o; void main() { float tmp = 1.0; { float tmp = 2.0; } }").unwrap();
        assert!(t.warnings.contains(&Warning::OutputNeverWritten { name: "o".into() }));
        assert!(t.warnings.iter().any(|w| matches!(w, Warning::Shadowing { name, .. } if name == "tmp")));
    }

    #[test]
    fn scalar_vector_arithmetic() {
        assert!(check("void main() { vec3 v = vec3(1.0) * 2.0; vec3 w = 0.5 + v; ivec2 k = ivec2(1, 2) % 2; }").is_ok());
        assert_eq!(kind("void main() { vec3 v = vec3(1.0) * 2; }"), TypeErrorKind::TypeMismatch);
    }
}
