//! Syntax tree for the shading language subset.
//!
//! Every statement and expression carries a [`NodeId`] that is unique within
//! one tree. Identifiers are what transformation recipes use to address
//! sites, so equality on the tree ignores them (along with source positions).

use std::fmt;

use serde::{Deserialize, Serialize};

/// 1-based source position.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pos {
    pub line: u32,
    pub col: u32,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u32);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Stage {
    Vertex,
    Fragment,
}

impl Stage {
    pub fn from_extension(ext: &str) -> Option<Stage> {
        match ext {
            "vert" => Some(Stage::Vertex),
            "frag" => Some(Stage::Fragment),
            _ => None,
        }
    }
}

/// A shader as it arrives from disk or from a corpus manifest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceShader {
    pub name: String,
    pub stage: Stage,
    pub text: String,
}

/// Scalar component kinds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scalar {
    Float,
    Int,
    Bool,
}

/// Value types of the language. `Vector` lanes are 2..=4.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Type {
    Void,
    Scalar(Scalar),
    Vector(Scalar, u8),
    Sampler2D,
}

impl Type {
    pub const FLOAT: Type = Type::Scalar(Scalar::Float);
    pub const INT: Type = Type::Scalar(Scalar::Int);
    pub const BOOL: Type = Type::Scalar(Scalar::Bool);

    pub fn vec(n: u8) -> Type {
        Type::Vector(Scalar::Float, n)
    }

    pub fn with_lanes(scalar: Scalar, lanes: u8) -> Type {
        if lanes == 1 {
            Type::Scalar(scalar)
        } else {
            Type::Vector(scalar, lanes)
        }
    }

    pub fn scalar(self) -> Option<Scalar> {
        match self {
            Type::Scalar(s) | Type::Vector(s, _) => Some(s),
            _ => None,
        }
    }

    pub fn lanes(self) -> u8 {
        match self {
            Type::Vector(_, n) => n,
            _ => 1,
        }
    }

    pub fn is_float_like(self) -> bool {
        self.scalar() == Some(Scalar::Float)
    }

    pub fn is_numeric(self) -> bool {
        matches!(self.scalar(), Some(Scalar::Float | Scalar::Int))
    }

    pub fn name(self) -> &'static str {
        match self {
            Type::Void => "void",
            Type::Sampler2D => "sampler2D",
            Type::Scalar(Scalar::Float) => "float",
            Type::Scalar(Scalar::Int) => "int",
            Type::Scalar(Scalar::Bool) => "bool",
            Type::Vector(Scalar::Float, 2) => "vec2",
            Type::Vector(Scalar::Float, 3) => "vec3",
            Type::Vector(Scalar::Float, _) => "vec4",
            Type::Vector(Scalar::Int, 2) => "ivec2",
            Type::Vector(Scalar::Int, 3) => "ivec3",
            Type::Vector(Scalar::Int, _) => "ivec4",
            Type::Vector(Scalar::Bool, 2) => "bvec2",
            Type::Vector(Scalar::Bool, 3) => "bvec3",
            Type::Vector(Scalar::Bool, _) => "bvec4",
        }
    }

    pub fn from_name(name: &str) -> Option<Type> {
        Some(match name {
            "void" => Type::Void,
            "sampler2D" => Type::Sampler2D,
            "float" => Type::FLOAT,
            "int" => Type::INT,
            "bool" => Type::BOOL,
            "vec2" => Type::vec(2),
            "vec3" => Type::vec(3),
            "vec4" => Type::vec(4),
            "ivec2" => Type::Vector(Scalar::Int, 2),
            "ivec3" => Type::Vector(Scalar::Int, 3),
            "ivec4" => Type::Vector(Scalar::Int, 4),
            "bvec2" => Type::Vector(Scalar::Bool, 2),
            "bvec3" => Type::Vector(Scalar::Bool, 3),
            "bvec4" => Type::Vector(Scalar::Bool, 4),
            _ => return None,
        })
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Precision {
    Highp,
    Mediump,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Qualifier {
    In,
    Out,
    Uniform,
}

impl Qualifier {
    pub fn keyword(self) -> &'static str {
        match self {
            Qualifier::In => "in",
            Qualifier::Out => "out",
            Qualifier::Uniform => "uniform",
        }
    }
}

#[derive(Clone, Debug)]
pub struct GlobalDecl {
    pub qualifier: Qualifier,
    pub precision: Option<Precision>,
    pub ty: Type,
    pub name: String,
    pub pos: Pos,
}

impl PartialEq for GlobalDecl {
    fn eq(&self, other: &Self) -> bool {
        self.qualifier == other.qualifier && self.precision == other.precision && self.ty == other.ty && self.name == other.name
    }
}

#[derive(Clone, Debug)]
pub struct Param {
    pub precision: Option<Precision>,
    pub ty: Type,
    pub name: String,
}

impl PartialEq for Param {
    fn eq(&self, other: &Self) -> bool {
        self.precision == other.precision && self.ty == other.ty && self.name == other.name
    }
}

#[derive(Clone, Debug)]
pub struct FunctionDecl {
    pub ret: Type,
    pub name: String,
    pub params: Vec<Param>,
    pub body: Block,
    pub pos: Pos,
}

impl PartialEq for FunctionDecl {
    fn eq(&self, other: &Self) -> bool {
        self.ret == other.ret && self.name == other.name && self.params == other.params && self.body == other.body
    }
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ShaderAst {
    pub globals: Vec<GlobalDecl>,
    pub functions: Vec<FunctionDecl>,
}

impl ShaderAst {
    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    pub fn main(&self) -> Option<&FunctionDecl> {
        self.function("main")
    }

    pub fn main_mut(&mut self) -> Option<&mut FunctionDecl> {
        self.functions.iter_mut().find(|f| f.name == "main")
    }

    pub fn global(&self, name: &str) -> Option<&GlobalDecl> {
        self.globals.iter().find(|g| g.name == name)
    }

    /// Largest node identifier in the tree (0 when empty).
    pub fn max_node_id(&self) -> u32 {
        let max = std::cell::Cell::new(0);
        let bump = |id: u32| max.set(max.get().max(id));
        for f in &self.functions {
            bump(f.body.id.0);
            f.body.visit(
                &mut |s| {
                    bump(s.id.0);
                    if let StmtKind::Block(b) = &s.kind {
                        bump(b.id.0);
                    }
                },
                &mut |e| bump(e.id.0),
            );
        }
        max.get()
    }
}

/// A braced statement list. Blocks carry an id so that insertion sites can
/// be addressed.
#[derive(Clone, Debug)]
pub struct Block {
    pub id: NodeId,
    pub stmts: Vec<Stmt>,
}

impl PartialEq for Block {
    fn eq(&self, other: &Self) -> bool {
        self.stmts == other.stmts
    }
}

impl Block {
    pub fn new(id: NodeId, stmts: Vec<Stmt>) -> Block {
        Block { id, stmts }
    }

    /// Pre-order walk over every statement and expression.
    pub fn visit(&self, on_stmt: &mut dyn FnMut(&Stmt), on_expr: &mut dyn FnMut(&Expr)) {
        for s in &self.stmts {
            s.visit(on_stmt, on_expr);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum AssignOp {
    Set,
    Add,
    Sub,
    Mul,
    Div,
    /// `x++`
    Inc,
    /// `x--`
    Dec,
}

impl AssignOp {
    pub fn symbol(self) -> &'static str {
        match self {
            AssignOp::Set => "=",
            AssignOp::Add => "+=",
            AssignOp::Sub => "-=",
            AssignOp::Mul => "*=",
            AssignOp::Div => "/=",
            AssignOp::Inc => "++",
            AssignOp::Dec => "--",
        }
    }

    /// The binary operator a compound assignment applies.
    pub fn binary(self) -> Option<BinOp> {
        match self {
            AssignOp::Set => None,
            AssignOp::Add | AssignOp::Inc => Some(BinOp::Add),
            AssignOp::Sub | AssignOp::Dec => Some(BinOp::Sub),
            AssignOp::Mul => Some(BinOp::Mul),
            AssignOp::Div => Some(BinOp::Div),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SwitchCase {
    /// `None` is the `default:` label.
    pub label: Option<i32>,
    pub body: Vec<Stmt>,
}

#[derive(Clone, Debug)]
pub struct Stmt {
    pub id: NodeId,
    pub pos: Pos,
    pub kind: StmtKind,
}

impl PartialEq for Stmt {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum StmtKind {
    Decl { precision: Option<Precision>, ty: Type, name: String, init: Option<Expr> },
    Assign { target: String, op: AssignOp, value: Option<Expr> },
    Expr(Expr),
    Block(Block),
    If { cond: Expr, then_branch: Box<Stmt>, else_branch: Option<Box<Stmt>> },
    Switch { selector: Expr, cases: Vec<SwitchCase> },
    For { init: Option<Box<Stmt>>, cond: Option<Expr>, step: Option<Box<Stmt>>, body: Box<Stmt> },
    While { cond: Expr, body: Box<Stmt> },
    DoWhile { body: Box<Stmt>, cond: Expr },
    Break,
    Continue,
    Return(Option<Expr>),
}

impl Stmt {
    pub fn new(id: NodeId, pos: Pos, kind: StmtKind) -> Stmt {
        Stmt { id, pos, kind }
    }

    pub fn visit(&self, on_stmt: &mut dyn FnMut(&Stmt), on_expr: &mut dyn FnMut(&Expr)) {
        on_stmt(self);
        match &self.kind {
            StmtKind::Decl { init, .. } => {
                if let Some(e) = init {
                    e.visit(on_expr);
                }
            }
            StmtKind::Assign { value, .. } => {
                if let Some(e) = value {
                    e.visit(on_expr);
                }
            }
            StmtKind::Expr(e) => e.visit(on_expr),
            StmtKind::Block(b) => b.visit(on_stmt, on_expr),
            StmtKind::If { cond, then_branch, else_branch } => {
                cond.visit(on_expr);
                then_branch.visit(on_stmt, on_expr);
                if let Some(e) = else_branch {
                    e.visit(on_stmt, on_expr);
                }
            }
            StmtKind::Switch { selector, cases } => {
                selector.visit(on_expr);
                for c in cases {
                    for s in &c.body {
                        s.visit(on_stmt, on_expr);
                    }
                }
            }
            StmtKind::For { init, cond, step, body } => {
                if let Some(s) = init {
                    s.visit(on_stmt, on_expr);
                }
                if let Some(c) = cond {
                    c.visit(on_expr);
                }
                if let Some(s) = step {
                    s.visit(on_stmt, on_expr);
                }
                body.visit(on_stmt, on_expr);
            }
            StmtKind::While { cond, body } | StmtKind::DoWhile { body, cond } => {
                cond.visit(on_expr);
                body.visit(on_stmt, on_expr);
            }
            StmtKind::Return(Some(e)) => e.visit(on_expr),
            StmtKind::Break | StmtKind::Continue | StmtKind::Return(None) => {}
        }
    }

    /// Whether this statement contains a `break` (or, with `include_continue`,
    /// a `continue`) that would escape the statement itself.
    pub fn has_free_jump(&self, include_continue: bool) -> bool {
        free_jump(self, include_continue, false, false)
    }

    pub fn contains_return(&self) -> bool {
        let mut found = false;
        self.visit(
            &mut |s| {
                if matches!(s.kind, StmtKind::Return(_)) {
                    found = true;
                }
            },
            &mut |_| {},
        );
        found
    }
}

fn free_jump(s: &Stmt, cont: bool, in_loop: bool, in_switch: bool) -> bool {
    let list = |stmts: &[Stmt], l: bool, sw: bool| stmts.iter().any(|s| free_jump(s, cont, l, sw));
    match &s.kind {
        StmtKind::Break => !in_loop && !in_switch,
        StmtKind::Continue => cont && !in_loop,
        StmtKind::Block(b) => list(&b.stmts, in_loop, in_switch),
        StmtKind::If { then_branch, else_branch, .. } => {
            free_jump(then_branch, cont, in_loop, in_switch) || else_branch.as_ref().is_some_and(|e| free_jump(e, cont, in_loop, in_switch))
        }
        StmtKind::Switch { cases, .. } => cases.iter().any(|c| list(&c.body, in_loop, true)),
        StmtKind::For { body, .. } | StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => free_jump(body, cont, true, true),
        _ => false,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    /// Binding power; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Add | BinOp::Sub => 5,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 6,
        }
    }

    pub fn is_arithmetic(self) -> bool {
        matches!(self, BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div | BinOp::Rem)
    }

    pub fn is_comparison(self) -> bool {
        matches!(self, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Eq | BinOp::Ne)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Clone, Debug)]
pub struct Expr {
    pub id: NodeId,
    pub pos: Pos,
    pub kind: ExprKind,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ExprKind {
    /// Float literal, stored as bits so equality is exact.
    FloatLit(u32),
    IntLit(i32),
    BoolLit(bool),
    Var(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Ternary(Box<Expr>, Box<Expr>, Box<Expr>),
    /// Builtin, constructor, or user function call.
    Call(String, Vec<Expr>),
    Swizzle(Box<Expr>, String),
}

impl Expr {
    pub fn new(id: NodeId, pos: Pos, kind: ExprKind) -> Expr {
        Expr { id, pos, kind }
    }

    pub fn float(id: NodeId, v: f32) -> Expr {
        Expr::new(id, Pos::default(), ExprKind::FloatLit(v.to_bits()))
    }

    pub fn int(id: NodeId, v: i32) -> Expr {
        Expr::new(id, Pos::default(), ExprKind::IntLit(v))
    }

    pub fn var(id: NodeId, name: impl Into<String>) -> Expr {
        Expr::new(id, Pos::default(), ExprKind::Var(name.into()))
    }

    pub fn children(&self) -> Vec<&Expr> {
        match &self.kind {
            ExprKind::Unary(_, a) | ExprKind::Swizzle(a, _) => vec![a],
            ExprKind::Binary(_, a, b) => vec![a, b],
            ExprKind::Ternary(a, b, c) => vec![a, b, c],
            ExprKind::Call(_, args) => args.iter().collect(),
            _ => Vec::new(),
        }
    }

    pub fn visit(&self, f: &mut dyn FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }
}

pub const SWIZZLE_SETS: [&str; 3] = ["xyzw", "rgba", "stpq"];

/// Lane indices selected by a swizzle string, if well formed.
pub fn swizzle_lanes(swizzle: &str) -> Option<Vec<u8>> {
    if swizzle.is_empty() || swizzle.len() > 4 {
        return None;
    }
    let set = SWIZZLE_SETS.iter().find(|set| swizzle.chars().all(|c| set.contains(c)))?;
    Some(swizzle.chars().map(|c| set.find(c).unwrap() as u8).collect())
}
