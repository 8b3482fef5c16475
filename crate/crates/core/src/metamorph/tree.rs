//! Mutable traversal, fresh identifiers, and renaming over the syntax tree.

use std::cell::RefCell;
use std::collections::{BTreeSet, HashMap};

use crate::lang::{is_reserved, typeck::is_builtin, Block, Expr, ExprKind, NodeId, Pos, ShaderAst, Stmt, StmtKind};

/// Hands out node ids above everything already in a tree.
pub struct IdAlloc(u32);

impl IdAlloc {
    pub fn for_tree(ast: &ShaderAst) -> IdAlloc {
        IdAlloc(ast.max_node_id() + 1)
    }

    pub fn next(&mut self) -> NodeId {
        self.0 += 1;
        NodeId(self.0 - 1)
    }

    pub fn stmt(&mut self, kind: StmtKind) -> Stmt {
        Stmt::new(self.next(), Pos::default(), kind)
    }

    pub fn expr(&mut self, kind: ExprKind) -> Expr {
        Expr::new(self.next(), Pos::default(), kind)
    }

    pub fn int(&mut self, v: i32) -> Expr {
        Expr::int(self.next(), v)
    }

    pub fn var(&mut self, name: &str) -> Expr {
        Expr::var(self.next(), name)
    }

    pub fn block(&mut self, stmts: Vec<Stmt>) -> Stmt {
        let b = Block::new(self.next(), stmts);
        self.stmt(StmtKind::Block(b))
    }
}

/// Produces identifiers that collide with nothing in the tree.
pub struct Namer {
    taken: BTreeSet<String>,
}

impl Namer {
    pub fn for_tree(ast: &ShaderAst) -> Namer {
        Namer { taken: identifiers(ast) }
    }

    pub fn fresh(&mut self, stem: &str) -> String {
        let name = (0..).map(|n| format!("{stem}{n}")).find(|n| !self.taken.contains(n) && !is_reserved(n) && !is_builtin(n)).unwrap();
        self.taken.insert(name.clone());
        name
    }
}

/// Every name that appears anywhere: globals, functions, parameters,
/// declarations, assignment targets, and variable references.
pub fn identifiers(ast: &ShaderAst) -> BTreeSet<String> {
    let out: RefCell<BTreeSet<String>> = RefCell::new(ast.globals.iter().map(|g| g.name.clone()).collect());
    for f in &ast.functions {
        out.borrow_mut().insert(f.name.clone());
        out.borrow_mut().extend(f.params.iter().map(|p| p.name.clone()));
        f.body.visit(
            &mut |s| match &s.kind {
                StmtKind::Decl { name, .. } | StmtKind::Assign { target: name, .. } => {
                    out.borrow_mut().insert(name.clone());
                }
                _ => {}
            },
            &mut |e| {
                if let ExprKind::Var(v) = &e.kind {
                    out.borrow_mut().insert(v.clone());
                }
            },
        );
    }
    out.into_inner()
}

/// Names bound locally somewhere (declarations and parameters).
pub fn local_names(ast: &ShaderAst) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    for f in &ast.functions {
        out.extend(f.params.iter().map(|p| p.name.clone()));
        f.body.visit(
            &mut |s| {
                if let StmtKind::Decl { name, .. } = &s.kind {
                    out.insert(name.clone());
                }
            },
            &mut |_| {},
        );
    }
    out
}

pub fn stmt_kids_mut(k: &mut StmtKind) -> Vec<&mut Stmt> {
    match k {
        StmtKind::Block(b) => b.stmts.iter_mut().collect(),
        StmtKind::If { then_branch, else_branch, .. } => {
            let mut v = vec![&mut **then_branch];
            if let Some(e) = else_branch {
                v.push(&mut **e);
            }
            v
        }
        StmtKind::Switch { cases, .. } => cases.iter_mut().flat_map(|c| c.body.iter_mut()).collect(),
        StmtKind::For { init, step, body, .. } => {
            let mut v = Vec::new();
            if let Some(s) = init {
                v.push(&mut **s);
            }
            if let Some(s) = step {
                v.push(&mut **s);
            }
            v.push(&mut **body);
            v
        }
        StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => vec![&mut **body],
        _ => Vec::new(),
    }
}

pub fn stmt_exprs_mut(k: &mut StmtKind) -> Vec<&mut Expr> {
    match k {
        StmtKind::Decl { init: Some(e), .. }
        | StmtKind::Assign { value: Some(e), .. }
        | StmtKind::Expr(e)
        | StmtKind::If { cond: e, .. }
        | StmtKind::Switch { selector: e, .. }
        | StmtKind::For { cond: Some(e), .. }
        | StmtKind::While { cond: e, .. }
        | StmtKind::DoWhile { cond: e, .. }
        | StmtKind::Return(Some(e)) => vec![e],
        _ => Vec::new(),
    }
}

pub fn expr_kids_mut(e: &mut Expr) -> Vec<&mut Expr> {
    match &mut e.kind {
        ExprKind::Unary(_, a) | ExprKind::Swizzle(a, _) => vec![&mut **a],
        ExprKind::Binary(_, a, b) => vec![&mut **a, &mut **b],
        ExprKind::Ternary(a, b, c) => vec![&mut **a, &mut **b, &mut **c],
        ExprKind::Call(_, args) => args.iter_mut().collect(),
        _ => Vec::new(),
    }
}

fn find_stmt(s: &mut Stmt, id: NodeId, f: &mut dyn FnMut(&mut Stmt)) -> bool {
    if s.id == id {
        f(s);
        return true;
    }
    stmt_kids_mut(&mut s.kind).into_iter().any(|k| find_stmt(k, id, f))
}

/// Runs `f` on the statement with `id`. Returns whether it was found.
pub fn with_stmt(ast: &mut ShaderAst, id: NodeId, f: &mut dyn FnMut(&mut Stmt)) -> bool {
    ast.functions.iter_mut().any(|func| func.body.stmts.iter_mut().any(|s| find_stmt(s, id, f)))
}

fn find_block(b: &mut Block, id: NodeId, f: &mut dyn FnMut(&mut Block)) -> bool {
    if b.id == id {
        f(b);
        return true;
    }
    b.stmts.iter_mut().any(|s| find_block_in(s, id, f))
}

fn find_block_in(s: &mut Stmt, id: NodeId, f: &mut dyn FnMut(&mut Block)) -> bool {
    if let StmtKind::Block(b) = &mut s.kind {
        return find_block(b, id, f);
    }
    stmt_kids_mut(&mut s.kind).into_iter().any(|k| find_block_in(k, id, f))
}

pub fn with_block(ast: &mut ShaderAst, id: NodeId, f: &mut dyn FnMut(&mut Block)) -> bool {
    ast.functions.iter_mut().any(|func| find_block(&mut func.body, id, f))
}

fn find_expr(e: &mut Expr, id: NodeId, f: &mut dyn FnMut(&mut Expr)) -> bool {
    if e.id == id {
        f(e);
        return true;
    }
    expr_kids_mut(e).into_iter().any(|k| find_expr(k, id, f))
}

fn find_expr_in(s: &mut Stmt, id: NodeId, f: &mut dyn FnMut(&mut Expr)) -> bool {
    stmt_exprs_mut(&mut s.kind).into_iter().any(|e| find_expr(e, id, f))
        || stmt_kids_mut(&mut s.kind).into_iter().any(|k| find_expr_in(k, id, f))
}

pub fn with_expr(ast: &mut ShaderAst, id: NodeId, f: &mut dyn FnMut(&mut Expr)) -> bool {
    ast.functions.iter_mut().any(|func| func.body.stmts.iter_mut().any(|s| find_expr_in(s, id, f)))
}

fn renumber_expr(e: &mut Expr, ids: &mut IdAlloc) {
    e.id = ids.next();
    for k in expr_kids_mut(e) {
        renumber_expr(k, ids);
    }
}

/// Gives every node under `s` a fresh id, for pasted copies.
pub fn renumber(s: &mut Stmt, ids: &mut IdAlloc) {
    s.id = ids.next();
    if let StmtKind::Block(b) = &mut s.kind {
        b.id = ids.next();
    }
    for e in stmt_exprs_mut(&mut s.kind) {
        renumber_expr(e, ids);
    }
    for k in stmt_kids_mut(&mut s.kind) {
        renumber(k, ids);
    }
}

pub fn fresh_copy(s: &Stmt, ids: &mut IdAlloc) -> Stmt {
    let mut c = s.clone();
    renumber(&mut c, ids);
    c
}

fn rename_expr(e: &mut Expr, map: &HashMap<String, String>) {
    if let ExprKind::Var(v) = &mut e.kind {
        if let Some(n) = map.get(v) {
            *v = n.clone();
        }
    }
    for k in expr_kids_mut(e) {
        rename_expr(k, map);
    }
}

/// Renames variables (declarations, targets, and uses) under `s`.
pub fn rename(s: &mut Stmt, map: &HashMap<String, String>) {
    match &mut s.kind {
        StmtKind::Decl { name, .. } | StmtKind::Assign { target: name, .. } => {
            if let Some(n) = map.get(name) {
                *name = n.clone();
            }
        }
        _ => {}
    }
    for e in stmt_exprs_mut(&mut s.kind) {
        rename_expr(e, map);
    }
    for k in stmt_kids_mut(&mut s.kind) {
        rename(k, map);
    }
}

/// Statements in statement position: block members, case bodies, branch
/// and loop bodies. `for` headers are excluded.
pub fn positioned<'a>(b: &'a Block, out: &mut Vec<&'a Stmt>) {
    for s in &b.stmts {
        positioned_stmt(s, out);
    }
}

fn positioned_stmt<'a>(s: &'a Stmt, out: &mut Vec<&'a Stmt>) {
    out.push(s);
    match &s.kind {
        StmtKind::Block(b) => positioned(b, out),
        StmtKind::If { then_branch, else_branch, .. } => {
            positioned_stmt(then_branch, out);
            if let Some(e) = else_branch {
                positioned_stmt(e, out);
            }
        }
        StmtKind::Switch { cases, .. } => cases.iter().flat_map(|c| &c.body).for_each(|s| positioned_stmt(s, out)),
        StmtKind::For { body, .. } | StmtKind::While { body, .. } | StmtKind::DoWhile { body, .. } => positioned_stmt(body, out),
        _ => {}
    }
}

/// Every block id under a function body, the body itself first.
pub fn block_ids(b: &Block, out: &mut Vec<NodeId>) {
    out.push(b.id);
    let mut stmts = Vec::new();
    positioned(b, &mut stmts);
    for s in stmts {
        if let StmtKind::Block(inner) = &s.kind {
            out.push(inner.id);
        }
    }
}

/// A `continue` that binds to the loop whose body is `s`.
pub fn has_own_continue(s: &Stmt) -> bool {
    match &s.kind {
        StmtKind::Continue => true,
        StmtKind::For { .. } | StmtKind::While { .. } | StmtKind::DoWhile { .. } => false,
        StmtKind::Block(b) => b.stmts.iter().any(has_own_continue),
        StmtKind::If { then_branch, else_branch, .. } => {
            has_own_continue(then_branch) || else_branch.as_deref().is_some_and(has_own_continue)
        }
        StmtKind::Switch { cases, .. } => cases.iter().flat_map(|c| &c.body).any(has_own_continue),
        _ => false,
    }
}

/// Whether `name` is assigned or redeclared anywhere under `s`.
pub fn touches(s: &Stmt, name: &str) -> bool {
    let mut hit = false;
    s.visit(
        &mut |s| match &s.kind {
            StmtKind::Decl { name: n, .. } | StmtKind::Assign { target: n, .. } if n == name => hit = true,
            _ => {}
        },
        &mut |_| {},
    );
    hit
}
