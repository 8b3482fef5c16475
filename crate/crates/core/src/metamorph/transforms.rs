//! The seven single-site rewrites. Each one leaves the observable behavior
//! of the shader unchanged.

use super::tree::{fresh_copy, has_own_continue, local_names, touches, with_expr, with_stmt, IdAlloc, Namer};
use super::TransformError;
use crate::lang::{
    AssignOp, BinOp, Expr, ExprKind, NodeId, Qualifier, Scalar, ShaderAst, Stmt, StmtKind, SwitchCase, Type, TypedAst, UnOp,
};
use crate::rng::SplitMix64;

const PLACEHOLDER: StmtKind = StmtKind::Break;

fn not_applicable(why: &str) -> TransformError {
    TransformError::NotApplicable(why.to_string())
}

/// Swaps the statement `id` for whatever `f` builds from it.
fn rewrite_stmt(ast: &mut ShaderAst, id: NodeId, f: &mut dyn FnMut(Stmt) -> Result<Stmt, TransformError>) -> Result<(), TransformError> {
    let mut res = Err(not_applicable("site not found"));
    with_stmt(ast, id, &mut |s| {
        let old = std::mem::replace(s, Stmt::new(s.id, s.pos, PLACEHOLDER));
        res = match f(old.clone()) {
            Ok(new) => {
                *s = new;
                Ok(())
            }
            Err(e) => {
                *s = old;
                Err(e)
            }
        };
    });
    res
}

fn as_block(s: Stmt, ids: &mut IdAlloc) -> Stmt {
    match s.kind {
        StmtKind::Block(_) => s,
        _ => ids.block(vec![s]),
    }
}

/// `mix(e, u, 1.0)` for a float or vector expression `e`.
pub fn mix_wrap(typed: &TypedAst, site: NodeId, rng: &mut SplitMix64) -> Result<ShaderAst, TransformError> {
    let t = *typed.types.get(&site).ok_or_else(|| not_applicable("no such expression"))?;
    if !t.is_float_like() {
        return Err(not_applicable("mix needs a float or vector operand"));
    }
    let mut ast = typed.ast.clone();
    let mut ids = IdAlloc::for_tree(&ast);
    let locals = local_names(&ast);
    let globals: Vec<&str> = ast
        .globals
        .iter()
        .filter(|g| g.qualifier != Qualifier::Out && g.ty == t && !locals.contains(&g.name))
        .map(|g| g.name.as_str())
        .collect();
    let pick = rng.index(globals.len() + 1);
    let unused = match globals.get(pick) {
        Some(name) => Expr::var(ids.next(), *name),
        None => {
            let lit = [0.0f32, 0.5, 1.0, 2.0, -1.0][rng.index(5)];
            let lit = Expr::float(ids.next(), lit);
            match t {
                Type::Scalar(_) => lit,
                _ => ids.expr(ExprKind::Call(t.name().into(), vec![lit])),
            }
        }
    };
    let one = Expr::float(ids.next(), 1.0);
    let call_id = ids.next();
    let mut unused = Some(unused);
    let found = with_expr(&mut ast, site, &mut |e| {
        let origin = e.clone();
        *e = Expr::new(call_id, origin.pos, ExprKind::Call("mix".into(), vec![origin, unused.take().unwrap(), one.clone()]));
    });
    if !found {
        return Err(not_applicable("no such expression"));
    }
    Ok(ast)
}

pub fn if_to_switch(ast: &ShaderAst, site: NodeId) -> Result<ShaderAst, TransformError> {
    let mut out = ast.clone();
    let mut ids = IdAlloc::for_tree(ast);
    rewrite_stmt(&mut out, site, &mut |s| {
        let StmtKind::If { cond, then_branch, else_branch } = s.kind else { return Err(not_applicable("not an if")) };
        if then_branch.has_free_jump(false) || else_branch.as_ref().is_some_and(|e| e.has_free_jump(false)) {
            return Err(not_applicable("a break inside would bind to the switch"));
        }
        let selector = ids.expr(ExprKind::Call("int".into(), vec![cond]));
        let taken = vec![as_block(*then_branch, &mut ids), ids.stmt(StmtKind::Break)];
        let other = match else_branch {
            Some(e) => as_block(*e, &mut ids),
            None => ids.block(Vec::new()),
        };
        let cases =
            vec![SwitchCase { label: Some(1), body: taken }, SwitchCase { label: None, body: vec![other, ids.stmt(StmtKind::Break)] }];
        Ok(Stmt::new(s.id, s.pos, StmtKind::Switch { selector, cases }))
    })?;
    Ok(out)
}

pub fn for_to_while(ast: &ShaderAst, site: NodeId) -> Result<ShaderAst, TransformError> {
    let mut out = ast.clone();
    let mut ids = IdAlloc::for_tree(ast);
    rewrite_stmt(&mut out, site, &mut |s| {
        let StmtKind::For { init, cond, step, body } = s.kind else { return Err(not_applicable("not a for")) };
        let (Some(init), Some(cond)) = (init, cond) else { return Err(not_applicable("needs an init and a condition")) };
        if !matches!(init.kind, StmtKind::Decl { .. }) {
            return Err(not_applicable("induction variable is not loop-local"));
        }
        if has_own_continue(&body) {
            return Err(not_applicable("continue would skip the hoisted increment"));
        }
        let mut inner = vec![*body];
        inner.extend(step.map(|s| *s));
        let body = ids.block(inner);
        let w = ids.stmt(StmtKind::While { cond, body: Box::new(body) });
        let b = ids.block(vec![*init, w]);
        Ok(Stmt::new(s.id, s.pos, b.kind))
    })?;
    Ok(out)
}

pub fn while_to_for(ast: &ShaderAst, site: NodeId) -> Result<ShaderAst, TransformError> {
    let mut out = ast.clone();
    rewrite_stmt(&mut out, site, &mut |s| {
        let StmtKind::While { cond, body } = s.kind else { return Err(not_applicable("not a while")) };
        Ok(Stmt::new(s.id, s.pos, StmtKind::For { init: None, cond: Some(cond), step: None, body }))
    })?;
    Ok(out)
}

/// Statements that can sit inside a fresh one-trip loop.
pub fn wrappable(s: &Stmt) -> bool {
    !matches!(s.kind, StmtKind::Decl { .. } | StmtKind::Break | StmtKind::Continue | StmtKind::Return(_))
        && !s.has_free_jump(true)
        && !s.contains_return()
}

fn compare(ids: &mut IdAlloc, op: BinOp, var: &str, to: i32) -> Expr {
    let (l, r) = (ids.var(var), ids.int(to));
    ids.expr(ExprKind::Binary(op, Box::new(l), Box::new(r)))
}

fn counter_loop(ids: &mut IdAlloc, var: &str, from: i32, op: BinOp, to: i32, body: Stmt) -> Stmt {
    let from = ids.int(from);
    let init = ids.stmt(StmtKind::Decl { precision: None, ty: Type::INT, name: var.into(), init: Some(from) });
    let cond = compare(ids, op, var, to);
    let step = ids.stmt(StmtKind::Assign { target: var.into(), op: AssignOp::Inc, value: None });
    ids.stmt(StmtKind::For { init: Some(Box::new(init)), cond: Some(cond), step: Some(Box::new(step)), body: Box::new(body) })
}

pub fn single_iteration_wrap(ast: &ShaderAst, site: NodeId) -> Result<ShaderAst, TransformError> {
    let mut out = ast.clone();
    let mut ids = IdAlloc::for_tree(ast);
    let k = Namer::for_tree(ast).fresh("k");
    rewrite_stmt(&mut out, site, &mut |s| {
        if !wrappable(&s) {
            return Err(not_applicable("statement cannot move into a loop"));
        }
        let body = as_block(s, &mut ids);
        Ok(counter_loop(&mut ids, &k, 0, BinOp::Lt, 1, body))
    })?;
    Ok(out)
}

/// A `for` over a loop-local int with literal bounds and step that the body
/// never writes or escapes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Counted {
    pub var: String,
    pub init: i32,
    pub op: BinOp,
    pub bound: i32,
    pub step: i32,
    pub trip: u32,
}

fn int_lit(e: &Expr) -> Option<i32> {
    match &e.kind {
        ExprKind::IntLit(v) => Some(*v),
        ExprKind::Unary(UnOp::Neg, inner) => match inner.kind {
            ExprKind::IntLit(v) => v.checked_neg(),
            _ => None,
        },
        _ => None,
    }
}

pub fn counted(s: &Stmt, cap: u32) -> Option<Counted> {
    let StmtKind::For { init: Some(init), cond: Some(cond), step: Some(step), body } = &s.kind else { return None };
    let StmtKind::Decl { ty: Type::Scalar(Scalar::Int), name, init: Some(e0), .. } = &init.kind else { return None };
    let ExprKind::Binary(op, lhs, rhs) = &cond.kind else { return None };
    if !matches!(&lhs.kind, ExprKind::Var(v) if v == name) || !matches!(op, BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge | BinOp::Ne) {
        return None;
    }
    let StmtKind::Assign { target, op: aop, value } = &step.kind else { return None };
    if target != name {
        return None;
    }
    let step = match (aop, value) {
        (AssignOp::Inc, None) => 1,
        (AssignOp::Dec, None) => -1,
        (AssignOp::Add, Some(v)) => int_lit(v)?,
        (AssignOp::Sub, Some(v)) => int_lit(v)?.checked_neg()?,
        _ => return None,
    };
    if touches(body, name) || body.has_free_jump(true) {
        return None;
    }
    let (init, bound) = (int_lit(e0)?, int_lit(rhs)?);
    let holds = |v: i32| match op {
        BinOp::Lt => v < bound,
        BinOp::Le => v <= bound,
        BinOp::Gt => v > bound,
        BinOp::Ge => v >= bound,
        _ => v != bound,
    };
    let mut v = init;
    let mut trip = 0;
    while holds(v) {
        trip += 1;
        if trip > cap {
            return None;
        }
        v = v.checked_add(step)?;
    }
    Some(Counted { var: name.clone(), init, op: *op, bound, step, trip })
}

fn body_stmts(body: &Stmt, ids: &mut IdAlloc) -> Vec<Stmt> {
    match &body.kind {
        StmtKind::Block(b) => b.stmts.iter().map(|s| fresh_copy(s, ids)).collect(),
        _ => vec![fresh_copy(body, ids)],
    }
}

fn with_init(s: &Stmt, value: i32, ids: &mut IdAlloc) -> Stmt {
    let mut c = fresh_copy(s, ids);
    if let StmtKind::For { init: Some(init), .. } = &mut c.kind {
        if let StmtKind::Decl { init: Some(e), .. } = &mut init.kind {
            *e = Expr::int(ids.next(), value);
        }
    }
    c
}

/// Peels the first `p` iterations (1 ≤ p ≤ n, chosen by `rng`) into
/// straight-line copies, each binding the induction variable to its value.
/// A remainder loop runs the rest.
pub fn loop_unroll(ast: &ShaderAst, site: NodeId, rng: &mut SplitMix64) -> Result<ShaderAst, TransformError> {
    let mut out = ast.clone();
    let mut ids = IdAlloc::for_tree(ast);
    let choice = rng.next_u64();
    rewrite_stmt(&mut out, site, &mut |s| {
        let c = counted(&s, super::UNROLL_MAX_TRIP).ok_or_else(|| not_applicable("not a short counted loop"))?;
        let StmtKind::For { init: Some(init), body, .. } = &s.kind else { unreachable!() };
        let StmtKind::Decl { precision, .. } = &init.kind else { unreachable!() };
        let peel = if c.trip == 0 { 0 } else { 1 + (choice % c.trip as u64) as u32 };
        let mut stmts = Vec::new();
        for k in 0..peel {
            let v = c.init + k as i32 * c.step;
            let v = ids.int(v);
            let decl = ids.stmt(StmtKind::Decl { precision: *precision, ty: Type::INT, name: c.var.clone(), init: Some(v) });
            let mut copy = vec![decl];
            copy.extend(body_stmts(body, &mut ids));
            stmts.push(ids.block(copy));
        }
        if peel < c.trip {
            stmts.push(with_init(&s, c.init + peel as i32 * c.step, &mut ids));
        }
        let b = ids.block(stmts);
        Ok(Stmt::new(s.id, s.pos, b.kind))
    })?;
    Ok(out)
}

/// Runs iterations `[0, m)` in the original loop and `[m, n)` in a copy.
pub fn loop_split(ast: &ShaderAst, site: NodeId, rng: &mut SplitMix64) -> Result<ShaderAst, TransformError> {
    let mut out = ast.clone();
    let mut ids = IdAlloc::for_tree(ast);
    let choice = rng.next_u64();
    rewrite_stmt(&mut out, site, &mut |s| {
        let c = counted(&s, super::SPLIT_MAX_TRIP).filter(splittable).ok_or_else(|| not_applicable("not a monotone counted loop"))?;
        let m = 1 + (choice % (c.trip as u64 - 1)) as i32;
        let mid = c.init + m * c.step;
        let second = with_init(&s, mid, &mut ids);
        let mut first = s.clone();
        if let StmtKind::For { cond: Some(cond), .. } = &mut first.kind {
            let op = if c.step > 0 { BinOp::Lt } else { BinOp::Gt };
            *cond = compare(&mut ids, op, &c.var, mid);
        }
        first.id = ids.next();
        let b = ids.block(vec![first, second]);
        Ok(Stmt::new(s.id, s.pos, b.kind))
    })?;
    Ok(out)
}

pub fn splittable(c: &Counted) -> bool {
    c.trip >= 2 && ((c.step > 0 && matches!(c.op, BinOp::Lt | BinOp::Le)) || (c.step < 0 && matches!(c.op, BinOp::Gt | BinOp::Ge)))
}
