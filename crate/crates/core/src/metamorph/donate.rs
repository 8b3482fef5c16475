//! Code donation: a top-level statement run from another shader's `main`,
//! renamed apart, fed from literals, and drained into a fresh output.

use std::collections::{BTreeSet, HashMap};

use super::tree::{fresh_copy, rename, with_block, IdAlloc, Namer};
use super::TransformError;
use crate::lang::{
    typeck::is_builtin, AssignOp, Expr, ExprKind, GlobalDecl, NodeId, Pos, Precision, Qualifier, Scalar, ShaderAst, Stmt, StmtKind, Type,
    TypedAst,
};
use crate::rng::SplitMix64;

/// Longest statement run considered for donation.
const MAX_REGION: usize = 6;

#[derive(Clone, Debug)]
pub struct Donor {
    pub name: String,
    pub typed: TypedAst,
    /// Content hash of the donor's canonical text.
    pub hash: u64,
}

#[derive(Clone, Debug)]
struct Region {
    start: usize,
    end: usize,
    free: Vec<(String, Type, Option<Precision>)>,
    result: (String, Type),
}

struct Scan<'a> {
    scopes: Vec<BTreeSet<String>>,
    free: BTreeSet<String>,
    declared: BTreeSet<String>,
    user_fns: &'a BTreeSet<String>,
    ok: bool,
}

impl Scan<'_> {
    fn use_name(&mut self, n: &str) {
        if !self.scopes.iter().any(|s| s.contains(n)) {
            self.free.insert(n.to_string());
        }
    }

    fn expr(&mut self, e: &Expr) {
        match &e.kind {
            ExprKind::Var(v) => self.use_name(v),
            ExprKind::Call(f, _) if self.user_fns.contains(f) => self.ok = false,
            _ => {}
        }
        for c in e.children() {
            self.expr(c);
        }
    }

    fn scoped(&mut self, f: impl FnOnce(&mut Self)) {
        self.scopes.push(BTreeSet::new());
        f(self);
        self.scopes.pop();
    }

    fn stmt(&mut self, s: &Stmt) {
        match &s.kind {
            StmtKind::Decl { name, init, .. } => {
                if let Some(e) = init {
                    self.expr(e);
                }
                self.scopes.last_mut().unwrap().insert(name.clone());
                self.declared.insert(name.clone());
            }
            StmtKind::Assign { target, value, .. } => {
                self.use_name(target);
                if let Some(e) = value {
                    self.expr(e);
                }
            }
            StmtKind::Expr(e) => self.expr(e),
            StmtKind::Block(b) => self.scoped(|me| b.stmts.iter().for_each(|s| me.stmt(s))),
            StmtKind::If { cond, then_branch, else_branch } => {
                self.expr(cond);
                self.scoped(|me| me.stmt(then_branch));
                if let Some(e) = else_branch {
                    self.scoped(|me| me.stmt(e));
                }
            }
            StmtKind::Switch { selector, cases } => {
                self.expr(selector);
                self.scoped(|me| cases.iter().flat_map(|c| &c.body).for_each(|s| me.stmt(s)));
            }
            StmtKind::For { init, cond, step, body } => self.scoped(|me| {
                if let Some(s) = init {
                    me.stmt(s);
                }
                if let Some(c) = cond {
                    me.expr(c);
                }
                if let Some(s) = step {
                    me.stmt(s);
                }
                me.scoped(|me| me.stmt(body));
            }),
            StmtKind::While { cond, body } => {
                self.expr(cond);
                self.scoped(|me| me.stmt(body));
            }
            StmtKind::DoWhile { body, cond } => {
                self.scoped(|me| me.stmt(body));
                self.expr(cond);
            }
            StmtKind::Return(_) => self.ok = false,
            StmtKind::Break | StmtKind::Continue => {}
        }
    }
}

fn analyze(ast: &ShaderAst, start: usize, end: usize) -> Option<Region> {
    let main = ast.main()?;
    let stmts = &main.body.stmts[start..end];
    let user_fns: BTreeSet<String> = ast.functions.iter().map(|f| f.name.clone()).filter(|n| !is_builtin(n)).collect();
    // Types visible at the start of the region.
    let mut visible: HashMap<String, (Type, Option<Precision>)> =
        ast.globals.iter().map(|g| (g.name.clone(), (g.ty, g.precision))).collect();
    for s in &main.body.stmts[..start] {
        if let StmtKind::Decl { precision, ty, name, .. } = &s.kind {
            visible.insert(name.clone(), (*ty, *precision));
        }
    }
    let mut scan = Scan { scopes: vec![BTreeSet::new()], free: BTreeSet::new(), declared: BTreeSet::new(), user_fns: &user_fns, ok: true };
    for s in stmts {
        scan.stmt(s);
    }
    if !scan.ok {
        return None;
    }
    let mut free = Vec::new();
    for n in &scan.free {
        let (ty, precision) = *visible.get(n)?;
        if ty == Type::Sampler2D {
            return None;
        }
        free.push((n.clone(), ty, precision));
    }
    // The region's result: the last top-level float-like definition.
    let mut top: HashMap<&str, Type> = free.iter().map(|(n, t, _)| (n.as_str(), *t)).collect();
    let mut result = None;
    for s in stmts {
        match &s.kind {
            StmtKind::Decl { ty, name, .. } => {
                top.insert(name, *ty);
                if ty.is_float_like() {
                    result = Some((name.clone(), *ty));
                }
            }
            StmtKind::Assign { target, .. } => {
                if let Some(t) = top.get(target.as_str()).filter(|t| t.is_float_like()) {
                    result = Some((target.clone(), *t));
                }
            }
            _ => {}
        }
    }
    Some(Region { start, end, free, result: result? })
}

fn regions(ast: &ShaderAst) -> Vec<Region> {
    let n = ast.main().map_or(0, |m| m.body.stmts.len());
    (0..n).flat_map(|a| (a + 1..=n.min(a + MAX_REGION)).map(move |b| (a, b))).filter_map(|(a, b)| analyze(ast, a, b)).collect()
}

pub fn has_region(d: &Donor) -> bool {
    !regions(&d.typed.ast).is_empty()
}

fn literal(ty: Type, ids: &mut IdAlloc, rng: &mut SplitMix64) -> Expr {
    let scalar = match ty.scalar() {
        Some(Scalar::Float) => Expr::float(ids.next(), [0.25f32, 0.5, 0.75, 1.0, 2.0][rng.index(5)]),
        Some(Scalar::Int) => Expr::int(ids.next(), rng.range_inclusive(1, 4) as i32),
        _ => ids.expr(ExprKind::BoolLit(rng.chance(1, 2))),
    };
    match ty {
        Type::Vector(..) => ids.expr(ExprKind::Call(ty.name().into(), vec![scalar])),
        _ => scalar,
    }
}

/// Inserts a region of `donor` into block `site` of `target`.
pub fn donate(target: &ShaderAst, site: NodeId, donor: &Donor, rng: &mut SplitMix64) -> Result<ShaderAst, TransformError> {
    let found = regions(&donor.typed.ast);
    if found.is_empty() {
        return Err(TransformError::NoDonatableRegion);
    }
    let region = &found[rng.index(found.len())];
    let src = &donor.typed.ast.main().unwrap().body.stmts[region.start..region.end];

    let mut out = target.clone();
    let mut ids = IdAlloc::for_tree(target);
    let mut namer = Namer::for_tree(target);
    let mut declared = BTreeSet::new();
    for s in src {
        s.visit(
            &mut |s| {
                if let StmtKind::Decl { name, .. } = &s.kind {
                    declared.insert(name.clone());
                }
            },
            &mut |_| {},
        );
    }
    let mut map = HashMap::new();
    for n in region.free.iter().map(|f| &f.0).chain(&declared) {
        if !map.contains_key(n) {
            map.insert(n.clone(), namer.fresh("d"));
        }
    }
    let mut body = Vec::new();
    for (n, ty, precision) in &region.free {
        let init = literal(*ty, &mut ids, rng);
        body.push(ids.stmt(StmtKind::Decl { precision: *precision, ty: *ty, name: map[n].clone(), init: Some(init) }));
    }
    for s in src {
        let mut c = fresh_copy(s, &mut ids);
        rename(&mut c, &map);
        body.push(c);
    }
    let sink = namer.fresh("donated");
    let value = Expr::var(ids.next(), map[&region.result.0].clone());
    body.push(ids.stmt(StmtKind::Assign { target: sink.clone(), op: AssignOp::Set, value: Some(value) }));
    out.globals.push(GlobalDecl { qualifier: Qualifier::Out, precision: None, ty: region.result.1, name: sink, pos: Pos::default() });

    let donated = ids.block(body);
    let at = rng.next_u64();
    let mut donated = Some(donated);
    let ok = with_block(&mut out, site, &mut |b| {
        let pos = (at % (b.stmts.len() as u64 + 1)) as usize;
        b.stmts.insert(pos, donated.take().unwrap());
    });
    if !ok {
        return Err(TransformError::NotApplicable("no such block".into()));
    }
    Ok(out)
}
