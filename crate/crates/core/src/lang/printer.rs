//! Canonical pretty printer. Output reparses to a structurally equal tree.

use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

pub fn print_shader(ast: &ShaderAst) -> String {
    let mut out = String::new();
    for g in &ast.globals {
        out.push_str(g.qualifier.keyword());
        out.push(' ');
        if let Some(p) = g.precision {
            out.push_str(precision_kw(p));
            out.push(' ');
        }
        let _ = writeln!(out, "{} {};", g.ty, g.name);
    }
    for f in &ast.functions {
        if !out.is_empty() {
            out.push('\n');
        }
        let params: Vec<String> = f
            .params
            .iter()
            .map(|p| match p.precision {
                Some(pr) => format!("{} {} {}", precision_kw(pr), p.ty, p.name),
                None => format!("{} {}", p.ty, p.name),
            })
            .collect();
        let _ = write!(out, "{} {}({}) ", f.ret, f.name, params.join(", "));
        print_block(&mut out, &f.body, 0);
        out.push('\n');
    }
    out
}

fn precision_kw(p: Precision) -> &'static str {
    match p {
        Precision::Highp => "highp",
        Precision::Mediump => "mediump",
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str(INDENT);
    }
}

fn print_block(out: &mut String, b: &Block, depth: usize) {
    out.push_str("{\n");
    for s in &b.stmts {
        print_stmt(out, s, depth + 1);
    }
    indent(out, depth);
    out.push('}');
}

/// Prints a statement that follows a construct header on the same line
/// (`if (..) `, `else `, loop headers).
fn print_body(out: &mut String, s: &Stmt, depth: usize) {
    if let StmtKind::Block(b) = &s.kind {
        print_block(out, b, depth);
    } else {
        out.push('\n');
        print_stmt(out, s, depth + 1);
        // The caller terminates the line.
        out.pop();
    }
}

pub fn simple_stmt_text(s: &Stmt) -> String {
    match &s.kind {
        StmtKind::Decl { precision, ty, name, init } => {
            let mut t = String::new();
            if let Some(p) = precision {
                t.push_str(precision_kw(*p));
                t.push(' ');
            }
            let _ = write!(t, "{ty} {name}");
            if let Some(e) = init {
                let _ = write!(t, " = {}", expr_text(e));
            }
            t
        }
        StmtKind::Assign { target, op, value } => match (op, value) {
            (AssignOp::Inc | AssignOp::Dec, _) => format!("{target}{}", op.symbol()),
            (_, Some(v)) => format!("{target} {} {}", op.symbol(), expr_text(v)),
            (_, None) => format!("{target} {} <missing>", op.symbol()),
        },
        StmtKind::Expr(e) => expr_text(e),
        _ => String::from("<not a simple statement>"),
    }
}

fn print_stmt(out: &mut String, s: &Stmt, depth: usize) {
    indent(out, depth);
    match &s.kind {
        StmtKind::Decl { .. } | StmtKind::Assign { .. } | StmtKind::Expr(_) => {
            out.push_str(&simple_stmt_text(s));
            out.push(';');
        }
        StmtKind::Block(b) => print_block(out, b, depth),
        StmtKind::If { cond, then_branch, else_branch } => {
            print_if(out, cond, then_branch, else_branch.as_deref(), depth);
        }
        StmtKind::Switch { selector, cases } => {
            let _ = writeln!(out, "switch ({}) {{", expr_text(selector));
            for c in cases {
                indent(out, depth + 1);
                match c.label {
                    Some(v) => {
                        let _ = writeln!(out, "case {v}:");
                    }
                    None => out.push_str("default:\n"),
                }
                for st in &c.body {
                    print_stmt(out, st, depth + 2);
                }
            }
            indent(out, depth);
            out.push('}');
        }
        StmtKind::For { init, cond, step, body } => {
            let init = init.as_ref().map(|s| simple_stmt_text(s)).unwrap_or_default();
            let cond = cond.as_ref().map(expr_text).unwrap_or_default();
            let step = step.as_ref().map(|s| simple_stmt_text(s)).unwrap_or_default();
            let _ = write!(out, "for ({init}; {cond}; {step}) ");
            print_body(out, body, depth);
        }
        StmtKind::While { cond, body } => {
            let _ = write!(out, "while ({}) ", expr_text(cond));
            print_body(out, body, depth);
        }
        StmtKind::DoWhile { body, cond } => {
            out.push_str("do ");
            print_body(out, body, depth);
            if !matches!(body.kind, StmtKind::Block(_)) {
                out.push('\n');
                indent(out, depth);
            } else {
                out.push(' ');
            }
            let _ = write!(out, "while ({});", expr_text(cond));
        }
        StmtKind::Break => out.push_str("break;"),
        StmtKind::Continue => out.push_str("continue;"),
        StmtKind::Return(None) => out.push_str("return;"),
        StmtKind::Return(Some(e)) => {
            let _ = write!(out, "return {};", expr_text(e));
        }
    }
    out.push('\n');
}

fn print_if(out: &mut String, cond: &Expr, then_branch: &Stmt, else_branch: Option<&Stmt>, depth: usize) {
    let _ = write!(out, "if ({}) ", expr_text(cond));
    print_body(out, then_branch, depth);
    let Some(e) = else_branch else { return };
    if matches!(then_branch.kind, StmtKind::Block(_)) {
        out.push(' ');
    } else {
        out.push('\n');
        indent(out, depth);
    }
    out.push_str("else ");
    match &e.kind {
        StmtKind::If { cond, then_branch, else_branch } => {
            print_if(out, cond, then_branch, else_branch.as_deref(), depth);
        }
        _ => print_body(out, e, depth),
    }
}

pub fn expr_text(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e);
    s
}

pub fn float_text(bits: u32) -> String {
    format!("{:?}", f32::from_bits(bits))
}

fn write_expr(out: &mut String, e: &Expr) {
    match &e.kind {
        ExprKind::FloatLit(bits) => out.push_str(&float_text(*bits)),
        ExprKind::IntLit(v) => {
            let _ = write!(out, "{v}");
        }
        ExprKind::BoolLit(b) => out.push_str(if *b { "true" } else { "false" }),
        ExprKind::Var(n) => out.push_str(n),
        ExprKind::Unary(op, inner) => {
            out.push(if *op == UnOp::Neg { '-' } else { '!' });
            let wrap = matches!(inner.kind, ExprKind::Binary(..) | ExprKind::Ternary(..) | ExprKind::Unary(..));
            write_wrapped(out, inner, wrap);
        }
        ExprKind::Binary(op, a, b) => {
            let wrap_a = match &a.kind {
                ExprKind::Binary(aop, ..) => aop.precedence() < op.precedence(),
                ExprKind::Ternary(..) => true,
                _ => false,
            };
            let wrap_b = match &b.kind {
                ExprKind::Binary(bop, ..) => bop.precedence() <= op.precedence(),
                ExprKind::Ternary(..) => true,
                _ => false,
            };
            write_wrapped(out, a, wrap_a);
            let _ = write!(out, " {} ", op.symbol());
            write_wrapped(out, b, wrap_b);
        }
        ExprKind::Ternary(c, a, b) => {
            write_wrapped(out, c, matches!(c.kind, ExprKind::Ternary(..)));
            out.push_str(" ? ");
            write_expr(out, a);
            out.push_str(" : ");
            write_expr(out, b);
        }
        ExprKind::Call(name, args) => {
            out.push_str(name);
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_expr(out, a);
            }
            out.push(')');
        }
        ExprKind::Swizzle(base, sw) => {
            let wrap = !matches!(base.kind, ExprKind::Var(_) | ExprKind::Call(..) | ExprKind::Swizzle(..));
            write_wrapped(out, base, wrap);
            out.push('.');
            out.push_str(sw);
        }
    }
}

fn write_wrapped(out: &mut String, e: &Expr, wrap: bool) {
    if wrap {
        out.push('(');
        write_expr(out, e);
        out.push(')');
    } else {
        write_expr(out, e);
    }
}
