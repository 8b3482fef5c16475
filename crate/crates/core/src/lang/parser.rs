use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

const KEYWORDS: &[&str] = &[
    "if",
    "else",
    "for",
    "while",
    "do",
    "switch",
    "case",
    "default",
    "break",
    "continue",
    "return",
    "in",
    "out",
    "uniform",
    "highp",
    "mediump",
    "lowp",
    "true",
    "false",
    "const",
    "precision",
];

pub fn is_reserved(name: &str) -> bool {
    KEYWORDS.contains(&name) || Type::from_name(name).is_some()
}

pub fn parse_source(text: &str) -> Result<ShaderAst, ParseError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, at: 0, next_id: 1, loop_depth: 0, switch_depth: 0 };
    p.shader()
}

struct Parser {
    tokens: Vec<Token>,
    at: usize,
    next_id: u32,
    loop_depth: u32,
    switch_depth: u32,
}

type PResult<T> = Result<T, ParseError>;

impl Parser {
    fn id(&mut self) -> NodeId {
        let id = NodeId(self.next_id);
        self.next_id += 1;
        id
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.at].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.at + n).min(self.tokens.len() - 1);
        &self.tokens[i].tok
    }

    fn pos(&self) -> Pos {
        self.tokens[self.at].pos
    }

    fn bump(&mut self) -> Token {
        let t = self.tokens[self.at].clone();
        if self.at + 1 < self.tokens.len() {
            self.at += 1;
        }
        t
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> PResult<()> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{p}`")))
        }
    }

    fn expect_word(&mut self, w: &str) -> PResult<()> {
        if self.is_word(w) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&format!("`{w}`")))
        }
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let found = match self.peek() {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Float(b) => format!("`{:?}`", f32::from_bits(*b)),
            Tok::Int(v) => format!("`{v}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".to_string(),
        };
        ParseError::new(self.pos(), format!("expected {wanted}, found {found}"))
    }

    fn ident(&mut self) -> PResult<String> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected("identifier")),
        }
    }

    fn peek_type(&self) -> Option<Type> {
        match self.peek() {
            Tok::Ident(s) => Type::from_name(s),
            _ => None,
        }
    }

    fn ty(&mut self) -> PResult<Type> {
        match self.peek_type() {
            Some(t) => {
                self.bump();
                Ok(t)
            }
            None => Err(self.unexpected("type name")),
        }
    }

    fn precision(&mut self) -> Option<Precision> {
        if self.is_word("highp") {
            self.bump();
            Some(Precision::Highp)
        } else if self.is_word("mediump") {
            self.bump();
            Some(Precision::Mediump)
        } else {
            None
        }
    }

    fn shader(&mut self) -> PResult<ShaderAst> {
        let mut ast = ShaderAst::default();
        while *self.peek() != Tok::Eof {
            let pos = self.pos();
            let qualifier = if self.is_word("in") {
                Some(Qualifier::In)
            } else if self.is_word("out") {
                Some(Qualifier::Out)
            } else if self.is_word("uniform") {
                Some(Qualifier::Uniform)
            } else {
                None
            };
            if let Some(qualifier) = qualifier {
                self.bump();
                let precision = self.precision();
                let ty = self.ty()?;
                let name = self.ident()?;
                self.expect_punct(";")?;
                ast.globals.push(GlobalDecl { qualifier, precision, ty, name, pos });
                continue;
            }
            let ret = self.ty()?;
            let name = self.ident()?;
            self.expect_punct("(")?;
            let mut params = Vec::new();
            if self.is_word("void") && matches!(self.peek_at(1), Tok::Punct(")")) {
                self.bump();
            }
            if !self.is_punct(")") {
                loop {
                    let precision = self.precision();
                    let ty = self.ty()?;
                    let pname = self.ident()?;
                    params.push(Param { precision, ty, name: pname });
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            let body = self.block()?;
            ast.functions.push(FunctionDecl { ret, name, params, body, pos });
        }
        Ok(ast)
    }

    fn block(&mut self) -> PResult<Block> {
        self.expect_punct("{")?;
        let id = self.id();
        let mut stmts = Vec::new();
        while !self.is_punct("}") {
            if *self.peek() == Tok::Eof {
                return Err(self.unexpected("`}`"));
            }
            stmts.push(self.stmt()?);
        }
        self.bump();
        Ok(Block::new(id, stmts))
    }

    fn stmt(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        if self.is_punct("{") {
            let b = self.block()?;
            let id = self.id();
            return Ok(Stmt::new(id, pos, StmtKind::Block(b)));
        }
        if let Tok::Ident(word) = self.peek().clone() {
            match word.as_str() {
                "if" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    let then_branch = Box::new(self.stmt()?);
                    let else_branch = if self.is_word("else") {
                        self.bump();
                        Some(Box::new(self.stmt()?))
                    } else {
                        None
                    };
                    let id = self.id();
                    return Ok(Stmt::new(id, pos, StmtKind::If { cond, then_branch, else_branch }));
                }
                "switch" => return self.switch(pos),
                "for" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let init = if self.eat_punct(";") {
                        None
                    } else {
                        let s = self.simple_or_decl()?;
                        self.expect_punct(";")?;
                        Some(Box::new(s))
                    };
                    let cond = if self.is_punct(";") { None } else { Some(self.expr()?) };
                    self.expect_punct(";")?;
                    let step = if self.is_punct(")") { None } else { Some(Box::new(self.simple()?)) };
                    self.expect_punct(")")?;
                    self.loop_depth += 1;
                    let body = self.stmt();
                    self.loop_depth -= 1;
                    let body = Box::new(body?);
                    let id = self.id();
                    return Ok(Stmt::new(id, pos, StmtKind::For { init, cond, step, body }));
                }
                "while" => {
                    self.bump();
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    self.loop_depth += 1;
                    let body = self.stmt();
                    self.loop_depth -= 1;
                    let body = Box::new(body?);
                    let id = self.id();
                    return Ok(Stmt::new(id, pos, StmtKind::While { cond, body }));
                }
                "do" => {
                    self.bump();
                    self.loop_depth += 1;
                    let body = self.stmt();
                    self.loop_depth -= 1;
                    let body = Box::new(body?);
                    self.expect_word("while")?;
                    self.expect_punct("(")?;
                    let cond = self.expr()?;
                    self.expect_punct(")")?;
                    self.expect_punct(";")?;
                    let id = self.id();
                    return Ok(Stmt::new(id, pos, StmtKind::DoWhile { body, cond }));
                }
                "break" => {
                    self.bump();
                    if self.loop_depth == 0 && self.switch_depth == 0 {
                        return Err(ParseError::new(pos, "`break` outside of a loop or switch"));
                    }
                    self.expect_punct(";")?;
                    let id = self.id();
                    return Ok(Stmt::new(id, pos, StmtKind::Break));
                }
                "continue" => {
                    self.bump();
                    if self.loop_depth == 0 {
                        return Err(ParseError::new(pos, "`continue` outside of a loop"));
                    }
                    self.expect_punct(";")?;
                    let id = self.id();
                    return Ok(Stmt::new(id, pos, StmtKind::Continue));
                }
                "return" => {
                    self.bump();
                    let value = if self.is_punct(";") { None } else { Some(self.expr()?) };
                    self.expect_punct(";")?;
                    let id = self.id();
                    return Ok(Stmt::new(id, pos, StmtKind::Return(value)));
                }
                _ => {}
            }
        }
        let s = self.simple_or_decl()?;
        self.expect_punct(";")?;
        Ok(s)
    }

    fn switch(&mut self, pos: Pos) -> PResult<Stmt> {
        self.bump();
        self.expect_punct("(")?;
        let selector = self.expr()?;
        self.expect_punct(")")?;
        self.expect_punct("{")?;
        let mut cases: Vec<SwitchCase> = Vec::new();
        self.switch_depth += 1;
        let saved_loop = self.loop_depth;
        let result = (|| {
            while !self.is_punct("}") {
                if self.is_word("case") {
                    self.bump();
                    let neg = self.eat_punct("-");
                    let v = match self.peek().clone() {
                        Tok::Int(v) => {
                            self.bump();
                            v
                        }
                        _ => return Err(self.unexpected("integer case label")),
                    };
                    self.expect_punct(":")?;
                    cases.push(SwitchCase { label: Some(if neg { v.wrapping_neg() } else { v }), body: Vec::new() });
                } else if self.is_word("default") {
                    self.bump();
                    self.expect_punct(":")?;
                    cases.push(SwitchCase { label: None, body: Vec::new() });
                } else {
                    let Some(case) = cases.last_mut() else {
                        return Err(self.unexpected("`case` or `default`"));
                    };
                    let _ = case;
                    let s = self.stmt()?;
                    cases.last_mut().unwrap().body.push(s);
                }
            }
            Ok(())
        })();
        self.switch_depth -= 1;
        self.loop_depth = saved_loop;
        result?;
        self.bump();
        let id = self.id();
        Ok(Stmt::new(id, pos, StmtKind::Switch { selector, cases }))
    }

    fn simple_or_decl(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        if self.is_word("highp") || self.is_word("mediump") || self.peek_type().is_some() {
            // `vec4(...)` at statement start is an expression, not a declaration.
            let type_then_paren = self.peek_type().is_some() && matches!(self.peek_at(1), Tok::Punct("("));
            if !type_then_paren {
                let precision = self.precision();
                let ty = self.ty()?;
                let name = self.ident()?;
                let init = if self.eat_punct("=") { Some(self.expr()?) } else { None };
                let id = self.id();
                return Ok(Stmt::new(id, pos, StmtKind::Decl { precision, ty, name, init }));
            }
        }
        self.simple()
    }

    fn simple(&mut self) -> PResult<Stmt> {
        let pos = self.pos();
        if self.is_punct("++") || self.is_punct("--") {
            let op = if self.is_punct("++") { AssignOp::Inc } else { AssignOp::Dec };
            self.bump();
            let target = self.ident()?;
            let id = self.id();
            return Ok(Stmt::new(id, pos, StmtKind::Assign { target, op, value: None }));
        }
        if let Tok::Ident(name) = self.peek().clone() {
            if !is_reserved(&name) {
                let op = match self.peek_at(1) {
                    Tok::Punct("=") => Some(AssignOp::Set),
                    Tok::Punct("+=") => Some(AssignOp::Add),
                    Tok::Punct("-=") => Some(AssignOp::Sub),
                    Tok::Punct("*=") => Some(AssignOp::Mul),
                    Tok::Punct("/=") => Some(AssignOp::Div),
                    Tok::Punct("++") => Some(AssignOp::Inc),
                    Tok::Punct("--") => Some(AssignOp::Dec),
                    _ => None,
                };
                if let Some(op) = op {
                    self.bump();
                    self.bump();
                    let value = if matches!(op, AssignOp::Inc | AssignOp::Dec) { None } else { Some(self.expr()?) };
                    let id = self.id();
                    return Ok(Stmt::new(id, pos, StmtKind::Assign { target: name, op, value }));
                }
            }
        }
        let e = self.expr()?;
        let id = self.id();
        Ok(Stmt::new(id, pos, StmtKind::Expr(e)))
    }

    fn expr(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let cond = self.binary(1)?;
        if self.eat_punct("?") {
            let a = self.expr()?;
            self.expect_punct(":")?;
            let b = self.expr()?;
            let id = self.id();
            return Ok(Expr::new(id, pos, ExprKind::Ternary(Box::new(cond), Box::new(a), Box::new(b))));
        }
        Ok(cond)
    }

    fn peek_binop(&self) -> Option<BinOp> {
        let Tok::Punct(p) = self.peek() else { return None };
        Some(match *p {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            _ => return None,
        })
    }

    fn binary(&mut self, min_prec: u8) -> PResult<Expr> {
        let mut lhs = self.unary()?;
        while let Some(op) = self.peek_binop() {
            if op.precedence() < min_prec {
                break;
            }
            let pos = lhs.pos;
            self.bump();
            let rhs = self.binary(op.precedence() + 1)?;
            let id = self.id();
            lhs = Expr::new(id, pos, ExprKind::Binary(op, Box::new(lhs), Box::new(rhs)));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        let op = if self.is_punct("-") {
            Some(UnOp::Neg)
        } else if self.is_punct("!") {
            Some(UnOp::Not)
        } else {
            None
        };
        if let Some(op) = op {
            self.bump();
            let inner = self.unary()?;
            let id = self.id();
            return Ok(Expr::new(id, pos, ExprKind::Unary(op, Box::new(inner))));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while self.is_punct(".") {
            self.bump();
            let pos = self.pos();
            let sw = match self.peek().clone() {
                Tok::Ident(s) => {
                    self.bump();
                    s
                }
                _ => return Err(self.unexpected("swizzle")),
            };
            if swizzle_lanes(&sw).is_none() {
                return Err(ParseError::new(pos, format!("invalid swizzle `{sw}`")));
            }
            let id = self.id();
            let epos = e.pos;
            e = Expr::new(id, epos, ExprKind::Swizzle(Box::new(e), sw));
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Float(bits) => {
                self.bump();
                let id = self.id();
                Ok(Expr::new(id, pos, ExprKind::FloatLit(bits)))
            }
            Tok::Int(v) => {
                self.bump();
                let id = self.id();
                Ok(Expr::new(id, pos, ExprKind::IntLit(v)))
            }
            Tok::Punct("(") => {
                self.bump();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(name) => {
                if name == "true" || name == "false" {
                    self.bump();
                    let id = self.id();
                    return Ok(Expr::new(id, pos, ExprKind::BoolLit(name == "true")));
                }
                let callable = Type::from_name(&name).is_some() || !is_reserved(&name);
                if !callable {
                    return Err(self.unexpected("expression"));
                }
                self.bump();
                if self.eat_punct("(") {
                    let mut args = Vec::new();
                    if !self.is_punct(")") {
                        loop {
                            args.push(self.expr()?);
                            if !self.eat_punct(",") {
                                break;
                            }
                        }
                    }
                    self.expect_punct(")")?;
                    let id = self.id();
                    return Ok(Expr::new(id, pos, ExprKind::Call(name, args)));
                }
                if Type::from_name(&name).is_some() {
                    return Err(ParseError::new(pos, format!("type `{name}` used as a value")));
                }
                let id = self.id();
                Ok(Expr::new(id, pos, ExprKind::Var(name)))
            }
            _ => Err(self.unexpected("expression")),
        }
    }
}
