//! Textual IR: the debugging format, the trace snapshot format, and the
//! external adapter wire format. See `docs/ir-format.md`.

use std::fmt::Write;

use thiserror::Error;

use super::types::*;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("IR parse error at line {line}: {message}")]
pub struct IrParseError {
    pub line: usize,
    pub message: String,
}

pub fn print_module(m: &IrModule) -> String {
    let mut out = String::new();
    for g in &m.globals {
        let ty = g.ty.map(|t| t.to_string()).unwrap_or_else(|| "sampler".into());
        let _ = writeln!(out, "@{} = {} global {}", g.name, g.role.keyword(), ty);
    }
    for f in &m.functions {
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "define void @{}() {{", f.name);
        for b in &f.blocks {
            let _ = writeln!(out, "{}:", b.id);
            for i in &b.insts {
                let _ = writeln!(out, "  {}", inst_text(i));
            }
            if let Some(t) = &b.term {
                let _ = writeln!(out, "  {}", term_text(t));
            }
        }
        out.push_str("}\n");
    }
    out
}

fn lane_text(elem: Elem, bits: u32) -> String {
    match elem {
        Elem::I1 => (if bits != 0 { "true" } else { "false" }).to_string(),
        Elem::I32 => (bits as i32).to_string(),
        Elem::F16 | Elem::F32 => format!("0x{bits:08X}"),
    }
}

pub fn const_text(c: &Const) -> String {
    if c.ty.lanes == 1 {
        format!("{} {}", c.ty, lane_text(c.ty.elem, c.lanes[0]))
    } else {
        let lanes: Vec<String> = c.lanes.iter().map(|b| lane_text(c.ty.elem, *b)).collect();
        format!("{} <{}>", c.ty, lanes.join(", "))
    }
}

pub fn operand_text(o: &Operand) -> String {
    match o {
        Operand::Value(v) => v.to_string(),
        Operand::Const(c) => const_text(c),
        Operand::Undef(t) => format!("{t} undef"),
        Operand::Slot(s) => format!("@{s}"),
    }
}

fn join(args: &[Operand]) -> String {
    args.iter().map(operand_text).collect::<Vec<_>>().join(", ")
}

pub fn inst_text(i: &Inst) -> String {
    let ty = i.ty.map(|t| t.to_string()).unwrap_or_else(|| "void".into());
    let body = match &i.op {
        Op::Phi(blocks) => {
            let inc: Vec<String> = i.args.iter().zip(blocks).map(|(a, b)| format!("[{}, {}]", operand_text(a), b)).collect();
            format!("phi {ty} {}", inc.join(", "))
        }
        Op::Shuffle(mask) => {
            let m: Vec<String> = mask.iter().map(|l| l.to_string()).collect();
            format!("shufflevector {ty} {}, [{}]", join(&i.args), m.join(", "))
        }
        Op::Call(intr) => format!("call {ty} @{}({})", intr.name(), join(&i.args)),
        op => format!("{} {ty} {}", op.mnemonic(), join(&i.args)),
    };
    format!("{} = {}", i.id, body)
}

pub fn term_text(t: &Terminator) -> String {
    match t {
        Terminator::Br(b) => format!("br {b}"),
        Terminator::CondBr(c, a, b) => format!("br {}, {a}, {b}", operand_text(c)),
        Terminator::Switch(v, d, cases) => {
            let cs: Vec<String> = cases.iter().map(|(k, b)| format!("{k}: {b}")).collect();
            format!("switch {}, {d} [{}]", operand_text(v), cs.join(", "))
        }
        Terminator::Ret => "ret void".into(),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Local(u32),
    Global(String),
    Block(u32),
    Word(String),
    Int(i64),
    Hex(u32),
    P(char),
}

fn tokenize(line: &str) -> Result<Vec<Tok>, String> {
    let cs: Vec<char> = line.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    let word_char = |c: char| c.is_ascii_alphanumeric() || c == '_' || c == '.';
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == ';' {
            break;
        } else if "=,()[]<>:{}".contains(c) {
            out.push(Tok::P(c));
            i += 1;
        } else if c == '%' || c == '@' {
            let start = i + 1;
            i += 1;
            while i < cs.len() && word_char(cs[i]) {
                i += 1;
            }
            let text: String = cs[start..i].iter().collect();
            if text.is_empty() {
                return Err(format!("empty name after `{c}`"));
            }
            if c == '%' {
                out.push(Tok::Local(text.parse().map_err(|_| format!("bad value id `%{text}`"))?));
            } else {
                out.push(Tok::Global(text));
            }
        } else if c == '-' || c.is_ascii_digit() {
            let start = i;
            i += 1;
            while i < cs.len() && cs[i].is_ascii_alphanumeric() {
                i += 1;
            }
            let text: String = cs[start..i].iter().collect();
            if let Some(h) = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X")) {
                out.push(Tok::Hex(u32::from_str_radix(h, 16).map_err(|_| format!("bad hex `{text}`"))?));
            } else {
                out.push(Tok::Int(text.parse().map_err(|_| format!("bad integer `{text}`"))?));
            }
        } else if word_char(c) {
            let start = i;
            while i < cs.len() && word_char(cs[i]) {
                i += 1;
            }
            let text: String = cs[start..i].iter().collect();
            match text.strip_prefix("bb").map(str::parse::<u32>) {
                Some(Ok(n)) => out.push(Tok::Block(n)),
                _ => out.push(Tok::Word(text)),
            }
        } else {
            return Err(format!("unexpected character `{c}`"));
        }
    }
    Ok(out)
}

struct Cursor {
    toks: Vec<Tok>,
    pos: usize,
}

type R<T> = Result<T, String>;

impl Cursor {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> R<Tok> {
        let t = self.toks.get(self.pos).cloned().ok_or_else(|| "unexpected end of line".to_string())?;
        self.pos += 1;
        Ok(t)
    }

    fn punct(&mut self, c: char) -> R<()> {
        match self.next()? {
            Tok::P(p) if p == c => Ok(()),
            t => Err(format!("expected `{c}`, found {t:?}")),
        }
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::P(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn word(&mut self) -> R<String> {
        match self.next()? {
            Tok::Word(w) => Ok(w),
            t => Err(format!("expected keyword, found {t:?}")),
        }
    }

    fn keyword(&mut self, k: &str) -> R<()> {
        let w = self.word()?;
        if w == k {
            Ok(())
        } else {
            Err(format!("expected `{k}`, found `{w}`"))
        }
    }

    fn block(&mut self) -> R<BlockId> {
        match self.next()? {
            Tok::Block(b) => Ok(BlockId(b)),
            t => Err(format!("expected block label, found {t:?}")),
        }
    }

    fn int(&mut self) -> R<i64> {
        match self.next()? {
            Tok::Int(v) => Ok(v),
            t => Err(format!("expected integer, found {t:?}")),
        }
    }

    fn done(&self) -> R<()> {
        match self.peek() {
            None => Ok(()),
            Some(t) => Err(format!("trailing tokens starting at {t:?}")),
        }
    }

    fn elem(&mut self) -> R<Elem> {
        match self.word()?.as_str() {
            "i1" => Ok(Elem::I1),
            "i32" => Ok(Elem::I32),
            "half" => Ok(Elem::F16),
            "float" => Ok(Elem::F32),
            w => Err(format!("unknown type `{w}`")),
        }
    }

    /// `void` yields `None`.
    fn ty_or_void(&mut self) -> R<Option<IrType>> {
        if self.eat('<') {
            let n = self.int()?;
            if !(2..=4).contains(&n) {
                return Err(format!("vector width {n} out of range"));
            }
            self.keyword("x")?;
            let e = self.elem()?;
            self.punct('>')?;
            return Ok(Some(IrType::new(e, n as u8)));
        }
        if self.peek() == Some(&Tok::Word("void".into())) {
            self.pos += 1;
            return Ok(None);
        }
        Ok(Some(IrType::new(self.elem()?, 1)))
    }

    fn ty(&mut self) -> R<IrType> {
        self.ty_or_void()?.ok_or_else(|| "void is not a value type".to_string())
    }

    fn lane(&mut self, e: Elem) -> R<u32> {
        match (e, self.next()?) {
            (Elem::I1, Tok::Word(w)) if w == "true" => Ok(1),
            (Elem::I1, Tok::Word(w)) if w == "false" => Ok(0),
            (Elem::I32, Tok::Int(v)) => i32::try_from(v).map(|v| v as u32).map_err(|_| format!("{v} out of i32 range")),
            (Elem::F16 | Elem::F32, Tok::Hex(h)) => Ok(h),
            (e, t) => Err(format!("bad {} literal {t:?}", e.name())),
        }
    }

    fn operand(&mut self) -> R<Operand> {
        match self.peek() {
            Some(Tok::Local(v)) => {
                let v = *v;
                self.pos += 1;
                return Ok(Operand::Value(ValueId(v)));
            }
            Some(Tok::Global(g)) => {
                let g = g.clone();
                self.pos += 1;
                return Ok(Operand::Slot(g));
            }
            _ => {}
        }
        let ty = self.ty()?;
        if self.peek() == Some(&Tok::Word("undef".into())) {
            self.pos += 1;
            return Ok(Operand::Undef(ty));
        }
        let lanes = if ty.lanes == 1 {
            vec![self.lane(ty.elem)?]
        } else {
            self.punct('<')?;
            let mut v = Vec::new();
            loop {
                v.push(self.lane(ty.elem)?);
                if !self.eat(',') {
                    break;
                }
            }
            self.punct('>')?;
            if v.len() != ty.lanes as usize {
                return Err(format!("{ty} constant has {} lanes", v.len()));
            }
            v
        };
        Ok(Operand::Const(Const { ty, lanes }))
    }

    fn operand_list(&mut self) -> R<Vec<Operand>> {
        let mut v = vec![self.operand()?];
        while self.eat(',') {
            v.push(self.operand()?);
        }
        Ok(v)
    }
}

fn parse_inst(c: &mut Cursor, id: ValueId) -> R<Inst> {
    c.punct('=')?;
    let opw = c.word()?;
    let (op, ty, args) = match opw.as_str() {
        "icmp" | "fcmp" => {
            let pw = c.word()?;
            let pred = Pred::ALL
                .into_iter()
                .find(|p| if opw == "icmp" { p.icmp_name() == pw } else { p.fcmp_name() == pw })
                .ok_or_else(|| format!("unknown predicate `{pw}`"))?;
            let ty = c.ty()?;
            let op = if opw == "icmp" { Op::ICmp(pred) } else { Op::FCmp(pred) };
            (op, Some(ty), c.operand_list()?)
        }
        "phi" => {
            let ty = c.ty()?;
            let (mut args, mut blocks) = (Vec::new(), Vec::new());
            loop {
                c.punct('[')?;
                args.push(c.operand()?);
                c.punct(',')?;
                blocks.push(c.block()?);
                c.punct(']')?;
                if !c.eat(',') {
                    break;
                }
            }
            (Op::Phi(blocks), Some(ty), args)
        }
        "shufflevector" => {
            let ty = c.ty()?;
            let src = c.operand()?;
            c.punct(',')?;
            c.punct('[')?;
            let mut mask = Vec::new();
            loop {
                let l = c.int()?;
                mask.push(u8::try_from(l).map_err(|_| format!("bad lane {l}"))?);
                if !c.eat(',') {
                    break;
                }
            }
            c.punct(']')?;
            (Op::Shuffle(mask), Some(ty), vec![src])
        }
        "call" => {
            let ty = c.ty_or_void()?;
            let name = match c.next()? {
                Tok::Global(g) => g,
                t => return Err(format!("expected callee, found {t:?}")),
            };
            let intr = Intrinsic::from_name(&name).ok_or_else(|| format!("UnknownIntrinsic `{name}`"))?;
            c.punct('(')?;
            let args = if c.eat(')') {
                Vec::new()
            } else {
                let a = c.operand_list()?;
                c.punct(')')?;
                a
            };
            (Op::Call(intr), ty, args)
        }
        w => {
            let op = if let Some(b) = BinOp::ALL.into_iter().find(|b| b.name() == w) {
                Op::Bin(b)
            } else if let Some(k) = CastOp::ALL.into_iter().find(|k| k.name() == w) {
                Op::Cast(k)
            } else {
                match w {
                    "fneg" => Op::FNeg,
                    "select" => Op::Select,
                    "extractelement" => Op::Extract,
                    "insertelement" => Op::Insert,
                    _ => return Err(format!("unknown opcode `{w}`")),
                }
            };
            let ty = c.ty()?;
            (op, Some(ty), c.operand_list()?)
        }
    };
    c.done()?;
    Ok(Inst { id, ty, op, args })
}

fn parse_term(c: &mut Cursor, w: &str) -> R<Terminator> {
    let t = match w {
        "ret" => {
            c.keyword("void")?;
            Terminator::Ret
        }
        "br" => {
            if let Some(Tok::Block(_)) = c.peek() {
                Terminator::Br(c.block()?)
            } else {
                let cond = c.operand()?;
                c.punct(',')?;
                let t = c.block()?;
                c.punct(',')?;
                let f = c.block()?;
                Terminator::CondBr(cond, t, f)
            }
        }
        "switch" => {
            let v = c.operand()?;
            c.punct(',')?;
            let d = c.block()?;
            c.punct('[')?;
            let mut cases = Vec::new();
            if !c.eat(']') {
                loop {
                    let k = c.int()?;
                    let k = i32::try_from(k).map_err(|_| format!("case {k} out of range"))?;
                    c.punct(':')?;
                    cases.push((k, c.block()?));
                    if !c.eat(',') {
                        break;
                    }
                }
                c.punct(']')?;
            }
            Terminator::Switch(v, d, cases)
        }
        _ => unreachable!(),
    };
    c.done()?;
    Ok(t)
}

/// Parses textual IR. Structural validity is left to `verify`, so that
/// malformed-but-parseable modules (for instance a block without a
/// terminator) can be represented and diagnosed.
pub fn parse_module(text: &str) -> Result<IrModule, IrParseError> {
    let mut m = IrModule { globals: Vec::new(), functions: Vec::new() };
    let mut func: Option<Function> = None;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let fail = |message: String| IrParseError { line, message };
        let toks = tokenize(raw).map_err(fail)?;
        if toks.is_empty() {
            continue;
        }
        let mut c = Cursor { toks, pos: 0 };
        let first = c.next().map_err(fail)?;
        let r: R<()> = (|| {
            match (&mut func, first) {
                (None, Tok::Global(name)) => {
                    c.punct('=')?;
                    let role = match c.word()?.as_str() {
                        "input" => SlotRole::Input,
                        "output" => SlotRole::Output,
                        "uniform" => SlotRole::Uniform,
                        w => return Err(format!("unknown slot role `{w}`")),
                    };
                    c.keyword("global")?;
                    let ty = if c.peek() == Some(&Tok::Word("sampler".into())) {
                        c.pos += 1;
                        None
                    } else {
                        Some(c.ty()?)
                    };
                    c.done()?;
                    m.globals.push(GlobalSlot { name, role, ty });
                }
                (None, Tok::Word(w)) if w == "define" => {
                    c.keyword("void")?;
                    let name = match c.next()? {
                        Tok::Global(g) => g,
                        t => return Err(format!("expected function name, found {t:?}")),
                    };
                    c.punct('(')?;
                    c.punct(')')?;
                    c.punct('{')?;
                    c.done()?;
                    func = Some(Function { name, blocks: Vec::new() });
                }
                (Some(f), Tok::P('}')) => {
                    c.done()?;
                    m.functions.push(std::mem::replace(f, Function { name: String::new(), blocks: Vec::new() }));
                    func = None;
                }
                (Some(f), Tok::Block(b)) => {
                    c.punct(':')?;
                    c.done()?;
                    f.blocks.push(Block::new(BlockId(b)));
                }
                (Some(f), first) => {
                    let b = f.blocks.last_mut().ok_or_else(|| "instruction outside a block".to_string())?;
                    if b.term.is_some() {
                        return Err(format!("instruction after terminator in {}", b.id));
                    }
                    match first {
                        Tok::Local(id) => b.insts.push(parse_inst(&mut c, ValueId(id))?),
                        Tok::Word(w) if matches!(w.as_str(), "br" | "switch" | "ret") => {
                            b.term = Some(parse_term(&mut c, &w)?);
                        }
                        t => return Err(format!("unexpected {t:?}")),
                    }
                }
                (None, t) => return Err(format!("unexpected {t:?} at top level")),
            }
            Ok(())
        })();
        r.map_err(fail)?;
    }
    if func.is_some() {
        return Err(IrParseError { line: text.lines().count(), message: "unterminated function".into() });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "@a_color = input global <4 x float>
@v_out = output global <4 x float>
@t = uniform global sampler

define void @llvm_main() {
bb0:
  %0 = call <4 x float> @llvm.qgpu.fget(@a_color)
  %1 = fmul <4 x float> %0, <4 x float> <0x3F800000, 0x3F800000, 0x3F800000, 0x40000000>
  %2 = extractelement float %1, i32 0
  %3 = fcmp olt i1 %2, float 0x3F000000
  br %3, bb1, bb2
bb1:
  %4 = shufflevector <2 x float> %1, [0, 1]
  %5 = call <4 x float> @llvm.qgpu.fsampler(i32 0, %4, float 0x00000000)
  br bb2
bb2:
  %6 = phi <4 x float> [%1, bb0], [%5, bb1]
  %7 = call void @llvm.qgpu.fset(@v_out, %6)
  switch i32 -1, bb3 [-1: bb3, 2: bb3]
bb3:
  ret void
}
";

    #[test]
    fn print_parse_roundtrip() {
        let m = parse_module(SAMPLE).unwrap();
        assert_eq!(m.globals.len(), 3);
        assert_eq!(m.functions[0].blocks.len(), 4);
        assert_eq!(print_module(&m), SAMPLE);
    }

    #[test]
    fn unknown_intrinsic_is_rejected() {
        let src = "define void @llvm_main() {\nbb0:\n  %0 = call float @llvm.qgpu.bogus(float 0x0)\n  ret void\n}\n";
        let e = parse_module(src).unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("UnknownIntrinsic"));
    }

    #[test]
    fn missing_terminator_still_parses() {
        let m = parse_module("define void @llvm_main() {\nbb0:\n}\n").unwrap();
        assert!(m.functions[0].blocks[0].term.is_none());
    }
}
