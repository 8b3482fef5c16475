//! The IR evaluator.

use std::collections::{BTreeMap, HashMap};

use super::eval;
use super::{sample, seed_inputs, ExecEnv, ExecResult, ExecStatus, SlotDesc, SlotKind, TrapReason, UNDEF_SENTINEL};
use crate::ir::{BlockId, Elem, Function, Inst, Intrinsic, IrModule, Op, Operand, SlotRole, Terminator};

/// Lane bits plus a poison flag carried by everything computed from `undef`.
#[derive(Clone, Debug)]
struct RVal {
    bits: Vec<u32>,
    poison: bool,
}

enum Stop {
    Trap(TrapReason),
    Budget,
}

/// Interface slots of a module in declaration order.
pub fn module_slots(m: &IrModule) -> Vec<SlotDesc> {
    m.globals
        .iter()
        .map(|g| SlotDesc {
            name: g.name.clone(),
            kind: match (g.role, g.ty) {
                (_, None) => SlotKind::Sampler,
                (SlotRole::Input, _) => SlotKind::Input,
                (SlotRole::Output, _) => SlotKind::Output,
                (SlotRole::Uniform, _) => SlotKind::Uniform,
            },
            lanes: g.ty.map(|t| t.lanes).unwrap_or(1),
            is_int: g.ty.map(|t| t.elem == Elem::I32).unwrap_or(false),
        })
        .collect()
}

/// Executes the entry function. Every executed instruction and terminator
/// costs one step. Modules that still carry half-precision types are
/// rejected: promotion must run first.
pub fn execute(m: &IrModule, env: &ExecEnv) -> ExecResult {
    let outputs_zero = || -> BTreeMap<String, Vec<u32>> {
        m.globals
            .iter()
            .filter(|g| g.role == SlotRole::Output)
            .map(|g| (g.name.clone(), vec![0; g.ty.map(|t| t.lanes as usize).unwrap_or(1)]))
            .collect()
    };
    if m.mentions_f16() {
        return ExecResult::finish(ExecStatus::Trap(TrapReason::HalfPrecisionUnsupported), 0, outputs_zero(), Vec::new());
    }
    let Some(f) = m.entry() else {
        let t = TrapReason::MalformedIntrinsic("module has no entry function".into());
        return ExecResult::finish(ExecStatus::Trap(t), 0, outputs_zero(), Vec::new());
    };
    let seeded = seed_inputs(&module_slots(m), env);
    let mut slots: HashMap<&str, Vec<u32>> = HashMap::new();
    for g in &m.globals {
        if let (Some(ty), Some(bits)) = (g.ty, seeded.values.get(&g.name)) {
            let bits = if ty.elem == Elem::I1 { bits.iter().map(|b| (*b != 0) as u32).collect() } else { bits.clone() };
            slots.insert(&g.name, bits);
        }
    }
    let mut m_run = Machine {
        f,
        env,
        slots,
        n_samplers: seeded.sampler_units.len() as u32,
        written: BTreeMap::new(),
        values: vec![None; f.next_value_id() as usize],
        index: f.blocks.iter().enumerate().map(|(i, b)| (b.id, i)).collect(),
        steps: 0,
    };
    let status = match m_run.run() {
        Ok(()) => ExecStatus::Ok,
        Err(Stop::Trap(t)) => ExecStatus::Trap(t),
        Err(Stop::Budget) => ExecStatus::StepBudgetExceeded,
    };
    let mut outputs = outputs_zero();
    let mut diagnostics = Vec::new();
    for (name, lanes) in outputs.iter_mut() {
        match m_run.written.remove(name) {
            Some(v) => *lanes = v,
            None => diagnostics.push(format!("output `{name}` never written; reads as zero")),
        }
    }
    ExecResult::finish(status, m_run.steps, outputs, diagnostics)
}

struct Machine<'a> {
    f: &'a Function,
    env: &'a ExecEnv,
    slots: HashMap<&'a str, Vec<u32>>,
    n_samplers: u32,
    written: BTreeMap<String, Vec<u32>>,
    values: Vec<Option<RVal>>,
    index: HashMap<BlockId, usize>,
    steps: u64,
}

fn malformed(msg: impl Into<String>) -> Stop {
    Stop::Trap(TrapReason::MalformedIntrinsic(msg.into()))
}

impl<'a> Machine<'a> {
    fn tick(&mut self) -> Result<(), Stop> {
        self.steps += 1;
        if self.steps >= self.env.step_budget {
            return Err(Stop::Budget);
        }
        Ok(())
    }

    fn read(&self, o: &Operand) -> Result<RVal, Stop> {
        Ok(match o {
            Operand::Value(v) => {
                self.values.get(v.0 as usize).and_then(|x| x.clone()).ok_or_else(|| malformed(format!("{v} read before definition")))?
            }
            Operand::Const(c) => RVal { bits: c.lanes.clone(), poison: false },
            Operand::Undef(t) => RVal { bits: vec![UNDEF_SENTINEL; t.lanes as usize], poison: true },
            Operand::Slot(s) => return Err(malformed(format!("slot @{s} used as a value"))),
        })
    }

    fn run(&mut self) -> Result<(), Stop> {
        let mut prev: Option<BlockId> = None;
        let mut cur = self.f.blocks.first().map(|b| b.id).ok_or_else(|| malformed("empty function"))?;
        loop {
            let block = &self.f.blocks[self.index[&cur]];
            // Phis read their incomings simultaneously.
            let mut phi_vals = Vec::new();
            for i in block.insts.iter().take_while(|i| i.is_phi()) {
                self.tick()?;
                let Op::Phi(inc) = &i.op else { unreachable!() };
                let k = prev
                    .and_then(|p| inc.iter().position(|b| *b == p))
                    .ok_or_else(|| malformed(format!("phi {} has no incoming for the taken edge", i.id)))?;
                phi_vals.push((i.id, self.read(&i.args[k])?));
            }
            for (id, v) in phi_vals {
                self.values[id.0 as usize] = Some(v);
            }
            for i in block.insts.iter().skip_while(|i| i.is_phi()) {
                self.tick()?;
                if let Some(v) = self.step(i)? {
                    self.values[i.id.0 as usize] = Some(v);
                }
            }
            self.tick()?;
            let next = match block.term.as_ref().ok_or_else(|| malformed(format!("{cur} has no terminator")))? {
                Terminator::Ret => return Ok(()),
                Terminator::Br(t) => *t,
                Terminator::CondBr(c, t, e) => {
                    let c = self.read(c)?;
                    if c.poison {
                        return Err(Stop::Trap(TrapReason::UndefBranch));
                    }
                    if c.bits[0] & 1 == 1 {
                        *t
                    } else {
                        *e
                    }
                }
                Terminator::Switch(s, default, cases) => {
                    let s = self.read(s)?;
                    if s.poison {
                        return Err(Stop::Trap(TrapReason::UndefBranch));
                    }
                    let k = s.bits[0] as i32;
                    cases.iter().find(|(l, _)| *l == k).map(|(_, b)| *b).unwrap_or(*default)
                }
            };
            prev = Some(cur);
            cur = next;
        }
    }

    fn step(&mut self, i: &Inst) -> Result<Option<RVal>, Stop> {
        let trap = Stop::Trap;
        let mut args = Vec::with_capacity(i.args.len());
        for a in &i.args {
            if !matches!(a, Operand::Slot(_)) {
                args.push(self.read(a)?);
            }
        }
        let poison = args.iter().any(|a| a.poison);
        let bits = match &i.op {
            Op::Bin(op) => eval::eval_bin(*op, &args[0].bits, &args[1].bits).map_err(trap)?,
            Op::FNeg => eval::eval_fneg(&args[0].bits),
            Op::ICmp(p) => eval::eval_icmp(*p, &args[0].bits, &args[1].bits),
            Op::FCmp(p) => eval::eval_fcmp(*p, &args[0].bits, &args[1].bits),
            Op::Select => {
                // Poison in the unselected arm does not leak.
                if args[0].poison {
                    return Ok(Some(RVal { bits: args[1].bits.clone(), poison: true }));
                }
                let pick = if args[0].bits[0] & 1 == 1 { &args[1] } else { &args[2] };
                return Ok(Some(pick.clone()));
            }
            Op::Phi(_) => unreachable!("phis are evaluated on block entry"),
            Op::Cast(c) => eval::eval_cast(*c, &args[0].bits),
            Op::Extract => {
                let k = args[1].bits[0] as usize;
                vec![*args[0].bits.get(k).ok_or_else(|| malformed(format!("extract lane {k} out of range")))?]
            }
            Op::Insert => {
                let k = args[2].bits[0] as usize;
                let mut v = args[0].bits.clone();
                *v.get_mut(k).ok_or_else(|| malformed(format!("insert lane {k} out of range")))? = args[1].bits[0];
                v
            }
            Op::Shuffle(mask) => mask.iter().map(|l| args[0].bits[*l as usize]).collect(),
            Op::Call(intr) => return self.call(*intr, i, args, poison),
        };
        Ok(Some(RVal { bits, poison }))
    }

    fn call(&mut self, intr: Intrinsic, i: &Inst, args: Vec<RVal>, poison: bool) -> Result<Option<RVal>, Stop> {
        let slot = || match i.args.first() {
            Some(Operand::Slot(s)) => Ok(s.as_str()),
            _ => Err(malformed(format!("{} needs a slot operand", intr.name()))),
        };
        match intr {
            Intrinsic::FGet => {
                let s = slot()?;
                let bits = self.slots.get(s).cloned().ok_or_else(|| malformed(format!("fget of unknown slot @{s}")))?;
                Ok(Some(RVal { bits, poison: false }))
            }
            Intrinsic::FSet => {
                let s = slot()?.to_string();
                let v = args.into_iter().next().ok_or_else(|| malformed("fset without a value"))?;
                self.written.insert(s, v.bits);
                Ok(None)
            }
            Intrinsic::Sampler => {
                let unit = args[0].bits[0];
                if unit >= self.n_samplers {
                    return Err(malformed(format!("sampler unit {} is not bound", unit as i32)));
                }
                let c = &args[1].bits;
                let texel = sample(self.env.sampler_seed, unit, [f32::from_bits(c[0]), f32::from_bits(c[1])]);
                Ok(Some(RVal { bits: texel.iter().map(|x| x.to_bits()).collect(), poison }))
            }
            _ => {
                let ty = i.ty.ok_or_else(|| malformed(format!("{} must return a value", intr.name())))?;
                let lanes: Vec<&[u32]> = args.iter().map(|a| a.bits.as_slice()).collect();
                let bits = eval::eval_math(intr, ty, &lanes).map_err(Stop::Trap)?;
                Ok(Some(RVal { bits, poison }))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ir::{lower, parse_module};
    use crate::lang::check_text;

    fn run(src: &str) -> ExecResult {
        execute(&lower(&check_text(src).unwrap()).unwrap(), &ExecEnv::with_seed(3))
    }

    #[test]
    fn constant_output() {
        let r = run("out vec4 o; void main() { o = vec4(1.0); }");
        assert!(r.is_ok());
        assert_eq!(r.outputs["o"], vec![1.0f32.to_bits(); 4]);
    }

    #[test]
    fn infinite_loop_exceeds_budget() {
        let r = run("out float o; void main() { while (true) { } o = 1.0; }");
        assert_eq!(r.status, ExecStatus::StepBudgetExceeded);
        assert_eq!(r.output_hash, None);
        assert!(r.steps <= ExecEnv::default().step_budget);
    }

    #[test]
    fn integer_division_by_zero_traps() {
        let r = run("uniform int k; out float o; void main() { o = float(1 / (k - k)); }");
        assert_eq!(r.status, ExecStatus::Trap(TrapReason::IntDivByZero));
    }

    #[test]
    fn branch_on_undef_traps() {
        let m = parse_module(
            "define void @llvm_main() {
bb0:
  br i1 undef, bb1, bb1
bb1:
  ret void
}
",
        )
        .unwrap();
        let r = execute(&m, &ExecEnv::default());
        assert_eq!(r.status, ExecStatus::Trap(TrapReason::UndefBranch));
    }

    #[test]
    fn half_types_are_rejected() {
        let m = lower(&check_text("out float o; void main() { mediump float h = 1.0; o = h + h; }").unwrap()).unwrap();
        assert_eq!(execute(&m, &ExecEnv::default()).status, ExecStatus::Trap(TrapReason::HalfPrecisionUnsupported));
    }
}
