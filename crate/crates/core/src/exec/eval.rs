//! Lane-level semantics of IR operations over raw bits. The runtime and
//! constant folding both call these, so a folded constant is always the
//! value the runtime would have computed.

use super::math;
use super::TrapReason;
use crate::ir::{BinOp, CastOp, Elem, Intrinsic, IrType, Pred};

fn f(b: u32) -> f32 {
    f32::from_bits(b)
}

fn i(b: u32) -> i32 {
    b as i32
}

pub fn eval_bin(op: BinOp, a: &[u32], b: &[u32]) -> Result<Vec<u32>, TrapReason> {
    let mut out = Vec::with_capacity(a.len());
    for (&x, &y) in a.iter().zip(b) {
        out.push(match op {
            BinOp::Add => i(x).wrapping_add(i(y)) as u32,
            BinOp::Sub => i(x).wrapping_sub(i(y)) as u32,
            BinOp::Mul => i(x).wrapping_mul(i(y)) as u32,
            BinOp::SDiv | BinOp::SRem if y == 0 => return Err(TrapReason::IntDivByZero),
            BinOp::SDiv => i(x).wrapping_div(i(y)) as u32,
            BinOp::SRem => i(x).wrapping_rem(i(y)) as u32,
            BinOp::FAdd => (f(x) + f(y)).to_bits(),
            BinOp::FSub => (f(x) - f(y)).to_bits(),
            BinOp::FMul => (f(x) * f(y)).to_bits(),
            BinOp::FDiv => (f(x) / f(y)).to_bits(),
            BinOp::And => x & y & 1,
            BinOp::Or => (x | y) & 1,
            BinOp::Xor => (x ^ y) & 1,
        });
    }
    Ok(out)
}

pub fn eval_fneg(a: &[u32]) -> Vec<u32> {
    a.iter().map(|x| x ^ 0x8000_0000).collect()
}

pub fn eval_icmp(p: Pred, a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let (x, y) = (i(x), i(y));
            (match p {
                Pred::Eq => x == y,
                Pred::Ne => x != y,
                Pred::Lt => x < y,
                Pred::Le => x <= y,
                Pred::Gt => x > y,
                Pred::Ge => x >= y,
            }) as u32
        })
        .collect()
}

pub fn eval_fcmp(p: Pred, a: &[u32], b: &[u32]) -> Vec<u32> {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let (x, y) = (f(x), f(y));
            (match p {
                Pred::Eq => x == y,
                Pred::Ne => x != y,
                Pred::Lt => x < y,
                Pred::Le => x <= y,
                Pred::Gt => x > y,
                Pred::Ge => x >= y,
            }) as u32
        })
        .collect()
}

/// Half-typed lanes carry single-precision bits, so precision casts
/// preserve bits.
pub fn eval_cast(op: CastOp, a: &[u32]) -> Vec<u32> {
    a.iter()
        .map(|&x| match op {
            CastOp::SiToFp => math::i32_to_f32(i(x)).to_bits(),
            CastOp::FpToSi => math::f32_to_i32(f(x)) as u32,
            CastOp::UiToFp => ((x & 1) as f32).to_bits(),
            CastOp::ZExt => x & 1,
            CastOp::FpTrunc | CastOp::FpExt | CastOp::Bitcast => x,
        })
        .collect()
}

/// Pure math intrinsics. A scalar operand paired with a vector one is
/// broadcast (only `mix` allows this).
pub fn eval_math(intr: Intrinsic, ty: IrType, args: &[&[u32]]) -> Result<Vec<u32>, TrapReason> {
    let n = ty.lanes as usize;
    let lane = |k: usize, l: usize| -> u32 {
        let a = args[k];
        a[if a.len() == 1 { 0 } else { l }]
    };
    let unary = |g: fn(f32) -> f32| (0..n).map(|l| g(f(lane(0, l))).to_bits()).collect();
    let binary = |g: fn(f32, f32) -> f32| (0..n).map(|l| g(f(lane(0, l)), f(lane(1, l))).to_bits()).collect();
    let floats = |k: usize| -> Vec<f32> { args[k].iter().map(|b| f(*b)).collect() };
    Ok(match intr {
        Intrinsic::Rsq => unary(math::rsq),
        Intrinsic::Sqrt => unary(math::sqrt),
        Intrinsic::Sin => unary(math::sin),
        Intrinsic::Cos => unary(math::cos),
        Intrinsic::Floor => unary(math::floor),
        Intrinsic::FAbs => unary(math::fabs),
        Intrinsic::FMin => binary(math::fmin),
        Intrinsic::FMax => binary(math::fmax),
        Intrinsic::SMin => (0..n).map(|l| i(lane(0, l)).min(i(lane(1, l))) as u32).collect(),
        Intrinsic::SMax => (0..n).map(|l| i(lane(0, l)).max(i(lane(1, l))) as u32).collect(),
        Intrinsic::IAbs => (0..n).map(|l| i(lane(0, l)).wrapping_abs() as u32).collect(),
        Intrinsic::Mix => (0..n).map(|l| math::mix(f(lane(0, l)), f(lane(1, l)), f(lane(2, l))).to_bits()).collect(),
        Intrinsic::Dot => vec![math::dot(&floats(0), &floats(1)).to_bits()],
        Intrinsic::Normalize => math::normalize(&floats(0)).into_iter().map(f32::to_bits).collect(),
        Intrinsic::FGet | Intrinsic::FSet | Intrinsic::Sampler => {
            return Err(TrapReason::MalformedIntrinsic(format!("{} is not a pure intrinsic", intr.name())))
        }
    })
}

/// Lane conversion between scalar kinds, as used by constructors.
pub fn convert_lanes(from: Elem, to: Elem, a: &[u32]) -> Vec<u32> {
    use Elem::*;
    match (from, to) {
        (x, y) if x == y => a.to_vec(),
        (F16 | F32, F16 | F32) => a.to_vec(),
        (I32, F16 | F32) => eval_cast(CastOp::SiToFp, a),
        (F16 | F32, I32) => eval_cast(CastOp::FpToSi, a),
        (I1, F16 | F32) => eval_cast(CastOp::UiToFp, a),
        (I1, I32) => eval_cast(CastOp::ZExt, a),
        (I32, I1) => eval_icmp(Pred::Ne, a, &vec![0; a.len()]),
        (F16 | F32, I1) => eval_fcmp(Pred::Ne, a, &vec![0; a.len()]),
        _ => unreachable!(),
    }
}
