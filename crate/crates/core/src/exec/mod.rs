//! Deterministic CPU execution of IR modules.
//!
//! Inputs are filled from seeded SplitMix64 streams, texture sampling is a
//! hash of the quantized coordinates, and the observable result of a run is
//! an FNV-1a-64 hash over the canonicalized output lanes.

pub mod eval;
pub mod math;
mod run;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::rng::{derive, unit_f32};

pub use run::{execute, module_slots};

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;

/// Bit pattern every lane of an `undef` value reads as.
pub const UNDEF_SENTINEL: u32 = 0x7FC0_0001;
pub const CANONICAL_NAN: u32 = 0x7FC0_0000;

/// Virtual texture edge length used by the sampler hash.
pub const TEXTURE_SIZE: i64 = 256;

const UNIFORM_STREAM: u64 = 0x5546_4F52_4D53;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecEnv {
    pub input_seed: u64,
    pub sampler_seed: u64,
    /// Raw lane bits per uniform slot; unlisted uniforms are seeded.
    #[serde(default)]
    pub uniform_values: BTreeMap<String, Vec<u32>>,
    pub step_budget: u64,
}

impl Default for ExecEnv {
    fn default() -> Self {
        ExecEnv::with_seed(0)
    }
}

impl ExecEnv {
    pub fn with_seed(seed: u64) -> ExecEnv {
        ExecEnv {
            input_seed: seed,
            sampler_seed: derive(seed, &[0x5341_4D50]),
            uniform_values: BTreeMap::new(),
            step_budget: DEFAULT_STEP_BUDGET,
        }
    }
}

/// Value of lane `lane` of the `ordinal`-th input slot.
pub fn input_lane(seed: u64, ordinal: usize, lane: usize) -> f32 {
    unit_f32(derive(seed, &[ordinal as u64, lane as u64]))
}

/// Seeded bits of a uniform lane: floats in `[0, 1)`, integers in `0..16`.
pub fn uniform_lane(seed: u64, ordinal: usize, lane: usize, is_int: bool) -> u32 {
    let bits = derive(seed, &[UNIFORM_STREAM, ordinal as u64, lane as u64]);
    if is_int {
        (bits >> 60) as u32
    } else {
        unit_f32(bits).to_bits()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotKind {
    Input,
    Output,
    Uniform,
    Sampler,
}

/// Interface slot as seen by the seeding logic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SlotDesc {
    pub name: String,
    pub kind: SlotKind,
    pub lanes: u8,
    pub is_int: bool,
}

/// Initial slot contents: lane bits for inputs and uniforms, unit numbers
/// for samplers.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SeededInputs {
    pub values: BTreeMap<String, Vec<u32>>,
    pub sampler_units: BTreeMap<String, u32>,
}

/// Inputs are numbered by declaration order among inputs, uniforms among
/// non-sampler uniforms, samplers among samplers.
pub fn seed_inputs(slots: &[SlotDesc], env: &ExecEnv) -> SeededInputs {
    let mut seeded = SeededInputs::default();
    let (mut n_in, mut n_uni, mut n_smp) = (0usize, 0usize, 0u32);
    for s in slots {
        let lanes = s.lanes as usize;
        match s.kind {
            SlotKind::Input => {
                let v = (0..lanes).map(|l| input_lane(env.input_seed, n_in, l).to_bits()).collect();
                seeded.values.insert(s.name.clone(), v);
                n_in += 1;
            }
            SlotKind::Uniform => {
                let v = match env.uniform_values.get(&s.name) {
                    Some(given) => (0..lanes).map(|l| given.get(l).copied().unwrap_or(0)).collect(),
                    None => (0..lanes).map(|l| uniform_lane(env.input_seed, n_uni, l, s.is_int)).collect(),
                };
                seeded.values.insert(s.name.clone(), v);
                n_uni += 1;
            }
            SlotKind::Sampler => {
                seeded.sampler_units.insert(s.name.clone(), n_smp);
                n_smp += 1;
            }
            SlotKind::Output => {}
        }
    }
    seeded
}

fn quantize(c: f32) -> u64 {
    let texel = libm::floorf(c * TEXTURE_SIZE as f32) as i64;
    texel.rem_euclid(TEXTURE_SIZE) as u64
}

/// The sampler: a pure hash of `(sampler_seed, unit, texel)` with repeat
/// addressing on a 256x256 virtual texture. Level of detail is ignored.
pub fn sample(sampler_seed: u64, unit: u32, coords: [f32; 2]) -> [f32; 4] {
    let (tx, ty) = (quantize(coords[0]), quantize(coords[1]));
    let mut out = [0.0; 4];
    for (lane, v) in out.iter_mut().enumerate() {
        *v = unit_f32(derive(sampler_seed, &[unit as u64, tx, ty, lane as u64]));
    }
    out
}

pub fn canonical_lane(bits: u32) -> u32 {
    let f = f32::from_bits(bits);
    if f.is_nan() {
        CANONICAL_NAN
    } else if bits == 0x8000_0000 {
        0
    } else {
        bits
    }
}

/// FNV-1a-64 over little-endian lane bytes, slots in name order.
pub fn canonical_hash<'a, I>(outputs: I) -> u64
where
    I: IntoIterator<Item = (&'a String, &'a Vec<u32>)>,
{
    let mut sorted: Vec<(&String, &Vec<u32>)> = outputs.into_iter().collect();
    sorted.sort_by(|a, b| a.0.cmp(b.0));
    fnv1a64(sorted.into_iter().flat_map(|(_, lanes)| lanes.iter().flat_map(|l| canonical_lane(*l).to_le_bytes())))
}

pub fn fnv1a64(bytes: impl IntoIterator<Item = u8>) -> u64 {
    bytes.into_iter().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrapReason {
    IntDivByZero,
    UndefBranch,
    HalfPrecisionUnsupported,
    MalformedIntrinsic(String),
}

impl fmt::Display for TrapReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrapReason::IntDivByZero => f.write_str("IntDivByZero"),
            TrapReason::UndefBranch => f.write_str("UndefBranch"),
            TrapReason::HalfPrecisionUnsupported => f.write_str("HalfPrecisionUnsupported"),
            TrapReason::MalformedIntrinsic(m) => write!(f, "MalformedIntrinsic({m})"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExecStatus {
    Ok,
    Trap(TrapReason),
    StepBudgetExceeded,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecResult {
    pub status: ExecStatus,
    pub output_hash: Option<u64>,
    pub steps: u64,
    pub outputs: BTreeMap<String, Vec<u32>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl ExecResult {
    pub fn finish(status: ExecStatus, steps: u64, outputs: BTreeMap<String, Vec<u32>>, diagnostics: Vec<String>) -> Self {
        let output_hash = (status == ExecStatus::Ok).then(|| canonical_hash(&outputs));
        ExecResult { status, output_hash, steps, outputs, diagnostics }
    }

    pub fn is_ok(&self) -> bool {
        self.status == ExecStatus::Ok
    }

    /// Hash restricted to the named output slots; `None` unless the run
    /// completed.
    pub fn hash_over<S: AsRef<str>>(&self, names: &[S]) -> Option<u64> {
        if !self.is_ok() {
            return None;
        }
        Some(canonical_hash(self.outputs.iter().filter(|(k, _)| names.iter().any(|n| n.as_ref() == k.as_str()))))
    }

    /// One slot per line, lanes as round-trip decimal.
    pub fn dump_outputs(&self) -> String {
        let mut s = String::new();
        for (name, lanes) in &self.outputs {
            let vals: Vec<String> = lanes.iter().map(|b| format!("{:?}", f32::from_bits(*b))).collect();
            s.push_str(&format!("{name} = {}\n", vals.join(" ")));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn out(lanes: &[f32]) -> BTreeMap<String, Vec<u32>> {
        BTreeMap::from([("o".to_string(), lanes.iter().map(|f| f.to_bits()).collect())])
    }

    #[test]
    fn nan_payloads_and_signed_zero_hash_equal() {
        let a = out(&[f32::from_bits(0x7FC0_0001), -0.0]);
        let b = out(&[f32::from_bits(0xFFC1_2345), 0.0]);
        assert_eq!(canonical_hash(&a), canonical_hash(&b));
    }

    #[test]
    fn every_single_bit_flip_changes_the_hash() {
        // Brute force over a small output set: 2 lanes x 32 bits.
        let base = out(&[0.25, 0.75]);
        let h0 = canonical_hash(&base);
        for lane in 0..2 {
            for bit in 0..32 {
                let mut m = base.clone();
                let v = &mut m.get_mut("o").unwrap()[lane];
                *v ^= 1 << bit;
                let canon_changed = canonical_lane(*v) != canonical_lane(base["o"][lane]);
                assert_eq!(canonical_hash(&m) != h0, canon_changed, "lane {lane} bit {bit}");
            }
        }
    }

    #[test]
    fn empty_outputs_hash_to_offset_basis() {
        assert_eq!(canonical_hash(&BTreeMap::new()), 0xcbf2_9ce4_8422_2325);
    }

    #[test]
    fn sampler_is_deterministic_and_wraps() {
        let env = ExecEnv::with_seed(7);
        let a = sample(env.sampler_seed, 0, [0.5, 0.5]);
        assert_eq!(a, sample(env.sampler_seed, 0, [0.5, 0.5]));
        assert_eq!(sample(7, 0, [0.0, 0.0]), sample(7, 0, [1.0, 1.0]));
        assert_ne!(sample(7, 0, [0.0, 0.0]), sample(7, 1, [0.0, 0.0]));
        assert!(a.iter().all(|v| (0.0..=1.0).contains(v)));
    }
}
