//! Metamorphic differential testing of shader compilers, plus firmware blob
//! forensics.
//!
//! The pipeline: [`lang`] parses and checks shaders, [`metamorph`] derives
//! semantic-preserving variants, [`ir`] lowers them to SSA, [`opt`] runs the
//! optimizer, [`exec`] executes modules with seeded inputs, and [`harness`]
//! compares output hashes and classifies anomalies. [`forensics`] is
//! independent and works on ELF driver blobs and firmware catalogs.

pub mod exec;
pub mod forensics;
pub mod harness;
pub mod ir;
pub mod lang;
pub mod metamorph;
pub mod opt;
pub mod rng;
