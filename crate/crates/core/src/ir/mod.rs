//! SSA intermediate representation: types, textual form, verifier,
//! lowering from the shader AST, and analyses.

pub mod analysis;
pub mod cleanup;
pub mod ddg;
pub mod lower;
pub mod text;
pub mod types;
pub mod verify;

pub use lower::{lower, lower_with, LowerError, LowerOptions};
pub use text::{parse_module, print_module, IrParseError};
pub use types::*;
pub use verify::{verify, VerifyError, VerifyErrorKind};
