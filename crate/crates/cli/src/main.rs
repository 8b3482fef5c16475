//! `blobfuzz`: metamorphic shader-compiler fuzzing and driver blob
//! forensics from the command line.
//!
//! Exit codes: 0 clean, 2 anomalies found, 1 operational error, 64 usage
//! error. JSON goes to stdout, diagnostics to stderr. Every flag can also
//! be set through a `BLOBFUZZ_` environment variable named after it.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use blobfuzz_core::opt::{BugId, PassId};

#[derive(Parser, Debug)]
#[command(name = "blobfuzz", version, about = "Metamorphic shader-compiler fuzzing and GPU driver blob forensics")]
pub struct Cli {
    /// Master seed for variant generation; the execution seed for `run`.
    #[arg(long, global = true, env = "BLOBFUZZ_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for campaigns [default: all cores].
    #[arg(long, global = true, env = "BLOBFUZZ_THREADS")]
    pub threads: Option<usize>,
    /// Output file; the meaning depends on the command.
    #[arg(short, long, global = true, env = "BLOBFUZZ_OUTPUT")]
    pub output: Option<PathBuf>,
    /// 0 is quiet, 1 adds a summary on stderr, 2 adds per-item notes.
    #[arg(long, global = true, env = "BLOBFUZZ_VERBOSITY", default_value_t = 0)]
    pub verbosity: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a differential campaign over a corpus. Reports go to --output
    /// (default reports.jsonl), stats to stdout.
    Fuzz(FuzzArgs),
    /// Generate one variant of a shader, or replay a recipe.
    Transform(TransformArgs),
    /// Execute a shader or textual IR module and print the result.
    Run(RunArgs),
    /// Re-minimize the recipes of reports from a campaign.
    Reduce(ReduceArgs),
    /// Build-id and version of an ELF driver blob.
    InspectBlob(InspectArgs),
    /// Firmware update delays over a catalog CSV.
    DelayReport(DelayArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum MixFlag {
    Native,
    Glsl,
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Faults to inject, by name (comma separated).
    #[arg(long, env = "BLOBFUZZ_INJECT", value_delimiter = ',')]
    pub inject: Vec<BugId>,
    /// Pass order (comma separated) [default: all passes].
    #[arg(long, env = "BLOBFUZZ_PASSES", value_delimiter = ',')]
    pub passes: Vec<PassId>,
    /// Full iterations over the pass list before declaring a stall.
    #[arg(long, env = "BLOBFUZZ_FIXPOINT_BUDGET", default_value_t = 64)]
    pub fixpoint_budget: u32,
}

#[derive(Args, Debug)]
pub struct FuzzArgs {
    /// Corpus manifest (TOML).
    #[arg(long, env = "BLOBFUZZ_CORPUS")]
    pub corpus: PathBuf,
    #[arg(long, env = "BLOBFUZZ_VARIANTS", default_value_t = 200)]
    pub variants: u32,
    #[arg(long, env = "BLOBFUZZ_DEPTH_MIN", default_value_t = 1)]
    pub depth_min: u32,
    #[arg(long, env = "BLOBFUZZ_DEPTH_MAX", default_value_t = 6)]
    pub depth_max: u32,
    /// Execution seeds every variant runs under.
    #[arg(long, env = "BLOBFUZZ_EXEC_SEEDS", value_delimiter = ',', default_value = "1,2,3")]
    pub exec_seeds: Vec<u64>,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// External compiler command (whitespace separated) reading shader text
    /// on stdin and writing IR on stdout.
    #[arg(long, env = "BLOBFUZZ_ADAPTER")]
    pub adapter: Option<String>,
    /// mix operand order the adapter expects.
    #[arg(long, env = "BLOBFUZZ_ADAPTER_MIX", value_enum, default_value = "native")]
    pub adapter_mix: MixFlag,
    /// Per-compilation wall-clock limit for the adapter.
    #[arg(long, env = "BLOBFUZZ_TIMEOUT_MS", default_value_t = 10_000)]
    pub timeout_ms: u64,
    #[arg(long, env = "BLOBFUZZ_NO_MINIMIZE")]
    pub no_minimize: bool,
    /// Skip the interpreter soundness check of each variant.
    #[arg(long, env = "BLOBFUZZ_NO_ORACLE")]
    pub no_oracle: bool,
    /// Also write the stats object here.
    #[arg(long, env = "BLOBFUZZ_STATS")]
    pub stats: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    /// Reference shader source.
    #[arg(long, env = "BLOBFUZZ_INPUT")]
    pub input: PathBuf,
    /// Transforms to chain.
    #[arg(long, env = "BLOBFUZZ_DEPTH", default_value_t = 4, value_parser = clap::value_parser!(u32).range(1..=32))]
    pub depth: u32,
    /// Donor corpus manifest [default: the input is its own donor].
    #[arg(long, env = "BLOBFUZZ_CORPUS")]
    pub corpus: Option<PathBuf>,
    /// Replay this recipe instead of generating.
    #[arg(long, env = "BLOBFUZZ_RECIPE")]
    pub recipe: Option<PathBuf>,
    /// Check the variant against the reference in the interpreter.
    #[arg(long, env = "BLOBFUZZ_VERIFY")]
    pub verify: bool,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Shader source, or textual IR (`.ir`/`.ll` or with --ir).
    #[arg(long, env = "BLOBFUZZ_INPUT")]
    pub input: PathBuf,
    /// Treat the input as textual IR.
    #[arg(long)]
    pub ir: bool,
    /// Run the optimizer before executing.
    #[arg(long, env = "BLOBFUZZ_OPTIMIZE")]
    pub optimize: bool,
    #[command(flatten)]
    pub pipeline: PipelineArgs,
    /// Use the reference interpreter instead of lowering.
    #[arg(long, conflicts_with_all = ["ir", "optimize"])]
    pub interpret: bool,
    /// Include output lane values.
    #[arg(long)]
    pub dump_outputs: bool,
    /// Write one IR snapshot per pass application here (with --optimize).
    #[arg(long, env = "BLOBFUZZ_TRACE_DIR")]
    pub trace_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ReduceArgs {
    #[arg(long, env = "BLOBFUZZ_CORPUS")]
    pub corpus: PathBuf,
    /// JSONL reports from `fuzz`.
    #[arg(long, env = "BLOBFUZZ_REPORTS")]
    pub reports: PathBuf,
    /// Only this report (0-based line index).
    #[arg(long)]
    pub index: Option<usize>,
    #[arg(long, env = "BLOBFUZZ_EXEC_SEEDS", value_delimiter = ',', default_value = "1,2,3")]
    pub exec_seeds: Vec<u64>,
}

#[derive(Args, Debug)]
pub struct InspectArgs {
    /// ELF file.
    pub file: PathBuf,
    /// Fingerprint database (TOML) for blobs without a version string.
    #[arg(long, env = "BLOBFUZZ_FINGERPRINTS")]
    pub fingerprints: Option<PathBuf>,
    #[arg(long, env = "BLOBFUZZ_THRESHOLD", default_value_t = 0.3)]
    pub threshold: f64,
    #[arg(long, env = "BLOBFUZZ_MIN_LEN", default_value_t = 4)]
    pub min_len: usize,
    /// Include every extracted string.
    #[arg(long)]
    pub strings: bool,
}

#[derive(Args, Debug)]
pub struct DelayArgs {
    /// Catalog CSV.
    #[arg(long, env = "BLOBFUZZ_CATALOG")]
    pub catalog: PathBuf,
    /// Report only this device.
    #[arg(long)]
    pub device: Option<String>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(64),
            };
        }
    };
    match commands::dispatch(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
