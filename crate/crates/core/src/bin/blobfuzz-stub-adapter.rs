//! Test stand-in for an external compiler. Reads shader text on stdin and
//! writes IR on stdout, or misbehaves on request.
//!
//! usage: blobfuzz-stub-adapter [identity | optimize [INJECTION...] | sleep MS | abort | garbage | exit CODE]

use std::io::Read;
use std::process::ExitCode;

use blobfuzz_core::ir::{lower_with, print_module, LowerOptions};
use blobfuzz_core::lang::check_text;
use blobfuzz_core::opt::{run_pipeline, BugId, PipelineConfig, PipelineStatus};

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode = args.first().map(String::as_str).unwrap_or("identity");
    let mut src = String::new();
    if std::io::stdin().read_to_string(&mut src).is_err() {
        return ExitCode::from(3);
    }
    match mode {
        "sleep" => {
            let ms = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(60_000);
            std::thread::sleep(std::time::Duration::from_millis(ms));
            ExitCode::SUCCESS
        }
        "abort" => std::process::abort(),
        "garbage" => {
            println!("this is not IR");
            ExitCode::SUCCESS
        }
        "exit" => ExitCode::from(args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1)),
        "identity" | "optimize" => {
            let typed = match check_text(&src) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(4);
                }
            };
            let m = match lower_with(&typed, LowerOptions { honor_precision: mode == "optimize" }) {
                Ok(m) => m,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(4);
                }
            };
            if mode == "identity" {
                print!("{}", print_module(&m));
                return ExitCode::SUCCESS;
            }
            let bugs: Result<Vec<BugId>, String> = args[1..].iter().map(|s| s.parse()).collect();
            let cfg = match bugs {
                Ok(b) => PipelineConfig::with_bugs(b),
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(64);
                }
            };
            let out = run_pipeline(&m, &cfg);
            match out.status {
                PipelineStatus::Completed => {
                    print!("{}", print_module(&out.ir));
                    ExitCode::SUCCESS
                }
                // Behave like a real compiler would.
                PipelineStatus::InternalFault { .. } => std::process::abort(),
                PipelineStatus::StallBudgetExceeded => loop {
                    std::thread::sleep(std::time::Duration::from_secs(1));
                },
            }
        }
        other => {
            eprintln!("unknown mode `{other}`");
            ExitCode::from(64)
        }
    }
}
