//! External compilers behind a subprocess protocol: shader text on stdin,
//! textual IR on stdout.

use std::io::{Read, Write};
use std::process::{Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ir::{parse_module, verify, IrModule};
use crate::lang::{pretty_print, ExprKind, ShaderAst};
use crate::metamorph::tree::{expr_kids_mut, stmt_exprs_mut, stmt_kids_mut};

/// How `mix` reaches the external compiler. Ours is
/// `origin * c + unused * (1 - c)`; GLSL's weights the other way.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixConvention {
    #[default]
    Native,
    /// Swap the first two `mix` arguments before sending.
    Glsl,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterConfig {
    /// Program followed by its arguments.
    pub command: Vec<String>,
    #[serde(default)]
    pub mix: MixConvention,
}

#[derive(Debug)]
pub enum AdapterOutcome {
    Compiled(IrModule),
    /// Nonzero exit or death by signal.
    Crashed(String),
    TimedOut,
}

#[derive(Debug, Error)]
pub enum AdapterError {
    #[error("cannot start adapter `{0}`: {1}")]
    Spawn(String, std::io::Error),
    #[error("adapter protocol error: {0}")]
    Protocol(String),
}

fn swap_mix(e: &mut crate::lang::Expr) {
    if let ExprKind::Call(name, args) = &mut e.kind {
        if name == "mix" && args.len() == 3 {
            args.swap(0, 1);
        }
    }
    for k in expr_kids_mut(e) {
        swap_mix(k);
    }
}

fn swap_in_stmt(s: &mut crate::lang::Stmt) {
    for e in stmt_exprs_mut(&mut s.kind) {
        swap_mix(e);
    }
    for k in stmt_kids_mut(&mut s.kind) {
        swap_in_stmt(k);
    }
}

/// Source text as the adapter should see it.
pub fn wire_text(ast: &ShaderAst, mix: MixConvention) -> String {
    match mix {
        MixConvention::Native => pretty_print(ast),
        MixConvention::Glsl => {
            let mut a = ast.clone();
            for f in &mut a.functions {
                for s in &mut f.body.stmts {
                    swap_in_stmt(s);
                }
            }
            pretty_print(&a)
        }
    }
}

fn describe(status: ExitStatus) -> String {
    #[cfg(unix)]
    {
        use std::os::unix::process::ExitStatusExt;
        if let Some(sig) = status.signal() {
            return format!("killed by signal {sig}");
        }
    }
    format!("exited with {}", status.code().unwrap_or(-1))
}

pub fn adapter_compile(text: &str, cfg: &AdapterConfig, timeout: Duration) -> Result<AdapterOutcome, AdapterError> {
    let (prog, args) = cfg.command.split_first().ok_or_else(|| AdapterError::Protocol("empty adapter command".into()))?;
    let mut child = Command::new(prog)
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| AdapterError::Spawn(prog.clone(), e))?;
    let mut stdin = child.stdin.take().unwrap();
    let input = text.to_string();
    // A child that never reads its input must not block us.
    let writer = std::thread::spawn(move || {
        let _ = stdin.write_all(input.as_bytes());
    });
    let mut stdout = child.stdout.take().unwrap();
    let reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout.read_to_string(&mut buf);
        buf
    });
    let mut stderr = child.stderr.take().unwrap();
    let err_reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stderr.read_to_string(&mut buf);
        buf
    });
    let start = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(s)) => break s,
            Ok(None) if start.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Ok(AdapterOutcome::TimedOut);
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(2)),
            Err(e) => return Err(AdapterError::Protocol(format!("wait failed: {e}"))),
        }
    };
    let _ = writer.join();
    let out = reader.join().unwrap_or_default();
    let err = err_reader.join().unwrap_or_default();
    if !status.success() {
        let mut detail = describe(status);
        if let Some(line) = err.lines().find(|l| !l.trim().is_empty()) {
            detail = format!("{detail}: {line}");
        }
        return Ok(AdapterOutcome::Crashed(detail));
    }
    let m = parse_module(&out).map_err(|e| AdapterError::Protocol(e.to_string()))?;
    verify(&m).map_err(|e| AdapterError::Protocol(e.to_string()))?;
    Ok(AdapterOutcome::Compiled(m))
}
