//! Python bindings. Structured results come back as plain dicts and lists.

use std::collections::BTreeSet;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use blobfuzz_core::exec::{execute, ExecEnv};
use blobfuzz_core::forensics::{self, FingerprintDb};
use blobfuzz_core::harness::{run_campaign, CampaignConfig};
use blobfuzz_core::ir::{lower, parse_module, print_module, verify};
use blobfuzz_core::lang::interp::interpret;
use blobfuzz_core::lang::{check_text, pretty_print, SourceShader, Stage};
use blobfuzz_core::metamorph::{self, donors_from, VariantRecipe};
use blobfuzz_core::opt::{run_pipeline, BugId, PipelineConfig};

fn bad(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn bugs(names: Vec<String>) -> PyResult<Vec<BugId>> {
    names.iter().map(|n| n.parse::<BugId>().map_err(bad)).collect()
}

fn donor_pool(reference: (&str, &str), donors: Option<Vec<(String, String)>>) -> Vec<SourceShader> {
    let shader = |name: &str, text: &str| SourceShader { name: name.to_string(), stage: Stage::Fragment, text: text.to_string() };
    match donors {
        Some(d) => d.iter().map(|(n, t)| shader(n, t)).collect(),
        None => vec![shader(reference.0, reference.1)],
    }
}

/// Parses and type checks, returning the canonical pretty-printed form.
#[pyfunction]
fn check(text: &str) -> PyResult<String> {
    Ok(pretty_print(&check_text(text).map_err(bad)?.ast))
}

/// Runs a shader in the reference interpreter.
#[pyfunction]
#[pyo3(signature = (text, seed = 0))]
fn interpret_shader<'py>(py: Python<'py>, text: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let typed = check_text(text).map_err(bad)?;
    to_py(py, &interpret(&typed, &ExecEnv::with_seed(seed)))
}

/// Lowers and optimizes a shader: {"ir", "status", "iterations"}.
#[pyfunction]
#[pyo3(signature = (text, inject = Vec::new(), optimize = true))]
fn compile<'py>(py: Python<'py>, text: &str, inject: Vec<String>, optimize: bool) -> PyResult<Bound<'py, PyAny>> {
    let m = lower(&check_text(text).map_err(bad)?).map_err(bad)?;
    if !optimize {
        return to_py(py, &serde_json::json!({ "ir": print_module(&m), "status": "Completed", "iterations": 0 }));
    }
    let cfg = PipelineConfig::with_bugs(bugs(inject)?);
    cfg.validate().map_err(bad)?;
    let out = run_pipeline(&m, &cfg);
    to_py(py, &serde_json::json!({ "ir": print_module(&out.ir), "status": out.status, "iterations": out.iterations }))
}

/// Executes textual IR.
#[pyfunction]
#[pyo3(signature = (ir, seed = 0))]
fn execute_ir<'py>(py: Python<'py>, ir: &str, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let m = parse_module(ir).map_err(bad)?;
    verify(&m).map_err(bad)?;
    to_py(py, &execute(&m, &ExecEnv::with_seed(seed)))
}

/// One variant: {"text", "recipe"}. `donors` is a list of (name, text);
/// by default the shader donates to itself.
#[pyfunction]
#[pyo3(signature = (text, name = "shader", seed = 0, depth = 4, donors = None))]
fn generate_variant<'py>(
    py: Python<'py>,
    text: &str,
    name: &str,
    seed: u64,
    depth: u32,
    donors: Option<Vec<(String, String)>>,
) -> PyResult<Bound<'py, PyAny>> {
    let typed = check_text(text).map_err(bad)?;
    let pool = donors_from(&donor_pool((name, text), donors)).map_err(bad)?;
    let v = metamorph::generate_variant(&typed, name, &pool, seed, depth).map_err(bad)?;
    to_py(py, &serde_json::json!({ "text": v.text, "recipe": v.recipe }))
}

/// Rebuilds variant text from a recipe (JSON string).
#[pyfunction]
#[pyo3(signature = (text, recipe, name = "shader", donors = None))]
fn replay_recipe(text: &str, recipe: &str, name: &str, donors: Option<Vec<(String, String)>>) -> PyResult<String> {
    let typed = check_text(text).map_err(bad)?;
    let pool = donors_from(&donor_pool((name, text), donors)).map_err(bad)?;
    let r = VariantRecipe::from_json(recipe).map_err(bad)?;
    Ok(metamorph::replay_recipe(&typed, name, &pool, &r).map_err(bad)?.text)
}

/// A campaign over a corpus manifest: {"reports": [...], "stats": {...}}.
#[pyfunction]
#[pyo3(signature = (manifest, variants = 200, seed = 0, inject = Vec::new(), threads = None, minimize = true))]
fn campaign<'py>(
    py: Python<'py>,
    manifest: &str,
    variants: u32,
    seed: u64,
    inject: Vec<String>,
    threads: Option<usize>,
    minimize: bool,
) -> PyResult<Bound<'py, PyAny>> {
    let mut cfg = CampaignConfig {
        manifest: manifest.into(),
        variants_per_reference: variants,
        seed,
        pipeline: PipelineConfig::with_bugs(bugs(inject)?),
        minimize,
        ..Default::default()
    };
    if let Some(t) = threads {
        cfg.parallelism = t;
    }
    let out = py.detach(|| run_campaign(&cfg)).map_err(bad)?;
    to_py(py, &serde_json::json!({ "reports": out.reports, "stats": out.stats }))
}

/// Build-id (hex) of an ELF blob, or None.
#[pyfunction]
fn build_id(data: &[u8]) -> PyResult<Option<String>> {
    match forensics::extract_build_id(data) {
        Ok(id) => Ok(Some(id.hex())),
        Err(forensics::ForensicsError::NotFound) => Ok(None),
        Err(e) => Err(bad(e)),
    }
}

#[pyfunction]
#[pyo3(signature = (data, min_len = 4))]
fn strings(data: &[u8], min_len: usize) -> PyResult<BTreeSet<String>> {
    forensics::extract_strings(data, min_len).map_err(bad)
}

/// Build-id and version of an ELF blob; `fingerprints` is TOML text.
#[pyfunction]
#[pyo3(signature = (data, fingerprints = None, threshold = 0.3))]
fn inspect_blob<'py>(py: Python<'py>, data: &[u8], fingerprints: Option<&str>, threshold: f64) -> PyResult<Bound<'py, PyAny>> {
    let db = fingerprints.map(FingerprintDb::from_toml).transpose().map_err(bad)?;
    to_py(py, &forensics::identify_blob(data, db.as_ref(), threshold, 4).map_err(bad)?)
}

#[pyfunction]
fn parse_version<'py>(py: Python<'py>, strings: BTreeSet<String>) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &forensics::parse_version(&strings).map_err(bad)?)
}

/// Delay aggregates over catalog CSV text.
#[pyfunction]
fn delay_report<'py>(py: Python<'py>, csv: &str) -> PyResult<Bound<'py, PyAny>> {
    let catalog = forensics::read_catalog(csv.as_bytes()).map_err(bad)?;
    to_py(py, &forensics::aggregate_delays(&catalog))
}

#[pymodule]
fn blobfuzz(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(check, m)?)?;
    m.add_function(wrap_pyfunction!(interpret_shader, m)?)?;
    m.add_function(wrap_pyfunction!(compile, m)?)?;
    m.add_function(wrap_pyfunction!(execute_ir, m)?)?;
    m.add_function(wrap_pyfunction!(generate_variant, m)?)?;
    m.add_function(wrap_pyfunction!(replay_recipe, m)?)?;
    m.add_function(wrap_pyfunction!(campaign, m)?)?;
    m.add_function(wrap_pyfunction!(build_id, m)?)?;
    m.add_function(wrap_pyfunction!(strings, m)?)?;
    m.add_function(wrap_pyfunction!(inspect_blob, m)?)?;
    m.add_function(wrap_pyfunction!(parse_version, m)?)?;
    m.add_function(wrap_pyfunction!(delay_report, m)?)?;
    Ok(())
}
