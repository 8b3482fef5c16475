//! Corpus manifests: a TOML list of `[[shader]]` tables with `name`,
//! `path` (relative to the manifest) and `stage` (`vertex` or `fragment`).

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use super::ast::{SourceShader, Stage};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },
    #[error("duplicate shader name `{0}`")]
    DuplicateName(String),
    #[error("shader `{0}` is empty")]
    Empty(String),
}

#[derive(Deserialize)]
struct Manifest {
    #[serde(default)]
    shader: Vec<Entry>,
}

#[derive(Deserialize)]
struct Entry {
    name: String,
    path: PathBuf,
    stage: Option<String>,
}

/// Loads every shader a manifest lists, in manifest order.
pub fn load_corpus(manifest: &Path) -> Result<Vec<SourceShader>, CorpusError> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|source| CorpusError::Io { path: p.to_path_buf(), source });
    let bad = |message: String| CorpusError::Manifest { path: manifest.to_path_buf(), message };
    let text = read(manifest)?;
    let m: Manifest = toml::from_str(&text).map_err(|e| bad(e.to_string()))?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut names = HashSet::new();
    let mut out = Vec::with_capacity(m.shader.len());
    for e in m.shader {
        if !names.insert(e.name.clone()) {
            return Err(CorpusError::DuplicateName(e.name));
        }
        let stage = match e.stage.as_deref() {
            Some("vertex") => Stage::Vertex,
            Some("fragment") => Stage::Fragment,
            Some(other) => return Err(bad(format!("`{}`: unknown stage `{other}`", e.name))),
            None => e
                .path
                .extension()
                .and_then(|x| x.to_str())
                .and_then(Stage::from_extension)
                .ok_or_else(|| bad(format!("`{}`: no stage and no .vert/.frag extension", e.name)))?,
        };
        let text = read(&base.join(&e.path))?;
        if text.trim().is_empty() {
            return Err(CorpusError::Empty(e.name));
        }
        out.push(SourceShader { name: e.name, stage, text });
    }
    Ok(out)
}
