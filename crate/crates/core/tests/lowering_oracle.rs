//! IR execution must agree bit-for-bit with direct AST interpretation.

use std::path::PathBuf;

use blobfuzz_core::exec::{execute, ExecEnv};
use blobfuzz_core::ir::{lower_with, verify, LowerOptions};
use blobfuzz_core::lang::{check_text, interp::interpret, load_corpus};

fn manifest() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/manifest.toml")
}

#[test]
fn corpus_lowering_matches_interpreter() {
    let corpus = load_corpus(&manifest()).unwrap();
    assert!(corpus.len() >= 20);
    for s in &corpus {
        let typed = check_text(&s.text).unwrap_or_else(|e| panic!("{}: {e}", s.name));
        let m = lower_with(&typed, LowerOptions { honor_precision: false }).unwrap();
        verify(&m).unwrap_or_else(|e| panic!("{}: {e}", s.name));
        for seed in 0..100 {
            let env = ExecEnv::with_seed(seed);
            let a = interpret(&typed, &env);
            let b = execute(&m, &env);
            assert!(a.is_ok(), "{} seed {seed}: reference {:?}", s.name, a.status);
            assert_eq!(a.status, b.status, "{} seed {seed}", s.name);
            assert_eq!(a.outputs, b.outputs, "{} seed {seed}", s.name);
        }
    }
}

#[test]
fn switch_entry_past_a_declaration() {
    let src = "uniform int k; out vec4 o;
        void main() {
            float s = 1.0;
            for (int i = 0; i < 4; i++) {
                switch ((k + i) % 3) {
                    case 0: float q = 2.0; s += q; break; float dead = 4.0;
                    case 1: s += q + dead; q = 5.0;
                    default: s *= q + 1.0;
                }
            }
            o = vec4(s);
        }";
    let typed = check_text(src).unwrap();
    let m = lower_with(&typed, LowerOptions { honor_precision: false }).unwrap();
    verify(&m).unwrap();
    for seed in 0..20 {
        let env = ExecEnv::with_seed(seed);
        let a = interpret(&typed, &env);
        assert!(a.is_ok());
        assert_eq!(a.outputs, execute(&m, &env).outputs);
    }
}
