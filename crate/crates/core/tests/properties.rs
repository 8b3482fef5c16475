//! Randomized properties over the generator, IR text and version ordering.

use std::cmp::Ordering;
use std::path::PathBuf;
use std::sync::OnceLock;

use proptest::prelude::*;

use blobfuzz_core::exec::{execute, ExecEnv};
use blobfuzz_core::forensics::BlobVersion;
use blobfuzz_core::ir::{lower, parse_module, print_module};
use blobfuzz_core::lang::{check_text, interp::interpret, typecheck, SourceShader, TypedAst};
use blobfuzz_core::metamorph::{donors_from, generate_variant, replay_recipe, Donor};
use blobfuzz_core::opt::{run_pipeline, PipelineConfig};

struct Fixture {
    refs: Vec<(SourceShader, TypedAst)>,
    donors: Vec<Donor>,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let corpus = blobfuzz_core::lang::load_corpus(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/manifest.toml")).unwrap();
        let donors = donors_from(&corpus).unwrap();
        let refs = corpus
            .into_iter()
            .map(|s| {
                let t = check_text(&s.text).unwrap();
                (s, t)
            })
            .collect();
        Fixture { refs, donors }
    })
}

fn version() -> impl Strategy<Value = BlobVersion> {
    prop_oneof![
        prop::collection::vec(0u32..100, 3..5).prop_map(|components| BlobVersion::QualcommInternal { components }),
        (0u32..40, 0u32..5).prop_map(|(major, patch)| BlobVersion::ArmRp { major, patch }),
        (0u32..20, 0u32..3, 0u32..3).prop_map(|(major, minor, patch)| BlobVersion::LlvmVersion { major, minor, patch, commit: None }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn variants_are_equivalent_and_replayable(idx in 0usize..64, seed in any::<u64>(), depth in 1u32..8, exec in 0u64..1000) {
        let f = fixture();
        let (src, typed) = &f.refs[idx % f.refs.len()];
        let Ok(v) = generate_variant(typed, &src.name, &f.donors, seed, depth) else { return Ok(()) };
        let vt = typecheck(&v.ast).unwrap();
        let env = ExecEnv::with_seed(exec);
        let a = interpret(typed, &env);
        let b = interpret(&vt, &env);
        for (name, lanes) in &a.outputs {
            prop_assert_eq!(Some(lanes), b.outputs.get(name), "{} seed {} output {}", src.name, seed, name);
        }
        let again = replay_recipe(typed, &src.name, &f.donors, &v.recipe).unwrap();
        prop_assert_eq!(again.text, v.text);
    }

    #[test]
    fn ir_text_round_trips_through_the_pipeline(idx in 0usize..64, exec in 0u64..1000) {
        let f = fixture();
        let (_, typed) = &f.refs[idx % f.refs.len()];
        let m = run_pipeline(&lower(typed).unwrap(), &PipelineConfig::default()).ir;
        let text = print_module(&m);
        let back = parse_module(&text).unwrap();
        prop_assert_eq!(print_module(&back), text);
        let env = ExecEnv::with_seed(exec);
        prop_assert_eq!(execute(&back, &env).outputs, execute(&m, &env).outputs);
    }

    #[test]
    fn versions_order_consistently(a in version(), b in version(), c in version()) {
        prop_assert_eq!(a.to_string().parse::<BlobVersion>().unwrap(), a.clone());
        prop_assert_eq!(a.compare(&a), Some(Ordering::Equal));
        prop_assert_eq!(a.compare(&b), b.compare(&a).map(Ordering::reverse));
        prop_assert_eq!(a.compare(&b).is_some(), a.scheme() == b.scheme());
        if a.compare(&b) == Some(Ordering::Less) && b.compare(&c) == Some(Ordering::Less) {
            prop_assert_eq!(a.compare(&c), Some(Ordering::Less));
        }
    }
}
