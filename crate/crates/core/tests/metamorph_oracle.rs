//! Every generated variant computes exactly what its reference computes.

use std::collections::BTreeSet;
use std::path::PathBuf;

use blobfuzz_core::exec::{ExecEnv, ExecStatus};
use blobfuzz_core::ir::lower;
use blobfuzz_core::lang::interp::interpret;
use blobfuzz_core::lang::{
    check_text, load_corpus, pretty_print, typecheck, NodeId, Qualifier, ShaderAst, SourceShader, StmtKind, TypedAst,
};
use blobfuzz_core::metamorph::*;
use blobfuzz_core::rng::SplitMix64;

fn corpus() -> Vec<SourceShader> {
    load_corpus(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/manifest.toml")).unwrap()
}

fn outputs(ast: &ShaderAst) -> Vec<String> {
    ast.globals.iter().filter(|g| g.qualifier == Qualifier::Out).map(|g| g.name.clone()).collect()
}

fn assert_equivalent(reference: &TypedAst, v: &VariantShader, what: &str) {
    let typed = typecheck(&v.ast).unwrap_or_else(|e| panic!("{what}: {e}\n{}", v.text));
    let reparsed = check_text(&v.text).unwrap_or_else(|e| panic!("{what}: {e}\n{}", v.text));
    assert_eq!(pretty_print(&reparsed.ast), v.text);
    // Interface: same inputs and uniforms, outputs only grow.
    let iface = |a: &ShaderAst, q: Qualifier| a.globals.iter().filter(|g| g.qualifier == q).cloned().collect::<Vec<_>>();
    assert_eq!(iface(&reference.ast, Qualifier::In), iface(&v.ast, Qualifier::In), "{what}");
    assert_eq!(iface(&reference.ast, Qualifier::Uniform), iface(&v.ast, Qualifier::Uniform), "{what}");
    let ref_outs = outputs(&reference.ast);
    let var_outs: BTreeSet<String> = outputs(&v.ast).into_iter().collect();
    assert!(ref_outs.iter().all(|o| var_outs.contains(o)), "{what}");
    for seed in 0..4 {
        let env = ExecEnv::with_seed(seed);
        let a = interpret(reference, &env);
        let b = interpret(&typed, &env);
        assert_eq!(a.status, b.status, "{what} seed {seed}\n{}", v.text);
        if a.status == ExecStatus::Ok {
            assert_eq!(a.hash_over(&ref_outs), b.hash_over(&ref_outs), "{what} seed {seed}\n{}", v.text);
        }
    }
}

#[test]
fn variants_preserve_reference_outputs() {
    let sources = corpus();
    let donors = donors_from(&sources).unwrap();
    let mut kinds = BTreeSet::new();
    for s in &sources {
        let reference = check_text(&s.text).unwrap();
        for (seed, depth) in [(1u64, 1u32), (2, 3), (3, 8), (4, 8), (5, 16), (6, 4), (7, 2), (8, 12)] {
            let v = generate_variant(&reference, &s.name, &donors, seed, depth).unwrap();
            assert!(!v.recipe.chain.is_empty());
            kinds.extend(v.recipe.chain.iter().map(|st| st.kind));
            assert_equivalent(&reference, &v, &format!("{} seed {seed} depth {depth}", s.name));
            // Closure also holds for the compiler's front door.
            lower(&typecheck(&v.ast).unwrap()).unwrap();
        }
    }
    assert_eq!(kinds.len(), TransformKind::ALL.len(), "{kinds:?}");
}

#[test]
fn every_kind_preserves_semantics_on_its_own() {
    let sources = corpus();
    let donors = donors_from(&sources).unwrap();
    for s in &sources {
        let reference = check_text(&s.text).unwrap();
        for (kind, site) in applicable_sites(&reference, true) {
            let donor = (kind == TransformKind::CodeDonation).then(|| donors[site.0 as usize % donors.len()].name.clone());
            for param in 0..2 {
                let step = Step { kind, site, param, donor: donor.clone() };
                let ast = match apply_step(&reference, &step, &donors) {
                    Ok(a) => a,
                    Err(TransformError::NoDonatableRegion) => continue,
                    Err(e) => panic!("{} {kind} at {site}: {e}", s.name),
                };
                let recipe = VariantRecipe {
                    seed: 0,
                    attempt: 0,
                    chain: vec![step],
                    donor_names: vec![],
                    reference_hash: String::new(),
                    donor_hashes: Default::default(),
                };
                let text = pretty_print(&ast);
                let v = VariantShader { ast, text, recipe, reference_name: s.name.clone() };
                assert_equivalent(&reference, &v, &format!("{} {kind} at {site}", s.name));
            }
        }
    }
}

#[test]
fn replay_reproduces_text_and_survives_json() {
    let sources = corpus();
    let donors = donors_from(&sources).unwrap();
    for s in sources.iter().take(8) {
        let reference = check_text(&s.text).unwrap();
        for seed in 0..5 {
            let v = generate_variant(&reference, &s.name, &donors, seed, 8).unwrap();
            let again = generate_variant(&reference, &s.name, &donors, seed, 8).unwrap();
            assert_eq!(v.text, again.text);
            let recipe = VariantRecipe::from_json(&v.recipe.to_json()).unwrap();
            assert_eq!(recipe, v.recipe);
            let r = replay_recipe(&reference, &s.name, &donors, &recipe).unwrap();
            assert_eq!(r.text, v.text);
        }
    }
}

#[test]
fn edited_inputs_are_a_recipe_mismatch() {
    let sources = corpus();
    let donors = donors_from(&sources).unwrap();
    let s = &sources[0];
    let reference = check_text(&s.text).unwrap();
    let donated = (0..200)
        .map(|seed| generate_variant(&reference, &s.name, &donors, seed, 8).unwrap())
        .find(|v| !v.recipe.donor_names.is_empty())
        .expect("some variant uses donation");
    let edited_ref =
        check_text(&s.text.replace("main()", "main( )").replacen("void main", "void helper_unused() { }\nvoid main", 1)).unwrap();
    assert!(matches!(replay_recipe(&edited_ref, &s.name, &donors, &donated.recipe), Err(MetamorphError::RecipeMismatch(_))));
    let name = &donated.recipe.donor_names[0];
    let mut edited = sources.clone();
    let d = edited.iter_mut().find(|x| &x.name == name).unwrap();
    d.text = d.text.replacen("void main", "void helper_unused() { }\nvoid main", 1);
    let edited_donors = donors_from(&edited).unwrap();
    assert!(matches!(replay_recipe(&reference, &s.name, &edited_donors, &donated.recipe), Err(MetamorphError::RecipeMismatch(_))));
    let missing: Vec<Donor> = donors.iter().filter(|x| &x.name != name).cloned().collect();
    assert!(matches!(replay_recipe(&reference, &s.name, &missing, &donated.recipe), Err(MetamorphError::RecipeMismatch(_))));
}

#[test]
fn depth_limits() {
    let s = &corpus()[0];
    let reference = check_text(&s.text).unwrap();
    assert!(matches!(generate_variant(&reference, &s.name, &[], 1, 0), Err(MetamorphError::InvalidDepth(0))));
    assert!(matches!(generate_variant(&reference, &s.name, &[], 1, 33), Err(MetamorphError::InvalidDepth(33))));
    let v = generate_variant(&reference, &s.name, &[], 9, 1).unwrap();
    assert_eq!(v.recipe.chain.len(), 1);
}

fn find_stmt(ast: &ShaderAst, pred: impl Fn(&StmtKind) -> bool) -> NodeId {
    let mut found = None;
    ast.main().unwrap().body.visit(
        &mut |s| {
            if found.is_none() && pred(&s.kind) {
                found = Some(s.id)
            }
        },
        &mut |_| {},
    );
    found.unwrap()
}

#[test]
fn mix_wrap_rejects_bool_sites() {
    let t = check_text("in float a; out float o; void main() { bool b = a > 0.0; o = b ? a : 1.0; }").unwrap();
    let mut bool_site = None;
    t.ast.main().unwrap().body.visit(&mut |_| {}, &mut |e| {
        if bool_site.is_none() && t.types[&e.id] == blobfuzz_core::lang::Type::BOOL {
            bool_site = Some(e.id);
        }
    });
    let r = mutate_statement(&t, bool_site.unwrap(), &mut SplitMix64::new(1));
    assert!(matches!(r, Err(TransformError::NotApplicable(_))));
}

#[test]
fn control_flow_examples() {
    let src = "out float o; void main() { float s = 0.0; for (int i = 0; i < 3; i++) { s += float(i); } s = 2.0 + s; o = s; }";
    let t = check_text(src).unwrap();
    let for_id = find_stmt(&t.ast, |k| matches!(k, StmtKind::For { .. }));
    let w = mutate_control_flow(&t.ast, for_id, TransformKind::ForToWhile, &mut SplitMix64::new(0)).unwrap();
    let text = pretty_print(&w);
    assert!(text.contains("while (i < 3)"), "{text}");
    assert!(!text.contains("for ("), "{text}");

    let u = mutate_control_flow(&t.ast, for_id, TransformKind::LoopUnroll, &mut SplitMix64::new(2)).unwrap();
    let text = pretty_print(&u);
    let env = ExecEnv::with_seed(0);
    assert_eq!(interpret(&typecheck(&u).unwrap(), &env).outputs, interpret(&t, &env).outputs, "{text}");

    // Full unroll: three copies with substituted induction values.
    let full = (0..64)
        .map(|p| mutate_control_flow(&t.ast, for_id, TransformKind::LoopUnroll, &mut SplitMix64::new(p)).unwrap())
        .map(|a| pretty_print(&a))
        .find(|x| !x.contains("for ("))
        .unwrap();
    for k in 0..3 {
        assert!(full.contains(&format!("int i = {k};")), "{full}");
    }

    let set_id = find_stmt(&t.ast, |k| matches!(k, StmtKind::Assign { target, .. } if target == "s"));
    let wrapped =
        pretty_print(&mutate_control_flow(&t.ast, set_id, TransformKind::SingleIterationLoopWrap, &mut SplitMix64::new(0)).unwrap());
    assert!(wrapped.contains("for (int k0 = 0; k0 < 1; k0++)"), "{wrapped}");

    let decl_id = find_stmt(&t.ast, |k| matches!(k, StmtKind::Decl { .. }));
    assert!(mutate_control_flow(&t.ast, decl_id, TransformKind::SingleIterationLoopWrap, &mut SplitMix64::new(0)).is_err());

    let cont = check_text(
        "out float o; void main() { float s = 0.0; for (int i = 0; i < 3; i++) { if (i == 1) { continue; } s += 1.0; } o = s; }",
    )
    .unwrap();
    let id = find_stmt(&cont.ast, |k| matches!(k, StmtKind::For { .. }));
    assert!(mutate_control_flow(&cont.ast, id, TransformKind::ForToWhile, &mut SplitMix64::new(0)).is_err());
}

#[test]
fn if_to_switch_uses_a_widened_condition() {
    let t = check_text("in float x; out float o; void main() { if (x > 0.5) { o = 1.0; } else { o = 2.0; } }").unwrap();
    let id = find_stmt(&t.ast, |k| matches!(k, StmtKind::If { .. }));
    let text = pretty_print(&mutate_control_flow(&t.ast, id, TransformKind::IfToSwitch, &mut SplitMix64::new(0)).unwrap());
    assert!(text.contains("switch (int(x > 0.5))"), "{text}");
    assert!(text.contains("case 1:") && text.contains("default:"), "{text}");
}

#[test]
fn donation_into_empty_main_and_name_collisions() {
    let donor_src = SourceShader {
        name: "donor".into(),
        stage: blobfuzz_core::lang::Stage::Fragment,
        text: "uniform float u; out float r; void main() { float tmp = u * 2.0; tmp = tmp + 1.0; r = tmp; }".into(),
    };
    let donors = donors_from(&[donor_src]).unwrap();
    let empty = check_text("out float o; void main() { }").unwrap();
    let d = donate_code(&empty.ast, &donors[0], &mut SplitMix64::new(3)).unwrap();
    let typed = typecheck(&d).unwrap();
    assert!(typed.warnings.iter().all(|w| !matches!(w, blobfuzz_core::lang::Warning::Shadowing { .. })));
    assert!(outputs(&d).len() == 2);
    let env = ExecEnv::with_seed(0);
    assert_eq!(interpret(&typed, &env).hash_over(&["o"]), interpret(&empty, &env).hash_over(&["o"]));

    let target = check_text("in float a; out float o; void main() { float tmp = a; o = tmp; }").unwrap();
    for seed in 0..10 {
        let d = donate_code(&target.ast, &donors[0], &mut SplitMix64::new(seed)).unwrap();
        let typed = typecheck(&d).unwrap_or_else(|e| panic!("{e}\n{}", pretty_print(&d)));
        assert!(typed.warnings.iter().all(|w| !matches!(w, blobfuzz_core::lang::Warning::Shadowing { .. })), "{}", pretty_print(&d));
        assert_eq!(interpret(&typed, &env).hash_over(&["o"]), interpret(&target, &env).hash_over(&["o"]));
    }
}
