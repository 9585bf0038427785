use holegen_core::campaign::{self, CampaignConfig};
use holegen_core::corpus::{build_pool, generate_sequences, Arg, EntryInput};
use holegen_core::extract::*;
use holegen_core::lang::{self, typeck, HoleKind, Lit, Program, Stmt};
use proptest::prelude::*;
use std::path::PathBuf;

fn corpus(name: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name);
    lang::parse(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn strbuilder(kinds: HoleKinds) -> Template {
    let p = corpus("strbuilder.mj");
    let input = EntryInput { entry: "StrBuilder.trim".into(), setup: vec![], args: vec![Arg::Lit(Lit::Null)] };
    let req = ExtractionRequest { program: &p, entry: "StrBuilder.trim".into(), mode: InputMode::TestBased(&input), kinds, limiter_bound: DEFAULT_LIMITER_BOUND };
    extract(&req, "strbuilder").unwrap()
}

#[test]
fn strbuilder_has_eight_holes() {
    let t = strbuilder(HoleKinds::All);
    let holes = t.program.holes();
    let kinds: Vec<HoleKind> = holes.iter().map(|(_, s)| s.kind).collect();
    use HoleKind::*;
    assert_eq!(kinds, vec![Id, Id, Relation, Id, Id, Val, Logic, Logic]);
    assert_eq!(holes.iter().map(|(i, _)| *i).collect::<Vec<_>>(), (1..=8).collect::<Vec<_>>());
    assert_eq!(t.meta.limiters, vec!["_lim1".to_string(), "_lim2".to_string()]);
    assert!(t.text().contains("_lim1++ < 1000"));
    assert_eq!(t.hole_count(), 8);
    let reparsed = lang::parse(&t.text()).unwrap();
    assert_eq!(lang::print_program(&reparsed), t.text());
}

#[test]
fn limiter_bound_is_configurable() {
    let p = corpus("strbuilder.mj");
    let input = EntryInput { entry: "StrBuilder.trim".into(), setup: vec![], args: vec![Arg::Lit(Lit::Null)] };
    let req = ExtractionRequest { program: &p, entry: "StrBuilder.trim".into(), mode: InputMode::TestBased(&input), kinds: HoleKinds::All, limiter_bound: 17 };
    assert!(extract(&req, "strbuilder").unwrap().text().contains("_lim1++ < 17"));
}

#[test]
fn none_mode_keeps_the_program() {
    let t = strbuilder(HoleKinds::None);
    assert_eq!(t.hole_count(), 0);
    assert!(t.meta.limiters.is_empty());
    let original = corpus("strbuilder.mj");
    let f = |p: &Program| p.function("StrBuilder.trim").unwrap().clone();
    assert_eq!(f(&t.program), f(&original));
}

#[test]
fn request_errors() {
    let p = corpus("strbuilder.mj");
    let input = EntryInput { entry: "StrBuilder.trim".into(), setup: vec![], args: vec![] };
    let req = |entry: &str, input| ExtractionRequest { program: &p, entry: entry.into(), mode: InputMode::TestBased(input), kinds: HoleKinds::All, limiter_bound: 1000 };
    assert!(matches!(extract(&req("nope", &input), "x"), Err(ExtractError::UnknownEntry(_))));
    assert!(matches!(extract(&req("StrBuilder.trim", &input), "x"), Err(ExtractError::Arity { .. })));
    let other = EntryInput { entry: "StrBuilder.append".into(), ..input.clone() };
    assert!(matches!(extract(&req("StrBuilder.trim", &other), "x"), Err(ExtractError::InputMismatch { .. })));
}

#[test]
fn hole_kind_names() {
    for m in HoleKinds::MODES {
        assert_eq!(m.name().parse::<HoleKinds>().unwrap(), m);
    }
    assert!("bitwise".parse::<HoleKinds>().is_err());
}

#[test]
fn pool_mode_providers_cover_every_parameter() {
    let p = corpus("quaternion.mj");
    let pool = build_pool(&generate_sequences(&p, 30, 5));
    for entry in campaign::entries(&p) {
        let req = ExtractionRequest { program: &p, entry: entry.clone(), mode: InputMode::PoolBased { pool: &pool, seed: 9 }, kinds: HoleKinds::All, limiter_bound: 1000 };
        let t = extract(&req, "q").unwrap();
        let f = p.function(&entry).unwrap();
        let h = t.program.harness.as_ref().unwrap();
        let want = f.params.len() + f.receiver.is_some() as usize;
        match &h.args {
            lang::ArgSource::PerParam(names) => {
                assert_eq!(names.len(), want, "{entry}");
                assert!(names.iter().all(|n| t.program.function(n).is_some()));
            }
            other => panic!("{entry}: {other:?}"),
        }
        // Signature preservation.
        let g = t.program.function(&entry).unwrap();
        assert_eq!((&g.params, &g.ret, &g.receiver), (&f.params, &f.ret, &f.receiver));
    }
}

#[test]
fn limiters_are_declared_before_their_loop() {
    let t = strbuilder(HoleKinds::All);
    let f = t.program.function("StrBuilder.trim").unwrap();
    let mut seen = false;
    for s in &f.body {
        s.walk_stmts(&mut |s| match s {
            Stmt::VarDecl { name, .. } if name == "_lim1" => seen = true,
            Stmt::While { .. } | Stmt::For { .. } => assert!(seen, "loop before its limiter"),
            _ => {}
        });
    }
}

fn corpus_templates(kinds: HoleKinds) -> Vec<Template> {
    let cfg = CampaignConfig { corpus_dir: PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus"), hole_kinds: kinds, ..CampaignConfig::default() };
    let mut out = Vec::new();
    for src in campaign::load_sources(&cfg.corpus_dir).unwrap() {
        let col = campaign::collect_one(&src, &cfg);
        let (ts, errs) = campaign::extract_one(&src, &col, &cfg);
        assert!(errs.is_empty(), "{errs:?}");
        out.extend(ts);
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 5, ..ProptestConfig::default() })]

    #[test]
    fn restricted_modes_emit_only_their_kinds(m in prop::sample::select(HoleKinds::MODES.to_vec())) {
        for t in corpus_templates(m) {
            prop_assert!(typeck::check_program(&t.program).is_ok());
            for (_, spec) in t.program.holes() {
                prop_assert!(m.contains(spec.kind), "{}: {:?} in {}", t.meta.name, spec.kind, m);
            }
            prop_assert_eq!(t.meta.holes.clone(), count_holes(&lang::parse(&t.text()).unwrap()));
        }
    }
}
