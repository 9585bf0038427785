use holegen_core::campaign::{self, CampaignConfig};
use holegen_core::corpus::{Arg, EntryInput};
use holegen_core::extract::{self, ExtractionRequest, HoleKinds, InputMode, Template};
use holegen_core::genharness::checksum::Checksum;
use holegen_core::genharness::driver::{run_harness, CrashKind, DriverOptions, HarnessOutcome, InterpEngine};
use holegen_core::genharness::generate::{generate, GenConfig, SessionStatus};
use holegen_core::interp::oracle::in_space;
use holegen_core::interp::{Decisions, HoleOracle};
use holegen_core::lang::{self, typeck, Expr, Lit, Program, Stmt, Type};
use holegen_core::optvm::{FaultSet, OptLevel, VmEngine};
use holegen_core::runtime::*;
use proptest::prelude::*;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::rc::Rc;
use std::sync::OnceLock;

fn templates() -> &'static Vec<Template> {
    static T: OnceLock<Vec<Template>> = OnceLock::new();
    T.get_or_init(|| {
        let cfg = CampaignConfig {
            corpus_dir: PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus"),
            inputs_per_entry: 1,
            seed: 7,
            ..CampaignConfig::default()
        };
        let mut out = Vec::new();
        for src in campaign::load_sources(&cfg.corpus_dir).unwrap() {
            let col = campaign::collect_one(&src, &cfg);
            out.extend(campaign::extract_one(&src, &col, &cfg).0);
        }
        out
    })
}

fn small(seed: u64) -> GenConfig {
    GenConfig { programs_per_template: 3, harness_loops: 5, seed, ..GenConfig::default() }
}

fn template(src: &str, input: EntryInput) -> Template {
    let p = lang::parse(src).unwrap();
    let req = ExtractionRequest { program: &p, entry: input.entry.clone(), mode: InputMode::TestBased(&input), kinds: HoleKinds::All, limiter_bound: 1000 };
    extract::extract(&req, "t").unwrap()
}

/// Every declared name with its types, over the whole program.
fn declared(p: &Program) -> BTreeMap<String, BTreeSet<Type>> {
    let mut m: BTreeMap<String, BTreeSet<Type>> = BTreeMap::new();
    for g in &p.globals {
        m.entry(g.name.clone()).or_default().insert(g.ty.clone());
    }
    for r in &p.records {
        for f in &r.fields {
            m.entry(f.name.clone()).or_default().insert(f.ty.clone());
        }
    }
    for f in &p.functions {
        for pa in &f.params {
            m.entry(pa.name.clone()).or_default().insert(pa.ty.clone());
        }
        for s in &f.body {
            s.walk_stmts(&mut |s| {
                if let Stmt::VarDecl { name, ty, .. } = s {
                    m.entry(name.clone()).or_default().insert(ty.clone());
                }
            });
        }
    }
    m
}

fn idents(e: &Expr, out: &mut Vec<String>) {
    if let Expr::Ident(n) = e {
        out.push(n.clone());
    }
    for c in e.children() {
        idents(c, out);
    }
}

#[test]
fn generation_is_deterministic() {
    for t in templates().iter().take(25) {
        let a = generate(t, &small(11));
        let b = generate(t, &small(11));
        assert_eq!(a.sessions, b.sessions, "{}", t.meta.name);
        let pa: Vec<String> = a.programs.iter().map(|g| lang::print_program(&g.program)).collect();
        let pb: Vec<String> = b.programs.iter().map(|g| lang::print_program(&g.program)).collect();
        assert_eq!(pa, pb);
    }
}

#[test]
fn decisions_stay_in_their_search_space() {
    let mut checked = 0;
    for t in templates() {
        let names = declared(&t.program);
        let specs: BTreeMap<u32, _> = t.program.holes().into_iter().collect();
        for s in generate(t, &small(3)).sessions {
            for (id, text) in &s.decisions {
                let spec = specs[id];
                let e = lang::parser::parse_expr(text).unwrap_or_else(|err| panic!("decision `{text}`: {err}"));
                let mut used = Vec::new();
                idents(&e, &mut used);
                // Names declared with several types are left to the type checker.
                if used.iter().any(|n| names.get(n).map_or(0, BTreeSet::len) != 1) {
                    continue;
                }
                let types = |n: &str| names.get(n).and_then(|s| s.iter().next().cloned());
                assert!(in_space(spec, &e, &types), "{}: hole {id} decided `{text}`", t.meta.name);
                checked += 1;
            }
        }
    }
    assert!(checked > 200, "only {checked} decisions checked");
}

#[test]
fn emitted_programs_parse_and_typecheck() {
    for t in templates() {
        for g in generate(t, &small(5)).programs {
            let text = lang::print_program(&g.program);
            let again = lang::parse(&text).unwrap_or_else(|e| panic!("{}: {e}\n{text}", g.name));
            typeck::check_program(&again).unwrap_or_else(|e| panic!("{}: {e}\n{text}", g.name));
            assert!(again.holes().is_empty());
            assert_eq!(again.harness.as_ref().unwrap().loops, Some(5));
        }
    }
}

#[test]
fn backends_agree_on_emitted_programs() {
    let opts = DriverOptions { loops_override: Some(4), ..DriverOptions::default() };
    let mut n = 0;
    for t in templates().iter().step_by(2) {
        for g in generate(t, &small(9)).programs {
            let p = &g.program;
            let want = run_harness(&mut InterpEngine::new(p, ExecLimits::default()), p, &opts);
            for level in OptLevel::ALL {
                let got = run_harness(&mut VmEngine::new(p, level, FaultSet::none(), ExecLimits::default()).unwrap(), p, &opts);
                assert_eq!(got, want, "{} at {level}", g.name);
            }
            n += 1;
        }
    }
    assert!(n > 40, "only {n} programs");
}

#[test]
fn limiter_bounds_a_runaway_loop() {
    let src = "fn int f(int n) {\n    int c = 0;\n    while (n > 0) {\n        c++;\n    }\n    return c;\n}\n";
    let t = template(src, EntryInput { entry: "f".into(), setup: vec![], args: vec![Arg::Lit(Lit::Int(0))] });
    assert_eq!(t.meta.limiters.len(), 1);
    // Replay the source expressions with a positive argument.
    let mut decisions = Decisions::new();
    for (id, spec) in t.program.holes() {
        decisions.insert(id, Rc::new((**spec.source.as_ref().unwrap()).clone()));
    }
    let mut it = holegen_core::interp::Interp::new(&t.program, HoleOracle::Replay(decisions), ExecLimits::default());
    let mut st = it.init_globals().unwrap();
    assert_eq!(it.call_entry(&mut st, "f", &[Value::Int(5)]), Outcome::Returned(Value::Int(1000)));
    assert_eq!(it.call_entry(&mut st, "f", &[Value::Int(5)]), Outcome::Returned(Value::Int(1000)));
}

#[test]
fn trapping_provider_skips_the_session() {
    let src = "fn int f(int n) {\n    return n + 1;\n}\n\nfn int _arg0() {\n    return 1 / 0;\n}\n\nharness f(_arg0);\n";
    let t = Template::from_program("skip", lang::parse(src).unwrap());
    let out = generate(&t, &small(1));
    assert!(out.programs.is_empty());
    assert!(out.sessions.iter().all(|s| s.status == SessionStatus::SkippedPreEntry && s.calls == 0));
}

#[test]
fn unreached_holes_become_unfilled_and_trap_when_reached() {
    let v = "ops={}; operands=[]";
    let src = format!(
        "fn int f(int n) {{\n    if (n > 10) {{\n        return ?H1{{kind=Val; type=int; {v}}};\n    }}\n    return n + ?H2{{kind=Val; type=int; {v}}};\n}}\n\nfn int _arg0() {{\n    return 3;\n}}\n\nharness f(_arg0);\n"
    );
    let t = Template::from_program("dead", lang::parse(&src).unwrap());
    let cfg = GenConfig { max_fill_iterations: 4, ..small(2) };
    let out = generate(&t, &cfg);
    assert_eq!(out.programs.len(), 3);
    for s in &out.sessions {
        assert_eq!(s.status, SessionStatus::PartialAfterN);
        assert_eq!(s.calls, 4);
        assert_eq!(s.decisions.keys().copied().collect::<Vec<_>>(), vec![2]);
    }
    let p = &out.programs[0].program;
    assert!(lang::print_program(p).contains("unfilled(1, int)"));
    let opts = DriverOptions::default();
    assert!(matches!(run_harness(&mut InterpEngine::new(p, ExecLimits::default()), p, &opts), HarnessOutcome::Checksum(_)));

    // The same program with the dead branch made live.
    let live = lang::parse(&lang::print_program(p).replace("return 3;", "return 30;")).unwrap();
    assert_eq!(run_harness(&mut InterpEngine::new(&live, ExecLimits::default()), &live, &opts), HarnessOutcome::Crash(CrashKind::UnfilledHole));
    let vm = run_harness(&mut VmEngine::new(&live, OptLevel::L2, FaultSet::none(), ExecLimits::default()).unwrap(), &live, &opts);
    assert_eq!(vm, HarnessOutcome::Crash(CrashKind::UnfilledHole));
}

#[test]
fn checksum_is_order_sensitive_and_canonical() {
    let heap = Heap::default();
    let hash = |vs: &[Value]| {
        let mut c = Checksum::new();
        vs.iter().for_each(|v| c.update(*v, &heap));
        c.value()
    };
    assert_ne!(hash(&[Value::Int(1), Value::Int(2)]), hash(&[Value::Int(2), Value::Int(1)]));
    assert_eq!(hash(&[Value::Double(f64::NAN)]), hash(&[Value::Double(-f64::NAN)]));
    assert_ne!(hash(&[Value::Double(0.0)]), hash(&[Value::Double(-0.0)]));
    assert_ne!(hash(&[Value::Int(0)]), hash(&[Value::Char(0)]));
    assert_ne!(hash(&[Value::Null]), hash(&[Value::Unit]));
}

#[test]
fn shared_references_hash_differently_from_copies() {
    let p = lang::parse("record P {\n    int[] a;\n    int[] b;\n}\n\nfn void P.init(int[] x, int[] y) {\n    a = x;\n    b = y;\n}\n").unwrap();
    let mut heap = Heap::default();
    let x = heap.new_array_from(ArrayData::Int(vec![1, 2]), u64::MAX).unwrap();
    let y = heap.new_array_from(ArrayData::Int(vec![1, 2]), u64::MAX).unwrap();
    let shared = heap.new_record(&p, 0, u64::MAX).unwrap();
    let split = heap.new_record(&p, 0, u64::MAX).unwrap();
    let (Value::Record(rs), Value::Record(rp)) = (shared, split) else { unreachable!() };
    *heap.fields_mut(rs) = vec![x, x];
    *heap.fields_mut(rp) = vec![x, y];
    let h = |v| {
        let mut c = Checksum::new();
        c.update(v, &heap);
        c.value()
    };
    assert_ne!(h(shared), h(split));
}

proptest! {
    #[test]
    fn int_streams_match_reference(xs in prop::collection::vec(any::<i32>(), 0..64)) {
        let heap = Heap::default();
        let mut c = Checksum::new();
        let mut h: u64 = 0xcbf29ce484222325;
        for x in &xs {
            c.update(Value::Int(*x), &heap);
            for b in std::iter::once(1u8).chain(x.to_be_bytes()) {
                h = (h ^ b as u64).wrapping_mul(0x100000001b3);
            }
        }
        prop_assert_eq!(c.value(), h);
    }

    #[test]
    fn generation_seeds_are_reproducible(seed in any::<u64>(), k in 0usize..40) {
        let t = &templates()[k % templates().len()];
        let cfg = GenConfig { programs_per_template: 1, harness_loops: 2, seed, ..GenConfig::default() };
        let a = generate(t, &cfg);
        let b = generate(t, &cfg);
        prop_assert_eq!(a.sessions, b.sessions);
    }
}
