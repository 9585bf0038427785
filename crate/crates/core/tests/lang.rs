use holegen_core::genharness::driver::{Engine, InterpEngine};
use holegen_core::lang::{self, typeck};
use holegen_core::optvm::{FaultSet, OptLevel, VmEngine};
use holegen_core::runtime::*;
use proptest::prelude::*;
use std::path::PathBuf;

fn corpus_files() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus");
    let mut out = Vec::new();
    for sub in ["", "noise", "regressions"] {
        for e in std::fs::read_dir(dir.join(sub)).unwrap() {
            let p = e.unwrap().path();
            if p.extension().is_some_and(|x| x == "mj" || x == "mjt") {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

fn int_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        any::<i32>().prop_map(|v| if v < 0 { format!("({v})") } else { v.to_string() }),
        Just("x".to_string()),
        Just("y".to_string()),
        Just("a.length".to_string()),
        (0..6i32).prop_map(|i| format!("a[{i}]")),
        Just("(int) d".to_string()),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        let ops = prop::sample::select(vec!["+", "-", "*", "/", "%", "<<", ">>", ">>>"]);
        prop_oneof![
            (inner.clone(), ops, inner.clone()).prop_map(|(l, o, r)| format!("({l} {o} {r})")),
            inner.clone().prop_map(|e| format!("(-{e})")),
            inner.clone().prop_map(|e| format!("(~{e})")),
            inner.clone().prop_map(|e| format!("((int) (char) {e})")),
            inner.prop_map(|e| format!("((int) ((double) {e} / 3.0))")),
        ]
    })
}

fn bool_expr() -> impl Strategy<Value = String> {
    let rel = prop::sample::select(vec!["<", "<=", ">", ">=", "==", "!="]);
    let logic = prop::sample::select(vec!["&&", "||"]);
    (int_expr(), rel, int_expr(), logic, int_expr()).prop_map(|(a, r, b, l, c)| format!("({a} {r} {b}) {l} !({c} > 0)"))
}

fn program() -> impl Strategy<Value = String> {
    (int_expr(), bool_expr(), int_expr(), int_expr()).prop_map(|(e1, b, e2, e3)| {
        format!(
            "global int G = 0;\n\nfn int f(int x, int y, double d, int[] a) {{\n    int s = 0;\n    for (int i = 0; i < 3; i++) {{\n        s += {e1};\n        x = x + i;\n    }}\n    if ({b}) {{\n        s = s - {e2};\n    }}\n    G = G + {e3};\n    return s;\n}}\n"
        )
    })
}

fn args(st: &mut GlobalState, x: i32, y: i32, d: f64, len: usize) -> Vec<Value> {
    let a = st.heap.new_array_from(ArrayData::Int((0..len as i32).map(|i| i * 7 - 3).collect()), u64::MAX).unwrap();
    vec![Value::Int(x), Value::Int(y), Value::Double(d), a]
}

fn observe(e: &mut dyn Engine, x: i32, y: i32, d: f64, len: usize) -> (Outcome, Vec<Value>) {
    let mut st = e.init_globals().unwrap();
    let a = args(&mut st, x, y, d, len);
    let o = e.call(&mut st, "f", &a);
    (o, st.globals.clone())
}

#[test]
fn corpus_round_trips() {
    for f in corpus_files() {
        let text = std::fs::read_to_string(&f).unwrap();
        let p = lang::parse(&text).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
        let printed = lang::print_program(&p);
        let again = lang::parse(&printed).unwrap();
        assert_eq!(again, p, "{}", f.display());
        assert_eq!(lang::print_program(&again), printed);
        typeck::check_program(&p).unwrap_or_else(|e| panic!("{}: {e}", f.display()));
    }
}

#[test]
fn parse_errors_carry_positions() {
    let e = lang::parse("fn int f() {\n  return 1 +;\n}").unwrap_err();
    assert!(e.to_string().contains("2:"), "{e}");
    assert!(lang::parse("fn int f() { return 1; ").is_err());
}

#[test]
fn type_errors_are_reported() {
    for src in [
        "fn int f() { return 1.0; }",
        "fn int f(bool b) { return b + 1; }",
        "fn int f() { return g(); }",
        "fn void f() { int x = 0; int x = 1; }",
        "fn int f(int[] a) { return a[true]; }",
    ] {
        assert!(lang::parse(src).and_then(|p| typeck::check_program(&p).map_err(Into::into)).is_err(), "{src}");
    }
}

#[test]
fn java_shift_and_char_rules() {
    let p = lang::parse(
        "fn int f(int x) { return (x >>> 28) + (x >> 33) + (1 << 32); }\nfn bool g(char c) { return c <= ' '; }",
    )
    .unwrap();
    let mut e = InterpEngine::new(&p, ExecLimits::default());
    let mut st = e.init_globals().unwrap();
    // -16 >>> 28 = 15, -16 >> 1 = -8, 1 << 0 = 1
    assert_eq!(e.call(&mut st, "f", &[Value::Int(-16)]), Outcome::Returned(Value::Int(8)));
    assert_eq!(e.call(&mut st, "g", &[Value::Char(9)]), Outcome::Returned(Value::Bool(true)));
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 96, ..ProptestConfig::default() })]

    #[test]
    fn print_parse_round_trip(src in program()) {
        let p = lang::parse(&src).unwrap();
        let printed = lang::print_program(&p);
        prop_assert_eq!(lang::parse(&printed).unwrap(), p);
    }

    #[test]
    fn typecheck_is_idempotent(src in program()) {
        let p = lang::parse(&src).unwrap();
        prop_assert!(typeck::check_program(&p).is_ok());
        let again = lang::parse(&lang::print_program(&p)).unwrap();
        prop_assert!(typeck::check_program(&again).is_ok());
    }

    #[test]
    fn evaluation_is_total(src in program(), x: i32, y: i32, d in -1e6f64..1e6, len in 0usize..8) {
        let p = lang::parse(&src).unwrap();
        let (o, _) = observe(&mut InterpEngine::new(&p, ExecLimits::default()), x, y, d, len);
        match o {
            Outcome::Returned(v) => prop_assert!(matches!(v, Value::Int(_))),
            Outcome::Trapped { kind, .. } => prop_assert!(matches!(kind, TrapKind::DivByZero | TrapKind::IndexOutOfBounds)),
            Outcome::Exhausted(l) => prop_assert!(false, "exhausted: {l:?}"),
        }
    }

    #[test]
    fn optimizing_levels_agree_with_interpreter(src in program(), x: i32, y: i32, d in -1e6f64..1e6, len in 0usize..8) {
        let p = lang::parse(&src).unwrap();
        let want = observe(&mut InterpEngine::new(&p, ExecLimits::default()), x, y, d, len);
        for level in OptLevel::ALL {
            let mut e = VmEngine::new(&p, level, FaultSet::none(), ExecLimits::default()).unwrap();
            prop_assert_eq!(observe(&mut e, x, y, d, len), want.clone(), "level {}", level);
        }
    }
}
