use holegen_core::genharness::driver::{Engine, InterpEngine};
use holegen_core::lang::{self, Program};
use holegen_core::optvm::ir::Inst;
use holegen_core::optvm::{compile, FaultKind, FaultSet, OptLevel, VmEngine};
use holegen_core::runtime::*;
use std::path::PathBuf;

fn corpus(name: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(name);
    lang::parse(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

/// Runs `entry` on a fresh state; `mk` builds the arguments in that state.
fn run_with(e: &mut dyn Engine, entry: &str, mk: &dyn Fn(&mut GlobalState) -> Vec<Value>) -> Outcome {
    let mut st = e.init_globals().unwrap();
    let args = mk(&mut st);
    e.call(&mut st, entry, &args)
}

fn vm(p: &Program, level: OptLevel, faults: FaultSet) -> VmEngine<'_> {
    VmEngine::new(p, level, faults, ExecLimits::default()).unwrap()
}

fn chars(v: &[u16]) -> impl Fn(&mut GlobalState) -> Vec<Value> + '_ {
    move |st| vec![st.heap.new_array_from(ArrayData::Char(v.to_vec()), u64::MAX).unwrap()]
}

struct Case {
    file: &'static str,
    fault: FaultKind,
    args: Box<dyn Fn(&mut GlobalState) -> Vec<Value>>,
}

fn cases() -> Vec<Case> {
    vec![
        Case { file: "register_reuse.mj", fault: FaultKind::FremClobber, args: Box::new(|_| vec![Value::Double(3.0)]) },
        Case { file: "range_check.mj", fault: FaultKind::BceOveraggressive, args: Box::new(|_| vec![Value::Int(0)]) },
        Case { file: "loop_condition.mj", fault: FaultKind::LoopcondForce, args: Box::new(|_| vec![Value::Int(13)]) },
        Case { file: "byte_widening.mj", fault: FaultKind::CharWidenSign, args: Box::new(chars(&[0x8020, 0, 0, 0x10])) },
    ]
}

#[test]
fn clean_levels_agree_with_interpreter() {
    for c in cases() {
        let p = corpus(c.file);
        let expected = run_with(&mut InterpEngine::new(&p, ExecLimits::default()), "m", &*c.args);
        for level in OptLevel::ALL {
            let mut e = vm(&p, level, FaultSet::none());
            assert_eq!(run_with(&mut e, "m", &*c.args), expected, "{} at {level}", c.file);
            assert!(e.fired.is_empty());
        }
        // Faults are inert below L2.
        let mut e = vm(&p, OptLevel::L1, FaultSet::all());
        assert_eq!(run_with(&mut e, "m", &*c.args), expected, "{} at L1 with faults", c.file);
    }
}

#[test]
fn each_fault_changes_its_pattern_program_at_l2() {
    for c in cases() {
        let p = corpus(c.file);
        let expected = run_with(&mut InterpEngine::new(&p, ExecLimits::default()), "m", &*c.args);
        let mut e = vm(&p, OptLevel::L2, FaultSet::only(c.fault));
        let got = run_with(&mut e, "m", &*c.args);
        assert_ne!(got, expected, "{} with {}", c.file, c.fault);
        assert_eq!(e.fired.iter().copied().collect::<Vec<_>>(), vec![c.fault], "{}", c.file);
    }
}

#[test]
fn fault_outcomes() {
    let p = corpus("register_reuse.mj");
    let mut e = vm(&p, OptLevel::L2, FaultSet::only(FaultKind::FremClobber));
    // The second constructor argument receives `d % d`.
    assert_eq!(run_with(&mut e, "m", &|_| vec![Value::Double(2.0)]), Outcome::Returned(Value::Double(0.0)));
    let p = corpus("loop_condition.mj");
    let mut e = vm(&p, OptLevel::L2, FaultSet::only(FaultKind::LoopcondForce));
    assert_eq!(
        run_with(&mut e, "m", &|_| vec![Value::Int(13)]),
        Outcome::Trapped { kind: TrapKind::DivByZero, hole: None }
    );
    let p = corpus("byte_widening.mj");
    let mut e = vm(&p, OptLevel::L2, FaultSet::only(FaultKind::CharWidenSign));
    assert_eq!(run_with(&mut e, "m", &chars(&[0x8020, 0, 0, 0x10])), Outcome::Returned(Value::Int(0x8020u16 as i16 as i32)));
}

#[test]
fn other_faults_stay_silent_on_unrelated_programs() {
    for c in cases() {
        let p = corpus(c.file);
        let expected = run_with(&mut InterpEngine::new(&p, ExecLimits::default()), "m", &*c.args);
        let mut others = FaultSet::all();
        others.set(c.fault, false);
        let mut e = vm(&p, OptLevel::L2, others);
        assert_eq!(run_with(&mut e, "m", &*c.args), expected, "{}", c.file);
    }
}

#[test]
fn constant_return_folds_to_const_and_ret() {
    let p = lang::parse("fn int f() { return 2 + 3; }").unwrap();
    let m = compile(&p, OptLevel::L1, FaultSet::none()).unwrap();
    let f = m.func("f").unwrap();
    assert_eq!(f.code.len(), 2, "{}", m.disasm());
    assert!(matches!(f.code[0], Inst::Const { .. }));
    assert!(matches!(f.code[1], Inst::Ret { src: Some(_) }));
}

#[test]
fn division_by_zero_constant_is_not_folded() {
    let p = lang::parse("fn int f() { return 7 / 0; }").unwrap();
    for level in OptLevel::ALL {
        let mut e = vm(&p, level, FaultSet::none());
        assert_eq!(run_with(&mut e, "f", &|_| vec![]), Outcome::Trapped { kind: TrapKind::DivByZero, hole: None });
    }
}

#[test]
fn strength_reduction_matches_truncating_division() {
    let src = "fn int f(int x) { return x / 8 + x % 4 * 1000 + x * 16; }";
    let p = lang::parse(src).unwrap();
    let m = compile(&p, OptLevel::L2, FaultSet::none()).unwrap();
    let f = m.func("f").unwrap();
    assert!(!f.code.iter().any(|i| matches!(i, Inst::Bin { op: holegen_core::optvm::ir::BinKind::IDiv, .. })));
    for x in [0, 1, -1, 7, -7, 9, -9, i32::MIN, i32::MAX, 123456, -123457] {
        let want = (x / 8).wrapping_add((x % 4).wrapping_mul(1000)).wrapping_add(x.wrapping_mul(16));
        let mut e = vm(&p, OptLevel::L2, FaultSet::none());
        assert_eq!(run_with(&mut e, "f", &move |_| vec![Value::Int(x)]), Outcome::Returned(Value::Int(want)), "x={x}");
    }
}

#[test]
fn loop_fuel_and_depth_limits() {
    let p = lang::parse("fn int f() { int i = 0; while (true) { i++; } return i; }").unwrap();
    let limits = ExecLimits { max_steps: 1000, ..ExecLimits::default() };
    for level in OptLevel::ALL {
        let mut e = VmEngine::new(&p, level, FaultSet::none(), limits).unwrap();
        assert_eq!(run_with(&mut e, "f", &|_| vec![]), Outcome::Exhausted(Limit::Steps));
    }
    let p = lang::parse("fn int f(int n) { return f(n + 1); }").unwrap();
    for level in OptLevel::ALL {
        let mut e = vm(&p, level, FaultSet::none());
        assert_eq!(run_with(&mut e, "f", &|_| vec![Value::Int(0)]), Outcome::Exhausted(Limit::Depth));
    }
}

#[test]
fn fault_set_parsing() {
    let s: FaultSet = "FREM_CLOBBER, char_widen_sign".parse().unwrap();
    assert_eq!(s.kinds(), vec![FaultKind::FremClobber, FaultKind::CharWidenSign]);
    assert_eq!("all".parse::<FaultSet>().unwrap(), FaultSet::all());
    assert!("BOGUS".parse::<FaultSet>().is_err());
    assert_eq!(s.to_string().parse::<FaultSet>().unwrap(), s);
}
