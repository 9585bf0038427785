use holegen_core::difftest::*;
use holegen_core::genharness::driver::{CrashKind, DriverOptions, HarnessOutcome};
use holegen_core::lang::{self, Program};
use holegen_core::optvm::{FaultKind, FaultSet, OptLevel};
use proptest::prelude::*;
use std::path::PathBuf;
use std::time::Duration;

fn corpus(rel: &str) -> Program {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus").join(rel);
    lang::parse(&std::fs::read_to_string(&path).unwrap()).unwrap()
}

fn register_reuse_program() -> Program {
    let src = std::fs::read_to_string(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus/register_reuse.mj")).unwrap();
    lang::parse(&format!("{src}\nfn double _arg0() {{ return 5.0; }}\n\nharness m(_arg0) loops 10;\n")).unwrap()
}

fn result(config: &str, outcome: HarnessOutcome) -> RunResult {
    RunResult { config: config.into(), outcome, fired: vec![], millis: 0 }
}

fn faulty_matrix(f: FaultKind) -> Vec<RunConfig> {
    vec![RunConfig::interp(), RunConfig::optvm(OptLevel::L0, FaultSet::none()), RunConfig::optvm(OptLevel::L2, FaultSet::only(f))]
}

#[test]
fn compare_examples() {
    let c = HarnessOutcome::Checksum;
    assert_eq!(compare(&[result("a", c(1)), result("b", c(1))]), Verdict::Consistent);
    match compare(&[result("a", c(1)), result("b", c(2))]) {
        Verdict::Mismatch { checksums } => assert_eq!(checksums.len(), 2),
        v => panic!("{v:?}"),
    }
    let crash = HarnessOutcome::Crash(CrashKind::Limit);
    assert_eq!(
        compare(&[result("a", c(1)), result("b", crash), result("c", c(3))]),
        Verdict::CrashFailure { config: "b".into(), kind: CrashKind::Limit, mismatch: true }
    );
    assert_eq!(compare(&[result("a", crash), result("b", c(3))]), Verdict::CrashFailure { config: "a".into(), kind: CrashKind::Limit, mismatch: false });
}

#[test]
fn injected_fault_is_a_bug_with_a_fault_key() {
    let p = register_reuse_program();
    let r = test_program("register_reuse", &p, &faulty_matrix(FaultKind::FremClobber), &RunConfig::references(), 3, &RunOptions::default());
    assert!(matches!(r.verdict, Verdict::Mismatch { .. }));
    assert!(r.is_bug());
    assert_eq!(r.dedup_key.as_deref(), Some("fault-FREM_CLOBBER"));
    assert_eq!(r.pruned.as_ref().unwrap().reruns.len(), 6);
}

#[test]
fn clean_matrix_is_consistent() {
    let p = register_reuse_program();
    let r = test_program("register_reuse", &p, &RunConfig::clean_matrix(), &RunConfig::references(), 3, &RunOptions::default());
    assert_eq!(r.verdict, Verdict::Consistent);
    assert!(r.pruned.is_none() && r.dedup_key.is_none());
}

#[test]
fn nondeterminism_is_pruned() {
    let p = corpus("noise/clock_raw.mj");
    let r = test_program("noise", &p, &RunConfig::clean_matrix(), &RunConfig::references(), 3, &RunOptions::default());
    assert!(r.verdict.is_failure());
    assert_eq!(r.pruned.unwrap().classification, Classification::FalsePositive(FalsePositiveReason::NondeterministicAcrossReruns));
}

#[test]
fn reference_crash_is_pruned() {
    let p = lang::parse("fn int f(int n) {\n    return n + unfilled(1, int);\n}\n\nfn int _arg0() {\n    return 1;\n}\n\nharness f(_arg0) loops 3;\n").unwrap();
    let r = test_program("unfilled", &p, &RunConfig::clean_matrix(), &RunConfig::references(), 2, &RunOptions::default());
    assert_eq!(r.verdict, Verdict::CrashFailure { config: "interp".into(), kind: CrashKind::UnfilledHole, mismatch: false });
    assert_eq!(r.pruned.unwrap().classification, Classification::FalsePositive(FalsePositiveReason::ReproducesUnderReference));
}

#[test]
fn table_keys_group_identical_result_tables() {
    let a = vec![result("interp", HarnessOutcome::Checksum(1)), result("x", HarnessOutcome::Checksum(2))];
    let b = vec![result("interp", HarnessOutcome::Checksum(1)), result("x", HarnessOutcome::Checksum(3))];
    assert!(dedup_key(&a).starts_with("table-"));
    assert_eq!(dedup_key(&a), dedup_key(&a.clone()));
    assert_ne!(dedup_key(&a), dedup_key(&b));
    let mut c = a.clone();
    c[1].fired = vec![FaultKind::CharWidenSign, FaultKind::BceOveraggressive];
    assert_eq!(dedup_key(&c), "fault-BCE_OVERAGGRESSIVE+CHAR_WIDEN_SIGN");
}

#[test]
fn run_config_strings() {
    let c: RunConfig = "optvm:L2:FREM_CLOBBER".parse().unwrap();
    assert_eq!(c, RunConfig::optvm(OptLevel::L2, FaultSet::only(FaultKind::FremClobber)));
    assert_eq!(c.name, "optvm-L2+FREM_CLOBBER");
    assert!(!c.is_reference());
    assert_eq!("interp".parse::<RunConfig>().unwrap(), RunConfig::interp());
    assert!("optvm:L0".parse::<RunConfig>().unwrap().is_reference());
    assert!(!"optvm:L1".parse::<RunConfig>().unwrap().is_reference());
    assert!(matches!("ext:./adapter --fast".parse::<RunConfig>().unwrap().backend, Backend::External { ref cmd } if cmd == "./adapter --fast"));
    assert!("jvm".parse::<RunConfig>().is_err());
    assert!("optvm:L7".parse::<RunConfig>().is_err());
}

#[test]
fn adapter_protocol() {
    assert_eq!(parse_adapter_output(Some(0), "noise\nCHECKSUM 00000000000000ff\n"), HarnessOutcome::Checksum(0xff));
    assert_eq!(parse_adapter_output(Some(0), "nothing"), HarnessOutcome::Crash(CrashKind::EngineInternal));
    assert_eq!(parse_adapter_output(Some(10), ""), HarnessOutcome::Crash(CrashKind::UnfilledHole));
    assert_eq!(parse_adapter_output(Some(11), ""), HarnessOutcome::Crash(CrashKind::EngineInternal));
    assert_eq!(parse_adapter_output(Some(12), ""), HarnessOutcome::Crash(CrashKind::Limit));
    assert_eq!(parse_adapter_output(Some(3), ""), HarnessOutcome::Crash(CrashKind::EngineInternal));
    assert_eq!(parse_adapter_output(None, ""), HarnessOutcome::Crash(CrashKind::EngineInternal));
}

#[cfg(unix)]
#[test]
fn external_adapters_run_as_subprocesses() {
    let dir = tempfile::tempdir().unwrap();
    let script = |name: &str, body: &str| {
        let path = dir.path().join(name);
        std::fs::write(&path, body).unwrap();
        format!("sh {}", path.display())
    };
    let p = register_reuse_program();
    let opts = RunOptions { driver: DriverOptions { timeout: Duration::from_millis(500), ..DriverOptions::default() }, ..RunOptions::default() };
    let ok = script("ok.sh", "test -f \"$1\" && echo 'CHECKSUM 0000000000000abc'\n");
    assert_eq!(run_one(&p, &RunConfig::external(&ok), &opts).outcome, HarnessOutcome::Checksum(0xabc));
    let unfilled = script("unfilled.sh", "exit 10\n");
    assert_eq!(run_one(&p, &RunConfig::external(&unfilled), &opts).outcome, HarnessOutcome::Crash(CrashKind::UnfilledHole));
    let slow = script("slow.sh", "sleep 5\n");
    assert_eq!(run_one(&p, &RunConfig::external(&slow), &opts).outcome, HarnessOutcome::Crash(CrashKind::Limit));
    let missing = RunConfig::external("/nonexistent/adapter");
    assert_eq!(run_one(&p, &missing, &opts).outcome, HarnessOutcome::Crash(CrashKind::EngineInternal));
}

#[test]
fn bug_bundles_hold_program_results_and_key() {
    let p = register_reuse_program();
    let r = test_program("register_reuse_00", &p, &faulty_matrix(FaultKind::FremClobber), &RunConfig::references(), 1, &RunOptions::default());
    let dir = tempfile::tempdir().unwrap();
    write_bug_bundle(dir.path(), &r, &p, Some("{\"template\":\"t\"}")).unwrap();
    let b = dir.path().join("register_reuse_00");
    assert_eq!(lang::parse(&std::fs::read_to_string(b.join("program.mj")).unwrap()).unwrap(), p);
    assert_eq!(std::fs::read_to_string(b.join("key.txt")).unwrap(), "fault-FREM_CLOBBER\n");
    let back: ProgramReport = serde_json::from_str(&std::fs::read_to_string(b.join("results.json")).unwrap()).unwrap();
    assert_eq!(back.verdict, r.verdict);
    assert!(b.join("session.json").exists());
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn results_do_not_depend_on_matrix_order(order in Just((0..5usize).collect::<Vec<_>>()).prop_shuffle()) {
        let p = register_reuse_program();
        let mut base = RunConfig::clean_matrix();
        base.push(RunConfig::optvm(OptLevel::L2, FaultSet::all()));
        let shuffled: Vec<RunConfig> = order.iter().map(|&i| base[i].clone()).collect();
        let a = run_matrix(&p, &base, &RunOptions::default());
        let b = run_matrix(&p, &shuffled, &RunOptions::default());
        for (k, &i) in order.iter().enumerate() {
            prop_assert_eq!(&b[k].outcome, &a[i].outcome);
            prop_assert_eq!(&b[k].fired, &a[i].fired);
        }
        prop_assert_eq!(compare(&a).is_failure(), compare(&b).is_failure());
    }
}
