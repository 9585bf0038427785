use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn holegen(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_holegen")).args(args).env_remove("HOLEGEN_OUT").output().unwrap()
}

fn corpus() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/corpus")
}

fn program(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.display().to_string()
}

const REGISTER_REUSE_HARNESS: &str = "\nfn double _arg0() {\n    return 3.0;\n}\n\nharness m(_arg0) loops 50;\n";

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_prints_one_checksum_per_backend() {
    let dir = tempfile::tempdir().unwrap();
    let src = std::fs::read_to_string(corpus().join("register_reuse.mj")).unwrap() + REGISTER_REUSE_HARNESS;
    let p = program(dir.path(), "register_reuse.mj", &src);
    let interp = holegen(&["run", &p]);
    assert_eq!(interp.status.code(), Some(0));
    let line = stdout(&interp);
    assert!(line.starts_with("CHECKSUM ") && line.trim().len() == 9 + 16, "{line}");
    for level in ["L0", "L1", "L2"] {
        assert_eq!(stdout(&holegen(&["run", &p, "--backend", "optvm", "--level", level])), line);
    }
    let faulty = holegen(&["run", &p, "--backend", "optvm", "--level", "L2", "--faults", "FREM_CLOBBER"]);
    assert_eq!(faulty.status.code(), Some(0));
    assert_ne!(stdout(&faulty), line);
    assert_ne!(stdout(&holegen(&["run", &p, "--loops", "7"])), line);
}

#[test]
fn run_uses_the_crash_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let unfilled = program(dir.path(), "u.mj", "fn int f(int n) {\n    return unfilled(1, int);\n}\n\nfn int _arg0() {\n    return 1;\n}\n\nharness f(_arg0) loops 2;\n");
    assert_eq!(holegen(&["run", &unfilled]).status.code(), Some(10));
    assert_eq!(holegen(&["run", &unfilled, "--backend", "optvm"]).status.code(), Some(10));
    let spin = program(dir.path(), "s.mj", "fn int f(int n) {\n    while (n > 0) {\n        n = n + 1;\n    }\n    return n;\n}\n\nfn int _arg0() {\n    return 1;\n}\n\nharness f(_arg0) loops 2;\n");
    assert_eq!(holegen(&["run", &spin]).status.code(), Some(12));
    let bad = program(dir.path(), "b.mj", "fn int f( {");
    assert_eq!(holegen(&["run", &bad]).status.code(), Some(2));
    let no_harness = program(dir.path(), "n.mj", "fn int f() {\n    return 1;\n}\n");
    assert_eq!(holegen(&["run", &no_harness]).status.code(), Some(2));
}

#[test]
fn run_all_then_stats() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("corpus");
    std::fs::create_dir_all(&src).unwrap();
    for f in ["register_reuse.mj", "byte_widening.mj"] {
        std::fs::copy(corpus().join(f), src.join(f)).unwrap();
    }
    let out = dir.path().join("out");
    let o = Command::new(env!("CARGO_BIN_EXE_holegen"))
        .args(["run-all", "--corpus", src.to_str().unwrap(), "--seed", "3", "--faults", "FREM_CLOBBER,CHAR_WIDEN_SIGN"])
        .args(["--set", "harness_loops=20", "--set", "programs_per_template=4", "--set", "inputs_per_entry=1"])
        .env("HOLEGEN_OUT", &out)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("run-all: templates="));
    assert!(out.join("summary.txt").exists());

    let s = holegen(&["stats", "--out", out.to_str().unwrap()]);
    assert!(s.status.success());
    let text = stdout(&s);
    assert!(text.starts_with("Program"));
    assert!(text.lines().any(|l| l.starts_with("register_reuse")));
    assert!(out.join("stats/stats.tsv").exists());
}

#[test]
fn bad_settings_are_rejected() {
    let o = holegen(&["collect", "--set", "colour=blue"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown key"));
    let o = holegen(&["extract", "--hole-kinds", "bitwise"]);
    assert!(!o.status.success());
}
