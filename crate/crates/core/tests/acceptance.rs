//! End-to-end acceptance checks. Runs as a plain binary so that every
//! criterion prints one PASS/FAIL line; exits non-zero if any fails.

use holegen_core::campaign::{self, stats, CampaignConfig, Source};
use holegen_core::difftest::{self, RunConfig, RunOptions};
use holegen_core::extract::{self, ExtractionRequest, HoleKinds, InputMode, Template};
use holegen_core::genharness::driver::{run_harness, DriverOptions, HarnessOutcome, InterpEngine};
use holegen_core::genharness::generate::{run_session, GenConfig};
use holegen_core::interp::{Decisions, HoleOracle};
use holegen_core::lang::{self, HoleKind, Program};
use holegen_core::optvm::{FaultKind, FaultSet, OptLevel, VmEngine};
use holegen_core::runtime::{ArrayData, ExecLimits, Heap, Value};
use holegen_core::genharness::checksum::Checksum;
use rand::{Rng, SeedableRng};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::rc::Rc;
use std::time::{Duration, Instant};

const SEED: u64 = 20240501;

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

fn campaign_config(out: &Path) -> CampaignConfig {
    CampaignConfig {
        corpus_dir: corpus_dir(),
        output_dir: out.to_path_buf(),
        seed: SEED,
        // Compilation is eager, so a short harness exercises the same code
        // paths as the full warm-up loop.
        harness_loops: 100,
        inputs_per_entry: 3,
        programs_per_template: 12,
        jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
        ..CampaignConfig::default()
    }
}

struct Report {
    failed: usize,
}

impl Report {
    fn line(&mut self, n: usize, title: &str, ok: bool, detail: String) {
        println!("criterion {n} {}: {title}: {detail}", if ok { "PASS" } else { "FAIL" });
        self.failed += !ok as usize;
    }
}

// Straight-line FNV-1a 64 over the tagged encoding.
mod oracle {
    pub struct Fnv(pub u64);

    impl Fnv {
        pub fn new() -> Self {
            Fnv(0xcbf29ce484222325)
        }
        fn b(&mut self, x: u8) {
            self.0 = (self.0 ^ x as u64).wrapping_mul(0x100000001b3);
        }
        fn all(&mut self, xs: &[u8]) {
            xs.iter().for_each(|&x| self.b(x));
        }
        pub fn int(&mut self, v: i32) {
            self.b(1);
            self.all(&v.to_be_bytes());
        }
        pub fn double(&mut self, v: f64) {
            self.b(2);
            let bits = if v.is_nan() { 0x7ff8000000000000u64 } else { v.to_bits() };
            self.all(&bits.to_be_bytes());
        }
        pub fn bool(&mut self, v: bool) {
            self.b(3);
            self.b(v as u8);
        }
        pub fn char(&mut self, v: u16) {
            self.b(4);
            self.all(&v.to_be_bytes());
        }
        pub fn int_array(&mut self, xs: &[i32]) {
            self.b(5);
            self.all(&(xs.len() as u32).to_be_bytes());
            xs.iter().for_each(|&x| self.int(x));
        }
        pub fn null(&mut self) {
            self.b(7);
        }
        pub fn unit(&mut self) {
            self.b(8);
        }
        pub fn trap(&mut self, name: &str) {
            self.b(9);
            self.all(&(name.len() as u32).to_be_bytes());
            self.all(name.as_bytes());
        }
    }
}

fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let Ok(rd) = std::fs::read_dir(&d) else { continue };
        for e in rd.flatten() {
            let p = e.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_1_and_5(r: &mut Report) {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let sa = campaign::cmd_run_all(&campaign_config(a.path()));
    let elapsed = start.elapsed();
    let sources = campaign::load_sources(&corpus_dir()).map(|s| s.len()).unwrap_or(0);
    match sa {
        Ok(s) => {
            let results = std::fs::read_to_string(a.path().join("test/results.jsonl")).unwrap_or_default();
            let reports: Vec<difftest::ProgramReport> = results.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
            let mismatch = reports.iter().filter(|r| matches!(r.verdict, difftest::Verdict::Mismatch { .. })).count();
            let crash = reports.iter().filter(|r| matches!(r.verdict, difftest::Verdict::CrashFailure { .. })).count();
            let ok = sources >= 10 && s.programs >= 1000 && reports.len() == s.programs && mismatch == 0 && crash == 0 && elapsed < Duration::from_secs(15 * 60);
            r.line(
                1,
                "differential soundness",
                ok,
                format!("sources={sources} programs={} mismatch={mismatch} crash_failure={crash} elapsed={:.1}s", s.programs, elapsed.as_secs_f64()),
            );
        }
        Err(e) => r.line(1, "differential soundness", false, format!("campaign failed: {e}")),
    }

    let sb = campaign::cmd_run_all(&campaign_config(b.path()));
    let (ta, tb) = (tree(a.path()), tree(b.path()));
    let compared = ["generate", "test", "prune", "bugs", "extract", "collect"];
    let mut diffs = Vec::new();
    for (k, v) in &ta {
        if k == Path::new("summary.txt") {
            continue;
        }
        if tb.get(k) != Some(v) {
            diffs.push(k.display().to_string());
        }
    }
    for k in tb.keys() {
        if !ta.contains_key(k) {
            diffs.push(k.display().to_string());
        }
    }
    let has_all = ta.contains_key(Path::new("generate/sessions.jsonl")) && ta.contains_key(Path::new("prune/verdicts.jsonl"));
    let generated = ta.keys().filter(|k| k.starts_with("generate") && k.extension().is_some_and(|e| e == "mj")).count();
    r.line(
        5,
        "determinism",
        sb.is_ok() && has_all && diffs.is_empty() && generated > 0,
        format!("files={} generated_programs={generated} dirs={compared:?} differing={diffs:?}", ta.len()),
    );
}

fn regression_templates(fault: FaultKind) -> Vec<Template> {
    let dir = corpus_dir().join("regressions");
    let prefix = fault.name().to_ascii_lowercase();
    campaign::files_with_ext(&dir, "mjt")
        .unwrap()
        .into_iter()
        .filter(|f| f.file_stem().unwrap().to_string_lossy().starts_with(&prefix))
        .map(|f| {
            let name = f.file_stem().unwrap().to_string_lossy().into_owned();
            Template::from_program(&name, lang::parse(&std::fs::read_to_string(&f).unwrap()).unwrap())
        })
        .collect()
}

fn register_reuse_check() -> (bool, String) {
    let src = std::fs::read_to_string(corpus_dir().join("register_reuse.mj")).unwrap();
    let text = format!("{src}\nfn double _arg0() {{ return 3.0; }}\n\nharness m(_arg0) loops 100000;\n");
    let p = lang::parse(&text).unwrap();
    let opts = DriverOptions::default();
    let limits = ExecLimits::default();
    let expect = |v: f64| {
        let mut h = oracle::Fnv::new();
        h.double(3.0);
        (0..100_000).for_each(|_| h.double(v));
        HarnessOutcome::Checksum(h.0)
    };
    let interp = run_harness(&mut InterpEngine::new(&p, limits), &p, &opts);
    let l0 = run_harness(&mut VmEngine::new(&p, OptLevel::L0, FaultSet::none(), limits).unwrap(), &p, &opts);
    let faulty = run_harness(&mut VmEngine::new(&p, OptLevel::L2, FaultSet::only(FaultKind::FremClobber), limits).unwrap(), &p, &opts);
    let ok = interp == expect(1.0) && l0 == expect(1.0) && faulty == expect(0.0);
    (ok, format!("register_reuse reference={} faulty={}", difftest::outcome_text(interp), difftest::outcome_text(faulty)))
}

fn criterion_2(r: &mut Report) {
    let mut ok = true;
    let mut details = Vec::new();
    let opts = RunOptions::default();
    for fault in FaultKind::ALL {
        let mut matrix = RunConfig::clean_matrix();
        matrix.retain(|c| c.level != OptLevel::L2 || c.backend != difftest::Backend::OptVm);
        matrix.push(RunConfig::optvm(OptLevel::L2, FaultSet::only(fault)));
        let templates = regression_templates(fault);
        ok &= templates.len() == 2;
        for t in &templates {
            let cfg = GenConfig { programs_per_template: 200, harness_loops: 100, seed: SEED, ..GenConfig::default() };
            let deadline = Instant::now() + cfg.template_timeout;
            let mut tried = 0;
            let mut found = None;
            for i in 0..200 {
                let (_, prog) = run_session(t, &cfg, i, deadline);
                let Some(g) = prog else { continue };
                tried += 1;
                let rep = difftest::test_program(&g.name, &g.program, &matrix, &RunConfig::references(), difftest::DEFAULT_RERUNS, &opts);
                if rep.is_bug() && rep.dedup_key.as_deref() == Some(&format!("fault-{}", fault.name())) {
                    found = Some(i);
                    break;
                }
            }
            ok &= found.is_some();
            details.push(format!("{}:{}", t.meta.name, found.map_or(format!("none in {tried}"), |i| format!("bug@{}", i + 1))));
        }
    }
    let (reuse_ok, reuse) = register_reuse_check();
    details.push(reuse);
    r.line(2, "fault recall", ok && reuse_ok, details.join(" "));
}

fn criterion_3(r: &mut Report) {
    let dir = corpus_dir().join("noise");
    let files = campaign::files_with_ext(&dir, "mj").unwrap();
    let opts = RunOptions::default();
    let (mut raw, mut bugs) = (0, 0);
    for f in &files {
        let p = lang::parse(&std::fs::read_to_string(f).unwrap()).unwrap();
        let name = f.file_stem().unwrap().to_string_lossy();
        let rep = difftest::test_program(&name, &p, &RunConfig::clean_matrix(), &RunConfig::references(), difftest::DEFAULT_RERUNS, &opts);
        raw += rep.verdict.is_failure() as usize;
        bugs += rep.is_bug() as usize;
    }
    r.line(3, "pruning precision", files.len() >= 20 && raw >= 20 && bugs == 0, format!("programs={} raw_failures={raw} bugs={bugs}", files.len()));
}

fn run_replay(p: &Program, oracle: HoleOracle) -> HarnessOutcome {
    let opts = DriverOptions { loops_override: Some(5), ..DriverOptions::default() };
    run_harness(&mut InterpEngine::with_oracle(p, oracle, ExecLimits::default()), p, &opts)
}

fn criterion_4(r: &mut Report) {
    let cfg = CampaignConfig { corpus_dir: corpus_dir(), seed: SEED, inputs_per_entry: 3, ..CampaignConfig::default() };
    let sources = campaign::load_sources(&cfg.corpus_dir).unwrap();
    let (mut total, mut same) = (0, 0);
    let mut bad = Vec::new();
    for src in &sources {
        let col = campaign::collect_one(src, &cfg);
        let (templates, _) = campaign::extract_one(src, &col, &cfg);
        let inputs = holegen_core::corpus::to_entries(&col.sequences);
        for t in templates {
            total += 1;
            let k: usize = t.meta.name.rsplit("__t").next().unwrap().parse().unwrap();
            let input = inputs.iter().filter(|i| i.entry == t.meta.entry).nth(k).unwrap();
            let req = ExtractionRequest { program: &src.program, entry: t.meta.entry.clone(), mode: InputMode::TestBased(input), kinds: HoleKinds::None, limiter_bound: cfg.limiter_bound };
            let original = extract::extract(&req, "original").unwrap();
            let mut decisions = Decisions::new();
            let mut complete = true;
            for (id, spec) in t.program.holes() {
                match &spec.source {
                    Some(e) => {
                        decisions.insert(id, Rc::new((**e).clone()));
                    }
                    None => complete = false,
                }
            }
            let want = run_replay(&original.program, HoleOracle::Trapping);
            let got = run_replay(&t.program, HoleOracle::Replay(decisions));
            if complete && want == got {
                same += 1;
            } else {
                bad.push(t.meta.name.clone());
            }
        }
    }
    r.line(4, "original membership", total > 0 && same == total, format!("templates={total} reproduced={same} differing={bad:?}"));
}

fn criterion_6(r: &mut Report) {
    let p = lang::parse(&std::fs::read_to_string(corpus_dir().join("strbuilder.mj")).unwrap()).unwrap();
    let input = holegen_core::corpus::EntryInput {
        entry: "StrBuilder.trim".into(),
        setup: vec![],
        args: vec![holegen_core::corpus::Arg::Lit(lang::Lit::Null)],
    };
    let req = ExtractionRequest { program: &p, entry: "StrBuilder.trim".into(), mode: InputMode::TestBased(&input), kinds: HoleKinds::All, limiter_bound: extract::DEFAULT_LIMITER_BOUND };
    let t = extract::extract(&req, "strbuilder").unwrap();
    let kinds: Vec<HoleKind> = t.program.holes().iter().map(|(_, s)| s.kind).collect();
    use HoleKind::*;
    let rel_ok = t.program.holes().iter().any(|(_, s)| {
        s.kind == Relation
            && matches!(s.operands.as_slice(), [lang::Operand::Hole(a), lang::Operand::Hole(b)] if a.kind == Id && b.kind == Val)
    });
    let text = t.text();
    let lim = regex::Regex::new(r"_lim1\+\+ < 1000").unwrap().is_match(&text);
    let ok = kinds == [Id, Id, Relation, Id, Id, Val, Logic, Logic] && rel_ok && lim && t.meta.limiter_bound == 1000;
    r.line(6, "extraction fidelity", ok, format!("kinds={kinds:?} relation_id_val={rel_ok} limiter_1000={lim}"));
}

fn criterion_7(r: &mut Report) {
    let cfg = CampaignConfig { corpus_dir: corpus_dir(), seed: SEED, ..CampaignConfig::default() };
    let sources: Vec<Source> = campaign::load_sources(&cfg.corpus_dir).unwrap();
    let collected: Vec<_> = sources.iter().map(|s| campaign::collect_one(s, &cfg)).collect();
    let root = tempfile::tempdir().unwrap();
    use HoleKind::*;
    let modes: [(HoleKinds, &[HoleKind]); 5] = [
        (HoleKinds::Id, &[Id]),
        (HoleKinds::Val, &[Val]),
        (HoleKinds::ArithShift, &[Arith, Shift]),
        (HoleKinds::RelLogic, &[Relation, Logic]),
        (HoleKinds::All, &[Id, Val, ArrayAcc, Arith, Shift, Relation, Logic, Cast]),
    ];
    let re = regex::Regex::new(r"\?H\d+\{kind=(\w+)").unwrap();
    let mut ok = true;
    let mut details = Vec::new();
    for (mode, allowed) in modes {
        let dir = root.path().join(mode.name());
        let mcfg = CampaignConfig { hole_kinds: mode, ..cfg.clone() };
        for (s, c) in sources.iter().zip(&collected) {
            for t in campaign::extract_one(s, c, &mcfg).0 {
                campaign::write_template(&dir, &t).unwrap();
            }
        }
        let table = stats::table(&dir).unwrap();
        let emitted: usize = table.total.holes.iter().sum();
        let foreign: usize = stats::KINDS.iter().filter(|k| !allowed.contains(k)).map(|k| table.total.count(*k)).sum();
        ok &= emitted > 0 && foreign == 0;
        details.push(format!("{}:{emitted}/foreign={foreign}", mode.name()));
        if mode == HoleKinds::All {
            let mut scan: BTreeMap<String, usize> = BTreeMap::new();
            for f in campaign::files_with_ext(&dir, "mjt").unwrap() {
                for cap in re.captures_iter(&std::fs::read_to_string(&f).unwrap()) {
                    *scan.entry(cap[1].to_string()).or_default() += 1;
                }
            }
            let mismatched: Vec<_> = stats::KINDS
                .iter()
                .filter(|k| scan.get(k.name()).copied().unwrap_or(0) != table.total.count(**k))
                .map(|k| k.name())
                .collect();
            ok &= mismatched.is_empty();
            details.push(format!("scan={scan:?} mismatched={mismatched:?}"));
        }
    }
    r.line(7, "hole-kind campaigns", ok, details.join(" "));
}

fn criterion_8(r: &mut Report) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(SEED);
    let mut equal = 0;
    for _ in 0..50 {
        let mut heap = Heap::default();
        let mut cs = Checksum::new();
        let mut o = oracle::Fnv::new();
        for _ in 0..rng.gen_range(1..40) {
            match rng.gen_range(0..8) {
                0 => {
                    let v: i32 = rng.gen();
                    cs.update(Value::Int(v), &heap);
                    o.int(v);
                }
                1 => {
                    let v = match rng.gen_range(0..4) {
                        0 => f64::NAN,
                        1 => -0.0,
                        2 => f64::INFINITY,
                        _ => rng.gen_range(-1e9..1e9),
                    };
                    cs.update(Value::Double(v), &heap);
                    o.double(v);
                }
                2 => {
                    let v: bool = rng.gen();
                    cs.update(Value::Bool(v), &heap);
                    o.bool(v);
                }
                3 => {
                    let v: u16 = rng.gen();
                    cs.update(Value::Char(v), &heap);
                    o.char(v);
                }
                4 => {
                    cs.update(Value::Null, &heap);
                    o.null();
                }
                5 => {
                    cs.update(Value::Unit, &heap);
                    o.unit();
                }
                6 => {
                    let name = ["DivByZero", "IndexOutOfBounds", "NullDeref"][rng.gen_range(0..3)];
                    cs.update_name(name);
                    o.trap(name);
                }
                _ => {
                    let xs: Vec<i32> = (0..rng.gen_range(0..6)).map(|_| rng.gen()).collect();
                    let v = heap.new_array_from(ArrayData::Int(xs.clone()), u64::MAX).unwrap();
                    cs.update(v, &heap);
                    o.int_array(&xs);
                }
            }
        }
        equal += (cs.value() == o.0) as usize;
    }
    r.line(8, "checksum oracle", equal == 50, format!("streams=50 equal={equal}"));
}

fn main() {
    let mut r = Report { failed: 0 };
    criterion_1_and_5(&mut r);
    criterion_2(&mut r);
    criterion_3(&mut r);
    criterion_4(&mut r);
    criterion_6(&mut r);
    criterion_7(&mut r);
    criterion_8(&mut r);
    if r.failed > 0 {
        println!("acceptance: {} criteria failed", r.failed);
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
