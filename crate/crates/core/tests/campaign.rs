use holegen_core::campaign::config::{ConfigError, InputKind};
use holegen_core::campaign::{self, stats, CampaignConfig};
use holegen_core::difftest::RunConfig;
use holegen_core::extract::HoleKinds;
use holegen_core::lang::HoleKind;
use holegen_core::optvm::{FaultKind, FaultSet, OptLevel};
use std::path::{Path, PathBuf};

fn corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

#[test]
fn config_defaults() {
    let c = CampaignConfig::default();
    assert_eq!(c.mode, InputKind::Test);
    assert_eq!(c.hole_kinds, HoleKinds::All);
    assert_eq!(c.limiter_bound, 1000);
    assert_eq!(c.max_fill_iterations, 100);
    assert_eq!(c.template_timeout_secs, 180);
    assert_eq!(c.harness_loops, 100_000);
    assert_eq!(c.test_timeout_secs, 60);
    assert_eq!(c.reruns, 3);
    assert_eq!(c.matrix.len(), 4);
    assert!(c.refs.iter().all(RunConfig::is_reference));
    assert!(c.validate().is_ok());
}

#[test]
fn config_file_parsing() {
    let text = "# campaign\nmode = pool\nhole-kinds = rel-logic\nseed = 42   # trailing\n\nmatrix = interp; optvm:L0; optvm:L2:FREM_CLOBBER\nharness_loops = 500\n";
    let c = CampaignConfig::parse(text).unwrap();
    assert_eq!(c.mode, InputKind::Pool);
    assert_eq!(c.hole_kinds, HoleKinds::RelLogic);
    assert_eq!(c.seed, 42);
    assert_eq!(c.harness_loops, 500);
    assert_eq!(c.matrix[2], RunConfig::optvm(OptLevel::L2, FaultSet::only(FaultKind::FremClobber)));

    assert!(matches!(CampaignConfig::parse("colour = blue"), Err(ConfigError::UnknownKey { line: 1, .. })));
    assert!(matches!(CampaignConfig::parse("\nseed"), Err(ConfigError::Syntax { line: 2, .. })));
    assert!(matches!(CampaignConfig::parse("seed = x"), Err(ConfigError::Syntax { .. })));
    assert!(CampaignConfig::parse("jobs = 0").unwrap().validate().is_err());
    assert!(CampaignConfig::parse("matrix = interp").unwrap().validate().is_err());
    assert!(CampaignConfig::parse("refs = optvm:L2").unwrap().validate().is_err());
}

fn write(dir: &Path, name: &str, text: &str) {
    std::fs::create_dir_all(dir).unwrap();
    std::fs::write(dir.join(name), text).unwrap();
}

#[test]
fn stats_count_holes_and_limiters_per_source() {
    let dir = tempfile::tempdir().unwrap();
    let v = "ops={}; operands=[]";
    let a = format!(
        "fn int f(int x) {{\n    int _lim1 = 0;\n    while (?H1{{kind=Relation; type=bool; ops={{<, >}}; operands=[{{kind=Id; type=int; {v}}}, {{kind=Val; type=int; {v}}}]}} && _lim1++ < 1000) {{\n        x = ?H2{{kind=Val; type=int; {v}}};\n    }}\n    return x;\n}}\n"
    );
    let b = format!("fn int g(int y) {{\n    return ?H1{{kind=Id; type=int; {v}}};\n}}\n");
    write(dir.path(), "prog__f__t0.mjt", &a);
    write(dir.path(), "prog__g__t0.mjt", &b);
    write(dir.path(), "other__g__t0.mjt", &b);
    let t = stats::table(dir.path()).unwrap();
    assert_eq!(t.rows.iter().map(|r| r.name.as_str()).collect::<Vec<_>>(), ["other", "prog"]);
    let prog = &t.rows[1];
    assert_eq!((prog.count(HoleKind::Relation), prog.count(HoleKind::Val), prog.count(HoleKind::Id)), (1, 1, 1));
    assert_eq!(prog.limiters, 1);
    assert_eq!(prog.total(), 4);
    assert_eq!(t.total.total(), 5);
    let tsv = t.tsv();
    assert_eq!(tsv.lines().next().unwrap(), "Program\tId\tVal\tArrayAcc\tArith\tShift\tRelation\tLogic\tCast\tLimiters\tTotal");
    assert_eq!(tsv.lines().last().unwrap(), "Total\t2\t1\t0\t0\t0\t1\t0\t0\t1\t5");
    assert_eq!(t.text().lines().count(), 4);

    let empty = tempfile::tempdir().unwrap();
    assert_eq!(stats::table(&empty.path().join("missing")).unwrap().total.total(), 0);
}

#[test]
fn stats_rows_sum_to_total() {
    let out = tempfile::tempdir().unwrap();
    let cfg = CampaignConfig { corpus_dir: corpus_dir(), output_dir: out.path().into(), inputs_per_entry: 1, ..CampaignConfig::default() };
    campaign::cmd_collect(&cfg).unwrap();
    let ex = campaign::cmd_extract(&cfg).unwrap();
    let t = stats::table(&out.path().join("extract")).unwrap();
    for (i, k) in stats::KINDS.iter().enumerate() {
        assert_eq!(t.rows.iter().map(|r| r.holes[i]).sum::<usize>(), t.total.holes[i], "{k:?}");
        let meta: usize = ex.templates.iter().map(|tm| tm.meta.holes[k.name()]).sum();
        assert_eq!(meta, t.total.holes[i], "{k:?}");
    }
    let limiters: usize = ex.templates.iter().map(|tm| tm.meta.limiters.len()).sum();
    assert_eq!(limiters, t.total.limiters);
}

#[test]
fn phases_write_their_outputs() {
    let out = tempfile::tempdir().unwrap();
    let corpus = out.path().join("corpus");
    for f in ["register_reuse.mj", "range_check.mj", "quaternion.mj"] {
        std::fs::create_dir_all(&corpus).unwrap();
        std::fs::copy(corpus_dir().join(f), corpus.join(f)).unwrap();
    }
    let mut cfg = CampaignConfig {
        corpus_dir: corpus,
        output_dir: out.path().join("run"),
        inputs_per_entry: 1,
        programs_per_template: 2,
        harness_loops: 20,
        ..CampaignConfig::default()
    };
    cfg.matrix = vec![RunConfig::interp(), RunConfig::optvm(OptLevel::L0, FaultSet::none()), RunConfig::optvm(OptLevel::L2, FaultSet::all())];
    let s = campaign::cmd_run_all(&cfg).unwrap();
    let run = &cfg.output_dir;
    for p in ["collect/quaternion/sequences.jsonl", "collect/quaternion/pool.jsonl", "generate/sessions.jsonl", "test/results.jsonl", "prune/verdicts.jsonl", "bugs/index.tsv", "summary.txt"] {
        assert!(run.join(p).exists(), "{p}");
    }
    assert!(campaign::files_with_ext(&run.join("extract"), "mjt").unwrap().len() == s.templates);
    let generated = campaign::load_generated(&run.join("generate")).unwrap();
    assert_eq!(generated.len(), s.programs);
    assert!(s.prune.bugs > 0, "{}", s.line());
    let index = std::fs::read_to_string(run.join("bugs/index.tsv")).unwrap();
    assert_eq!(index.lines().skip(1).filter(|l| !l.is_empty()).count(), s.prune.bugs);
    assert!(index.contains("fault-"));
    assert!(std::fs::read_to_string(run.join("summary.txt")).unwrap().starts_with(&s.line()));
}

#[test]
fn missing_corpus_names_the_phase() {
    let cfg = CampaignConfig { corpus_dir: PathBuf::from("/nonexistent/corpus"), ..CampaignConfig::default() };
    let e = campaign::cmd_collect(&cfg).unwrap_err();
    assert!(e.to_string().contains("collect"), "{e}");
}
