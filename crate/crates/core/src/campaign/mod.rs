//! End-to-end campaign: collection, extraction, generation, testing and
//! pruning over a corpus directory, with all artifacts written to disk.

pub mod config;
pub mod stats;

pub use config::{CampaignConfig, InputKind};

use crate::corpus::{self, CallSequence, EntryInput, ObjectPool};
use crate::difftest::{self, Classification, ProgramReport, RunOptions};
use crate::extract::{self, ExtractionRequest, InputMode, Template, TemplateMeta};
use crate::genharness::driver::DriverOptions;
use crate::genharness::generate::{self, GenConfig, GenOutput, GenSession};
use crate::lang::{self, print_program, Program};
use crate::seed;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("[{phase}] {path}: {source}")]
    Io { phase: &'static str, path: PathBuf, source: std::io::Error },
    #[error("[{phase}] {path}: {source}")]
    Lang { phase: &'static str, path: PathBuf, source: lang::LangError },
    #[error("[{phase}] {message}")]
    Other { phase: &'static str, message: String },
}

type Result<T> = std::result::Result<T, CampaignError>;

fn io<T>(phase: &'static str, path: &Path, r: std::io::Result<T>) -> Result<T> {
    r.map_err(|source| CampaignError::Io { phase, path: path.to_path_buf(), source })
}

fn write_file(phase: &'static str, path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(d) = path.parent() {
        io(phase, d, fs::create_dir_all(d))?;
    }
    io(phase, path, fs::write(path, contents))
}

fn write_jsonl<T: serde::Serialize>(phase: &'static str, path: &Path, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    for it in items {
        serde_json::to_writer(&mut buf, it).expect("serializable");
        buf.push(b'\n');
    }
    write_file(phase, path, &buf)
}

fn read_jsonl<T: serde::de::DeserializeOwned>(phase: &'static str, path: &Path) -> Result<Vec<T>> {
    let text = io(phase, path, fs::read_to_string(path))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| CampaignError::Other { phase, message: format!("{}: {e}", path.display()) }))
        .collect()
}

/// Files in `dir` with extension `ext`, sorted by name.
pub fn files_with_ext(dir: &Path, ext: &str) -> std::io::Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir)? {
        let p = e?.path();
        if p.is_file() && p.extension().is_some_and(|x| x == ext) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build().expect("thread pool")
}

#[derive(Clone, Debug)]
pub struct Source {
    pub name: String,
    pub program: Program,
}

/// Parses every `.mj` file directly inside `dir`.
pub fn load_sources(dir: &Path) -> Result<Vec<Source>> {
    let files = io("collect", dir, files_with_ext(dir, "mj"))?;
    files
        .iter()
        .map(|f| {
            let text = io("collect", f, fs::read_to_string(f))?;
            let program = lang::parse(&text).map_err(|source| CampaignError::Lang { phase: "collect", path: f.clone(), source })?;
            Ok(Source { name: stem(f), program })
        })
        .collect()
}

/// Functions usable as extraction entries.
pub fn entries(p: &Program) -> Vec<String> {
    p.functions.iter().filter(|f| !f.is_constructor() && !f.name.starts_with('_')).map(|f| f.qualified_name()).collect()
}

#[derive(Clone, Debug)]
pub struct Collected {
    pub name: String,
    pub sequences: Vec<CallSequence>,
    pub pool: ObjectPool,
}

pub fn collect_one(src: &Source, cfg: &CampaignConfig) -> Collected {
    let sequences = corpus::generate_sequences(&src.program, cfg.collect_budget, seed::split(cfg.seed, &[seed::label(&src.name)]));
    let pool = corpus::build_pool(&sequences);
    Collected { name: src.name.clone(), sequences, pool }
}

pub fn cmd_collect(cfg: &CampaignConfig) -> Result<Vec<Collected>> {
    let sources = load_sources(&cfg.corpus_dir)?;
    let out: Vec<Collected> = pool(cfg.jobs).install(|| sources.par_iter().map(|s| collect_one(s, cfg)).collect());
    let dir = cfg.output_dir.join("collect");
    for c in &out {
        let mut seqs = Vec::new();
        corpus::write_sequences(&c.sequences, &mut seqs).expect("in-memory write");
        write_file("collect", &dir.join(&c.name).join("sequences.jsonl"), &seqs)?;
        let mut pl = Vec::new();
        c.pool.write_jsonl(&mut pl).expect("in-memory write");
        write_file("collect", &dir.join(&c.name).join("pool.jsonl"), &pl)?;
    }
    Ok(out)
}

fn read_collected(cfg: &CampaignConfig, name: &str) -> Result<Collected> {
    let dir = cfg.output_dir.join("collect").join(name);
    let sp = dir.join("sequences.jsonl");
    let f = io("extract", &sp, fs::File::open(&sp))?;
    let sequences = io("extract", &sp, corpus::read_sequences(BufReader::new(f)))?;
    let pp = dir.join("pool.jsonl");
    let f = io("extract", &pp, fs::File::open(&pp))?;
    let pool = io("extract", &pp, ObjectPool::read_jsonl(BufReader::new(f)))?;
    Ok(Collected { name: name.to_string(), sequences, pool })
}

fn sanitize(entry: &str) -> String {
    entry.replace('.', "_")
}

/// Templates for one source program. Entries whose extraction fails are
/// reported and skipped.
pub fn extract_one(src: &Source, col: &Collected, cfg: &CampaignConfig) -> (Vec<Template>, Vec<String>) {
    let mut out = Vec::new();
    let mut errors = Vec::new();
    let mut by_entry: BTreeMap<String, Vec<EntryInput>> = BTreeMap::new();
    for e in corpus::to_entries(&col.sequences) {
        by_entry.entry(e.entry.clone()).or_default().push(e);
    }
    for entry in entries(&src.program) {
        let mut push = |name: String, mode: InputMode| {
            let req = ExtractionRequest { program: &src.program, entry: entry.clone(), mode, kinds: cfg.hole_kinds, limiter_bound: cfg.limiter_bound };
            match extract::extract(&req, &name) {
                Ok(t) => out.push(t),
                Err(e) => errors.push(format!("{name}: {e}")),
            }
        };
        match cfg.mode {
            InputKind::Test => {
                let inputs = by_entry.get(&entry).map_or(&[][..], Vec::as_slice);
                for (k, input) in inputs.iter().take(cfg.inputs_per_entry).enumerate() {
                    push(format!("{}__{}__t{k}", src.name, sanitize(&entry)), InputMode::TestBased(input));
                }
            }
            InputKind::Pool => {
                let s = seed::split(cfg.seed, &[seed::label(&src.name)]);
                push(format!("{}__{}__p", src.name, sanitize(&entry)), InputMode::PoolBased { pool: &col.pool, seed: s });
            }
        }
    }
    (out, errors)
}

pub fn write_template(dir: &Path, t: &Template) -> Result<()> {
    write_file("extract", &dir.join(format!("{}.mjt", t.meta.name)), t.text().as_bytes())?;
    let meta = serde_json::to_string(&t.meta).expect("serializable") + "\n";
    write_file("extract", &dir.join(format!("{}.json", t.meta.name)), meta.as_bytes())
}

pub fn load_templates(dir: &Path) -> Result<Vec<Template>> {
    let files = io("generate", dir, files_with_ext(dir, "mjt"))?;
    files
        .iter()
        .map(|f| {
            let text = io("generate", f, fs::read_to_string(f))?;
            let mp = f.with_extension("json");
            let meta: TemplateMeta = serde_json::from_str(&io("generate", &mp, fs::read_to_string(&mp))?)
                .map_err(|e| CampaignError::Other { phase: "generate", message: format!("{}: {e}", mp.display()) })?;
            Template::from_parts(&text, meta).map_err(|source| CampaignError::Lang { phase: "generate", path: f.clone(), source })
        })
        .collect()
}

pub struct ExtractSummary {
    pub templates: Vec<Template>,
    pub errors: Vec<String>,
}

pub fn cmd_extract(cfg: &CampaignConfig) -> Result<ExtractSummary> {
    let sources = load_sources(&cfg.corpus_dir)?;
    let collected = sources.iter().map(|s| read_collected(cfg, &s.name)).collect::<Result<Vec<_>>>()?;
    let per: Vec<(Vec<Template>, Vec<String>)> =
        pool(cfg.jobs).install(|| sources.par_iter().zip(&collected).map(|(s, c)| extract_one(s, c, cfg)).collect());
    let dir = cfg.output_dir.join("extract");
    if dir.exists() {
        io("extract", &dir, fs::remove_dir_all(&dir))?;
    }
    let mut templates = Vec::new();
    let mut errors = Vec::new();
    for (ts, es) in per {
        templates.extend(ts);
        errors.extend(es);
    }
    for t in &templates {
        write_template(&dir, t)?;
    }
    write_file("extract", &dir.join("errors.txt"), errors.iter().map(|e| format!("{e}\n")).collect::<String>().as_bytes())?;
    Ok(ExtractSummary { templates, errors })
}

pub fn gen_config(cfg: &CampaignConfig) -> GenConfig {
    GenConfig {
        programs_per_template: cfg.programs_per_template,
        max_fill_iterations: cfg.max_fill_iterations,
        template_timeout: Duration::from_secs(cfg.template_timeout_secs),
        harness_loops: cfg.harness_loops,
        seed: cfg.seed,
        ..GenConfig::default()
    }
}

pub struct GenerateSummary {
    pub outputs: Vec<GenOutput>,
}

impl GenerateSummary {
    pub fn program_count(&self) -> usize {
        self.outputs.iter().map(|o| o.programs.len()).sum()
    }

    pub fn sessions(&self) -> impl Iterator<Item = &GenSession> {
        self.outputs.iter().flat_map(|o| o.sessions.iter())
    }
}

pub fn cmd_generate(cfg: &CampaignConfig) -> Result<GenerateSummary> {
    let templates = load_templates(&cfg.output_dir.join("extract"))?;
    let gc = gen_config(cfg);
    let outputs: Vec<GenOutput> = pool(cfg.jobs).install(|| templates.par_iter().map(|t| generate::generate(t, &gc)).collect());
    let dir = cfg.output_dir.join("generate");
    if dir.exists() {
        io("generate", &dir, fs::remove_dir_all(&dir))?;
    }
    let mut sessions = Vec::new();
    for (t, o) in templates.iter().zip(&outputs) {
        for p in &o.programs {
            write_file("generate", &dir.join(&t.meta.name).join(format!("{}.mj", p.name)), print_program(&p.program).as_bytes())?;
        }
        sessions.extend(o.sessions.iter().cloned());
    }
    write_jsonl("generate", &dir.join("sessions.jsonl"), &sessions)?;
    Ok(GenerateSummary { outputs })
}

/// Generated programs in name order.
pub fn load_generated(dir: &Path) -> Result<Vec<(String, Program)>> {
    let mut out = Vec::new();
    if !dir.exists() {
        return Ok(out);
    }
    let mut subdirs: Vec<PathBuf> = io("test", dir, fs::read_dir(dir))?.filter_map(|e| e.ok().map(|e| e.path())).filter(|p| p.is_dir()).collect();
    subdirs.sort();
    for d in subdirs {
        for f in io("test", &d, files_with_ext(&d, "mj"))? {
            let text = io("test", &f, fs::read_to_string(&f))?;
            let p = lang::parse(&text).map_err(|source| CampaignError::Lang { phase: "test", path: f.clone(), source })?;
            out.push((stem(&f), p));
        }
    }
    Ok(out)
}

pub fn run_options(cfg: &CampaignConfig) -> RunOptions {
    let timeout = Duration::from_secs(cfg.test_timeout_secs);
    RunOptions {
        driver: DriverOptions { timeout, ..DriverOptions::default() },
        limits: crate::runtime::ExecLimits { wall_timeout: timeout, ..Default::default() },
    }
}

/// Runs the matrix over programs and compares; no pruning.
pub fn test_programs(programs: &[(String, Program)], cfg: &CampaignConfig) -> Vec<ProgramReport> {
    let opts = run_options(cfg);
    pool(cfg.jobs).install(|| {
        programs
            .par_iter()
            .map(|(name, p)| {
                let results = difftest::run_matrix(p, &cfg.matrix, &opts);
                let verdict = difftest::compare(&results);
                ProgramReport { program: name.clone(), results, verdict, pruned: None, dedup_key: None }
            })
            .collect()
    })
}

/// Prunes the failing reports in place.
pub fn prune_reports(reports: &mut [ProgramReport], programs: &BTreeMap<String, Program>, cfg: &CampaignConfig) {
    let opts = run_options(cfg);
    pool(cfg.jobs).install(|| {
        reports.par_iter_mut().filter(|r| r.verdict.is_failure()).for_each(|r| {
            let p = &programs[&r.program];
            let pr = difftest::prune(p, &r.verdict, &cfg.refs, cfg.reruns, &opts);
            if pr.classification == Classification::Bug {
                r.dedup_key = Some(difftest::dedup_key(&r.results));
            }
            r.pruned = Some(pr);
        })
    });
}

pub fn cmd_test(cfg: &CampaignConfig) -> Result<Vec<ProgramReport>> {
    let programs = load_generated(&cfg.output_dir.join("generate"))?;
    let reports = test_programs(&programs, cfg);
    write_jsonl("test", &cfg.output_dir.join("test").join("results.jsonl"), &reports)?;
    Ok(reports)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PruneSummary {
    pub programs: usize,
    pub failures: usize,
    pub bugs: usize,
    pub false_positives: usize,
    pub bug_keys: BTreeMap<String, usize>,
}

pub fn summarize(reports: &[ProgramReport]) -> PruneSummary {
    let mut s = PruneSummary { programs: reports.len(), ..Default::default() };
    for r in reports {
        if r.verdict.is_failure() {
            s.failures += 1;
        }
        match &r.pruned {
            Some(p) if p.classification == Classification::Bug => {
                s.bugs += 1;
                *s.bug_keys.entry(r.dedup_key.clone().unwrap_or_default()).or_default() += 1;
            }
            Some(_) => s.false_positives += 1,
            None => {}
        }
    }
    s
}

pub fn cmd_prune(cfg: &CampaignConfig) -> Result<(Vec<ProgramReport>, PruneSummary)> {
    let rp = cfg.output_dir.join("test").join("results.jsonl");
    let mut reports: Vec<ProgramReport> = read_jsonl("prune", &rp)?;
    let programs: BTreeMap<String, Program> = load_generated(&cfg.output_dir.join("generate"))?.into_iter().collect();
    prune_reports(&mut reports, &programs, cfg);
    let dir = cfg.output_dir.join("prune");
    write_jsonl("prune", &dir.join("verdicts.jsonl"), &reports)?;
    let sessions: Vec<GenSession> = read_jsonl("prune", &cfg.output_dir.join("generate").join("sessions.jsonl"))?;
    let by_program: BTreeMap<&str, &GenSession> = sessions.iter().filter_map(|s| s.program.as_deref().map(|p| (p, s))).collect();
    let bugs = cfg.output_dir.join("bugs");
    if bugs.exists() {
        io("prune", &bugs, fs::remove_dir_all(&bugs))?;
    }
    io("prune", &bugs, fs::create_dir_all(&bugs))?;
    let mut index = String::from("program\tkey\n");
    for r in reports.iter().filter(|r| r.is_bug()) {
        let session = by_program.get(r.program.as_str()).map(|s| serde_json::to_string(s).expect("serializable"));
        io("prune", &bugs, difftest::write_bug_bundle(&bugs, r, &programs[&r.program], session.as_deref()))?;
        index.push_str(&format!("{}\t{}\n", r.program, r.dedup_key.as_deref().unwrap_or("")));
    }
    write_file("prune", &bugs.join("index.tsv"), index.as_bytes())?;
    let summary = summarize(&reports);
    Ok((reports, summary))
}

pub struct RunAllSummary {
    pub templates: usize,
    pub extract_errors: usize,
    pub programs: usize,
    pub prune: PruneSummary,
}

impl RunAllSummary {
    pub fn line(&self) -> String {
        format!(
            "templates={} extract_errors={} programs={} failures={} bugs={} false_positives={} bug_keys={}",
            self.templates,
            self.extract_errors,
            self.programs,
            self.prune.failures,
            self.prune.bugs,
            self.prune.false_positives,
            self.prune.bug_keys.len()
        )
    }
}

/// All phases with one seed. Timing goes to `summary.txt` only.
pub fn cmd_run_all(cfg: &CampaignConfig) -> Result<RunAllSummary> {
    let start = std::time::Instant::now();
    cmd_collect(cfg)?;
    let ex = cmd_extract(cfg)?;
    let gen = cmd_generate(cfg)?;
    cmd_test(cfg)?;
    let (_, prune) = cmd_prune(cfg)?;
    let s = RunAllSummary { templates: ex.templates.len(), extract_errors: ex.errors.len(), programs: gen.program_count(), prune };
    let mut text = Vec::new();
    let when = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let _ = writeln!(text, "{}", s.line());
    let _ = writeln!(text, "finished_at_unix={when} elapsed_ms={}", start.elapsed().as_millis());
    write_file("run-all", &cfg.output_dir.join("summary.txt"), &text)?;
    Ok(s)
}
