use clap::{Args, Parser, Subcommand, ValueEnum};
use holegen_core::campaign::{self, stats, CampaignConfig, CampaignError};
use holegen_core::difftest::RunConfig;
use holegen_core::extract::HoleKinds;
use holegen_core::genharness::driver::{run_harness, DriverOptions, HarnessOutcome, InterpEngine};
use holegen_core::lang;
use holegen_core::optvm::{FaultSet, OptLevel, VmEngine};
use holegen_core::runtime::ExecLimits;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "holegen", version, about = "Template-based differential testing for MiniJ runtimes")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Campaign configuration file (`key = value` lines).
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    /// id, val, arith-shift, rel-logic or all.
    #[arg(long)]
    hole_kinds: Option<HoleKinds>,
    /// test or pool.
    #[arg(long)]
    mode: Option<String>,
    /// Faults enabled on the L2 matrix entry, e.g. `FREM_CLOBBER,CHAR_WIDEN_SIGN`.
    #[arg(long)]
    faults: Option<FaultSet>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Output directory; overrides HOLEGEN_OUT and the config file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Extra `key=value` settings applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Interp,
    Optvm,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate call sequences and object pools for the corpus.
    Collect(Common),
    /// Build templates from the corpus and collected inputs.
    Extract(Common),
    /// Fill templates and emit concrete programs.
    Generate(Common),
    /// Run generated programs over the configuration matrix.
    Test(Common),
    /// Rerun failures on reference configurations and bundle bugs.
    Prune(Common),
    /// Run every phase with one seed.
    RunAll(Common),
    /// Hole and limiter counts of a template directory.
    Stats {
        #[command(flatten)]
        common: Common,
        /// Defaults to `<out>/extract`.
        dir: Option<PathBuf>,
    },
    /// Run one program's harness and print its checksum. Usable as an
    /// external adapter: exit 10, 11 or 12 on crashes.
    Run {
        program: PathBuf,
        #[arg(long, value_enum, default_value = "interp")]
        backend: BackendArg,
        #[arg(long, default_value = "L0")]
        level: OptLevel,
        #[arg(long, default_value = "none")]
        faults: FaultSet,
        /// Overrides the declared loop count.
        #[arg(long)]
        loops: Option<u64>,
        #[arg(long, default_value_t = 60)]
        timeout: u64,
    },
}

fn load_config(c: &Common) -> Result<CampaignConfig, String> {
    let mut cfg = match &c.config {
        Some(p) => CampaignConfig::load(p).map_err(|e| format!("[config] {}: {e}", p.display()))?,
        None => CampaignConfig::default(),
    };
    if let Ok(out) = std::env::var("HOLEGEN_OUT") {
        if !out.is_empty() {
            cfg.output_dir = PathBuf::from(out);
        }
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(j) = c.jobs {
        cfg.jobs = j;
    }
    if let Some(k) = c.hole_kinds {
        cfg.hole_kinds = k;
    }
    if let Some(m) = &c.mode {
        cfg.mode = m.parse().map_err(|e| format!("[config] {e}"))?;
    }
    if let Some(f) = c.faults {
        cfg.matrix.retain(|r| !(r.backend == holegen_core::difftest::Backend::OptVm && r.level == OptLevel::L2));
        cfg.matrix.push(RunConfig::optvm(OptLevel::L2, f));
    }
    if let Some(p) = &c.corpus {
        cfg.corpus_dir = p.clone();
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    for s in &c.sets {
        let (k, v) = s.split_once('=').ok_or_else(|| format!("[config] expected KEY=VALUE, found `{s}`"))?;
        if !cfg.set(k, v).map_err(|e| format!("[config] {e}"))? {
            return Err(format!("[config] unknown key `{k}`"));
        }
    }
    cfg.validate().map_err(|e| format!("[config] {e}"))?;
    Ok(cfg)
}

fn phase<T>(r: Result<T, CampaignError>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn run_program(program: &PathBuf, backend: BackendArg, level: OptLevel, faults: FaultSet, loops: Option<u64>, timeout: u64) -> ExitCode {
    let text = match std::fs::read_to_string(program) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("[run] {}: {e}", program.display());
            return ExitCode::from(2);
        }
    };
    let p = match lang::parse(&text) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("[run] {}: {e}", program.display());
            return ExitCode::from(2);
        }
    };
    if p.harness.is_none() {
        eprintln!("[run] {}: no harness declaration", program.display());
        return ExitCode::from(2);
    }
    let timeout = std::time::Duration::from_secs(timeout);
    let opts = DriverOptions { loops_override: loops, timeout, ..DriverOptions::default() };
    let limits = ExecLimits { wall_timeout: timeout, ..ExecLimits::default() };
    let outcome = match backend {
        BackendArg::Interp => run_harness(&mut InterpEngine::new(&p, limits), &p, &opts),
        BackendArg::Optvm => match VmEngine::new(&p, level, faults, limits) {
            Ok(mut e) => run_harness(&mut e, &p, &opts),
            Err(e) => {
                eprintln!("[run] {e}");
                return ExitCode::from(11);
            }
        },
    };
    match outcome {
        HarnessOutcome::Checksum(c) => {
            println!("CHECKSUM {c:016x}");
            ExitCode::SUCCESS
        }
        HarnessOutcome::Crash(k) => {
            eprintln!("[run] crash: {}", k.name());
            ExitCode::from(k.exit_code() as u8)
        }
    }
}

fn real_main(cli: Cli) -> Result<(), String> {
    match cli.cmd {
        Cmd::Collect(c) => {
            let cfg = load_config(&c)?;
            let out = phase(campaign::cmd_collect(&cfg))?;
            let seqs: usize = out.iter().map(|c| c.sequences.len()).sum();
            println!("collect: programs={} sequences={seqs}", out.len());
        }
        Cmd::Extract(c) => {
            let cfg = load_config(&c)?;
            let s = phase(campaign::cmd_extract(&cfg))?;
            for e in &s.errors {
                eprintln!("[extract] skipped {e}");
            }
            println!("extract: templates={} errors={}", s.templates.len(), s.errors.len());
        }
        Cmd::Generate(c) => {
            let cfg = load_config(&c)?;
            let s = phase(campaign::cmd_generate(&cfg))?;
            println!("generate: sessions={} programs={}", s.sessions().count(), s.program_count());
        }
        Cmd::Test(c) => {
            let cfg = load_config(&c)?;
            let r = phase(campaign::cmd_test(&cfg))?;
            let failures = r.iter().filter(|r| r.verdict.is_failure()).count();
            println!("test: programs={} failures={failures}", r.len());
        }
        Cmd::Prune(c) => {
            let cfg = load_config(&c)?;
            let (_, s) = phase(campaign::cmd_prune(&cfg))?;
            println!("prune: failures={} bugs={} false_positives={} bug_keys={}", s.failures, s.bugs, s.false_positives, s.bug_keys.len());
        }
        Cmd::RunAll(c) => {
            let cfg = load_config(&c)?;
            let s = phase(campaign::cmd_run_all(&cfg))?;
            println!("run-all: {}", s.line());
        }
        Cmd::Stats { common, dir } => {
            let cfg = load_config(&common)?;
            let dir = dir.unwrap_or_else(|| cfg.output_dir.join("extract"));
            let t = stats::table(&dir).map_err(|e| format!("[stats] {e}"))?;
            let out = cfg.output_dir.join("stats");
            std::fs::create_dir_all(&out).map_err(|e| format!("[stats] {e}"))?;
            std::fs::write(out.join("stats.tsv"), t.tsv()).map_err(|e| format!("[stats] {e}"))?;
            std::fs::write(out.join("stats.txt"), t.text()).map_err(|e| format!("[stats] {e}"))?;
            print!("{}", t.text());
        }
        Cmd::Run { .. } => unreachable!(),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Cmd::Run { program, backend, level, faults, loops, timeout } = &cli.cmd {
        return run_program(program, *backend, *level, *faults, *loops, *timeout);
    }
    match real_main(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
