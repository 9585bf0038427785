//! Differential testing: runs programs over a configuration matrix,
//! compares the results and prunes failures by rerunning references.

use crate::genharness::checksum::Checksum;
use crate::genharness::driver::{run_harness, CrashKind, DriverOptions, HarnessOutcome, InterpEngine};
use crate::lang::{print_program, Program};
use crate::optvm::{FaultKind, FaultSet, OptLevel, VmEngine};
use crate::runtime::ExecLimits;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Read;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, Stdio};
use std::str::FromStr;
use std::time::{Duration, Instant};

pub const DEFAULT_RERUNS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Backend {
    Interp,
    OptVm,
    /// A command run as `<cmd> <program.mj>`.
    External { cmd: String },
}

/// One column of the test matrix.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub backend: Backend,
    pub level: OptLevel,
    pub faults: FaultSet,
    #[serde(default)]
    pub flags: Vec<String>,
}

impl RunConfig {
    pub fn interp() -> Self {
        RunConfig { name: "interp".into(), backend: Backend::Interp, level: OptLevel::L0, faults: FaultSet::none(), flags: vec![] }
    }

    pub fn optvm(level: OptLevel, faults: FaultSet) -> Self {
        let name = if faults.is_empty() { format!("optvm-{level}") } else { format!("optvm-{level}+{faults}") };
        RunConfig { name, backend: Backend::OptVm, level, faults, flags: vec![] }
    }

    pub fn external(cmd: &str) -> Self {
        RunConfig {
            name: format!("ext:{cmd}"),
            backend: Backend::External { cmd: cmd.to_string() },
            level: OptLevel::L0,
            faults: FaultSet::none(),
            flags: vec![],
        }
    }

    /// Interp, or OptVM at L0 without faults.
    pub fn is_reference(&self) -> bool {
        match self.backend {
            Backend::Interp => true,
            Backend::OptVm => self.level == OptLevel::L0 && self.faults.is_empty(),
            Backend::External { .. } => false,
        }
    }

    /// The default reference pair.
    pub fn references() -> Vec<RunConfig> {
        vec![RunConfig::interp(), RunConfig::optvm(OptLevel::L0, FaultSet::none())]
    }

    /// Interp plus OptVM at every level, faults off.
    pub fn clean_matrix() -> Vec<RunConfig> {
        let mut m = vec![RunConfig::interp()];
        m.extend(OptLevel::ALL.into_iter().map(|l| RunConfig::optvm(l, FaultSet::none())));
        m
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for RunConfig {
    type Err = String;

    /// `interp`, `optvm:L2`, `optvm:L2:FREM_CLOBBER,CHAR_WIDEN_SIGN` or
    /// `ext:<command>`.
    fn from_str(s: &str) -> Result<Self, String> {
        let s = s.trim();
        if let Some(cmd) = s.strip_prefix("ext:") {
            return Ok(RunConfig::external(cmd.trim()));
        }
        let mut parts = s.splitn(3, ':');
        match parts.next().map(str::trim) {
            Some("interp") if parts.next().is_none() => Ok(RunConfig::interp()),
            Some("optvm") => {
                let level = parts.next().unwrap_or("L0").parse()?;
                let faults = parts.next().map_or(Ok(FaultSet::none()), str::parse)?;
                Ok(RunConfig::optvm(level, faults))
            }
            _ => Err(format!("unknown run configuration `{s}`")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunResult {
    pub config: String,
    pub outcome: HarnessOutcome,
    /// Injected faults whose behavior showed during the run.
    pub fired: Vec<FaultKind>,
    #[serde(skip, default)]
    pub millis: u64,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct RunOptions {
    pub driver: DriverOptions,
    pub limits: ExecLimits,
}

fn run_in_process(p: &Program, cfg: &RunConfig, opts: &RunOptions) -> (HarnessOutcome, Vec<FaultKind>) {
    let limits = ExecLimits { wall_timeout: opts.driver.timeout.min(opts.limits.wall_timeout), ..opts.limits };
    let r = catch_unwind(AssertUnwindSafe(|| match &cfg.backend {
        Backend::Interp => (run_harness(&mut InterpEngine::new(p, limits), p, &opts.driver), Vec::new()),
        Backend::OptVm => match VmEngine::new(p, cfg.level, cfg.faults, limits) {
            Ok(mut e) => {
                let o = run_harness(&mut e, p, &opts.driver);
                (o, e.fired.iter().copied().collect())
            }
            Err(_) => (HarnessOutcome::Crash(CrashKind::EngineInternal), Vec::new()),
        },
        Backend::External { .. } => unreachable!(),
    }));
    r.unwrap_or((HarnessOutcome::Crash(CrashKind::EngineInternal), Vec::new()))
}

/// Parses an adapter's stdout and exit status.
pub fn parse_adapter_output(code: Option<i32>, stdout: &str) -> HarnessOutcome {
    match code {
        Some(0) => stdout
            .lines()
            .find_map(|l| l.trim().strip_prefix("CHECKSUM "))
            .and_then(|h| u64::from_str_radix(h.trim(), 16).ok())
            .map_or(HarnessOutcome::Crash(CrashKind::EngineInternal), HarnessOutcome::Checksum),
        Some(c) => HarnessOutcome::Crash(CrashKind::from_exit_code(c).unwrap_or(CrashKind::EngineInternal)),
        None => HarnessOutcome::Crash(CrashKind::EngineInternal),
    }
}

fn run_external(cmd: &str, path: &Path, timeout: Duration) -> HarnessOutcome {
    let mut words = cmd.split_whitespace();
    let Some(prog) = words.next() else { return HarnessOutcome::Crash(CrashKind::EngineInternal) };
    let child = Command::new(prog).args(words).arg(path).stdout(Stdio::piped()).stderr(Stdio::null()).spawn();
    let Ok(mut child) = child else { return HarnessOutcome::Crash(CrashKind::EngineInternal) };
    let deadline = Instant::now() + timeout;
    loop {
        match child.try_wait() {
            Ok(Some(status)) => {
                let mut out = String::new();
                if let Some(mut s) = child.stdout.take() {
                    let _ = s.read_to_string(&mut out);
                }
                return parse_adapter_output(status.code(), &out);
            }
            Ok(None) if Instant::now() > deadline => {
                let _ = child.kill();
                let _ = child.wait();
                return HarnessOutcome::Crash(CrashKind::Limit);
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(_) => return HarnessOutcome::Crash(CrashKind::EngineInternal),
        }
    }
}

fn temp_program(p: &Program) -> std::io::Result<std::path::PathBuf> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static N: AtomicU64 = AtomicU64::new(0);
    let path = std::env::temp_dir().join(format!("holegen-{}-{}.mj", std::process::id(), N.fetch_add(1, Ordering::Relaxed)));
    std::fs::write(&path, print_program(p))?;
    Ok(path)
}

/// Runs one configuration on fresh state.
pub fn run_one(p: &Program, cfg: &RunConfig, opts: &RunOptions) -> RunResult {
    let start = Instant::now();
    let (outcome, fired) = match &cfg.backend {
        Backend::External { cmd } => match temp_program(p) {
            Ok(path) => {
                let o = run_external(cmd, &path, opts.driver.timeout);
                let _ = std::fs::remove_file(&path);
                (o, Vec::new())
            }
            Err(_) => (HarnessOutcome::Crash(CrashKind::EngineInternal), Vec::new()),
        },
        _ => run_in_process(p, cfg, opts),
    };
    RunResult { config: cfg.name.clone(), outcome, fired, millis: start.elapsed().as_millis() as u64 }
}

pub fn run_matrix(p: &Program, configs: &[RunConfig], opts: &RunOptions) -> Vec<RunResult> {
    configs.iter().map(|c| run_one(p, c, opts)).collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Consistent,
    Mismatch { checksums: BTreeMap<String, u64> },
    /// The first crashing configuration; `mismatch` records whether the
    /// checksums that were produced also disagreed.
    CrashFailure { config: String, kind: CrashKind, mismatch: bool },
}

impl Verdict {
    pub fn is_failure(&self) -> bool {
        !matches!(self, Verdict::Consistent)
    }
}

pub fn compare(results: &[RunResult]) -> Verdict {
    let checksums: BTreeMap<String, u64> = results
        .iter()
        .filter_map(|r| match r.outcome {
            HarnessOutcome::Checksum(c) => Some((r.config.clone(), c)),
            HarnessOutcome::Crash(_) => None,
        })
        .collect();
    let distinct: BTreeSet<u64> = checksums.values().copied().collect();
    let mismatch = distinct.len() > 1;
    if let Some((config, kind)) = results.iter().find_map(|r| match r.outcome {
        HarnessOutcome::Crash(k) => Some((r.config.clone(), k)),
        HarnessOutcome::Checksum(_) => None,
    }) {
        return Verdict::CrashFailure { config, kind, mismatch };
    }
    if mismatch {
        Verdict::Mismatch { checksums }
    } else {
        Verdict::Consistent
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FalsePositiveReason {
    NondeterministicAcrossReruns,
    ReproducesUnderReference,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    Bug,
    FalsePositive(FalsePositiveReason),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PruneResult {
    pub classification: Classification,
    pub reruns: Vec<RunResult>,
}

/// Reruns a failing program `reruns` times on every reference. A failure
/// survives only if no rerun crashes and all rerun checksums agree.
pub fn prune(p: &Program, verdict: &Verdict, refs: &[RunConfig], reruns: usize, opts: &RunOptions) -> PruneResult {
    assert!(verdict.is_failure(), "only failures are pruned");
    let mut results = Vec::new();
    for _ in 0..reruns {
        for r in refs {
            results.push(run_one(p, r, opts));
        }
    }
    let crashed = results.iter().any(|r| matches!(r.outcome, HarnessOutcome::Crash(_)));
    let distinct: BTreeSet<HarnessOutcome> = results.iter().map(|r| r.outcome).collect();
    let classification = if crashed {
        Classification::FalsePositive(FalsePositiveReason::ReproducesUnderReference)
    } else if distinct.len() > 1 {
        Classification::FalsePositive(FalsePositiveReason::NondeterministicAcrossReruns)
    } else {
        Classification::Bug
    };
    PruneResult { classification, reruns: results }
}

/// Groups bugs: the signature of the faults that fired, or else a hash of
/// the configuration-versus-result table.
pub fn dedup_key(results: &[RunResult]) -> String {
    let fired: BTreeSet<FaultKind> = results.iter().flat_map(|r| r.fired.iter().copied()).collect();
    if !fired.is_empty() {
        let names: Vec<_> = fired.into_iter().map(FaultKind::name).collect();
        return format!("fault-{}", names.join("+"));
    }
    let mut cs = Checksum::new();
    for r in results {
        cs.update_name(&r.config);
        cs.update_name(&outcome_text(r.outcome));
    }
    format!("table-{:016x}", cs.value())
}

pub fn outcome_text(o: HarnessOutcome) -> String {
    match o {
        HarnessOutcome::Checksum(c) => format!("{c:016x}"),
        HarnessOutcome::Crash(k) => format!("crash:{}", k.name()),
    }
}

/// Everything known about one tested program.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramReport {
    pub program: String,
    pub results: Vec<RunResult>,
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pruned: Option<PruneResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dedup_key: Option<String>,
}

impl ProgramReport {
    pub fn is_bug(&self) -> bool {
        matches!(self.pruned, Some(PruneResult { classification: Classification::Bug, .. }))
    }
}

/// Runs the matrix, compares, and prunes failures.
pub fn test_program(name: &str, p: &Program, matrix: &[RunConfig], refs: &[RunConfig], reruns: usize, opts: &RunOptions) -> ProgramReport {
    let results = run_matrix(p, matrix, opts);
    let verdict = compare(&results);
    let pruned = verdict.is_failure().then(|| prune(p, &verdict, refs, reruns, opts));
    let dedup_key = pruned.as_ref().filter(|r| r.classification == Classification::Bug).map(|_| dedup_key(&results));
    ProgramReport { program: name.to_string(), results, verdict, pruned, dedup_key }
}

/// Writes one directory per bug under `dir`: the program, its session log
/// line (if given), the per-configuration results and the dedup key.
pub fn write_bug_bundle(dir: &Path, report: &ProgramReport, program: &Program, session: Option<&str>) -> std::io::Result<()> {
    let d = dir.join(&report.program);
    std::fs::create_dir_all(&d)?;
    std::fs::write(d.join("program.mj"), print_program(program))?;
    if let Some(s) = session {
        std::fs::write(d.join("session.json"), format!("{s}\n"))?;
    }
    std::fs::write(d.join("results.json"), serde_json::to_string_pretty(report).map_err(std::io::Error::other)? + "\n")?;
    std::fs::write(d.join("key.txt"), format!("{}\n", report.dedup_key.as_deref().unwrap_or("")))?;
    Ok(())
}
