//! Campaign configuration: `key = value` lines, `#` comments.

use crate::difftest::RunConfig;
use crate::extract::{HoleKinds, DEFAULT_LIMITER_BOUND};
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputKind {
    Test,
    Pool,
}

impl FromStr for InputKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "test" | "test-based" => Ok(InputKind::Test),
            "pool" | "pool-based" => Ok(InputKind::Pool),
            other => Err(format!("unknown mode `{other}`")),
        }
    }
}

impl InputKind {
    pub fn name(self) -> &'static str {
        match self {
            InputKind::Test => "test",
            InputKind::Pool => "pool",
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CampaignConfig {
    /// Directory of `.mj` source programs.
    pub corpus_dir: PathBuf,
    pub mode: InputKind,
    pub hole_kinds: HoleKinds,
    /// Collected sequences per source program.
    pub collect_budget: usize,
    /// Test-based templates per entry (one per recorded input).
    pub inputs_per_entry: usize,
    pub limiter_bound: i32,
    pub programs_per_template: usize,
    pub max_fill_iterations: usize,
    pub template_timeout_secs: u64,
    pub harness_loops: u64,
    pub test_timeout_secs: u64,
    pub matrix: Vec<RunConfig>,
    pub refs: Vec<RunConfig>,
    pub reruns: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for CampaignConfig {
    fn default() -> Self {
        CampaignConfig {
            corpus_dir: PathBuf::from("corpus"),
            mode: InputKind::Test,
            hole_kinds: HoleKinds::All,
            collect_budget: 40,
            inputs_per_entry: 2,
            limiter_bound: DEFAULT_LIMITER_BOUND,
            programs_per_template: 10,
            max_fill_iterations: 100,
            template_timeout_secs: 180,
            harness_loops: 100_000,
            test_timeout_secs: 60,
            matrix: RunConfig::clean_matrix(),
            refs: RunConfig::references(),
            reruns: crate::difftest::DEFAULT_RERUNS,
            output_dir: PathBuf::from("holegen-out"),
            seed: 0,
            jobs: 1,
        }
    }
}

fn configs(v: &str) -> Result<Vec<RunConfig>, String> {
    v.split(';').map(str::trim).filter(|s| !s.is_empty()).map(str::parse).collect()
}

fn num<T: FromStr>(v: &str) -> Result<T, String> {
    v.parse().map_err(|_| format!("expected a number, found `{v}`"))
}

impl CampaignConfig {
    /// Applies one `key = value` setting. Keys accept `-` or `_`.
    pub fn set(&mut self, key: &str, value: &str) -> Result<bool, String> {
        let v = value.trim();
        match key.trim().replace('-', "_").as_str() {
            "corpus_dir" => self.corpus_dir = PathBuf::from(v),
            "mode" => self.mode = v.parse()?,
            "hole_kinds" => self.hole_kinds = v.parse()?,
            "collect_budget" => self.collect_budget = num(v)?,
            "inputs_per_entry" => self.inputs_per_entry = num(v)?,
            "limiter_bound" => self.limiter_bound = num(v)?,
            "programs_per_template" => self.programs_per_template = num(v)?,
            "max_fill_iterations" => self.max_fill_iterations = num(v)?,
            "template_timeout" => self.template_timeout_secs = num(v)?,
            "harness_loops" => self.harness_loops = num(v)?,
            "test_timeout" => self.test_timeout_secs = num(v)?,
            "matrix" => self.matrix = configs(v)?,
            "refs" => self.refs = configs(v)?,
            "reruns" => self.reruns = num(v)?,
            "output_dir" => self.output_dir = PathBuf::from(v),
            "seed" => self.seed = num(v)?,
            "jobs" => self.jobs = num(v)?,
            _ => return Ok(false),
        }
        Ok(true)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = CampaignConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| ConfigError::Syntax { line: i + 1, message: "expected `key = value`".into() })?;
            match c.set(k, v) {
                Ok(true) => {}
                Ok(false) => return Err(ConfigError::UnknownKey { line: i + 1, key: k.trim().to_string() }),
                Err(message) => return Err(ConfigError::Syntax { line: i + 1, message }),
            }
        }
        Ok(c)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Checks the positivity constraints.
    pub fn validate(&self) -> Result<(), String> {
        let checks = [
            ("programs_per_template", self.programs_per_template as u64),
            ("max_fill_iterations", self.max_fill_iterations as u64),
            ("template_timeout", self.template_timeout_secs),
            ("harness_loops", self.harness_loops),
            ("reruns", self.reruns as u64),
            ("jobs", self.jobs as u64),
            ("limiter_bound", self.limiter_bound.max(0) as u64),
        ];
        if let Some((k, _)) = checks.iter().find(|(_, v)| *v == 0) {
            return Err(format!("`{k}` must be positive"));
        }
        if self.matrix.len() < 2 {
            return Err("the matrix needs at least two configurations".into());
        }
        if self.refs.iter().any(|r| !r.is_reference()) {
            return Err("reference configurations must be interp or optvm:L0 without faults".into());
        }
        Ok(())
    }
}
