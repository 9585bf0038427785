//! The checksum driver: builds arguments once, calls the entry in a loop and
//! hashes arguments, per-iteration results and the final globals.

use super::checksum::Checksum;
use crate::interp::{HoleOracle, Interp};
use crate::lang::{ArgSource, Harness, Program};
use crate::runtime::*;
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

/// An execution backend able to run a program's functions.
pub trait Engine {
    fn init_globals(&mut self) -> Result<GlobalState, Stop>;
    fn call(&mut self, st: &mut GlobalState, func: &str, args: &[Value]) -> Outcome;
}

/// The interpreter as a harness backend. Holes trap.
pub struct InterpEngine<'p> {
    interp: Interp<'p>,
}

impl<'p> InterpEngine<'p> {
    pub fn new(p: &'p Program, limits: ExecLimits) -> Self {
        InterpEngine { interp: Interp::new(p, HoleOracle::Trapping, limits) }
    }

    pub fn with_oracle(p: &'p Program, oracle: HoleOracle, limits: ExecLimits) -> Self {
        InterpEngine { interp: Interp::new(p, oracle, limits) }
    }
}

impl Engine for InterpEngine<'_> {
    fn init_globals(&mut self) -> Result<GlobalState, Stop> {
        self.interp.init_globals()
    }

    fn call(&mut self, st: &mut GlobalState, func: &str, args: &[Value]) -> Outcome {
        self.interp.call_entry(st, func, args)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CrashKind {
    UnfilledHole,
    EngineInternal,
    Limit,
}

impl CrashKind {
    pub fn name(self) -> &'static str {
        match self {
            CrashKind::UnfilledHole => "UnfilledHole",
            CrashKind::EngineInternal => "EngineInternal",
            CrashKind::Limit => "Limit",
        }
    }

    /// Exit code of the out-of-process adapter protocol.
    pub fn exit_code(self) -> i32 {
        match self {
            CrashKind::UnfilledHole => 10,
            CrashKind::EngineInternal => 11,
            CrashKind::Limit => 12,
        }
    }

    pub fn from_exit_code(code: i32) -> Option<CrashKind> {
        match code {
            10 => Some(CrashKind::UnfilledHole),
            11 => Some(CrashKind::EngineInternal),
            12 => Some(CrashKind::Limit),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HarnessOutcome {
    Checksum(u64),
    Crash(CrashKind),
}

pub const DEFAULT_LOOPS: u64 = 100_000;

/// Options for one harness run.
#[derive(Clone, Copy, Debug)]
pub struct DriverOptions {
    /// Used when the harness declaration has no `loops` clause.
    pub default_loops: u64,
    /// Overrides the declared loop count when set.
    pub loops_override: Option<u64>,
    pub timeout: Duration,
}

impl Default for DriverOptions {
    fn default() -> Self {
        DriverOptions { default_loops: DEFAULT_LOOPS, loops_override: None, timeout: Duration::from_secs(60) }
    }
}

fn crash_of(o: &Outcome) -> Option<CrashKind> {
    match o {
        Outcome::Trapped { kind: TrapKind::UnfilledHole, .. } => Some(CrashKind::UnfilledHole),
        Outcome::Exhausted(_) => Some(CrashKind::Limit),
        _ => None,
    }
}

/// Calls the argument providers. `Err` carries either a crash or a trap
/// kind that ends the run early.
pub fn build_args(engine: &mut dyn Engine, st: &mut GlobalState, h: &Harness) -> Result<Vec<Value>, Outcome> {
    match &h.args {
        ArgSource::PerParam(names) => {
            let mut out = Vec::with_capacity(names.len());
            for n in names {
                match engine.call(st, n, &[]) {
                    Outcome::Returned(v) => out.push(v),
                    other => return Err(other),
                }
            }
            Ok(out)
        }
        ArgSource::Tuple(n) => match engine.call(st, n, &[]) {
            Outcome::Returned(Value::Record(r)) => Ok(st.heap.fields(r).to_vec()),
            Outcome::Returned(Value::Null) => Err(Outcome::Trapped { kind: TrapKind::NullDeref, hole: None }),
            Outcome::Returned(v) => panic!("tuple provider returned {v:?}"),
            other => Err(other),
        },
    }
}

/// Runs the checksum driver of a program that carries a harness declaration.
pub fn run_harness(engine: &mut dyn Engine, p: &Program, opts: &DriverOptions) -> HarnessOutcome {
    let h = p.harness.as_ref().expect("program has a harness declaration");
    let deadline = Instant::now() + opts.timeout;
    let loops = opts.loops_override.or(h.loops).unwrap_or(opts.default_loops);
    let mut cs = Checksum::new();
    let mut st = match engine.init_globals() {
        Ok(st) => st,
        Err(Stop::Trap(TrapKind::UnfilledHole, _)) => return HarnessOutcome::Crash(CrashKind::UnfilledHole),
        Err(Stop::Exhausted(_)) => return HarnessOutcome::Crash(CrashKind::Limit),
        Err(Stop::Trap(k, _)) => {
            cs.update_name(k.name());
            return HarnessOutcome::Checksum(cs.value());
        }
    };
    match build_args(engine, &mut st, h) {
        Ok(args) => {
            for a in &args {
                cs.update(*a, &st.heap);
            }
            for i in 0..loops {
                if i % 256 == 0 && Instant::now() > deadline {
                    return HarnessOutcome::Crash(CrashKind::Limit);
                }
                let o = engine.call(&mut st, &h.entry, &args);
                if let Some(c) = crash_of(&o) {
                    return HarnessOutcome::Crash(c);
                }
                match o {
                    Outcome::Returned(v) => cs.update(v, &st.heap),
                    Outcome::Trapped { kind, .. } => cs.update_name(kind.name()),
                    Outcome::Exhausted(_) => unreachable!(),
                }
            }
        }
        Err(o) => {
            if let Some(c) = crash_of(&o) {
                return HarnessOutcome::Crash(c);
            }
            if let Outcome::Trapped { kind, .. } = o {
                cs.update_name(kind.name());
            }
        }
    }
    for g in &st.globals {
        cs.update(*g, &st.heap);
    }
    HarnessOutcome::Checksum(cs.value())
}

impl Engine for Interp<'_> {
    fn init_globals(&mut self) -> Result<GlobalState, Stop> {
        Interp::init_globals(self)
    }

    fn call(&mut self, st: &mut GlobalState, func: &str, args: &[Value]) -> Outcome {
        self.call_entry(st, func, args)
    }
}
