//! An optimizing register VM for MiniJ with optional injected faults.

pub mod disasm;
pub mod ir;
pub mod lower;
pub mod opt;
pub mod verify;
pub mod vm;

use crate::genharness::driver::Engine;
use crate::lang::{Program, Type};
use crate::runtime::*;
use ir::{CfgFunc, Func, Reg};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum OptLevel {
    L0,
    L1,
    L2,
}

impl OptLevel {
    pub const ALL: [OptLevel; 3] = [OptLevel::L0, OptLevel::L1, OptLevel::L2];

    pub fn name(self) -> &'static str {
        match self {
            OptLevel::L0 => "L0",
            OptLevel::L1 => "L1",
            OptLevel::L2 => "L2",
        }
    }
}

impl fmt::Display for OptLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for OptLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "L0" | "0" => Ok(OptLevel::L0),
            "L1" | "1" => Ok(OptLevel::L1),
            "L2" | "2" => Ok(OptLevel::L2),
            other => Err(format!("unknown optimization level `{other}`")),
        }
    }
}

/// A known miscompilation the VM can be built with.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FaultKind {
    FremClobber,
    BceOveraggressive,
    LoopcondForce,
    CharWidenSign,
}

impl FaultKind {
    pub const ALL: [FaultKind; 4] =
        [FaultKind::FremClobber, FaultKind::BceOveraggressive, FaultKind::LoopcondForce, FaultKind::CharWidenSign];

    pub fn name(self) -> &'static str {
        match self {
            FaultKind::FremClobber => "FREM_CLOBBER",
            FaultKind::BceOveraggressive => "BCE_OVERAGGRESSIVE",
            FaultKind::LoopcondForce => "LOOPCOND_FORCE",
            FaultKind::CharWidenSign => "CHAR_WIDEN_SIGN",
        }
    }

    pub fn from_name(s: &str) -> Option<FaultKind> {
        FaultKind::ALL.into_iter().find(|k| k.name().eq_ignore_ascii_case(s.trim()))
    }
}

impl fmt::Display for FaultKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Enabled faults. They only take effect at `L2`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FaultSet {
    pub frem_clobber: bool,
    pub bce_overaggressive: bool,
    pub loopcond_force: bool,
    pub char_widen_sign: bool,
}

impl FaultSet {
    pub fn none() -> Self {
        FaultSet::default()
    }

    pub fn all() -> Self {
        FaultSet { frem_clobber: true, bce_overaggressive: true, loopcond_force: true, char_widen_sign: true }
    }

    pub fn only(k: FaultKind) -> Self {
        let mut s = FaultSet::none();
        s.set(k, true);
        s
    }

    pub fn contains(&self, k: FaultKind) -> bool {
        match k {
            FaultKind::FremClobber => self.frem_clobber,
            FaultKind::BceOveraggressive => self.bce_overaggressive,
            FaultKind::LoopcondForce => self.loopcond_force,
            FaultKind::CharWidenSign => self.char_widen_sign,
        }
    }

    pub fn set(&mut self, k: FaultKind, on: bool) {
        match k {
            FaultKind::FremClobber => self.frem_clobber = on,
            FaultKind::BceOveraggressive => self.bce_overaggressive = on,
            FaultKind::LoopcondForce => self.loopcond_force = on,
            FaultKind::CharWidenSign => self.char_widen_sign = on,
        }
    }

    pub fn kinds(&self) -> Vec<FaultKind> {
        FaultKind::ALL.into_iter().filter(|k| self.contains(*k)).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds().is_empty()
    }
}

impl FromStr for FaultSet {
    type Err = String;

    /// Comma-separated fault names; `all` and `none` are accepted.
    fn from_str(s: &str) -> Result<Self, String> {
        let mut set = FaultSet::none();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            match part.to_ascii_lowercase().as_str() {
                "all" => set = FaultSet::all(),
                "none" => {}
                _ => set.set(FaultKind::from_name(part).ok_or_else(|| format!("unknown fault `{part}`"))?, true),
            }
        }
        Ok(set)
    }
}

impl fmt::Display for FaultSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<_> = self.kinds().into_iter().map(FaultKind::name).collect();
        if names.is_empty() {
            f.write_str("none")
        } else {
            f.write_str(&names.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("cannot compile `{function}`: {message}")]
pub struct CompileError {
    pub function: String,
    pub message: String,
}

impl CompileError {
    pub fn new(function: &str, message: String) -> Self {
        CompileError { function: function.to_string(), message }
    }
}

/// A compiled program: one function per program function (same indices)
/// plus one initializer per global.
#[derive(Clone, Debug)]
pub struct Module {
    pub level: OptLevel,
    pub faults: FaultSet,
    pub funcs: Vec<Func>,
    pub global_inits: Vec<Func>,
}

impl Module {
    pub fn func(&self, name: &str) -> Option<&Func> {
        self.funcs.iter().find(|f| f.name == name)
    }

    pub fn disasm(&self) -> String {
        let mut out = String::new();
        for f in self.global_inits.iter().chain(&self.funcs) {
            out.push_str(&disasm::disasm(f));
            out.push('\n');
        }
        out
    }
}

fn optimize(f: &mut CfgFunc, level: OptLevel, faults: FaultSet, double_params: &[Reg]) -> Result<(), CompileError> {
    if level >= OptLevel::L1 {
        opt::optimize_l1(f);
    }
    if level == OptLevel::L2 {
        opt::strength_reduce(f);
        opt::licm(f);
        opt::optimize_l1(f);
        if faults.frem_clobber {
            let doubles = opt::double_registers(f, double_params);
            opt::inject_frem_clobber(f, &doubles);
        }
    }
    verify::verify(f).map_err(|m| CompileError::new(&f.name, m))
}

/// Compiles every function and global initializer of a hole-free program.
pub fn compile(p: &Program, level: OptLevel, faults: FaultSet) -> Result<Module, CompileError> {
    let lw = lower::Lowerer { prog: p, env: crate::lang::typeck::TypeEnv { prog: p }, level, faults };
    let mut funcs = Vec::with_capacity(p.functions.len());
    for (fi, fd) in p.functions.iter().enumerate() {
        let mut cfg = lw.function(fi)?;
        let doubles: Vec<Reg> =
            fd.signature().iter().enumerate().filter(|(_, t)| **t == Type::Double).map(|(i, _)| i as Reg).collect();
        optimize(&mut cfg, level, faults, &doubles)?;
        funcs.push(cfg.linearize());
    }
    let mut global_inits = Vec::with_capacity(p.globals.len());
    for gi in 0..p.globals.len() {
        let mut cfg = lw.global_init(gi)?;
        optimize(&mut cfg, level, faults, &[])?;
        global_inits.push(cfg.linearize());
    }
    Ok(Module { level, faults, funcs, global_inits })
}

/// The VM as a harness backend. Records which faults changed a value.
pub struct VmEngine<'p> {
    pub prog: &'p Program,
    pub module: Module,
    pub limits: ExecLimits,
    pub fired: BTreeSet<FaultKind>,
}

impl<'p> VmEngine<'p> {
    pub fn new(prog: &'p Program, level: OptLevel, faults: FaultSet, limits: ExecLimits) -> Result<Self, CompileError> {
        Ok(VmEngine { prog, module: compile(prog, level, faults)?, limits, fired: BTreeSet::new() })
    }

    fn vm(&mut self) -> vm::Vm<'_> {
        vm::Vm { prog: self.prog, module: &self.module, limits: self.limits, fired: &mut self.fired }
    }
}

impl Engine for VmEngine<'_> {
    fn init_globals(&mut self) -> Result<GlobalState, Stop> {
        self.vm().init_globals()
    }

    fn call(&mut self, st: &mut GlobalState, func: &str, args: &[Value]) -> Outcome {
        self.vm().call_entry(st, func, args)
    }
}
