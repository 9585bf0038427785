//! Generation: executes a template under a filling oracle and emits one
//! concrete program per session.

use super::driver::{build_args, Engine};
use crate::extract::Template;
use crate::interp::{Decisions, HoleOracle, Interp};
use crate::lang::{print_expr, Expr, Program};
use crate::runtime::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, Write};
use std::time::{Duration, Instant};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GenConfig {
    /// Sessions (programs) per template.
    pub programs_per_template: usize,
    /// Entry calls per session before giving up on undecided holes.
    pub max_fill_iterations: usize,
    pub template_timeout: Duration,
    /// Loop count written into the emitted harness declaration.
    pub harness_loops: u64,
    pub seed: u64,
    pub limits: ExecLimits,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            programs_per_template: 10,
            max_fill_iterations: 100,
            template_timeout: Duration::from_secs(180),
            harness_loops: super::driver::DEFAULT_LOOPS,
            seed: 0,
            limits: ExecLimits { max_steps: 2_000_000, wall_timeout: Duration::from_secs(10), ..ExecLimits::default() },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionStatus {
    Complete,
    PartialAfterN,
    SkippedPreEntry,
}

/// One line of the session log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSession {
    pub template: String,
    pub index: usize,
    pub seed: u64,
    pub status: SessionStatus,
    /// Entry calls made.
    pub calls: usize,
    pub decisions: BTreeMap<u32, String>,
    /// Name of the emitted program, if any.
    pub program: Option<String>,
    /// Why no program was emitted for a session that entered the entry.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dropped: Option<String>,
}

#[derive(Clone, Debug)]
pub struct GeneratedProgram {
    pub name: String,
    pub program: Program,
}

#[derive(Clone, Debug, Default)]
pub struct GenOutput {
    pub sessions: Vec<GenSession>,
    pub programs: Vec<GeneratedProgram>,
    /// The template timeout cut generation short.
    pub timed_out: bool,
}

impl GenOutput {
    pub fn write_sessions(&self, mut w: impl Write) -> io::Result<()> {
        for s in &self.sessions {
            serde_json::to_writer(&mut w, s)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// Substitutes decided holes; undecided ones become `unfilled(id, T)`.
pub fn emit(t: &Template, decisions: &Decisions, loops: u64) -> Program {
    let mut p = t.program.clone();
    p.for_each_expr_mut(&mut |e| {
        if let Expr::Hole { id, spec } = e {
            *e = match decisions.get(id) {
                Some(d) => (**d).clone(),
                None => Expr::Unfilled { id: *id, ty: spec.ty.clone() },
            };
        }
    });
    if let Some(h) = &mut p.harness {
        h.loops = Some(loops);
    }
    p
}

fn is_exhausted(o: &Outcome) -> bool {
    matches!(o, Outcome::Exhausted(_))
}

/// Runs one filling session. Returns the session record and the emitted
/// program, if any.
pub fn run_session(t: &Template, cfg: &GenConfig, index: usize, deadline: Instant) -> (GenSession, Option<GeneratedProgram>) {
    use crate::seed::{label, phase, split};
    let seed = split(cfg.seed, &[phase::GENERATE, label(&t.meta.name), index as u64]);
    let mut it = Interp::new(&t.program, HoleOracle::filling(crate::seed::rng(seed, &[])), cfg.limits);
    let harness = t.program.harness.as_ref().expect("template has a harness");
    let wanted: Vec<u32> = t.program.holes().iter().map(|(id, _)| *id).collect();
    let mut session = GenSession {
        template: t.meta.name.clone(),
        index,
        seed,
        status: SessionStatus::SkippedPreEntry,
        calls: 0,
        decisions: BTreeMap::new(),
        program: None,
        dropped: None,
    };
    let finish = |it: Interp, mut s: GenSession| {
        let d = it.oracle.into_decisions();
        s.decisions = d.iter().map(|(k, v)| (*k, print_expr(v))).collect();
        (s, d)
    };

    let entry_is_method = t.program.function(&harness.entry).is_some_and(|f| f.receiver.is_some());
    let pre = it.init_globals().map_err(|e| Outcome::from_result(Err(e))).and_then(|mut st| {
        let args = build_args(&mut it, &mut st, harness)?;
        if entry_is_method && args[0] == Value::Null {
            return Err(Outcome::Trapped { kind: TrapKind::NullDeref, hole: None });
        }
        Ok((st, args))
    });
    let (mut st, args) = match pre {
        Ok(x) => x,
        Err(_) => return (finish(it, session).0, None),
    };

    let mut unfillable = false;
    let mut exhausted = false;
    let mut complete = false;
    while session.calls < cfg.max_fill_iterations && Instant::now() < deadline {
        let o = it.call(&mut st, &harness.entry, &args);
        session.calls += 1;
        unfillable |= matches!(o, Outcome::Trapped { kind: TrapKind::UnfilledHole, .. });
        if is_exhausted(&o) {
            exhausted = true;
            break;
        }
        let d = it.oracle.decisions().expect("filling oracle");
        if wanted.iter().all(|id| d.contains_key(id)) {
            complete = true;
            break;
        }
    }
    session.status = if complete { SessionStatus::Complete } else { SessionStatus::PartialAfterN };
    let (mut session, decisions) = finish(it, session);
    session.dropped = if exhausted {
        Some("execution limit reached".into())
    } else if unfillable {
        Some("hole without a candidate".into())
    } else {
        None
    };
    if session.dropped.is_some() {
        return (session, None);
    }
    let name = format!("{}_{index:02}", t.meta.name);
    session.program = Some(name.clone());
    let program = emit(t, &decisions, cfg.harness_loops);
    (session, Some(GeneratedProgram { name, program }))
}

/// Runs `cfg.programs_per_template` sessions. Sessions skipped before the
/// entry produce no program.
pub fn generate(t: &Template, cfg: &GenConfig) -> GenOutput {
    let deadline = Instant::now() + cfg.template_timeout;
    let mut out = GenOutput::default();
    for k in 0..cfg.programs_per_template {
        if Instant::now() >= deadline {
            out.timed_out = true;
            break;
        }
        let (s, p) = run_session(t, cfg, k, deadline);
        out.sessions.push(s);
        out.programs.extend(p);
    }
    out
}
