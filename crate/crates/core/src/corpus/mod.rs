//! Collection: a feedback-free call-sequence generator producing unit-test
//! like sequences (test-based inputs) and an object pool of value-producing
//! prefixes (pool-based inputs).

use crate::interp::{HoleOracle, Interp};
use crate::lang::{ElemType, Expr, FunctionDecl, Lit, Program, Stmt, Type, CONSTRUCTOR, F64};
use crate::runtime::{ExecLimits, Outcome};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};
use std::time::Duration;

pub const MAX_STEPS: usize = 8;

/// One argument of a step: a literal or an earlier binding.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Arg {
    Lit(Lit),
    Var(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Callee {
    /// A function by qualified name; methods take the receiver first.
    Func(String),
    /// `new R(args)`.
    New(String),
    /// An array literal of literal elements.
    Array(ElemType),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step {
    /// Binding name, absent for void calls.
    pub bind: Option<String>,
    pub ty: Type,
    pub callee: Callee,
    pub args: Vec<Arg>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CallSequence {
    pub steps: Vec<Step>,
    /// The final binding, if the last step produces a value.
    pub result: Option<String>,
    pub result_ty: Type,
}

/// A recorded input for one entry: setup steps plus the entry's arguments
/// (receiver first).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryInput {
    pub entry: String,
    pub setup: Vec<Step>,
    pub args: Vec<Arg>,
}

/// Literals every primitive argument is first drawn from.
pub fn literal_pool(ty: &Type) -> Vec<Lit> {
    match ty {
        Type::Int => vec![Lit::Int(0), Lit::Int(1), Lit::Int(-1), Lit::Int(2), Lit::Int(10), Lit::Int(i32::MIN), Lit::Int(i32::MAX)],
        Type::Double => vec![Lit::Double(F64::new(0.0)), Lit::Double(F64::new(1.0)), Lit::Double(F64::new(f64::NAN))],
        Type::Bool => vec![Lit::Bool(true), Lit::Bool(false)],
        Type::Char => vec![Lit::Char('a' as u16), Lit::Char(' ' as u16)],
        _ => vec![],
    }
}

fn primitive_arg(ty: &Type, rng: &mut ChaCha8Rng) -> Lit {
    if rng.gen_bool(0.75) {
        *literal_pool(ty).choose(rng).expect("primitive type")
    } else {
        match ty {
            Type::Int => Lit::Int(rng.gen_range(-1000..1000)),
            Type::Double => Lit::Double(F64::new((rng.gen_range(-1000.0..1000.0f64) * 100.0).round() / 100.0)),
            Type::Bool => Lit::Bool(rng.gen()),
            Type::Char => Lit::Char(rng.gen_range(0x20..0x7f)),
            other => panic!("not primitive: {other}"),
        }
    }
}

/// Functions a sequence may call: everything except constructors (reached
/// through `new`) and generated helpers (leading underscore).
fn callables(p: &Program) -> Vec<&FunctionDecl> {
    p.functions.iter().filter(|f| !f.is_constructor() && !f.name.starts_with('_')).collect()
}

struct Builder<'p, 'r> {
    prog: &'p Program,
    rng: &'r mut ChaCha8Rng,
    steps: Vec<Step>,
    next: usize,
}

impl Builder<'_, '_> {
    fn fresh(&mut self) -> String {
        self.next += 1;
        format!("v{}", self.next - 1)
    }

    fn existing(&mut self, ty: &Type) -> Option<String> {
        let found: Vec<&String> =
            self.steps.iter().filter(|s| s.ty == *ty).filter_map(|s| s.bind.as_ref()).collect();
        found.choose(self.rng).map(|s| s.to_string())
    }

    /// An argument of type `ty`; `None` if one cannot be produced in budget.
    fn arg(&mut self, ty: &Type, depth: usize) -> Option<Arg> {
        if ty.is_primitive() {
            return Some(Arg::Lit(primitive_arg(ty, self.rng)));
        }
        if let Some(v) = self.existing(ty) {
            if self.rng.gen_bool(0.7) {
                return Some(Arg::Var(v));
            }
        }
        if self.steps.len() + 1 < MAX_STEPS && depth < 3 {
            if let Some(v) = self.produce(ty, depth + 1) {
                return Some(Arg::Var(v));
            }
        }
        match ty {
            Type::Record(_) => Some(self.existing(ty).map_or(Arg::Lit(Lit::Null), Arg::Var)),
            _ => self.existing(ty).map(Arg::Var),
        }
    }

    /// Appends steps producing a value of `ty`; returns its binding.
    fn produce(&mut self, ty: &Type, depth: usize) -> Option<String> {
        match ty {
            Type::Array(e) => {
                let n = self.rng.gen_range(0..5);
                let args = (0..n).map(|_| Arg::Lit(primitive_arg(&e.as_type(), self.rng))).collect();
                let bind = self.fresh();
                self.steps.push(Step { bind: Some(bind.clone()), ty: ty.clone(), callee: Callee::Array(*e), args });
                Some(bind)
            }
            Type::Record(r) => {
                let prog = self.prog;
                let mut producers: Vec<Callee> = vec![Callee::New(r.clone())];
                for f in callables(prog) {
                    if f.ret == *ty {
                        producers.push(Callee::Func(f.qualified_name()));
                    }
                }
                let callee = producers.choose(self.rng)?.clone();
                self.call(callee, depth).flatten()
            }
            _ => None,
        }
    }

    fn params_of(&self, callee: &Callee) -> Vec<Type> {
        match callee {
            Callee::Func(n) => self.prog.function(n).expect("known function").signature(),
            Callee::New(r) => self.prog.method(r, CONSTRUCTOR).map(|f| f.params.iter().map(|p| p.ty.clone()).collect()).unwrap_or_default(),
            Callee::Array(_) => vec![],
        }
    }

    /// Appends a call step. `None` if it could not be built; otherwise the
    /// binding (absent for void calls).
    fn call(&mut self, callee: Callee, depth: usize) -> Option<Option<String>> {
        let params = self.params_of(&callee);
        let is_method = matches!(&callee, Callee::Func(n) if self.prog.function(n).is_some_and(|f| f.receiver.is_some()));
        let mut args = Vec::with_capacity(params.len());
        for (i, t) in params.iter().enumerate() {
            let a = self.arg(t, depth)?;
            if i == 0 && is_method && a == Arg::Lit(Lit::Null) {
                return None;
            }
            args.push(a);
        }
        if self.steps.len() >= MAX_STEPS {
            return None;
        }
        let ty = match &callee {
            Callee::Func(n) => self.prog.function(n).expect("known function").ret.clone(),
            Callee::New(r) => Type::Record(r.clone()),
            Callee::Array(e) => Type::Array(*e),
        };
        let bind = (ty != Type::Unit).then(|| self.fresh());
        self.steps.push(Step { bind: bind.clone(), ty, callee, args });
        Some(bind)
    }
}

fn arg_expr(a: &Arg) -> Expr {
    match a {
        Arg::Lit(l) => Expr::Lit(*l),
        Arg::Var(v) => Expr::Ident(v.clone()),
    }
}

/// The expression a step evaluates.
pub fn step_expr(s: &Step, p: &Program) -> Expr {
    let args: Vec<Expr> = s.args.iter().map(arg_expr).collect();
    match &s.callee {
        Callee::Func(n) => {
            let f = p.function(n).expect("known function");
            if f.receiver.is_some() {
                let mut it = args.into_iter();
                let recv = it.next().expect("receiver argument");
                Expr::Call { recv: Some(Box::new(recv)), name: f.name.clone(), args: it.collect() }
            } else {
                Expr::Call { recv: None, name: n.clone(), args }
            }
        }
        Callee::New(r) => Expr::New { record: r.clone(), args },
        Callee::Array(e) => Expr::ArrayLit { elem: *e, elems: args },
    }
}

/// Statements replaying `steps`.
pub fn steps_to_stmts(steps: &[Step], p: &Program) -> Vec<Stmt> {
    steps
        .iter()
        .map(|s| match &s.bind {
            Some(b) => Stmt::VarDecl { ty: s.ty.clone(), name: b.clone(), init: step_expr(s, p) },
            None => Stmt::Expr(step_expr(s, p)),
        })
        .collect()
}

pub fn arg_to_expr(a: &Arg) -> Expr {
    arg_expr(a)
}

fn replay_limits() -> ExecLimits {
    ExecLimits { max_steps: 200_000, max_heap_cells: 2_000_000, wall_timeout: Duration::from_secs(5), ..ExecLimits::default() }
}

/// Whether the sequence runs to completion from fresh globals.
pub fn replays_cleanly(p: &Program, seq: &CallSequence) -> bool {
    let mut prog = p.clone();
    let mut body = steps_to_stmts(&seq.steps, p);
    body.push(Stmt::Return(None));
    prog.functions.push(FunctionDecl {
        name: "_replay".into(),
        receiver: None,
        params: vec![],
        ret: Type::Unit,
        body,
    });
    let mut it = Interp::new(&prog, HoleOracle::Trapping, replay_limits());
    let Ok(mut st) = it.init_globals() else { return false };
    matches!(it.call_entry(&mut st, "_replay", &[]), Outcome::Returned(_))
}

/// Generates up to `budget` sequences; sequences that trap are discarded.
/// Deterministic in `seed`.
pub fn generate_sequences(p: &Program, budget: usize, seed: u64) -> Vec<CallSequence> {
    let targets = callables(p);
    let mut out = Vec::new();
    if targets.is_empty() {
        return out;
    }
    let mut rng = crate::seed::rng(seed, &[crate::seed::phase::COLLECT]);
    for _ in 0..budget {
        let target = targets[rng.gen_range(0..targets.len())].qualified_name();
        let mut b = Builder { prog: p, rng: &mut rng, steps: Vec::new(), next: 0 };
        if b.call(Callee::Func(target), 0).is_none() {
            continue;
        }
        let steps = b.steps;
        let last = steps.last().expect("nonempty");
        let seq = CallSequence { result: last.bind.clone(), result_ty: last.ty.clone(), steps };
        if seq.steps.len() <= MAX_STEPS && replays_cleanly(p, &seq) {
            out.push(seq);
        }
    }
    out
}

/// Splits each sequence into its entry (the last call) and the recorded
/// input. Sequences not ending in a function call are skipped.
pub fn to_entries(seqs: &[CallSequence]) -> Vec<EntryInput> {
    seqs.iter()
        .filter_map(|s| {
            let (last, prefix) = s.steps.split_last()?;
            let Callee::Func(entry) = &last.callee else { return None };
            Some(EntryInput { entry: entry.clone(), setup: prefix.to_vec(), args: last.args.clone() })
        })
        .collect()
}

/// Reference types are pooled under their printed name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ObjectPool {
    pub by_type: BTreeMap<String, Vec<CallSequence>>,
}

#[derive(Serialize, Deserialize)]
struct PoolLine {
    #[serde(rename = "type")]
    ty: String,
    sequence: CallSequence,
}

impl ObjectPool {
    pub fn get(&self, ty: &Type) -> &[CallSequence] {
        self.by_type.get(&ty.to_string()).map_or(&[], Vec::as_slice)
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> io::Result<()> {
        for (ty, seqs) in &self.by_type {
            for s in seqs {
                serde_json::to_writer(&mut w, &PoolLine { ty: ty.clone(), sequence: s.clone() })?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl BufRead) -> io::Result<Self> {
        let mut pool = ObjectPool::default();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let l: PoolLine = serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
            pool.by_type.entry(l.ty).or_default().push(l.sequence);
        }
        Ok(pool)
    }
}

/// Indexes every prefix of every sequence that ends in a reference-typed
/// binding.
pub fn build_pool(seqs: &[CallSequence]) -> ObjectPool {
    let mut pool = ObjectPool::default();
    for s in seqs {
        for k in 0..s.steps.len() {
            let st = &s.steps[k];
            if let (Some(b), true) = (&st.bind, st.ty.is_reference()) {
                let prefix = CallSequence { steps: s.steps[..=k].to_vec(), result: Some(b.clone()), result_ty: st.ty.clone() };
                pool.by_type.entry(st.ty.to_string()).or_default().push(prefix);
            }
        }
    }
    pool
}

/// A uniformly chosen pool sequence of type `ty`.
pub fn pick_from_pool<'a>(ty: &Type, pool: &'a ObjectPool, rng: &mut impl Rng) -> Option<&'a CallSequence> {
    pool.get(ty).choose(rng)
}

pub fn write_sequences(seqs: &[CallSequence], mut w: impl Write) -> io::Result<()> {
    for s in seqs {
        serde_json::to_writer(&mut w, s)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_sequences(r: impl BufRead) -> io::Result<Vec<CallSequence>> {
    let mut out = Vec::new();
    for line in r.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?);
        }
    }
    Ok(out)
}
