//! Template extraction: replaces expressions of the selected categories
//! with hole markers, bounds loops whose conditions became holes and adds
//! argument providers plus a harness declaration.

use crate::corpus::{self, CallSequence, EntryInput, ObjectPool};
use crate::lang::typeck::{check_program, Scope, TypeEnv};
use crate::lang::*;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub const DEFAULT_LIMITER_BOUND: i32 = 1000;
pub const ARGS_RECORD: &str = "_Args";
pub const ARGS_PROVIDER: &str = "_args";
pub const LIMITER_PREFIX: &str = "_lim";

/// Which hole categories an extraction produces.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HoleKinds {
    None,
    Id,
    Val,
    ArithShift,
    RelLogic,
    All,
}

impl HoleKinds {
    pub const MODES: [HoleKinds; 5] = [HoleKinds::Id, HoleKinds::Val, HoleKinds::ArithShift, HoleKinds::RelLogic, HoleKinds::All];

    pub fn kinds(self) -> &'static [HoleKind] {
        match self {
            HoleKinds::None => &[],
            HoleKinds::Id => &[HoleKind::Id],
            HoleKinds::Val => &[HoleKind::Val],
            HoleKinds::ArithShift => &[HoleKind::Arith, HoleKind::Shift],
            HoleKinds::RelLogic => &[HoleKind::Relation, HoleKind::Logic],
            HoleKinds::All => &HoleKind::ALL,
        }
    }

    pub fn contains(self, k: HoleKind) -> bool {
        self.kinds().contains(&k)
    }

    pub fn name(self) -> &'static str {
        match self {
            HoleKinds::None => "none",
            HoleKinds::Id => "id",
            HoleKinds::Val => "val",
            HoleKinds::ArithShift => "arith-shift",
            HoleKinds::RelLogic => "rel-logic",
            HoleKinds::All => "all",
        }
    }
}

impl fmt::Display for HoleKinds {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for HoleKinds {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let all = [HoleKinds::None, HoleKinds::Id, HoleKinds::Val, HoleKinds::ArithShift, HoleKinds::RelLogic, HoleKinds::All];
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        all.into_iter().find(|k| k.name() == norm).ok_or_else(|| format!("unknown hole-kind mode `{s}`"))
    }
}

/// Where the entry's arguments come from.
#[derive(Clone, Copy, Debug)]
pub enum InputMode<'a> {
    /// The setup and arguments recorded by one collected sequence.
    TestBased(&'a EntryInput),
    /// Pool sequences for reference parameters, Val holes for primitives.
    PoolBased { pool: &'a ObjectPool, seed: u64 },
}

impl InputMode<'_> {
    pub fn name(&self) -> &'static str {
        match self {
            InputMode::TestBased(_) => "test",
            InputMode::PoolBased { .. } => "pool",
        }
    }
}

#[derive(Clone, Debug)]
pub struct ExtractionRequest<'a> {
    pub program: &'a Program,
    pub entry: String,
    pub mode: InputMode<'a>,
    pub kinds: HoleKinds,
    pub limiter_bound: i32,
}

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("unknown entry `{0}`")]
    UnknownEntry(String),
    #[error("recorded input is for `{found}`, not `{expected}`")]
    InputMismatch { expected: String, found: String },
    #[error("recorded input has {found} arguments, entry takes {expected}")]
    Arity { expected: usize, found: usize },
    #[error("template does not type-check: {0}")]
    Type(#[from] TypeError),
}

/// Descriptive data kept next to a template's source.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TemplateMeta {
    pub name: String,
    pub entry: String,
    pub mode: String,
    pub kinds: HoleKinds,
    pub holes: BTreeMap<String, usize>,
    pub limiters: Vec<String>,
    pub limiter_bound: i32,
}

#[derive(Clone, Debug)]
pub struct Template {
    pub meta: TemplateMeta,
    /// Contains holes, limiters, providers and a harness declaration without
    /// a loop count.
    pub program: Program,
}

impl Template {
    pub fn text(&self) -> String {
        print_program(&self.program)
    }

    pub fn hole_count(&self) -> usize {
        self.meta.holes.values().sum()
    }

    /// Rebuilds a template from its printed form and metadata.
    pub fn from_parts(text: &str, meta: TemplateMeta) -> Result<Template, LangError> {
        Ok(Template { program: parse(text)?, meta })
    }

    /// Wraps a hand-written template. Metadata is recomputed from the
    /// program: the entry comes from its harness declaration and limiters
    /// are the `_lim` locals it declares.
    pub fn from_program(name: &str, program: Program) -> Template {
        let mut limiters = Vec::new();
        for f in &program.functions {
            for s in &f.body {
                s.walk_stmts(&mut |s| {
                    if let Stmt::VarDecl { name, .. } = s {
                        if name.starts_with(LIMITER_PREFIX) {
                            limiters.push(name.clone());
                        }
                    }
                });
            }
        }
        let meta = TemplateMeta {
            name: name.to_string(),
            entry: program.harness.as_ref().map(|h| h.entry.clone()).unwrap_or_default(),
            mode: "manual".into(),
            kinds: HoleKinds::All,
            holes: count_holes(&program),
            limiters,
            limiter_bound: DEFAULT_LIMITER_BOUND,
        };
        Template { meta, program }
    }
}

/// Counts top-level holes by kind; every kind is present.
pub fn count_holes(p: &Program) -> BTreeMap<String, usize> {
    let mut m: BTreeMap<String, usize> = HoleKind::ALL.iter().map(|k| (k.name().to_string(), 0)).collect();
    for (_, spec) in p.holes() {
        *m.get_mut(spec.kind.name()).expect("all kinds present") += 1;
    }
    m
}

struct Converter<'p> {
    env: TypeEnv<'p>,
    kinds: HoleKinds,
}

fn numeric(t: &Result<Type, TypeError>) -> bool {
    matches!(t, Ok(t) if t.is_numeric())
}

impl Converter<'_> {
    fn category(&self, e: &Expr, sc: &Scope) -> Option<HoleKind> {
        Some(match e {
            Expr::Ident(_) => HoleKind::Id,
            Expr::Lit(l) if *l != Lit::Null => HoleKind::Val,
            Expr::Binary(op, l, r) => {
                if op.is_arith() {
                    HoleKind::Arith
                } else if op.is_shift() {
                    HoleKind::Shift
                } else if op.is_logic() {
                    HoleKind::Logic
                } else if numeric(&self.env.type_of(l, sc)) && numeric(&self.env.type_of(r, sc)) {
                    HoleKind::Relation
                } else {
                    return None;
                }
            }
            Expr::Index(..) => HoleKind::ArrayAcc,
            Expr::Cast(t, x) if t.is_numeric() && numeric(&self.env.type_of(x, sc)) => HoleKind::Cast,
            _ => return None,
        })
    }

    fn spec(&self, e: &Expr, sc: &Scope) -> Option<HoleSpec> {
        let kind = self.category(e, sc)?;
        if !self.kinds.contains(kind) {
            return None;
        }
        let ty = self.env.type_of(e, sc).ok()?;
        let ops: Vec<BinOp> = match kind {
            HoleKind::Arith => BinOp::ARITH.to_vec(),
            HoleKind::Shift => BinOp::SHIFT.to_vec(),
            HoleKind::Relation => BinOp::RELATION.to_vec(),
            HoleKind::Logic => BinOp::LOGIC.to_vec(),
            _ => Vec::new(),
        };
        let operands = match e {
            Expr::Binary(_, a, b) | Expr::Index(a, b) => vec![self.operand(a, sc), self.operand(b, sc)],
            Expr::Cast(_, x) => vec![self.operand(x, sc)],
            _ => Vec::new(),
        };
        Some(HoleSpec { kind, ty, ops, operands, source: Some(Box::new(e.clone())) })
    }

    fn operand(&self, e: &Expr, sc: &Scope) -> Operand {
        match self.spec(e, sc) {
            Some(h) => Operand::Hole(h),
            None => Operand::Fixed(e.clone()),
        }
    }

    /// Converts the maximal convertible expression at `e`; otherwise keeps
    /// `e` and converts its children.
    fn top(&self, e: &Expr, sc: &Scope) -> Expr {
        match self.spec(e, sc) {
            Some(spec) => Expr::Hole { id: 0, spec: Box::new(spec) },
            None => self.verbatim(e, sc),
        }
    }

    fn verbatim(&self, e: &Expr, sc: &Scope) -> Expr {
        let mut out = e.clone();
        for (o, i) in out.children_mut().into_iter().zip(e.children()) {
            *o = self.top(i, sc);
        }
        out
    }

    fn block(&self, b: &[Stmt], sc: &mut Scope) -> Block {
        sc.push();
        let out = b.iter().map(|s| self.stmt(s, sc)).collect();
        sc.pop();
        out
    }

    fn stmt(&self, s: &Stmt, sc: &mut Scope) -> Stmt {
        match s {
            Stmt::VarDecl { ty, name, init } => {
                let init = self.top(init, sc);
                sc.declare(name, ty.clone());
                Stmt::VarDecl { ty: ty.clone(), name: name.clone(), init }
            }
            Stmt::Assign { target, op, value } => {
                // Targets stay as written; only their index expressions vary.
                let target = match target {
                    Expr::Index(a, i) => Expr::Index(a.clone(), Box::new(self.top(i, sc))),
                    t => t.clone(),
                };
                Stmt::Assign { target, op: *op, value: self.top(value, sc) }
            }
            Stmt::Expr(e) => Stmt::Expr(self.verbatim(e, sc)),
            Stmt::If { cond, then_blk, else_blk } => Stmt::If {
                cond: self.top(cond, sc),
                then_blk: self.block(then_blk, sc),
                else_blk: else_blk.as_ref().map(|b| self.block(b, sc)),
            },
            Stmt::While { cond, body } => Stmt::While { cond: self.top(cond, sc), body: self.block(body, sc) },
            Stmt::For { init, cond, update, body } => {
                sc.push();
                let init = init.iter().map(|s| self.stmt(s, sc)).collect();
                let cond = self.top(cond, sc);
                let update = update.iter().map(|s| self.stmt(s, sc)).collect();
                let body = self.block(body, sc);
                sc.pop();
                Stmt::For { init, cond, update, body }
            }
            Stmt::Return(e) => Stmt::Return(e.as_ref().map(|e| self.top(e, sc))),
            Stmt::Block(b) => Stmt::Block(self.block(b, sc)),
        }
    }
}

fn literal_only(e: &Expr) -> bool {
    match e {
        Expr::Lit(_) => true,
        Expr::Unary(UnOp::Neg, x) => matches!(**x, Expr::Lit(_)),
        _ => false,
    }
}

/// Replaces expressions of the selected kinds in every function body and
/// non-constant global initializer. Hole ids are left at 0.
pub fn convert(p: &Program, kinds: HoleKinds) -> Program {
    let conv = Converter { env: TypeEnv::new(p), kinds };
    let mut out = p.clone();
    for (i, g) in p.globals.iter().enumerate() {
        if !literal_only(&g.init) {
            out.globals[i].init = conv.top(&g.init, &Scope::for_global(i));
        }
    }
    for (i, f) in p.functions.iter().enumerate() {
        let mut sc = Scope::for_function(p, f);
        out.functions[i].body = f.body.iter().map(|s| conv.stmt(s, &mut sc)).collect();
    }
    out
}

/// Numbers holes 1, 2, ... in printed order.
pub fn number_holes(p: &mut Program) {
    let mut next = 0;
    p.for_each_expr_mut(&mut |e| {
        if let Expr::Hole { id, .. } = e {
            next += 1;
            *id = next;
        }
    });
}

/// Guards every loop whose condition contains a hole with a counter, so a
/// filled condition cannot spin forever. Returns the counter names.
pub fn add_limiters(p: &mut Program, bound: i32) -> Vec<String> {
    fn block(b: &mut Block, bound: i32, names: &mut Vec<String>) {
        let mut out = Vec::with_capacity(b.len());
        for mut s in b.drain(..) {
            let limited = match &mut s {
                Stmt::While { cond, .. } | Stmt::For { cond, .. } if cond.contains_hole() => {
                    let name = format!("{LIMITER_PREFIX}{}", names.len() + 1);
                    names.push(name.clone());
                    let c = std::mem::replace(cond, Expr::int(0));
                    let guard = Expr::binary(BinOp::Lt, Expr::PostIncDec { name: name.clone(), inc: true }, Expr::int(bound));
                    *cond = Expr::binary(BinOp::And, c, guard);
                    Some(name)
                }
                _ => None,
            };
            if let Some(name) = limited {
                out.push(Stmt::VarDecl { ty: Type::Int, name, init: Expr::int(0) });
            }
            match &mut s {
                Stmt::If { then_blk, else_blk, .. } => {
                    block(then_blk, bound, names);
                    if let Some(e) = else_blk {
                        block(e, bound, names);
                    }
                }
                Stmt::While { body, .. } | Stmt::For { body, .. } => block(body, bound, names),
                Stmt::Block(b) => block(b, bound, names),
                _ => {}
            }
            out.push(s);
        }
        *b = out;
    }
    let mut names = Vec::new();
    for f in &mut p.functions {
        block(&mut f.body, bound, &mut names);
    }
    names
}

fn provider(name: String, ret: Type, mut body: Block, result: Expr) -> FunctionDecl {
    body.push(Stmt::Return(Some(result)));
    FunctionDecl { name, receiver: None, params: Vec::new(), ret, body }
}

fn sequence_provider(name: String, ty: &Type, seq: &CallSequence, p: &Program) -> FunctionDecl {
    let result = seq.result.as_ref().map_or(Expr::Lit(Lit::Null), |r| Expr::ident(r.clone()));
    provider(name, ty.clone(), corpus::steps_to_stmts(&seq.steps, p), result)
}

/// Adds the argument providers for `entry` and the harness declaration.
fn add_providers(out: &mut Program, src: &Program, entry: &FunctionDecl, mode: InputMode) -> Result<(), ExtractError> {
    let sig = entry.signature();
    let qualified = entry.qualified_name();
    let args = match mode {
        InputMode::TestBased(input) => {
            if input.entry != qualified {
                return Err(ExtractError::InputMismatch { expected: qualified, found: input.entry.clone() });
            }
            if input.args.len() != sig.len() {
                return Err(ExtractError::Arity { expected: sig.len(), found: input.args.len() });
            }
            if sig.is_empty() {
                ArgSource::PerParam(Vec::new())
            } else {
                out.records.push(RecordDecl {
                    name: ARGS_RECORD.into(),
                    fields: sig.iter().enumerate().map(|(i, t)| FieldDecl { name: format!("a{i}"), ty: t.clone() }).collect(),
                });
                let tuple = "_r".to_string();
                let mut body = corpus::steps_to_stmts(&input.setup, src);
                body.push(Stmt::VarDecl {
                    ty: Type::Record(ARGS_RECORD.into()),
                    name: tuple.clone(),
                    init: Expr::New { record: ARGS_RECORD.into(), args: Vec::new() },
                });
                for (i, a) in input.args.iter().enumerate() {
                    body.push(Stmt::Assign {
                        target: Expr::Field(Box::new(Expr::ident(tuple.clone())), format!("a{i}")),
                        op: None,
                        value: corpus::arg_to_expr(a),
                    });
                }
                out.functions.push(provider(ARGS_PROVIDER.into(), Type::Record(ARGS_RECORD.into()), body, Expr::ident(tuple)));
                ArgSource::Tuple(ARGS_PROVIDER.into())
            }
        }
        InputMode::PoolBased { pool, seed } => {
            let mut rng = crate::seed::rng(seed, &[crate::seed::phase::EXTRACT, crate::seed::label(&qualified)]);
            let mut names = Vec::new();
            for (i, ty) in sig.iter().enumerate() {
                let name = format!("_arg{i}");
                let f = if ty.is_primitive() {
                    let hole = Expr::Hole { id: 0, spec: Box::new(HoleSpec::terminal(HoleKind::Val, ty.clone())) };
                    provider(name.clone(), ty.clone(), Vec::new(), hole)
                } else {
                    let pick = pool.get(ty);
                    if pick.is_empty() {
                        let fallback = match ty {
                            Type::Array(e) => Expr::NewArray { elem: *e, len: Box::new(Expr::int(0)) },
                            _ => Expr::Lit(Lit::Null),
                        };
                        provider(name.clone(), ty.clone(), Vec::new(), fallback)
                    } else {
                        sequence_provider(name.clone(), ty, &pick[rng.gen_range(0..pick.len())], src)
                    }
                };
                out.functions.push(f);
                names.push(name);
            }
            ArgSource::PerParam(names)
        }
    };
    out.harness = Some(Harness { entry: qualified, args, loops: None });
    Ok(())
}

/// Builds a template for one entry.
pub fn extract(req: &ExtractionRequest, name: &str) -> Result<Template, ExtractError> {
    let p = req.program;
    let entry = p.function(&req.entry).ok_or_else(|| ExtractError::UnknownEntry(req.entry.clone()))?;
    let mut out = convert(p, req.kinds);
    out.harness = None;
    add_providers(&mut out, p, entry, req.mode)?;
    number_holes(&mut out);
    let limiters = add_limiters(&mut out, req.limiter_bound);
    check_program(&out)?;
    let meta = TemplateMeta {
        name: name.to_string(),
        entry: req.entry.clone(),
        mode: req.mode.name().to_string(),
        kinds: req.kinds,
        holes: count_holes(&out),
        limiters,
        limiter_bound: req.limiter_bound,
    };
    Ok(Template { meta, program: out })
}
