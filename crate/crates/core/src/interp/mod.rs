//! Reference tree-walking evaluator.

pub mod oracle;

pub use oracle::{Decisions, HoleOracle};

use crate::lang::*;
use crate::runtime::*;
use oracle::Candidate;
use std::collections::HashMap;
use std::rc::Rc;

enum Flow {
    Normal,
    Return(Value),
}

struct Frame<'p> {
    receiver: Option<(Ref, usize)>,
    vars: Vec<(&'p str, &'p Type, Value)>,
    /// Number of globals visible (all, except inside global initializers).
    globals_visible: usize,
    /// Name assigned by the statement being evaluated; Id fills avoid it.
    assign_target: Option<&'p str>,
}

impl<'p> Frame<'p> {
    fn lookup(&self, name: &str) -> Option<usize> {
        self.vars.iter().rposition(|(n, _, _)| *n == name)
    }
}

struct Run<'s> {
    st: &'s mut GlobalState,
    fuel: Fuel,
    depth: u32,
}

/// Interpreter over one program. The oracle decides what holes do.
pub struct Interp<'p> {
    prog: &'p Program,
    records: HashMap<&'p str, usize>,
    funcs: HashMap<String, usize>,
    pub oracle: HoleOracle,
    pub limits: ExecLimits,
}

type R<T> = Result<T, Stop>;

fn trap(kind: TrapKind) -> Stop {
    Stop::Trap(kind, None)
}

impl<'p> Interp<'p> {
    pub fn new(prog: &'p Program, oracle: HoleOracle, limits: ExecLimits) -> Self {
        let records = prog.records.iter().enumerate().map(|(i, r)| (r.name.as_str(), i)).collect();
        let funcs = prog.functions.iter().enumerate().map(|(i, f)| (f.qualified_name(), i)).collect();
        Interp { prog, records, funcs, oracle, limits }
    }

    pub fn program(&self) -> &'p Program {
        self.prog
    }

    /// Evaluates all global initializers in declaration order.
    pub fn init_globals(&mut self) -> Result<GlobalState, Stop> {
        let mut st = GlobalState::default();
        let prog = self.prog;
        for (i, g) in prog.globals.iter().enumerate() {
            let mut run = Run { st: &mut st, fuel: Fuel::new(&self.limits), depth: 0 };
            let mut fr = Frame { receiver: None, vars: Vec::new(), globals_visible: i, assign_target: None };
            let v = self.eval(&g.init, &mut fr, &mut run)?;
            st.globals.push(v);
        }
        Ok(st)
    }

    /// Calls a function by qualified name; a method takes its receiver as
    /// `args[0]`.
    pub fn call_entry(&mut self, st: &mut GlobalState, entry: &str, args: &[Value]) -> Outcome {
        let Some(&fi) = self.funcs.get(entry) else {
            panic!("unknown entry `{entry}`");
        };
        let mut run = Run { st, fuel: Fuel::new(&self.limits), depth: 0 };
        let f = &self.prog.functions[fi];
        let (recv, rest) = if f.receiver.is_some() { (Some(args[0]), &args[1..]) } else { (None, args) };
        Outcome::from_result(self.invoke(fi, recv, rest.to_vec(), &mut run))
    }

    fn invoke(&mut self, fi: usize, recv: Option<Value>, args: Vec<Value>, run: &mut Run) -> R<Value> {
        run.fuel.tick()?;
        if run.depth >= self.limits.max_depth {
            return Err(Stop::Exhausted(Limit::Depth));
        }
        let prog = self.prog;
        let f = &prog.functions[fi];
        let receiver = match recv {
            None => None,
            Some(Value::Record(r)) => Some((r, self.records[f.receiver.as_deref().unwrap()])),
            Some(Value::Null) => return Err(trap(TrapKind::NullDeref)),
            Some(other) => panic!("bad receiver {other:?}"),
        };
        let vars = f.params.iter().zip(args).map(|(p, v)| (p.name.as_str(), &p.ty, v)).collect();
        let mut fr = Frame { receiver, vars, globals_visible: prog.globals.len(), assign_target: None };
        run.depth += 1;
        let r = self.block(&f.body, &mut fr, run);
        run.depth -= 1;
        match r? {
            Flow::Return(v) => Ok(v),
            Flow::Normal => Ok(Value::Unit),
        }
    }

    fn block(&mut self, b: &'p [Stmt], fr: &mut Frame<'p>, run: &mut Run) -> R<Flow> {
        let mark = fr.vars.len();
        let mut out = Ok(Flow::Normal);
        for s in b {
            match self.stmt(s, fr, run) {
                Ok(Flow::Normal) => {}
                other => {
                    out = other;
                    break;
                }
            }
        }
        fr.vars.truncate(mark);
        out
    }

    fn stmt(&mut self, s: &'p Stmt, fr: &mut Frame<'p>, run: &mut Run) -> R<Flow> {
        match s {
            Stmt::VarDecl { ty, name, init } => {
                let v = self.eval(init, fr, run)?;
                fr.vars.push((name, ty, v));
            }
            Stmt::Assign { target, op, value } => self.assign(target, *op, value, fr, run)?,
            Stmt::Expr(e) => {
                self.eval(e, fr, run)?;
            }
            Stmt::If { cond, then_blk, else_blk } => {
                if self.eval(cond, fr, run)?.as_bool() {
                    return self.block(then_blk, fr, run);
                } else if let Some(b) = else_blk {
                    return self.block(b, fr, run);
                }
            }
            Stmt::While { cond, body } => {
                while self.eval(cond, fr, run)?.as_bool() {
                    run.fuel.tick()?;
                    if let Flow::Return(v) = self.block(body, fr, run)? {
                        return Ok(Flow::Return(v));
                    }
                }
            }
            Stmt::For { init, cond, update, body } => {
                let mark = fr.vars.len();
                let r = (|| {
                    for s in init {
                        self.stmt(s, fr, run)?;
                    }
                    while self.eval(cond, fr, run)?.as_bool() {
                        run.fuel.tick()?;
                        if let Flow::Return(v) = self.block(body, fr, run)? {
                            return Ok(Flow::Return(v));
                        }
                        for s in update {
                            self.stmt(s, fr, run)?;
                        }
                    }
                    Ok(Flow::Normal)
                })();
                fr.vars.truncate(mark);
                return r;
            }
            Stmt::Return(e) => {
                let v = match e {
                    Some(e) => self.eval(e, fr, run)?,
                    None => Value::Unit,
                };
                return Ok(Flow::Return(v));
            }
            Stmt::Block(b) => return self.block(b, fr, run),
        }
        Ok(Flow::Normal)
    }

    fn assign(&mut self, target: &'p Expr, op: Option<BinOp>, value: &'p Expr, fr: &mut Frame<'p>, run: &mut Run) -> R<()> {
        match target {
            Expr::Ident(name) => {
                let old = op.map(|_| self.read_var(name, fr, run));
                let saved = fr.assign_target.replace(name);
                let v = self.eval(value, fr, run);
                fr.assign_target = saved;
                let v = v?;
                let v = match (op, old) {
                    (Some(o), Some(old)) => binop(o, old, v)?,
                    _ => v,
                };
                self.write_var(name, v, fr, run);
            }
            Expr::Field(obj, f) => {
                let o = self.eval(obj, fr, run)?;
                match op {
                    None => {
                        let v = self.eval(value, fr, run)?;
                        let r = self.deref(o)?;
                        let idx = self.field_index(r, f, run);
                        run.st.heap.fields_mut(r)[idx] = v;
                    }
                    Some(bop) => {
                        let r = self.deref(o)?;
                        let idx = self.field_index(r, f, run);
                        let old = run.st.heap.fields(r)[idx];
                        let v = self.eval(value, fr, run)?;
                        let nv = binop(bop, old, v)?;
                        run.st.heap.fields_mut(r)[idx] = nv;
                    }
                }
            }
            Expr::Index(arr, idx) => {
                let a = self.eval(arr, fr, run)?;
                let i = self.eval(idx, fr, run)?.as_int();
                match op {
                    None => {
                        let v = self.eval(value, fr, run)?;
                        run.st.heap.store(a, i, v)?;
                    }
                    Some(bop) => {
                        let old = run.st.heap.load(a, i)?;
                        let v = self.eval(value, fr, run)?;
                        let nv = binop(bop, old, v)?;
                        run.st.heap.store(a, i, nv)?;
                    }
                }
            }
            other => panic!("not assignable: {other:?}"),
        }
        Ok(())
    }

    fn deref(&self, v: Value) -> R<Ref> {
        match v {
            Value::Record(r) => Ok(r),
            Value::Null => Err(trap(TrapKind::NullDeref)),
            other => panic!("expected record, found {other:?}"),
        }
    }

    fn field_index(&self, r: Ref, f: &str, run: &Run) -> usize {
        let HeapObj::Record { rec, .. } = run.st.heap.get(r) else { panic!("not a record") };
        self.prog.records[*rec].field_index(f).expect("typechecked field")
    }

    fn read_var(&self, name: &str, fr: &Frame, run: &Run) -> Value {
        if let Some(i) = fr.lookup(name) {
            return fr.vars[i].2;
        }
        if let Some((r, rec)) = fr.receiver {
            if let Some(fi) = self.prog.records[rec].field_index(name) {
                return run.st.heap.fields(r)[fi];
            }
        }
        let gi = self.prog.global_index(name).expect("typechecked name");
        run.st.globals[gi]
    }

    fn write_var(&self, name: &str, v: Value, fr: &mut Frame, run: &mut Run) {
        if let Some(i) = fr.lookup(name) {
            fr.vars[i].2 = v;
            return;
        }
        if let Some((r, rec)) = fr.receiver {
            if let Some(fi) = self.prog.records[rec].field_index(name) {
                run.st.heap.fields_mut(r)[fi] = v;
                return;
            }
        }
        let gi = self.prog.global_index(name).expect("typechecked name");
        run.st.globals[gi] = v;
    }

    fn candidates(&self, fr: &Frame<'p>) -> Vec<Candidate<'p>> {
        let mut out: Vec<Candidate<'p>> = Vec::new();
        let mut push = |name: &'p str, ty: &'p Type| {
            if Some(name) != fr.assign_target && !out.iter().any(|c| c.name == name) {
                out.push(Candidate { name, ty });
            }
        };
        // Innermost declaration wins for shadowed names.
        for (n, t, _) in fr.vars.iter().rev() {
            push(n, t);
        }
        if let Some((_, rec)) = fr.receiver {
            for f in &self.prog.records[rec].fields {
                push(&f.name, &f.ty);
            }
        }
        for g in &self.prog.globals[..fr.globals_visible] {
            push(&g.name, &g.ty);
        }
        // Restore declaration order among locals.
        let nlocals = out.iter().filter(|c| fr.lookup(c.name).is_some()).count();
        out[..nlocals].reverse();
        out
    }

    fn hole(&mut self, id: u32, spec: &HoleSpec, fr: &mut Frame<'p>, run: &mut Run) -> R<Value> {
        let decided = match &mut self.oracle {
            HoleOracle::Trapping => None,
            HoleOracle::Replay(d) => d.get(&id).cloned(),
            HoleOracle::Filling { decisions, .. } if decisions.contains_key(&id) => decisions.get(&id).cloned(),
            HoleOracle::Filling { .. } => {
                let cands = self.candidates(fr);
                let HoleOracle::Filling { rng, decisions } = &mut self.oracle else { unreachable!() };
                match oracle::choose_fill(spec, &cands, rng) {
                    Some(e) => {
                        let e = Rc::new(e);
                        decisions.insert(id, e.clone());
                        Some(e)
                    }
                    None => None,
                }
            }
        };
        match decided {
            Some(e) => self.eval(&e, fr, run),
            None => Err(Stop::Trap(TrapKind::UnfilledHole, Some(id))),
        }
    }

    fn eval(&mut self, e: &Expr, fr: &mut Frame<'p>, run: &mut Run) -> R<Value> {
        Ok(match e {
            Expr::Lit(l) => match l {
                Lit::Int(v) => Value::Int(*v),
                Lit::Double(d) => Value::Double(d.get()),
                Lit::Bool(b) => Value::Bool(*b),
                Lit::Char(c) => Value::Char(*c),
                Lit::Null => Value::Null,
            },
            Expr::Ident(n) => self.read_var(n, fr, run),
            Expr::This => Value::Record(fr.receiver.expect("typechecked this").0),
            Expr::Field(t, f) => {
                let o = self.eval(t, fr, run)?;
                let r = self.deref(o)?;
                let idx = self.field_index(r, f, run);
                run.st.heap.fields(r)[idx]
            }
            Expr::Index(a, i) => {
                let a = self.eval(a, fr, run)?;
                let i = self.eval(i, fr, run)?.as_int();
                run.st.heap.load(a, i)?
            }
            Expr::Length(a) => {
                let a = self.eval(a, fr, run)?;
                Value::Int(run.st.heap.array(a).len() as i32)
            }
            Expr::Unary(op, x) => {
                let v = self.eval(x, fr, run)?;
                match (op, v) {
                    (UnOp::Neg, Value::Double(d)) => Value::Double(-d),
                    (UnOp::Neg, v) => Value::Int(v.as_int().wrapping_neg()),
                    (UnOp::BitNot, v) => Value::Int(!v.as_int()),
                    (UnOp::Not, v) => Value::Bool(!v.as_bool()),
                }
            }
            Expr::Binary(BinOp::And, l, r) => {
                Value::Bool(self.eval(l, fr, run)?.as_bool() && self.eval(r, fr, run)?.as_bool())
            }
            Expr::Binary(BinOp::Or, l, r) => {
                Value::Bool(self.eval(l, fr, run)?.as_bool() || self.eval(r, fr, run)?.as_bool())
            }
            Expr::Binary(op, l, r) => {
                let a = self.eval(l, fr, run)?;
                let b = self.eval(r, fr, run)?;
                binop(*op, a, b)?
            }
            Expr::Cast(t, x) => cast(t, self.eval(x, fr, run)?),
            Expr::Call { recv, name, args } => {
                let rv = match recv {
                    Some(r) => Some(self.eval(r, fr, run)?),
                    None => None,
                };
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, fr, run)?);
                }
                let fi = match rv {
                    None => self.funcs[name.as_str()],
                    Some(v) => {
                        let r = self.deref(v)?;
                        let HeapObj::Record { rec, .. } = run.st.heap.get(r) else { panic!("not a record") };
                        self.funcs[&format!("{}.{name}", self.prog.records[*rec].name)]
                    }
                };
                self.invoke(fi, rv, vals, run)?
            }
            Expr::New { record, args } => {
                let rec = self.records[record.as_str()];
                let obj = run.st.heap.new_record(self.prog, rec, self.limits.max_heap_cells)?;
                let mut vals = Vec::with_capacity(args.len());
                for a in args {
                    vals.push(self.eval(a, fr, run)?);
                }
                if let Some(&fi) = self.funcs.get(&format!("{record}.{CONSTRUCTOR}")) {
                    self.invoke(fi, Some(obj), vals, run)?;
                }
                obj
            }
            Expr::NewArray { elem, len } => {
                let n = self.eval(len, fr, run)?.as_int();
                run.st.heap.new_array(*elem, n, self.limits.max_heap_cells)?
            }
            Expr::ArrayLit { elem, elems } => {
                let mut data = ArrayData::new(*elem, 0);
                let mut vals = Vec::with_capacity(elems.len());
                for x in elems {
                    vals.push(self.eval(x, fr, run)?);
                }
                match &mut data {
                    ArrayData::Int(v) => v.extend(vals.iter().map(|x| x.as_int())),
                    ArrayData::Double(v) => v.extend(vals.iter().map(|x| x.as_double())),
                    ArrayData::Char(v) => v.extend(vals.iter().map(|x| x.as_char())),
                }
                run.st.heap.new_array_from(data, self.limits.max_heap_cells)?
            }
            Expr::PostIncDec { name, inc } => {
                let old = self.read_var(name, fr, run).as_int();
                let new = if *inc { old.wrapping_add(1) } else { old.wrapping_sub(1) };
                self.write_var(name, Value::Int(new), fr, run);
                Value::Int(old)
            }
            Expr::NanoTime => Value::Int(nanotime()),
            Expr::Hole { id, spec } => self.hole(*id, spec, fr, run)?,
            Expr::Unfilled { id, .. } => return Err(Stop::Trap(TrapKind::UnfilledHole, Some(*id))),
        })
    }
}

/// Strict binary operators over evaluated operands.
pub fn binop(op: BinOp, a: Value, b: Value) -> R<Value> {
    use BinOp::*;
    Ok(match (a, b) {
        (Value::Double(x), Value::Double(y)) => match op {
            Add => Value::Double(x + y),
            Sub => Value::Double(x - y),
            Mul => Value::Double(x * y),
            Div => Value::Double(x / y),
            Rem => Value::Double(ops::drem(x, y)),
            Lt => Value::Bool(x < y),
            Le => Value::Bool(x <= y),
            Gt => Value::Bool(x > y),
            Ge => Value::Bool(x >= y),
            Eq => Value::Bool(x == y),
            Ne => Value::Bool(x != y),
            _ => panic!("bad double operator {op:?}"),
        },
        (Value::Bool(x), Value::Bool(y)) => match op {
            Eq => Value::Bool(x == y),
            Ne => Value::Bool(x != y),
            And => Value::Bool(x && y),
            Or => Value::Bool(x || y),
            _ => panic!("bad bool operator {op:?}"),
        },
        (Value::Int(_) | Value::Char(_), Value::Int(_) | Value::Char(_)) => {
            let (x, y) = (a.as_int(), b.as_int());
            match op {
                Add => Value::Int(x.wrapping_add(y)),
                Sub => Value::Int(x.wrapping_sub(y)),
                Mul => Value::Int(x.wrapping_mul(y)),
                Div => Value::Int(ops::idiv(x, y)?),
                Rem => Value::Int(ops::irem(x, y)?),
                Shl => Value::Int(ops::shl(x, y)),
                Shr => Value::Int(ops::shr(x, y)),
                UShr => Value::Int(ops::ushr(x, y)),
                Lt => Value::Bool(x < y),
                Le => Value::Bool(x <= y),
                Gt => Value::Bool(x > y),
                Ge => Value::Bool(x >= y),
                Eq => Value::Bool(x == y),
                Ne => Value::Bool(x != y),
                And | Or => panic!("bad int operator {op:?}"),
            }
        }
        (a, b) => match op {
            Eq => Value::Bool(a.same(&b)),
            Ne => Value::Bool(!a.same(&b)),
            _ => panic!("bad reference operator {op:?}"),
        },
    })
}

pub fn cast(t: &Type, v: Value) -> Value {
    match (t, v) {
        (Type::Int, Value::Double(d)) => Value::Int(ops::d2i(d)),
        (Type::Int, v) => Value::Int(v.as_int()),
        (Type::Char, Value::Double(d)) => Value::Char(ops::d2c(d)),
        (Type::Char, v) => Value::Char(ops::i2c(v.as_int())),
        (Type::Double, Value::Double(d)) => Value::Double(d),
        (Type::Double, v) => Value::Double(v.as_int() as f64),
        (t, v) => panic!("bad cast of {v:?} to {t}"),
    }
}

/// Runs the global initializers of `p` with the given oracle.
pub fn init_globals(p: &Program, oracle: HoleOracle, limits: ExecLimits) -> (Result<GlobalState, Stop>, HoleOracle) {
    let mut it = Interp::new(p, oracle, limits);
    let r = it.init_globals();
    (r, it.oracle)
}

/// One-shot `callEntry` convenience wrapper.
pub fn call_entry(p: &Program, st: &mut GlobalState, entry: &str, args: &[Value], oracle: HoleOracle, limits: ExecLimits) -> (Outcome, HoleOracle) {
    let mut it = Interp::new(p, oracle, limits);
    let o = it.call_entry(st, entry, args);
    (o, it.oracle)
}
