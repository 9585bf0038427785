//! Executes compiled functions.

use super::ir::*;
use super::{FaultKind, Module};
use crate::lang::Program;
use crate::runtime::*;
use std::collections::BTreeSet;

pub struct Vm<'a> {
    pub prog: &'a Program,
    pub module: &'a Module,
    pub limits: ExecLimits,
    /// Faults whose injected behavior differed from the correct one.
    pub fired: &'a mut BTreeSet<FaultKind>,
}

struct Run<'s> {
    st: &'s mut GlobalState,
    fuel: Fuel,
    depth: u32,
}

type R<T> = Result<T, Stop>;

fn trap(kind: TrapKind) -> Stop {
    Stop::Trap(kind, None)
}

fn konst(c: Const) -> Value {
    match c {
        Const::Int(v) => Value::Int(v),
        Const::Double(d) => Value::Double(d.get()),
        Const::Bool(b) => Value::Bool(b),
        Const::Char(c) => Value::Char(c),
        Const::Null => Value::Null,
    }
}

fn bin(op: BinKind, a: Value, b: Value) -> R<Value> {
    use BinKind::*;
    let cmp = |c: Cmp, o: Option<std::cmp::Ordering>| match o {
        None => c == Cmp::Ne,
        Some(o) => match c {
            Cmp::Lt => o.is_lt(),
            Cmp::Le => o.is_le(),
            Cmp::Gt => o.is_gt(),
            Cmp::Ge => o.is_ge(),
            Cmp::Eq => o.is_eq(),
            Cmp::Ne => o.is_ne(),
        },
    };
    let (x, y) = (a, b);
    Ok(match op {
        IAdd => Value::Int(x.as_int().wrapping_add(y.as_int())),
        ISub => Value::Int(x.as_int().wrapping_sub(y.as_int())),
        IMul => Value::Int(x.as_int().wrapping_mul(y.as_int())),
        IDiv => Value::Int(ops::idiv(x.as_int(), y.as_int())?),
        IRem => Value::Int(ops::irem(x.as_int(), y.as_int())?),
        IShl => Value::Int(ops::shl(x.as_int(), y.as_int())),
        IShr => Value::Int(ops::shr(x.as_int(), y.as_int())),
        IUShr => Value::Int(ops::ushr(x.as_int(), y.as_int())),
        DAdd => Value::Double(x.as_double() + y.as_double()),
        DSub => Value::Double(x.as_double() - y.as_double()),
        DMul => Value::Double(x.as_double() * y.as_double()),
        DDiv => Value::Double(x.as_double() / y.as_double()),
        DRem => Value::Double(ops::drem(x.as_double(), y.as_double())),
        ICmp(c) => Value::Bool(cmp(c, Some(x.as_int().cmp(&y.as_int())))),
        DCmp(c) => Value::Bool(cmp(c, x.as_double().partial_cmp(&y.as_double()))),
        BEq => Value::Bool(x.as_bool() == y.as_bool()),
        BNe => Value::Bool(x.as_bool() != y.as_bool()),
        REq => Value::Bool(x.same(&y)),
        RNe => Value::Bool(!x.same(&y)),
    })
}

impl Vm<'_> {
    pub fn init_globals(&mut self) -> Result<GlobalState, Stop> {
        let mut st = GlobalState::default();
        for f in &self.module.global_inits {
            let mut run = Run { st: &mut st, fuel: Fuel::new(&self.limits), depth: 0 };
            let v = self.exec(f, Vec::new(), &mut run)?;
            st.globals.push(v);
        }
        Ok(st)
    }

    pub fn call_entry(&mut self, st: &mut GlobalState, entry: &str, args: &[Value]) -> Outcome {
        let Some(fi) = self.prog.function_index(entry) else {
            panic!("unknown entry `{entry}`");
        };
        let mut run = Run { st, fuel: Fuel::new(&self.limits), depth: 0 };
        Outcome::from_result(self.invoke(fi, args.to_vec(), &mut run))
    }

    fn invoke(&mut self, fi: usize, args: Vec<Value>, run: &mut Run) -> R<Value> {
        run.fuel.tick()?;
        if run.depth >= self.limits.max_depth {
            return Err(Stop::Exhausted(Limit::Depth));
        }
        if self.prog.functions[fi].receiver.is_some() && args[0] == Value::Null {
            return Err(trap(TrapKind::NullDeref));
        }
        let module = self.module;
        run.depth += 1;
        let r = self.exec(&module.funcs[fi], args, run);
        run.depth -= 1;
        r
    }

    fn exec(&mut self, f: &Func, args: Vec<Value>, run: &mut Run) -> R<Value> {
        let mut regs = args;
        regs.resize(f.nregs as usize, Value::Unit);
        let heap_limit = self.limits.max_heap_cells;
        let mut pc = 0;
        loop {
            let inst = &f.code[pc];
            pc += 1;
            macro_rules! r {
                ($x:expr) => {
                    regs[*$x as usize]
                };
            }
            match inst {
                Inst::Const { dst, val } => r!(dst) = konst(*val),
                Inst::Move { dst, src } => r!(dst) = r!(src),
                Inst::Bin { dst, op, a, b } => r!(dst) = bin(*op, r!(a), r!(b))?,
                Inst::Un { dst, op, a } => {
                    let v = r!(a);
                    r!(dst) = match op {
                        UnKind::INeg => Value::Int(v.as_int().wrapping_neg()),
                        UnKind::DNeg => Value::Double(-v.as_double()),
                        UnKind::Not => Value::Bool(!v.as_bool()),
                        UnKind::BitNot => Value::Int(!v.as_int()),
                        UnKind::C2I { sign: false } => Value::Int(v.as_int()),
                        UnKind::C2I { sign: true } => {
                            let c = v.as_char();
                            if c >= 0x8000 {
                                self.fired.insert(FaultKind::CharWidenSign);
                            }
                            Value::Int(c as i16 as i32)
                        }
                        UnKind::I2C => Value::Char(ops::i2c(v.as_int())),
                        UnKind::I2D => Value::Double(v.as_int() as f64),
                        UnKind::D2I => Value::Int(ops::d2i(v.as_double())),
                        UnKind::D2C => Value::Char(ops::d2c(v.as_double())),
                    };
                }
                Inst::BoundsCheck { arr, idx } => {
                    let i = r!(idx).as_int();
                    if i < 0 || i as usize >= run.st.heap.array(r!(arr)).len() {
                        return Err(trap(TrapKind::IndexOutOfBounds));
                    }
                }
                Inst::NullCheck { obj } => {
                    if r!(obj) == Value::Null {
                        return Err(trap(TrapKind::NullDeref));
                    }
                }
                Inst::Load { dst, arr, idx, dropped } => {
                    let a = run.st.heap.array(r!(arr));
                    let i = r!(idx).as_int();
                    r!(dst) = if i >= 0 && (i as usize) < a.len() {
                        a.get(i as usize)
                    } else {
                        if *dropped {
                            self.fired.insert(FaultKind::BceOveraggressive);
                        }
                        a.default_value()
                    };
                }
                Inst::Store { arr, idx, val, dropped } => {
                    let v = r!(val);
                    let a = run.st.heap.array_mut(r!(arr));
                    let i = r!(idx).as_int();
                    if i >= 0 && (i as usize) < a.len() {
                        a.set(i as usize, v);
                    } else if *dropped {
                        self.fired.insert(FaultKind::BceOveraggressive);
                    }
                }
                Inst::Len { dst, arr } => r!(dst) = Value::Int(run.st.heap.array(r!(arr)).len() as i32),
                Inst::NewArray { dst, elem, len } => {
                    r!(dst) = run.st.heap.new_array(*elem, r!(len).as_int(), heap_limit)?;
                }
                Inst::ArrayLit { dst, elem, elems } => {
                    let mut data = ArrayData::new(*elem, elems.len());
                    for (i, e) in elems.iter().enumerate() {
                        data.set(i, r!(e));
                    }
                    r!(dst) = run.st.heap.new_array_from(data, heap_limit)?;
                }
                Inst::NewRecord { dst, rec } => r!(dst) = run.st.heap.new_record(self.prog, *rec, heap_limit)?,
                Inst::GetField { dst, obj, field } => {
                    let Value::Record(o) = r!(obj) else { return Err(trap(TrapKind::NullDeref)) };
                    r!(dst) = run.st.heap.fields(o)[*field];
                }
                Inst::SetField { obj, field, val } => {
                    let Value::Record(o) = r!(obj) else { return Err(trap(TrapKind::NullDeref)) };
                    run.st.heap.fields_mut(o)[*field] = r!(val);
                }
                Inst::GetGlobal { dst, global } => r!(dst) = run.st.globals[*global],
                Inst::SetGlobal { global, src } => run.st.globals[*global] = r!(src),
                Inst::Call { dst, func, args } => {
                    let vals = args.iter().map(|a| r!(a)).collect();
                    let v = self.invoke(*func, vals, run)?;
                    if let Some(d) = dst {
                        r!(d) = v;
                    }
                }
                Inst::NanoTime { dst } => r!(dst) = Value::Int(nanotime()),
                Inst::Unfilled { id, .. } => return Err(Stop::Trap(TrapKind::UnfilledHole, Some(*id))),
                Inst::Tick => run.fuel.tick()?,
                Inst::Clobber { dst, src } => {
                    if !r!(dst).same(&r!(src)) {
                        self.fired.insert(FaultKind::FremClobber);
                    }
                    r!(dst) = r!(src);
                }
                Inst::ForcedEntry => {
                    self.fired.insert(FaultKind::LoopcondForce);
                }
                Inst::Jump { target } => pc = *target,
                Inst::Branch { cond, t, f } => pc = if r!(cond).as_bool() { *t } else { *f },
                Inst::Ret { src } => return Ok(src.map_or(Value::Unit, |s| regs[s as usize])),
            }
        }
    }
}
