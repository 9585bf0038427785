//! Runtime value model shared by the interpreter and the VM.

use crate::lang::{ElemType, Program, Type};
use serde::{Deserialize, Serialize};
use std::time::{Duration, Instant};

/// Index of a heap object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Ref(pub u32);

#[derive(Clone, Copy, Debug)]
pub enum Value {
    Int(i32),
    Double(f64),
    Bool(bool),
    Char(u16),
    Array(Ref),
    Record(Ref),
    Null,
    Unit,
}

impl Value {
    /// Identity/bit equality, as used by tests comparing outcomes.
    pub fn same(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Double(a), Value::Double(b)) => a.to_bits() == b.to_bits(),
            (Value::Int(a), Value::Int(b)) => a == b,
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Char(a), Value::Char(b)) => a == b,
            (Value::Array(a), Value::Array(b)) | (Value::Record(a), Value::Record(b)) => a == b,
            (Value::Null, Value::Null) | (Value::Unit, Value::Unit) => true,
            _ => false,
        }
    }

    pub fn as_int(self) -> i32 {
        match self {
            Value::Int(v) => v,
            Value::Char(c) => c as i32,
            other => panic!("expected int, found {other:?}"),
        }
    }

    pub fn as_double(self) -> f64 {
        match self {
            Value::Double(v) => v,
            other => panic!("expected double, found {other:?}"),
        }
    }

    pub fn as_bool(self) -> bool {
        match self {
            Value::Bool(v) => v,
            other => panic!("expected bool, found {other:?}"),
        }
    }

    pub fn as_char(self) -> u16 {
        match self {
            Value::Char(v) => v,
            other => panic!("expected char, found {other:?}"),
        }
    }

    /// Default (zero) value of a non-array type. Arrays need the heap.
    pub fn zero_of(ty: &Type) -> Value {
        match ty {
            Type::Int => Value::Int(0),
            Type::Double => Value::Double(0.0),
            Type::Bool => Value::Bool(false),
            Type::Char => Value::Char(0),
            Type::Record(_) | Type::Null => Value::Null,
            Type::Unit => Value::Unit,
            Type::Array(_) => panic!("array defaults are heap-allocated"),
        }
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        self.same(other)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrayData {
    Int(Vec<i32>),
    Double(Vec<f64>),
    Char(Vec<u16>),
}

impl ArrayData {
    pub fn new(elem: ElemType, len: usize) -> ArrayData {
        match elem {
            ElemType::Int => ArrayData::Int(vec![0; len]),
            ElemType::Double => ArrayData::Double(vec![0.0; len]),
            ElemType::Char => ArrayData::Char(vec![0; len]),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ArrayData::Int(v) => v.len(),
            ArrayData::Double(v) => v.len(),
            ArrayData::Char(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Value {
        match self {
            ArrayData::Int(v) => Value::Int(v[i]),
            ArrayData::Double(v) => Value::Double(v[i]),
            ArrayData::Char(v) => Value::Char(v[i]),
        }
    }

    pub fn set(&mut self, i: usize, val: Value) {
        match (self, val) {
            (ArrayData::Int(v), Value::Int(x)) => v[i] = x,
            (ArrayData::Double(v), Value::Double(x)) => v[i] = x,
            (ArrayData::Char(v), Value::Char(x)) => v[i] = x,
            (_, val) => panic!("array store of mismatched value {val:?}"),
        }
    }

    pub fn default_value(&self) -> Value {
        match self {
            ArrayData::Int(_) => Value::Int(0),
            ArrayData::Double(_) => Value::Double(0.0),
            ArrayData::Char(_) => Value::Char(0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum HeapObj {
    Array(ArrayData),
    /// `rec` indexes `Program::records`.
    Record { rec: usize, fields: Vec<Value> },
}

#[derive(Clone, Debug, Default)]
pub struct Heap {
    objs: Vec<HeapObj>,
    /// Cells allocated so far: arrays cost len+1, records fields+1.
    pub cells: u64,
}

impl Heap {
    pub fn get(&self, r: Ref) -> &HeapObj {
        &self.objs[r.0 as usize]
    }

    pub fn get_mut(&mut self, r: Ref) -> &mut HeapObj {
        &mut self.objs[r.0 as usize]
    }

    pub fn len(&self) -> usize {
        self.objs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objs.is_empty()
    }

    fn charge(&mut self, cells: u64, limit: u64) -> Result<(), Limit> {
        self.cells = self.cells.saturating_add(cells);
        if self.cells > limit {
            Err(Limit::Heap)
        } else {
            Ok(())
        }
    }

    fn push(&mut self, o: HeapObj) -> Ref {
        self.objs.push(o);
        Ref((self.objs.len() - 1) as u32)
    }

    /// Allocates a zeroed array. A negative length traps.
    pub fn new_array(&mut self, elem: ElemType, len: i32, limit: u64) -> Result<Value, Stop> {
        if len < 0 {
            return Err(Stop::Trap(TrapKind::IndexOutOfBounds, None));
        }
        self.charge(len as u64 + 1, limit).map_err(Stop::Exhausted)?;
        Ok(Value::Array(self.push(HeapObj::Array(ArrayData::new(elem, len as usize)))))
    }

    pub fn new_array_from(&mut self, data: ArrayData, limit: u64) -> Result<Value, Stop> {
        self.charge(data.len() as u64 + 1, limit).map_err(Stop::Exhausted)?;
        Ok(Value::Array(self.push(HeapObj::Array(data))))
    }

    /// Allocates a record with default-initialized fields; array fields get
    /// fresh empty arrays (allocated after the record itself).
    pub fn new_record(&mut self, prog: &Program, rec: usize, limit: u64) -> Result<Value, Stop> {
        let decl = &prog.records[rec];
        self.charge(decl.fields.len() as u64 + 1, limit).map_err(Stop::Exhausted)?;
        let r = self.push(HeapObj::Record { rec, fields: Vec::new() });
        let mut fields = Vec::with_capacity(decl.fields.len());
        for f in &decl.fields {
            fields.push(match &f.ty {
                Type::Array(e) => self.new_array(*e, 0, limit)?,
                t => Value::zero_of(t),
            });
        }
        if let HeapObj::Record { fields: slot, .. } = self.get_mut(r) {
            *slot = fields;
        }
        Ok(Value::Record(r))
    }

    pub fn array(&self, v: Value) -> &ArrayData {
        match v {
            Value::Array(r) => match self.get(r) {
                HeapObj::Array(a) => a,
                _ => panic!("not an array"),
            },
            other => panic!("expected array, found {other:?}"),
        }
    }

    pub fn array_mut(&mut self, v: Value) -> &mut ArrayData {
        match v {
            Value::Array(r) => match self.get_mut(r) {
                HeapObj::Array(a) => a,
                _ => panic!("not an array"),
            },
            other => panic!("expected array, found {other:?}"),
        }
    }

    /// Field slice of a non-null record.
    pub fn fields(&self, r: Ref) -> &[Value] {
        match self.get(r) {
            HeapObj::Record { fields, .. } => fields,
            _ => panic!("not a record"),
        }
    }

    pub fn fields_mut(&mut self, r: Ref) -> &mut Vec<Value> {
        match self.get_mut(r) {
            HeapObj::Record { fields, .. } => fields,
            _ => panic!("not a record"),
        }
    }

    /// Bounds-checked array read.
    pub fn load(&self, arr: Value, idx: i32) -> Result<Value, Stop> {
        let a = self.array(arr);
        if idx < 0 || idx as usize >= a.len() {
            return Err(Stop::Trap(TrapKind::IndexOutOfBounds, None));
        }
        Ok(a.get(idx as usize))
    }

    pub fn store(&mut self, arr: Value, idx: i32, val: Value) -> Result<(), Stop> {
        let a = self.array_mut(arr);
        if idx < 0 || idx as usize >= a.len() {
            return Err(Stop::Trap(TrapKind::IndexOutOfBounds, None));
        }
        a.set(idx as usize, val);
        Ok(())
    }
}

/// Globals plus the heap they (and everything else) live in.
#[derive(Clone, Debug, Default)]
pub struct GlobalState {
    pub globals: Vec<Value>,
    pub heap: Heap,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TrapKind {
    DivByZero,
    IndexOutOfBounds,
    NullDeref,
    UnfilledHole,
}

impl TrapKind {
    pub fn name(self) -> &'static str {
        match self {
            TrapKind::DivByZero => "DivByZero",
            TrapKind::IndexOutOfBounds => "IndexOutOfBounds",
            TrapKind::NullDeref => "NullDeref",
            TrapKind::UnfilledHole => "UnfilledHole",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Limit {
    Steps,
    Heap,
    WallTime,
    Depth,
}

/// Why evaluation stopped early.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Stop {
    Trap(TrapKind, Option<u32>),
    Exhausted(Limit),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Outcome {
    Returned(Value),
    Trapped { kind: TrapKind, hole: Option<u32> },
    Exhausted(Limit),
}

impl Outcome {
    pub fn from_result(r: Result<Value, Stop>) -> Outcome {
        match r {
            Ok(v) => Outcome::Returned(v),
            Err(Stop::Trap(kind, hole)) => Outcome::Trapped { kind, hole },
            Err(Stop::Exhausted(l)) => Outcome::Exhausted(l),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExecLimits {
    /// Fuel: loop-body entries plus function calls, per top-level call.
    pub max_steps: u64,
    pub max_heap_cells: u64,
    pub wall_timeout: Duration,
    pub max_depth: u32,
}

impl Default for ExecLimits {
    fn default() -> Self {
        ExecLimits { max_steps: 10_000_000, max_heap_cells: 50_000_000, wall_timeout: Duration::from_secs(60), max_depth: 200 }
    }
}

/// Per-call fuel counter. Both backends tick it at the same points.
#[derive(Clone, Debug)]
pub struct Fuel {
    used: u64,
    max: u64,
    deadline: Instant,
}

impl Fuel {
    pub fn new(limits: &ExecLimits) -> Fuel {
        Fuel { used: 0, max: limits.max_steps, deadline: Instant::now() + limits.wall_timeout }
    }

    #[inline]
    pub fn tick(&mut self) -> Result<(), Stop> {
        self.used += 1;
        if self.used > self.max {
            return Err(Stop::Exhausted(Limit::Steps));
        }
        if self.used.is_multiple_of(4096) && Instant::now() > self.deadline {
            return Err(Stop::Exhausted(Limit::WallTime));
        }
        Ok(())
    }

    pub fn used(&self) -> u64 {
        self.used
    }
}

/// A 32-bit sample of the wall clock that differs between calls.
pub fn nanotime() -> i32 {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let t = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_nanos() as u64).unwrap_or(0);
    let c = COUNTER.fetch_add(1, Ordering::Relaxed);
    let mut x = t ^ c.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    x ^= x >> 29;
    x = x.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    (x ^ (x >> 32)) as i32
}

/// MiniJ arithmetic shared by both backends so their results agree bit for bit.
pub mod ops {
    use super::{Stop, TrapKind};

    pub fn idiv(a: i32, b: i32) -> Result<i32, Stop> {
        if b == 0 {
            Err(Stop::Trap(TrapKind::DivByZero, None))
        } else {
            Ok(a.wrapping_div(b))
        }
    }

    pub fn irem(a: i32, b: i32) -> Result<i32, Stop> {
        if b == 0 {
            Err(Stop::Trap(TrapKind::DivByZero, None))
        } else {
            Ok(a.wrapping_rem(b))
        }
    }

    pub fn shl(a: i32, b: i32) -> i32 {
        a.wrapping_shl(b as u32 & 31)
    }

    pub fn shr(a: i32, b: i32) -> i32 {
        a.wrapping_shr(b as u32 & 31)
    }

    pub fn ushr(a: i32, b: i32) -> i32 {
        ((a as u32) >> (b as u32 & 31)) as i32
    }

    /// Java `(int) d`: NaN to 0, saturating at the int range.
    pub fn d2i(d: f64) -> i32 {
        d as i32
    }

    pub fn i2c(i: i32) -> u16 {
        i as u16
    }

    pub fn d2c(d: f64) -> u16 {
        i2c(d2i(d))
    }

    /// Java `%` on doubles (fmod, sign of the dividend).
    pub fn drem(a: f64, b: f64) -> f64 {
        a % b
    }
}
