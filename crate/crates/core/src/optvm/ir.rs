//! Register bytecode. Functions are first built as a CFG of basic blocks,
//! optimized, then linearized (block targets become instruction indices).

use crate::lang::{ElemType, F64};

pub type Reg = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Const {
    Int(i32),
    Double(F64),
    Bool(bool),
    Char(u16),
    Null,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BinKind {
    IAdd,
    ISub,
    IMul,
    IDiv,
    IRem,
    IShl,
    IShr,
    IUShr,
    DAdd,
    DSub,
    DMul,
    DDiv,
    DRem,
    ICmp(Cmp),
    DCmp(Cmp),
    BEq,
    BNe,
    REq,
    RNe,
}

impl BinKind {
    pub fn may_trap(self) -> bool {
        matches!(self, BinKind::IDiv | BinKind::IRem)
    }

    pub fn defines_double(self) -> bool {
        matches!(self, BinKind::DAdd | BinKind::DSub | BinKind::DMul | BinKind::DDiv | BinKind::DRem)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UnKind {
    INeg,
    DNeg,
    Not,
    BitNot,
    /// Char to int. `sign` is the faulty sign-extending variant.
    C2I { sign: bool },
    I2C,
    I2D,
    D2I,
    D2C,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Inst {
    Const { dst: Reg, val: Const },
    Move { dst: Reg, src: Reg },
    Bin { dst: Reg, op: BinKind, a: Reg, b: Reg },
    Un { dst: Reg, op: UnKind, a: Reg },
    BoundsCheck { arr: Reg, idx: Reg },
    NullCheck { obj: Reg },
    /// Unchecked array read: out of range yields the element default.
    /// `dropped` marks a check removed by the faulty bounds-check pass.
    Load { dst: Reg, arr: Reg, idx: Reg, dropped: bool },
    /// Unchecked array write: out of range is ignored.
    Store { arr: Reg, idx: Reg, val: Reg, dropped: bool },
    Len { dst: Reg, arr: Reg },
    NewArray { dst: Reg, elem: ElemType, len: Reg },
    ArrayLit { dst: Reg, elem: ElemType, elems: Vec<Reg> },
    NewRecord { dst: Reg, rec: usize },
    GetField { dst: Reg, obj: Reg, field: usize },
    SetField { obj: Reg, field: usize, val: Reg },
    GetGlobal { dst: Reg, global: usize },
    SetGlobal { global: usize, src: Reg },
    Call { dst: Option<Reg>, func: usize, args: Vec<Reg> },
    NanoTime { dst: Reg },
    /// Reaching an undecided hole. `dst` is nominal.
    Unfilled { dst: Reg, id: u32 },
    /// One unit of loop fuel.
    Tick,
    /// Write injected by the faulty floating-remainder lowering.
    Clobber { dst: Reg, src: Reg },
    /// Marks a loop entered without evaluating its guard.
    ForcedEntry,
    Jump { target: usize },
    Branch { cond: Reg, t: usize, f: usize },
    Ret { src: Option<Reg> },
}

impl Inst {
    pub fn is_terminator(&self) -> bool {
        matches!(self, Inst::Jump { .. } | Inst::Branch { .. } | Inst::Ret { .. })
    }

    pub fn dst(&self) -> Option<Reg> {
        match self {
            Inst::Const { dst, .. }
            | Inst::Move { dst, .. }
            | Inst::Bin { dst, .. }
            | Inst::Un { dst, .. }
            | Inst::Load { dst, .. }
            | Inst::Len { dst, .. }
            | Inst::NewArray { dst, .. }
            | Inst::ArrayLit { dst, .. }
            | Inst::NewRecord { dst, .. }
            | Inst::GetField { dst, .. }
            | Inst::GetGlobal { dst, .. }
            | Inst::NanoTime { dst }
            | Inst::Unfilled { dst, .. }
            | Inst::Clobber { dst, .. } => Some(*dst),
            Inst::Call { dst, .. } => *dst,
            _ => None,
        }
    }

    pub fn uses(&self) -> Vec<Reg> {
        match self {
            Inst::Move { src, .. } | Inst::Clobber { src, .. } => vec![*src],
            Inst::Bin { a, b, .. } => vec![*a, *b],
            Inst::Un { a, .. } => vec![*a],
            Inst::BoundsCheck { arr, idx } | Inst::Load { arr, idx, .. } => vec![*arr, *idx],
            Inst::Store { arr, idx, val, .. } => vec![*arr, *idx, *val],
            Inst::NullCheck { obj } | Inst::GetField { obj, .. } => vec![*obj],
            Inst::Len { arr, .. } => vec![*arr],
            Inst::NewArray { len, .. } => vec![*len],
            Inst::ArrayLit { elems, .. } => elems.clone(),
            Inst::SetField { obj, val, .. } => vec![*obj, *val],
            Inst::SetGlobal { src, .. } => vec![*src],
            Inst::Call { args, .. } => args.clone(),
            Inst::Branch { cond, .. } => vec![*cond],
            Inst::Ret { src } => src.iter().copied().collect(),
            _ => vec![],
        }
    }

    pub fn uses_mut(&mut self) -> Vec<&mut Reg> {
        match self {
            Inst::Move { src, .. } | Inst::Clobber { src, .. } => vec![src],
            Inst::Bin { a, b, .. } => vec![a, b],
            Inst::Un { a, .. } => vec![a],
            Inst::BoundsCheck { arr, idx } | Inst::Load { arr, idx, .. } => vec![arr, idx],
            Inst::Store { arr, idx, val, .. } => vec![arr, idx, val],
            Inst::NullCheck { obj } | Inst::GetField { obj, .. } => vec![obj],
            Inst::Len { arr, .. } => vec![arr],
            Inst::NewArray { len, .. } => vec![len],
            Inst::ArrayLit { elems, .. } => elems.iter_mut().collect(),
            Inst::SetField { obj, val, .. } => vec![obj, val],
            Inst::SetGlobal { src, .. } => vec![src],
            Inst::Call { args, .. } => args.iter_mut().collect(),
            Inst::Branch { cond, .. } => vec![cond],
            Inst::Ret { src } => src.iter_mut().collect(),
            _ => vec![],
        }
    }

    /// Pure and unable to trap: removable when its result is unused.
    pub fn is_removable(&self) -> bool {
        match self {
            Inst::Const { .. } | Inst::Move { .. } | Inst::Len { .. } | Inst::GetField { .. } | Inst::GetGlobal { .. } => true,
            Inst::Load { dropped, .. } => !dropped,
            Inst::Bin { op, .. } => !op.may_trap(),
            Inst::Un { op, .. } => !matches!(op, UnKind::C2I { sign: true }),
            Inst::NanoTime { .. } => true,
            _ => false,
        }
    }

    pub fn successors(&self) -> Vec<usize> {
        match self {
            Inst::Jump { target } => vec![*target],
            Inst::Branch { t, f, .. } => vec![*t, *f],
            _ => vec![],
        }
    }

    pub fn successors_mut(&mut self) -> Vec<&mut usize> {
        match self {
            Inst::Jump { target } => vec![target],
            Inst::Branch { t, f, .. } => vec![t, f],
            _ => vec![],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Block {
    /// Ends with exactly one terminator.
    pub insts: Vec<Inst>,
}

impl Block {
    pub fn term(&self) -> &Inst {
        self.insts.last().expect("terminated block")
    }

    pub fn term_mut(&mut self) -> &mut Inst {
        self.insts.last_mut().expect("terminated block")
    }

    pub fn body(&self) -> &[Inst] {
        &self.insts[..self.insts.len() - 1]
    }
}

/// A function under construction or optimization.
#[derive(Clone, Debug, PartialEq)]
pub struct CfgFunc {
    pub name: String,
    pub nparams: u32,
    pub nregs: u32,
    pub blocks: Vec<Block>,
}

impl CfgFunc {
    pub fn fresh(&mut self) -> Reg {
        self.nregs += 1;
        self.nregs - 1
    }

    /// Blocks reachable from the entry, in index order.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.blocks.len()];
        let mut stack = vec![0];
        while let Some(b) = stack.pop() {
            if seen[b] {
                continue;
            }
            seen[b] = true;
            stack.extend(self.blocks[b].term().successors());
        }
        seen
    }

    pub fn predecessors(&self) -> Vec<Vec<usize>> {
        let reach = self.reachable();
        let mut preds = vec![Vec::new(); self.blocks.len()];
        for (i, b) in self.blocks.iter().enumerate() {
            if reach[i] {
                for s in b.term().successors() {
                    preds[s].push(i);
                }
            }
        }
        preds
    }

    /// Flattens reachable blocks into one instruction list. Jumps to the
    /// next instruction are kept so block structure stays visible.
    pub fn linearize(&self) -> Func {
        let reach = self.reachable();
        let mut start = vec![usize::MAX; self.blocks.len()];
        let mut pc = 0;
        for (i, b) in self.blocks.iter().enumerate() {
            if reach[i] {
                start[i] = pc;
                pc += b.insts.len();
            }
        }
        let mut code = Vec::with_capacity(pc);
        for (i, b) in self.blocks.iter().enumerate() {
            if !reach[i] {
                continue;
            }
            for inst in &b.insts {
                let mut inst = inst.clone();
                for t in inst.successors_mut() {
                    *t = start[*t];
                }
                code.push(inst);
            }
        }
        Func { name: self.name.clone(), nparams: self.nparams, nregs: self.nregs, code }
    }
}

/// A linearized function.
#[derive(Clone, Debug, PartialEq)]
pub struct Func {
    pub name: String,
    pub nparams: u32,
    pub nregs: u32,
    pub code: Vec<Inst>,
}
