//! Optimization passes over the CFG.

use super::ir::*;
use crate::lang::F64;
use crate::runtime::ops;
use std::collections::{HashMap, HashSet};

fn fold_bin(op: BinKind, a: Const, b: Const) -> Option<Const> {
    use BinKind::*;
    let int = |c: Const| match c {
        Const::Int(v) => Some(v),
        _ => None,
    };
    let dbl = |c: Const| match c {
        Const::Double(v) => Some(v.get()),
        _ => None,
    };
    let cmp = |c: Cmp, o: std::cmp::Ordering| match c {
        Cmp::Lt => o.is_lt(),
        Cmp::Le => o.is_le(),
        Cmp::Gt => o.is_gt(),
        Cmp::Ge => o.is_ge(),
        Cmp::Eq => o.is_eq(),
        Cmp::Ne => o.is_ne(),
    };
    Some(match op {
        IAdd => Const::Int(int(a)?.wrapping_add(int(b)?)),
        ISub => Const::Int(int(a)?.wrapping_sub(int(b)?)),
        IMul => Const::Int(int(a)?.wrapping_mul(int(b)?)),
        IDiv => Const::Int(ops::idiv(int(a)?, int(b)?).ok()?),
        IRem => Const::Int(ops::irem(int(a)?, int(b)?).ok()?),
        IShl => Const::Int(ops::shl(int(a)?, int(b)?)),
        IShr => Const::Int(ops::shr(int(a)?, int(b)?)),
        IUShr => Const::Int(ops::ushr(int(a)?, int(b)?)),
        DAdd => Const::Double(F64::new(dbl(a)? + dbl(b)?)),
        DSub => Const::Double(F64::new(dbl(a)? - dbl(b)?)),
        DMul => Const::Double(F64::new(dbl(a)? * dbl(b)?)),
        DDiv => Const::Double(F64::new(dbl(a)? / dbl(b)?)),
        DRem => Const::Double(F64::new(ops::drem(dbl(a)?, dbl(b)?))),
        ICmp(c) => Const::Bool(cmp(c, int(a)?.cmp(&int(b)?))),
        DCmp(c) => {
            let (x, y) = (dbl(a)?, dbl(b)?);
            Const::Bool(match x.partial_cmp(&y) {
                Some(o) => cmp(c, o),
                None => c == Cmp::Ne,
            })
        }
        BEq | BNe => match (a, b) {
            (Const::Bool(x), Const::Bool(y)) => Const::Bool((x == y) == (op == BEq)),
            _ => return None,
        },
        REq | RNe => match (a, b) {
            (Const::Null, Const::Null) => Const::Bool(op == REq),
            _ => return None,
        },
    })
}

fn fold_un(op: UnKind, a: Const) -> Option<Const> {
    Some(match (op, a) {
        (UnKind::INeg, Const::Int(v)) => Const::Int(v.wrapping_neg()),
        (UnKind::DNeg, Const::Double(v)) => Const::Double(F64::new(-v.get())),
        (UnKind::Not, Const::Bool(b)) => Const::Bool(!b),
        (UnKind::BitNot, Const::Int(v)) => Const::Int(!v),
        (UnKind::C2I { sign: false }, Const::Char(c)) => Const::Int(c as i32),
        (UnKind::I2C, Const::Int(v)) => Const::Char(ops::i2c(v)),
        (UnKind::I2D, Const::Int(v)) => Const::Double(F64::new(v as f64)),
        (UnKind::D2I, Const::Double(v)) => Const::Int(ops::d2i(v.get())),
        (UnKind::D2C, Const::Double(v)) => Const::Char(ops::d2c(v.get())),
        _ => return None,
    })
}

/// Block-local constant folding, constant value numbering and copy
/// propagation. Division by a zero constant is never folded.
pub fn local_fold(f: &mut CfgFunc) -> bool {
    let mut changed = false;
    for b in &mut f.blocks {
        let mut consts: HashMap<Reg, Const> = HashMap::new();
        let mut copies: HashMap<Reg, Reg> = HashMap::new();
        for inst in &mut b.insts {
            for u in inst.uses_mut() {
                if let Some(&s) = copies.get(u) {
                    *u = s;
                    changed = true;
                }
            }
            let folded = match inst {
                Inst::Bin { op, a, b, .. } => match (consts.get(a), consts.get(b)) {
                    (Some(&x), Some(&y)) => fold_bin(*op, x, y),
                    _ => None,
                },
                Inst::Un { op, a, .. } => consts.get(a).and_then(|&x| fold_un(*op, x)),
                _ => None,
            };
            if let Some(val) = folded {
                let dst = inst.dst().expect("folded instruction defines a register");
                *inst = Inst::Const { dst, val };
                changed = true;
            }
            if let Inst::Branch { cond, t, f } = inst {
                if let Some(Const::Bool(c)) = consts.get(cond) {
                    *inst = Inst::Jump { target: if *c { *t } else { *f } };
                    changed = true;
                }
            }
            // Reuse a register already holding the same constant.
            if let Inst::Const { dst, val } = inst {
                let d = *dst;
                let v = *val;
                if let Some((&src, _)) = consts.iter().filter(|(r, c)| **r != d && **c == v).min_by_key(|(r, _)| **r) {
                    *inst = Inst::Move { dst: d, src };
                    changed = true;
                }
            }
            if let Some(d) = inst.dst() {
                consts.remove(&d);
                copies.remove(&d);
                copies.retain(|_, s| *s != d);
                match inst {
                    Inst::Const { val, .. } => {
                        consts.insert(d, *val);
                    }
                    Inst::Move { src, .. } if *src != d => {
                        if let Some(c) = consts.get(src).copied() {
                            consts.insert(d, c);
                        }
                        copies.insert(d, *src);
                    }
                    _ => {}
                }
            }
        }
    }
    changed
}

/// Live-register analysis; returns live-out sets per block.
fn liveness(f: &CfgFunc, reach: &[bool]) -> Vec<HashSet<Reg>> {
    let n = f.blocks.len();
    let mut live_in: Vec<HashSet<Reg>> = vec![HashSet::new(); n];
    let mut live_out: Vec<HashSet<Reg>> = vec![HashSet::new(); n];
    let mut changed = true;
    while changed {
        changed = false;
        for bi in (0..n).rev() {
            if !reach[bi] {
                continue;
            }
            let mut out = HashSet::new();
            for s in f.blocks[bi].term().successors() {
                out.extend(live_in[s].iter().copied());
            }
            let mut live = out.clone();
            for inst in f.blocks[bi].insts.iter().rev() {
                if let Some(d) = inst.dst() {
                    live.remove(&d);
                }
                live.extend(inst.uses());
            }
            if live != live_in[bi] || out != live_out[bi] {
                live_in[bi] = live;
                live_out[bi] = out;
                changed = true;
            }
        }
    }
    live_out
}

/// Removes removable instructions whose results are never read.
pub fn dce(f: &mut CfgFunc) -> bool {
    let reach = f.reachable();
    let live_out = liveness(f, &reach);
    let mut changed = false;
    for (bi, b) in f.blocks.iter_mut().enumerate() {
        if !reach[bi] {
            if b.insts.len() > 1 {
                let term = b.insts.pop().expect("terminator");
                b.insts = vec![term];
                changed = true;
            }
            continue;
        }
        let mut live = live_out[bi].clone();
        let mut keep = vec![true; b.insts.len()];
        for (i, inst) in b.insts.iter().enumerate().rev() {
            let dead = inst.is_removable() && inst.dst().is_some_and(|d| !live.contains(&d));
            if dead {
                keep[i] = false;
                changed = true;
                continue;
            }
            if let Some(d) = inst.dst() {
                live.remove(&d);
            }
            live.extend(inst.uses());
        }
        let mut k = keep.into_iter();
        b.insts.retain(|_| k.next().unwrap());
    }
    changed
}

/// Jumps to blocks that only jump elsewhere are redirected.
pub fn thread_jumps(f: &mut CfgFunc) -> bool {
    let mut changed = false;
    let fwd: Vec<Option<usize>> = f
        .blocks
        .iter()
        .map(|b| match b.insts.as_slice() {
            [Inst::Jump { target }] => Some(*target),
            _ => None,
        })
        .collect();
    let resolve = |mut t: usize| {
        let mut hops = 0;
        while let Some(n) = fwd[t] {
            if n == t || hops > fwd.len() {
                break;
            }
            t = n;
            hops += 1;
        }
        t
    };
    for b in &mut f.blocks {
        for t in b.term_mut().successors_mut() {
            let r = resolve(*t);
            if r != *t {
                *t = r;
                changed = true;
            }
        }
    }
    changed
}

/// The L1 pipeline, run to a fixpoint.
pub fn optimize_l1(f: &mut CfgFunc) {
    for _ in 0..8 {
        let mut changed = local_fold(f);
        changed |= thread_jumps(f);
        changed |= dce(f);
        if !changed {
            break;
        }
    }
}

fn pow2(c: Const) -> Option<u32> {
    match c {
        Const::Int(v) if v > 1 && (v & (v - 1)) == 0 => Some(v.trailing_zeros()),
        _ => None,
    }
}

/// Replaces `*`, `/` and `%` by a constant power of two with shifts.
pub fn strength_reduce(f: &mut CfgFunc) -> bool {
    let mut changed = false;
    let mut nregs = f.nregs;
    for b in &mut f.blocks {
        let mut consts: HashMap<Reg, Const> = HashMap::new();
        let mut out = Vec::with_capacity(b.insts.len());
        for inst in b.insts.drain(..) {
            let mut fresh = || {
                nregs += 1;
                nregs - 1
            };
            let replaced = match &inst {
                Inst::Bin { dst, op: BinKind::IMul, a, b } => {
                    let (x, k) = match (consts.get(a).copied().and_then(pow2), consts.get(b).copied().and_then(pow2)) {
                        (_, Some(k)) => (*a, k),
                        (Some(k), None) => (*b, k),
                        _ => (0, 0),
                    };
                    (k > 0).then(|| {
                        let kr = fresh();
                        vec![
                            Inst::Const { dst: kr, val: Const::Int(k as i32) },
                            Inst::Bin { dst: *dst, op: BinKind::IShl, a: x, b: kr },
                        ]
                    })
                }
                Inst::Bin { dst, op: op @ (BinKind::IDiv | BinKind::IRem), a, b } => {
                    consts.get(b).copied().and_then(pow2).map(|k| {
                        let (c31, cshift, ck, t1, t2, t3) = (fresh(), fresh(), fresh(), fresh(), fresh(), fresh());
                        let mut v = vec![
                            Inst::Const { dst: c31, val: Const::Int(31) },
                            Inst::Const { dst: cshift, val: Const::Int(32 - k as i32) },
                            Inst::Const { dst: ck, val: Const::Int(k as i32) },
                            Inst::Bin { dst: t1, op: BinKind::IShr, a: *a, b: c31 },
                            Inst::Bin { dst: t2, op: BinKind::IUShr, a: t1, b: cshift },
                            Inst::Bin { dst: t3, op: BinKind::IAdd, a: *a, b: t2 },
                        ];
                        if *op == BinKind::IDiv {
                            v.push(Inst::Bin { dst: *dst, op: BinKind::IShr, a: t3, b: ck });
                        } else {
                            let (q, m) = (fresh(), fresh());
                            v.push(Inst::Bin { dst: q, op: BinKind::IShr, a: t3, b: ck });
                            v.push(Inst::Bin { dst: m, op: BinKind::IShl, a: q, b: ck });
                            v.push(Inst::Bin { dst: *dst, op: BinKind::ISub, a: *a, b: m });
                        }
                        v
                    })
                }
                _ => None,
            };
            let seq = match replaced {
                Some(seq) => {
                    changed = true;
                    seq
                }
                None => vec![inst],
            };
            for i in seq {
                if let Some(d) = i.dst() {
                    consts.remove(&d);
                    if let Inst::Const { val, .. } = &i {
                        consts.insert(d, *val);
                    }
                }
                out.push(i);
            }
        }
        b.insts = out;
    }
    f.nregs = nregs;
    changed
}

/// Immediate dominators over reachable blocks (iterative data-flow).
fn dominators(f: &CfgFunc, reach: &[bool], preds: &[Vec<usize>]) -> Vec<HashSet<usize>> {
    let n = f.blocks.len();
    let all: HashSet<usize> = (0..n).filter(|&i| reach[i]).collect();
    let mut dom: Vec<HashSet<usize>> = (0..n).map(|i| if i == 0 { [0].into() } else { all.clone() }).collect();
    let mut changed = true;
    while changed {
        changed = false;
        for b in 1..n {
            if !reach[b] {
                continue;
            }
            let mut new: Option<HashSet<usize>> = None;
            for &p in &preds[b] {
                new = Some(match new {
                    None => dom[p].clone(),
                    Some(s) => s.intersection(&dom[p]).copied().collect(),
                });
            }
            let mut new = new.unwrap_or_default();
            new.insert(b);
            if new != dom[b] {
                dom[b] = new;
                changed = true;
            }
        }
    }
    dom
}

fn hoistable(inst: &Inst) -> bool {
    match inst {
        Inst::Const { .. } | Inst::Move { .. } | Inst::Len { .. } => true,
        Inst::Bin { op, .. } => !op.may_trap(),
        Inst::Un { op, .. } => !matches!(op, UnKind::C2I { sign: true }),
        _ => false,
    }
}

/// Loop-invariant code motion of pure, non-trapping, single-definition
/// instructions into a fresh preheader.
pub fn licm(f: &mut CfgFunc) -> bool {
    let reach = f.reachable();
    let preds = f.predecessors();
    let dom = dominators(f, &reach, &preds);
    let mut headers: Vec<(usize, HashSet<usize>)> = Vec::new();
    for (t, b) in f.blocks.iter().enumerate() {
        if !reach[t] {
            continue;
        }
        for h in b.term().successors() {
            if dom[t].contains(&h) {
                // Natural loop of back edge t -> h.
                let mut body: HashSet<usize> = [h].into();
                let mut stack = vec![t];
                while let Some(x) = stack.pop() {
                    if body.insert(x) {
                        stack.extend(preds[x].iter().copied());
                    }
                }
                match headers.iter_mut().find(|(hh, _)| *hh == h) {
                    Some((_, s)) => s.extend(body),
                    None => headers.push((h, body)),
                }
            }
        }
    }
    let mut defs: HashMap<Reg, usize> = HashMap::new();
    for (bi, b) in f.blocks.iter().enumerate() {
        if reach[bi] {
            for i in &b.insts {
                if let Some(d) = i.dst() {
                    *defs.entry(d).or_default() += 1;
                }
            }
        }
    }
    for r in 0..f.nparams {
        *defs.entry(r).or_default() += 1;
    }
    let mut changed = false;
    for (h, body) in headers {
        let mut defined_in_loop: HashSet<Reg> = HashSet::new();
        for &bi in &body {
            for i in &f.blocks[bi].insts {
                if let Some(d) = i.dst() {
                    defined_in_loop.insert(d);
                }
            }
        }
        // The entry block has no room for a preheader in front of it.
        if h == 0 {
            continue;
        }
        let mut hoisted = Vec::new();
        let blk = &mut f.blocks[h];
        let mut i = 0;
        while i + 1 < blk.insts.len() {
            let inst = &blk.insts[i];
            let movable = hoistable(inst)
                && inst.dst().is_some_and(|d| defs.get(&d) == Some(&1))
                && inst.uses().iter().all(|u| !defined_in_loop.contains(u));
            if movable {
                let inst = blk.insts.remove(i);
                defined_in_loop.remove(&inst.dst().unwrap());
                hoisted.push(inst);
            } else {
                i += 1;
            }
        }
        if hoisted.is_empty() {
            continue;
        }
        changed = true;
        hoisted.push(Inst::Jump { target: h });
        f.blocks.push(Block { insts: hoisted });
        let pre = f.blocks.len() - 1;
        for &p in &preds[h] {
            if !body.contains(&p) {
                for t in f.blocks[p].term_mut().successors_mut() {
                    if *t == h {
                        *t = pre;
                    }
                }
            }
        }
    }
    changed
}

/// The faulty floating remainder: after each `drem`, the most recently
/// defined double register in the block that is not an operand receives the
/// result as well.
pub fn inject_frem_clobber(f: &mut CfgFunc, double_regs: &HashSet<Reg>) {
    for b in &mut f.blocks {
        let mut out = Vec::with_capacity(b.insts.len());
        let mut recent: Vec<Reg> = Vec::new();
        for inst in b.insts.drain(..) {
            let clobber = match &inst {
                Inst::Bin { dst, op: BinKind::DRem, a, b } => {
                    recent.iter().rev().find(|r| **r != *a && **r != *b && **r != *dst).map(|&victim| Inst::Clobber { dst: victim, src: *dst })
                }
                _ => None,
            };
            if let Some(d) = inst.dst() {
                if double_regs.contains(&d) {
                    recent.push(d);
                }
            }
            out.push(inst);
            if let Some(c) = clobber {
                out.push(c);
            }
        }
        b.insts = out;
    }
}

/// Registers that hold doubles, inferred from defining instructions.
pub fn double_registers(f: &CfgFunc, param_doubles: &[Reg]) -> HashSet<Reg> {
    let mut out: HashSet<Reg> = param_doubles.iter().copied().collect();
    let mut changed = true;
    while changed {
        changed = false;
        for b in &f.blocks {
            for i in &b.insts {
                let is_double = match i {
                    Inst::Const { val: Const::Double(_), .. } => true,
                    Inst::Bin { op, .. } => op.defines_double(),
                    Inst::Un { op: UnKind::DNeg | UnKind::I2D, .. } => true,
                    Inst::Move { src, .. } => out.contains(src),
                    _ => false,
                };
                if is_double && out.insert(i.dst().unwrap()) {
                    changed = true;
                }
            }
        }
    }
    out
}
