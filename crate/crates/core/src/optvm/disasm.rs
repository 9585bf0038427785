//! Textual listing of compiled functions.

use super::ir::*;
use std::fmt::Write;

fn konst(c: &Const) -> String {
    match c {
        Const::Int(v) => v.to_string(),
        Const::Double(d) => format!("{:?}", d.get()),
        Const::Bool(b) => b.to_string(),
        Const::Char(c) => format!("'\\u{c:04x}'"),
        Const::Null => "null".into(),
    }
}

pub fn inst(i: &Inst) -> String {
    match i {
        Inst::Const { dst, val } => format!("r{dst} = const {}", konst(val)),
        Inst::Move { dst, src } => format!("r{dst} = r{src}"),
        Inst::Bin { dst, op, a, b } => format!("r{dst} = {op:?} r{a}, r{b}"),
        Inst::Un { dst, op, a } => format!("r{dst} = {op:?} r{a}"),
        Inst::BoundsCheck { arr, idx } => format!("boundscheck r{arr}[r{idx}]"),
        Inst::NullCheck { obj } => format!("nullcheck r{obj}"),
        Inst::Load { dst, arr, idx, dropped } => {
            format!("r{dst} = load r{arr}[r{idx}]{}", if *dropped { " !unchecked" } else { "" })
        }
        Inst::Store { arr, idx, val, dropped } => {
            format!("store r{arr}[r{idx}] = r{val}{}", if *dropped { " !unchecked" } else { "" })
        }
        Inst::Len { dst, arr } => format!("r{dst} = len r{arr}"),
        Inst::NewArray { dst, elem, len } => format!("r{dst} = newarray {}[r{len}]", elem.as_type()),
        Inst::ArrayLit { dst, elem, elems } => format!("r{dst} = arraylit {} {}", elem.as_type(), regs(elems)),
        Inst::NewRecord { dst, rec } => format!("r{dst} = newrecord #{rec}"),
        Inst::GetField { dst, obj, field } => format!("r{dst} = r{obj}.{field}"),
        Inst::SetField { obj, field, val } => format!("r{obj}.{field} = r{val}"),
        Inst::GetGlobal { dst, global } => format!("r{dst} = global #{global}"),
        Inst::SetGlobal { global, src } => format!("global #{global} = r{src}"),
        Inst::Call { dst: Some(d), func, args } => format!("r{d} = call #{func} {}", regs(args)),
        Inst::Call { dst: None, func, args } => format!("call #{func} {}", regs(args)),
        Inst::NanoTime { dst } => format!("r{dst} = nanotime"),
        Inst::Unfilled { dst, id } => format!("r{dst} = unfilled ?H{id}"),
        Inst::Tick => "tick".into(),
        Inst::Clobber { dst, src } => format!("r{dst} = r{src} !clobber"),
        Inst::ForcedEntry => "!forced-entry".into(),
        Inst::Jump { target } => format!("jump @{target}"),
        Inst::Branch { cond, t, f } => format!("branch r{cond} @{t} @{f}"),
        Inst::Ret { src: Some(s) } => format!("ret r{s}"),
        Inst::Ret { src: None } => "ret".into(),
    }
}

fn regs(rs: &[Reg]) -> String {
    let parts: Vec<_> = rs.iter().map(|r| format!("r{r}")).collect();
    format!("({})", parts.join(", "))
}

pub fn disasm(f: &Func) -> String {
    let mut out = format!("fn {} (params {}, regs {})\n", f.name, f.nparams, f.nregs);
    for (pc, i) in f.code.iter().enumerate() {
        let _ = writeln!(out, "{pc:4}: {}", inst(i));
    }
    out
}
