//! AST to CFG lowering. Level-dependent choices made here: loop rotation,
//! bounds-check elision from loop ranges, and the pattern-gated faults that
//! live in those decisions.

use super::ir::*;
use super::ir::Block;
use super::{CompileError, FaultSet, OptLevel};
use crate::lang::typeck::{Scope, TypeEnv};
use crate::lang::*;
use std::collections::HashSet;

pub struct Lowerer<'p> {
    pub prog: &'p Program,
    pub env: TypeEnv<'p>,
    pub level: OptLevel,
    pub faults: FaultSet,
}

enum Check {
    Checked,
    /// Proven in range by the loop-range analysis.
    Elided,
    /// Removed by the faulty pass.
    Dropped,
}

struct FnBuilder<'a, 'p> {
    lw: &'a Lowerer<'p>,
    f: CfgFunc,
    cur: usize,
    scope: Scope,
    vars: Vec<(String, Reg)>,
    this_reg: Option<Reg>,
    receiver_rec: Option<usize>,
    /// (array, index) local pairs proven in range inside the current loop.
    safe: Vec<(String, String)>,
}

type R<T> = Result<T, CompileError>;

impl<'p> Lowerer<'p> {
    pub fn function(&self, fi: usize) -> R<CfgFunc> {
        let fd = &self.prog.functions[fi];
        let mut b = FnBuilder::new(self, fd.qualified_name(), fd.signature().len() as u32, Scope::for_function(self.prog, fd));
        let mut next = 0;
        if let Some(r) = &fd.receiver {
            b.this_reg = Some(0);
            b.receiver_rec = self.prog.records.iter().position(|x| x.name == *r);
            next = 1;
        }
        for (i, p) in fd.params.iter().enumerate() {
            b.vars.push((p.name.clone(), next + i as u32));
        }
        for s in &fd.body {
            b.stmt(s)?;
        }
        b.finish(Inst::Ret { src: None });
        Ok(b.f)
    }

    /// A zero-argument function computing the initializer of global `gi`.
    pub fn global_init(&self, gi: usize) -> R<CfgFunc> {
        let mut b = FnBuilder::new(self, format!("$init.{}", self.prog.globals[gi].name), 0, Scope::for_global(gi));
        let v = b.expr(&self.prog.globals[gi].init)?;
        b.finish(Inst::Ret { src: Some(v) });
        Ok(b.f)
    }
}

impl<'a, 'p> FnBuilder<'a, 'p> {
    fn new(lw: &'a Lowerer<'p>, name: String, nparams: u32, scope: Scope) -> Self {
        FnBuilder {
            lw,
            f: CfgFunc { name, nparams, nregs: nparams, blocks: vec![Block::default()] },
            cur: 0,
            scope,
            vars: Vec::new(),
            this_reg: None,
            receiver_rec: None,
            safe: Vec::new(),
        }
    }

    fn l2(&self) -> bool {
        self.lw.level == OptLevel::L2
    }

    fn fresh(&mut self) -> Reg {
        self.f.fresh()
    }

    fn emit(&mut self, i: Inst) {
        self.f.blocks[self.cur].insts.push(i);
    }

    fn new_block(&mut self) -> usize {
        self.f.blocks.push(Block::default());
        self.f.blocks.len() - 1
    }

    /// Ends the current block and continues in `next`.
    fn terminate(&mut self, term: Inst, next: usize) {
        self.emit(term);
        self.cur = next;
    }

    fn finish(&mut self, term: Inst) {
        self.emit(term);
        // Any block left empty (only reachable as a dead continuation) gets a
        // terminator so the CFG is well-formed.
        for b in &mut self.f.blocks {
            if b.insts.last().is_none_or(|i| !i.is_terminator()) {
                b.insts.push(Inst::Ret { src: None });
            }
        }
    }

    fn ty(&self, e: &Expr) -> R<Type> {
        self.lw.env.type_of(e, &self.scope).map_err(|err| CompileError::new(&self.f.name, err.to_string()))
    }

    fn konst(&mut self, val: Const) -> Reg {
        let dst = self.fresh();
        self.emit(Inst::Const { dst, val });
        dst
    }

    fn un(&mut self, op: UnKind, a: Reg) -> Reg {
        let dst = self.fresh();
        self.emit(Inst::Un { dst, op, a });
        dst
    }

    fn bin(&mut self, op: BinKind, a: Reg, b: Reg) -> Reg {
        let dst = self.fresh();
        self.emit(Inst::Bin { dst, op, a, b });
        dst
    }

    fn c2i(&self) -> UnKind {
        UnKind::C2I { sign: self.l2() && self.lw.faults.char_widen_sign }
    }

    /// Lowers `e` and widens a char result to int.
    fn int_operand(&mut self, e: &Expr) -> R<Reg> {
        let r = self.expr(e)?;
        Ok(if self.ty(e)? == Type::Char { self.un(self.c2i(), r) } else { r })
    }

    fn local(&self, name: &str) -> Option<Reg> {
        self.vars.iter().rev().find(|(n, _)| n == name).map(|(_, r)| *r)
    }

    fn field_of_this(&self, name: &str) -> Option<usize> {
        let rec = self.receiver_rec?;
        self.lw.prog.records[rec].field_index(name)
    }

    fn global(&self, name: &str) -> usize {
        self.lw.prog.global_index(name).expect("typechecked global")
    }

    fn read_ident(&mut self, name: &str) -> Reg {
        let dst = self.fresh();
        if let Some(r) = self.local(name) {
            self.emit(Inst::Move { dst, src: r });
        } else if let Some(field) = self.field_of_this(name) {
            let obj = self.this_reg.expect("method has receiver");
            self.emit(Inst::GetField { dst, obj, field });
        } else {
            let global = self.global(name);
            self.emit(Inst::GetGlobal { dst, global });
        }
        dst
    }

    fn write_ident(&mut self, name: &str, val: Reg) {
        if let Some(r) = self.local(name) {
            self.emit(Inst::Move { dst: r, src: val });
        } else if let Some(field) = self.field_of_this(name) {
            let obj = self.this_reg.expect("method has receiver");
            self.emit(Inst::SetField { obj, field, val });
        } else {
            let global = self.global(name);
            self.emit(Inst::SetGlobal { global, src: val });
        }
    }

    fn record_index(&self, ty: &Type) -> usize {
        let Type::Record(n) = ty else { panic!("expected record type, found {ty}") };
        self.lw.prog.records.iter().position(|r| r.name == *n).expect("known record")
    }

    fn field_index(&self, obj_ty: &Type, f: &str) -> usize {
        self.lw.prog.records[self.record_index(obj_ty)].field_index(f).expect("typechecked field")
    }

    fn func_index(&self, qualified: &str) -> usize {
        self.lw.prog.function_index(qualified).expect("typechecked call")
    }

    fn check_mode(&self, arr: &Expr, idx: &Expr) -> Check {
        if !self.l2() {
            return Check::Checked;
        }
        if let (Expr::Ident(a), Expr::Ident(i)) = (arr, idx) {
            if self.safe.iter().any(|(sa, si)| sa == a && si == i) {
                return Check::Elided;
            }
        }
        if self.lw.faults.bce_overaggressive && matches!(idx, Expr::Binary(BinOp::Rem, ..)) {
            return Check::Dropped;
        }
        Check::Checked
    }

    /// Lowers array and index, emitting the bounds check if required.
    /// Returns (array, index, dropped).
    fn array_slot(&mut self, arr: &Expr, idx: &Expr) -> R<(Reg, Reg, bool)> {
        let a = self.expr(arr)?;
        let i = self.int_operand(idx)?;
        let mode = self.check_mode(arr, idx);
        if matches!(mode, Check::Checked) {
            self.emit(Inst::BoundsCheck { arr: a, idx: i });
        }
        Ok((a, i, matches!(mode, Check::Dropped)))
    }

    fn binop_kind(&self, op: BinOp, operand_ty: &Type, rhs_ty: &Type) -> BinKind {
        use BinKind::*;
        let double = *operand_ty == Type::Double;
        let cmp = |c| if double { DCmp(c) } else { ICmp(c) };
        match op {
            BinOp::Add => if double { DAdd } else { IAdd },
            BinOp::Sub => if double { DSub } else { ISub },
            BinOp::Mul => if double { DMul } else { IMul },
            BinOp::Div => if double { DDiv } else { IDiv },
            BinOp::Rem => if double { DRem } else { IRem },
            BinOp::Shl => IShl,
            BinOp::Shr => IShr,
            BinOp::UShr => IUShr,
            BinOp::Lt => cmp(Cmp::Lt),
            BinOp::Le => cmp(Cmp::Le),
            BinOp::Gt => cmp(Cmp::Gt),
            BinOp::Ge => cmp(Cmp::Ge),
            BinOp::Eq | BinOp::Ne => {
                let eq = op == BinOp::Eq;
                if operand_ty.is_int_like() || double {
                    cmp(if eq { Cmp::Eq } else { Cmp::Ne })
                } else if *operand_ty == Type::Bool {
                    if eq { BEq } else { BNe }
                } else {
                    let _ = rhs_ty;
                    if eq { REq } else { RNe }
                }
            }
            BinOp::And | BinOp::Or => unreachable!("short-circuit operators are lowered to branches"),
        }
    }

    /// Applies a strict binary operator to already-lowered operands whose
    /// source types are `lt` and `rt`.
    fn apply(&mut self, op: BinOp, a: Reg, lt: &Type, b: Reg, rt: &Type) -> Reg {
        let a = if *lt == Type::Char { self.un(self.c2i(), a) } else { a };
        let b = if *rt == Type::Char { self.un(self.c2i(), b) } else { b };
        let kind = self.binop_kind(op, lt, rt);
        self.bin(kind, a, b)
    }

    fn expr(&mut self, e: &Expr) -> R<Reg> {
        Ok(match e {
            Expr::Lit(l) => self.konst(match l {
                Lit::Int(v) => Const::Int(*v),
                Lit::Double(d) => Const::Double(*d),
                Lit::Bool(b) => Const::Bool(*b),
                Lit::Char(c) => Const::Char(*c),
                Lit::Null => Const::Null,
            }),
            Expr::Ident(n) => self.read_ident(n),
            Expr::This => {
                let dst = self.fresh();
                let src = self.this_reg.expect("method has receiver");
                self.emit(Inst::Move { dst, src });
                dst
            }
            Expr::Field(t, f) => {
                let tt = self.ty(t)?;
                let obj = self.expr(t)?;
                self.emit(Inst::NullCheck { obj });
                let field = self.field_index(&tt, f);
                let dst = self.fresh();
                self.emit(Inst::GetField { dst, obj, field });
                dst
            }
            Expr::Index(a, i) => {
                let (arr, idx, dropped) = self.array_slot(a, i)?;
                let dst = self.fresh();
                self.emit(Inst::Load { dst, arr, idx, dropped });
                dst
            }
            Expr::Length(a) => {
                let arr = self.expr(a)?;
                let dst = self.fresh();
                self.emit(Inst::Len { dst, arr });
                dst
            }
            Expr::Unary(op, x) => {
                let xt = self.ty(x)?;
                let r = self.expr(x)?;
                match op {
                    UnOp::Not => self.un(UnKind::Not, r),
                    UnOp::Neg if xt == Type::Double => self.un(UnKind::DNeg, r),
                    UnOp::Neg | UnOp::BitNot => {
                        let r = if xt == Type::Char { self.un(self.c2i(), r) } else { r };
                        self.un(if *op == UnOp::Neg { UnKind::INeg } else { UnKind::BitNot }, r)
                    }
                }
            }
            Expr::Binary(op @ (BinOp::And | BinOp::Or), l, r) => {
                let res = self.fresh();
                let a = self.expr(l)?;
                let rhs = self.new_block();
                let short = self.new_block();
                let join = self.new_block();
                let (t, f) = if *op == BinOp::And { (rhs, short) } else { (short, rhs) };
                self.terminate(Inst::Branch { cond: a, t, f }, rhs);
                let b = self.expr(r)?;
                self.emit(Inst::Move { dst: res, src: b });
                self.terminate(Inst::Jump { target: join }, short);
                self.emit(Inst::Const { dst: res, val: Const::Bool(*op == BinOp::Or) });
                self.terminate(Inst::Jump { target: join }, join);
                res
            }
            Expr::Binary(op, l, r) => {
                let lt = self.ty(l)?;
                let rt = self.ty(r)?;
                let a = self.expr(l)?;
                let b = self.expr(r)?;
                self.apply(*op, a, &lt, b, &rt)
            }
            Expr::Cast(t, x) => {
                let xt = self.ty(x)?;
                let r = self.expr(x)?;
                match (t, &xt) {
                    (Type::Int, Type::Char) => self.un(self.c2i(), r),
                    (Type::Int, Type::Double) => self.un(UnKind::D2I, r),
                    (Type::Char, Type::Int) => self.un(UnKind::I2C, r),
                    (Type::Char, Type::Double) => self.un(UnKind::D2C, r),
                    (Type::Double, Type::Int) => self.un(UnKind::I2D, r),
                    (Type::Double, Type::Char) => {
                        let i = self.un(self.c2i(), r);
                        self.un(UnKind::I2D, i)
                    }
                    _ => r,
                }
            }
            Expr::Call { recv, name, args } => {
                let mut regs = Vec::with_capacity(args.len() + 1);
                let func = match recv {
                    Some(r) => {
                        let rt = self.ty(r)?;
                        regs.push(self.expr(r)?);
                        let Type::Record(rn) = &rt else { panic!("typechecked receiver") };
                        self.func_index(&format!("{rn}.{name}"))
                    }
                    None => self.func_index(name),
                };
                for a in args {
                    regs.push(self.expr(a)?);
                }
                if recv.is_some() {
                    self.emit(Inst::NullCheck { obj: regs[0] });
                }
                let dst = self.fresh();
                self.emit(Inst::Call { dst: Some(dst), func, args: regs });
                dst
            }
            Expr::New { record, args } => {
                let rec = self.lw.prog.records.iter().position(|r| r.name == *record).expect("known record");
                let obj = self.fresh();
                self.emit(Inst::NewRecord { dst: obj, rec });
                let mut regs = vec![obj];
                for a in args {
                    regs.push(self.expr(a)?);
                }
                if let Some(func) = self.lw.prog.function_index(&format!("{record}.{CONSTRUCTOR}")) {
                    self.emit(Inst::Call { dst: None, func, args: regs });
                }
                obj
            }
            Expr::NewArray { elem, len } => {
                let len = self.int_operand(len)?;
                let dst = self.fresh();
                self.emit(Inst::NewArray { dst, elem: *elem, len });
                dst
            }
            Expr::ArrayLit { elem, elems } => {
                let mut regs = Vec::with_capacity(elems.len());
                for x in elems {
                    regs.push(self.expr(x)?);
                }
                let dst = self.fresh();
                self.emit(Inst::ArrayLit { dst, elem: *elem, elems: regs });
                dst
            }
            Expr::PostIncDec { name, inc } => {
                let old = self.read_ident(name);
                let one = self.konst(Const::Int(1));
                let new = self.bin(if *inc { BinKind::IAdd } else { BinKind::ISub }, old, one);
                self.write_ident(name, new);
                old
            }
            Expr::NanoTime => {
                let dst = self.fresh();
                self.emit(Inst::NanoTime { dst });
                dst
            }
            Expr::Hole { id, .. } => {
                return Err(CompileError::new(&self.f.name, format!("template hole ?H{id} cannot be compiled")));
            }
            Expr::Unfilled { id, .. } => {
                let dst = self.fresh();
                self.emit(Inst::Unfilled { dst, id: *id });
                dst
            }
        })
    }

    fn block(&mut self, b: &[Stmt]) -> R<()> {
        let mark = self.vars.len();
        self.scope.push();
        for s in b {
            self.stmt(s)?;
        }
        self.scope.pop();
        self.vars.truncate(mark);
        Ok(())
    }

    fn stmt(&mut self, s: &Stmt) -> R<()> {
        match s {
            Stmt::VarDecl { ty, name, init } => {
                let v = self.expr(init)?;
                let r = self.fresh();
                self.emit(Inst::Move { dst: r, src: v });
                self.vars.push((name.clone(), r));
                self.scope.declare(name, ty.clone());
            }
            Stmt::Assign { target, op, value } => self.assign(target, *op, value)?,
            Stmt::Expr(e) => {
                self.expr(e)?;
            }
            Stmt::If { cond, then_blk, else_blk } => {
                let c = self.expr(cond)?;
                let tb = self.new_block();
                let eb = self.new_block();
                let join = if else_blk.is_some() { self.new_block() } else { eb };
                self.terminate(Inst::Branch { cond: c, t: tb, f: eb }, tb);
                self.block(then_blk)?;
                self.terminate(Inst::Jump { target: join }, eb);
                if let Some(e) = else_blk {
                    self.block(e)?;
                    self.terminate(Inst::Jump { target: join }, join);
                }
            }
            Stmt::While { cond, body } => self.lower_loop(cond, body, &[])?,
            Stmt::For { init, cond, update, body } => {
                let mark = self.vars.len();
                self.scope.push();
                for s in init {
                    self.stmt(s)?;
                }
                let safe = self.range_safe_pair(init, cond, update, body);
                if let Some(p) = &safe {
                    self.safe.push(p.clone());
                }
                self.lower_loop(cond, body, update)?;
                if safe.is_some() {
                    self.safe.pop();
                }
                self.scope.pop();
                self.vars.truncate(mark);
            }
            Stmt::Return(e) => {
                let src = match e {
                    Some(e) => Some(self.expr(e)?),
                    None => None,
                };
                let dead = self.new_block();
                self.terminate(Inst::Ret { src }, dead);
            }
            Stmt::Block(b) => self.block(b)?,
        }
        Ok(())
    }

    fn assign(&mut self, target: &Expr, op: Option<BinOp>, value: &Expr) -> R<()> {
        let tt = match target {
            Expr::Ident(_) | Expr::Field(..) | Expr::Index(..) => self.ty(target)?,
            other => panic!("not assignable: {other:?}"),
        };
        let vt = self.ty(value)?;
        match target {
            Expr::Ident(name) => match op {
                None => {
                    let v = self.expr(value)?;
                    self.write_ident(name, v);
                }
                Some(o) => {
                    let old = self.read_ident(name);
                    let v = self.expr(value)?;
                    let nv = self.apply(o, old, &tt, v, &vt);
                    self.write_ident(name, nv);
                }
            },
            Expr::Field(objx, f) => {
                let ot = self.ty(objx)?;
                let field = self.field_index(&ot, f);
                let obj = self.expr(objx)?;
                match op {
                    None => {
                        let v = self.expr(value)?;
                        self.emit(Inst::NullCheck { obj });
                        self.emit(Inst::SetField { obj, field, val: v });
                    }
                    Some(o) => {
                        self.emit(Inst::NullCheck { obj });
                        let old = self.fresh();
                        self.emit(Inst::GetField { dst: old, obj, field });
                        let v = self.expr(value)?;
                        let nv = self.apply(o, old, &tt, v, &vt);
                        self.emit(Inst::SetField { obj, field, val: nv });
                    }
                }
            }
            Expr::Index(ax, ix) => {
                let arr = self.expr(ax)?;
                let idx = self.int_operand(ix)?;
                let mode = self.check_mode(ax, ix);
                let dropped = matches!(mode, Check::Dropped);
                match op {
                    None => {
                        let v = self.expr(value)?;
                        if matches!(mode, Check::Checked) {
                            self.emit(Inst::BoundsCheck { arr, idx });
                        }
                        self.emit(Inst::Store { arr, idx, val: v, dropped });
                    }
                    Some(o) => {
                        if matches!(mode, Check::Checked) {
                            self.emit(Inst::BoundsCheck { arr, idx });
                        }
                        let old = self.fresh();
                        self.emit(Inst::Load { dst: old, arr, idx, dropped });
                        let v = self.expr(value)?;
                        let nv = self.apply(o, old, &tt, v, &vt);
                        self.emit(Inst::Store { arr, idx, val: nv, dropped });
                    }
                }
            }
            _ => unreachable!(),
        }
        Ok(())
    }

    /// Lowers a loop; `update` runs after each body execution.
    fn lower_loop(&mut self, cond: &Expr, body: &[Stmt], update: &[Stmt]) -> R<()> {
        let exit_placeholder = usize::MAX;
        if !self.l2() {
            let header = self.new_block();
            self.terminate(Inst::Jump { target: header }, header);
            let c = self.expr(cond)?;
            let bodyb = self.new_block();
            let exit = self.new_block();
            self.terminate(Inst::Branch { cond: c, t: bodyb, f: exit }, bodyb);
            self.loop_body(body, update)?;
            self.terminate(Inst::Jump { target: header }, exit);
            let _ = exit_placeholder;
            return Ok(());
        }
        // Rotated: guard once on entry, then test at the bottom.
        let bodyb = self.new_block();
        let exit = self.new_block();
        if self.lw.faults.loopcond_force && self.guard_is_invariant(cond, body, update) {
            self.emit(Inst::ForcedEntry);
            self.terminate(Inst::Jump { target: bodyb }, bodyb);
        } else {
            let c = self.expr(cond)?;
            self.terminate(Inst::Branch { cond: c, t: bodyb, f: exit }, bodyb);
        }
        self.loop_body(body, update)?;
        let c = self.expr(cond)?;
        self.terminate(Inst::Branch { cond: c, t: bodyb, f: exit }, exit);
        Ok(())
    }

    fn loop_body(&mut self, body: &[Stmt], update: &[Stmt]) -> R<()> {
        self.emit(Inst::Tick);
        self.block(body)?;
        for s in update {
            self.stmt(s)?;
        }
        Ok(())
    }

    /// Whether the guard's leading conjunct reads only locals that the loop
    /// never assigns, with no effects or traps.
    fn guard_is_invariant(&self, cond: &Expr, body: &[Stmt], update: &[Stmt]) -> bool {
        let mut lead = cond;
        while let Expr::Binary(BinOp::And, l, _) = lead {
            lead = l;
        }
        let mut assigned = HashSet::new();
        collect_assigned(body, &mut assigned);
        collect_assigned(update, &mut assigned);
        cond.walk(&mut |e| {
            if let Expr::PostIncDec { name, .. } = e {
                assigned.insert(name.clone());
            }
        });
        let mut ok = true;
        lead.walk(&mut |e| {
            ok &= match e {
                Expr::Lit(_) | Expr::Length(_) | Expr::Unary(..) | Expr::Cast(..) => true,
                Expr::Ident(n) => self.local(n).is_some() && !assigned.contains(n),
                Expr::Binary(op, ..) => !matches!(op, BinOp::Div | BinOp::Rem),
                _ => false,
            }
        });
        ok
    }

    /// Recognizes `for (int i = K; i < a.length; i++)` with `K >= 0`, `i`
    /// assigned only by the update and `a` a local never reassigned.
    fn range_safe_pair(&self, init: &[Stmt], cond: &Expr, update: &[Stmt], body: &[Stmt]) -> Option<(String, String)> {
        if !self.l2() {
            return None;
        }
        let [Stmt::VarDecl { ty: Type::Int, name: i, init: Expr::Lit(Lit::Int(k)) }] = init else { return None };
        if *k < 0 {
            return None;
        }
        let Expr::Binary(BinOp::Lt, l, r) = cond else { return None };
        let (Expr::Ident(ci), Expr::Length(arr)) = (l.as_ref(), r.as_ref()) else { return None };
        let Expr::Ident(a) = arr.as_ref() else { return None };
        if ci != i || self.local(a).is_none() {
            return None;
        }
        let inc_ok = match update {
            [Stmt::Expr(Expr::PostIncDec { name, inc: true })] => name == i,
            [Stmt::Assign { target: Expr::Ident(n), op: Some(BinOp::Add), value: Expr::Lit(Lit::Int(1)) }] => n == i,
            _ => false,
        };
        if !inc_ok {
            return None;
        }
        let mut assigned = HashSet::new();
        collect_assigned(body, &mut assigned);
        if assigned.contains(i) || assigned.contains(a) {
            return None;
        }
        Some((a.clone(), i.clone()))
    }
}

/// Names assigned (or incremented) anywhere in `stmts`.
pub fn collect_assigned(stmts: &[Stmt], out: &mut HashSet<String>) {
    for s in stmts {
        s.walk_stmts(&mut |st| {
            if let Stmt::Assign { target: Expr::Ident(n), .. } = st {
                out.insert(n.clone());
            }
        });
        s.walk_exprs(&mut |e| {
            if let Expr::PostIncDec { name, .. } = e {
                out.insert(name.clone());
            }
        });
    }
}
