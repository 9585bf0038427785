//! Static checks: name resolution, typing, definite return, harness shape.

use super::ast::*;
use super::printer::print_expr;
use super::TypeError;
use std::collections::HashSet;

/// Lexical scope of one point inside a function body (or a global
/// initializer).
#[derive(Clone, Debug, Default)]
pub struct Scope {
    pub receiver: Option<String>,
    pub ret: Option<Type>,
    frames: Vec<Vec<(String, Type)>>,
    /// Number of globals visible; initializers only see earlier globals.
    pub globals_visible: usize,
    pub in_global_init: bool,
}

impl Scope {
    pub fn for_function(prog: &Program, f: &FunctionDecl) -> Scope {
        let mut s = Scope {
            receiver: f.receiver.clone(),
            ret: Some(f.ret.clone()),
            frames: vec![Vec::new()],
            globals_visible: prog.globals.len(),
            in_global_init: false,
        };
        for p in &f.params {
            s.declare(&p.name, p.ty.clone());
        }
        s
    }

    pub fn for_global(index: usize) -> Scope {
        Scope { frames: vec![Vec::new()], globals_visible: index, in_global_init: true, ..Default::default() }
    }

    pub fn push(&mut self) {
        self.frames.push(Vec::new());
    }

    pub fn pop(&mut self) {
        self.frames.pop();
    }

    pub fn declare(&mut self, name: &str, ty: Type) {
        self.frames.last_mut().expect("scope has a frame").push((name.to_string(), ty));
    }

    pub fn local(&self, name: &str) -> Option<&Type> {
        self.frames.iter().rev().flat_map(|f| f.iter().rev()).find(|(n, _)| n == name).map(|(_, t)| t)
    }

    /// Locals in declaration order, outermost first.
    pub fn locals(&self) -> impl Iterator<Item = (&str, &Type)> {
        self.frames.iter().flat_map(|f| f.iter()).map(|(n, t)| (n.as_str(), t))
    }
}

/// How a bare identifier resolves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Resolved {
    Local(Type),
    Field { record: String, index: usize, ty: Type },
    Global { index: usize, ty: Type },
}

impl Resolved {
    pub fn ty(&self) -> &Type {
        match self {
            Resolved::Local(t) | Resolved::Field { ty: t, .. } | Resolved::Global { ty: t, .. } => t,
        }
    }
}

pub struct TypeEnv<'p> {
    pub prog: &'p Program,
}

fn terr(msg: impl Into<String>) -> TypeError {
    TypeError { message: msg.into(), function: None, expr: None }
}

fn at(e: &Expr, msg: impl Into<String>) -> TypeError {
    TypeError { message: msg.into(), function: None, expr: Some(print_expr(e)) }
}

impl<'p> TypeEnv<'p> {
    pub fn new(prog: &'p Program) -> Self {
        TypeEnv { prog }
    }

    pub fn resolve_ident(&self, name: &str, scope: &Scope) -> Option<Resolved> {
        if let Some(t) = scope.local(name) {
            return Some(Resolved::Local(t.clone()));
        }
        if let Some(r) = &scope.receiver {
            if let Some(rec) = self.prog.record(r) {
                if let Some(i) = rec.field_index(name) {
                    return Some(Resolved::Field { record: r.clone(), index: i, ty: rec.fields[i].ty.clone() });
                }
            }
        }
        let gi = self.prog.global_index(name)?;
        (gi < scope.globals_visible).then(|| Resolved::Global { index: gi, ty: self.prog.globals[gi].ty.clone() })
    }

    fn check_type_exists(&self, t: &Type) -> Result<(), TypeError> {
        match t {
            Type::Record(r) if self.prog.record(r).is_none() => Err(terr(format!("unknown record type `{r}`"))),
            Type::Null => Err(terr("`null` is not a declarable type")),
            _ => Ok(()),
        }
    }

    /// The unique static type of `e` at `scope`.
    pub fn type_of(&self, e: &Expr, scope: &Scope) -> Result<Type, TypeError> {
        match e {
            Expr::Lit(l) => Ok(l.ty()),
            Expr::Ident(n) => self.resolve_ident(n, scope).map(|r| r.ty().clone()).ok_or_else(|| at(e, format!("unknown name `{n}`"))),
            Expr::This => scope.receiver.clone().map(Type::Record).ok_or_else(|| at(e, "`this` outside a method")),
            Expr::Field(t, f) => match self.type_of(t, scope)? {
                Type::Record(r) => {
                    let rec = self.prog.record(&r).ok_or_else(|| at(e, format!("unknown record `{r}`")))?;
                    rec.fields
                        .iter()
                        .find(|fd| fd.name == *f)
                        .map(|fd| fd.ty.clone())
                        .ok_or_else(|| at(e, format!("record `{r}` has no field `{f}`")))
                }
                other => Err(at(e, format!("field access on non-record type `{other}`"))),
            },
            Expr::Index(a, i) => {
                let at_ty = self.type_of(a, scope)?;
                let it = self.type_of(i, scope)?;
                if !it.is_int_like() {
                    return Err(at(e, format!("array index has type `{it}`")));
                }
                match at_ty {
                    Type::Array(el) => Ok(el.as_type()),
                    other => Err(at(e, format!("indexing non-array type `{other}`"))),
                }
            }
            Expr::Length(a) => match self.type_of(a, scope)? {
                Type::Array(_) => Ok(Type::Int),
                other => Err(at(e, format!("`.length` on non-array type `{other}`"))),
            },
            Expr::Unary(op, x) => {
                let t = self.type_of(x, scope)?;
                match (op, &t) {
                    (UnOp::Neg, Type::Double) => Ok(Type::Double),
                    (UnOp::Neg | UnOp::BitNot, t) if t.is_int_like() => Ok(Type::Int),
                    (UnOp::Not, Type::Bool) => Ok(Type::Bool),
                    _ => Err(at(e, format!("operator `{}` not applicable to `{t}`", op.symbol()))),
                }
            }
            Expr::Binary(op, l, r) => {
                let lt = self.type_of(l, scope)?;
                let rt = self.type_of(r, scope)?;
                binary_result(*op, &lt, &rt).ok_or_else(|| at(e, format!("operator `{}` not applicable to `{lt}` and `{rt}`", op.symbol())))
            }
            Expr::Cast(t, x) => {
                let xt = self.type_of(x, scope)?;
                if t.is_numeric() && xt.is_numeric() {
                    Ok(t.clone())
                } else {
                    Err(at(e, format!("cannot cast `{xt}` to `{t}`")))
                }
            }
            Expr::Call { recv, name, args } => {
                if scope.in_global_init {
                    return Err(at(e, "calls are not allowed in global initializers"));
                }
                let f = match recv {
                    None => self.prog.free_function(name).ok_or_else(|| at(e, format!("unknown function `{name}`")))?,
                    Some(r) => match self.type_of(r, scope)? {
                        Type::Record(rn) => {
                            if name == CONSTRUCTOR {
                                return Err(at(e, "constructors run only through `new`"));
                            }
                            self.prog.method(&rn, name).ok_or_else(|| at(e, format!("record `{rn}` has no method `{name}`")))?
                        }
                        other => return Err(at(e, format!("method call on non-record type `{other}`"))),
                    },
                };
                self.check_args(e, &f.params, args, scope)?;
                Ok(f.ret.clone())
            }
            Expr::New { record, args } => {
                if self.prog.record(record).is_none() {
                    return Err(at(e, format!("unknown record `{record}`")));
                }
                match self.prog.method(record, CONSTRUCTOR) {
                    Some(init) => {
                        if scope.in_global_init {
                            return Err(at(e, "constructors may not run in global initializers"));
                        }
                        self.check_args(e, &init.params, args, scope)?
                    }
                    None if args.is_empty() => {}
                    None => return Err(at(e, format!("record `{record}` has no constructor taking arguments"))),
                }
                Ok(Type::Record(record.clone()))
            }
            Expr::NewArray { elem, len } => {
                let lt = self.type_of(len, scope)?;
                if !lt.is_int_like() {
                    return Err(at(e, format!("array length has type `{lt}`")));
                }
                Ok(Type::Array(*elem))
            }
            Expr::ArrayLit { elem, elems } => {
                for x in elems {
                    let xt = self.type_of(x, scope)?;
                    if xt != elem.as_type() {
                        return Err(at(x, format!("array element has type `{xt}`, expected `{}`", elem.as_type())));
                    }
                }
                Ok(Type::Array(*elem))
            }
            Expr::PostIncDec { name, .. } => {
                if scope.in_global_init {
                    return Err(at(e, "increments are not allowed in global initializers"));
                }
                match self.resolve_ident(name, scope) {
                    Some(r) if *r.ty() == Type::Int => Ok(Type::Int),
                    Some(r) => Err(at(e, format!("`{name}` has type `{}`, expected int", r.ty()))),
                    None => Err(at(e, format!("unknown name `{name}`"))),
                }
            }
            Expr::NanoTime => Ok(Type::Int),
            Expr::Hole { spec, .. } => {
                self.check_spec(spec, scope).map_err(|m| at(e, m))?;
                Ok(spec.ty.clone())
            }
            Expr::Unfilled { ty, .. } => {
                self.check_type_exists(ty)?;
                Ok(ty.clone())
            }
        }
    }

    fn check_args(&self, call: &Expr, params: &[Param], args: &[Expr], scope: &Scope) -> Result<(), TypeError> {
        if params.len() != args.len() {
            return Err(at(call, format!("expected {} arguments, found {}", params.len(), args.len())));
        }
        for (p, a) in params.iter().zip(args) {
            let at_ty = self.type_of(a, scope)?;
            if !p.ty.accepts(&at_ty) {
                return Err(at(a, format!("argument has type `{at_ty}`, parameter `{}` expects `{}`", p.name, p.ty)));
            }
        }
        Ok(())
    }

    /// Checks the internal consistency of a hole's search space.
    pub fn check_spec(&self, spec: &HoleSpec, scope: &Scope) -> Result<(), String> {
        self.check_type_exists(&spec.ty).map_err(|e| e.message)?;
        let operand_types: Vec<Type> = spec
            .operands
            .iter()
            .map(|o| match o {
                Operand::Hole(h) => self.check_spec(h, scope).map(|_| h.ty.clone()),
                Operand::Fixed(x) => self.type_of(x, scope).map_err(|e| e.message),
            })
            .collect::<Result<_, _>>()?;
        let arity = match spec.kind {
            HoleKind::Id | HoleKind::Val => 0,
            HoleKind::Cast => 1,
            _ => 2,
        };
        if operand_types.len() != arity {
            return Err(format!("{} hole expects {arity} operands, found {}", spec.kind, operand_types.len()));
        }
        let allowed: &[BinOp] = match spec.kind {
            HoleKind::Arith => &BinOp::ARITH,
            HoleKind::Shift => &BinOp::SHIFT,
            HoleKind::Relation => &BinOp::RELATION,
            HoleKind::Logic => &BinOp::LOGIC,
            _ => &[],
        };
        if spec.ops.iter().any(|o| !allowed.contains(o)) || (allowed.is_empty() != spec.ops.is_empty()) {
            return Err(format!("{} hole has an invalid operator set", spec.kind));
        }
        match spec.kind {
            HoleKind::Id => {
                if matches!(spec.ty, Type::Unit | Type::Null) {
                    return Err("Id hole of non-value type".into());
                }
            }
            HoleKind::Val => {
                if !spec.ty.is_primitive() {
                    return Err(format!("Val hole of non-primitive type `{}`", spec.ty));
                }
            }
            HoleKind::ArrayAcc => match &operand_types[0] {
                Type::Array(el) if el.as_type() == spec.ty && operand_types[1].is_int_like() => {}
                _ => return Err("ArrayAcc hole operands do not match its type".into()),
            },
            HoleKind::Cast => {
                if !(spec.ty.is_numeric() && operand_types[0].is_numeric()) {
                    return Err("Cast hole between non-numeric types".into());
                }
            }
            _ => {
                for op in &spec.ops {
                    if binary_result(*op, &operand_types[0], &operand_types[1]).as_ref() != Some(&spec.ty) {
                        return Err(format!("operator `{}` does not produce `{}` from the hole operands", op.symbol(), spec.ty));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Result type of a binary operator, or `None` if ill-typed.
pub fn binary_result(op: BinOp, l: &Type, r: &Type) -> Option<Type> {
    use BinOp::*;
    match op {
        Add | Sub | Mul | Div | Rem => {
            if l.is_int_like() && r.is_int_like() {
                Some(Type::Int)
            } else if *l == Type::Double && *r == Type::Double {
                Some(Type::Double)
            } else {
                None
            }
        }
        Shl | Shr | UShr => (l.is_int_like() && r.is_int_like()).then_some(Type::Int),
        Lt | Le | Gt | Ge => {
            ((l.is_int_like() && r.is_int_like()) || (*l == Type::Double && *r == Type::Double)).then_some(Type::Bool)
        }
        Eq | Ne => {
            let ok = (l.is_int_like() && r.is_int_like())
                || (*l == Type::Double && *r == Type::Double)
                || (*l == Type::Bool && *r == Type::Bool)
                || (matches!(l, Type::Array(_)) && l == r)
                || (matches!(l, Type::Record(_) | Type::Null) && matches!(r, Type::Record(_) | Type::Null) && (l == r || *l == Type::Null || *r == Type::Null));
            ok.then_some(Type::Bool)
        }
        And | Or => (*l == Type::Bool && *r == Type::Bool).then_some(Type::Bool),
    }
}

/// Full static check of a program (templates included).
pub fn check_program(p: &Program) -> Result<(), TypeError> {
    let env = TypeEnv::new(p);
    let mut seen = HashSet::new();
    for (i, g) in p.globals.iter().enumerate() {
        if !seen.insert(g.name.as_str()) {
            return Err(terr(format!("duplicate global `{}`", g.name)));
        }
        env.check_type_exists(&g.ty)?;
        if matches!(g.ty, Type::Unit) {
            return Err(terr(format!("global `{}` has type void", g.name)));
        }
        let scope = Scope::for_global(i);
        let t = env.type_of(&g.init, &scope).map_err(|e| e.in_global(&g.name))?;
        if !g.ty.accepts(&t) {
            return Err(at(&g.init, format!("global `{}` declared `{}` but initialized with `{t}`", g.name, g.ty)).in_global(&g.name));
        }
    }
    let mut rec_names = HashSet::new();
    for r in &p.records {
        if !rec_names.insert(r.name.as_str()) {
            return Err(terr(format!("duplicate record `{}`", r.name)));
        }
        let mut fields = HashSet::new();
        for f in &r.fields {
            if !fields.insert(f.name.as_str()) {
                return Err(terr(format!("duplicate field `{}.{}`", r.name, f.name)));
            }
            env.check_type_exists(&f.ty)?;
            if matches!(f.ty, Type::Unit) {
                return Err(terr(format!("field `{}.{}` has type void", r.name, f.name)));
            }
        }
    }
    let mut fn_names = HashSet::new();
    for f in &p.functions {
        let q = f.qualified_name();
        if !fn_names.insert(q.clone()) {
            return Err(terr(format!("duplicate function `{q}`")));
        }
        if let Some(r) = &f.receiver {
            if p.record(r).is_none() {
                return Err(terr(format!("method `{q}` on unknown record")));
            }
        }
        if f.is_constructor() && f.ret != Type::Unit {
            return Err(terr(format!("constructor `{q}` must return void")));
        }
        check_function(&env, f).map_err(|e| e.in_function(&q))?;
    }
    if let Some(h) = &p.harness {
        check_harness(p, h)?;
    }
    Ok(())
}

fn check_function(env: &TypeEnv, f: &FunctionDecl) -> Result<(), TypeError> {
    env.check_type_exists(&f.ret)?;
    let mut names = HashSet::new();
    for prm in &f.params {
        env.check_type_exists(&prm.ty)?;
        if matches!(prm.ty, Type::Unit) {
            return Err(terr(format!("parameter `{}` has type void", prm.name)));
        }
        if !names.insert(prm.name.clone()) {
            return Err(terr(format!("duplicate parameter `{}`", prm.name)));
        }
    }
    let mut scope = Scope::for_function(env.prog, f);
    let mut cx = FnCheck { env, names };
    cx.block(&f.body, &mut scope)?;
    if f.ret != Type::Unit && !always_returns(&f.body) {
        return Err(terr("missing return at end of non-void function"));
    }
    Ok(())
}

struct FnCheck<'a, 'p> {
    env: &'a TypeEnv<'p>,
    /// Every local declared so far; locals may not shadow each other.
    names: HashSet<String>,
}

impl FnCheck<'_, '_> {
    fn block(&mut self, b: &Block, scope: &mut Scope) -> Result<(), TypeError> {
        scope.push();
        let r = b.iter().try_for_each(|s| self.stmt(s, scope));
        scope.pop();
        r
    }

    fn expect(&self, e: &Expr, want: &Type, scope: &Scope) -> Result<(), TypeError> {
        let t = self.env.type_of(e, scope)?;
        if want.accepts(&t) {
            Ok(())
        } else {
            Err(at(e, format!("expected `{want}`, found `{t}`")))
        }
    }

    fn stmt(&mut self, s: &Stmt, scope: &mut Scope) -> Result<(), TypeError> {
        match s {
            Stmt::VarDecl { ty, name, init } => {
                self.env.check_type_exists(ty)?;
                if matches!(ty, Type::Unit) {
                    return Err(terr(format!("local `{name}` has type void")));
                }
                self.expect(init, ty, scope)?;
                if !self.names.insert(name.clone()) {
                    return Err(terr(format!("local `{name}` redeclared")));
                }
                scope.declare(name, ty.clone());
                Ok(())
            }
            Stmt::Assign { target, op, value } => {
                let tt = match target {
                    Expr::Ident(n) => self.env.resolve_ident(n, scope).map(|r| r.ty().clone()).ok_or_else(|| at(target, format!("unknown name `{n}`")))?,
                    Expr::Field(..) | Expr::Index(..) => self.env.type_of(target, scope)?,
                    _ => return Err(at(target, "not assignable")),
                };
                match op {
                    None => self.expect(value, &tt, scope),
                    Some(o) => {
                        let vt = self.env.type_of(value, scope)?;
                        match binary_result(*o, &tt, &vt) {
                            Some(r) if r == tt => Ok(()),
                            _ => Err(at(value, format!("compound `{}=` on `{tt}` with `{vt}`", o.symbol()))),
                        }
                    }
                }
            }
            Stmt::Expr(e) => {
                if !matches!(e, Expr::Call { .. } | Expr::PostIncDec { .. }) {
                    return Err(at(e, "expression statement must be a call or increment"));
                }
                self.env.type_of(e, scope).map(|_| ())
            }
            Stmt::If { cond, then_blk, else_blk } => {
                self.expect(cond, &Type::Bool, scope)?;
                self.block(then_blk, scope)?;
                if let Some(b) = else_blk {
                    self.block(b, scope)?;
                }
                Ok(())
            }
            Stmt::While { cond, body } => {
                self.expect(cond, &Type::Bool, scope)?;
                self.block(body, scope)
            }
            Stmt::For { init, cond, update, body } => {
                scope.push();
                let r = (|| {
                    for s in init {
                        if !matches!(s, Stmt::VarDecl { .. } | Stmt::Assign { .. } | Stmt::Expr(_)) {
                            return Err(terr("invalid for-loop initializer"));
                        }
                        self.stmt(s, scope)?;
                    }
                    self.expect(cond, &Type::Bool, scope)?;
                    for s in update {
                        if !matches!(s, Stmt::Assign { .. } | Stmt::Expr(_)) {
                            return Err(terr("invalid for-loop update"));
                        }
                        self.stmt(s, scope)?;
                    }
                    self.block(body, scope)
                })();
                scope.pop();
                r
            }
            Stmt::Return(e) => {
                let ret = scope.ret.clone().unwrap_or(Type::Unit);
                match (e, &ret) {
                    (None, Type::Unit) => Ok(()),
                    (None, _) => Err(terr(format!("missing return value of type `{ret}`"))),
                    (Some(e), Type::Unit) => Err(at(e, "returning a value from a void function")),
                    (Some(e), _) => self.expect(e, &ret, scope),
                }
            }
            Stmt::Block(b) => self.block(b, scope),
        }
    }
}

pub fn always_returns(b: &[Stmt]) -> bool {
    b.iter().any(|s| match s {
        Stmt::Return(_) => true,
        Stmt::If { then_blk, else_blk: Some(e), .. } => always_returns(then_blk) && always_returns(e),
        Stmt::Block(inner) => always_returns(inner),
        _ => false,
    })
}

fn check_harness(p: &Program, h: &Harness) -> Result<(), TypeError> {
    let entry = p.function(&h.entry).ok_or_else(|| terr(format!("harness entry `{}` not found", h.entry)))?;
    if entry.is_constructor() {
        return Err(terr("harness entry may not be a constructor"));
    }
    let sig = entry.signature();
    let provider = |name: &str| -> Result<&FunctionDecl, TypeError> {
        let f = p.free_function(name).ok_or_else(|| terr(format!("argument provider `{name}` not found")))?;
        if !f.params.is_empty() {
            return Err(terr(format!("argument provider `{name}` takes parameters")));
        }
        Ok(f)
    };
    match &h.args {
        ArgSource::PerParam(names) => {
            if names.len() != sig.len() {
                return Err(terr(format!("harness supplies {} providers for {} parameters", names.len(), sig.len())));
            }
            for (n, t) in names.iter().zip(&sig) {
                let f = provider(n)?;
                if f.ret != *t {
                    return Err(terr(format!("provider `{n}` returns `{}`, parameter expects `{t}`", f.ret)));
                }
            }
        }
        ArgSource::Tuple(n) => {
            let f = provider(n)?;
            let Type::Record(r) = &f.ret else {
                return Err(terr(format!("tuple provider `{n}` must return a record")));
            };
            let rec = p.record(r).ok_or_else(|| terr(format!("unknown record `{r}`")))?;
            let fields: Vec<Type> = rec.fields.iter().map(|f| f.ty.clone()).collect();
            if fields != sig {
                return Err(terr(format!("tuple provider `{n}` fields do not match the entry signature")));
            }
        }
    }
    Ok(())
}
