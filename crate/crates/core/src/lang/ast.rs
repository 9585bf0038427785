//! Typed AST of MiniJ.
//!
//! The tree carries no source spans so that two parses of equivalent text
//! compare equal with `==`. Doubles are stored by bit pattern for the same
//! reason (NaN literals must equal themselves).

use serde::{Deserialize, Serialize};
use std::fmt;

/// Element types an array may hold.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ElemType {
    Int,
    Double,
    Char,
}

impl ElemType {
    pub fn as_type(self) -> Type {
        match self {
            ElemType::Int => Type::Int,
            ElemType::Double => Type::Double,
            ElemType::Char => Type::Char,
        }
    }

    pub fn from_type(ty: &Type) -> Option<ElemType> {
        match ty {
            Type::Int => Some(ElemType::Int),
            Type::Double => Some(ElemType::Double),
            Type::Char => Some(ElemType::Char),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Type {
    Int,
    Double,
    Bool,
    Char,
    Array(ElemType),
    Record(String),
    Unit,
    /// Type of the `null` literal; assignable to every record type.
    Null,
}

impl Type {
    pub fn is_primitive(&self) -> bool {
        matches!(self, Type::Int | Type::Double | Type::Bool | Type::Char)
    }

    /// Int and Char both take part in 32-bit integer arithmetic.
    pub fn is_int_like(&self) -> bool {
        matches!(self, Type::Int | Type::Char)
    }

    pub fn is_numeric(&self) -> bool {
        matches!(self, Type::Int | Type::Char | Type::Double)
    }

    pub fn is_reference(&self) -> bool {
        matches!(self, Type::Array(_) | Type::Record(_) | Type::Null)
    }

    /// Whether a value of type `from` may be stored where `self` is expected.
    pub fn accepts(&self, from: &Type) -> bool {
        self == from || (matches!(self, Type::Record(_)) && *from == Type::Null)
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Int => f.write_str("int"),
            Type::Double => f.write_str("double"),
            Type::Bool => f.write_str("bool"),
            Type::Char => f.write_str("char"),
            Type::Array(e) => write!(f, "{}[]", e.as_type()),
            Type::Record(name) => f.write_str(name),
            Type::Unit => f.write_str("void"),
            Type::Null => f.write_str("null"),
        }
    }
}

/// IEEE-754 binary64 compared by bit pattern.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct F64(pub u64);

impl F64 {
    pub fn new(v: f64) -> Self {
        F64(v.to_bits())
    }

    pub fn get(self) -> f64 {
        f64::from_bits(self.0)
    }
}

impl fmt::Debug for F64 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.get())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Lit {
    Int(i32),
    Double(F64),
    Bool(bool),
    Char(u16),
    Null,
}

impl Lit {
    pub fn ty(&self) -> Type {
        match self {
            Lit::Int(_) => Type::Int,
            Lit::Double(_) => Type::Double,
            Lit::Bool(_) => Type::Bool,
            Lit::Char(_) => Type::Char,
            Lit::Null => Type::Null,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Rem,
    Shl,
    Shr,
    UShr,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
    And,
    Or,
}

impl BinOp {
    pub const ARITH: [BinOp; 5] = [BinOp::Add, BinOp::Sub, BinOp::Mul, BinOp::Div, BinOp::Rem];
    pub const SHIFT: [BinOp; 3] = [BinOp::Shl, BinOp::Shr, BinOp::UShr];
    pub const RELATION: [BinOp; 6] = [BinOp::Lt, BinOp::Le, BinOp::Gt, BinOp::Ge, BinOp::Eq, BinOp::Ne];
    pub const EQUALITY: [BinOp; 2] = [BinOp::Eq, BinOp::Ne];
    pub const LOGIC: [BinOp; 2] = [BinOp::And, BinOp::Or];

    pub fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Rem => "%",
            BinOp::Shl => "<<",
            BinOp::Shr => ">>",
            BinOp::UShr => ">>>",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        }
    }

    pub fn from_symbol(s: &str) -> Option<BinOp> {
        Some(match s {
            "+" => BinOp::Add,
            "-" => BinOp::Sub,
            "*" => BinOp::Mul,
            "/" => BinOp::Div,
            "%" => BinOp::Rem,
            "<<" => BinOp::Shl,
            ">>" => BinOp::Shr,
            ">>>" => BinOp::UShr,
            "<" => BinOp::Lt,
            "<=" => BinOp::Le,
            ">" => BinOp::Gt,
            ">=" => BinOp::Ge,
            "==" => BinOp::Eq,
            "!=" => BinOp::Ne,
            "&&" => BinOp::And,
            "||" => BinOp::Or,
            _ => return None,
        })
    }

    /// Binding strength; higher binds tighter.
    pub fn precedence(self) -> u8 {
        match self {
            BinOp::Or => 1,
            BinOp::And => 2,
            BinOp::Eq | BinOp::Ne => 3,
            BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => 4,
            BinOp::Shl | BinOp::Shr | BinOp::UShr => 5,
            BinOp::Add | BinOp::Sub => 6,
            BinOp::Mul | BinOp::Div | BinOp::Rem => 7,
        }
    }

    pub fn is_arith(self) -> bool {
        BinOp::ARITH.contains(&self)
    }

    pub fn is_shift(self) -> bool {
        BinOp::SHIFT.contains(&self)
    }

    pub fn is_relation(self) -> bool {
        BinOp::RELATION.contains(&self)
    }

    pub fn is_logic(self) -> bool {
        BinOp::LOGIC.contains(&self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum UnOp {
    Neg,
    Not,
    BitNot,
}

impl UnOp {
    pub fn symbol(self) -> &'static str {
        match self {
            UnOp::Neg => "-",
            UnOp::Not => "!",
            UnOp::BitNot => "~",
        }
    }
}

/// The categories of expressions that extraction can turn into holes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HoleKind {
    Id,
    Val,
    Arith,
    Shift,
    Relation,
    Logic,
    ArrayAcc,
    Cast,
}

impl HoleKind {
    pub const ALL: [HoleKind; 8] = [
        HoleKind::Id,
        HoleKind::Val,
        HoleKind::Arith,
        HoleKind::Shift,
        HoleKind::Relation,
        HoleKind::Logic,
        HoleKind::ArrayAcc,
        HoleKind::Cast,
    ];

    pub fn name(self) -> &'static str {
        match self {
            HoleKind::Id => "Id",
            HoleKind::Val => "Val",
            HoleKind::Arith => "Arith",
            HoleKind::Shift => "Shift",
            HoleKind::Relation => "Relation",
            HoleKind::Logic => "Logic",
            HoleKind::ArrayAcc => "ArrayAcc",
            HoleKind::Cast => "Cast",
        }
    }

    pub fn from_name(s: &str) -> Option<HoleKind> {
        HoleKind::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, HoleKind::Id | HoleKind::Val)
    }
}

impl fmt::Display for HoleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One operand slot of a compound hole: either another hole or an
/// expression kept verbatim (used when the operand's category is excluded
/// from the extraction).
#[derive(Clone, Debug, PartialEq)]
pub enum Operand {
    Hole(HoleSpec),
    Fixed(Expr),
}

/// The search space of one hole.
#[derive(Clone, Debug)]
pub struct HoleSpec {
    pub kind: HoleKind,
    pub ty: Type,
    pub ops: Vec<BinOp>,
    pub operands: Vec<Operand>,
    /// The expression this hole replaced. Not part of the printed form.
    pub source: Option<Box<Expr>>,
}

impl PartialEq for HoleSpec {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.ty == other.ty && self.ops == other.ops && self.operands == other.operands
    }
}

impl HoleSpec {
    pub fn terminal(kind: HoleKind, ty: Type) -> Self {
        HoleSpec { kind, ty, ops: Vec::new(), operands: Vec::new(), source: None }
    }

    /// Visits this spec and every nested spec, outermost first.
    pub fn for_each_spec<'a>(&'a self, f: &mut impl FnMut(&'a HoleSpec)) {
        f(self);
        for op in &self.operands {
            if let Operand::Hole(h) = op {
                h.for_each_spec(f);
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Lit(Lit),
    Ident(String),
    This,
    Field(Box<Expr>, String),
    Index(Box<Expr>, Box<Expr>),
    Length(Box<Expr>),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Cast(Type, Box<Expr>),
    Call { recv: Option<Box<Expr>>, name: String, args: Vec<Expr> },
    New { record: String, args: Vec<Expr> },
    NewArray { elem: ElemType, len: Box<Expr> },
    ArrayLit { elem: ElemType, elems: Vec<Expr> },
    /// `name++` / `name--` on an int variable; yields the old value.
    PostIncDec { name: String, inc: bool },
    /// Nondeterministic 32-bit clock sample.
    NanoTime,
    Hole { id: u32, spec: Box<HoleSpec> },
    /// A hole left undecided by generation; always traps when evaluated.
    Unfilled { id: u32, ty: Type },
}

impl Expr {
    pub fn int(v: i32) -> Expr {
        Expr::Lit(Lit::Int(v))
    }

    pub fn double(v: f64) -> Expr {
        Expr::Lit(Lit::Double(F64::new(v)))
    }

    pub fn ident(name: impl Into<String>) -> Expr {
        Expr::Ident(name.into())
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Expr {
        Expr::Binary(op, Box::new(l), Box::new(r))
    }

    /// Direct children in evaluation order. Hole operands are not children.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Lit(_) | Expr::Ident(_) | Expr::This | Expr::PostIncDec { .. } | Expr::NanoTime => vec![],
            Expr::Hole { .. } | Expr::Unfilled { .. } => vec![],
            Expr::Field(t, _) | Expr::Length(t) | Expr::Unary(_, t) | Expr::Cast(_, t) => vec![t],
            Expr::NewArray { len, .. } => vec![len],
            Expr::Index(a, i) | Expr::Binary(_, a, i) => vec![a, i],
            Expr::Call { recv, args, .. } => recv.iter().map(|b| b.as_ref()).chain(args.iter()).collect(),
            Expr::New { args, .. } => args.iter().collect(),
            Expr::ArrayLit { elems, .. } => elems.iter().collect(),
        }
    }

    pub fn children_mut(&mut self) -> Vec<&mut Expr> {
        match self {
            Expr::Lit(_) | Expr::Ident(_) | Expr::This | Expr::PostIncDec { .. } | Expr::NanoTime => vec![],
            Expr::Hole { .. } | Expr::Unfilled { .. } => vec![],
            Expr::Field(t, _) | Expr::Length(t) | Expr::Unary(_, t) | Expr::Cast(_, t) => vec![t],
            Expr::NewArray { len, .. } => vec![len],
            Expr::Index(a, i) | Expr::Binary(_, a, i) => vec![a, i],
            Expr::Call { recv, args, .. } => recv.iter_mut().map(|b| b.as_mut()).chain(args.iter_mut()).collect(),
            Expr::New { args, .. } => args.iter_mut().collect(),
            Expr::ArrayLit { elems, .. } => elems.iter_mut().collect(),
        }
    }

    /// Pre-order walk over this expression and all sub-expressions.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    /// Post-order mutable walk.
    pub fn walk_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        for c in self.children_mut() {
            c.walk_mut(f);
        }
        f(self);
    }

    pub fn contains_hole(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| found |= matches!(e, Expr::Hole { .. }));
        found
    }

    /// Whether evaluating this expression can observe or change state beyond
    /// reading variables (calls, allocation, increments, clock reads, holes).
    pub fn has_effects(&self) -> bool {
        let mut found = false;
        self.walk(&mut |e| {
            found |= matches!(
                e,
                Expr::Call { .. }
                    | Expr::New { .. }
                    | Expr::NewArray { .. }
                    | Expr::ArrayLit { .. }
                    | Expr::PostIncDec { .. }
                    | Expr::NanoTime
                    | Expr::Hole { .. }
                    | Expr::Unfilled { .. }
            )
        });
        found
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Stmt {
    VarDecl { ty: Type, name: String, init: Expr },
    /// `target = value` or, with `op`, `target op= value`. The target is an
    /// `Ident`, `Field` or `Index` expression.
    Assign { target: Expr, op: Option<BinOp>, value: Expr },
    Expr(Expr),
    If { cond: Expr, then_blk: Block, else_blk: Option<Block> },
    While { cond: Expr, body: Block },
    For { init: Vec<Stmt>, cond: Expr, update: Vec<Stmt>, body: Block },
    Return(Option<Expr>),
    Block(Block),
}

pub type Block = Vec<Stmt>;

#[derive(Clone, Debug, PartialEq)]
pub struct GlobalDecl {
    pub ty: Type,
    pub name: String,
    pub init: Expr,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldDecl {
    pub name: String,
    pub ty: Type,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecordDecl {
    pub name: String,
    pub fields: Vec<FieldDecl>,
}

impl RecordDecl {
    pub fn field_index(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub name: String,
    pub ty: Type,
}

/// Name of the method that `new R(args)` runs on a fresh record.
pub const CONSTRUCTOR: &str = "init";

#[derive(Clone, Debug, PartialEq)]
pub struct FunctionDecl {
    pub name: String,
    pub receiver: Option<String>,
    pub params: Vec<Param>,
    pub ret: Type,
    pub body: Block,
}

impl FunctionDecl {
    /// `Rec.name` for methods, `name` otherwise. Entries are referenced by
    /// this form.
    pub fn qualified_name(&self) -> String {
        match &self.receiver {
            Some(r) => format!("{r}.{}", self.name),
            None => self.name.clone(),
        }
    }

    pub fn is_constructor(&self) -> bool {
        self.receiver.is_some() && self.name == CONSTRUCTOR
    }

    /// Parameter types with the receiver first, in call order.
    pub fn signature(&self) -> Vec<Type> {
        self.receiver
            .iter()
            .map(|r| Type::Record(r.clone()))
            .chain(self.params.iter().map(|p| p.ty.clone()))
            .collect()
    }
}

/// How the checksum driver obtains the entry's arguments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ArgSource {
    /// One zero-argument provider function per parameter, receiver first.
    PerParam(Vec<String>),
    /// One provider returning a record whose fields are the arguments.
    Tuple(String),
}

/// The checksum driver declaration: `harness entry(providers) loops N;`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Harness {
    pub entry: String,
    pub args: ArgSource,
    pub loops: Option<u64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Program {
    pub globals: Vec<GlobalDecl>,
    pub records: Vec<RecordDecl>,
    pub functions: Vec<FunctionDecl>,
    pub harness: Option<Harness>,
}

impl Program {
    pub fn record(&self, name: &str) -> Option<&RecordDecl> {
        self.records.iter().find(|r| r.name == name)
    }

    pub fn global_index(&self, name: &str) -> Option<usize> {
        self.globals.iter().position(|g| g.name == name)
    }

    /// Looks up a function by qualified name (`f` or `Rec.m`).
    pub fn function(&self, qualified: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.qualified_name() == qualified)
    }

    pub fn function_index(&self, qualified: &str) -> Option<usize> {
        self.functions.iter().position(|f| f.qualified_name() == qualified)
    }

    pub fn method(&self, receiver: &str, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.receiver.as_deref() == Some(receiver) && f.name == name)
    }

    pub fn free_function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.receiver.is_none() && f.name == name)
    }

    /// Every expression in the program, in printed order.
    pub fn for_each_expr<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        for g in &self.globals {
            g.init.walk(f);
        }
        for func in &self.functions {
            for s in &func.body {
                s.walk_exprs(f);
            }
        }
    }

    pub fn for_each_expr_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        for g in &mut self.globals {
            g.init.walk_mut(f);
        }
        for func in &mut self.functions {
            for s in &mut func.body {
                s.walk_exprs_mut(f);
            }
        }
    }

    /// All hole nodes in printed order.
    pub fn holes(&self) -> Vec<(u32, &HoleSpec)> {
        let mut out = Vec::new();
        self.for_each_expr(&mut |e| {
            if let Expr::Hole { id, spec } = e {
                out.push((*id, spec.as_ref()));
            }
        });
        out
    }
}

impl Stmt {
    /// Direct expressions of this statement, in printed order.
    pub fn exprs(&self) -> Vec<&Expr> {
        match self {
            Stmt::VarDecl { init, .. } => vec![init],
            Stmt::Assign { target, value, .. } => vec![target, value],
            Stmt::Expr(e) => vec![e],
            Stmt::If { cond, .. } | Stmt::While { cond, .. } => vec![cond],
            Stmt::For { cond, .. } => vec![cond],
            Stmt::Return(e) => e.iter().collect(),
            Stmt::Block(_) => vec![],
        }
    }

    /// Pre-order walk over every expression in this statement and nested ones.
    pub fn walk_exprs<'a>(&'a self, f: &mut impl FnMut(&'a Expr)) {
        match self {
            Stmt::VarDecl { init, .. } => init.walk(f),
            Stmt::Assign { target, value, .. } => {
                target.walk(f);
                value.walk(f);
            }
            Stmt::Expr(e) => e.walk(f),
            Stmt::If { cond, then_blk, else_blk } => {
                cond.walk(f);
                then_blk.iter().for_each(|s| s.walk_exprs(f));
                if let Some(b) = else_blk {
                    b.iter().for_each(|s| s.walk_exprs(f));
                }
            }
            Stmt::While { cond, body } => {
                cond.walk(f);
                body.iter().for_each(|s| s.walk_exprs(f));
            }
            Stmt::For { init, cond, update, body } => {
                init.iter().for_each(|s| s.walk_exprs(f));
                cond.walk(f);
                update.iter().for_each(|s| s.walk_exprs(f));
                body.iter().for_each(|s| s.walk_exprs(f));
            }
            Stmt::Return(e) => {
                if let Some(e) = e {
                    e.walk(f)
                }
            }
            Stmt::Block(b) => b.iter().for_each(|s| s.walk_exprs(f)),
        }
    }

    pub fn walk_exprs_mut(&mut self, f: &mut impl FnMut(&mut Expr)) {
        match self {
            Stmt::VarDecl { init, .. } => init.walk_mut(f),
            Stmt::Assign { target, value, .. } => {
                target.walk_mut(f);
                value.walk_mut(f);
            }
            Stmt::Expr(e) => e.walk_mut(f),
            Stmt::If { cond, then_blk, else_blk } => {
                cond.walk_mut(f);
                then_blk.iter_mut().for_each(|s| s.walk_exprs_mut(f));
                if let Some(b) = else_blk {
                    b.iter_mut().for_each(|s| s.walk_exprs_mut(f));
                }
            }
            Stmt::While { cond, body } => {
                cond.walk_mut(f);
                body.iter_mut().for_each(|s| s.walk_exprs_mut(f));
            }
            Stmt::For { init, cond, update, body } => {
                init.iter_mut().for_each(|s| s.walk_exprs_mut(f));
                cond.walk_mut(f);
                update.iter_mut().for_each(|s| s.walk_exprs_mut(f));
                body.iter_mut().for_each(|s| s.walk_exprs_mut(f));
            }
            Stmt::Return(e) => {
                if let Some(e) = e {
                    e.walk_mut(f)
                }
            }
            Stmt::Block(b) => b.iter_mut().for_each(|s| s.walk_exprs_mut(f)),
        }
    }

    /// Visits this statement and every nested statement, outermost first.
    pub fn walk_stmts<'a>(&'a self, f: &mut impl FnMut(&'a Stmt)) {
        f(self);
        match self {
            Stmt::If { then_blk, else_blk, .. } => {
                then_blk.iter().for_each(|s| s.walk_stmts(f));
                if let Some(b) = else_blk {
                    b.iter().for_each(|s| s.walk_stmts(f));
                }
            }
            Stmt::While { body, .. } => body.iter().for_each(|s| s.walk_stmts(f)),
            Stmt::For { init, update, body, .. } => {
                init.iter().for_each(|s| s.walk_stmts(f));
                update.iter().for_each(|s| s.walk_stmts(f));
                body.iter().for_each(|s| s.walk_stmts(f));
            }
            Stmt::Block(b) => b.iter().for_each(|s| s.walk_stmts(f)),
            _ => {}
        }
    }
}
