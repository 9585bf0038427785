use super::ast::*;
use super::lexer::{tokenize, Tok, Token};
use super::ParseError;

/// Parses MiniJ (or template) source without type checking.
pub fn parse_program(src: &str) -> Result<Program, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    p.program()
}

/// Parses a standalone expression (used for session logs and tests).
pub fn parse_expr(src: &str) -> Result<Expr, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let e = p.expr()?;
    p.expect_eof()?;
    Ok(e)
}

pub fn parse_type(src: &str) -> Result<Type, ParseError> {
    let toks = tokenize(src)?;
    let mut p = Parser { toks, pos: 0 };
    let t = p.ty()?;
    p.expect_eof()?;
    Ok(t)
}

const RESERVED: &[&str] = &[
    "global", "record", "fn", "harness", "if", "else", "while", "for", "return", "new", "true", "false", "null", "this",
    "int", "double", "bool", "char", "void", "NaN", "Infinity", "nanotime", "unfilled", "length",
];

pub fn is_reserved(word: &str) -> bool {
    RESERVED.contains(&word)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_at(&self, n: usize) -> &Tok {
        let i = (self.pos + n).min(self.toks.len() - 1);
        &self.toks[i].tok
    }

    fn next(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos < self.toks.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn err(&self, msg: impl Into<String>) -> ParseError {
        let t = &self.toks[self.pos];
        ParseError::new(t.line, t.col, msg)
    }

    fn is_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Tok::Punct(q) if *q == p)
    }

    fn is_word(&self, w: &str) -> bool {
        matches!(self.peek(), Tok::Ident(s) if s == w)
    }

    fn eat_punct(&mut self, p: &str) -> bool {
        if self.is_punct(p) {
            self.next();
            true
        } else {
            false
        }
    }

    fn eat_word(&mut self, w: &str) -> bool {
        if self.is_word(w) {
            self.next();
            true
        } else {
            false
        }
    }

    fn expect_punct(&mut self, p: &str) -> Result<(), ParseError> {
        if self.eat_punct(p) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{p}`, found {}", describe(self.peek()))))
        }
    }

    fn expect_word(&mut self, w: &str) -> Result<(), ParseError> {
        if self.eat_word(w) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{w}`, found {}", describe(self.peek()))))
        }
    }

    fn expect_eof(&self) -> Result<(), ParseError> {
        match self.peek() {
            Tok::Eof => Ok(()),
            t => Err(self.err(format!("unexpected {}", describe(t)))),
        }
    }

    fn name(&mut self) -> Result<String, ParseError> {
        match self.peek().clone() {
            Tok::Ident(s) if !is_reserved(&s) => {
                self.next();
                Ok(s)
            }
            t => Err(self.err(format!("expected identifier, found {}", describe(&t)))),
        }
    }

    fn program(&mut self) -> Result<Program, ParseError> {
        let mut prog = Program::default();
        loop {
            if matches!(self.peek(), Tok::Eof) {
                return Ok(prog);
            }
            if self.eat_word("global") {
                let ty = self.ty()?;
                let name = self.name()?;
                self.expect_punct("=")?;
                let init = self.expr()?;
                self.expect_punct(";")?;
                prog.globals.push(GlobalDecl { ty, name, init });
            } else if self.eat_word("record") {
                let name = self.name()?;
                self.expect_punct("{")?;
                let mut fields = Vec::new();
                while !self.eat_punct("}") {
                    let ty = self.ty()?;
                    let fname = self.name()?;
                    self.expect_punct(";")?;
                    fields.push(FieldDecl { name: fname, ty });
                }
                prog.records.push(RecordDecl { name, fields });
            } else if self.eat_word("fn") {
                prog.functions.push(self.function()?);
            } else if self.eat_word("harness") {
                if prog.harness.is_some() {
                    return Err(self.err("duplicate harness declaration"));
                }
                prog.harness = Some(self.harness()?);
            } else {
                return Err(self.err(format!("expected declaration, found {}", describe(self.peek()))));
            }
        }
    }

    fn function(&mut self) -> Result<FunctionDecl, ParseError> {
        let ret = self.ty()?;
        let first = self.name()?;
        let (receiver, name) = if self.eat_punct(".") {
            let n = match self.peek().clone() {
                Tok::Ident(s) if !is_reserved(&s) || s == "init" => {
                    self.next();
                    s
                }
                t => return Err(self.err(format!("expected method name, found {}", describe(&t)))),
            };
            (Some(first), n)
        } else {
            (None, first)
        };
        self.expect_punct("(")?;
        let mut params = Vec::new();
        if !self.eat_punct(")") {
            loop {
                let ty = self.ty()?;
                let pname = self.name()?;
                params.push(Param { name: pname, ty });
                if self.eat_punct(")") {
                    break;
                }
                self.expect_punct(",")?;
            }
        }
        let body = self.block()?;
        Ok(FunctionDecl { name, receiver, params, ret, body })
    }

    fn harness(&mut self) -> Result<Harness, ParseError> {
        let mut entry = self.name()?;
        if self.eat_punct(".") {
            entry = format!("{entry}.{}", self.name()?);
        }
        let args = if self.eat_word("from") {
            ArgSource::Tuple(self.name()?)
        } else {
            self.expect_punct("(")?;
            let mut names = Vec::new();
            if !self.eat_punct(")") {
                loop {
                    names.push(self.name()?);
                    if self.eat_punct(")") {
                        break;
                    }
                    self.expect_punct(",")?;
                }
            }
            ArgSource::PerParam(names)
        };
        let loops = if self.eat_word("loops") {
            match self.next() {
                Tok::Int(n) => Some(n),
                t => return Err(self.err(format!("expected loop count, found {}", describe(&t)))),
            }
        } else {
            None
        };
        self.expect_punct(";")?;
        Ok(Harness { entry, args, loops })
    }

    fn prim_type(word: &str) -> Option<Type> {
        Some(match word {
            "int" => Type::Int,
            "double" => Type::Double,
            "bool" => Type::Bool,
            "char" => Type::Char,
            "void" => Type::Unit,
            _ => return None,
        })
    }

    fn ty(&mut self) -> Result<Type, ParseError> {
        let word = match self.peek().clone() {
            Tok::Ident(w) => w,
            t => return Err(self.err(format!("expected type, found {}", describe(&t)))),
        };
        let base = match Self::prim_type(&word) {
            Some(t) => t,
            None if !is_reserved(&word) => Type::Record(word),
            None => return Err(self.err(format!("expected type, found `{word}`"))),
        };
        self.next();
        if self.is_punct("[") && matches!(self.peek_at(1), Tok::Punct("]")) {
            self.next();
            self.next();
            let elem = ElemType::from_type(&base).ok_or_else(|| self.err(format!("arrays of `{base}` are not supported")))?;
            return Ok(Type::Array(elem));
        }
        Ok(base)
    }

    /// Whether the upcoming tokens start a local variable declaration.
    fn at_decl(&self) -> bool {
        match self.peek() {
            Tok::Ident(w) if matches!(w.as_str(), "int" | "double" | "bool" | "char") => true,
            Tok::Ident(w) if !is_reserved(w) => matches!(self.peek_at(1), Tok::Ident(n) if !is_reserved(n)),
            _ => false,
        }
    }

    fn block(&mut self) -> Result<Block, ParseError> {
        self.expect_punct("{")?;
        let mut stmts = Vec::new();
        while !self.eat_punct("}") {
            if matches!(self.peek(), Tok::Eof) {
                return Err(self.err("unexpected end of input in block"));
            }
            stmts.push(self.stmt()?);
        }
        Ok(stmts)
    }

    fn stmt(&mut self) -> Result<Stmt, ParseError> {
        if self.is_punct("{") {
            return Ok(Stmt::Block(self.block()?));
        }
        if self.eat_word("if") {
            return self.if_rest();
        }
        if self.eat_word("while") {
            self.expect_punct("(")?;
            let cond = self.expr()?;
            self.expect_punct(")")?;
            let body = self.block()?;
            return Ok(Stmt::While { cond, body });
        }
        if self.eat_word("for") {
            self.expect_punct("(")?;
            let init = if self.is_punct(";") { Vec::new() } else { self.for_init()? };
            self.expect_punct(";")?;
            let cond = self.expr()?;
            self.expect_punct(";")?;
            let mut update = Vec::new();
            if !self.is_punct(")") {
                loop {
                    update.push(self.simple()?);
                    if !self.eat_punct(",") {
                        break;
                    }
                }
            }
            self.expect_punct(")")?;
            let body = self.block()?;
            return Ok(Stmt::For { init, cond, update, body });
        }
        if self.eat_word("return") {
            if self.eat_punct(";") {
                return Ok(Stmt::Return(None));
            }
            let e = self.expr()?;
            self.expect_punct(";")?;
            return Ok(Stmt::Return(Some(e)));
        }
        if self.at_decl() {
            let ty = self.ty()?;
            let name = self.name()?;
            self.expect_punct("=")?;
            let init = self.expr()?;
            self.expect_punct(";")?;
            return Ok(Stmt::VarDecl { ty, name, init });
        }
        let s = self.simple()?;
        self.expect_punct(";")?;
        Ok(s)
    }

    fn if_rest(&mut self) -> Result<Stmt, ParseError> {
        self.expect_punct("(")?;
        let cond = self.expr()?;
        self.expect_punct(")")?;
        let then_blk = self.block()?;
        let else_blk = if self.eat_word("else") {
            if self.eat_word("if") {
                Some(vec![self.if_rest()?])
            } else {
                Some(self.block()?)
            }
        } else {
            None
        };
        Ok(Stmt::If { cond, then_blk, else_blk })
    }

    fn for_init(&mut self) -> Result<Vec<Stmt>, ParseError> {
        let mut out = Vec::new();
        if self.at_decl() {
            let ty = self.ty()?;
            loop {
                let name = self.name()?;
                self.expect_punct("=")?;
                let init = self.expr()?;
                out.push(Stmt::VarDecl { ty: ty.clone(), name, init });
                if !self.eat_punct(",") {
                    break;
                }
            }
        } else {
            loop {
                out.push(self.simple()?);
                if !self.eat_punct(",") {
                    break;
                }
            }
        }
        Ok(out)
    }

    /// Assignment or expression statement without the trailing `;`.
    fn simple(&mut self) -> Result<Stmt, ParseError> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Tok::Punct("=") => None,
            Tok::Punct("+=") => Some(BinOp::Add),
            Tok::Punct("-=") => Some(BinOp::Sub),
            Tok::Punct("*=") => Some(BinOp::Mul),
            Tok::Punct("/=") => Some(BinOp::Div),
            Tok::Punct("%=") => Some(BinOp::Rem),
            _ => return Ok(Stmt::Expr(lhs)),
        };
        self.next();
        if !matches!(lhs, Expr::Ident(_) | Expr::Field(..) | Expr::Index(..)) {
            return Err(self.err("left-hand side is not assignable"));
        }
        let value = self.expr()?;
        Ok(Stmt::Assign { target: lhs, op, value })
    }

    pub fn expr(&mut self) -> Result<Expr, ParseError> {
        self.binary(1)
    }

    fn binary(&mut self, min_prec: u8) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Tok::Punct(p) => match BinOp::from_symbol(p) {
                    Some(op) if op.precedence() >= min_prec => op,
                    _ => break,
                },
                _ => break,
            };
            self.next();
            let rhs = self.binary(op.precedence() + 1)?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.is_punct("-") {
            match self.peek_at(1).clone() {
                Tok::Int(n) => {
                    self.next();
                    self.next();
                    if n > 1u64 << 31 {
                        return Err(self.err("int literal out of range"));
                    }
                    return self.postfix(Expr::Lit(Lit::Int((n as i64).wrapping_neg() as i32)));
                }
                Tok::Double(v) => {
                    self.next();
                    self.next();
                    return self.postfix(Expr::double(-v));
                }
                Tok::Ident(w) if w == "Infinity" => {
                    self.next();
                    self.next();
                    return Ok(Expr::double(f64::NEG_INFINITY));
                }
                _ => {
                    self.next();
                    return Ok(Expr::Unary(UnOp::Neg, Box::new(self.unary()?)));
                }
            }
        }
        if self.eat_punct("!") {
            return Ok(Expr::Unary(UnOp::Not, Box::new(self.unary()?)));
        }
        if self.eat_punct("~") {
            return Ok(Expr::Unary(UnOp::BitNot, Box::new(self.unary()?)));
        }
        if self.is_punct("(") {
            if let Tok::Ident(w) = self.peek_at(1) {
                if matches!(w.as_str(), "int" | "double" | "char" | "bool") && matches!(self.peek_at(2), Tok::Punct(")")) {
                    self.next();
                    let ty = self.ty()?;
                    self.expect_punct(")")?;
                    let operand = self.unary()?;
                    return Ok(Expr::Cast(ty, Box::new(operand)));
                }
            }
        }
        let prim = self.primary()?;
        self.postfix(prim)
    }

    fn postfix(&mut self, mut e: Expr) -> Result<Expr, ParseError> {
        loop {
            if self.eat_punct(".") {
                if self.eat_word("length") {
                    e = Expr::Length(Box::new(e));
                    continue;
                }
                let name = match self.peek().clone() {
                    Tok::Ident(s) if !is_reserved(&s) || s == "init" => {
                        self.next();
                        s
                    }
                    t => return Err(self.err(format!("expected member name, found {}", describe(&t)))),
                };
                if self.is_punct("(") {
                    let args = self.args()?;
                    e = Expr::Call { recv: Some(Box::new(e)), name, args };
                } else {
                    e = Expr::Field(Box::new(e), name);
                }
            } else if self.eat_punct("[") {
                let idx = self.expr()?;
                self.expect_punct("]")?;
                e = Expr::Index(Box::new(e), Box::new(idx));
            } else {
                return Ok(e);
            }
        }
    }

    fn args(&mut self) -> Result<Vec<Expr>, ParseError> {
        self.expect_punct("(")?;
        let mut args = Vec::new();
        if self.eat_punct(")") {
            return Ok(args);
        }
        loop {
            args.push(self.expr()?);
            if self.eat_punct(")") {
                return Ok(args);
            }
            self.expect_punct(",")?;
        }
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        match self.peek().clone() {
            Tok::Int(n) => {
                self.next();
                if n > i32::MAX as u64 {
                    return Err(self.err("int literal out of range"));
                }
                Ok(Expr::int(n as i32))
            }
            Tok::Double(v) => {
                self.next();
                Ok(Expr::double(v))
            }
            Tok::Char(c) => {
                self.next();
                Ok(Expr::Lit(Lit::Char(c)))
            }
            Tok::HoleMark(id) => {
                self.next();
                self.expect_punct("{")?;
                let spec = self.hole_body()?;
                self.expect_punct("}")?;
                Ok(Expr::Hole { id, spec: Box::new(spec) })
            }
            Tok::Punct("(") => {
                self.next();
                let e = self.expr()?;
                self.expect_punct(")")?;
                Ok(e)
            }
            Tok::Ident(w) => {
                self.next();
                match w.as_str() {
                    "true" => Ok(Expr::Lit(Lit::Bool(true))),
                    "false" => Ok(Expr::Lit(Lit::Bool(false))),
                    "null" => Ok(Expr::Lit(Lit::Null)),
                    "NaN" => Ok(Expr::double(f64::NAN)),
                    "Infinity" => Ok(Expr::double(f64::INFINITY)),
                    "this" => Ok(Expr::This),
                    "nanotime" => {
                        self.expect_punct("(")?;
                        self.expect_punct(")")?;
                        Ok(Expr::NanoTime)
                    }
                    "unfilled" => {
                        self.expect_punct("(")?;
                        let id = match self.next() {
                            Tok::Int(n) if n <= u32::MAX as u64 => n as u32,
                            t => return Err(self.err(format!("expected hole id, found {}", describe(&t)))),
                        };
                        self.expect_punct(",")?;
                        let ty = self.ty()?;
                        self.expect_punct(")")?;
                        Ok(Expr::Unfilled { id, ty })
                    }
                    "new" => self.new_expr(),
                    _ if is_reserved(&w) => Err(self.err(format!("unexpected keyword `{w}`"))),
                    _ => {
                        if self.is_punct("(") {
                            let args = self.args()?;
                            return Ok(Expr::Call { recv: None, name: w, args });
                        }
                        if self.eat_punct("++") {
                            return Ok(Expr::PostIncDec { name: w, inc: true });
                        }
                        if self.eat_punct("--") {
                            return Ok(Expr::PostIncDec { name: w, inc: false });
                        }
                        Ok(Expr::Ident(w))
                    }
                }
            }
            t => Err(self.err(format!("expected expression, found {}", describe(&t)))),
        }
    }

    fn new_expr(&mut self) -> Result<Expr, ParseError> {
        let word = match self.peek().clone() {
            Tok::Ident(w) => w,
            t => return Err(self.err(format!("expected type after `new`, found {}", describe(&t)))),
        };
        if let Some(base) = Self::prim_type(&word) {
            self.next();
            let elem = ElemType::from_type(&base).ok_or_else(|| self.err(format!("arrays of `{base}` are not supported")))?;
            self.expect_punct("[")?;
            if self.eat_punct("]") {
                self.expect_punct("{")?;
                let mut elems = Vec::new();
                if !self.eat_punct("}") {
                    loop {
                        elems.push(self.expr()?);
                        if self.eat_punct("}") {
                            break;
                        }
                        self.expect_punct(",")?;
                    }
                }
                return Ok(Expr::ArrayLit { elem, elems });
            }
            let len = self.expr()?;
            self.expect_punct("]")?;
            return Ok(Expr::NewArray { elem, len: Box::new(len) });
        }
        let record = self.name()?;
        let args = self.args()?;
        Ok(Expr::New { record, args })
    }

    fn hole_body(&mut self) -> Result<HoleSpec, ParseError> {
        self.expect_word("kind")?;
        self.expect_punct("=")?;
        let kind = match self.next() {
            Tok::Ident(k) => HoleKind::from_name(&k).ok_or_else(|| self.err(format!("unknown hole kind `{k}`")))?,
            t => return Err(self.err(format!("expected hole kind, found {}", describe(&t)))),
        };
        self.expect_punct(";")?;
        self.expect_word("type")?;
        self.expect_punct("=")?;
        let ty = self.ty()?;
        self.expect_punct(";")?;
        self.expect_word("ops")?;
        self.expect_punct("=")?;
        self.expect_punct("{")?;
        let mut ops = Vec::new();
        if !self.eat_punct("}") {
            loop {
                let op = match self.next() {
                    Tok::Punct(p) => BinOp::from_symbol(p).ok_or_else(|| self.err(format!("unknown operator `{p}`")))?,
                    t => return Err(self.err(format!("expected operator, found {}", describe(&t)))),
                };
                ops.push(op);
                if self.eat_punct("}") {
                    break;
                }
                self.expect_punct(",")?;
            }
        }
        self.expect_punct(";")?;
        self.expect_word("operands")?;
        self.expect_punct("=")?;
        self.expect_punct("[")?;
        let mut operands = Vec::new();
        if !self.eat_punct("]") {
            loop {
                if self.eat_punct("{") {
                    let inner = self.hole_body()?;
                    self.expect_punct("}")?;
                    operands.push(Operand::Hole(inner));
                } else {
                    operands.push(Operand::Fixed(self.expr()?));
                }
                if self.eat_punct("]") {
                    break;
                }
                self.expect_punct(",")?;
            }
        }
        Ok(HoleSpec { kind, ty, ops, operands, source: None })
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("`{s}`"),
        Tok::Int(n) => format!("`{n}`"),
        Tok::Double(v) => format!("`{v:?}`"),
        Tok::Char(c) => format!("char {c:#x}"),
        Tok::HoleMark(k) => format!("`?H{k}`"),
        Tok::Punct(p) => format!("`{p}`"),
        Tok::Eof => "end of input".to_string(),
    }
}
