use super::ast::*;
use std::fmt::Write;

const INDENT: &str = "    ";

/// Canonical source text. Globals come first, then records, functions and
/// the harness declaration, separated by blank lines.
pub fn print_program(p: &Program) -> String {
    let mut sections: Vec<String> = Vec::new();
    if !p.globals.is_empty() {
        let mut s = String::new();
        for g in &p.globals {
            let _ = writeln!(s, "global {} {} = {};", g.ty, g.name, print_expr(&g.init));
        }
        sections.push(s);
    }
    for r in &p.records {
        let mut s = format!("record {} {{\n", r.name);
        for f in &r.fields {
            let _ = writeln!(s, "{INDENT}{} {};", f.ty, f.name);
        }
        s.push_str("}\n");
        sections.push(s);
    }
    for f in &p.functions {
        sections.push(print_function(f));
    }
    if let Some(h) = &p.harness {
        sections.push(format!("{}\n", print_harness(h)));
    }
    sections.join("\n")
}

pub fn print_harness(h: &Harness) -> String {
    let mut s = format!("harness {}", h.entry);
    match &h.args {
        ArgSource::PerParam(names) => {
            let _ = write!(s, "({})", names.join(", "));
        }
        ArgSource::Tuple(name) => {
            let _ = write!(s, " from {name}");
        }
    }
    if let Some(n) = h.loops {
        let _ = write!(s, " loops {n}");
    }
    s.push(';');
    s
}

pub fn print_function(f: &FunctionDecl) -> String {
    let mut s = format!("fn {} ", f.ret);
    if let Some(r) = &f.receiver {
        let _ = write!(s, "{r}.");
    }
    let params: Vec<String> = f.params.iter().map(|p| format!("{} {}", p.ty, p.name)).collect();
    let _ = write!(s, "{}({}) ", f.name, params.join(", "));
    print_block(&mut s, &f.body, 0);
    s.push('\n');
    s
}

fn print_block(out: &mut String, b: &Block, depth: usize) {
    out.push_str("{\n");
    for st in b {
        print_stmt(out, st, depth + 1);
    }
    out.push_str(&INDENT.repeat(depth));
    out.push('}');
}

fn print_stmt(out: &mut String, st: &Stmt, depth: usize) {
    out.push_str(&INDENT.repeat(depth));
    match st {
        Stmt::If { .. } => print_if(out, st, depth),
        Stmt::While { cond, body } => {
            let _ = write!(out, "while ({}) ", print_expr(cond));
            print_block(out, body, depth);
        }
        Stmt::For { init, cond, update, body } => {
            let _ = write!(out, "for ({}; {}; {}) ", print_for_init(init), print_expr(cond), print_simple_list(update));
            print_block(out, body, depth);
        }
        Stmt::Block(b) => print_block(out, b, depth),
        other => {
            out.push_str(&print_simple(other));
            out.push(';');
        }
    }
    out.push('\n');
}

fn print_if(out: &mut String, st: &Stmt, depth: usize) {
    let Stmt::If { cond, then_blk, else_blk } = st else { unreachable!() };
    let _ = write!(out, "if ({}) ", print_expr(cond));
    print_block(out, then_blk, depth);
    match else_blk.as_deref() {
        None => {}
        Some([inner @ Stmt::If { .. }]) => {
            out.push_str(" else ");
            print_if(out, inner, depth);
        }
        Some(b) => {
            out.push_str(" else ");
            print_block(out, &b.to_vec(), depth);
        }
    }
}

fn print_for_init(init: &[Stmt]) -> String {
    if let Some(Stmt::VarDecl { ty, .. }) = init.first() {
        let decls: Vec<String> = init
            .iter()
            .map(|s| match s {
                Stmt::VarDecl { name, init, .. } => format!("{name} = {}", print_expr(init)),
                other => print_simple(other),
            })
            .collect();
        return format!("{ty} {}", decls.join(", "));
    }
    print_simple_list(init)
}

fn print_simple_list(stmts: &[Stmt]) -> String {
    stmts.iter().map(print_simple).collect::<Vec<_>>().join(", ")
}

/// A statement that fits on one line, without the trailing `;`.
fn print_simple(st: &Stmt) -> String {
    match st {
        Stmt::VarDecl { ty, name, init } => format!("{ty} {name} = {}", print_expr(init)),
        Stmt::Assign { target, op, value } => {
            let sym = op.map(|o| format!("{}=", o.symbol())).unwrap_or_else(|| "=".into());
            format!("{} {sym} {}", print_expr(target), print_expr(value))
        }
        Stmt::Expr(e) => print_expr(e),
        Stmt::Return(None) => "return".into(),
        Stmt::Return(Some(e)) => format!("return {}", print_expr(e)),
        other => {
            let mut s = String::new();
            print_stmt(&mut s, other, 0);
            s.trim_end().to_string()
        }
    }
}

const UNARY_PREC: u8 = 8;
const ATOM_PREC: u8 = 9;

fn prec(e: &Expr) -> u8 {
    match e {
        Expr::Binary(op, ..) => op.precedence(),
        Expr::Unary(..) | Expr::Cast(..) => UNARY_PREC,
        Expr::Lit(Lit::Int(v)) if *v < 0 => UNARY_PREC,
        Expr::Lit(Lit::Double(d)) if d.get().is_sign_negative() && !d.get().is_nan() => UNARY_PREC,
        _ => ATOM_PREC,
    }
}

fn wrap(e: &Expr, parens: bool) -> String {
    if parens {
        format!("({})", print_expr(e))
    } else {
        print_expr(e)
    }
}

pub fn print_expr(e: &Expr) -> String {
    match e {
        Expr::Lit(l) => print_lit(l),
        Expr::Ident(n) => n.clone(),
        Expr::This => "this".into(),
        Expr::Field(t, f) => format!("{}.{f}", wrap(t, prec(t) < ATOM_PREC)),
        Expr::Index(a, i) => format!("{}[{}]", wrap(a, prec(a) < ATOM_PREC), print_expr(i)),
        Expr::Length(a) => format!("{}.length", wrap(a, prec(a) < ATOM_PREC)),
        Expr::Unary(op, x) => {
            let parens = prec(x) < UNARY_PREC || (*op == UnOp::Neg && matches!(**x, Expr::Lit(_) | Expr::Unary(..)));
            format!("{}{}", op.symbol(), wrap(x, parens))
        }
        Expr::Binary(op, l, r) => {
            let p = op.precedence();
            format!("{} {} {}", wrap(l, prec(l) < p), op.symbol(), wrap(r, prec(r) <= p))
        }
        Expr::Cast(t, x) => format!("({t}) {}", wrap(x, prec(x) < UNARY_PREC)),
        Expr::Call { recv, name, args } => {
            let args: Vec<String> = args.iter().map(print_expr).collect();
            match recv {
                Some(r) => format!("{}.{name}({})", wrap(r, prec(r) < ATOM_PREC), args.join(", ")),
                None => format!("{name}({})", args.join(", ")),
            }
        }
        Expr::New { record, args } => {
            let args: Vec<String> = args.iter().map(print_expr).collect();
            format!("new {record}({})", args.join(", "))
        }
        Expr::NewArray { elem, len } => format!("new {}[{}]", elem.as_type(), print_expr(len)),
        Expr::ArrayLit { elem, elems } => {
            let elems: Vec<String> = elems.iter().map(print_expr).collect();
            if elems.is_empty() {
                format!("new {}[] {{}}", elem.as_type())
            } else {
                format!("new {}[] {{ {} }}", elem.as_type(), elems.join(", "))
            }
        }
        Expr::PostIncDec { name, inc } => format!("{name}{}", if *inc { "++" } else { "--" }),
        Expr::NanoTime => "nanotime()".into(),
        Expr::Hole { id, spec } => format!("?H{id}{{{}}}", print_hole_body(spec)),
        Expr::Unfilled { id, ty } => format!("unfilled({id}, {ty})"),
    }
}

/// `kind=K; type=T; ops={...}; operands=[...]`, shared by markers and
/// nested operand specs.
pub fn print_hole_body(spec: &HoleSpec) -> String {
    let ops: Vec<&str> = spec.ops.iter().map(|o| o.symbol()).collect();
    let operands: Vec<String> = spec
        .operands
        .iter()
        .map(|o| match o {
            Operand::Hole(h) => format!("{{{}}}", print_hole_body(h)),
            Operand::Fixed(e) => print_expr(e),
        })
        .collect();
    format!("kind={}; type={}; ops={{{}}}; operands=[{}]", spec.kind, spec.ty, ops.join(", "), operands.join(", "))
}

pub fn print_lit(l: &Lit) -> String {
    match l {
        Lit::Int(v) => v.to_string(),
        Lit::Double(d) => print_double(d.get()),
        Lit::Bool(b) => b.to_string(),
        Lit::Char(c) => print_char(*c),
        Lit::Null => "null".into(),
    }
}

pub fn print_double(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v == f64::INFINITY {
        "Infinity".into()
    } else if v == f64::NEG_INFINITY {
        "-Infinity".into()
    } else {
        format!("{v:?}")
    }
}

pub fn print_char(c: u16) -> String {
    match c {
        0x27 => "'\\''".into(),
        0x5c => "'\\\\'".into(),
        0x20..=0x7e => format!("'{}'", c as u8 as char),
        _ => format!("'\\u{c:04x}'"),
    }
}
