//! Hole oracles and the random choice of concrete hole fills.

use crate::lang::{BinOp, Expr, HoleKind, HoleSpec, Lit, Operand, Type, F64};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use std::rc::Rc;

pub type Decisions = BTreeMap<u32, Rc<Expr>>;

/// How hole nodes behave when evaluated.
pub enum HoleOracle {
    /// First evaluation of a hole decides a fill; later ones reuse it.
    Filling { rng: ChaCha8Rng, decisions: Decisions },
    /// Decided holes evaluate their fill; undecided ones trap.
    Replay(Decisions),
    Trapping,
}

impl HoleOracle {
    pub fn filling(rng: ChaCha8Rng) -> Self {
        HoleOracle::Filling { rng, decisions: Decisions::new() }
    }

    pub fn decisions(&self) -> Option<&Decisions> {
        match self {
            HoleOracle::Filling { decisions, .. } | HoleOracle::Replay(decisions) => Some(decisions),
            HoleOracle::Trapping => None,
        }
    }

    pub fn into_decisions(self) -> Decisions {
        match self {
            HoleOracle::Filling { decisions, .. } | HoleOracle::Replay(decisions) => decisions,
            HoleOracle::Trapping => Decisions::new(),
        }
    }
}

/// A variable visible at the point a hole is first reached.
#[derive(Clone, Debug)]
pub struct Candidate<'a> {
    pub name: &'a str,
    pub ty: &'a Type,
}

/// Special double values that exercise floating-point corner cases.
pub const SPECIAL_DOUBLES: [f64; 7] = [0.0, -0.0, f64::NAN, f64::INFINITY, f64::NEG_INFINITY, 5e-324, -5e-324];

pub fn random_int(rng: &mut impl Rng) -> i32 {
    rng.gen()
}

pub fn random_double(rng: &mut impl Rng) -> f64 {
    let bucket: u32 = rng.gen_range(0..4);
    match bucket {
        0 | 1 => rng.gen_range(-2147483648.0..=2147483648.0),
        2 => SPECIAL_DOUBLES[rng.gen_range(0..SPECIAL_DOUBLES.len())],
        _ => {
            // Uniform exponent: a random finite bit pattern with the exponent
            // field drawn uniformly.
            let sign = (rng.gen::<bool>() as u64) << 63;
            let exp: u64 = rng.gen_range(0..2047);
            let mant: u64 = rng.gen::<u64>() & ((1 << 52) - 1);
            f64::from_bits(sign | (exp << 52) | mant)
        }
    }
}

pub fn random_char(rng: &mut impl Rng) -> u16 {
    if rng.gen() {
        rng.gen_range(0x20..=0x7e)
    } else {
        rng.gen()
    }
}

/// A random literal of a primitive type. NaN is always the canonical one so
/// that printed programs re-parse to identical bits.
pub fn random_lit(ty: &Type, rng: &mut impl Rng) -> Lit {
    match ty {
        Type::Int => Lit::Int(random_int(rng)),
        Type::Double => {
            let d = random_double(rng);
            Lit::Double(F64::new(if d.is_nan() { f64::NAN } else { d }))
        }
        Type::Bool => Lit::Bool(rng.gen()),
        Type::Char => Lit::Char(random_char(rng)),
        other => panic!("no literal of type {other}"),
    }
}

/// Picks a concrete expression from the search space of `spec`. Returns
/// `None` when an Id hole has no candidate of its type.
pub fn choose_fill(spec: &HoleSpec, cands: &[Candidate], rng: &mut impl Rng) -> Option<Expr> {
    match spec.kind {
        HoleKind::Id => {
            let fits: Vec<&Candidate> = cands.iter().filter(|c| *c.ty == spec.ty).collect();
            if fits.is_empty() {
                return None;
            }
            Some(Expr::Ident(fits[rng.gen_range(0..fits.len())].name.to_string()))
        }
        HoleKind::Val => Some(Expr::Lit(random_lit(&spec.ty, rng))),
        _ => {
            let op: Option<BinOp> = (!spec.ops.is_empty()).then(|| spec.ops[rng.gen_range(0..spec.ops.len())]);
            let mut operands = Vec::with_capacity(spec.operands.len());
            for o in &spec.operands {
                operands.push(match o {
                    Operand::Hole(h) => choose_fill(h, cands, rng)?,
                    Operand::Fixed(e) => e.clone(),
                });
            }
            let mut it = operands.into_iter();
            Some(match spec.kind {
                HoleKind::ArrayAcc => {
                    let a = it.next()?;
                    Expr::Index(Box::new(a), Box::new(it.next()?))
                }
                HoleKind::Cast => Expr::Cast(spec.ty.clone(), Box::new(it.next()?)),
                _ => {
                    let l = it.next()?;
                    Expr::binary(op?, l, it.next()?)
                }
            })
        }
    }
}

/// Whether `e` is a member of the search space of `spec`.
pub fn in_space(spec: &HoleSpec, e: &Expr, types: &dyn Fn(&str) -> Option<Type>) -> bool {
    match (spec.kind, e) {
        (HoleKind::Id, Expr::Ident(n)) => types(n).as_ref() == Some(&spec.ty),
        (HoleKind::Val, Expr::Lit(l)) => l.ty() == spec.ty,
        (HoleKind::ArrayAcc, Expr::Index(a, i)) => operands_match(spec, &[a, i], types),
        (HoleKind::Cast, Expr::Cast(t, x)) => *t == spec.ty && operands_match(spec, &[x], types),
        (HoleKind::Arith | HoleKind::Shift | HoleKind::Relation | HoleKind::Logic, Expr::Binary(op, l, r)) => {
            spec.ops.contains(op) && operands_match(spec, &[l, r], types)
        }
        _ => false,
    }
}

fn operands_match(spec: &HoleSpec, es: &[&Expr], types: &dyn Fn(&str) -> Option<Type>) -> bool {
    spec.operands.len() == es.len()
        && spec.operands.iter().zip(es).all(|(o, e)| match o {
            Operand::Hole(h) => in_space(h, e, types),
            Operand::Fixed(f) => f == *e,
        })
}
