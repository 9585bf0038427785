//! Structural checks run after optimization.

use super::ir::*;

/// Every block ends in exactly one terminator, every target exists, and on
/// every path each register is written before it is read.
pub fn verify(f: &CfgFunc) -> Result<(), String> {
    let n = f.blocks.len();
    for (bi, b) in f.blocks.iter().enumerate() {
        match b.insts.last() {
            Some(t) if t.is_terminator() => {}
            _ => return Err(format!("block {bi} has no terminator")),
        }
        if b.body().iter().any(Inst::is_terminator) {
            return Err(format!("block {bi} has a terminator before its end"));
        }
        for t in b.term().successors() {
            if t >= n {
                return Err(format!("block {bi} jumps to missing block {t}"));
            }
        }
        for i in &b.insts {
            if i.uses().iter().chain(i.dst().iter()).any(|r| *r >= f.nregs) {
                return Err(format!("block {bi}: register out of range in {i:?}"));
            }
        }
    }
    let reach = f.reachable();
    let preds = f.predecessors();
    let words = (f.nregs as usize).div_ceil(64).max(1);
    let full = vec![u64::MAX; words];
    let mut entry = vec![0u64; words];
    for r in 0..f.nparams {
        entry[(r / 64) as usize] |= 1 << (r % 64);
    }
    // Must-defined registers at block entry (intersection over predecessors).
    let mut defined_in: Vec<Vec<u64>> = (0..n).map(|i| if i == 0 { entry.clone() } else { full.clone() }).collect();
    let transfer = |bi: usize, mut set: Vec<u64>| {
        for i in &f.blocks[bi].insts {
            if let Some(d) = i.dst() {
                set[(d / 64) as usize] |= 1 << (d % 64);
            }
        }
        set
    };
    let mut changed = true;
    while changed {
        changed = false;
        for bi in 1..n {
            if !reach[bi] {
                continue;
            }
            let mut set = full.clone();
            for &p in &preds[bi] {
                let out = transfer(p, defined_in[p].clone());
                for (w, o) in set.iter_mut().zip(out) {
                    *w &= o;
                }
            }
            if set != defined_in[bi] {
                defined_in[bi] = set;
                changed = true;
            }
        }
    }
    for bi in (0..n).filter(|&b| reach[b]) {
        let mut set = defined_in[bi].clone();
        for i in &f.blocks[bi].insts {
            for u in i.uses() {
                if set[(u / 64) as usize] & (1 << (u % 64)) == 0 {
                    return Err(format!("block {bi}: r{u} may be read before it is written in {i:?}"));
                }
            }
            if let Some(d) = i.dst() {
                set[(d / 64) as usize] |= 1 << (d % 64);
            }
        }
    }
    Ok(())
}
