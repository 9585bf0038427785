//! Hole and limiter counts per source program over a template directory.

use crate::extract::LIMITER_PREFIX;
use crate::lang::{HoleKind, Program, Stmt};
use std::collections::BTreeMap;
use std::path::Path;

/// Column order of the table.
pub const KINDS: [HoleKind; 8] = [
    HoleKind::Id,
    HoleKind::Val,
    HoleKind::ArrayAcc,
    HoleKind::Arith,
    HoleKind::Shift,
    HoleKind::Relation,
    HoleKind::Logic,
    HoleKind::Cast,
];

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Row {
    pub name: String,
    pub holes: [usize; 8],
    pub limiters: usize,
}

impl Row {
    pub fn total(&self) -> usize {
        self.holes.iter().sum::<usize>() + self.limiters
    }

    pub fn count(&self, k: HoleKind) -> usize {
        self.holes[KINDS.iter().position(|x| *x == k).expect("known kind")]
    }

    fn add(&mut self, o: &Row) {
        for (a, b) in self.holes.iter_mut().zip(o.holes) {
            *a += b;
        }
        self.limiters += o.limiters;
    }
}

pub fn count_program(p: &Program) -> Row {
    let mut r = Row::default();
    for (_, spec) in p.holes() {
        r.holes[KINDS.iter().position(|k| *k == spec.kind).expect("known kind")] += 1;
    }
    for f in &p.functions {
        for s in &f.body {
            s.walk_stmts(&mut |s| {
                if let Stmt::VarDecl { name, .. } = s {
                    r.limiters += name.starts_with(LIMITER_PREFIX) as usize;
                }
            });
        }
    }
    r
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub rows: Vec<Row>,
    pub total: Row,
}

/// Rows are keyed by the source program part of the template name (before
/// the first `__`). An empty directory yields only an all-zero total.
pub fn table(dir: &Path) -> Result<Table, String> {
    let mut rows: BTreeMap<String, Row> = BTreeMap::new();
    let files = if dir.exists() { super::files_with_ext(dir, "mjt").map_err(|e| e.to_string())? } else { Vec::new() };
    for f in files {
        let text = std::fs::read_to_string(&f).map_err(|e| format!("{}: {e}", f.display()))?;
        let p = crate::lang::parse(&text).map_err(|e| format!("{}: {e}", f.display()))?;
        let stem = f.file_stem().unwrap_or_default().to_string_lossy().into_owned();
        let key = stem.split("__").next().unwrap_or(&stem).to_string();
        let row = rows.entry(key.clone()).or_insert_with(|| Row { name: key, ..Row::default() });
        row.add(&count_program(&p));
    }
    let mut total = Row { name: "Total".into(), ..Row::default() };
    for r in rows.values() {
        total.add(r);
    }
    Ok(Table { rows: rows.into_values().collect(), total })
}

fn header() -> Vec<String> {
    let mut h = vec!["Program".to_string()];
    h.extend(KINDS.iter().map(|k| k.name().to_string()));
    h.push("Limiters".into());
    h.push("Total".into());
    h
}

fn cells(r: &Row) -> Vec<String> {
    let mut c = vec![r.name.clone()];
    c.extend(r.holes.iter().map(usize::to_string));
    c.push(r.limiters.to_string());
    c.push(r.total().to_string());
    c
}

impl Table {
    fn lines(&self) -> Vec<Vec<String>> {
        let mut out = vec![header()];
        out.extend(self.rows.iter().map(cells));
        out.push(cells(&self.total));
        out
    }

    pub fn tsv(&self) -> String {
        self.lines().iter().map(|l| l.join("\t") + "\n").collect()
    }

    pub fn text(&self) -> String {
        let lines = self.lines();
        let widths: Vec<usize> = (0..lines[0].len()).map(|i| lines.iter().map(|l| l[i].len()).max().unwrap_or(0)).collect();
        let mut s = String::new();
        for l in &lines {
            let row: Vec<String> = l
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 0 { format!("{c:<w$}", w = widths[i]) } else { format!("{c:>w$}", w = widths[i]) })
                .collect();
            s.push_str(row.join("  ").trim_end());
            s.push('\n');
        }
        s
    }
}
