//! Fixed-format MPS export for cross-checking programs with external
//! solvers. Names are replaced by generated 8-character identifiers
//! (`R0000001`, `C0000001`) because fixed MPS fields are 8 columns wide;
//! the original names are written as comment lines at the top.

use std::io::{self, Write};

use crate::model::{LinearProgram, MixedIntegerProgram, RowKind};

pub fn write_lp<W: Write>(lp: &LinearProgram, out: W) -> io::Result<()> {
    write_impl(lp, &[], out)
}

pub fn write_mip<W: Write>(mip: &MixedIntegerProgram, out: W) -> io::Result<()> {
    let mut is_bin = vec![false; mip.lp.num_vars()];
    for b in &mip.binaries {
        is_bin[b.0] = true;
    }
    write_impl(&mip.lp, &is_bin, out)
}

fn row_name(r: usize) -> String {
    format!("R{:07}", r + 1)
}

fn col_name(j: usize) -> String {
    format!("C{:07}", j + 1)
}

fn num(v: f64) -> String {
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.len() <= 12 {
        s.to_string()
    } else {
        format!("{v:.5e}")
    }
}

fn write_impl<W: Write>(lp: &LinearProgram, is_bin: &[bool], mut out: W) -> io::Result<()> {
    let n = lp.num_vars();
    for (r, row) in lp.rows().iter().enumerate() {
        writeln!(out, "* {} {}", row_name(r), row.name)?;
    }
    for j in 0..n {
        writeln!(out, "* {} {}", col_name(j), lp.names[j])?;
    }
    writeln!(out, "NAME          LINOPT")?;
    writeln!(out, "ROWS")?;
    writeln!(out, " N  COST")?;
    for (r, row) in lp.rows().iter().enumerate() {
        let t = match row.kind {
            RowKind::Eq => 'E',
            RowKind::Le => 'L',
            RowKind::Ge => 'G',
        };
        writeln!(out, " {t}  {}", row_name(r))?;
    }

    let mut by_col: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (r, row) in lp.rows().iter().enumerate() {
        for &(v, a) in &row.coefs {
            by_col[v.0].push((r, a));
        }
    }
    writeln!(out, "COLUMNS")?;
    let mut in_int = false;
    for j in 0..n {
        let bin = is_bin.get(j).copied().unwrap_or(false);
        if bin != in_int {
            let tag = if bin { "INTORG" } else { "INTEND" };
            writeln!(out, "    MARKER                 'MARKER'                 '{tag}'")?;
            in_int = bin;
        }
        let c = col_name(j);
        if lp.cost[j] != 0.0 {
            writeln!(out, "    {:<8}  {:<8}  {:>12}", c, "COST", num(lp.cost[j]))?;
        }
        for &(r, a) in &by_col[j] {
            writeln!(out, "    {:<8}  {:<8}  {:>12}", c, row_name(r), num(a))?;
        }
    }
    if in_int {
        writeln!(out, "    MARKER                 'MARKER'                 'INTEND'")?;
    }

    writeln!(out, "RHS")?;
    if lp.objective_offset != 0.0 {
        writeln!(out, "    {:<8}  {:<8}  {:>12}", "RHS", "COST", num(-lp.objective_offset))?;
    }
    for (r, row) in lp.rows().iter().enumerate() {
        if row.rhs != 0.0 {
            writeln!(out, "    {:<8}  {:<8}  {:>12}", "RHS", row_name(r), num(row.rhs))?;
        }
    }

    writeln!(out, "BOUNDS")?;
    for j in 0..n {
        let c = col_name(j);
        let (l, u) = (lp.lower[j], lp.upper[j]);
        if is_bin.get(j).copied().unwrap_or(false) && l == 0.0 && u == 1.0 {
            writeln!(out, " BV BND       {c}")?;
            continue;
        }
        if l == u {
            writeln!(out, " FX BND       {:<8}  {:>12}", c, num(l))?;
            continue;
        }
        if l == f64::NEG_INFINITY && u == f64::INFINITY {
            writeln!(out, " FR BND       {c}")?;
            continue;
        }
        if l == f64::NEG_INFINITY {
            writeln!(out, " MI BND       {c}")?;
        } else if l != 0.0 {
            writeln!(out, " LO BND       {:<8}  {:>12}", c, num(l))?;
        }
        if u != f64::INFINITY {
            writeln!(out, " UP BND       {:<8}  {:>12}", c, num(u))?;
        }
    }
    writeln!(out, "ENDATA")?;
    Ok(())
}
