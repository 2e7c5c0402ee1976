//! Export in the widely supported LP text format.
//!
//! Variable names: `alpha_j` (data combination), `u{c}_{t}` / `y{c}_{t}`
//! (channel `c` at horizon step `t`), `zp{k}_t{t}` (truth of predicate `k`),
//! `zc{n}` (composite truth values), `su{c}_{t}` / `sy{c}_{t}` (absolute
//! values in the cost). Constraints are named `c{i}` in insertion order.
//! Numbers are printed with 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::Result;

use super::{MilpProblem, Sense, VarId, VarKind};

const TERMS_PER_LINE: usize = 6;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn write_terms<W: Write>(out: &mut W, prob: &MilpProblem, terms: &[(VarId, f64)]) -> std::io::Result<()> {
    for (i, &(v, a)) in terms.iter().enumerate() {
        if i > 0 && i % TERMS_PER_LINE == 0 {
            write!(out, "\n   ")?;
        }
        let sign = if a < 0.0 { '-' } else { '+' };
        write!(out, " {sign} {} {}", num(a.abs()), prob.vars[v.0].name)?;
    }
    Ok(())
}

/// Writes `prob` in LP format to any writer.
pub fn write_lp<W: Write>(prob: &MilpProblem, mut out: W) -> Result<()> {
    writeln!(out, "\\ {} variables, {} constraints", prob.vars.len(), prob.constraints.len())?;
    if prob.objective_offset != 0.0 {
        writeln!(out, "\\ objective offset {}", num(prob.objective_offset))?;
    }
    writeln!(out, "Minimize")?;
    write!(out, " obj:")?;
    if prob.objective.is_empty() {
        if let Some(v) = prob.vars.first() {
            write!(out, " 0 {}", v.name)?;
        }
    } else {
        write_terms(&mut out, prob, &prob.objective)?;
    }
    writeln!(out)?;
    writeln!(out, "Subject To")?;
    for (i, c) in prob.constraints.iter().enumerate() {
        write!(out, " c{i}:")?;
        if c.terms.is_empty() {
            // LP format has no empty rows; a zero multiple of any variable is equivalent.
            if let Some(v) = prob.vars.first() {
                write!(out, " 0 {}", v.name)?;
            }
        } else {
            write_terms(&mut out, prob, &c.terms)?;
        }
        let op = match c.sense {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        };
        writeln!(out, " {op} {}", num(c.rhs))?;
    }
    writeln!(out, "Bounds")?;
    for v in &prob.vars {
        let (lo, hi) = (v.lo, v.hi);
        if v.kind == VarKind::Binary && lo == 0.0 && hi == 1.0 {
            continue;
        }
        match (lo.is_finite(), hi.is_finite()) {
            _ if lo == hi => writeln!(out, " {} = {}", v.name, num(lo))?,
            (false, false) => writeln!(out, " {} free", v.name)?,
            (true, false) => writeln!(out, " {} >= {}", v.name, num(lo))?,
            (false, true) => writeln!(out, " -inf <= {} <= {}", v.name, num(hi))?,
            (true, true) => writeln!(out, " {} <= {} <= {}", num(lo), v.name, num(hi))?,
        }
    }
    let binaries: Vec<&str> = prob.vars.iter().filter(|v| v.kind == VarKind::Binary).map(|v| v.name.as_str()).collect();
    if !binaries.is_empty() {
        writeln!(out, "Binary")?;
        for chunk in binaries.chunks(TERMS_PER_LINE) {
            writeln!(out, " {}", chunk.join(" "))?;
        }
    }
    writeln!(out, "End")?;
    out.flush()?;
    Ok(())
}

/// Writes `prob` in LP format to `path`.
pub fn export_lp(prob: &MilpProblem, path: impl AsRef<Path>) -> Result<()> {
    write_lp(prob, BufWriter::new(File::create(path)?))
}
