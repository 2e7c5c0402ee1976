//! Trajectory and schedule CSV files.
//!
//! Trajectories use the header `t,u1..u{n_u}[,d1..d{n_d}],y1..y{n_y}`.
//! Values are written with Rust's shortest round-trip formatting, so a
//! write/read cycle is bit-exact.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Signal, Trajectory};

fn format_err(path: &str, reason: impl Into<String>) -> Error {
    Error::Format { path: path.to_string(), reason: reason.into() }
}

fn csv_err(path: &str, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => format_err(path, format!("{other:?}")),
    }
}

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

fn read_table<R: Read>(reader: R, path: &str) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers().map_err(|e| csv_err(path, e))?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("t") {
        return Err(format_err(path, "first column must be `t`"));
    }
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| format_err(path, format!("row {}: {e}", line + 2)))?;
        if row.iter().any(|v| !v.is_finite()) {
            return Err(format_err(path, format!("row {}: non-finite value", line + 2)));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}

fn columns_with_prefix(header: &[String], prefix: char) -> Vec<usize> {
    header
        .iter()
        .enumerate()
        .filter(|(_, h)| h.starts_with(prefix) && h[1..].parse::<usize>().is_ok())
        .map(|(i, _)| i)
        .collect()
}

fn gather(rows: &[Vec<f64>], cols: &[usize]) -> Result<Signal> {
    let mut data = Vec::with_capacity(rows.len() * cols.len());
    for r in rows {
        data.extend(cols.iter().map(|&c| r[c]));
    }
    Signal::new(cols.len(), data)
}

fn parse_trajectory<R: Read>(reader: R, path: &str) -> Result<Trajectory> {
    let table = read_table(reader, path)?;
    let u_cols = columns_with_prefix(&table.header, 'u');
    let d_cols = columns_with_prefix(&table.header, 'd');
    let y_cols = columns_with_prefix(&table.header, 'y');
    if u_cols.is_empty() || y_cols.is_empty() {
        return Err(format_err(path, "need at least one `u` and one `y` column"));
    }
    if 1 + u_cols.len() + d_cols.len() + y_cols.len() != table.header.len() {
        return Err(format_err(path, format!("unrecognized columns in header {:?}", table.header)));
    }
    let d = if d_cols.is_empty() { None } else { Some(gather(&table.rows, &d_cols)?) };
    Trajectory::new(gather(&table.rows, &u_cols)?, gather(&table.rows, &y_cols)?, d)
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Trajectory> {
    let p = path.as_ref();
    parse_trajectory(File::open(p)?, &p.display().to_string())
}

pub fn write_trajectory_csv(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.n_u()).map(|i| format!("u{i}")));
    header.extend((1..=traj.n_d()).map(|i| format!("d{i}")));
    header.extend((1..=traj.n_y()).map(|i| format!("y{i}")));
    let mut out = std::io::BufWriter::new(File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for t in 0..traj.len() {
        let mut fields = vec![t.to_string()];
        fields.extend(traj.u.sample(t).iter().map(f64::to_string));
        if let Some(d) = &traj.d {
            fields.extend(d.sample(t).iter().map(f64::to_string));
        }
        fields.extend(traj.y.sample(t).iter().map(f64::to_string));
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes `t,{prefix}1..{prefix}n`.
pub fn write_signal_csv(path: impl AsRef<Path>, prefix: &str, signal: &Signal) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    let mut header = vec!["t".to_string()];
    header.extend((1..=signal.dim()).map(|i| format!("{prefix}{i}")));
    writeln!(out, "{}", header.join(","))?;
    for t in 0..signal.len() {
        let mut fields = vec![t.to_string()];
        fields.extend(signal.sample(t).iter().map(f64::to_string));
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Reads any `t,...` table as a signal of its non-time columns.
pub fn read_signal_csv(path: impl AsRef<Path>) -> Result<Signal> {
    let p = path.as_ref();
    let text = std::fs::read_to_string(p)?;
    parse_signal_table(&text, &p.display().to_string())
}

pub(crate) fn parse_signal_table(text: &str, path: &str) -> Result<Signal> {
    let table = read_table(text.as_bytes(), path)?;
    let cols: Vec<usize> = (1..table.header.len()).collect();
    gather(&table.rows, &cols)
}

pub(crate) fn parse_schedule(text: &str, path: &str) -> Result<Vec<f64>> {
    let table = read_table(text.as_bytes(), path)?;
    if table.header.len() != 2 {
        return Err(format_err(path, "schedule files have exactly the columns `t,value`"));
    }
    Ok(table.rows.into_iter().map(|r| r[1]).collect())
}

/// Reads a `t,value` schedule.
pub fn read_schedule_csv(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let p = path.as_ref();
    let text = std::fs::read_to_string(p)?;
    parse_schedule(&text, &p.display().to_string())
}
