//! Result file formats: CSV emission and parsing for SE tables and
//! eigenvalue spectra, pretty JSON for reports.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! parsing a file and re-emitting it reproduces the bytes exactly. That
//! makes output files safe to diff across runs and platforms.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::engine::SweepPoint;
use crate::error::{Error, Result};

/// Header of every SE table.
pub const SE_CSV_HEADER: &str = "sweep_value,scheme,se_bits,half_width,trials,seed";

/// Header of every spectrum table.
pub const SPECTRUM_CSV_HEADER: &str = "index,eigenvalue,model";

/// SE table to CSV, one row per (sweep value, scheme) in input order.
pub fn sweep_points_to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::with_capacity(64 * (points.len() + 1));
    out.push_str(SE_CSV_HEADER);
    out.push('\n');
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            p.sweep_value,
            p.scheme.label(),
            p.se_bits,
            p.half_width,
            p.trials,
            p.seed
        )
        .expect("formatting to a string cannot fail");
    }
    out
}

fn parse_field<T: FromStr>(field: &str, line_no: usize, what: &str) -> Result<T> {
    field.parse().map_err(|_| {
        Error::Config(format!("line {line_no}: cannot parse {what} from '{field}'"))
    })
}

/// Parses an SE table back from CSV. Inverse of [`sweep_points_to_csv`]:
/// emit(parse(emit(x))) produces the same bytes as emit(x).
pub fn sweep_points_from_csv(text: &str) -> Result<Vec<SweepPoint>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == SE_CSV_HEADER => {}
        other => {
            return Err(Error::Config(format!(
                "expected header '{SE_CSV_HEADER}', got '{}'",
                other.map(|(_, l)| l).unwrap_or_default()
            )))
        }
    }
    let mut points = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let line_no = i + 1;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Config(format!(
                "line {line_no}: expected 6 fields, got {}",
                fields.len()
            )));
        }
        points.push(SweepPoint {
            sweep_value: parse_field(fields[0], line_no, "sweep value")?,
            scheme: fields[1].parse()?,
            se_bits: parse_field(fields[2], line_no, "SE")?,
            half_width: parse_field(fields[3], line_no, "half-width")?,
            trials: parse_field(fields[4], line_no, "trial count")?,
            seed: parse_field(fields[5], line_no, "seed")?,
        });
    }
    Ok(points)
}

/// One eigenvalue row of a spectrum table.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRow {
    /// 0-based position in the descending spectrum.
    pub index: usize,
    pub eigenvalue: f64,
    /// Model identifier the spectrum belongs to.
    pub model: String,
}

/// Spectrum table to CSV in input order.
pub fn spectrum_to_csv(rows: &[SpectrumRow]) -> String {
    let mut out = String::with_capacity(32 * (rows.len() + 1));
    out.push_str(SPECTRUM_CSV_HEADER);
    out.push('\n');
    for r in rows {
        writeln!(out, "{},{},{}", r.index, r.eigenvalue, r.model)
            .expect("formatting to a string cannot fail");
    }
    out
}

/// Pretty JSON with a trailing newline, for stable on-disk reports.
pub fn to_pretty_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Reads a text file, naming the path in the error.
pub fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}

/// Writes a text file, naming the path in the error. Parent directories
/// are not created implicitly.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
}
