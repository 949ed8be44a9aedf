//! Density matrices as two whitespace-separated `2^N × 2^N` blocks.
//!
//! ```text
//! # ndo-matrix v1 qubits=1
//! # real
//! 0.5 0.5
//! 0.5 0.5
//! # imag
//! 0 0
//! 0 0
//! ```

use std::fmt::Write as _;
use std::path::Path;

use ndo_core::qcore::ComplexMatrix;
use ndo_core::Complex64;

use crate::error::{read_file, write_file, Result, TomoError};

pub const VERSION_TAG: &str = "ndo-matrix v1";

fn write_block(out: &mut String, m: &ComplexMatrix, part: fn(Complex64) -> f64) {
    for i in 0..m.rows() {
        let row: Vec<String> = (0..m.cols()).map(|j| format!("{}", part(m.get(i, j)) + 0.0)).collect();
        let _ = writeln!(out, "{}", row.join(" "));
    }
}

/// The `# real` and `# imag` blocks without the version header.
pub fn format_blocks(m: &ComplexMatrix) -> String {
    let mut out = String::from("# real\n");
    write_block(&mut out, m, |z| z.re);
    out.push_str("# imag\n");
    write_block(&mut out, m, |z| z.im);
    out
}

pub fn format_matrix(m: &ComplexMatrix) -> String {
    let qubits = m.rows().trailing_zeros();
    format!("# {VERSION_TAG} qubits={qubits}\n{}", format_blocks(m))
}

pub fn save_matrix(m: &ComplexMatrix, path: &Path) -> Result<()> {
    write_file(path, &format_matrix(m))
}

pub fn load_matrix(path: &Path) -> Result<ComplexMatrix> {
    parse_matrix(&read_file(path)?, &path.display().to_string())
}

/// Reads the real block followed by the imaginary block; comment lines are
/// skipped.
pub fn parse_matrix(text: &str, source_name: &str) -> Result<ComplexMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>().map_err(|_| TomoError::Parse {
                    source_name: source_name.to_string(),
                    line: i + 1,
                    message: format!("invalid number \"{t}\""),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let bad = |message: String| TomoError::Format {
        source_name: source_name.to_string(),
        message,
    };
    if !rows.len().is_multiple_of(2) || rows.is_empty() {
        return Err(bad(format!("expected two square blocks, found {} rows", rows.len())));
    }
    let dim = rows.len() / 2;
    if !dim.is_power_of_two() {
        return Err(bad(format!("dimension {dim} is not a power of two")));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != dim) {
        return Err(bad(format!("row of length {} in a {dim}x{dim} block", r.len())));
    }
    Ok(ComplexMatrix::from_fn(dim, dim, |i, j| {
        Complex64::new(rows[i][j], rows[dim + i][j])
    }))
}
