//! Plain-text measurement records.
//!
//! ```text
//! # ndo-dataset v1 qubits=2 records=3
//! ZZ 00
//! XY 01
//! XY 01
//! ```
//!
//! A line may carry a third column with a repeat count (`XY 01 120`), which
//! is how externally collected coincidence tables are loaded.

use std::fmt::Write as _;
use std::path::Path;

use ndo_core::qcore::{Axis, Basis};
use ndo_core::train::Dataset;

use crate::error::{read_file, write_file, Result, TomoError};

pub const VERSION_TAG: &str = "ndo-dataset v1";

/// One record per line, grouped by basis.
pub fn format_dataset(ds: &Dataset) -> String {
    let mut out = format!("# {VERSION_TAG} qubits={} records={}\n", ds.n_qubits(), ds.n_records());
    for g in ds.groups() {
        let label = g.basis.to_string();
        for &o in &g.outcomes {
            let _ = writeln!(out, "{label} {}", bits(o, ds.n_qubits()));
        }
    }
    out
}

/// Count-table variant: one line per distinct (basis, outcome).
pub fn format_count_table(ds: &Dataset) -> String {
    let mut out = format!("# {VERSION_TAG} qubits={} records={}\n", ds.n_qubits(), ds.n_records());
    for (g, counts) in ds.groups().iter().zip(ds.counts()) {
        for (o, c) in counts {
            let _ = writeln!(out, "{} {} {c}", g.basis, bits(o, ds.n_qubits()));
        }
    }
    out
}

fn bits(index: usize, n: usize) -> String {
    (0..n)
        .map(|j| if (index >> (n - 1 - j)) & 1 == 1 { '1' } else { '0' })
        .collect()
}

pub fn save_dataset(ds: &Dataset, path: &Path) -> Result<()> {
    write_file(path, &format_dataset(ds))
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    parse_dataset(&read_file(path)?, &path.display().to_string())
}

fn header_qubits(line: &str) -> Option<usize> {
    line.split_whitespace()
        .find_map(|tok| tok.strip_prefix("qubits="))
        .and_then(|v| v.parse().ok())
}

pub fn parse_dataset(text: &str, source_name: &str) -> Result<Dataset> {
    let err = |line: usize, message: String| TomoError::Parse {
        source_name: source_name.to_string(),
        line,
        message,
    };
    let mut ds: Option<Dataset> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if ds.is_none() {
                if let Some(n) = header_qubits(comment) {
                    ds = Some(Dataset::new(n));
                }
            }
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if !(2..=3).contains(&tokens.len()) {
            return Err(err(
                line_no,
                format!("expected '<basis> <outcome> [count]', got {} fields", tokens.len()),
            ));
        }
        let axes = tokens[0]
            .chars()
            .map(|c| {
                Axis::from_char(c)
                    .map_err(|_| err(line_no, format!("invalid basis character '{c}' in \"{}\"", tokens[0])))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut outcome = 0usize;
        for c in tokens[1].chars() {
            let bit = match c {
                '0' => 0,
                '1' => 1,
                _ => {
                    return Err(err(
                        line_no,
                        format!("invalid outcome character '{c}' in \"{}\"", tokens[1]),
                    ))
                }
            };
            outcome = (outcome << 1) | bit;
        }
        if axes.len() != tokens[1].len() {
            return Err(err(
                line_no,
                format!("basis \"{}\" and outcome \"{}\" differ in length", tokens[0], tokens[1]),
            ));
        }
        let count = match tokens.get(2) {
            Some(t) => t
                .parse::<usize>()
                .map_err(|_| err(line_no, format!("invalid count \"{t}\"")))?,
            None => 1,
        };
        let ds = ds.get_or_insert_with(|| Dataset::new(axes.len()));
        if axes.len() != ds.n_qubits() {
            return Err(err(
                line_no,
                format!("record has {} qubits, expected {}", axes.len(), ds.n_qubits()),
            ));
        }
        let basis = Basis::new(axes);
        for _ in 0..count {
            ds.push(basis.clone(), outcome)
                .map_err(|e| err(line_no, e.to_string()))?;
        }
    }
    match ds {
        Some(ds) if !ds.is_empty() => Ok(ds),
        _ => Err(TomoError::Format {
            source_name: source_name.to_string(),
            message: "no measurement records".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_record_line() {
        let ds = parse_dataset("XY 01\n", "t").unwrap();
        assert_eq!(ds.n_qubits(), 2);
        assert_eq!(ds.groups()[0].basis.to_string(), "XY");
        assert_eq!(ds.groups()[0].outcomes, vec![1]);
    }

    #[test]
    fn bad_basis_names_line_and_character() {
        let e = parse_dataset("# c\nZZ 00\nXQ 01\n", "d.txt").unwrap_err().to_string();
        assert!(e.contains("d.txt:3"), "{e}");
        assert!(e.contains("'Q'"), "{e}");
    }

    #[test]
    fn bad_outcome_and_lengths() {
        assert!(parse_dataset("XY 02\n", "t").unwrap_err().to_string().contains("'2'"));
        assert!(parse_dataset("XY 011\n", "t").is_err());
        assert!(parse_dataset("XY 01\nXYZ 011\n", "t").is_err());
        assert!(parse_dataset("XY 01 x\n", "t").is_err());
        assert!(parse_dataset("XY\n", "t").is_err());
        assert!(parse_dataset("# only comments\n", "t").is_err());
    }

    #[test]
    fn count_table_expands() {
        let ds = parse_dataset("# ndo-dataset v1 qubits=2\nZZ 00 3\nZZ 11 2\nXX 00 0\n", "t").unwrap();
        assert_eq!(ds.n_records(), 5);
        assert_eq!(ds.groups().len(), 1);
        let again = parse_dataset(&format_count_table(&ds), "t").unwrap();
        assert_eq!(again, ds);
    }

    #[test]
    fn header_fixes_qubit_count() {
        assert!(parse_dataset("# ndo-dataset v1 qubits=3\nZZ 00\n", "t").is_err());
    }
}
