//! Training reports as CSV with `#` comment headers.
//!
//! ```text
//! # ndo-train-report v1
//! # best_epoch=17 selection=training-nll negative_phase=exact
//! # nll omits the constant entropy of the measurement distribution
//! epoch,nll,holdout_nll,fidelity
//! 0,1.3863,,0.5
//! ```

use std::path::Path;

use ndo_core::train::{EpochRecord, NegativePhase, Selection, TrainReport};

use crate::error::{read_file, write_file, Result, TomoError};

pub const VERSION_TAG: &str = "ndo-train-report v1";
pub const COLUMNS: [&str; 4] = ["epoch", "nll", "holdout_nll", "fidelity"];

pub fn selection_name(s: Selection) -> &'static str {
    match s {
        Selection::TrainingNll => "training-nll",
        Selection::HoldoutNll => "holdout-nll",
        Selection::LastEpoch => "last-epoch",
    }
}

pub fn phase_name(p: NegativePhase) -> String {
    match p {
        NegativePhase::Exact => "exact".into(),
        NegativePhase::ContrastiveDivergence { k } => format!("cd-{k}"),
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn format_report(report: &TrainReport) -> Result<String> {
    let mut out = format!(
        "# {VERSION_TAG}\n# best_epoch={} selection={} negative_phase={}\n\
         # nll omits the constant entropy of the measurement distribution\n",
        report.best_epoch,
        selection_name(report.selection),
        phase_name(report.negative_phase)
    );
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(COLUMNS)?;
    for r in &report.epochs {
        w.write_record([r.epoch.to_string(), cell(r.nll), cell(r.holdout_nll), cell(r.fidelity)])?;
    }
    let bytes = w.into_inner().map_err(|e| TomoError::Csv(e.into_error().into()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

pub fn save_report(report: &TrainReport, path: &Path) -> Result<()> {
    write_file(path, &format_report(report)?)
}

/// Reads the epoch rows back; the header columns must match exactly.
pub fn parse_report(text: &str, source_name: &str) -> Result<Vec<EpochRecord>> {
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .flexible(false)
        .from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != COLUMNS {
        return Err(TomoError::Format {
            source_name: source_name.to_string(),
            message: format!("unexpected columns {header:?}"),
        });
    }
    let opt = |s: &str, line: usize| -> Result<Option<f64>> {
        if s.is_empty() {
            return Ok(None);
        }
        s.parse().map(Some).map_err(|_| TomoError::Parse {
            source_name: source_name.to_string(),
            line,
            message: format!("invalid number \"{s}\""),
        })
    };
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        rows.push(EpochRecord {
            epoch: rec[0].parse().map_err(|_| TomoError::Parse {
                source_name: source_name.to_string(),
                line,
                message: format!("invalid epoch \"{}\"", &rec[0]),
            })?,
            nll: opt(&rec[1], line)?,
            holdout_nll: opt(&rec[2], line)?,
            fidelity: opt(&rec[3], line)?,
        });
    }
    Ok(rows)
}

pub fn load_report(path: &Path) -> Result<Vec<EpochRecord>> {
    parse_report(&read_file(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndo_core::ndo::{NdoParams, Shape};

    fn report() -> TrainReport {
        let p = NdoParams::zeros(Shape::new(2, 1, 1).unwrap());
        TrainReport {
            epochs: vec![
                EpochRecord {
                    epoch: 0,
                    nll: Some(1.5),
                    holdout_nll: None,
                    fidelity: Some(0.25),
                },
                EpochRecord {
                    epoch: 1,
                    nll: Some(1.0 / 3.0),
                    holdout_nll: None,
                    fidelity: None,
                },
            ],
            best_params: p.clone(),
            best_epoch: 1,
            final_params: p,
            selection: Selection::TrainingNll,
            negative_phase: NegativePhase::ContrastiveDivergence { k: 10 },
        }
    }

    #[test]
    fn round_trip() {
        let r = report();
        let text = format_report(&r).unwrap();
        assert!(text.starts_with("# ndo-train-report v1\n"));
        assert!(text.contains("best_epoch=1 selection=training-nll negative_phase=cd-10"));
        assert_eq!(parse_report(&text, "t").unwrap(), r.epochs);
    }

    #[test]
    fn strict_columns() {
        assert!(parse_report("epoch,nll\n0,1\n", "t").is_err());
        assert!(parse_report("epoch,nll,holdout_nll,fidelity\n0,1,,\n1,2\n", "t").is_err());
        assert!(parse_report("epoch,nll,holdout_nll,fidelity\nx,1,,\n", "t").is_err());
    }
}
