//! Per-iteration experiment metrics and their CSV contract.
//!
//! The column contract is versioned in the leading comment line. Wall time
//! is measured and kept in memory but never written, so identical configs
//! produce byte-identical files.

use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{BenchError, Result};

/// Version tag written as the first line of every metrics file.
pub const METRICS_CSV_VERSION: &str = "# mslqr metrics v1";
const HEADER: &str = "experiment,learner,repeat,iteration,samples,suboptimality,gain_error,stable";

/// One evaluated iterate of one repeat.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub experiment: String,
    pub learner: String,
    pub repeat: usize,
    pub iteration: usize,
    /// Cumulative sample count after this iteration.
    pub samples: u64,
    /// Relative excess cost; `+inf` when the gain is not stabilizing.
    pub suboptimality: f64,
    /// Relative spectral-norm gain error against the reference optimum.
    pub gain_error: f64,
    pub stable: bool,
    /// Measured, excluded from the CSV contract.
    pub wall_time_s: f64,
}

fn format_float(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.16e}")
    }
}

/// Canonical record order: everything that identifies a row.
pub fn sort_records(records: &mut [MetricsRecord]) {
    records.sort_by(|a, b| {
        (&a.experiment, &a.learner, a.repeat, a.iteration).cmp(&(
            &b.experiment,
            &b.learner,
            b.repeat,
            b.iteration,
        ))
    });
}

/// Writes the versioned header plus one line per record, 17 significant
/// digits on floats so values reload exactly.
pub fn emit_csv<W: Write>(records: &[MetricsRecord], out: &mut W) -> Result<()> {
    writeln!(out, "{METRICS_CSV_VERSION}")?;
    writeln!(out, "{HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.experiment,
            r.learner,
            r.repeat,
            r.iteration,
            r.samples,
            format_float(r.suboptimality),
            format_float(r.gain_error),
            r.stable
        )?;
    }
    Ok(())
}

pub fn write_csv_file(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    emit_csv(records, &mut file)?;
    Ok(())
}

fn parse_field<T: std::str::FromStr>(field: &str, line: usize, what: &str) -> Result<T> {
    field.parse().map_err(|_| BenchError::MetricsParse {
        line,
        reason: format!("bad {what}: {field:?}"),
    })
}

/// Reloads a metrics file; wall time comes back as zero.
pub fn load_csv<R: BufRead>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut records = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed == HEADER {
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 8 {
            return Err(BenchError::MetricsParse {
                line: idx + 1,
                reason: format!("expected 8 fields, got {}", fields.len()),
            });
        }
        records.push(MetricsRecord {
            experiment: fields[0].to_string(),
            learner: fields[1].to_string(),
            repeat: parse_field(fields[2], idx + 1, "repeat")?,
            iteration: parse_field(fields[3], idx + 1, "iteration")?,
            samples: parse_field(fields[4], idx + 1, "samples")?,
            suboptimality: parse_field(fields[5], idx + 1, "suboptimality")?,
            gain_error: parse_field(fields[6], idx + 1, "gain_error")?,
            stable: parse_field(fields[7], idx + 1, "stable")?,
            wall_time_s: 0.0,
        });
    }
    Ok(records)
}

pub fn load_csv_file(path: &Path) -> Result<Vec<MetricsRecord>> {
    let file = std::io::BufReader::new(std::fs::File::open(path)?);
    load_csv(file)
}

/// Instability-sweep output row.
#[derive(Debug, Clone, PartialEq)]
pub struct InstabilityRecord {
    pub beta0: f64,
    pub iteration: usize,
    pub percent_unstable: f64,
}

pub fn emit_instability_csv<W: Write>(records: &[InstabilityRecord], out: &mut W) -> Result<()> {
    writeln!(out, "# mslqr instability v1")?;
    writeln!(out, "beta0,iteration,percent_unstable")?;
    for r in records {
        writeln!(
            out,
            "{},{},{}",
            format_float(r.beta0),
            r.iteration,
            format_float(r.percent_unstable)
        )?;
    }
    Ok(())
}
