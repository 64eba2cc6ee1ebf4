//! Post-processing of metrics: medians, empirical bands, and the
//! least-squares slope of `log(median)` against `log(samples)` over the
//! final window of iterations.

use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{BenchError, Result};
use crate::metrics::MetricsRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Metric {
    Suboptimality,
    GainError,
}

impl Metric {
    pub fn of(&self, record: &MetricsRecord) -> f64 {
        match self {
            Metric::Suboptimality => record.suboptimality,
            Metric::GainError => record.gain_error,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Suboptimality => "suboptimality",
            Metric::GainError => "gain_error",
        }
    }
}

/// Median of a sample; infinities sort to the top, so a majority of finite
/// values keeps the median finite.
pub fn median(mut values: Vec<f64>) -> f64 {
    assert!(!values.is_empty());
    values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in metric values"));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Linear-interpolation quantile of sorted values, `q` in `[0, 1]`.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    let position = q * (sorted.len() - 1) as f64;
    let lower = position.floor() as usize;
    let upper = position.ceil() as usize;
    if lower == upper {
        sorted[lower]
    } else {
        let w = position - lower as f64;
        sorted[lower] * (1.0 - w) + sorted[upper] * w
    }
}

/// Across-repeat statistics of one iteration.
#[derive(Debug, Clone)]
pub struct IterationSummary {
    pub iteration: usize,
    pub samples: u64,
    pub median: f64,
    pub q10: f64,
    pub q90: f64,
    pub repeats: usize,
}

/// Groups records by iteration and reduces across repeats. The 10/90
/// quantiles form the two-sided 80% empirical band.
pub fn summarize(records: &[MetricsRecord], metric: Metric) -> Vec<IterationSummary> {
    let mut by_iteration: BTreeMap<usize, (u64, Vec<f64>)> = BTreeMap::new();
    for r in records {
        let entry = by_iteration.entry(r.iteration).or_insert((r.samples, Vec::new()));
        entry.0 = r.samples;
        entry.1.push(metric.of(r));
    }
    by_iteration
        .into_iter()
        .map(|(iteration, (samples, mut values))| {
            values.sort_by(|a, b| a.partial_cmp(b).expect("no NaN in metric values"));
            IterationSummary {
                iteration,
                samples,
                median: median(values.clone()),
                q10: quantile(&values, 0.1),
                q90: quantile(&values, 0.9),
                repeats: values.len(),
            }
        })
        .collect()
}

/// Least-squares slope of `ln(median metric)` vs `ln(samples)` over the
/// final `window` iterations (those with finite positive medians).
pub fn rate_slope(records: &[MetricsRecord], metric: Metric, window: usize) -> Result<f64> {
    let summaries: Vec<IterationSummary> = summarize(records, metric)
        .into_iter()
        .filter(|s| s.iteration >= 1 && s.samples > 0 && s.median.is_finite() && s.median > 0.0)
        .collect();
    let tail = summaries.len().saturating_sub(window);
    let points: Vec<(f64, f64)> = summaries[tail..]
        .iter()
        .map(|s| ((s.samples as f64).ln(), s.median.ln()))
        .collect();
    if points.len() < 5 {
        return Err(BenchError::InsufficientData(format!(
            "rate slope needs at least 5 usable points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in &points {
        sxx += (x - mean_x) * (x - mean_x);
        sxy += (x - mean_x) * (y - mean_y);
    }
    if sxx == 0.0 {
        return Err(BenchError::InsufficientData(
            "all points share one sample count".into(),
        ));
    }
    Ok(sxy / sxx)
}

/// Plot-ready per-iteration table with medians and 10/90 bands for both
/// metrics.
pub fn write_summary_csv<W: Write>(records: &[MetricsRecord], out: &mut W) -> Result<()> {
    writeln!(out, "# mslqr summary v1")?;
    writeln!(
        out,
        "iteration,samples,subopt_median,subopt_q10,subopt_q90,gain_error_median,gain_error_q10,gain_error_q90"
    )?;
    let subopt = summarize(records, Metric::Suboptimality);
    let gain = summarize(records, Metric::GainError);
    for (s, g) in subopt.iter().zip(&gain) {
        writeln!(
            out,
            "{},{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.iteration, s.samples, s.median, s.q10, s.q90, g.median, g.q10, g.q90
        )?;
    }
    Ok(())
}
