//! CSV and JSON rendering of verification reports.
//!
//! CSV output always carries a header row and writes floats with 17
//! significant digits, so equal reports render to equal bytes.

use serde::Serialize;

use crate::bernstein::BernsteinReport;
use crate::coupling::CouplingReport;
use crate::error::{Error, Result};
use crate::noise::Family;
use crate::oracle::RiskReport;

/// Output format of the command-line tool.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

pub fn fmt_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_float).unwrap_or_default()
}

fn verdict(passed: bool) -> String {
    if passed { "pass" } else { "fail" }.to_string()
}

/// A report that renders to one CSV row.
pub trait CsvRow {
    fn header() -> &'static [&'static str];
    fn row(&self) -> Vec<String>;
}

/// A report paired with the seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Seeded<T> {
    #[serde(flatten)]
    pub report: T,
    pub seed: u64,
}

impl CsvRow for RiskReport {
    fn header() -> &'static [&'static str] {
        &[
            "family", "n", "m", "beta", "threshold", "mode", "risk", "stderr", "bound", "penalty", "slack",
            "verdict", "R", "seed",
        ]
    }

    fn row(&self) -> Vec<String> {
        vec![
            self.family.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            fmt_float(self.beta),
            fmt_float(self.threshold),
            self.mode.name().to_string(),
            fmt_float(self.risk_estimate),
            fmt_float(self.verdict_stderr),
            fmt_float(self.oracle_bound),
            fmt_float(self.penalty_term),
            fmt_float(self.slack),
            verdict(self.passed),
            self.replicates.to_string(),
            self.seed.to_string(),
        ]
    }
}

impl CsvRow for Seeded<CouplingReport> {
    fn header() -> &'static [&'static str] {
        &[
            "family", "alpha", "method", "statistic", "threshold", "mean_error", "sample_size", "verdict", "seed",
        ]
    }

    fn row(&self) -> Vec<String> {
        let r = &self.report;
        vec![
            r.family.to_string(),
            fmt_float(r.alpha),
            r.method.name().to_string(),
            fmt_float(r.statistic),
            fmt_float(r.threshold),
            fmt_opt(r.mean_zero_check),
            r.sample_size.map(|n| n.to_string()).unwrap_or_default(),
            verdict(r.passed),
            self.seed.to_string(),
        ]
    }
}

impl CsvRow for Seeded<BernsteinReport> {
    fn header() -> &'static [&'static str] {
        &[
            "family", "alpha", "v", "b", "c", "t_min", "t_max", "t_points", "max_ratio", "laws", "verdict", "seed",
        ]
    }

    fn row(&self) -> Vec<String> {
        let r = &self.report;
        vec![
            r.family.to_string(),
            fmt_float(r.alpha),
            fmt_float(r.v),
            fmt_float(r.b),
            fmt_float(r.c),
            fmt_float(r.t_min),
            fmt_float(r.t_max),
            r.t_points.to_string(),
            fmt_float(r.max_ratio),
            r.laws_checked.to_string(),
            verdict(r.passed),
            self.seed.to_string(),
        ]
    }
}

/// Summary of a DV minimality run over several observations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DvSummary {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub beta: f64,
    pub instances: usize,
    pub trials: usize,
    pub worst_violation: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub seed: u64,
}

impl CsvRow for DvSummary {
    fn header() -> &'static [&'static str] {
        &[
            "family", "n", "m", "beta", "instances", "trials", "worst_violation", "tolerance", "verdict", "seed",
        ]
    }

    fn row(&self) -> Vec<String> {
        vec![
            self.family.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            fmt_float(self.beta),
            self.instances.to_string(),
            self.trials.to_string(),
            fmt_float(self.worst_violation),
            fmt_float(self.tolerance),
            verdict(self.passed),
            self.seed.to_string(),
        ]
    }
}

/// Exact oracle bounds of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundSummary {
    pub family: Family,
    pub n: usize,
    pub m: usize,
    pub beta: f64,
    pub diameter: f64,
    pub threshold: f64,
    pub penalty_coefficient: Option<f64>,
    pub bound_finite: f64,
    pub bound_gibbs: f64,
    pub seed: u64,
}

impl CsvRow for BoundSummary {
    fn header() -> &'static [&'static str] {
        &[
            "family", "n", "m", "beta", "diameter", "threshold", "penalty_coefficient", "bound_finite",
            "bound_gibbs", "seed",
        ]
    }

    fn row(&self) -> Vec<String> {
        vec![
            self.family.to_string(),
            self.n.to_string(),
            self.m.to_string(),
            fmt_float(self.beta),
            fmt_float(self.diameter),
            fmt_float(self.threshold),
            fmt_opt(self.penalty_coefficient),
            fmt_float(self.bound_finite),
            fmt_float(self.bound_gibbs),
            self.seed.to_string(),
        ]
    }
}

pub fn to_csv<T: CsvRow>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::invalid(format!("csv: {e}"));
    w.write_record(T::header()).map_err(io)?;
    for r in rows {
        w.write_record(r.row()).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn to_json<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut s = serde_json::to_string_pretty(rows).map_err(|e| Error::invalid(format!("json: {e}")))?;
    s.push('\n');
    Ok(s)
}

pub fn render<T: CsvRow + Serialize>(rows: &[T], format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(rows),
        Format::Json => to_json(rows),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_have_seventeen_significant_digits() {
        assert_eq!(fmt_float(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_float(4.0), "4.0000000000000000e0");
        assert_eq!(fmt_float(-2.5e-300), "-2.5000000000000000e-300");
        assert_eq!(fmt_float(f64::INFINITY), "inf");
        for x in [0.1, 1.0 / 3.0, 2.0f64.sqrt(), 1e-17, 6.02e23] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn header_is_written_without_rows() {
        let s = to_csv::<DvSummary>(&[]).unwrap();
        assert_eq!(s, "family,n,m,beta,instances,trials,worst_violation,tolerance,verdict,seed\n");
    }
}
