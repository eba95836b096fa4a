//! CSV and JSON export of trajectories, distributions and phase data.
//!
//! CSV numbers carry 12 significant digits. JSON numbers use the shortest
//! representation that round-trips an `f64`.

use std::io::Write;

use csv::Writer;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::master::LumpedDistribution;
use crate::model::MagnetizationPair;
use crate::phase::{EquilibriumPoint, SweepCell};
use crate::sim::EnsembleStats;
use crate::validation::LlnReport;

pub const TRAJECTORY_HEADER: [&str; 3] = ["t", "m1", "m2"];
pub const ENSEMBLE_HEADER: [&str; 6] = ["t", "mean_m1", "mean_m2", "var_m1", "var_m2", "trials"];
pub const DISTRIBUTION_HEADER: [&str; 3] = ["k1", "k2", "prob"];
pub const LLN_HEADER: [&str; 4] = ["N", "trials", "median_sup_dev", "p90_sup_dev"];
pub const SWEEP_HEADER: [&str; 5] = ["alpha_j11", "j12", "region", "count", "boundary_flag"];

const CSV_DIGITS: usize = 12;

/// `x` with [`CSV_DIGITS`] significant digits in `%g` style: fixed notation
/// for moderate exponents, scientific otherwise, trailing zeros trimmed.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() { "NaN".into() } else if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{:.*e}", CSV_DIGITS - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..CSV_DIGITS as i32).contains(&exp) {
        let decimals = (CSV_DIGITS as i32 - 1 - exp).max(0) as usize;
        trim_zeros(format!("{:.*}", decimals, x))
    } else {
        format!("{}e{}", trim_zeros(mantissa.to_string()), exp)
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Solver(format!("csv output failed: {e}"))
}

fn finish<W: Write>(mut w: Writer<W>) -> Result<()> {
    w.flush().map_err(|e| Error::Solver(format!("csv output failed: {e}")))
}

/// `t,m1,m2` rows.
pub fn write_trajectory_csv<W: Write>(out: W, samples: &[(f64, MagnetizationPair)]) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER).map_err(csv_err)?;
    for (t, m) in samples {
        w.write_record([format_sig(*t), format_sig(m.m1), format_sig(m.m2)]).map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_ensemble_csv<W: Write>(out: W, e: &EnsembleStats) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(ENSEMBLE_HEADER).map_err(csv_err)?;
    for ((t, m), v) in e.times.iter().zip(&e.mean).zip(&e.variance) {
        w.write_record([
            format_sig(*t),
            format_sig(m.m1),
            format_sig(m.m2),
            format_sig(v.m1),
            format_sig(v.m2),
            e.trials.to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_distribution_csv<W: Write>(out: W, d: &LumpedDistribution) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(DISTRIBUTION_HEADER).map_err(csv_err)?;
    for (i, p) in d.probabilities.iter().enumerate() {
        let s = d.sizes.state(i);
        w.write_record([s.k1.to_string(), s.k2.to_string(), format_sig(*p)]).map_err(csv_err)?;
    }
    finish(w)
}

pub fn write_lln_csv<W: Write>(out: W, r: &LlnReport) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(LLN_HEADER).map_err(csv_err)?;
    for row in &r.rows {
        w.write_record([
            row.n.to_string(),
            row.trials.to_string(),
            format_sig(row.median_sup_dev),
            format_sig(row.p90_sup_dev),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Sweep rows; cells that failed get `NA` for region and count.
pub fn write_sweep_csv<W: Write>(out: W, cells: &[SweepCell]) -> Result<()> {
    let mut w = Writer::from_writer(out);
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for c in cells {
        w.write_record([
            format_sig(c.alpha_j11),
            format_sig(c.j12),
            c.region.map_or("NA".to_string(), |r| r.to_string()),
            c.count.map_or("NA".to_string(), |n| n.to_string()),
            u8::from(c.boundary).to_string(),
        ])
        .map_err(csv_err)?;
    }
    finish(w)
}

/// Equilibria as a JSON array of `{m1, m2, lambda_minus, lambda_plus, stability}`.
pub fn equilibria_json(points: &[EquilibriumPoint]) -> serde_json::Value {
    serde_json::to_value(points).expect("equilibria serialize")
}

/// Pretty JSON with a trailing newline.
pub fn to_json_string<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value)
        .map(|s| s + "\n")
        .map_err(|e| Error::Solver(format!("json output failed: {e}")))
}
