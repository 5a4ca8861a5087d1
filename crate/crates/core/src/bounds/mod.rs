//! Exponent derivation and certificates for the heat-kernel, exit-time and
//! fluctuation bounds, evaluated against exactly computed quantities.
//!
//! A fitted constant is the extremal pointwise ratio over the grid, so a
//! certificate with a non-empty grid holds by construction; the informative
//! output is the spread of the ratios and how it behaves across scales.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod exponents;
mod offdiag;
mod ondiag;
mod tail;

pub use exponents::{derive_exponents, derive_exponents_from, ExponentRule, ExponentSet, Mode, DEFAULT_SLACK};
pub use offdiag::{
    certify_offdiag, certify_offdiag_with, chain_count, ChainPlan, OffdiagOptions, CC_LEN_CAP, CC_SOURCES,
    KERNEL_FLOOR,
};
pub use ondiag::{
    certify_fluctuations, certify_local, certify_neardiag, certify_neardiag_with, certify_ondiag,
    certify_ondiag_with, local_envelope, LocalEnvelope, HYPOTHESIS_RANGE, RESCOND_FLOOR,
};
pub use tail::{certify_exit_tail, certify_exit_times, TailOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Verdict {
    Holds,
    Violated { witness: String },
    HypothesesNotMet { reason: String },
}

impl Verdict {
    pub fn holds(&self) -> bool {
        matches!(self, Self::Holds)
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::Holds => "holds",
            Self::Violated { .. } => "violated",
            Self::HypothesesNotMet { .. } => "hypotheses_not_met",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridInfo {
    pub description: String,
    pub points: usize,
    pub window_rule: String,
}

/// Plot-ready table of the pointwise ratios behind a certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RatioTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl RatioTable {
    fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        if row.iter().all(|v| v.is_finite()) {
            self.rows.push(row);
        }
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:e}")))?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub bound_id: String,
    pub grid: GridInfo,
    pub constants: BTreeMap<String, f64>,
    pub ratio_min: Option<f64>,
    pub ratio_max: Option<f64>,
    pub verdict: Verdict,
    pub witnesses: Vec<String>,
    pub metrics: BTreeMap<String, f64>,
    pub table: RatioTable,
}

impl BoundCertificate {
    fn new(bound_id: &str, grid: GridInfo, table: RatioTable) -> Self {
        Self {
            bound_id: bound_id.to_string(),
            grid,
            constants: BTreeMap::new(),
            ratio_min: None,
            ratio_max: None,
            verdict: Verdict::Holds,
            witnesses: Vec::new(),
            metrics: BTreeMap::new(),
            table,
        }
    }

    /// Non-finite values are dropped and reported as witnesses instead.
    fn constant(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.constants.insert(name.to_string(), value);
        } else {
            self.witnesses.push(format!("constant {name} is not finite ({value})"));
        }
    }

    fn metric(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.to_string(), value);
        }
    }

    fn ratios(&mut self, ratios: &[f64]) {
        self.ratio_min = ratios.iter().copied().filter(|r| r.is_finite()).reduce(f64::min);
        self.ratio_max = ratios.iter().copied().filter(|r| r.is_finite()).reduce(f64::max);
    }

    fn violate(&mut self, witness: String) {
        if self.verdict.holds() {
            self.verdict = Verdict::Violated { witness };
        }
    }

    fn not_met(&mut self, reason: String) {
        self.verdict = Verdict::HypothesesNotMet { reason };
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.constants.get(name).or_else(|| self.metrics.get(name)).copied()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub const TIME_WINDOW_RULE: &str =
    "t in [h(r_min), h(r_max/2)], 40 log-spaced points; slopes over the middle decade; liminf/limsup over [t_lo, 10 t_lo]";

/// Times within half a decade of the geometric centre of the grid, or the
/// whole grid when it spans less than a decade.
pub(crate) fn middle_decade(times: &[f64]) -> Vec<f64> {
    let (lo, hi) = (times[0], times[times.len() - 1]);
    if hi / lo <= 10.0 {
        return times.to_vec();
    }
    let mid = (lo * hi).sqrt();
    times.iter().copied().filter(|t| (t / mid).log10().abs() <= 0.5 + 1e-12).collect()
}

pub(crate) fn lowest_decade(times: &[f64]) -> Vec<f64> {
    let lo = times[0];
    times.iter().copied().filter(|&t| t <= 10.0 * lo * (1.0 + 1e-12)).collect()
}

/// Evenly strided sample of at most `k` indices from `0..n`.
pub(crate) fn sample_indices(n: usize, k: usize) -> Vec<usize> {
    if n <= k {
        return (0..n).collect();
    }
    (0..k).map(|i| i * n / k).collect()
}

pub(crate) fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    sxy / (sxx * syy).sqrt()
}

pub(crate) fn require_points(bound: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::EmptyGrid(format!("{bound}: no admissible grid points")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decade_selection() {
        let times = crate::volume::log_grid(1.0, 1000.0, 31);
        let mid = middle_decade(&times);
        assert!((mid[0] - 10f64.powf(1.0)).abs() < 1e-9 && (mid[mid.len() - 1] - 100.0).abs() < 1e-9);
        assert_eq!(lowest_decade(&times).len(), 11);
        let short = crate::volume::log_grid(1.0, 5.0, 7);
        assert_eq!(middle_decade(&short).len(), 7);
    }

    #[test]
    fn certificate_json_round_trip() {
        let mut c = BoundCertificate::new(
            "demo",
            GridInfo { description: "d".into(), points: 1, window_rule: TIME_WINDOW_RULE.into() },
            RatioTable::new(&["t", "ratio"]),
        );
        c.constant("c1", 0.5);
        c.constant("c2", f64::INFINITY);
        c.metric("nan", f64::NAN);
        c.table.push(vec![1.0, 2.0]);
        c.table.push(vec![1.0, f64::NAN]);
        c.ratios(&[0.5, 2.0, f64::NAN]);
        assert_eq!(c.constants.len(), 1);
        assert_eq!(c.witnesses.len(), 1);
        assert!(c.metrics.is_empty());
        assert_eq!(c.table.rows.len(), 1);
        assert_eq!((c.ratio_min, c.ratio_max), (Some(0.5), Some(2.0)));
        let back: BoundCertificate = serde_json::from_str(&c.to_json().unwrap()).unwrap();
        assert_eq!(back, c);
        c.violate("w".into());
        c.violate("later".into());
        assert_eq!(c.verdict, Verdict::Violated { witness: "w".into() });
    }
}
