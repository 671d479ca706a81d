//! Detection report (JSON schema version 1).
//!
//! Observation indices are 1-based data-row numbers of the input CSV (the
//! header is not counted). A regime `[start, end]` is inclusive at both
//! ends; a break at index `b` means row `b` is the first row of a new regime.

use serde::{Deserialize, Serialize};

use l0break_core::tuning::PathRow;
use l0break_core::{Certificate, Segmentation, SolverStats};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputInfo {
    pub path: String,
    pub y: String,
    /// Regressor names in coefficient order (`const`, listed columns, `y_lag1`).
    pub regressors: Vec<String>,
    pub lag_y: bool,
    /// Rows used in the fit.
    pub n_obs: usize,
    /// 1-based row of the first observation used.
    pub first_row: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakEntry {
    pub index: usize,
    pub label: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientEntry {
    pub name: String,
    pub estimate: f64,
    pub std_error: Option<f64>,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeEntry {
    pub start: usize,
    pub end: usize,
    pub start_label: Option<String>,
    pub end_label: Option<String>,
    pub coefficients: Vec<CoefficientEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectReport {
    pub schema: u32,
    pub input: InputInfo,
    pub solver: String,
    pub certificate: Certificate,
    pub lambda: f64,
    pub min_gap: usize,
    pub fixed_m: Option<usize>,
    pub objective: f64,
    pub sse: f64,
    pub num_breaks: usize,
    pub breaks: Vec<BreakEntry>,
    pub regimes: Vec<RegimeEntry>,
    /// Bandwidth used for the standard errors; absent when inference failed.
    pub hac_lags: Option<usize>,
    pub inference_note: Option<String>,
    /// Penalty path of the automatic selection, largest λ first.
    pub path: Option<Vec<PathRow>>,
    pub stats: SolverStats,
    pub seed: Option<u64>,
}

impl DetectReport {
    /// Segmentation in 0-based observation indices of the fitted sample.
    pub fn segmentation(&self) -> l0break_core::Result<Segmentation> {
        let breaks = self.breaks.iter().map(|b| b.index - self.input.first_row).collect();
        let coeffs = self
            .regimes
            .iter()
            .map(|r| r.coefficients.iter().map(|c| c.estimate).collect())
            .collect();
        Segmentation::new(breaks, coeffs)
    }

    pub const CSV_HEADER: &'static str = "regime,start,end,start_label,coefficient,estimate,std_error,ci_lower,ci_upper";

    /// One CSV row per regime coefficient.
    pub fn csv_rows(&self) -> Vec<String> {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let mut out = Vec::new();
        for (j, r) in self.regimes.iter().enumerate() {
            for c in &r.coefficients {
                out.push(format!(
                    "{},{},{},{},{},{},{},{},{}",
                    j + 1,
                    r.start,
                    r.end,
                    r.start_label.as_deref().unwrap_or(""),
                    c.name,
                    c.estimate,
                    opt(c.std_error),
                    opt(c.ci_lower),
                    opt(c.ci_upper)
                ));
            }
        }
        out
    }
}
