//! Domain types shared by every solver: the regression data, a candidate
//! segmentation, penalty settings and solver output.
//!
//! Time indices are 0-based throughout the library. A break at index `b`
//! means a new regime starts at observation `b`, so regimes are the
//! half-open windows `[b_{j-1}, b_j)` with `b_0 = 0` and `b_{m+1} = n`.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::DoubleDouble;

/// Observed series `y` and the n×p regressor matrix `X` (row-major).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    x: Vec<f64>,
    p: usize,
}

impl Dataset {
    /// Builds a dataset from `y` and a flat row-major `x` with `p` columns.
    pub fn from_flat(y: Vec<f64>, x: Vec<f64>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidData("regressor dimension must be at least 1".into()));
        }
        if y.len() < 2 {
            return Err(Error::InvalidData(format!(
                "need at least 2 observations, got {}",
                y.len()
            )));
        }
        if x.len() != y.len() * p {
            return Err(Error::DimensionMismatch {
                expected: y.len() * p,
                found: x.len(),
            });
        }
        if let Some(row) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "y", row });
        }
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "X", row: i / p });
        }
        Ok(Self { y, x, p })
    }

    /// Builds a dataset from per-observation regressor rows.
    pub fn from_rows(y: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                found: rows.len(),
            });
        }
        let p = rows.first().map_or(0, Vec::len);
        let mut x = Vec::with_capacity(rows.len() * p);
        for row in rows {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            x.extend_from_slice(row);
        }
        Self::from_flat(y, x, p)
    }

    /// Level-shift design: a single constant regressor.
    pub fn intercept_only(y: Vec<f64>) -> Result<Self> {
        let n = y.len();
        Self::from_flat(y, vec![1.0; n], 1)
    }

    /// One scalar regressor without intercept.
    pub fn single_regressor(y: Vec<f64>, x: Vec<f64>) -> Result<Self> {
        Self::from_flat(y, x, 1)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.y.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    #[inline]
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    /// Flat row-major regressor matrix.
    #[inline]
    pub fn x(&self) -> &[f64] {
        &self.x
    }

    #[inline]
    pub fn row(&self, t: usize) -> &[f64] {
        &self.x[t * self.p..(t + 1) * self.p]
    }

    /// Returns a copy with `y` multiplied by `c`.
    pub fn scaled_y(&self, c: f64) -> Self {
        Self {
            y: self.y.iter().map(|v| v * c).collect(),
            x: self.x.clone(),
            p: self.p,
        }
    }
}

/// Ordered break set plus one coefficient vector per regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    breaks: Vec<usize>,
    coeffs: Vec<Vec<f64>>,
}

impl Segmentation {
    pub fn new(breaks: Vec<usize>, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if coeffs.len() != breaks.len() + 1 {
            return Err(Error::InvalidSegmentation(format!(
                "{} breaks need {} coefficient vectors, got {}",
                breaks.len(),
                breaks.len() + 1,
                coeffs.len()
            )));
        }
        if breaks.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSegmentation(
                "breaks must be strictly increasing".into(),
            ));
        }
        if breaks.first() == Some(&0) {
            return Err(Error::InvalidSegmentation(
                "a break at index 0 leaves the first regime empty".into(),
            ));
        }
        if let Some(p) = coeffs.first().map(Vec::len) {
            if coeffs.iter().any(|c| c.len() != p) {
                return Err(Error::InvalidSegmentation(
                    "coefficient vectors differ in length".into(),
                ));
            }
        }
        Ok(Self { breaks, coeffs })
    }

    /// A single regime with coefficient `coeff`.
    pub fn no_breaks(coeff: Vec<f64>) -> Self {
        Self {
            breaks: Vec::new(),
            coeffs: vec![coeff],
        }
    }

    /// Checks that every regime is non-empty for a series of length `n`
    /// and that coefficients have dimension `p`.
    pub fn validate_for(&self, n: usize, p: usize) -> Result<()> {
        if let Some(&last) = self.breaks.last() {
            if last >= n {
                return Err(Error::InvalidSegmentation(format!(
                    "break {last} outside series of length {n}"
                )));
            }
        }
        if let Some(c) = self.coeffs.iter().find(|c| c.len() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: c.len(),
            });
        }
        Ok(())
    }

    #[inline]
    pub fn breaks(&self) -> &[usize] {
        &self.breaks
    }

    #[inline]
    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// Number of breaks.
    #[inline]
    pub fn num_breaks(&self) -> usize {
        self.breaks.len()
    }

    /// Half-open regime windows `[start, end)` for a series of length `n`.
    pub fn regimes(&self, n: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.breaks.len() + 1);
        let mut start = 0;
        for &b in &self.breaks {
            out.push((start, b));
            start = b;
        }
        out.push((start, n));
        out
    }
}

/// Penalty and constraint settings for the l0 problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda: f64,
    pub big_m: f64,
    /// Minimum regime length; 2 reproduces the "no consecutive breaks" rule.
    pub min_gap: usize,
    /// Solve with exactly this many breaks.
    pub fixed_m: Option<usize>,
}

impl PenaltyConfig {
    pub fn new(lambda: f64, big_m: f64) -> Self {
        Self {
            lambda,
            big_m,
            min_gap: 2,
            fixed_m: None,
        }
    }

    pub fn with_min_gap(mut self, min_gap: usize) -> Self {
        self.min_gap = min_gap;
        self
    }

    pub fn with_fixed_m(mut self, m: usize) -> Self {
        self.fixed_m = Some(m);
        self
    }

    /// Largest break count a series of length `n` can hold.
    pub fn max_breaks(n: usize, min_gap: usize) -> usize {
        if min_gap == 0 || n < min_gap {
            return 0;
        }
        (n - min_gap) / min_gap
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.big_m > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "big-M must be positive, got {}",
                self.big_m
            )));
        }
        validate_min_gap(self.min_gap, n)?;
        if let Some(m) = self.fixed_m {
            let cap = Self::max_breaks(n, self.min_gap);
            if m > cap {
                return Err(Error::Infeasible(format!(
                    "{m} breaks with minimum regime length {} need at least {} observations, have {n}",
                    self.min_gap,
                    (m + 1) * self.min_gap
                )));
            }
        }
        Ok(())
    }
}

pub(crate) fn validate_min_gap(min_gap: usize, n: usize) -> Result<()> {
    if min_gap < 2 {
        return Err(Error::InvalidConfig(format!(
            "minimum regime length must be at least 2, got {min_gap}"
        )));
    }
    if n < min_gap {
        return Err(Error::Infeasible(format!(
            "series of length {n} is shorter than the minimum regime length {min_gap}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Certificate {
    ProvedOptimal,
    IncumbentOnly { gap: f64 },
}

impl Certificate {
    pub fn is_optimal(&self) -> bool {
        matches!(self, Certificate::ProvedOptimal)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub nodes_explored: u64,
    pub dp_cells: u64,
    #[serde(with = "duration_secs")]
    pub wall_time: Duration,
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Ok(Duration::from_secs_f64(secs.max(0.0)))
    }
}

/// Output of any exact solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    /// Attained `SSE + lambda * m`.
    pub objective: f64,
    pub sse: f64,
    pub lambda: f64,
    pub segmentation: Segmentation,
    pub certificate: Certificate,
    pub stats: SolverStats,
}

impl SolverResult {
    #[inline]
    pub fn num_breaks(&self) -> usize {
        self.segmentation.num_breaks()
    }
}

/// Smallest regime length and the smallest/largest jump between adjacent
/// coefficient vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakDiagnostics {
    pub i_min: usize,
    pub j_min: f64,
    pub j_max: f64,
}

/// Evaluates `sum_t (y_t - beta_t' x_t)^2 + lambda * m` for a segmentation.
pub fn recompute_objective(data: &Dataset, seg: &Segmentation, lambda: f64) -> Result<f64> {
    seg.validate_for(data.len(), data.dim())?;
    let mut acc = DoubleDouble::default();
    for ((start, end), coeff) in seg.regimes(data.len()).into_iter().zip(seg.coeffs()) {
        for t in start..end {
            let fitted: f64 = data.row(t).iter().zip(coeff).map(|(x, b)| x * b).sum();
            let r = data.y()[t] - fitted;
            acc = acc.add(r * r);
        }
    }
    Ok(acc.hi + acc.lo + lambda * seg.num_breaks() as f64)
}

/// Regime-length and jump-size summary of a segmentation over `n` points.
pub fn diagnostics(seg: &Segmentation, n: usize) -> BreakDiagnostics {
    let i_min = seg
        .regimes(n)
        .iter()
        .map(|(s, e)| e.saturating_sub(*s))
        .min()
        .unwrap_or(n);
    let jumps: Vec<f64> = seg
        .coeffs()
        .windows(2)
        .map(|w| {
            w[0].iter()
                .zip(&w[1])
                .map(|(a, b)| (b - a) * (b - a))
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    if jumps.is_empty() {
        return BreakDiagnostics {
            i_min,
            j_min: 0.0,
            j_max: 0.0,
        };
    }
    BreakDiagnostics {
        i_min,
        j_min: jumps.iter().copied().fold(f64::INFINITY, f64::min),
        j_max: jumps.iter().copied().fold(0.0, f64::max),
    }
}
