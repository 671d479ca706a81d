//! Segment least-squares costs from prefix Gram matrices.
//!
//! `C(s, e) = min_b sum_{t in [s, e)} (y_t - b' x_t)^2` is answered in
//! O(p^3) per query, independent of the window length, by differencing
//! cumulative sums of `x x'`, `x y` and `y^2`. The cumulative sums are kept
//! as double-double pairs so that differencing long prefixes does not lose
//! the low-order digits of short windows.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{cholesky_in_place, cholesky_solve, DoubleDouble};
use crate::model::Dataset;

/// Relative Tikhonov bump applied to rank-deficient window Gram matrices.
pub const DEFAULT_RIDGE_EPS: f64 = 1e-10;

/// Relative pivot floor below which a window Gram matrix is treated as singular.
const PIVOT_REL_FLOOR: f64 = 1e-12;

/// Costs below this multiple of `eps * sum(y^2)` are rounding noise.
const SSE_NOISE_ULPS: f64 = 64.0;

const STACK_DIM: usize = 8;

/// Least-squares fit on one window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowFit {
    pub sse: f64,
    pub coeffs: Vec<f64>,
    /// Set when the window Gram matrix was singular (short or collinear window).
    pub degenerate: bool,
}

/// Anything that can price a half-open window `[start, end)`.
pub trait SegmentCost: Sync {
    fn engine(&self) -> &SegmentCostEngine;

    /// Minimal SSE over the window. Callers guarantee `start < end <= len`.
    fn sse(&self, start: usize, end: usize) -> f64;

    fn len(&self) -> usize {
        self.engine().len()
    }
}

/// Prefix-sum engine answering segment cost queries.
#[derive(Debug, Clone)]
pub struct SegmentCostEngine {
    n: usize,
    p: usize,
    ridge_eps: f64,
    gram: Vec<DoubleDouble>,
    xy: Vec<DoubleDouble>,
    yy: Vec<DoubleDouble>,
    y: Vec<f64>,
    x: Vec<f64>,
}

impl SegmentCostEngine {
    /// Builds the engine with the default ridge factor.
    pub fn new(data: &Dataset) -> Self {
        Self::build(data, DEFAULT_RIDGE_EPS).expect("default ridge factor is valid")
    }

    pub fn build(data: &Dataset, ridge_eps: f64) -> Result<Self> {
        if !(ridge_eps >= 0.0) || !ridge_eps.is_finite() {
            return Err(Error::InvalidConfig(format!(
                "ridge factor must be finite and non-negative, got {ridge_eps}"
            )));
        }
        let (n, p) = (data.len(), data.dim());
        if let Some(row) = data.y().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "y", row });
        }
        if let Some(i) = data.x().iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "X", row: i / p });
        }
        let mut gram = vec![DoubleDouble::default(); (n + 1) * p * p];
        let mut xy = vec![DoubleDouble::default(); (n + 1) * p];
        let mut yy = vec![DoubleDouble::default(); n + 1];
        for t in 0..n {
            let row = data.row(t);
            let yt = data.y()[t];
            let (prev, next) = gram.split_at_mut((t + 1) * p * p);
            let prev = &prev[t * p * p..];
            for i in 0..p {
                for j in 0..p {
                    next[i * p + j] = prev[i * p + j].add(row[i] * row[j]);
                }
            }
            for i in 0..p {
                xy[(t + 1) * p + i] = xy[t * p + i].add(row[i] * yt);
            }
            yy[t + 1] = yy[t].add(yt * yt);
        }
        Ok(Self {
            n,
            p,
            ridge_eps,
            gram,
            xy,
            yy,
            y: data.y().to_vec(),
            x: data.x().to_vec(),
        })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.p
    }

    pub fn ridge_eps(&self) -> f64 {
        self.ridge_eps
    }

    /// Cumulative `sum_{u < t} x_u x_u'` (row-major p×p).
    pub fn prefix_gram(&self, t: usize) -> Vec<f64> {
        let pp = self.p * self.p;
        self.gram[t * pp..(t + 1) * pp]
            .iter()
            .map(|d| d.hi + d.lo)
            .collect()
    }

    /// Cumulative `sum_{u < t} x_u y_u`.
    pub fn prefix_xy(&self, t: usize) -> Vec<f64> {
        self.xy[t * self.p..(t + 1) * self.p]
            .iter()
            .map(|d| d.hi + d.lo)
            .collect()
    }

    /// Cumulative `sum_{u < t} y_u^2`.
    pub fn prefix_yy(&self, t: usize) -> f64 {
        self.yy[t].hi + self.yy[t].lo
    }

    fn check_window(&self, start: usize, end: usize) -> Result<()> {
        if start >= end || end > self.n {
            return Err(Error::OutOfRange {
                start,
                end,
                len: self.n,
            });
        }
        Ok(())
    }

    /// Least-squares fit on `[start, end)`.
    pub fn fit(&self, start: usize, end: usize) -> Result<WindowFit> {
        self.check_window(start, end)?;
        let p = self.p;
        let mut g = vec![0.0; p * p];
        let mut b = vec![0.0; p];
        let mut rhs = vec![0.0; p];
        let mut work = vec![0.0; p * p];
        let (sse, degenerate) = self.solve_window(start, end, &mut g, &mut b, &mut rhs, &mut work);
        Ok(WindowFit {
            sse,
            coeffs: b,
            degenerate,
        })
    }

    /// Coefficients of the least-squares fit on `[start, end)`.
    pub fn coeffs(&self, start: usize, end: usize) -> Result<Vec<f64>> {
        self.fit(start, end).map(|f| f.coeffs)
    }

    #[inline]
    fn window_sums(&self, start: usize, end: usize, g: &mut [f64], b: &mut [f64]) -> f64 {
        let (p, pp) = (self.p, self.p * self.p);
        for k in 0..pp {
            g[k] = self.gram[end * pp + k].diff(self.gram[start * pp + k]);
        }
        for k in 0..p {
            b[k] = self.xy[end * p + k].diff(self.xy[start * p + k]);
        }
        self.yy[end].diff(self.yy[start])
    }

    /// Solves the window problem. On return `b` holds the coefficients;
    /// yields `(sse, degenerate)`. `rhs` and `work` are scratch space.
    fn solve_window(
        &self,
        start: usize,
        end: usize,
        g: &mut [f64],
        b: &mut [f64],
        rhs: &mut [f64],
        work: &mut [f64],
    ) -> (f64, bool) {
        let p = self.p;
        let yy = self.window_sums(start, end, g, b);

        if end - start < p && self.min_norm_fit(start, end, b) {
            return (0.0, true);
        }

        let trace: f64 = (0..p).map(|i| g[i * p + i]).sum();
        if !(trace > 0.0) {
            // every regressor is zero on the window: b = 0 is the min-norm fit
            b.iter_mut().for_each(|v| *v = 0.0);
            return (yy.max(0.0), true);
        }
        if p == 1 {
            // same arithmetic as `sse_scalar`
            let beta = b[0] / g[0];
            let sse = snap(yy - beta * b[0], yy);
            b[0] = beta;
            return (sse, false);
        }
        let max_diag = (0..p).map(|i| g[i * p + i]).fold(0.0, f64::max);
        rhs.copy_from_slice(b);

        work.copy_from_slice(g);
        if cholesky_in_place(work, p, PIVOT_REL_FLOOR * max_diag) {
            cholesky_solve(work, p, b);
            let fitted: f64 = b.iter().zip(rhs.iter()).map(|(c, r)| c * r).sum();
            return (snap(yy - fitted, yy), false);
        }

        let bump = (self.ridge_eps * trace / p as f64).max(f64::MIN_POSITIVE);
        work.copy_from_slice(g);
        for i in 0..p {
            work[i * p + i] += bump;
        }
        if !cholesky_in_place(work, p, 0.0) {
            b.iter_mut().for_each(|v| *v = 0.0);
            return (yy.max(0.0), true);
        }
        cholesky_solve(work, p, b);
        // exact SSE of the ridge coefficients: yy - 2 b'r + b'G b
        let cross: f64 = b.iter().zip(rhs.iter()).map(|(c, r)| c * r).sum();
        let mut quad = 0.0;
        for i in 0..p {
            let gi: f64 = (0..p).map(|j| g[i * p + j] * b[j]).sum();
            quad += b[i] * gi;
        }
        (snap(yy - 2.0 * cross + quad, yy), true)
    }

    /// Minimum-norm interpolant `X' (X X')^{-1} y` for windows shorter than p.
    /// Returns `false` when the window rows are linearly dependent.
    fn min_norm_fit(&self, start: usize, end: usize, out: &mut [f64]) -> bool {
        let (p, len) = (self.p, end - start);
        let row = |t: usize| &self.x[t * p..(t + 1) * p];
        let mut k = vec![0.0; len * len];
        for i in 0..len {
            for j in 0..len {
                k[i * len + j] = row(start + i).iter().zip(row(start + j)).map(|(a, b)| a * b).sum();
            }
        }
        let max_diag = (0..len).map(|i| k[i * len + i]).fold(0.0, f64::max);
        if !(max_diag > 0.0) || !cholesky_in_place(&mut k, len, PIVOT_REL_FLOOR * max_diag) {
            return false;
        }
        let mut w: Vec<f64> = self.y[start..end].to_vec();
        cholesky_solve(&k, len, &mut w);
        out.iter_mut().for_each(|v| *v = 0.0);
        for (i, wi) in w.iter().enumerate() {
            for (o, xv) in out.iter_mut().zip(row(start + i)) {
                *o += wi * xv;
            }
        }
        true
    }

    /// Unchecked SSE query used by the solvers.
    #[inline]
    pub fn window_sse(&self, start: usize, end: usize) -> f64 {
        debug_assert!(start < end && end <= self.n);
        let p = self.p;
        if p == 1 {
            return self.sse_scalar(start, end);
        }
        if p <= STACK_DIM {
            let mut g = [0.0; STACK_DIM * STACK_DIM];
            let mut b = [0.0; STACK_DIM];
            let mut rhs = [0.0; STACK_DIM];
            let mut work = [0.0; STACK_DIM * STACK_DIM];
            self.solve_window(
                start,
                end,
                &mut g[..p * p],
                &mut b[..p],
                &mut rhs[..p],
                &mut work[..p * p],
            )
            .0
        } else {
            let mut g = vec![0.0; p * p];
            let mut b = vec![0.0; p];
            let mut rhs = vec![0.0; p];
            let mut work = vec![0.0; p * p];
            self.solve_window(start, end, &mut g, &mut b, &mut rhs, &mut work).0
        }
    }

    #[inline]
    fn sse_scalar(&self, start: usize, end: usize) -> f64 {
        let g = self.gram[end].diff(self.gram[start]);
        let b = self.xy[end].diff(self.xy[start]);
        let yy = self.yy[end].diff(self.yy[start]);
        if g > 0.0 {
            let beta = b / g;
            // a lone nonzero pivot is never below the relative floor
            snap(yy - beta * b, yy)
        } else {
            yy.max(0.0)
        }
    }
}

#[inline]
fn snap(sse: f64, yy: f64) -> f64 {
    if sse <= SSE_NOISE_ULPS * f64::EPSILON * yy.abs() {
        0.0
    } else {
        sse
    }
}

impl SegmentCost for SegmentCostEngine {
    fn engine(&self) -> &SegmentCostEngine {
        self
    }

    #[inline]
    fn sse(&self, start: usize, end: usize) -> f64 {
        self.window_sse(start, end)
    }
}

/// Dense cache of every window cost with length at least `min_len`.
///
/// Worth building when the same series is solved many times, e.g. along a
/// penalty grid. Values are bit-identical to the engine's.
#[derive(Debug, Clone)]
pub struct CostTable<'a> {
    engine: &'a SegmentCostEngine,
    min_len: usize,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl<'a> CostTable<'a> {
    pub fn build(engine: &'a SegmentCostEngine, min_len: usize) -> Self {
        let n = engine.len();
        let min_len = min_len.max(1);
        let mut offsets = vec![0usize; n + 2];
        for e in 0..=n {
            let count = if e >= min_len { e - min_len + 1 } else { 0 };
            offsets[e + 1] = offsets[e] + count;
        }
        let mut values = vec![0.0; offsets[n + 1]];
        let mut rows: Vec<(usize, &mut [f64])> = Vec::with_capacity(n + 1);
        let mut rest = values.as_mut_slice();
        for e in 0..=n {
            let (row, tail) = rest.split_at_mut(offsets[e + 1] - offsets[e]);
            rows.push((e, row));
            rest = tail;
        }
        rows.into_par_iter().for_each(|(e, row)| {
            for (s, v) in row.iter_mut().enumerate() {
                *v = engine.window_sse(s, e);
            }
        });
        Self {
            engine,
            min_len,
            offsets,
            values,
        }
    }

    pub fn min_len(&self) -> usize {
        self.min_len
    }
}

impl SegmentCost for CostTable<'_> {
    fn engine(&self) -> &SegmentCostEngine {
        self.engine
    }

    #[inline]
    fn sse(&self, start: usize, end: usize) -> f64 {
        if end - start >= self.min_len {
            self.values[self.offsets[end] + start]
        } else {
            self.engine.window_sse(start, end)
        }
    }
}
