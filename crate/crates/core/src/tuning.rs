//! Penalty tuning: λ grids, the information-criterion path selector, and
//! the fixed-break-count BIC/LWZ baselines.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dp::{fixed_m_profile, solve_l0};
use crate::error::{Error, Result};
use crate::model::{Dataset, SolverResult};
use crate::segcost::{CostTable, SegmentCost, SegmentCostEngine};

pub const DEFAULT_GRID_SIZE: usize = 40;

/// The grid spans this many decades below its ceiling.
pub const GRID_DECADES: f64 = 3.0;

/// Smallest grid ceiling; returned when there is nothing to explain.
pub const LAMBDA_FLOOR: f64 = 1e-12;

/// Series up to this length get a cached cost table during path solves.
pub const COST_TABLE_MAX_LEN: usize = 4000;

const SSE_GUARD: f64 = 1e-300;

/// Smallest λ at which the no-break fit is optimal.
///
/// Starts from the best single-break reduction and raises λ to
/// `(SSE_0 - SSE_m) / m` of the current optimum until that optimum has no
/// break. Every step strictly increases λ, so the loop ends; the fixed point
/// is `max_m (SSE_0 - SSE_m) / m`.
pub fn lambda_max<C: SegmentCost + ?Sized>(costs: &C, min_gap: usize) -> Result<f64> {
    let n = costs.len();
    crate::model::validate_min_gap(min_gap, n)?;
    let sse0 = costs.sse(0, n);
    if !(sse0 > 0.0) || n < 2 * min_gap {
        return Ok(LAMBDA_FLOOR);
    }
    let single = (min_gap..=n - min_gap)
        .map(|b| costs.sse(0, b) + costs.sse(b, n))
        .fold(f64::INFINITY, f64::min);
    let mut lambda = (sse0 - single).max(LAMBDA_FLOOR);
    for _ in 0..10_000 {
        let fit = solve_l0(costs, lambda, min_gap)?;
        let m = fit.num_breaks();
        if m == 0 {
            return Ok(lambda);
        }
        let next = (sse0 - fit.sse) / m as f64;
        lambda = if next > lambda { next } else { lambda * (1.0 + 1e-12) + f64::MIN_POSITIVE };
    }
    Err(Error::InvalidData("penalty ceiling search did not settle".into()))
}

/// Geometric grid from [`lambda_max`] down over [`GRID_DECADES`] decades,
/// in decreasing order. A series with zero total SSE gets `[LAMBDA_FLOOR]`.
pub fn build_grid<C: SegmentCost + ?Sized>(costs: &C, n_points: usize, min_gap: usize) -> Result<Vec<f64>> {
    if n_points < 2 {
        return Err(Error::InvalidConfig(format!("grid needs at least 2 points, got {n_points}")));
    }
    let top = lambda_max(costs, min_gap)?;
    if !(costs.sse(0, costs.len()) > 0.0) {
        return Ok(vec![LAMBDA_FLOOR]);
    }
    let step = GRID_DECADES / (n_points - 1) as f64;
    Ok((0..n_points)
        .map(|i| if i == 0 { top } else { top * 10f64.powf(-step * i as f64) })
        .collect())
}

/// `log(SSE / T) + p (m + 1) / sqrt(T)`.
pub fn information_criterion(sse: f64, n: usize, p: usize, m: usize) -> f64 {
    let t = n as f64;
    ((sse + SSE_GUARD) / t).ln() + (p * (m + 1)) as f64 / t.sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRow {
    pub lambda: f64,
    pub num_breaks: usize,
    pub sse: f64,
    pub ic: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaPath {
    pub grid: Vec<f64>,
    pub fits: Vec<SolverResult>,
    pub ic: Vec<f64>,
}

impl LambdaPath {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn rows(&self) -> Vec<PathRow> {
        self.fits
            .iter()
            .zip(&self.ic)
            .map(|(f, &ic)| PathRow {
                lambda: f.lambda,
                num_breaks: f.num_breaks(),
                sse: f.sse,
                ic,
            })
            .collect()
    }
}

/// Solves `solve_l0` at every grid value (in parallel) and scores each fit.
pub fn solve_path<C: SegmentCost + ?Sized>(costs: &C, grid: &[f64], min_gap: usize) -> Result<LambdaPath> {
    let fits = grid
        .par_iter()
        .map(|&lambda| solve_l0(costs, lambda, min_gap))
        .collect::<Result<Vec<_>>>()?;
    let (n, p) = (costs.len(), costs.engine().dim());
    let ic = fits
        .iter()
        .map(|f| information_criterion(f.sse, n, p, f.num_breaks()))
        .collect();
    Ok(LambdaPath {
        grid: grid.to_vec(),
        fits,
        ic,
    })
}

/// Fit with the smallest information criterion; ties go to the larger λ.
pub fn select_by_ic(path: &LambdaPath, data: &Dataset) -> Result<SolverResult> {
    if path.fits.is_empty() {
        return Err(Error::InvalidConfig("empty penalty path".into()));
    }
    let (n, p) = (data.len(), data.dim());
    let mut best: Option<(f64, &SolverResult)> = None;
    for fit in &path.fits {
        let ic = information_criterion(fit.sse, n, p, fit.num_breaks());
        let better = match best {
            None => true,
            Some((bic, bfit)) => ic < bic || (ic == bic && fit.lambda > bfit.lambda),
        };
        if better {
            best = Some((ic, fit));
        }
    }
    Ok(best.expect("non-empty path").1.clone())
}

/// Grid, path and IC selection in one call. Returns the chosen fit and the path.
pub fn tune(engine: &SegmentCostEngine, data: &Dataset, n_points: usize, min_gap: usize) -> Result<(SolverResult, LambdaPath)> {
    let run = |costs: &dyn SegmentCost| -> Result<(SolverResult, LambdaPath)> {
        let grid = build_grid(costs, n_points, min_gap)?;
        let path = solve_path(costs, &grid, min_gap)?;
        Ok((select_by_ic(&path, data)?, path))
    };
    if engine.len() <= COST_TABLE_MAX_LEN {
        run(&CostTable::build(engine, min_gap))
    } else {
        run(engine)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassicalCriterion {
    Bic,
    Lwz,
}

/// Penalty constants of the LWZ criterion: `c0 * (log T)^(2 + delta0) / T`
/// per parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LwzConstants {
    pub c0: f64,
    pub delta0: f64,
}

impl Default for LwzConstants {
    fn default() -> Self {
        Self { c0: 0.299, delta0: 0.1 }
    }
}

/// Criterion value for `m` breaks; parameters counted as `p (m + 1) + m`.
pub fn classical_ic(criterion: ClassicalCriterion, sse: f64, n: usize, p: usize, m: usize, lwz: &LwzConstants) -> f64 {
    let t = n as f64;
    let coef = p * (m + 1);
    let k = (coef + m) as f64;
    match criterion {
        ClassicalCriterion::Bic => ((sse + SSE_GUARD) / t).ln() + k * t.ln() / t,
        ClassicalCriterion::Lwz => {
            if coef >= n {
                return f64::INFINITY;
            }
            ((sse + SSE_GUARD) / (n - coef) as f64).ln() + k * lwz.c0 * t.ln().powf(2.0 + lwz.delta0) / t
        }
    }
}

/// Best fixed-count fit for `m = 0..=m_max` under BIC or LWZ; ties go to fewer breaks.
pub fn select_by_classical_ic<C: SegmentCost + ?Sized>(
    costs: &C,
    criterion: ClassicalCriterion,
    m_max: usize,
    min_gap: usize,
) -> Result<SolverResult> {
    select_by_classical_ic_with(costs, criterion, m_max, min_gap, &LwzConstants::default())
}

pub fn select_by_classical_ic_with<C: SegmentCost + ?Sized>(
    costs: &C,
    criterion: ClassicalCriterion,
    m_max: usize,
    min_gap: usize,
    lwz: &LwzConstants,
) -> Result<SolverResult> {
    let profile = fixed_m_profile(costs, m_max, min_gap)?;
    let (n, p) = (costs.len(), costs.engine().dim());
    let mut best = 0;
    let mut best_ic = f64::INFINITY;
    for (m, fit) in profile.iter().enumerate() {
        let ic = classical_ic(criterion, fit.sse, n, p, m, lwz);
        if ic < best_ic {
            best = m;
            best_ic = ic;
        }
    }
    Ok(profile.into_iter().nth(best).expect("index within profile"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn engine(y: &[f64]) -> (Dataset, SegmentCostEngine) {
        let d = Dataset::intercept_only(y.to_vec()).unwrap();
        let e = SegmentCostEngine::new(&d);
        (d, e)
    }

    #[test]
    fn ceiling_of_a_clean_step() {
        let (_, e) = engine(&[0.0, 0.0, 2.0, 2.0]);
        assert_eq!(lambda_max(&e, 2).unwrap(), 4.0);
    }

    #[test]
    fn ceiling_of_a_constant_series() {
        let (_, e) = engine(&[3.0; 7]);
        assert_eq!(lambda_max(&e, 2).unwrap(), LAMBDA_FLOOR);
        assert_eq!(build_grid(&e, 10, 2).unwrap(), vec![LAMBDA_FLOOR]);
    }

    #[test]
    fn ceiling_covers_multi_break_optima() {
        // one break cannot explain a bump; two breaks can
        let (_, e) = engine(&[0.0, 0.0, 5.0, 5.0, 0.0, 0.0]);
        let single = (2..=4).map(|b| e.sse(0, b) + e.sse(b, 6)).fold(f64::INFINITY, f64::min);
        let naive = e.sse(0, 6) - single;
        assert!(solve_l0(&e, naive, 2).unwrap().num_breaks() > 0);
        let top = lambda_max(&e, 2).unwrap();
        assert_eq!(solve_l0(&e, top, 2).unwrap().num_breaks(), 0);
        assert!((top - e.sse(0, 6) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_grid_spans_three_decades() {
        let (_, e) = engine(&[0.0, 0.0, 2.0, 2.0]);
        let g = build_grid(&e, 2, 2).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0], 4.0);
        assert!((g[1] - 4e-3).abs() < 1e-15);
        assert!(build_grid(&e, 1, 2).is_err());
    }

    #[test]
    fn single_lambda_path_returns_its_fit() {
        let (d, e) = engine(&[0.0, 0.1, 2.0, 2.1, 1.9, 0.0]);
        let path = solve_path(&e, &[0.3], 2).unwrap();
        let pick = select_by_ic(&path, &d).unwrap();
        assert_eq!(pick.segmentation, path.fits[0].segmentation);
        assert!(select_by_ic(&LambdaPath { grid: vec![], fits: vec![], ic: vec![] }, &d).is_err());
    }

    #[test]
    fn classical_with_no_alternatives_is_the_full_fit() {
        let (_, e) = engine(&[0.0, 0.1, 2.0, 2.1, 1.9, 0.0]);
        for c in [ClassicalCriterion::Bic, ClassicalCriterion::Lwz] {
            assert_eq!(select_by_classical_ic(&e, c, 0, 2).unwrap().num_breaks(), 0);
        }
    }

    #[test]
    fn classical_prefers_zero_when_breaks_do_not_help() {
        let (_, e) = engine(&[1.0; 10]);
        for c in [ClassicalCriterion::Bic, ClassicalCriterion::Lwz] {
            assert_eq!(select_by_classical_ic(&e, c, 3, 2).unwrap().num_breaks(), 0);
        }
    }

    #[test]
    fn infeasible_break_budget() {
        let (_, e) = engine(&[1.0; 5]);
        assert!(matches!(
            select_by_classical_ic(&e, ClassicalCriterion::Bic, 3, 2),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn path_rows_serialise() {
        let (_, e) = engine(&[0.0, 0.1, 2.0, 2.1, 1.9, 0.0]);
        let grid = build_grid(&e, 5, 2).unwrap();
        let path = solve_path(&e, &grid, 2).unwrap();
        let rows = path.rows();
        assert_eq!(rows.len(), 5);
        assert!(rows.iter().all(|r| r.ic.is_finite()));
    }
}
