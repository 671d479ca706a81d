//! Exact dynamic-programming solvers.
//!
//! `solve_l0` runs the optimal-partitioning recursion over the position of
//! the last break, `solve_fixed_m` the segment-neighbourhood recursion with
//! an explicit break count, and `brute_force` enumerates every admissible
//! break set for small series.
//!
//! All three accumulate the objective in the same order
//! (`((cost_1 + cost_2) + lambda) + cost_3 ...`), so optimal values agree
//! bit for bit. Ties are broken toward fewer breaks, then toward the
//! lexicographically smallest break sequence.

use std::cmp::Ordering;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::model::{validate_min_gap, Certificate, PenaltyConfig, Segmentation, SolverResult, SolverStats};
use crate::segcost::SegmentCost;

/// Largest series length accepted by [`brute_force`] by default.
pub const BRUTE_FORCE_MAX_LEN: usize = 16;

const NO_BACK: usize = usize::MAX;

pub(crate) fn validate_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!(
            "lambda must be finite and non-negative, got {lambda}"
        )));
    }
    Ok(())
}

/// Breaks of the stored optimal path ending with a regime that starts at `s`.
fn path_to(back: &[usize], mut s: usize) -> Vec<usize> {
    let mut out = Vec::new();
    while s > 0 {
        out.push(s);
        s = back[s];
    }
    out.reverse();
    out
}

/// Builds the final result from a break list; coefficients come from the engine.
pub(crate) fn assemble<C: SegmentCost + ?Sized>(
    costs: &C,
    breaks: Vec<usize>,
    objective: f64,
    lambda: f64,
    certificate: Certificate,
    stats: SolverStats,
) -> Result<SolverResult> {
    let n = costs.len();
    let mut coeffs = Vec::with_capacity(breaks.len() + 1);
    let mut sse = 0.0;
    let mut start = 0;
    for &end in breaks.iter().chain(std::iter::once(&n)) {
        coeffs.push(costs.engine().coeffs(start, end)?);
        sse += costs.sse(start, end);
        start = end;
    }
    Ok(SolverResult {
        objective,
        sse,
        lambda,
        segmentation: Segmentation::new(breaks, coeffs)?,
        certificate,
        stats,
    })
}

/// Global minimiser of `SSE + lambda * m` over segmentations whose regimes
/// all have at least `min_gap` observations.
pub fn solve_l0<C: SegmentCost + ?Sized>(costs: &C, lambda: f64, min_gap: usize) -> Result<SolverResult> {
    validate_lambda(lambda)?;
    let n = costs.len();
    validate_min_gap(min_gap, n)?;
    let started = Instant::now();

    let mut value = vec![f64::INFINITY; n + 1];
    let mut count = vec![u32::MAX; n + 1];
    let mut back = vec![NO_BACK; n + 1];
    let mut cells = 0u64;

    for t in min_gap..=n {
        let mut best_v = costs.sse(0, t);
        let mut best_k = 0u32;
        let mut best_s = 0usize;
        cells += 1;
        if t >= 2 * min_gap {
            for s in min_gap..=(t - min_gap) {
                let v = value[s] + costs.sse(s, t) + lambda;
                cells += 1;
                let k = count[s] + 1;
                let take = match v.partial_cmp(&best_v) {
                    Some(Ordering::Less) => true,
                    Some(Ordering::Equal) => {
                        k < best_k
                            || (k == best_k && path_to(&back, s) < path_to(&back, best_s))
                    }
                    _ => false,
                };
                if take {
                    best_v = v;
                    best_k = k;
                    best_s = s;
                }
            }
        }
        value[t] = best_v;
        count[t] = best_k;
        back[t] = best_s;
    }

    let breaks = path_to(&back, back[n]);
    let stats = SolverStats {
        nodes_explored: 0,
        dp_cells: cells,
        wall_time: started.elapsed(),
    };
    assemble(costs, breaks, value[n], lambda, Certificate::ProvedOptimal, stats)
}

/// Minimum-SSE segmentations with exactly `m` breaks for every
/// `m = 0..=m_max`, from one segment-neighbourhood table.
pub fn fixed_m_profile<C: SegmentCost + ?Sized>(
    costs: &C,
    m_max: usize,
    min_gap: usize,
) -> Result<Vec<SolverResult>> {
    let n = costs.len();
    validate_min_gap(min_gap, n)?;
    let cap = PenaltyConfig::max_breaks(n, min_gap);
    if m_max > cap {
        return Err(Error::Infeasible(format!(
            "{m_max} breaks with minimum regime length {min_gap} need at least {} observations, have {n}",
            (m_max + 1) * min_gap
        )));
    }
    let started = Instant::now();
    let width = n + 1;
    let mut value = vec![f64::INFINITY; (m_max + 1) * width];
    let mut back = vec![NO_BACK; (m_max + 1) * width];
    let mut cells = 0u64;

    for t in min_gap..=n {
        value[t] = costs.sse(0, t);
        back[t] = 0;
        cells += 1;
    }
    for k in 1..=m_max {
        let (prev_rows, cur_rows) = value.split_at_mut(k * width);
        let prev = &prev_rows[(k - 1) * width..];
        let cur = &mut cur_rows[..width];
        let (back_prev, back_cur) = back.split_at_mut(k * width);
        let back_cur = &mut back_cur[..width];
        for t in ((k + 1) * min_gap)..=n {
            let mut best_v = f64::INFINITY;
            let mut best_s = NO_BACK;
            for s in (k * min_gap)..=(t - min_gap) {
                let v = prev[s] + costs.sse(s, t);
                cells += 1;
                let take = match v.partial_cmp(&best_v) {
                    Some(Ordering::Less) => true,
                    Some(Ordering::Equal) => {
                        fixed_path(back_prev, width, k - 1, s) < fixed_path(back_prev, width, k - 1, best_s)
                    }
                    _ => false,
                };
                if take {
                    best_v = v;
                    best_s = s;
                }
            }
            cur[t] = best_v;
            back_cur[t] = best_s;
        }
    }

    let elapsed = started.elapsed();
    (0..=m_max)
        .map(|m| {
            let mut breaks = Vec::with_capacity(m);
            let mut t = n;
            for k in (1..=m).rev() {
                let s = back[k * width + t];
                breaks.push(s);
                t = s;
            }
            breaks.reverse();
            let stats = SolverStats {
                nodes_explored: 0,
                dp_cells: cells,
                wall_time: elapsed,
            };
            assemble(costs, breaks, value[m * width + n], 0.0, Certificate::ProvedOptimal, stats)
        })
        .collect()
}

/// Breaks of the stored `k`-break path ending with a regime starting at `s`.
fn fixed_path(back_rows: &[usize], width: usize, k: usize, s: usize) -> Vec<usize> {
    let mut out = vec![s];
    let mut t = s;
    for level in (1..=k).rev() {
        let prev = back_rows[level * width + t];
        out.push(prev);
        t = prev;
    }
    out.reverse();
    out
}

/// Minimum-SSE segmentation with exactly `m` breaks.
pub fn solve_fixed_m<C: SegmentCost + ?Sized>(costs: &C, m: usize, min_gap: usize) -> Result<SolverResult> {
    let mut profile = fixed_m_profile(costs, m, min_gap)?;
    Ok(profile.pop().expect("profile holds m + 1 entries"))
}

/// Exhaustive enumeration of every admissible break set. Test oracle.
pub fn brute_force<C: SegmentCost + ?Sized>(
    costs: &C,
    lambda: f64,
    min_gap: usize,
    max_len: usize,
) -> Result<SolverResult> {
    validate_lambda(lambda)?;
    let n = costs.len();
    if n > max_len || n > 63 {
        return Err(Error::TooLarge { len: n, max: max_len.min(63) });
    }
    validate_min_gap(min_gap, n)?;
    let started = Instant::now();

    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut evaluated = 0u64;
    for mask in 0u64..(1u64 << (n - 1)) {
        let breaks: Vec<usize> = (0..n - 1).filter(|i| mask >> i & 1 == 1).map(|i| i + 1).collect();
        let mut start = 0;
        let admissible = breaks.iter().chain(std::iter::once(&n)).all(|&end| {
            let ok = end - start >= min_gap;
            start = end;
            ok
        });
        if !admissible {
            continue;
        }
        evaluated += 1;
        let v = objective_in_solver_order(costs, &breaks, lambda);
        let better = match &best {
            None => true,
            Some((bv, bb)) => match v.partial_cmp(bv) {
                Some(Ordering::Less) => true,
                Some(Ordering::Equal) => (breaks.len(), &breaks) < (bb.len(), bb),
                _ => false,
            },
        };
        if better {
            best = Some((v, breaks));
        }
    }
    let (objective, breaks) = best.expect("the no-break segmentation is always admissible");
    let stats = SolverStats {
        nodes_explored: evaluated,
        dp_cells: 0,
        wall_time: started.elapsed(),
    };
    assemble(costs, breaks, objective, lambda, Certificate::ProvedOptimal, stats)
}

/// `SSE + lambda * m` accumulated regime by regime in the solvers' order.
pub fn objective_in_solver_order<C: SegmentCost + ?Sized>(costs: &C, breaks: &[usize], lambda: f64) -> f64 {
    let n = costs.len();
    let mut start = 0;
    let mut acc = 0.0;
    for (j, &end) in breaks.iter().chain(std::iter::once(&n)).enumerate() {
        let c = costs.sse(start, end);
        acc = if j == 0 { c } else { acc + c + lambda };
        start = end;
    }
    acc
}
