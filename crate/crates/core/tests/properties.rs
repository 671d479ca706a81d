use std::collections::HashMap;

use l0break_core::{
    brute_force, build_grid, export_lp, infer, lambda_max, recompute_objective, select_by_ic, solve_l0,
    solve_miqp_with, solve_path, BnbOptions, CostTable, Dataset, PenaltyConfig, SegmentCost, SegmentCostEngine,
    Segmentation, BRUTE_FORCE_MAX_LEN,
};
use l0break_core::simlab::hausdorff;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn dataset(p: usize, max_len: usize) -> impl Strategy<Value = Dataset> {
    (p + 3..=max_len).prop_flat_map(move |n| {
        (
            prop::collection::vec(-5.0f64..5.0, n),
            prop::collection::vec(-2.0f64..2.0, n * (p - 1)),
        )
            .prop_map(move |(y, x)| {
                let rows: Vec<Vec<f64>> = (0..y.len())
                    .map(|t| std::iter::once(1.0).chain(x[t * (p - 1)..(t + 1) * (p - 1)].iter().copied()).collect())
                    .collect();
                Dataset::from_rows(y, &rows).unwrap()
            })
    })
}

fn any_dataset(max_len: usize) -> impl Strategy<Value = Dataset> {
    prop_oneof![dataset(1, max_len), dataset(2, max_len), dataset(3, max_len)]
}

/// Least-squares SSE by SVD, independent of the prefix-sum engine.
fn oracle_sse(data: &Dataset, s: usize, e: usize) -> f64 {
    let p = data.dim();
    let x = DMatrix::from_row_slice(e - s, p, &data.x()[s * p..e * p]);
    let y = DVector::from_column_slice(&data.y()[s..e]);
    let beta = x.clone().svd(true, true).solve(&y, 1e-12).unwrap();
    (y - x * beta).norm_squared()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn window_cost_matches_svd_least_squares(data in any_dataset(30), a in 0usize..1000, b in 0usize..1000) {
        let n = data.len();
        let p = data.dim();
        let s = a % (n - p);
        let e = s + p + 1 + b % (n - s - p);
        let engine = SegmentCostEngine::new(&data);
        let want = oracle_sse(&data, s, e);
        let got = engine.sse(s, e);
        let scale: f64 = data.y()[s..e].iter().map(|v| v * v).sum::<f64>().max(1.0);
        prop_assert!((got - want).abs() <= 1e-8 * scale, "got {got}, want {want}");
    }

    #[test]
    fn splitting_a_window_never_raises_cost(data in any_dataset(30), a in 0usize..1000, b in 0usize..1000, c in 0usize..1000) {
        let n = data.len();
        let engine = SegmentCostEngine::new(&data);
        let s = a % (n - 2);
        let e = s + 2 + b % (n - s - 1);
        let m = s + 1 + c % (e - s - 1);
        let whole = engine.sse(s, e);
        prop_assert!(engine.sse(s, m) + engine.sse(m, e) <= whole + 1e-9 * (1.0 + whole));
    }

    #[test]
    fn cost_table_agrees_bitwise(data in any_dataset(25), min_len in 1usize..4) {
        let engine = SegmentCostEngine::new(&data);
        let table = CostTable::build(&engine, min_len);
        let n = data.len();
        for s in 0..n {
            for e in (s + min_len)..=n {
                prop_assert_eq!(table.sse(s, e).to_bits(), engine.sse(s, e).to_bits());
            }
        }
    }

    #[test]
    fn dp_equals_exhaustive_search(data in any_dataset(BRUTE_FORCE_MAX_LEN), lambda in prop_oneof![Just(0.0), 0.0f64..20.0], min_gap in 2usize..4) {
        prop_assume!(data.len() >= min_gap);
        let engine = SegmentCostEngine::new(&data);
        let dp = solve_l0(&engine, lambda, min_gap).unwrap();
        let bf = brute_force(&engine, lambda, min_gap, BRUTE_FORCE_MAX_LEN).unwrap();
        prop_assert_eq!(dp.objective, bf.objective);
        prop_assert_eq!(dp.segmentation.breaks(), bf.segmentation.breaks());
    }

    #[test]
    fn reported_objective_is_reproducible(data in any_dataset(40), lambda in 0.0f64..10.0) {
        let engine = SegmentCostEngine::new(&data);
        let fit = solve_l0(&engine, lambda, 2).unwrap();
        let again = recompute_objective(&data, &fit.segmentation, lambda).unwrap();
        prop_assert!((again - fit.objective).abs() <= 1e-9 * (1.0 + fit.objective.abs()));
    }

    #[test]
    fn fewer_breaks_at_larger_penalty(data in any_dataset(40), l1 in 0.0f64..10.0, l2 in 0.0f64..10.0) {
        let engine = SegmentCostEngine::new(&data);
        let (lo, hi) = if l1 < l2 { (l1, l2) } else { (l2, l1) };
        let m_lo = solve_l0(&engine, lo, 2).unwrap().num_breaks();
        let m_hi = solve_l0(&engine, hi, 2).unwrap().num_breaks();
        prop_assert!(m_hi <= m_lo);
    }

    #[test]
    fn no_break_at_or_above_the_grid_ceiling(data in any_dataset(40), extra in 1.0f64..3.0) {
        let engine = SegmentCostEngine::new(&data);
        let top = lambda_max(&engine, 2).unwrap();
        prop_assert_eq!(solve_l0(&engine, top, 2).unwrap().num_breaks(), 0);
        prop_assert_eq!(solve_l0(&engine, top * extra, 2).unwrap().num_breaks(), 0);
    }

    #[test]
    fn rescaling_the_response_rescales_the_problem(data in any_dataset(30), lambda in 0.01f64..5.0, c in 0.5f64..4.0) {
        let engine = SegmentCostEngine::new(&data);
        let scaled = data.scaled_y(c);
        let engine_c = SegmentCostEngine::new(&scaled);
        let a = solve_l0(&engine, lambda, 2).unwrap();
        let b = solve_l0(&engine_c, lambda * c * c, 2).unwrap();
        prop_assert!((b.objective - c * c * a.objective).abs() <= 1e-8 * (1.0 + b.objective));
    }

    #[test]
    fn duplicated_grid_values_do_not_change_selection(data in any_dataset(40), dup in 0usize..10) {
        let engine = SegmentCostEngine::new(&data);
        let grid = build_grid(&engine, 10, 2).unwrap();
        let mut doubled = grid.clone();
        let k = dup % grid.len();
        doubled.insert(k, grid[k]);
        let a = select_by_ic(&solve_path(&engine, &grid, 2).unwrap(), &data).unwrap();
        let b = select_by_ic(&solve_path(&engine, &doubled, 2).unwrap(), &data).unwrap();
        prop_assert_eq!(a.segmentation, b.segmentation);
    }

    #[test]
    fn branch_and_bound_matches_dp(data in any_dataset(30), lambda in 0.0f64..5.0, min_gap in 2usize..4) {
        prop_assume!(data.len() >= min_gap);
        let engine = SegmentCostEngine::new(&data);
        let cfg = PenaltyConfig::new(lambda, 1e9).with_min_gap(min_gap);
        let bnb = solve_miqp_with(&engine, &cfg, &BnbOptions::cold()).unwrap().result;
        let dp = solve_l0(&engine, lambda, min_gap).unwrap();
        prop_assert!(bnb.certificate.is_optimal());
        prop_assert!((bnb.objective - dp.objective).abs() <= 1e-9 * (1.0 + dp.objective));
    }

    #[test]
    fn hausdorff_is_a_metric(a in prop::collection::btree_set(0usize..200, 1..6),
                             b in prop::collection::btree_set(0usize..200, 1..6),
                             c in prop::collection::btree_set(0usize..200, 1..6)) {
        let (a, b, c): (Vec<_>, Vec<_>, Vec<_>) = (a.into_iter().collect(), b.into_iter().collect(), c.into_iter().collect());
        let d = |x: &[usize], y: &[usize]| hausdorff(x, y, 200).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn inference_reuses_the_window_fits(data in dataset(2, 40), cut in 0usize..1000) {
        let n = data.len();
        prop_assume!(n >= 8);
        let b = 3 + cut % (n - 6);
        let engine = SegmentCostEngine::new(&data);
        let coeffs = vec![engine.coeffs(0, b).unwrap(), engine.coeffs(b, n).unwrap()];
        let seg = Segmentation::new(vec![b], coeffs.clone()).unwrap();
        let rep = infer(&data, &seg, 2).unwrap();
        prop_assert_eq!(&rep.alpha_hat, &coeffs.concat());
        for i in 0..2 {
            for j in 2..4 {
                prop_assert_eq!(rep.psi_hat.get(i, j), 0.0);
                prop_assert_eq!(rep.cov.get(j, i), 0.0);
            }
        }
        prop_assert!(rep.cov.is_symmetric(1e-12));
    }
}

/// Every explored node's bound is at most the best objective among its
/// admissible completions.
#[test]
fn branch_and_bound_bounds_are_admissible() {
    let y = [0.4, -0.3, 2.2, 1.7, 2.5, 0.1, -0.6, 0.3, 1.4, 1.1, 0.9, -0.2];
    let data = Dataset::intercept_only(y.to_vec()).unwrap();
    let engine = SegmentCostEngine::new(&data);
    let n = y.len();
    for (lambda, min_gap) in [(0.0, 2), (0.3, 2), (1.0, 3), (5.0, 2)] {
        let cfg = PenaltyConfig::new(lambda, 1e9).with_min_gap(min_gap);
        let opts = BnbOptions {
            trace: true,
            ..BnbOptions::cold()
        };
        let out = solve_miqp_with(&engine, &cfg, &opts).unwrap();
        assert!(!out.explored.is_empty());
        for node in &out.explored {
            let mut best = f64::INFINITY;
            for mask in 0u32..(1 << (n - 1)) {
                let breaks: Vec<usize> = (1..n).filter(|b| mask >> (b - 1) & 1 == 1).collect();
                let prefix: Vec<usize> = breaks.iter().copied().filter(|&b| b < node.position).collect();
                if prefix != node.breaks {
                    continue;
                }
                let mut start = 0;
                let ok = breaks.iter().chain(std::iter::once(&n)).all(|&e| {
                    let fine = e - start >= min_gap;
                    start = e;
                    fine
                });
                if ok {
                    let seg_cost: f64 = {
                        let mut s = 0;
                        breaks
                            .iter()
                            .chain(std::iter::once(&n))
                            .map(|&e| {
                                let c = engine.sse(s, e);
                                s = e;
                                c
                            })
                            .sum()
                    };
                    best = best.min(seg_cost + lambda * breaks.len() as f64);
                }
            }
            assert!(node.bound <= best + 1e-9, "bound {} exceeds completion {best} at {node:?}", node.bound);
            if node.leaf {
                assert!((node.bound - best).abs() <= 1e-9);
            }
        }
    }
}

/// Parses the exported constraint rows and checks them at the optimum found
/// by the dynamic program.
#[test]
fn exported_program_is_satisfied_by_the_optimum() {
    let rows: Vec<Vec<f64>> = (0..12).map(|t| vec![1.0, ((t * 5) % 7) as f64 - 3.0]).collect();
    let y: Vec<f64> = (0..12)
        .map(|t| if t < 6 { 1.0 + 0.5 * rows[t][1] } else { -2.0 + 1.5 * rows[t][1] } + 0.01 * (t % 3) as f64)
        .collect();
    let data = Dataset::from_rows(y.clone(), &rows).unwrap();
    let engine = SegmentCostEngine::new(&data);
    let lambda = 0.5;
    let cfg = PenaltyConfig::new(lambda, 100.0).with_min_gap(3).with_fixed_m(1);
    let fit = solve_l0(&engine, lambda, 3).unwrap();
    assert_eq!(fit.num_breaks(), 1);

    let mut value: HashMap<String, f64> = HashMap::new();
    let regimes = fit.segmentation.regimes(12);
    for (j, &(s, e)) in regimes.iter().enumerate() {
        for t in s..e {
            let beta = &fit.segmentation.coeffs()[j];
            for (k, b) in beta.iter().enumerate() {
                value.insert(format!("b_{}_{}", t + 1, k + 1), *b);
            }
            let fitted: f64 = rows[t].iter().zip(beta).map(|(x, b)| x * b).sum();
            value.insert(format!("r_{}", t + 1), y[t] - fitted);
        }
    }
    for t in 1..12 {
        let z = if fit.segmentation.breaks().contains(&t) { 1.0 } else { 0.0 };
        value.insert(format!("z_{t}"), z);
    }

    let lp = export_lp(&data, &cfg).unwrap();
    let body = lp.split("Subject To\n").nth(1).unwrap().split("Bounds\n").next().unwrap();
    let mut checked = 0;
    for line in body.lines() {
        let (_, expr) = line.split_once(':').unwrap();
        let (lhs, op, rhs) = ["<=", ">=", "="]
            .iter()
            .find_map(|op| expr.split_once(op).map(|(l, r)| (l, *op, r)))
            .unwrap();
        let rhs: f64 = rhs.trim().parse().unwrap();
        let mut total = 0.0;
        let mut sign = 1.0;
        let mut coef = None;
        for tok in lhs.split_whitespace() {
            match tok {
                "+" => sign = 1.0,
                "-" => sign = -1.0,
                _ => match tok.parse::<f64>() {
                    Ok(c) => coef = Some(c),
                    Err(_) => {
                        total += sign * coef.take().unwrap_or(1.0) * value[tok];
                        sign = 1.0;
                    }
                },
            }
        }
        let tol = 1e-9;
        let ok = match op {
            "<=" => total <= rhs + tol,
            ">=" => total >= rhs - tol,
            _ => (total - rhs).abs() <= tol,
        };
        assert!(ok, "row {line:?} evaluates to {total}");
        checked += 1;
    }
    assert!(checked > 12);

    // edge indicators fixed to zero agree with the optimum
    for line in lp.split("Bounds\n").nth(1).unwrap().lines() {
        if let Some(var) = line.trim().strip_suffix(" = 0") {
            assert_eq!(value[var], 0.0);
        }
    }
    let sse: f64 = (1..=12).map(|t| value[&format!("r_{t}")].powi(2)).sum();
    assert!((sse + lambda - fit.objective).abs() < 1e-9);
}
