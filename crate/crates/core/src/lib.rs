//! Exact detection of structural breaks in linear regressions.
//!
//! Breaks are found by minimising the least-squares fit plus a penalty of
//! `lambda` per break. Two exact solvers are provided: a dynamic program
//! ([`solve_l0`]) and a branch-and-bound search over the big-M mixed-integer
//! formulation ([`solve_miqp`]). They certify each other.
//!
//! Break indices are 0-based regime starts: a break `b` means observation
//! `b` is the first of a new regime, so regimes are half-open `[b_j, b_{j+1})`.

pub mod dp;
pub mod error;
pub mod inference;
mod linalg;
pub mod miqp;
pub mod model;
pub mod segcost;
pub mod simlab;
pub mod tuning;

pub use dp::{brute_force, fixed_m_profile, objective_in_solver_order, solve_fixed_m, solve_l0, BRUTE_FORCE_MAX_LEN};
pub use error::{Error, Result};
pub use inference::{default_hac_lags, infer, InferenceReport, Interval, RegimeEstimate};
pub use linalg::DenseMatrix;
pub use miqp::{audit_big_m, choose_big_m, export_lp, solve_miqp, solve_miqp_with, BnbNode, BnbOptions, BnbOutcome};
pub use model::{
    diagnostics, recompute_objective, BreakDiagnostics, Certificate, Dataset, PenaltyConfig, Segmentation,
    SolverResult, SolverStats,
};
pub use segcost::{CostTable, SegmentCost, SegmentCostEngine, WindowFit};
pub use tuning::{
    build_grid, lambda_max, select_by_classical_ic, select_by_ic, solve_path, tune, ClassicalCriterion, LambdaPath,
    LwzConstants, PathRow,
};
