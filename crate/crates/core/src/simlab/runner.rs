//! Replication runner for the simulation tables.
//!
//! Replication `r` of every cell uses seed `seed + r` (wrapping), so a
//! report depends only on `(cell, method, n_reps, seed)` and not on thread
//! scheduling.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dgp::{generate, DgpFamily, DgpParams, DgpSpec};
use super::metrics::{hausdorff, percent_correct};
use crate::error::{Error, Result};
use crate::miqp::{choose_big_m, solve_miqp, DEFAULT_BIG_M_SAFETY};
use crate::model::{Dataset, PenaltyConfig};
use crate::segcost::{CostTable, SegmentCostEngine};
use crate::tuning::{
    build_grid, information_criterion, select_by_classical_ic_with, select_by_ic, tune, ClassicalCriterion,
    LambdaPath, LwzConstants, DEFAULT_GRID_SIZE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    /// Penalised fit by dynamic programming, λ chosen by the path criterion.
    MioDp,
    /// Same selection with every path point solved by branch-and-bound.
    MioBnb,
    Bic,
    Lwz,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::MioDp, Method::MioBnb, Method::Bic, Method::Lwz];

    pub fn name(self) -> &'static str {
        match self {
            Method::MioDp => "MIO_DP",
            Method::MioBnb => "MIO_BNB",
            Method::Bic => "BIC",
            Method::Lwz => "LWZ",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().replace('-', "_");
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(&key))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?} (expected MIO_DP, MIO_BNB, BIC or LWZ)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TableDesign {
    /// No true break.
    T1,
    /// One break at mid-sample.
    T2,
    /// Many alternating breaks.
    T3,
}

impl FromStr for TableDesign {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().trim_start_matches('T') {
            "1" => Ok(TableDesign::T1),
            "2" => Ok(TableDesign::T2),
            "3" => Ok(TableDesign::T3),
            _ => Err(Error::InvalidConfig(format!("unknown table {s:?} (expected 1, 2 or 3)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub min_gap: usize,
    pub grid_size: usize,
    /// Largest break count considered by BIC and LWZ.
    pub m_max: usize,
    /// BIC and LWZ minimum regime length as a fraction of T.
    pub trim: f64,
    pub lwz: LwzConstants,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            min_gap: 2,
            grid_size: DEFAULT_GRID_SIZE,
            m_max: 5,
            trim: 0.15,
            lwz: LwzConstants::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub family: DgpFamily,
    pub params: DgpParams,
    pub param_label: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationReport {
    pub dgp: String,
    pub param: String,
    pub t: usize,
    pub method: Method,
    /// Percentage of replications with the true break count.
    pub pce: f64,
    /// Mean Hausdorff distance (percent of T) over correct-count replications.
    pub hd_scaled: Option<f64>,
    pub n_reps: usize,
    pub n_correct: usize,
    /// Replications whose solve returned an error (counted as incorrect).
    pub n_failed: usize,
    pub seed: u64,
}

impl ReplicationReport {
    pub const CSV_HEADER: &'static str = "dgp,param,T,method,pce,hd_scaled,n_reps,seed";

    pub fn csv_row(&self) -> String {
        let hd = self.hd_scaled.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{}",
            self.dgp, self.param, self.t, self.method, self.pce, hd, self.n_reps, self.seed
        )
    }
}

/// Every cell of a table design.
pub fn cells(design: TableDesign) -> Vec<Cell> {
    use DgpFamily::*;
    let sizes = [100, 200, 500];
    let sigmas = [0.5, 1.0, 1.5];
    let mut out = Vec::new();
    let mut sweep = |family: DgpFamily, label: &str, values: &[f64], set: fn(&mut DgpParams, f64)| {
        for &v in values {
            for &t in &sizes {
                let mut params = DgpParams::new(t);
                set(&mut params, v);
                out.push(Cell {
                    family,
                    params,
                    param_label: format!("{label}={v}"),
                });
            }
        }
    };
    match design {
        TableDesign::T1 => {
            for f in [NoBreak1, NoBreak2, NoBreak3, NoBreak4] {
                sweep(f, "sigma_u", &sigmas, |p, v| p.sigma_u = v);
            }
            sweep(NoBreak5, "sigma_2", &[0.2, 0.3, 0.5], |p, v| p.sigma_2 = v);
            sweep(NoBreak6, "alpha", &[0.2, 0.5, 0.9], |p, v| p.alpha = v);
        }
        TableDesign::T2 => {
            for f in [OneBreak1, OneBreak2, OneBreak3, OneBreak4, OneBreak5, OneBreak6] {
                sweep(f, "sigma_u", &sigmas, |p, v| p.sigma_u = v);
            }
        }
        TableDesign::T3 => {
            for sigma in [0.2, 0.5] {
                for regimes in [6, 10, 20] {
                    out.push(Cell {
                        family: ManyBreaks1,
                        params: DgpParams::many(sigma, 30, regimes),
                        param_label: format!("sigma_u={sigma};R={regimes}"),
                    });
                }
            }
            for sigma in [0.2, 0.5] {
                for t in [150, 300, 600] {
                    out.push(Cell {
                        family: ManyBreaks2,
                        params: DgpParams::many(sigma, t / 10, 10),
                        param_label: format!("sigma_u={sigma};R=10"),
                    });
                }
            }
        }
    }
    out
}

/// Estimated break set for one series.
pub fn detect(method: Method, data: &Dataset, cfg: &SimConfig) -> Result<Vec<usize>> {
    let engine = SegmentCostEngine::new(data);
    let fit = match method {
        Method::MioDp => tune(&engine, data, cfg.grid_size, cfg.min_gap)?.0,
        Method::MioBnb => {
            let table = CostTable::build(&engine, cfg.min_gap);
            let grid = build_grid(&table, cfg.grid_size, cfg.min_gap)?;
            let big_m = choose_big_m(data, DEFAULT_BIG_M_SAFETY);
            let fits = grid
                .par_iter()
                .map(|&lambda| solve_miqp(&table, &PenaltyConfig::new(lambda, big_m).with_min_gap(cfg.min_gap)))
                .collect::<Result<Vec<_>>>()?;
            let ic = fits
                .iter()
                .map(|f| information_criterion(f.sse, data.len(), data.dim(), f.num_breaks()))
                .collect();
            select_by_ic(&LambdaPath { grid, fits, ic }, data)?
        }
        Method::Bic | Method::Lwz => {
            let n = data.len();
            let min_gap = cfg.min_gap.max((cfg.trim * n as f64).floor() as usize);
            let m_max = cfg.m_max.min(PenaltyConfig::max_breaks(n, min_gap));
            let criterion = if method == Method::Bic {
                ClassicalCriterion::Bic
            } else {
                ClassicalCriterion::Lwz
            };
            select_by_classical_ic_with(&engine, criterion, m_max, min_gap, &cfg.lwz)?
        }
    };
    Ok(fit.segmentation.breaks().to_vec())
}

/// Outcome of one replication: `None` when the solve failed, otherwise
/// whether the count was right and the distance when it was.
fn replicate(cell: &Cell, method: Method, seed: u64, cfg: &SimConfig) -> Option<(bool, Option<f64>)> {
    let (data, truth) = generate(&DgpSpec::new(cell.family, cell.params, seed)).ok()?;
    let found = detect(method, &data, cfg).ok()?;
    let correct = found.len() == truth.num_breaks();
    let hd = if correct {
        hausdorff(&found, truth.breaks(), data.len())
    } else {
        None
    };
    Some((correct, hd))
}

pub fn run_cell(cell: &Cell, method: Method, n_reps: usize, seed: u64, cfg: &SimConfig) -> Result<ReplicationReport> {
    if n_reps == 0 {
        return Err(Error::InvalidConfig("at least one replication is required".into()));
    }
    let outcomes: Vec<_> = (0..n_reps)
        .into_par_iter()
        .map(|r| replicate(cell, method, seed.wrapping_add(r as u64), cfg))
        .collect();
    let hits: Vec<bool> = outcomes.iter().map(|o| o.is_some_and(|(c, _)| c)).collect();
    let distances: Vec<f64> = outcomes.iter().filter_map(|o| o.and_then(|(_, hd)| hd)).collect();
    let hd_scaled = (!distances.is_empty()).then(|| distances.iter().sum::<f64>() / distances.len() as f64);
    Ok(ReplicationReport {
        dgp: cell.family.to_string(),
        param: cell.param_label.clone(),
        t: cell.params.t,
        method,
        pce: percent_correct(&hits),
        hd_scaled,
        n_reps,
        n_correct: hits.iter().filter(|&&h| h).count(),
        n_failed: outcomes.iter().filter(|o| o.is_none()).count(),
        seed,
    })
}

/// Whether a method is reported for a design. The classical criteria are
/// skipped on the many-break table, where their trimming cannot fit the
/// true number of regimes.
pub fn applies(design: TableDesign, method: Method) -> bool {
    !(design == TableDesign::T3 && matches!(method, Method::Bic | Method::Lwz))
}

pub fn run_table(design: TableDesign, methods: &[Method], n_reps: usize, seed: u64) -> Result<Vec<ReplicationReport>> {
    run_table_to(design, methods, n_reps, seed, &SimConfig::default(), None)
}

/// Runs every cell and method, writing one CSV row per finished report
/// (after a header) to `sink` when given.
pub fn run_table_to(
    design: TableDesign,
    methods: &[Method],
    n_reps: usize,
    seed: u64,
    cfg: &SimConfig,
    mut sink: Option<&mut dyn Write>,
) -> Result<Vec<ReplicationReport>> {
    if n_reps == 0 {
        return Err(Error::InvalidConfig("at least one replication is required".into()));
    }
    let io = |e: std::io::Error| Error::InvalidData(format!("writing table: {e}"));
    if let Some(w) = sink.as_mut() {
        writeln!(w, "{}", ReplicationReport::CSV_HEADER).map_err(io)?;
    }
    let mut out = Vec::new();
    for cell in cells(design) {
        for &method in methods.iter().filter(|&&m| applies(design, m)) {
            let report = run_cell(&cell, method, n_reps, seed, cfg)?;
            if let Some(w) = sink.as_mut() {
                writeln!(w, "{}", report.csv_row()).map_err(io)?;
                w.flush().map_err(io)?;
            }
            out.push(report);
        }
    }
    Ok(out)
}
