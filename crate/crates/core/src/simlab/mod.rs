//! Monte Carlo laboratory: data-generating processes, detection metrics and
//! the replication runner.

pub mod dgp;
pub mod metrics;
pub mod runner;

pub use dgp::{generate, DgpFamily, DgpParams, DgpSpec};
pub use metrics::{hausdorff, percent_correct};
pub use runner::{
    applies, cells, detect, run_cell, run_table, run_table_to, Cell, Method, ReplicationReport, SimConfig,
    TableDesign,
};
