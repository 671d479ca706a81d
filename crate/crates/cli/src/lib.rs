//! Command-line front end: break detection on CSV data and simulation tables.

pub mod error;
pub mod input;
pub mod report;

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use l0break_core::simlab::{run_table_to, Method, SimConfig, TableDesign};
use l0break_core::{
    choose_big_m, default_hac_lags, export_lp, infer, recompute_objective, solve_fixed_m, solve_l0, solve_miqp, tune,
    Dataset, PenaltyConfig, SegmentCostEngine, SolverResult,
};

pub use error::CliError;
use report::{BreakEntry, CoefficientEntry, DetectReport, InputInfo, RegimeEntry, SCHEMA_VERSION};

#[derive(Debug, Parser)]
#[command(name = "l0break", version, about = "Exact l0-penalised structural break detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Detect breaks in a CSV time series.
    Detect(DetectArgs),
    /// Run a simulation table and stream it as CSV.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverKind {
    Dp,
    Bnb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Input CSV with a header row.
    pub input: PathBuf,
    /// Response column.
    #[arg(long)]
    pub y: String,
    /// Comma-separated regressor columns (a constant is added unless --no-const).
    #[arg(long, value_delimiter = ',')]
    pub x: Vec<String>,
    /// Omit the constant regressor.
    #[arg(long)]
    pub no_const: bool,
    /// Add the lagged response as a regressor (drops the first row).
    #[arg(long)]
    pub lag_y: bool,
    /// Fixed penalty per break.
    #[arg(long, conflicts_with = "auto")]
    pub lambda: Option<f64>,
    /// Choose the penalty by the path information criterion (default).
    #[arg(long)]
    pub auto: bool,
    /// Number of penalty values on the automatic path.
    #[arg(long, default_value_t = l0break_core::tuning::DEFAULT_GRID_SIZE)]
    pub grid_size: usize,
    /// Minimum number of observations per regime.
    #[arg(long, default_value_t = 2)]
    pub min_gap: usize,
    #[arg(long, value_enum, default_value_t = SolverKind::Dp)]
    pub solver: SolverKind,
    /// Big-M bound for the branch-and-bound solver (default: data-driven).
    #[arg(long)]
    pub big_m: Option<f64>,
    /// Require exactly this many breaks.
    #[arg(long)]
    pub fixed_m: Option<usize>,
    /// Bartlett bandwidth for standard errors (default floor(4 (T/100)^(2/9))).
    #[arg(long)]
    pub hac_lags: Option<usize>,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Recorded in the report; detection itself is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the mixed-integer program in CPLEX LP format.
    #[arg(long)]
    pub export_lp: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Table design: 1 (no break), 2 (one break) or 3 (many breaks).
    #[arg(long)]
    pub table: String,
    #[arg(long, default_value_t = 200)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated methods: MIO_DP, MIO_BNB, BIC, LWZ.
    #[arg(long, value_delimiter = ',', default_value = "MIO_DP,BIC,LWZ")]
    pub methods: Vec<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Detect(args) => cmd_detect(&args),
        Command::Simulate(args) => cmd_simulate(&args),
    }
}

fn writer(out: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match out {
        Some(p) => Box::new(std::io::BufWriter::new(std::fs::File::create(p)?)),
        None => Box::new(std::io::stdout().lock()),
    })
}

/// Design matrix and metadata from the CLI flags.
fn build_dataset(args: &DetectArgs, table: &input::Table) -> Result<(Dataset, Vec<String>, usize), CliError> {
    let y_all = table.column(&args.y)?;
    let offset = usize::from(args.lag_y);
    let mut names = Vec::new();
    let mut cols: Vec<Vec<f64>> = Vec::new();
    if !args.no_const {
        names.push("const".to_owned());
        cols.push(vec![1.0; table.rows - offset]);
    }
    for name in args.x.iter().filter(|n| !n.is_empty()) {
        names.push(name.clone());
        cols.push(table.column(name)?[offset..].to_vec());
    }
    if args.lag_y {
        names.push(format!("{}_lag1", args.y));
        cols.push(y_all[..table.rows - 1].to_vec());
    }
    if cols.is_empty() {
        return Err(CliError::Config("no regressors: drop --no-const or add --x or --lag-y".into()));
    }
    let n = table.rows - offset;
    if n < 2 {
        return Err(CliError::Csv(format!("need at least 2 usable rows, have {n}")));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|t| cols.iter().map(|c| c[t]).collect()).collect();
    let data = Dataset::from_rows(y_all[offset..].to_vec(), &rows)?;
    Ok((data, names, offset))
}

pub fn cmd_detect(args: &DetectArgs) -> Result<(), CliError> {
    let table = input::read_table(&args.input)?;
    let (data, names, offset) = build_dataset(args, &table)?;
    let n = data.len();
    let engine = SegmentCostEngine::new(&data);
    let lambda_arg = args.lambda.unwrap_or(0.0);
    let mut cfg = PenaltyConfig::new(lambda_arg, 1.0).with_min_gap(args.min_gap);
    if let Some(m) = args.fixed_m {
        cfg = cfg.with_fixed_m(m);
    }
    cfg.validate(n)?;
    let big_m = args.big_m.unwrap_or_else(|| choose_big_m(&data, l0break_core::miqp::DEFAULT_BIG_M_SAFETY));
    cfg.big_m = big_m;

    if let Some(path) = &args.export_lp {
        std::fs::write(path, export_lp(&data, &cfg)?)?;
    }

    let mut path_rows = None;
    let fit: SolverResult = match (args.fixed_m, args.lambda) {
        (Some(m), _) => match args.solver {
            SolverKind::Dp => {
                let mut r = solve_fixed_m(&engine, m, args.min_gap)?;
                r.objective = recompute_objective(&data, &r.segmentation, lambda_arg)?;
                r.lambda = lambda_arg;
                r
            }
            SolverKind::Bnb => solve_miqp(&engine, &cfg)?,
        },
        (None, Some(lambda)) => match args.solver {
            SolverKind::Dp => solve_l0(&engine, lambda, args.min_gap)?,
            SolverKind::Bnb => solve_miqp(&engine, &cfg)?,
        },
        (None, None) => {
            let (chosen, path) = tune(&engine, &data, args.grid_size, args.min_gap)?;
            path_rows = Some(path.rows());
            match args.solver {
                SolverKind::Dp => chosen,
                SolverKind::Bnb => solve_miqp(&engine, &PenaltyConfig { lambda: chosen.lambda, ..cfg.clone() })?,
            }
        }
    };

    let hac_lags = args.hac_lags.unwrap_or_else(|| default_hac_lags(n));
    let inference = infer(&data, &fit.segmentation, hac_lags);
    let inference_note = inference.as_ref().err().map(|e| format!("standard errors unavailable: {e}"));
    let row = |t: usize| t + offset + 1;
    let label = |t: usize| table.label(t + offset).map(str::to_owned);

    let breaks = fit
        .segmentation
        .breaks()
        .iter()
        .map(|&b| BreakEntry {
            index: row(b),
            label: label(b),
        })
        .collect();
    let regimes = fit
        .segmentation
        .regimes(n)
        .iter()
        .enumerate()
        .map(|(j, &(s, e))| RegimeEntry {
            start: row(s),
            end: row(e - 1),
            start_label: label(s),
            end_label: label(e - 1),
            coefficients: names
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    let est = inference.as_ref().ok().map(|r| &r.regimes[j]);
                    CoefficientEntry {
                        name: name.clone(),
                        estimate: fit.segmentation.coeffs()[j][k],
                        std_error: est.map(|r| r.std_errors[k]),
                        ci_lower: est.map(|r| r.ci[k].lower),
                        ci_upper: est.map(|r| r.ci[k].upper),
                    }
                })
                .collect(),
        })
        .collect();

    let report = DetectReport {
        schema: SCHEMA_VERSION,
        input: InputInfo {
            path: args.input.display().to_string(),
            y: args.y.clone(),
            regressors: names,
            lag_y: args.lag_y,
            n_obs: n,
            first_row: offset + 1,
        },
        solver: match args.solver {
            SolverKind::Dp => "dp".into(),
            SolverKind::Bnb => "bnb".into(),
        },
        certificate: fit.certificate,
        lambda: fit.lambda,
        min_gap: args.min_gap,
        fixed_m: args.fixed_m,
        objective: fit.objective,
        sse: fit.sse,
        num_breaks: fit.num_breaks(),
        breaks,
        regimes,
        hac_lags: inference.is_ok().then_some(hac_lags),
        inference_note,
        path: path_rows,
        stats: fit.stats,
        seed: args.seed,
    };

    let mut w = writer(args.out.as_deref())?;
    match args.format {
        Format::Json => {
            serde_json::to_writer_pretty(&mut w, &report).map_err(|e| CliError::Io(e.into()))?;
            writeln!(w)?;
        }
        Format::Csv => {
            writeln!(w, "{}", DetectReport::CSV_HEADER)?;
            for line in report.csv_rows() {
                writeln!(w, "{line}")?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let design: TableDesign = args.table.parse().map_err(|e: l0break_core::Error| CliError::Config(e.to_string()))?;
    if args.reps == 0 {
        return Err(CliError::Config("--reps must be at least 1".into()));
    }
    let methods = args
        .methods
        .iter()
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let mut w = writer(args.out.as_deref())?;
    run_table_to(design, &methods, args.reps, args.seed, &SimConfig::default(), Some(&mut w))?;
    w.flush()?;
    Ok(())
}
