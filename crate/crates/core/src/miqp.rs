//! Branch-and-bound for the big-M mixed-integer formulation.
//!
//! The binaries `z_t` are fixed in time order. A node has decided every
//! `z` before `position`; its regimes that are already closed are priced
//! exactly by the segment cost engine, and the open regime `[open_start,
//! position)` is priced by the SSE of its decided part, which can only grow
//! as the regime is extended. The undecided suffix contributes zero. That
//! bound never exceeds the value of any completion.
//!
//! Two nodes that agree on `(position, open_start)` (and on the break
//! count when it is fixed) have identical completion sets, so only the one
//! with the smaller committed value is kept.
//!
//! Coefficients are the unconstrained regime least-squares fits; the big-M
//! coupling is audited afterwards, and a realised jump near `M` is reported
//! as [`Error::BigMTooSmall`] because the constraint may then have changed
//! the optimum.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;
use std::time::Instant;

use crate::dp::{assemble, objective_in_solver_order, solve_fixed_m, solve_l0};
use crate::error::{Error, Result};
use crate::model::{Certificate, Dataset, PenaltyConfig, SolverResult, SolverStats};
use crate::segcost::{SegmentCost, SegmentCostEngine};

pub const DEFAULT_NODE_BUDGET: u64 = 5_000_000;

/// Optimality gap below which the search counts as proved optimal.
pub const GAP_TOLERANCE: f64 = 1e-7;

/// Fraction of `M` a realised jump may reach before the audit fails.
pub const BIG_M_AUDIT_RATIO: f64 = 0.99;

pub const DEFAULT_BIG_M_SAFETY: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BnbOptions {
    pub node_budget: u64,
    /// Seed the incumbent with the dynamic-programming optimum.
    pub warm_start: bool,
    /// Record every explored node (for testing bound admissibility).
    pub trace: bool,
}

impl Default for BnbOptions {
    fn default() -> Self {
        Self {
            node_budget: DEFAULT_NODE_BUDGET,
            warm_start: true,
            trace: false,
        }
    }
}

impl BnbOptions {
    pub fn cold() -> Self {
        Self {
            warm_start: false,
            ..Self::default()
        }
    }
}

/// A search node: `z_1..z_{position-1}` are decided.
#[derive(Debug, Clone, PartialEq)]
pub struct BnbNode {
    /// Breaks among the decided positions (0-based regime starts).
    pub breaks: Vec<usize>,
    /// First undecided break position.
    pub position: usize,
    pub open_start: usize,
    /// Objective of the closed regimes, penalties included.
    pub committed: f64,
    pub bound: f64,
    /// True when no further break is possible and `bound` is the exact value.
    pub leaf: bool,
}

#[derive(Debug, Clone)]
pub struct BnbOutcome {
    pub result: SolverResult,
    pub explored: Vec<BnbNode>,
}

#[derive(Debug, Clone, Copy)]
struct Node {
    position: usize,
    open_start: usize,
    breaks: u32,
    committed: f64,
    bound: f64,
    path: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Queued {
    bound: f64,
    id: u32,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: smallest bound first, then oldest node
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Break lists stored as parent-linked records; id 0 is the empty list.
struct PathArena {
    links: Vec<(u32, u32)>,
}

impl PathArena {
    fn new() -> Self {
        Self { links: vec![(0, 0)] }
    }

    fn push(&mut self, parent: u32, brk: usize) -> u32 {
        self.links.push((parent, brk as u32));
        (self.links.len() - 1) as u32
    }

    fn breaks(&self, mut id: u32) -> Vec<usize> {
        let mut out = Vec::new();
        while id != 0 {
            let (parent, brk) = self.links[id as usize];
            out.push(brk as usize);
            id = parent;
        }
        out.reverse();
        out
    }
}

struct Incumbent {
    value: f64,
    breaks: Vec<usize>,
}

impl Incumbent {
    fn improves(&self, value: f64, breaks: &[usize]) -> bool {
        match value.partial_cmp(&self.value) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => (breaks.len(), breaks) < (self.breaks.len(), &self.breaks[..]),
            _ => false,
        }
    }
}

struct Search<'c, C: SegmentCost + ?Sized> {
    costs: &'c C,
    n: usize,
    lambda: f64,
    min_gap: usize,
    fixed_m: Option<usize>,
    nodes: Vec<Node>,
    heap: BinaryHeap<Queued>,
    best_label: HashMap<(usize, usize, u32), u32>,
    paths: PathArena,
    incumbent: Option<Incumbent>,
    explored: u64,
    trace: Option<Vec<BnbNode>>,
}

impl<C: SegmentCost + ?Sized> Search<'_, C> {
    /// Objective of every completion that adds no further break.
    fn closing_value(&self, open_start: usize, committed: f64, end: usize) -> f64 {
        let c = self.costs.sse(open_start, end);
        if open_start == 0 {
            c
        } else {
            committed + c + self.lambda
        }
    }

    fn prune_tolerance(&self) -> f64 {
        self.incumbent
            .as_ref()
            .map_or(f64::INFINITY, |inc| inc.value + 1e-12 * (1.0 + inc.value.abs()))
    }

    /// Most breaks still placeable from `position` onwards.
    fn remaining_capacity(&self, position: usize) -> usize {
        if position + self.min_gap > self.n {
            0
        } else {
            (self.n - self.min_gap - position) / self.min_gap + 1
        }
    }

    fn record(&mut self, node: &Node, leaf: bool) {
        if let Some(trace) = self.trace.as_mut() {
            trace.push(BnbNode {
                breaks: self.paths.breaks(node.path),
                position: node.position,
                open_start: node.open_start,
                committed: node.committed,
                bound: node.bound,
                leaf,
            });
        }
    }

    /// Evaluates a freshly created node: leaves update the incumbent,
    /// interior nodes are queued unless pruned or dominated.
    fn consider(&mut self, position: usize, open_start: usize, breaks: u32, committed: f64, path: u32) {
        if let Some(m) = self.fixed_m {
            if breaks as usize > m || breaks as usize + self.remaining_capacity(position) < m {
                return;
            }
        }
        if position + self.min_gap > self.n {
            let value = self.closing_value(open_start, committed, self.n);
            let node = Node {
                position,
                open_start,
                breaks,
                committed,
                bound: value,
                path,
            };
            self.explored += 1;
            self.record(&node, true);
            if self.fixed_m.is_some_and(|m| m != breaks as usize) {
                return;
            }
            let list = self.paths.breaks(path);
            let better = self.incumbent.as_ref().is_none_or(|inc| inc.improves(value, &list));
            if better {
                self.incumbent = Some(Incumbent { value, breaks: list });
            }
            return;
        }

        let bound = self.closing_value(open_start, committed, position);
        if bound > self.prune_tolerance() {
            return;
        }
        let key_breaks = if self.fixed_m.is_some() { breaks } else { 0 };
        let key = (position, open_start, key_breaks);
        if let Some(&other) = self.best_label.get(&key) {
            let o = self.nodes[other as usize];
            let keep_other = match o.committed.partial_cmp(&committed) {
                Some(Ordering::Less) => true,
                Some(Ordering::Equal) => {
                    (o.breaks, self.paths.breaks(o.path)) <= (breaks, self.paths.breaks(path))
                }
                _ => false,
            };
            if keep_other {
                return;
            }
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(Node {
            position,
            open_start,
            breaks,
            committed,
            bound,
            path,
        });
        self.best_label.insert(key, id);
        self.heap.push(Queued { bound, id });
    }

    fn expand(&mut self, id: u32) {
        let node = self.nodes[id as usize];
        self.explored += 1;
        self.record(&node, false);

        // z = 1: a new regime starts at `position`
        let closed = self.closing_value(node.open_start, node.committed, node.position);
        let child_path = self.paths.push(node.path, node.position);
        self.consider(
            node.position + self.min_gap,
            node.position,
            node.breaks + 1,
            closed,
            child_path,
        );
        // z = 0
        self.consider(node.position + 1, node.open_start, node.breaks, node.committed, node.path);
    }
}

/// Solves the l0 problem by branch-and-bound with default options.
pub fn solve_miqp<C: SegmentCost + ?Sized>(costs: &C, cfg: &PenaltyConfig) -> Result<SolverResult> {
    solve_miqp_with(costs, cfg, &BnbOptions::default()).map(|o| o.result)
}

pub fn solve_miqp_with<C: SegmentCost + ?Sized>(
    costs: &C,
    cfg: &PenaltyConfig,
    opts: &BnbOptions,
) -> Result<BnbOutcome> {
    let n = costs.len();
    cfg.validate(n)?;
    let started = Instant::now();

    let mut search = Search {
        costs,
        n,
        lambda: cfg.lambda,
        min_gap: cfg.min_gap,
        fixed_m: cfg.fixed_m,
        nodes: Vec::new(),
        heap: BinaryHeap::new(),
        best_label: HashMap::new(),
        paths: PathArena::new(),
        incumbent: None,
        explored: 0,
        trace: opts.trace.then(Vec::new),
    };

    if opts.warm_start {
        let warm = match cfg.fixed_m {
            None => solve_l0(costs, cfg.lambda, cfg.min_gap)?,
            Some(m) => solve_fixed_m(costs, m, cfg.min_gap)?,
        };
        let breaks = warm.segmentation.breaks().to_vec();
        search.incumbent = Some(Incumbent {
            value: objective_in_solver_order(costs, &breaks, cfg.lambda),
            breaks,
        });
    } else if cfg.fixed_m.unwrap_or(0) == 0 {
        search.incumbent = Some(Incumbent {
            value: costs.sse(0, n),
            breaks: Vec::new(),
        });
    }

    search.consider(cfg.min_gap, 0, 0, 0.0, 0);

    let mut gap = 0.0;
    while let Some(Queued { bound, id }) = search.heap.pop() {
        let node = search.nodes[id as usize];
        let key_breaks = if cfg.fixed_m.is_some() { node.breaks } else { 0 };
        if search.best_label.get(&(node.position, node.open_start, key_breaks)) != Some(&id) {
            continue; // dominated after it was queued
        }
        if bound > search.prune_tolerance() {
            continue;
        }
        if search.explored >= opts.node_budget {
            let inc = search.incumbent.as_ref().map_or(f64::INFINITY, |i| i.value);
            gap = (inc - bound).max(0.0);
            break;
        }
        search.expand(id);
    }

    let incumbent = search.incumbent.take().ok_or_else(|| {
        Error::Infeasible("no segmentation satisfies the break-count restriction".into())
    })?;
    let certificate = if gap <= GAP_TOLERANCE {
        Certificate::ProvedOptimal
    } else {
        Certificate::IncumbentOnly { gap }
    };
    let stats = SolverStats {
        nodes_explored: search.explored,
        dp_cells: 0,
        wall_time: started.elapsed(),
    };
    let result = assemble(costs, incumbent.breaks, incumbent.value, cfg.lambda, certificate, stats)?;
    audit_big_m(&result, cfg.big_m)?;
    Ok(BnbOutcome {
        result,
        explored: search.trace.unwrap_or_default(),
    })
}

/// Fails when a realised coefficient jump reaches 99% of `M` in any coordinate.
pub fn audit_big_m(result: &SolverResult, big_m: f64) -> Result<()> {
    let seg = &result.segmentation;
    for (j, pair) in seg.coeffs().windows(2).enumerate() {
        let jump = pair[0]
            .iter()
            .zip(&pair[1])
            .map(|(a, b)| (b - a).abs())
            .fold(0.0, f64::max);
        if jump > BIG_M_AUDIT_RATIO * big_m {
            return Err(Error::BigMTooSmall {
                break_index: seg.breaks()[j],
                jump,
                big_m,
                ratio: 100.0 * jump / big_m,
            });
        }
    }
    Ok(())
}

/// Heuristic big-M: `safety` times the largest least-squares coefficient
/// (sup norm) over a sweep of windows, with a floor of 1.
///
/// The sweep covers every window of the shortest lengths (where coefficients
/// are most volatile) and dyadic lengths at half-overlapping strides.
pub fn choose_big_m(data: &Dataset, safety: f64) -> f64 {
    let engine = SegmentCostEngine::new(data);
    let n = data.len();
    let base = data.dim().max(2).min(n);
    let mut lengths: Vec<(usize, usize)> = (base..(base + 4).min(n + 1)).map(|l| (l, 1)).collect();
    let mut len = base * 2;
    while len <= n {
        lengths.push((len, (len / 2).max(1)));
        len *= 2;
    }
    lengths.push((n, 1));

    let mut largest: f64 = 0.0;
    for (len, stride) in lengths {
        let mut start = 0;
        while start + len <= n {
            if let Ok(c) = engine.coeffs(start, start + len) {
                largest = c.iter().fold(largest, |acc, v| acc.max(v.abs()));
            }
            start += stride;
        }
    }
    safety * largest.max(1.0)
}

fn push_term(out: &mut String, coef: f64, var: &str, first: bool) {
    if coef < 0.0 {
        let _ = write!(out, " - {} {var}", -coef);
    } else if first {
        let _ = write!(out, " {coef} {var}");
    } else {
        let _ = write!(out, " + {coef} {var}");
    }
}

/// Writes the instance in CPLEX LP format so an external MIQP solver can
/// check a solution. Variables (all indices 1-based):
///
/// * `b_t_k` – coefficient `k` at time `t` (free)
/// * `r_t`   – residual `y_t - b_t' x_t` (free)
/// * `z_t`   – break indicator between `t` and `t + 1` (binary)
///
/// Rows: `fit_t` defines residuals, `up_t_k`/`dn_t_k` are the big-M
/// couplings, `gap_t` bounds the breaks in each window of `min_gap`
/// consecutive indicators, and `count` fixes the break total when requested.
/// Indicators that would create a regime shorter than `min_gap` at either
/// end are fixed to zero in the `Bounds` section.
pub fn export_lp(data: &Dataset, cfg: &PenaltyConfig) -> Result<String> {
    let (n, p) = (data.len(), data.dim());
    cfg.validate(n)?;
    let mut out = String::new();
    let _ = writeln!(out, "\\ l0-penalised break detection, big-M formulation");
    let _ = writeln!(
        out,
        "\\ n = {n}, p = {p}, lambda = {}, M = {}, min_gap = {}",
        cfg.lambda, cfg.big_m, cfg.min_gap
    );
    out.push_str("Minimize\n obj:");
    for t in 1..n {
        push_term(&mut out, cfg.lambda, &format!("z_{t}"), t == 1);
    }
    out.push_str(" + [");
    for t in 1..=n {
        if t > 1 {
            out.push_str(" +");
        }
        let _ = write!(out, " 2 r_{t} ^ 2");
    }
    out.push_str(" ] / 2\nSubject To\n");

    for t in 1..=n {
        let _ = write!(out, " fit_{t}: r_{t}");
        for (k, x) in data.row(t - 1).iter().enumerate() {
            push_term(&mut out, *x, &format!("b_{t}_{}", k + 1), false);
        }
        let _ = writeln!(out, " = {}", data.y()[t - 1]);
    }
    for t in 1..n {
        for k in 1..=p {
            let _ = writeln!(out, " up_{t}_{k}: b_{}_{k} - b_{t}_{k} - {} z_{t} <= 0", t + 1, cfg.big_m);
            let _ = writeln!(out, " dn_{t}_{k}: b_{}_{k} - b_{t}_{k} + {} z_{t} >= 0", t + 1, cfg.big_m);
        }
    }
    let w = cfg.min_gap;
    if n > w {
        for t in 1..=(n - w) {
            let terms: Vec<String> = (t..t + w).map(|i| format!("z_{i}")).collect();
            let _ = writeln!(out, " gap_{t}: {} <= 1", terms.join(" + "));
        }
    }
    if let Some(m) = cfg.fixed_m {
        let terms: Vec<String> = (1..n).map(|i| format!("z_{i}")).collect();
        let _ = writeln!(out, " count: {} = {m}", terms.join(" + "));
    }

    out.push_str("Bounds\n");
    for t in 1..=n {
        for k in 1..=p {
            let _ = writeln!(out, " b_{t}_{k} free");
        }
        let _ = writeln!(out, " r_{t} free");
    }
    for t in 1..n {
        // z_t = 1 starts a regime at t + 1: first regime has t points, last n - t
        if t < w || n - t < w {
            let _ = writeln!(out, " z_{t} = 0");
        }
    }
    out.push_str("Binaries\n");
    for t in 1..n {
        let _ = writeln!(out, " z_{t}");
    }
    out.push_str("End\n");
    Ok(out)
}
