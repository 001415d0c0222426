//! Experiment harness: message accounting, penalty sweeps and head-to-head
//! comparisons between the distributed solvers.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::admm::{run_admm, run_admm_budget, AdmmConfig, AdmmEngine};
use crate::error::{Error, Result};
use crate::report::{relative_gap, IterationTrace, RunStatus, SolveReport};
use crate::subgradient::{SubgradConfig, SubgradEngine};
use crate::topology::{Topology, SINK};

/// Bundles sent node-to-neighbour, one per link direction per round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageLedger {
    pub per_round: Vec<u64>,
    pub total: u64,
    /// Bundles sent by each node over all rounds.
    pub per_node: Vec<u64>,
}

/// Ledger of `rounds` synchronous rounds on `topo`.
pub fn count_messages(topo: &Topology, rounds: usize) -> MessageLedger {
    let per_round = 2 * topo.edges().len() as u64;
    MessageLedger {
        per_round: vec![per_round; rounds],
        total: per_round * rounds as u64,
        per_node: (0..topo.node_count()).map(|i| topo.degree(i) as u64 * rounds as u64).collect(),
    }
}

impl MessageLedger {
    /// Rebuilds a ledger from the cumulative counters of a trace. Each
    /// round's increment is split over nodes by degree, which is how both
    /// engines send.
    pub fn from_trace(topo: &Topology, trace: &[IterationTrace]) -> Self {
        let mut per_round = Vec::with_capacity(trace.len());
        let mut prev = 0;
        for row in trace {
            per_round.push(row.messages_cum - prev);
            prev = row.messages_cum;
        }
        let links = 2 * topo.edges().len() as u64;
        let per_node = (0..topo.node_count())
            .map(|i| per_round.iter().map(|m| m * topo.degree(i) as u64 / links.max(1)).sum())
            .collect();
        Self {
            per_round,
            total: prev,
            per_node,
        }
    }
}

/// Floats carried by one bundle. ADMM sends `r_ij`, `A_ij`, `lambda_ij`,
/// `lambda_ji`, `phi_ij` and `q_i`; the subgradient baseline sends its two
/// multipliers and the rate toward the neighbour.
pub fn floats_per_bundle(algorithm: crate::report::Algorithm) -> usize {
    match algorithm {
        crate::report::Algorithm::Admm => 6,
        crate::report::Algorithm::Subgrad => 3,
        crate::report::Algorithm::Lp => 0,
    }
}

/// Relative infeasibility of `(q, r)` against the lifetime LP: the largest
/// flow imbalance over total generation, or the largest energy overdraw
/// over the node's budget `q e_i`, whichever is worse.
pub fn lp_violation(topo: &Topology, q: f64, rates: &[Vec<f64>]) -> f64 {
    let n = topo.node_count();
    let mut flow = vec![0.0; n];
    let mut worst_energy: f64 = 0.0;
    for i in 0..n {
        let mut drain = 0.0;
        for (nb, &r) in topo.neighbors(i).iter().zip(&rates[i]) {
            flow[i] += r;
            flow[nb.id] -= r;
            drain += nb.cost * r;
        }
        flow[i] -= topo.node(i).gen_rate;
        if i != SINK {
            let budget = q * topo.node(i).energy;
            let over = drain - budget;
            if over > 0.0 {
                worst_energy = worst_energy.max(if budget > 0.0 { over / budget } else { f64::INFINITY });
            }
        }
    }
    let scale = topo.total_generation();
    let worst_flow = flow.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
    let flow_rel = if scale > 0.0 { worst_flow / scale } else { worst_flow };
    flow_rel.max(worst_energy)
}

/// Outcome of one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Finished {
        gap: f64,
        primal_norm: f64,
        dual_norm: f64,
        iterations: usize,
    },
    Diverged {
        iteration: usize,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub rho: f64,
    pub outcome: CellOutcome,
    /// Min-max normalized `(gap, primal, dual)` over the finished cells.
    pub normalized: Option<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub budget: usize,
    pub q_star: f64,
    pub cells: Vec<SweepCell>,
    /// Index of the finished cell with the smallest gap (first on ties).
    pub best: Option<usize>,
}

impl SweepResult {
    pub fn best_rho(&self) -> Option<f64> {
        self.best.map(|b| self.cells[b].rho)
    }

    /// Whether the best cell is neither the first nor the last grid point.
    pub fn best_is_interior(&self) -> bool {
        matches!(self.best, Some(b) if b > 0 && b + 1 < self.cells.len())
    }
}

fn sweep_cell(topo: &Topology, base: &AdmmConfig, rho: f64, budget: usize, q_star: f64) -> Result<SweepCell> {
    let config = AdmmConfig {
        rho,
        max_iter: budget,
        ..*base
    };
    config.validate()?;
    let outcome = match run_admm_budget(topo, &config) {
        Ok(run) => CellOutcome::Finished {
            gap: relative_gap(run.report.q, q_star),
            primal_norm: run.report.residuals.primal_norm,
            dual_norm: run.report.residuals.dual_norm,
            iterations: run.report.iterations,
        },
        Err(Error::NumericalDivergence { iteration, detail }) => CellOutcome::Diverged { iteration, detail },
        Err(e) => return Err(e),
    };
    Ok(SweepCell {
        rho,
        outcome,
        normalized: None,
    })
}

fn check_grid(grid: &[f64], budget: usize) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidParam("penalty grid is empty".into()));
    }
    if budget == 0 {
        return Err(Error::InvalidParam("iteration budget must be at least 1".into()));
    }
    Ok(())
}

fn finish_sweep(cells: Vec<SweepCell>, budget: usize, q_star: f64) -> SweepResult {
    let mut cells = cells;
    let metrics: Vec<Option<[f64; 3]>> = cells
        .iter()
        .map(|c| match c.outcome {
            CellOutcome::Finished {
                gap,
                primal_norm,
                dual_norm,
                ..
            } => Some([gap, primal_norm, dual_norm]),
            CellOutcome::Diverged { .. } => None,
        })
        .collect();
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for m in metrics.iter().flatten() {
        for k in 0..3 {
            lo[k] = lo[k].min(m[k]);
            hi[k] = hi[k].max(m[k]);
        }
    }
    for (cell, m) in cells.iter_mut().zip(&metrics) {
        cell.normalized = m.map(|m| {
            let mut out = [0.0; 3];
            for k in 0..3 {
                let span = hi[k] - lo[k];
                out[k] = if span > 0.0 { (m[k] - lo[k]) / span } else { 0.0 };
            }
            out
        });
    }
    let mut best: Option<usize> = None;
    for (i, m) in metrics.iter().enumerate() {
        if let Some(m) = m {
            if best.is_none_or(|b| m[0] < metrics[b].unwrap()[0]) {
                best = Some(i);
            }
        }
    }
    SweepResult {
        budget,
        q_star,
        cells,
        best,
    }
}

/// Runs ADMM for exactly `budget` rounds at every grid value. Diverging
/// cells are recorded, not propagated.
pub fn rho_sweep(topo: &Topology, grid: &[f64], budget: usize, base: &AdmmConfig, q_star: f64) -> Result<SweepResult> {
    check_grid(grid, budget)?;
    let cells = grid
        .iter()
        .map(|&rho| sweep_cell(topo, base, rho, budget, q_star))
        .collect::<Result<Vec<_>>>()?;
    Ok(finish_sweep(cells, budget, q_star))
}

/// [`rho_sweep`] over at most `jobs` worker threads. Results are merged in
/// grid order and are identical to the sequential sweep.
pub fn rho_sweep_parallel(topo: &Topology, grid: &[f64], budget: usize, base: &AdmmConfig, q_star: f64, jobs: usize) -> Result<SweepResult> {
    check_grid(grid, budget)?;
    let jobs = jobs.clamp(1, grid.len());
    let mut slots: Vec<Option<Result<SweepCell>>> = (0..grid.len()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..jobs)
            .map(|w| {
                scope.spawn(move || {
                    (w..grid.len())
                        .step_by(jobs)
                        .map(|k| (k, sweep_cell(topo, base, grid[k], budget, q_star)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (k, cell) in h.join().expect("sweep worker panicked") {
                slots[k] = Some(cell);
            }
        }
    });
    let cells = slots
        .into_iter()
        .map(|c| c.expect("every grid cell is visited"))
        .collect::<Result<Vec<_>>>()?;
    Ok(finish_sweep(cells, budget, q_star))
}

/// Geometric grid of `points` values from `start` with ratio `factor`.
pub fn geometric_grid(start: f64, factor: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| start * factor.powi(k as i32)).collect()
}

/// Best early-stopping run over a penalty grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedRun {
    pub rho: f64,
    pub report: SolveReport,
}

/// Runs ADMM with early stopping at every grid value and keeps the run
/// that converged within `gap_tol` of `q_star` in the fewest rounds. When
/// none qualifies, returns the finished run with the smallest gap, with
/// its status left as reported.
pub fn tune_rho(topo: &Topology, grid: &[f64], base: &AdmmConfig, q_star: f64, gap_tol: f64) -> Result<Option<TunedRun>> {
    check_grid(grid, base.max_iter)?;
    let mut best_ok: Option<TunedRun> = None;
    let mut best_any: Option<TunedRun> = None;
    for &rho in grid {
        let config = AdmmConfig { rho, ..*base };
        let report = match run_admm(topo, &config) {
            Ok(run) => run.report.with_oracle(q_star),
            Err(Error::NumericalDivergence { .. }) => continue,
            Err(e) => return Err(e),
        };
        let gap = report.oracle_gap.unwrap_or(f64::INFINITY);
        let ok = report.status == RunStatus::Converged && gap <= gap_tol;
        let cand = TunedRun { rho, report };
        if ok && best_ok.as_ref().is_none_or(|b| cand.report.iterations < b.report.iterations) {
            best_ok = Some(cand.clone());
        }
        if best_any.as_ref().is_none_or(|b| gap < b.report.oracle_gap.unwrap_or(f64::INFINITY)) {
            best_any = Some(cand);
        }
    }
    Ok(best_ok.or(best_any))
}

/// How one solver fared against the comparison target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOutcome {
    /// First round at which both the oracle gap and the LP violation were
    /// within target; `None` on timeout or divergence.
    pub iterations_to_target: Option<usize>,
    pub iterations_run: usize,
    pub messages: u64,
    pub final_gap: f64,
    pub final_violation: f64,
    pub diverged: Option<String>,
    /// Wall-clock seconds; excluded from serialized output so that files
    /// stay reproducible.
    #[serde(skip)]
    pub wall_seconds: f64,
}

impl SolverOutcome {
    pub fn timed_out(&self) -> bool {
        self.iterations_to_target.is_none() && self.diverged.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub target: f64,
    pub q_star: f64,
    pub admm: SolverOutcome,
    pub subgrad: SolverOutcome,
    /// Subgradient over ADMM rounds-to-target, when both reached it.
    pub ratio: Option<f64>,
    /// When only ADMM reached the target: subgradient rounds run over
    /// ADMM rounds, a lower bound on the true ratio.
    pub ratio_lower_bound: Option<f64>,
    #[serde(skip)]
    pub admm_trace: Vec<IterationTrace>,
    #[serde(skip)]
    pub subgrad_trace: Vec<IterationTrace>,
}

impl Comparison {
    /// Whether the subgradient needed at least `factor` times ADMM's rounds,
    /// counting a subgradient timeout by the rounds it ran.
    pub fn separation_at_least(&self, factor: f64) -> bool {
        self.ratio.or(self.ratio_lower_bound).is_some_and(|r| r >= factor)
    }
}

/// Runs both solvers on `topo` until each reaches `target` in both oracle
/// gap and LP violation, or exhausts its own `max_iter`.
pub fn compare(topo: &Topology, admm: &AdmmConfig, subgrad: &SubgradConfig, target: f64, q_star: f64) -> Result<Comparison> {
    if target.is_nan() || target <= 0.0 {
        return Err(Error::InvalidParam("comparison target must be positive".into()));
    }
    let hit = |q: f64, rates: &[Vec<f64>]| relative_gap(q, q_star) <= target && lp_violation(topo, q, rates) <= target;

    let started = Instant::now();
    let mut engine = AdmmEngine::new(topo, *admm)?;
    let mut admm_trace = Vec::new();
    let mut admm_hit = None;
    let mut admm_div = None;
    while engine.round() < admm.max_iter {
        match engine.step() {
            Ok(row) => admm_trace.push(row),
            Err(Error::NumericalDivergence { iteration, detail }) => {
                admm_div = Some(format!("round {iteration}: {detail}"));
                break;
            }
            Err(e) => return Err(e),
        }
        if hit(engine.q_mean(), &engine.rates_by_node()) {
            admm_hit = Some(engine.round());
            break;
        }
    }
    let admm_out = SolverOutcome {
        iterations_to_target: admm_hit,
        iterations_run: engine.round(),
        messages: engine.messages(),
        final_gap: relative_gap(engine.q_mean(), q_star),
        final_violation: lp_violation(topo, engine.q_mean(), &engine.rates_by_node()),
        diverged: admm_div,
        wall_seconds: started.elapsed().as_secs_f64(),
    };

    let started = Instant::now();
    let mut sg = SubgradEngine::new(topo, SubgradConfig { oracle_q: None, ..*subgrad })?;
    let mut subgrad_trace = Vec::new();
    let mut sg_hit = None;
    let mut sg_div = None;
    while sg.state().k < subgrad.max_iter {
        match sg.step() {
            Ok(row) => subgrad_trace.push(row),
            Err(Error::NumericalDivergence { iteration, detail }) => {
                sg_div = Some(format!("round {iteration}: {detail}"));
                break;
            }
            Err(e) => return Err(e),
        }
        let avg = &sg.state().average;
        if hit(avg.q, &avg.r) {
            sg_hit = Some(sg.state().k);
            break;
        }
    }
    let avg = &sg.state().average;
    let sg_out = SolverOutcome {
        iterations_to_target: sg_hit,
        iterations_run: sg.state().k,
        messages: sg.messages(),
        final_gap: relative_gap(avg.q, q_star),
        final_violation: lp_violation(topo, avg.q, &avg.r),
        diverged: sg_div,
        wall_seconds: started.elapsed().as_secs_f64(),
    };

    let ratio = match (admm_out.iterations_to_target, sg_out.iterations_to_target) {
        (Some(a), Some(s)) => Some(s as f64 / a as f64),
        _ => None,
    };
    let ratio_lower_bound = match (admm_out.iterations_to_target, sg_out.timed_out()) {
        (Some(a), true) => Some(sg_out.iterations_run as f64 / a as f64),
        _ => None,
    };
    Ok(Comparison {
        target,
        q_star,
        admm: admm_out,
        subgrad: sg_out,
        ratio,
        ratio_lower_bound,
        admm_trace,
        subgrad_trace,
    })
}
