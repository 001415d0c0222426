//! Centralized reference solver for the inverse-lifetime LP.
//!
//! Variables are `q` followed by one rate per directed link. For the
//! undirected edge `k = (a, b)` with `a < b`, column `1 + 2k` carries
//! `r_ab` and column `2 + 2k` carries `r_ba`.
//!
//! ```text
//!   min q
//!   s.t. Σ_j r_ij - Σ_j r_ji = g_i           every node
//!        Σ_j C_ij r_ij - e_i q <= 0          every sensor
//!        q, r >= 0
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simplex::{self, SimplexSolution, StandardLp};
use crate::topology::{Topology, SINK};

/// Column of `q`.
pub const Q_COL: usize = 0;

/// Column of the rate from `from` to `to` over edge `edge`.
pub fn rate_col(topo: &Topology, edge: usize, from: usize) -> usize {
    let e = &topo.edges()[edge];
    if from == e.i {
        1 + 2 * edge
    } else {
        2 + 2 * edge
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub variables: usize,
    /// One row per node, sink included. Rows sum to zero.
    pub flow_rows: Vec<Vec<f64>>,
    pub flow_rhs: Vec<f64>,
    /// One row per sensor (node `k + 1` for row `k`).
    pub energy_rows: Vec<Vec<f64>>,
    pub cost: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectedRate {
    pub i: usize,
    pub j: usize,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    pub q: f64,
    pub lifetime: f64,
    pub rates: Vec<DirectedRate>,
    /// Flow-row duals per node; the sink row is dropped so its dual is 0.
    pub flow_duals: Vec<f64>,
    /// Energy-row duals per node; 0 for the sink.
    pub energy_duals: Vec<f64>,
    pub primal_residual: f64,
    pub complementarity: f64,
    #[serde(skip)]
    pub x: Vec<f64>,
}

impl LpSolution {
    /// Outgoing rate of each node to each neighbour, in neighbour order.
    pub fn rates_by_node(&self, topo: &Topology) -> Vec<Vec<f64>> {
        (0..topo.node_count())
            .map(|i| {
                topo.neighbors(i)
                    .iter()
                    .map(|n| self.x[rate_col(topo, n.edge, i)])
                    .collect()
            })
            .collect()
    }
}

pub fn build_lp(topo: &Topology) -> LpProblem {
    let variables = 1 + 2 * topo.edges().len();
    let n = topo.node_count();
    let mut flow_rows = vec![vec![0.0; variables]; n];
    let mut energy_rows = Vec::with_capacity(n - 1);
    for i in 0..n {
        for nb in topo.neighbors(i) {
            flow_rows[i][rate_col(topo, nb.edge, i)] += 1.0;
            flow_rows[i][rate_col(topo, nb.edge, nb.id)] -= 1.0;
        }
        if i != SINK {
            let mut row = vec![0.0; variables];
            for nb in topo.neighbors(i) {
                row[rate_col(topo, nb.edge, i)] = nb.cost;
            }
            row[Q_COL] = -topo.node(i).energy;
            energy_rows.push(row);
        }
    }
    let mut cost = vec![0.0; variables];
    cost[Q_COL] = 1.0;
    LpProblem {
        variables,
        flow_rows,
        flow_rhs: topo.nodes().iter().map(|n| n.gen_rate).collect(),
        energy_rows,
        cost,
    }
}

impl LpProblem {
    /// Standard form with the redundant sink flow row removed.
    pub fn standard_form(&self) -> StandardLp {
        StandardLp {
            cost: self.cost.clone(),
            eq_rows: self.flow_rows[1..].to_vec(),
            eq_rhs: self.flow_rhs[1..].to_vec(),
            le_rhs: vec![0.0; self.energy_rows.len()],
            le_rows: self.energy_rows.clone(),
        }
    }
}

/// Solves the LP to optimality. Infeasible and unbounded outcomes are
/// returned as errors: neither can occur for a connected topology with
/// non-negative generation rates.
pub fn solve_lp(topo: &Topology, problem: &LpProblem) -> Result<LpSolution> {
    let std = problem.standard_form();
    let sol: SimplexSolution = simplex::solve(&std)?;
    let primal_residual = std.primal_residual(&sol.x);
    let complementarity = std.complementarity(&sol);
    let q = sol.x[Q_COL];
    let rates = topo
        .edges()
        .iter()
        .enumerate()
        .flat_map(|(k, e)| {
            [
                DirectedRate { i: e.i, j: e.j, r: sol.x[1 + 2 * k] },
                DirectedRate { i: e.j, j: e.i, r: sol.x[2 + 2 * k] },
            ]
        })
        .collect();
    let mut flow_duals = vec![0.0];
    flow_duals.extend_from_slice(&sol.eq_duals);
    let mut energy_duals = vec![0.0];
    energy_duals.extend_from_slice(&sol.le_duals);
    Ok(LpSolution {
        status: LpStatus::Optimal,
        q,
        lifetime: if q > 0.0 { 1.0 / q } else { f64::INFINITY },
        rates,
        flow_duals,
        energy_duals,
        primal_residual,
        complementarity,
        x: sol.x,
    })
}

/// Builds and solves the LP for `topo`.
pub fn oracle(topo: &Topology) -> Result<LpSolution> {
    let problem = build_lp(topo);
    match solve_lp(topo, &problem) {
        Err(Error::Infeasible) => {
            debug_assert!(false, "connected topology produced an infeasible LP");
            Err(Error::Infeasible)
        }
        other => other,
    }
}
