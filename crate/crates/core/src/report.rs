//! Per-iteration traces and terminal summaries shared by all solvers.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

/// Constraint residuals of one iteration.
///
/// `v_i` through `v_iv` are the summed absolute violations of the four
/// constraint families (link flow difference, node flow balance, node
/// energy balance, lifetime consensus).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub primal_norm: f64,
    pub dual_norm: f64,
    pub v_i: f64,
    pub v_ii: f64,
    pub v_iii: f64,
    pub v_iv: f64,
    pub total_violation: f64,
}

impl ResidualReport {
    pub fn new(primal_norm: f64, dual_norm: f64, v: [f64; 4]) -> Self {
        Self {
            primal_norm,
            dual_norm,
            v_i: v[0],
            v_ii: v[1],
            v_iii: v[2],
            v_iv: v[3],
            total_violation: v[0] + v[1] + v[2] + v[3],
        }
    }

    pub fn max_violation(&self) -> f64 {
        self.v_i.max(self.v_ii).max(self.v_iii).max(self.v_iv)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    pub iter: usize,
    /// Per-node lifetime estimate (inverse lifetime units).
    pub q: Vec<f64>,
    /// Per-node energy slack.
    pub z: Vec<f64>,
    pub residuals: ResidualReport,
    pub messages_cum: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Lp,
    Admm,
    Subgrad,
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Lp => "lp",
            Algorithm::Admm => "admm",
            Algorithm::Subgrad => "subgrad",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub algorithm: Algorithm,
    pub status: RunStatus,
    pub iterations: usize,
    /// Network-wide inverse-lifetime estimate.
    pub q: f64,
    pub lifetime: f64,
    pub oracle_q: Option<f64>,
    /// `|q - q*| / q*`, or the absolute gap when `q* = 0`.
    pub oracle_gap: Option<f64>,
    pub residuals: ResidualReport,
    pub messages: u64,
}

impl SolveReport {
    pub fn with_oracle(mut self, q_star: f64) -> Self {
        self.oracle_q = Some(q_star);
        self.oracle_gap = Some(relative_gap(self.q, q_star));
        self
    }
}

pub fn relative_gap(q: f64, q_star: f64) -> f64 {
    if q_star.abs() > 0.0 {
        (q - q_star).abs() / q_star.abs()
    } else {
        q.abs()
    }
}

pub fn lifetime_of(q: f64) -> f64 {
    if q > 0.0 {
        1.0 / q
    } else {
        f64::INFINITY
    }
}

pub const TRACE_COLUMNS: &str = "iter,node_id,q,z,primal_norm,dual_norm,vI,vII,vIII,vIV,messages_cum";

/// Renders a trace as CSV with a `#`-prefixed header, one row per node
/// per iteration. Floats use Rust's shortest round-trip formatting.
pub fn trace_csv(algorithm: Algorithm, trace: &[IterationTrace]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# lifemax trace algorithm={}", algorithm.name());
    let _ = writeln!(out, "# {TRACE_COLUMNS}");
    for row in trace {
        append_trace_rows(&mut out, row);
    }
    out
}

pub fn append_trace_rows(out: &mut String, row: &IterationTrace) {
    let r = &row.residuals;
    for (node, (q, z)) in row.q.iter().zip(&row.z).enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            row.iter, node, q, z, r.primal_norm, r.dual_norm, r.v_i, r.v_ii, r.v_iii, r.v_iv, row.messages_cum
        );
    }
}
