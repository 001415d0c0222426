//! Dual subgradient baseline for the inverse-lifetime LP.
//!
//! The energy rows `Σ_j C_ij r_ij - q e_i <= 0` carry multipliers
//! `lambda_i >= 0` and the flow rows `Σ_j (r_ij - r_ji) - g_i = 0` carry free
//! multipliers `v_i`. The Lagrangian is linear in every primal coordinate,
//! so its minimizer over a box snaps each coordinate to an end of the box.
//! Primal estimates are recovered as the running average of the minimizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::{lifetime_of, relative_gap, Algorithm, IterationTrace, ResidualReport, RunStatus, SolveReport};
use crate::topology::{Topology, SINK};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum StepRule {
    /// `a / (b + k)`
    Harmonic { a: f64, b: f64 },
    /// `a / sqrt(k)`
    InvSqrt { a: f64 },
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::Harmonic { a: 1.0, b: 0.0 }
    }
}

impl StepRule {
    /// Step size at iteration `k >= 1`.
    pub fn step(&self, k: usize) -> f64 {
        let k = k as f64;
        match *self {
            StepRule::Harmonic { a, b } => a / (b + k),
            StepRule::InvSqrt { a } => a / k.sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepRule::Harmonic { a, b } => a > 0.0 && a.is_finite() && b >= 0.0 && b.is_finite(),
            StepRule::InvSqrt { a } => a > 0.0 && a.is_finite(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParam(format!("invalid step rule {self:?}")))
        }
    }
}

/// Box on which the Lagrangian is minimized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    pub r_max: f64,
    pub q_max: f64,
}

impl Bounds {
    /// `r_max = 10 Σg max_deg`, `q_max = 10 q_upper` (see [`q_upper_bound`]).
    pub fn for_topology(topo: &Topology) -> Self {
        let total = topo.total_generation();
        Self {
            r_max: 10.0 * total * topo.max_degree() as f64,
            q_max: 10.0 * q_upper_bound(topo),
        }
    }
}

/// Inverse lifetime if every bit crossed the dearest link out of the
/// weakest battery: `max C · Σg / min e`. Any routing does at least as well.
pub fn q_upper_bound(topo: &Topology) -> f64 {
    let c_max = topo.edges().iter().map(|e| e.cost).fold(0.0, f64::max);
    let e_min = topo.nodes()[1..].iter().map(|n| n.energy).fold(f64::INFINITY, f64::min);
    c_max * topo.total_generation() / e_min
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    /// Per node; the sink entry is unused and stays zero.
    pub lambda: Vec<f64>,
    pub v: Vec<f64>,
}

impl Multipliers {
    pub fn zeros(nodes: usize) -> Self {
        Self {
            lambda: vec![0.0; nodes],
            v: vec![0.0; nodes],
        }
    }
}

/// A point `(q, r)` with rates indexed by node and neighbour slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Primal {
    pub q: f64,
    pub r: Vec<Vec<f64>>,
}

impl Primal {
    pub fn zeros(topo: &Topology) -> Self {
        Self {
            q: 0.0,
            r: (0..topo.node_count()).map(|i| vec![0.0; topo.degree(i)]).collect(),
        }
    }
}

/// Coefficient of `q` in the Lagrangian.
pub fn q_coefficient(topo: &Topology, m: &Multipliers) -> f64 {
    1.0 - (1..topo.node_count()).map(|i| m.lambda[i] * topo.node(i).energy).sum::<f64>()
}

/// Coefficient of `r_ij` in the Lagrangian, `j` being slot `s` of `i`.
pub fn rate_coefficient(topo: &Topology, m: &Multipliers, i: usize, s: usize) -> f64 {
    let nb = &topo.neighbors(i)[s];
    let energy = if i == SINK { 0.0 } else { m.lambda[i] * nb.cost };
    energy + m.v[i] - m.v[nb.id]
}

/// Lagrangian value at `x`.
pub fn lagrangian(topo: &Topology, m: &Multipliers, x: &Primal) -> f64 {
    let mut value = q_coefficient(topo, m) * x.q;
    for i in 0..topo.node_count() {
        for s in 0..topo.degree(i) {
            value += rate_coefficient(topo, m, i, s) * x.r[i][s];
        }
        value -= m.v[i] * topo.node(i).gen_rate;
    }
    value
}

/// Minimizer of the Lagrangian over `bounds`; ties go to the lower end.
pub fn primal_argmin(topo: &Topology, m: &Multipliers, bounds: &Bounds) -> Primal {
    let snap = |coef: f64, upper: f64| if coef < 0.0 { upper } else { 0.0 };
    Primal {
        q: snap(q_coefficient(topo, m), bounds.q_max),
        r: (0..topo.node_count())
            .map(|i| (0..topo.degree(i)).map(|s| snap(rate_coefficient(topo, m, i, s), bounds.r_max)).collect())
            .collect(),
    }
}

/// Dual function value, a lower bound on `q*` whenever the box contains
/// an optimal point.
pub fn dual_value(topo: &Topology, m: &Multipliers, bounds: &Bounds) -> f64 {
    lagrangian(topo, m, &primal_argmin(topo, m, bounds))
}

/// Constraint values at `x`: energy rows `drain - q e` (zero for the sink)
/// and flow rows `Σ_j (r_ij - r_ji) - g_i`.
pub fn constraint_values(topo: &Topology, x: &Primal) -> (Vec<f64>, Vec<f64>) {
    let n = topo.node_count();
    let mut energy = vec![0.0; n];
    let mut flow = vec![0.0; n];
    for i in 0..n {
        let mut out = 0.0;
        for (s, nb) in topo.neighbors(i).iter().enumerate() {
            let r = x.r[i][s];
            out += r;
            flow[nb.id] -= r;
            if i != SINK {
                energy[i] += nb.cost * r;
            }
        }
        flow[i] += out - topo.node(i).gen_rate;
        if i != SINK {
            energy[i] -= x.q * topo.node(i).energy;
        }
    }
    (energy, flow)
}

/// One projected step `lambda = (lambda - alpha h)_+`, `v = v - alpha h`,
/// where `h` is the negated constraint value at the current minimizer.
pub fn subgrad_step(m: &Multipliers, h_energy: &[f64], h_flow: &[f64], alpha: f64) -> Multipliers {
    Multipliers {
        lambda: m.lambda.iter().zip(h_energy).map(|(l, h)| (l - alpha * h).max(0.0)).collect(),
        v: m.v.iter().zip(h_flow).map(|(v, h)| v - alpha * h).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubgradConfig {
    pub step: StepRule,
    pub max_iter: usize,
    /// Feasibility tolerance on the averaged primal (ℓ2 norm of violations).
    pub eps: f64,
    /// Relative oracle gap accepted as converged when `oracle_q` is known.
    pub gap_tol: f64,
    pub oracle_q: Option<f64>,
    /// Iterations over which the best dual value must improve.
    pub stall_window: usize,
    pub stall_tol: f64,
    /// Box override; derived from the topology when absent.
    pub bounds: Option<Bounds>,
    pub divergence_bound: f64,
}

impl Default for SubgradConfig {
    fn default() -> Self {
        Self {
            step: StepRule::default(),
            max_iter: 20_000,
            eps: 0.01,
            gap_tol: 0.05,
            oracle_q: None,
            stall_window: 1_000,
            stall_tol: 1e-6,
            bounds: None,
            divergence_bound: 1e12,
        }
    }
}

impl SubgradConfig {
    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        if self.max_iter == 0 {
            return Err(Error::InvalidParam("max_iter must be at least 1".into()));
        }
        if !(self.eps > 0.0 && self.gap_tol > 0.0 && self.stall_tol > 0.0) {
            return Err(Error::InvalidParam("tolerances must be positive".into()));
        }
        if self.stall_window == 0 {
            return Err(Error::InvalidParam("stall window must be at least 1".into()));
        }
        if let Some(b) = self.bounds {
            if !(b.r_max > 0.0 && b.q_max > 0.0) {
                return Err(Error::InvalidParam("box bounds must be positive".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgradState {
    pub k: usize,
    pub multipliers: Multipliers,
    /// Minimizer at the current multipliers.
    pub x: Primal,
    /// Running average of the minimizers.
    pub average: Primal,
    pub dual: f64,
    pub best_dual: f64,
}

/// Violations of the averaged primal, mapped onto the shared report:
/// flow rows go to `v_ii`, positive energy excess to `v_iii`; the
/// baseline has no flow-difference or consensus rows.
pub fn averaged_residuals(topo: &Topology, x: &Primal, multiplier_change: f64) -> ResidualReport {
    let (energy, flow) = constraint_values(topo, x);
    let excess: Vec<f64> = energy.iter().map(|e| e.max(0.0)).collect();
    let sq: f64 = flow.iter().chain(&excess).map(|v| v * v).sum();
    ResidualReport::new(
        sq.sqrt(),
        multiplier_change,
        [0.0, flow.iter().map(|v| v.abs()).sum(), excess.iter().sum(), 0.0],
    )
}

/// Per-node energy slack `max(0, q - drain / e)` of a primal point.
fn slacks(topo: &Topology, x: &Primal) -> Vec<f64> {
    (0..topo.node_count())
        .map(|i| {
            if i == SINK {
                return 0.0;
            }
            let drain: f64 = topo.neighbors(i).iter().zip(&x.r[i]).map(|(nb, r)| nb.cost * r).sum();
            (x.q - drain / topo.node(i).energy).max(0.0)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubgradRun {
    pub report: SolveReport,
    pub trace: Vec<IterationTrace>,
    pub state: SubgradState,
}

/// Subgradient engine; one call to [`SubgradEngine::step`] is one round.
#[derive(Debug, Clone)]
pub struct SubgradEngine<'a> {
    topo: &'a Topology,
    config: SubgradConfig,
    bounds: Bounds,
    state: SubgradState,
    messages: u64,
    best_history: Vec<f64>,
}

impl<'a> SubgradEngine<'a> {
    pub fn new(topo: &'a Topology, config: SubgradConfig) -> Result<Self> {
        config.validate()?;
        let n = topo.node_count();
        Ok(Self {
            topo,
            bounds: config.bounds.unwrap_or_else(|| Bounds::for_topology(topo)),
            config,
            state: SubgradState {
                k: 0,
                multipliers: Multipliers::zeros(n),
                x: Primal::zeros(topo),
                average: Primal::zeros(topo),
                dual: f64::NEG_INFINITY,
                best_dual: f64::NEG_INFINITY,
            },
            messages: 0,
            best_history: Vec::new(),
        })
    }

    pub fn state(&self) -> &SubgradState {
        &self.state
    }

    pub fn bounds(&self) -> &Bounds {
        &self.bounds
    }

    pub fn messages(&self) -> u64 {
        self.messages
    }

    /// Minimizes the Lagrangian at the current multipliers, folds the
    /// minimizer into the average, then takes one multiplier step.
    pub fn step(&mut self) -> Result<IterationTrace> {
        let topo = self.topo;
        let st = &mut self.state;
        st.k += 1;
        let k = st.k;
        st.x = primal_argmin(topo, &st.multipliers, &self.bounds);
        st.dual = lagrangian(topo, &st.multipliers, &st.x);
        st.best_dual = st.best_dual.max(st.dual);
        self.best_history.push(st.best_dual);

        let w = 1.0 / k as f64;
        st.average.q += w * (st.x.q - st.average.q);
        for (avg, cur) in st.average.r.iter_mut().zip(&st.x.r) {
            for (a, c) in avg.iter_mut().zip(cur) {
                *a += w * (c - *a);
            }
        }

        let (energy, flow) = constraint_values(topo, &st.x);
        let h_energy: Vec<f64> = energy.iter().map(|v| -v).collect();
        let h_flow: Vec<f64> = flow.iter().map(|v| -v).collect();
        let next = subgrad_step(&st.multipliers, &h_energy, &h_flow, self.config.step.step(k));
        let change = next
            .lambda
            .iter()
            .zip(&st.multipliers.lambda)
            .chain(next.v.iter().zip(&st.multipliers.v))
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        st.multipliers = next;
        self.messages += 2 * topo.edges().len() as u64;

        let bound = self.config.divergence_bound;
        if let Some(v) = st.multipliers.lambda.iter().chain(&st.multipliers.v).find(|v| !v.is_finite() || v.abs() > bound) {
            return Err(Error::NumericalDivergence {
                iteration: k,
                detail: format!("multiplier holds {v}"),
            });
        }

        let residuals = averaged_residuals(topo, &st.average, change);
        Ok(IterationTrace {
            iter: k,
            q: vec![st.average.q; topo.node_count()],
            z: slacks(topo, &st.average),
            residuals,
            messages_cum: self.messages,
        })
    }

    /// Whether the best dual value improved by less than the relative
    /// stall tolerance over the last window.
    pub fn stalled(&self) -> bool {
        let w = self.config.stall_window;
        let h = &self.best_history;
        if h.len() <= w {
            return false;
        }
        let now = h[h.len() - 1];
        let then = h[h.len() - 1 - w];
        then.is_finite() && (now - then) <= self.config.stall_tol * now.abs().max(1e-12)
    }

    fn converged(&self, residuals: &ResidualReport) -> bool {
        match self.config.oracle_q {
            Some(q_star) => {
                residuals.primal_norm <= self.config.eps && relative_gap(self.state.average.q, q_star) <= self.config.gap_tol
            }
            None => false,
        }
    }

    fn report(&self, status: RunStatus, residuals: ResidualReport) -> SolveReport {
        let q = self.state.average.q;
        let report = SolveReport {
            algorithm: Algorithm::Subgrad,
            status,
            iterations: self.state.k,
            q,
            lifetime: lifetime_of(q),
            oracle_q: None,
            oracle_gap: None,
            residuals,
            messages: self.messages,
        };
        match self.config.oracle_q {
            Some(q_star) => report.with_oracle(q_star),
            None => report,
        }
    }
}

/// Runs until the averaged primal is feasible and within the oracle gap
/// (when an oracle value is configured), the best dual value stalls, or
/// `max_iter` is reached. Only the first rule reports `Converged`.
pub fn run_subgradient(topo: &Topology, config: &SubgradConfig) -> Result<SubgradRun> {
    let mut engine = SubgradEngine::new(topo, *config)?;
    let mut trace = Vec::new();
    let mut status = RunStatus::MaxIterations;
    let mut last = ResidualReport::default();
    while engine.state.k < config.max_iter {
        let row = engine.step()?;
        last = row.residuals;
        trace.push(row);
        if engine.converged(&last) {
            status = RunStatus::Converged;
            break;
        }
        if engine.stalled() {
            break;
        }
    }
    Ok(SubgradRun {
        report: engine.report(status, last),
        trace,
        state: engine.state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::{Point, RadioParams, SensorNode};

    fn line() -> Topology {
        let node = |id, x: f64| SensorNode {
            id,
            position: Point { x, y: 0.0 },
            energy: if id == 0 { f64::INFINITY } else { 1.0 },
            gen_rate: if id == 0 { -2.0 } else { 1.0 },
        };
        Topology::with_links(vec![node(0, 0.0), node(1, 10.0), node(2, 20.0)], &[(0, 1), (1, 2)], RadioParams { alpha: 0.5, beta: 0.01 }, 100.0)
            .unwrap()
    }

    #[test]
    fn step_rules() {
        let h = StepRule::Harmonic { a: 1.0, b: 0.0 };
        assert_eq!(h.step(1), 1.0);
        assert_eq!(h.step(2), 0.5);
        assert_eq!(h.step(10), 0.1);
        assert_eq!(StepRule::InvSqrt { a: 2.0 }.step(4), 1.0);
        assert!(StepRule::Harmonic { a: 0.0, b: 0.0 }.validate().is_err());
    }

    #[test]
    fn zero_multipliers_snap_low() {
        let topo = line();
        let x = primal_argmin(&topo, &Multipliers::zeros(3), &Bounds::for_topology(&topo));
        assert_eq!(x.q, 0.0);
        assert!(x.r.iter().flatten().all(|&r| r == 0.0));
    }

    #[test]
    fn negative_reduced_cost_hits_the_box() {
        let topo = line();
        let bounds = Bounds::for_topology(&topo);
        let mut m = Multipliers::zeros(3);
        m.v[1] = -1.0;
        let x = primal_argmin(&topo, &m, &bounds);
        // r_10 has coefficient lambda_1 C + v_1 - v_0 = -1.
        assert_eq!(x.r[1][0], bounds.r_max);
    }

    #[test]
    fn projection_clips_lambda() {
        let m = Multipliers {
            lambda: vec![0.0, 0.1],
            v: vec![0.0, 0.0],
        };
        let next = subgrad_step(&m, &[0.0, 0.5], &[0.0, 0.0], 1.0);
        assert_eq!(next.lambda[1], 0.0);
        let same = subgrad_step(&m, &[0.0, 0.0], &[0.0, 0.0], 1.0);
        assert_eq!(same, m);
    }

    #[test]
    fn box_bounds_follow_topology() {
        let topo = line();
        let b = Bounds::for_topology(&topo);
        assert_eq!(b.r_max, 10.0 * 2.0 * 2.0);
        assert!((b.q_max - 10.0 * 1.5 * 2.0).abs() < 1e-12);
    }
}
