//! Distributed ADMM for the lifetime problem.
//!
//! Each node owns its outgoing rates `r_ij`, flow differences `A_ij`, its
//! lifetime estimate `q_i` and energy slack `z_i`, and the multipliers of
//! its own constraints. A round visits nodes in ascending id order; node
//! `i` reads fresh values from lower-id neighbours and previous-round
//! values from higher-id neighbours, then updates `r`, `q`, `z`, `A` and
//! finally the duals. Link duals are advanced by the higher-id endpoint.

mod residual;
mod state;
mod update;

use serde::{Deserialize, Serialize};

pub use residual::compute_residuals;
pub use state::{staleness_select, NodeState};
pub use update::{dual_step, EnergyTerm, FlowDiffInputs, Objective, QInputs, RateInputs, SlackInputs};

use crate::error::{Error, Result};
use crate::report::{lifetime_of, Algorithm, IterationTrace, ResidualReport, RunStatus, SolveReport};
use crate::topology::{Topology, SINK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitPolicy {
    /// Every primal and dual starts at zero.
    Zero,
    /// `q_i = (Σ_j C_ij) g_i / e_i + 1`, everything else zero.
    #[default]
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmmConfig {
    pub rho: f64,
    pub eps_primal: f64,
    pub eps_dual: f64,
    pub max_iter: usize,
    pub objective: Objective,
    pub init: InitPolicy,
    pub divergence_bound: f64,
}

impl Default for AdmmConfig {
    fn default() -> Self {
        Self {
            rho: 7.0,
            eps_primal: 0.01,
            eps_dual: 0.01,
            max_iter: 500,
            objective: Objective::Quadratic,
            init: InitPolicy::Heuristic,
            divergence_bound: 1e12,
        }
    }
}

impl AdmmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParam(format!("rho must be positive, got {}", self.rho)));
        }
        if !(self.eps_primal > 0.0 && self.eps_dual > 0.0) {
            return Err(Error::InvalidParam("tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParam("max_iter must be at least 1".into()));
        }
        if self.divergence_bound.is_nan() || self.divergence_bound <= 0.0 {
            return Err(Error::InvalidParam("divergence bound must be positive".into()));
        }
        Ok(())
    }
}

/// Both residual norms within tolerance (inclusive).
pub fn check_stop(report: &ResidualReport, config: &AdmmConfig) -> bool {
    report.primal_norm <= config.eps_primal && report.dual_norm <= config.eps_dual
}

/// For node `i`'s neighbour slot `s`, the slot of `i` in that neighbour's list.
#[derive(Debug, Clone)]
pub struct SlotMap {
    reverse: Vec<Vec<usize>>,
}

impl SlotMap {
    pub fn new(topo: &Topology) -> Self {
        let reverse = (0..topo.node_count())
            .map(|i| {
                topo.neighbors(i)
                    .iter()
                    .map(|nb| {
                        topo.neighbors(nb.id)
                            .iter()
                            .position(|back| back.id == i)
                            .expect("links are bidirectional")
                    })
                    .collect()
            })
            .collect();
        Self { reverse }
    }

    pub fn reverse(&self, node: usize, slot: usize) -> usize {
        self.reverse[node][slot]
    }
}

/// Round-by-round ADMM engine over a fixed topology.
#[derive(Debug, Clone)]
pub struct AdmmEngine<'a> {
    topo: &'a Topology,
    config: AdmmConfig,
    slots: SlotMap,
    current: Vec<NodeState>,
    previous: Vec<NodeState>,
    round: usize,
    messages: u64,
}

impl<'a> AdmmEngine<'a> {
    pub fn new(topo: &'a Topology, config: AdmmConfig) -> Result<Self> {
        config.validate()?;
        let current: Vec<NodeState> = (0..topo.node_count())
            .map(|i| {
                let mut st = NodeState::new(i, topo.degree(i));
                if config.init == InitPolicy::Heuristic && i != SINK {
                    let node = topo.node(i);
                    let cost_sum: f64 = topo.neighbors(i).iter().map(|n| n.cost).sum();
                    st.q = cost_sum * node.gen_rate / node.energy + 1.0;
                } else if config.init == InitPolicy::Heuristic {
                    st.q = 1.0;
                }
                st
            })
            .collect();
        Ok(Self {
            topo,
            config,
            slots: SlotMap::new(topo),
            previous: current.clone(),
            current,
            round: 0,
            messages: 0,
        })
    }

    pub fn config(&self) -> &AdmmConfig {
        &self.config
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn states(&self) -> &[NodeState] {
        &self.current
    }

    pub fn messages(&self) -> u64 {
        self.messages
    }

    /// Mean lifetime estimate over sensors.
    pub fn q_mean(&self) -> f64 {
        let n = self.topo.sensor_count();
        self.current[1..].iter().map(|s| s.q).sum::<f64>() / n as f64
    }

    pub fn rates_by_node(&self) -> Vec<Vec<f64>> {
        self.current.iter().map(|s| s.r.clone()).collect()
    }

    /// Runs one full round and returns its trace row.
    pub fn step(&mut self) -> Result<IterationTrace> {
        self.round += 1;
        self.previous.clone_from(&self.current);
        for i in 0..self.topo.node_count() {
            self.update_node(i)?;
        }
        self.messages += 2 * self.topo.edges().len() as u64;
        self.check_finite()?;
        let residuals = compute_residuals(self.topo, &self.slots, &self.current, &self.previous, self.config.rho);
        Ok(IterationTrace {
            iter: self.round,
            q: self.current.iter().map(|s| s.q).collect(),
            z: self.current.iter().map(|s| s.z).collect(),
            residuals,
            messages_cum: self.messages,
        })
    }

    fn update_node(&mut self, i: usize) -> Result<()> {
        let k = self.round;
        let rho = self.config.rho;
        let topo = self.topo;
        let neighbors = topo.neighbors(i);
        let node = topo.node(i);
        let is_sink = i == SINK;

        // Neighbour values at the staleness-selected round.
        struct Remote {
            r_rev: f64,
            a_rev: f64,
            lambda_rev: f64,
            q: f64,
        }
        let mut remote = Vec::with_capacity(neighbors.len());
        for (s, nb) in neighbors.iter().enumerate() {
            let view = staleness_select(&self.current, &self.previous, nb.id, i, k)?;
            let rs = self.slots.reverse(i, s);
            remote.push(Remote {
                r_rev: view.r[rs],
                a_rev: view.a[rs],
                lambda_rev: view.lambda[rs],
                q: view.q,
            });
        }

        let mut st = self.current[i].clone();
        let costs = || neighbors.iter().map(|n| n.cost);

        // Rates, ascending neighbour id, freshest own values.
        for (s, nb) in neighbors.iter().enumerate() {
            let other_drain = st.drain(costs()) - nb.cost * st.r[s];
            let inp = RateInputs {
                rho,
                cost: nb.cost,
                r_rev: remote[s].r_rev,
                a_own: st.a[s],
                lambda_own: st.lambda[s],
                a_rev: remote[s].a_rev,
                lambda_rev: remote[s].lambda_rev,
                other_drain,
                energy: (!is_sink).then_some(EnergyTerm {
                    energy: node.energy,
                    gamma: st.gamma,
                    q: st.q,
                    z: st.z,
                }),
            };
            st.r[s] = inp.argmin();
        }

        let drain = st.drain(costs());
        st.q = QInputs {
            rho,
            objective: self.config.objective,
            in_objective: !is_sink,
            drain,
            energy: (!is_sink).then_some((node.energy, st.gamma, st.z)),
            neighbors: remote.iter().zip(&st.phi).map(|(rm, &phi)| (rm.q, phi)).collect(),
        }
        .argmin();

        if !is_sink {
            st.z = SlackInputs {
                node: i,
                rho,
                drain,
                q: st.q,
                energy: node.energy,
                gamma: st.gamma,
            }
            .argmin()?;
        }

        for (s, _) in neighbors.iter().enumerate() {
            let others = st.a.iter().sum::<f64>() - st.a[s];
            st.a[s] = FlowDiffInputs {
                rho,
                r_own: st.r[s],
                r_rev: remote[s].r_rev,
                lambda_own: st.lambda[s],
                others,
                gen_rate: node.gen_rate,
                mu: st.mu,
            }
            .argmin();
        }

        // Duals. Link multipliers are advanced by the higher-id endpoint,
        // which writes the lower endpoint's copies as part of its message.
        for (s, nb) in neighbors.iter().enumerate() {
            let j = nb.id;
            if j > i {
                continue;
            }
            let rs = self.slots.reverse(i, s);
            let peer = &mut self.current[j];
            let own_res = st.r[s] - peer.r[rs] - st.a[s];
            let peer_res = peer.r[rs] - st.r[s] - peer.a[rs];
            st.lambda[s] = dual_step(st.lambda[s], rho, own_res);
            peer.lambda[rs] = dual_step(peer.lambda[rs], rho, peer_res);
            peer.phi[rs] = dual_step(peer.phi[rs], rho, peer.q - st.q);
            st.phi[s] = -peer.phi[rs];
        }
        if !is_sink {
            st.gamma = dual_step(st.gamma, rho, drain - (st.q - st.z) * node.energy);
        }
        st.mu = dual_step(st.mu, rho, st.a.iter().sum::<f64>() - node.gen_rate);

        st.round = k;
        self.current[i] = st;
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        let bound = self.config.divergence_bound;
        for st in &self.current {
            if let Some(v) = st.values().find(|v| !v.is_finite() || v.abs() > bound) {
                return Err(Error::NumericalDivergence {
                    iteration: self.round,
                    detail: format!("node {} holds {v}", st.id),
                });
            }
        }
        Ok(())
    }

    fn report(&self, status: RunStatus, residuals: ResidualReport) -> SolveReport {
        let q = self.q_mean();
        SolveReport {
            algorithm: Algorithm::Admm,
            status,
            iterations: self.round,
            q,
            lifetime: lifetime_of(q),
            oracle_q: None,
            oracle_gap: None,
            residuals,
            messages: self.messages,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmmRun {
    pub report: SolveReport,
    pub trace: Vec<IterationTrace>,
    pub states: Vec<NodeState>,
}

/// Runs until the stopping rule holds or `max_iter` rounds have elapsed.
pub fn run_admm(topo: &Topology, config: &AdmmConfig) -> Result<AdmmRun> {
    run(topo, config, true)
}

/// Runs exactly `config.max_iter` rounds, ignoring the stopping rule.
pub fn run_admm_budget(topo: &Topology, config: &AdmmConfig) -> Result<AdmmRun> {
    run(topo, config, false)
}

fn run(topo: &Topology, config: &AdmmConfig, early_stop: bool) -> Result<AdmmRun> {
    let mut engine = AdmmEngine::new(topo, *config)?;
    let mut trace = Vec::new();
    let mut status = RunStatus::MaxIterations;
    let mut last = ResidualReport::default();
    let mut converged_at = None;
    while engine.round() < config.max_iter {
        let row = engine.step()?;
        last = row.residuals;
        let stop = check_stop(&row.residuals, config);
        trace.push(row);
        if stop && converged_at.is_none() {
            converged_at = Some(engine.round());
            if early_stop {
                break;
            }
        }
    }
    // A budget run reports on its final round, not on the first stop.
    let done = if early_stop { converged_at.is_some() } else { check_stop(&last, config) };
    if done {
        status = RunStatus::Converged;
    }
    Ok(AdmmRun {
        report: engine.report(status, last),
        trace,
        states: engine.current,
    })
}
