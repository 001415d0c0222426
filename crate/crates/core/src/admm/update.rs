//! Closed-form minimizers of the per-variable augmented-Lagrangian
//! subproblems. Each input struct also evaluates its own objective so the
//! minimizers can be checked against an independent numerical search.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Head term of the lifetime objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    /// `Σ q_i`
    Linear,
    /// `Σ q_i²`, strongly convex. Same minimizer once consensus holds.
    #[default]
    Quadratic,
}

/// Energy-balance coupling seen from one sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyTerm {
    pub energy: f64,
    /// Dual of the node's energy-balance constraint.
    pub gamma: f64,
    pub q: f64,
    pub z: f64,
}

/// Inputs of the rate update for link `i -> j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateInputs {
    pub rho: f64,
    pub cost: f64,
    /// `r_ji` at the staleness-selected round.
    pub r_rev: f64,
    /// `A_ij` from the previous round.
    pub a_own: f64,
    pub lambda_own: f64,
    /// `A_ji` at the staleness-selected round.
    pub a_rev: f64,
    pub lambda_rev: f64,
    /// `Σ_{l != j} C_il r_il` at the freshest values.
    pub other_drain: f64,
    /// Absent for the sink, which has no energy constraint.
    pub energy: Option<EnergyTerm>,
}

impl RateInputs {
    pub fn objective(&self, r: f64) -> f64 {
        let rho = self.rho;
        let own = r - self.r_rev - self.a_own + self.lambda_own / rho;
        let rev = self.r_rev - r - self.a_rev + self.lambda_rev / rho;
        let mut sum = own * own + rev * rev;
        if let Some(e) = self.energy {
            let bal = self.cost * r + self.other_drain - (e.q - e.z) * e.energy + e.gamma / rho;
            sum += bal * bal;
        }
        0.5 * rho * sum
    }

    pub fn derivative(&self, r: f64) -> f64 {
        let rho = self.rho;
        let own = r - self.r_rev - self.a_own + self.lambda_own / rho;
        let rev = self.r_rev - r - self.a_rev + self.lambda_rev / rho;
        let mut d = own - rev;
        if let Some(e) = self.energy {
            let bal = self.cost * r + self.other_drain - (e.q - e.z) * e.energy + e.gamma / rho;
            d += self.cost * bal;
        }
        rho * d
    }

    /// Minimizer over `r >= 0`.
    pub fn argmin(&self) -> f64 {
        let rho = self.rho;
        let p_own = self.r_rev + self.a_own - self.lambda_own / rho;
        let p_rev = self.r_rev - self.a_rev + self.lambda_rev / rho;
        let (num, den) = match self.energy {
            Some(e) => {
                let target = (e.q - e.z) * e.energy - self.other_drain - e.gamma / rho;
                (p_own + p_rev + self.cost * target, 2.0 + self.cost * self.cost)
            }
            None => (p_own + p_rev, 2.0),
        };
        (num / den).max(0.0)
    }
}

/// Inputs of the lifetime-estimate update at one node.
#[derive(Debug, Clone, PartialEq)]
pub struct QInputs {
    pub rho: f64,
    pub objective: Objective,
    /// Whether the node's `q` carries the objective head term.
    pub in_objective: bool,
    /// `Σ_j C_ij r_ij` at the current round.
    pub drain: f64,
    /// `(energy, gamma, z)`; absent for the sink.
    pub energy: Option<(f64, f64, f64)>,
    /// `(q_j, φ_ij)` per neighbour, `φ_ij` oriented as the multiplier of
    /// `q_i - q_j = 0`.
    pub neighbors: Vec<(f64, f64)>,
}

impl QInputs {
    pub fn objective(&self, q: f64) -> f64 {
        let rho = self.rho;
        let head = match (self.in_objective, self.objective) {
            (false, _) => 0.0,
            (true, Objective::Linear) => q,
            (true, Objective::Quadratic) => q * q,
        };
        let mut sum = 0.0;
        if let Some((e, gamma, z)) = self.energy {
            let bal = self.drain - (q - z) * e + gamma / rho;
            sum += bal * bal;
        }
        for &(qj, phi) in &self.neighbors {
            let c = q - qj + phi / rho;
            sum += c * c;
        }
        head + 0.5 * rho * sum
    }

    pub fn argmin(&self) -> f64 {
        let rho = self.rho;
        let mut num = 0.0;
        let mut den = 0.0;
        if let Some((e, gamma, z)) = self.energy {
            // (e q - (drain + z e + gamma/rho))²
            num += rho * e * (self.drain + z * e + gamma / rho);
            den += rho * e * e;
        }
        for &(qj, phi) in &self.neighbors {
            num += rho * (qj - phi / rho);
            den += rho;
        }
        match (self.in_objective, self.objective) {
            (false, _) => {}
            (true, Objective::Linear) => num -= 1.0,
            (true, Objective::Quadratic) => den += 2.0,
        }
        num / den
    }
}

/// Inputs of the energy-slack update at one sensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlackInputs {
    pub node: usize,
    pub rho: f64,
    pub drain: f64,
    pub q: f64,
    pub energy: f64,
    pub gamma: f64,
}

impl SlackInputs {
    pub fn objective(&self, z: f64) -> f64 {
        let bal = self.drain - (self.q - z) * self.energy + self.gamma / self.rho;
        0.5 * self.rho * bal * bal
    }

    pub fn derivative(&self, z: f64) -> f64 {
        let bal = self.drain - (self.q - z) * self.energy + self.gamma / self.rho;
        self.rho * self.energy * bal
    }

    /// Minimizer over `z >= 0`.
    pub fn argmin(&self) -> Result<f64> {
        if !self.energy.is_finite() || self.energy <= 0.0 {
            return Err(Error::DegenerateNode(self.node));
        }
        Ok((self.q - (self.drain + self.gamma / self.rho) / self.energy).max(0.0))
    }
}

/// Inputs of the flow-difference update for link `i -> j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowDiffInputs {
    pub rho: f64,
    pub r_own: f64,
    pub r_rev: f64,
    pub lambda_own: f64,
    /// `Σ_{l != j} A_il` at the freshest values.
    pub others: f64,
    pub gen_rate: f64,
    pub mu: f64,
}

impl FlowDiffInputs {
    pub fn objective(&self, a: f64) -> f64 {
        let link = self.r_own - self.r_rev - a + self.lambda_own / self.rho;
        let node = a + self.others - self.gen_rate + self.mu / self.rho;
        0.5 * self.rho * (link * link + node * node)
    }

    /// Unconstrained minimizer.
    pub fn argmin(&self) -> f64 {
        let from_link = self.r_own - self.r_rev + self.lambda_own / self.rho;
        let from_node = self.gen_rate - self.others - self.mu / self.rho;
        0.5 * (from_link + from_node)
    }
}

/// One dual ascent step on a constraint residual.
pub fn dual_step(previous: f64, rho: f64, residual: f64) -> f64 {
    previous + rho * residual
}
