use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// ADMM variables held by one node. Per-link vectors are indexed by the
/// node's neighbour slot (ascending neighbour id).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeState {
    pub id: usize,
    /// Last round in which this node finished its primal and dual updates.
    pub round: usize,
    pub r: Vec<f64>,
    pub a: Vec<f64>,
    /// Multiplier of `r_ij - r_ji - A_ij = 0`.
    pub lambda: Vec<f64>,
    /// Multiplier of the consensus constraint on the link, oriented as
    /// `q_i - q_j = 0`; the two endpoints hold opposite signs.
    pub phi: Vec<f64>,
    pub q: f64,
    pub z: f64,
    pub gamma: f64,
    pub mu: f64,
}

impl NodeState {
    pub fn new(id: usize, degree: usize) -> Self {
        Self {
            id,
            round: 0,
            r: vec![0.0; degree],
            a: vec![0.0; degree],
            lambda: vec![0.0; degree],
            phi: vec![0.0; degree],
            q: 0.0,
            z: 0.0,
            gamma: 0.0,
            mu: 0.0,
        }
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.r
            .iter()
            .chain(&self.a)
            .chain(&self.lambda)
            .chain(&self.phi)
            .copied()
            .chain([self.q, self.z, self.gamma, self.mu])
    }

    /// Outgoing drain `Σ_j C_ij r_ij`.
    pub fn drain(&self, costs: impl IntoIterator<Item = f64>) -> f64 {
        costs.into_iter().zip(&self.r).map(|(c, r)| c * r).sum()
    }
}

/// Picks which copy of `owner`'s variables `requester` may read during
/// `round`. Lower-id owners have already updated this round and are read
/// fresh; higher-id owners are read from the previous round.
pub fn staleness_select<'a>(
    current: &'a [NodeState],
    previous: &'a [NodeState],
    owner: usize,
    requester: usize,
    round: usize,
) -> Result<&'a NodeState> {
    if owner < requester {
        let state = &current[owner];
        if state.round != round {
            return Err(Error::ProtocolViolation {
                requester,
                owner,
                round,
            });
        }
        Ok(state)
    } else {
        Ok(&previous[owner])
    }
}
