use crate::report::ResidualReport;
use crate::topology::{Topology, SINK};

use super::state::NodeState;
use super::SlotMap;

/// Constraint violations of the current states plus the dual residual
/// against the previous round.
///
/// The primal norm stacks every constraint residual. The dual norm is `rho`
/// times the norm of the round-to-round change of the second-block
/// variables: every `A_ij`, every sensor slack `z_i`, and each neighbour's
/// copy of `q_j` (one copy per incident link).
pub fn compute_residuals(
    topo: &Topology,
    slots: &SlotMap,
    current: &[NodeState],
    previous: &[NodeState],
    rho: f64,
) -> ResidualReport {
    let mut sq = 0.0;
    let mut v = [0.0; 4];

    for (i, st) in current.iter().enumerate() {
        for (s, nb) in topo.neighbors(i).iter().enumerate() {
            let j = nb.id;
            let res = st.r[s] - current[j].r[slots.reverse(i, s)] - st.a[s];
            v[0] += res.abs();
            sq += res * res;
            if j > i {
                let cons = st.q - current[j].q;
                v[3] += cons.abs();
                sq += cons * cons;
            }
        }
        let bal = st.a.iter().sum::<f64>() - topo.node(i).gen_rate;
        v[1] += bal.abs();
        sq += bal * bal;
        if i != SINK {
            let drain = st.drain(topo.neighbors(i).iter().map(|n| n.cost));
            let e = topo.node(i).energy;
            let en = drain - (st.q - st.z) * e;
            v[2] += en.abs();
            sq += en * en;
        }
    }

    let mut dual_sq = 0.0;
    for (i, (cur, prev)) in current.iter().zip(previous).enumerate() {
        for (a, b) in cur.a.iter().zip(&prev.a) {
            dual_sq += (a - b) * (a - b);
        }
        if i != SINK {
            dual_sq += (cur.z - prev.z) * (cur.z - prev.z);
        }
        let dq = cur.q - prev.q;
        dual_sq += topo.degree(i) as f64 * dq * dq;
    }

    ResidualReport::new(sq.sqrt(), rho * dual_sq.sqrt(), v)
}
