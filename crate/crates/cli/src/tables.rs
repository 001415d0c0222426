//! Plot-ready CSV renderings. Every file starts with `#` comment lines so
//! gnuplot skips them; floats use the shortest round-trip form.

use std::fmt::Write as _;

use lifemax_core::harness::{CellOutcome, Comparison, SweepResult};

pub const SWEEP_COLUMNS: &str = "rho,gap,primal_norm,dual_norm,iters,gap_norm,primal_norm_norm,dual_norm_norm,best,status";

pub fn sweep_csv(sweep: &SweepResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# lifemax sweep budget={} q_star={}", sweep.budget, sweep.q_star);
    let _ = writeln!(out, "# {SWEEP_COLUMNS}");
    for (k, cell) in sweep.cells.iter().enumerate() {
        let best = u8::from(sweep.best == Some(k));
        let [gn, pn, dn] = cell.normalized.unwrap_or([f64::NAN; 3]);
        match &cell.outcome {
            CellOutcome::Finished {
                gap,
                primal_norm,
                dual_norm,
                iterations,
            } => {
                let _ = writeln!(
                    out,
                    "{},{gap},{primal_norm},{dual_norm},{iterations},{gn},{pn},{dn},{best},finished",
                    cell.rho
                );
            }
            CellOutcome::Diverged { iteration, .. } => {
                let _ = writeln!(out, "{},NaN,NaN,NaN,{iteration},NaN,NaN,NaN,{best},diverged", cell.rho);
            }
        }
    }
    out
}

/// One row per round: ADMM per-node `q`, its total and per-family
/// violations, then the subgradient's averaged `q`. A solver that stopped
/// earlier leaves its fields empty.
pub fn comparison_csv(cmp: &Comparison, nodes: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# lifemax compare target={} q_star={}", cmp.target, cmp.q_star);
    let mut header = String::from("iter");
    for i in 0..nodes {
        let _ = write!(header, ",admm_q_{i}");
    }
    header.push_str(",admm_total,admm_vI,admm_vII,admm_vIII,admm_vIV,subgrad_q");
    let _ = writeln!(out, "# {header}");
    let rows = cmp.admm_trace.len().max(cmp.subgrad_trace.len());
    for k in 0..rows {
        let _ = write!(out, "{}", k + 1);
        match cmp.admm_trace.get(k) {
            Some(row) => {
                for q in &row.q {
                    let _ = write!(out, ",{q}");
                }
                let r = &row.residuals;
                let _ = write!(out, ",{},{},{},{},{}", r.total_violation, r.v_i, r.v_ii, r.v_iii, r.v_iv);
            }
            None => out.push_str(&",".repeat(nodes + 5)),
        }
        match cmp.subgrad_trace.get(k) {
            Some(row) => {
                let _ = write!(out, ",{}", row.q[0]);
            }
            None => out.push(','),
        }
        out.push('\n');
    }
    out
}
