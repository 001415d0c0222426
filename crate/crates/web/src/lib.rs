//! WebAssembly bindings for the browser demo. Each operation is a plain
//! function from JSON-friendly inputs to a JSON string; the exported
//! wrappers only translate errors into JS exceptions.

use lifemax_core::admm::{AdmmConfig, AdmmEngine};
use lifemax_core::harness::rho_sweep;
use lifemax_core::lp::oracle;
use lifemax_core::report::{relative_gap, RunStatus};
use lifemax_core::topology::{RadioParams, Topology, TopologyParams};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Debug, Serialize)]
struct Flow {
    from: usize,
    to: usize,
    rate: f64,
}

#[derive(Debug, Serialize)]
struct AdmmTrace {
    q_star: f64,
    status: RunStatus,
    rounds: usize,
    q: f64,
    gap: f64,
    /// Per-round lifetime estimate of every node.
    q_nodes: Vec<Vec<f64>>,
    /// Per-round total constraint violation.
    violation: Vec<f64>,
    flows: Vec<Flow>,
}

pub fn generate_topology(sensors: usize, seed: u64, comm_range: f64, beta: f64) -> Result<String, String> {
    let params = TopologyParams {
        sensors,
        seed,
        comm_range,
        radio: RadioParams {
            beta,
            ..RadioParams::default()
        },
        ..TopologyParams::default()
    };
    Topology::generate(&params).map(|t| t.to_json()).map_err(|e| e.to_string())
}

pub fn run_admm_trace(topology: &str, rho: f64, max_iter: usize) -> Result<String, String> {
    let topo = Topology::from_json(topology).map_err(|e| e.to_string())?;
    let q_star = oracle(&topo).map_err(|e| e.to_string())?.q;
    let config = AdmmConfig {
        rho,
        max_iter,
        ..AdmmConfig::default()
    };
    let mut engine = AdmmEngine::new(&topo, config).map_err(|e| e.to_string())?;
    let mut q_nodes = Vec::new();
    let mut violation = Vec::new();
    let mut status = RunStatus::MaxIterations;
    while engine.round() < max_iter {
        let row = engine.step().map_err(|e| e.to_string())?;
        violation.push(row.residuals.total_violation);
        q_nodes.push(row.q);
        if row.residuals.primal_norm <= config.eps_primal && row.residuals.dual_norm <= config.eps_dual {
            status = RunStatus::Converged;
            break;
        }
    }
    let rates = engine.rates_by_node();
    let flows = (0..topo.node_count())
        .flat_map(|i| topo.neighbors(i).iter().zip(&rates[i]).map(move |(nb, &rate)| Flow { from: i, to: nb.id, rate }))
        .filter(|f| f.rate > 1e-9)
        .collect();
    let trace = AdmmTrace {
        q_star,
        status,
        rounds: engine.round(),
        q: engine.q_mean(),
        gap: relative_gap(engine.q_mean(), q_star),
        q_nodes,
        violation,
        flows,
    };
    Ok(serde_json::to_string(&trace).expect("trace serializes"))
}

pub fn sweep_penalty(topology: &str, grid: &[f64], budget: usize) -> Result<String, String> {
    let topo = Topology::from_json(topology).map_err(|e| e.to_string())?;
    let q_star = oracle(&topo).map_err(|e| e.to_string())?.q;
    let sweep = rho_sweep(&topo, grid, budget, &AdmmConfig::default(), q_star).map_err(|e| e.to_string())?;
    Ok(serde_json::to_string(&sweep).expect("sweep serializes"))
}

#[wasm_bindgen]
pub fn generate(sensors: usize, seed: u32, comm_range: f64, beta: f64) -> Result<String, JsValue> {
    generate_topology(sensors, u64::from(seed), comm_range, beta).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn admm(topology: &str, rho: f64, max_iter: usize) -> Result<String, JsValue> {
    run_admm_trace(topology, rho, max_iter).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn sweep(topology: &str, grid: Vec<f64>, budget: usize) -> Result<String, JsValue> {
    sweep_penalty(topology, &grid, budget).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topo() -> String {
        generate_topology(8, 3, 40.0, 0.0005).unwrap()
    }

    #[test]
    fn generated_topology_parses() {
        let t = Topology::from_json(&topo()).unwrap();
        assert_eq!(t.sensor_count(), 8);
        assert!(generate_topology(0, 1, 40.0, 0.0005).is_err());
    }

    #[test]
    fn admm_trace_has_one_row_per_round() {
        let out: serde_json::Value = serde_json::from_str(&run_admm_trace(&topo(), 7.0, 300).unwrap()).unwrap();
        let rounds = out["rounds"].as_u64().unwrap() as usize;
        assert_eq!(out["q_nodes"].as_array().unwrap().len(), rounds);
        assert_eq!(out["violation"].as_array().unwrap().len(), rounds);
        assert_eq!(out["q_nodes"][0].as_array().unwrap().len(), 9);
        assert!(out["gap"].as_f64().unwrap() < 0.05);
        assert!(!out["flows"].as_array().unwrap().is_empty());
    }

    #[test]
    fn sweep_reports_every_grid_value() {
        let out: serde_json::Value = serde_json::from_str(&sweep_penalty(&topo(), &[1.0, 7.0, 50.0], 50).unwrap()).unwrap();
        assert_eq!(out["cells"].as_array().unwrap().len(), 3);
        assert!(sweep_penalty("{", &[1.0], 10).is_err());
    }
}
