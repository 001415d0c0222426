//! Reference computations that share no code with the library solvers.
//! Used by the integration tests here and by the acceptance target.

#![allow(dead_code)]

use lifemax_core::topology::{Point, RadioParams, SensorNode, Topology, SINK};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Minimizer of a convex 1-D function over `[lo, inf)` by bisection on its
/// derivative. `lo = -inf` gives the unconstrained minimizer.
pub fn bisect_min(deriv: impl Fn(f64) -> f64, lo: f64) -> f64 {
    if lo.is_finite() && deriv(lo) >= 0.0 {
        return lo;
    }
    let mut a = if lo.is_finite() { lo } else { -1.0 };
    let mut b = if lo.is_finite() { lo + 1.0 } else { 1.0 };
    while deriv(a) > 0.0 {
        a -= 2.0 * (b - a);
    }
    while deriv(b) < 0.0 {
        b += 2.0 * (b - a);
    }
    for _ in 0..400 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if deriv(m) < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Golden-section minimizer on `[a, b]`, stopping at width `tol`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Random connected instance with `sensors` sensors, non-uniform energies
/// and generation rates.
pub fn small_instance(seed: u64, sensors: usize) -> Topology {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut nodes = vec![SensorNode {
            id: SINK,
            position: Point::new(0.0, 0.0),
            energy: f64::INFINITY,
            gen_rate: 0.0,
        }];
        for id in 1..=sensors {
            let r = 50.0 * rng.gen::<f64>().sqrt();
            let t = rng.gen_range(0.0..std::f64::consts::TAU);
            nodes.push(SensorNode {
                id,
                position: Point::new(r * t.cos(), r * t.sin()),
                energy: rng.gen_range(0.5..2.0),
                gen_rate: rng.gen_range(0.1..2.0),
            });
        }
        let radio = RadioParams { alpha: 0.5, beta: 0.001 };
        if let Ok(topo) = Topology::from_nodes(nodes, radio, 50.0, 45.0) {
            return topo;
        }
    }
}

/// Shortest-path distance to the sink from every node when leaving node
/// `i` over link `(i, j)` costs `price[i] * C_ij`.
fn sink_distances(topo: &Topology, price: &[f64]) -> Vec<f64> {
    let n = topo.node_count();
    let mut dist = vec![f64::INFINITY; n];
    dist[SINK] = 0.0;
    for _ in 0..n {
        for e in topo.edges() {
            for (a, b) in [(e.i, e.j), (e.j, e.i)] {
                if a != SINK {
                    let via = price[a] * e.cost + dist[b];
                    if via < dist[a] {
                        dist[a] = via;
                    }
                }
            }
        }
    }
    dist
}

/// Brute-force optimal inverse lifetime of an instance with at most three
/// sensors.
///
/// For energy prices `λ >= 0` with `Σ λ_i e_i = 1`, every routing sends
/// each sensor's traffic along some path to the sink, so `Σ_i g_i d_λ(i)`
/// with `d_λ` the priced shortest-path distance is a lower bound on `q`;
/// the best bound equals `q*`. The prices are enumerated on a grid of the
/// simplex `μ_i = λ_i e_i` with the given step.
pub fn grid_search_q(topo: &Topology, step: f64) -> f64 {
    let sensors = topo.sensor_count();
    assert!((1..=3).contains(&sensors), "grid search is for tiny instances");
    let steps = (1.0 / step).round() as usize;
    let mut best = f64::NEG_INFINITY;
    let mut price = vec![0.0; topo.node_count()];
    let mut eval = |mu: &[f64]| {
        for (k, m) in mu.iter().enumerate() {
            price[k + 1] = m / topo.node(k + 1).energy;
        }
        let dist = sink_distances(topo, &price);
        let value: f64 = (1..topo.node_count()).map(|i| topo.node(i).gen_rate * dist[i]).sum();
        best = best.max(value);
    };
    match sensors {
        1 => eval(&[1.0]),
        2 => {
            for a in 0..=steps {
                let x = a as f64 / steps as f64;
                eval(&[x, 1.0 - x]);
            }
        }
        _ => {
            for a in 0..=steps {
                for b in 0..=steps - a {
                    let x = a as f64 / steps as f64;
                    let y = b as f64 / steps as f64;
                    eval(&[x, y, (1.0 - x - y).max(0.0)]);
                }
            }
        }
    }
    best
}

/// Lagrangian of the lifetime LP written out constraint by constraint:
/// `q + Σ λ_i (drain_i - q e_i) + Σ v_i (out_i - in_i - g_i)`.
pub fn lagrangian_direct(topo: &Topology, lambda: &[f64], v: &[f64], q: f64, r: &[Vec<f64>]) -> f64 {
    let n = topo.node_count();
    let mut out = vec![0.0; n];
    let mut inflow = vec![0.0; n];
    let mut drain = vec![0.0; n];
    for i in 0..n {
        for (s, nb) in topo.neighbors(i).iter().enumerate() {
            out[i] += r[i][s];
            inflow[nb.id] += r[i][s];
            drain[i] += nb.cost * r[i][s];
        }
    }
    let mut value = q;
    for i in 1..n {
        value += lambda[i] * (drain[i] - q * topo.node(i).energy);
    }
    for i in 0..n {
        value += v[i] * (out[i] - inflow[i] - topo.node(i).gen_rate);
    }
    value
}

/// Minimum of the Lagrangian over the corners of the box
/// `[0, q_max] x [0, r_max]^m`. A linear function attains its box minimum
/// at a corner, so this is the exact box minimum.
pub fn corner_min(topo: &Topology, lambda: &[f64], v: &[f64], q_max: f64, r_max: f64) -> f64 {
    let slots: Vec<(usize, usize)> = (0..topo.node_count())
        .flat_map(|i| (0..topo.degree(i)).map(move |s| (i, s)))
        .collect();
    let vars = slots.len() + 1;
    assert!(vars <= 20, "too many corners to enumerate");
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << vars) {
        let q = if mask & 1 == 1 { q_max } else { 0.0 };
        let mut r: Vec<Vec<f64>> = (0..topo.node_count()).map(|i| vec![0.0; topo.degree(i)]).collect();
        for (k, &(i, s)) in slots.iter().enumerate() {
            if mask >> (k + 1) & 1 == 1 {
                r[i][s] = r_max;
            }
        }
        best = best.min(lagrangian_direct(topo, lambda, v, q, &r));
    }
    best
}

/// Outcome of randomized checks of one closed-form update.
#[derive(Debug, Clone, Copy, Default)]
pub struct UpdateCheck {
    pub calls: usize,
    /// Largest `|closed - numeric| / max(1, |numeric|)`.
    pub max_err: f64,
    /// Calls whose closed form landed on the bound `0`.
    pub projected: usize,
    /// Projected calls whose derivative at `0` was negative.
    pub kkt_failures: usize,
}

impl UpdateCheck {
    fn record(&mut self, closed: f64, numeric: f64) {
        self.calls += 1;
        self.max_err = self.max_err.max((closed - numeric).abs() / numeric.abs().max(1.0));
    }

    fn record_projection(&mut self, closed: f64, slope_at_zero: f64, scale: f64) {
        if closed == 0.0 {
            self.projected += 1;
            if slope_at_zero < -1e-9 * scale.max(1.0) {
                self.kkt_failures += 1;
            }
        }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_err <= tol && self.kkt_failures == 0
    }
}

/// Runs `calls` randomized instances of each closed-form update against
/// bisection on independently written derivatives. Returns the checks for
/// the rate, lifetime-estimate, slack and flow-difference updates.
pub fn check_updates(seed: u64, calls: usize) -> [UpdateCheck; 4] {
    use lifemax_core::admm::{EnergyTerm, FlowDiffInputs, Objective, QInputs, RateInputs, SlackInputs};

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = [UpdateCheck::default(); 4];
    let val = |rng: &mut ChaCha8Rng| rng.gen_range(-5.0..5.0);

    for _ in 0..calls {
        let rho = 10f64.powf(rng.gen_range(-1.0..1.7));
        let cost = rng.gen_range(0.5..3.0);
        let energy = if rng.gen_bool(0.8) {
            Some(EnergyTerm {
                energy: rng.gen_range(0.2..5.0),
                gamma: val(&mut rng),
                q: val(&mut rng),
                z: rng.gen_range(0.0..3.0),
            })
        } else {
            None
        };
        let inp = RateInputs {
            rho,
            cost,
            r_rev: rng.gen_range(0.0..5.0),
            a_own: val(&mut rng),
            lambda_own: val(&mut rng),
            a_rev: val(&mut rng),
            lambda_rev: val(&mut rng),
            other_drain: rng.gen_range(0.0..5.0),
            energy,
        };
        // d/dr of ρ/2 [ (r - r_ji - A_ij + u_ij)² + (r_ji - r - A_ji + u_ji)² + (C r + D - (q - z) e + w)² ]
        let deriv = |r: f64| {
            let u_own = inp.lambda_own / rho;
            let u_rev = inp.lambda_rev / rho;
            let mut d = (r - inp.r_rev - inp.a_own + u_own) + (r - inp.r_rev + inp.a_rev - u_rev);
            if let Some(e) = inp.energy {
                d += cost * (cost * r + inp.other_drain - e.energy * (e.q - e.z) + e.gamma / rho);
            }
            rho * d
        };
        let closed = inp.argmin();
        out[0].record(closed, bisect_min(deriv, 0.0));
        out[0].record_projection(closed, deriv(0.0), rho);

        let objective = if rng.gen_bool(0.5) { Objective::Linear } else { Objective::Quadratic };
        let in_objective = rng.gen_bool(0.8);
        let neighbors: Vec<(f64, f64)> = (0..rng.gen_range(1..5)).map(|_| (val(&mut rng), val(&mut rng))).collect();
        let q_energy = if rng.gen_bool(0.8) {
            Some((rng.gen_range(0.2..5.0), val(&mut rng), rng.gen_range(0.0..3.0)))
        } else {
            None
        };
        let q_in = QInputs {
            rho,
            objective,
            in_objective,
            drain: rng.gen_range(0.0..5.0),
            energy: q_energy,
            neighbors: neighbors.clone(),
        };
        let deriv = |q: f64| {
            let mut d = match (in_objective, objective) {
                (false, _) => 0.0,
                (true, Objective::Linear) => 1.0,
                (true, Objective::Quadratic) => 2.0 * q,
            };
            if let Some((e, gamma, z)) = q_energy {
                d -= rho * e * (q_in.drain - e * (q - z) + gamma / rho);
            }
            for &(qj, phi) in &neighbors {
                d += rho * (q - qj + phi / rho);
            }
            d
        };
        out[1].record(q_in.argmin(), bisect_min(deriv, f64::NEG_INFINITY));

        let z_in = SlackInputs {
            node: 1,
            rho,
            drain: rng.gen_range(0.0..5.0),
            q: val(&mut rng),
            energy: rng.gen_range(0.2..5.0),
            gamma: val(&mut rng),
        };
        let deriv = |z: f64| rho * z_in.energy * (z_in.drain - z_in.energy * (z_in.q - z) + z_in.gamma / rho);
        let closed = z_in.argmin().expect("finite energy");
        out[2].record(closed, bisect_min(deriv, 0.0));
        out[2].record_projection(closed, deriv(0.0), rho);

        let a_in = FlowDiffInputs {
            rho,
            r_own: rng.gen_range(0.0..5.0),
            r_rev: rng.gen_range(0.0..5.0),
            lambda_own: val(&mut rng),
            others: val(&mut rng),
            gen_rate: rng.gen_range(0.0..2.0),
            mu: val(&mut rng),
        };
        let deriv = |a: f64| {
            let link = a_in.r_own - a_in.r_rev - a + a_in.lambda_own / rho;
            let node = a + a_in.others - a_in.gen_rate + a_in.mu / rho;
            rho * (node - link)
        };
        out[3].record(a_in.argmin(), bisect_min(deriv, f64::NEG_INFINITY));
    }
    out
}
