//! Sensor network topology and first-order radio energy model.
//!
//! Node 0 is always the sink. Sensors are placed uniformly in a disk centred
//! at the origin and linked under a unit-disk rule: two nodes share a
//! bidirectional link iff their distance is at most `comm_range`.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Index of the sink node.
pub const SINK: usize = 0;

/// Relative tolerance used when revalidating stored distances and costs.
const STORED_VALUE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensorNode {
    pub id: usize,
    pub position: Point,
    /// Initial battery energy. `f64::INFINITY` for the sink.
    pub energy: f64,
    /// Data generation rate. For the sink this is minus the total sensor rate.
    pub gen_rate: f64,
}

impl SensorNode {
    pub fn is_sink(&self) -> bool {
        self.id == SINK
    }
}

/// Undirected link, stored once with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub distance: f64,
    pub cost: f64,
}

/// Electronics term `alpha` (energy/bit) and free-space amplifier term
/// `beta` (energy/bit/length²).
///
/// The default keeps the cost spread `C_max / C_min` near 2.6 at the
/// default 40-unit range. Wider spreads make the distributed solver
/// markedly less reliable.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioParams {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            beta: 0.0005,
        }
    }
}

/// Per-bit transmission cost over a link of length `distance`.
pub fn edge_cost(alpha: f64, beta: f64, distance: f64) -> f64 {
    alpha + beta * distance * distance
}

/// One entry of a node's neighbour list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    /// Index into [`Topology::edges`].
    pub edge: usize,
    pub cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SinkPlacement {
    #[default]
    Center,
    Random,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopologyParams {
    pub sensors: usize,
    pub radius: f64,
    pub comm_range: f64,
    pub sink: SinkPlacement,
    pub seed: u64,
    pub radio: RadioParams,
    pub energy: f64,
    pub gen_rate: f64,
    pub max_attempts: u32,
}

impl Default for TopologyParams {
    fn default() -> Self {
        Self {
            sensors: 15,
            radius: 100.0,
            comm_range: 40.0,
            sink: SinkPlacement::Center,
            seed: 0,
            radio: RadioParams::default(),
            energy: 1.0,
            gen_rate: 1.0,
            max_attempts: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    nodes: Vec<SensorNode>,
    edges: Vec<Edge>,
    radio: RadioParams,
    radius: f64,
    comm_range: f64,
    seed: Option<u64>,
    attempts: u32,
    adjacency: Vec<Vec<Neighbor>>,
}

impl Topology {
    /// Samples a connected random topology. Positions are redrawn from a
    /// per-attempt stream of the seeded generator until the unit-disk graph
    /// is connected or `max_attempts` is exhausted.
    pub fn generate(params: &TopologyParams) -> Result<Self> {
        if params.sensors == 0 {
            return Err(Error::InvalidParam("network needs at least one sensor".into()));
        }
        positive("radius", params.radius)?;
        positive("comm_range", params.comm_range)?;
        positive("energy", params.energy)?;
        non_negative("gen_rate", params.gen_rate)?;
        non_negative("alpha", params.radio.alpha)?;
        non_negative("beta", params.radio.beta)?;
        if params.max_attempts == 0 {
            return Err(Error::InvalidParam("max_attempts must be at least 1".into()));
        }

        for attempt in 0..params.max_attempts {
            let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
            rng.set_stream(u64::from(attempt));

            let sink_pos = match params.sink {
                SinkPlacement::Center => Point::new(0.0, 0.0),
                SinkPlacement::Random => sample_disk(&mut rng, params.radius),
            };
            let mut nodes = Vec::with_capacity(params.sensors + 1);
            nodes.push(SensorNode {
                id: SINK,
                position: sink_pos,
                energy: f64::INFINITY,
                gen_rate: 0.0,
            });
            for id in 1..=params.sensors {
                nodes.push(SensorNode {
                    id,
                    position: sample_disk(&mut rng, params.radius),
                    energy: params.energy,
                    gen_rate: params.gen_rate,
                });
            }
            balance_sink(&mut nodes);

            let links = unit_disk_links(&nodes, params.comm_range);
            let adjacency = build_adjacency(nodes.len(), &links);
            if is_connected(&adjacency) {
                let mut topo = Self::assemble(
                    nodes,
                    &links,
                    params.radio,
                    params.radius,
                    params.comm_range,
                )?;
                topo.seed = Some(params.seed);
                topo.attempts = attempt + 1;
                return Ok(topo);
            }
        }
        Err(Error::ConnectivityFailure {
            attempts: params.max_attempts,
        })
    }

    /// Builds a topology from explicit node positions using the unit-disk rule.
    /// The sink generation rate is recomputed from the sensors.
    pub fn from_nodes(
        nodes: Vec<SensorNode>,
        radio: RadioParams,
        radius: f64,
        comm_range: f64,
    ) -> Result<Self> {
        positive("comm_range", comm_range)?;
        let mut nodes = nodes;
        balance_sink(&mut nodes);
        let links = unit_disk_links(&nodes, comm_range);
        Self::assemble(nodes, &links, radio, radius, comm_range)
    }

    /// Builds a topology from explicit node positions and an explicit link
    /// list. `comm_range` is set to the longest link.
    pub fn with_links(
        nodes: Vec<SensorNode>,
        links: &[(usize, usize)],
        radio: RadioParams,
        radius: f64,
    ) -> Result<Self> {
        let mut nodes = nodes;
        balance_sink(&mut nodes);
        let mut normalized = Vec::with_capacity(links.len());
        for &(a, b) in links {
            if a == b {
                return Err(Error::MalformedTopology(format!("self-loop at node {a}")));
            }
            if a >= nodes.len() || b >= nodes.len() {
                return Err(Error::MalformedTopology(format!("link ({a}, {b}) out of range")));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        if normalized.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::MalformedTopology("duplicate link".into()));
        }
        let comm_range = normalized
            .iter()
            .map(|&(a, b)| nodes[a].position.distance(&nodes[b].position))
            .fold(0.0, f64::max);
        Self::assemble(nodes, &normalized, radio, radius, comm_range)
    }

    fn assemble(
        nodes: Vec<SensorNode>,
        links: &[(usize, usize)],
        radio: RadioParams,
        radius: f64,
        comm_range: f64,
    ) -> Result<Self> {
        positive("radius", radius)?;
        non_negative("alpha", radio.alpha)?;
        non_negative("beta", radio.beta)?;
        if nodes.len() < 2 {
            return Err(Error::InvalidParam("network needs a sink and at least one sensor".into()));
        }
        for (idx, node) in nodes.iter().enumerate() {
            if node.id != idx {
                return Err(Error::MalformedTopology(format!(
                    "node at position {idx} has id {}",
                    node.id
                )));
            }
            if !node.position.x.is_finite() || !node.position.y.is_finite() {
                return Err(Error::MalformedTopology(format!("node {idx} has a non-finite position")));
            }
            if node.position.norm() > radius * (1.0 + STORED_VALUE_TOL) {
                return Err(Error::MalformedTopology(format!("node {idx} lies outside the deployment disk")));
            }
            if idx != SINK {
                if !(node.energy > 0.0 && node.energy.is_finite()) {
                    return Err(Error::MalformedTopology(format!("sensor {idx} needs finite positive energy")));
                }
                if !(node.gen_rate >= 0.0 && node.gen_rate.is_finite()) {
                    return Err(Error::MalformedTopology(format!("sensor {idx} needs a non-negative rate")));
                }
            }
        }

        let edges: Vec<Edge> = links
            .iter()
            .map(|&(i, j)| {
                let distance = nodes[i].position.distance(&nodes[j].position);
                Edge {
                    i,
                    j,
                    distance,
                    cost: edge_cost(radio.alpha, radio.beta, distance),
                }
            })
            .collect();
        let adjacency = build_adjacency(nodes.len(), links)
            .into_iter()
            .map(|list| {
                list.into_iter()
                    .map(|(id, edge)| Neighbor {
                        id,
                        edge,
                        cost: edges[edge].cost,
                    })
                    .collect()
            })
            .collect::<Vec<Vec<Neighbor>>>();
        let topo = Self {
            nodes,
            edges,
            radio,
            radius,
            comm_range,
            seed: None,
            attempts: 1,
            adjacency,
        };
        if !is_connected(&topo.neighbor_ids()) {
            return Err(Error::MalformedTopology("graph is not connected".into()));
        }
        Ok(topo)
    }

    fn neighbor_ids(&self) -> Vec<Vec<(usize, usize)>> {
        self.adjacency
            .iter()
            .map(|l| l.iter().map(|n| (n.id, n.edge)).collect())
            .collect()
    }

    pub fn nodes(&self) -> &[SensorNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &SensorNode {
        &self.nodes[id]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn sensor_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn radio(&self) -> RadioParams {
        self.radio
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn comm_range(&self) -> f64 {
        self.comm_range
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    /// Number of placements drawn before a connected one was found.
    pub fn attempts(&self) -> u32 {
        self.attempts
    }

    /// Neighbours of `i` in ascending id order.
    pub fn neighbors(&self, i: usize) -> &[Neighbor] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Neighbours with a smaller id.
    pub fn predecessors(&self, i: usize) -> impl Iterator<Item = &Neighbor> {
        self.adjacency[i].iter().filter(move |n| n.id < i)
    }

    /// Neighbours with a larger id.
    pub fn successors(&self, i: usize) -> impl Iterator<Item = &Neighbor> {
        self.adjacency[i].iter().filter(move |n| n.id > i)
    }

    /// Cost of the link between `i` and `j`, if any.
    pub fn cost(&self, i: usize, j: usize) -> Option<f64> {
        self.adjacency[i].iter().find(|n| n.id == j).map(|n| n.cost)
    }

    pub fn total_generation(&self) -> f64 {
        self.nodes[1..].iter().map(|n| n.gen_rate).sum()
    }

    /// Returns a copy with every sensor's energy multiplied by `factor`.
    pub fn scale_energy(&self, factor: f64) -> Self {
        let mut scaled = self.clone();
        for node in scaled.nodes.iter_mut().skip(1) {
            node.energy *= factor;
        }
        scaled
    }

    /// Returns a copy with every sensor's generation rate set to `rate`.
    pub fn with_uniform_rate(&self, rate: f64) -> Self {
        let mut out = self.clone();
        for node in out.nodes.iter_mut().skip(1) {
            node.gen_rate = rate;
        }
        balance_sink(&mut out.nodes);
        out
    }

    /// Returns a copy with one extra link, or `None` if the link exists.
    pub fn with_extra_link(&self, a: usize, b: usize) -> Result<Option<Self>> {
        if self.cost(a, b).is_some() {
            return Ok(None);
        }
        let mut links: Vec<(usize, usize)> = self.edges.iter().map(|e| (e.i, e.j)).collect();
        links.push((a.min(b), a.max(b)));
        links.sort_unstable();
        let mut topo = Self::assemble(self.nodes.clone(), &links, self.radio, self.radius, self.comm_range)?;
        topo.comm_range = topo.comm_range.max(self.nodes[a].position.distance(&self.nodes[b].position));
        topo.seed = self.seed;
        Ok(Some(topo))
    }

    pub fn to_file(&self) -> TopologyFile {
        TopologyFile {
            alpha: self.radio.alpha,
            beta: self.radio.beta,
            radius: self.radius,
            comm_range: self.comm_range,
            seed: self.seed,
            nodes: self
                .nodes
                .iter()
                .map(|n| NodeRecord {
                    id: n.id,
                    x: n.position.x,
                    y: n.position.y,
                    e: if n.energy.is_finite() { Some(n.energy) } else { None },
                    g: n.gen_rate,
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeRecord {
                    i: e.i,
                    j: e.j,
                    d: e.distance,
                    c: e.cost,
                })
                .collect(),
        }
    }

    /// Rebuilds a topology from its file form, recomputing every derived
    /// value and rejecting files whose stored distances or costs disagree.
    pub fn from_file(file: &TopologyFile) -> Result<Self> {
        let radio = RadioParams {
            alpha: file.alpha,
            beta: file.beta,
        };
        let mut nodes = Vec::with_capacity(file.nodes.len());
        for (idx, rec) in file.nodes.iter().enumerate() {
            if rec.id != idx {
                return Err(Error::MalformedTopology(format!("node ids must be 0..n in order, found {} at {idx}", rec.id)));
            }
            let energy = match (idx, rec.e) {
                (SINK, _) => f64::INFINITY,
                (_, Some(e)) => e,
                (_, None) => {
                    return Err(Error::MalformedTopology(format!("sensor {idx} is missing its energy")));
                }
            };
            nodes.push(SensorNode {
                id: idx,
                position: Point::new(rec.x, rec.y),
                energy,
                gen_rate: rec.g,
            });
        }
        let stored_sink_rate = nodes.first().map(|n| n.gen_rate);
        let links: Vec<(usize, usize)> = file.edges.iter().map(|e| (e.i, e.j)).collect();
        let mut topo = Self::with_links(nodes, &links, radio, file.radius)?;
        if let Some(rate) = stored_sink_rate {
            if !close(rate, topo.nodes[SINK].gen_rate) {
                return Err(Error::MalformedTopology("sink rate does not balance sensor rates".into()));
            }
        }
        for rec in &file.edges {
            let (a, b) = (rec.i.min(rec.j), rec.i.max(rec.j));
            let edge = topo
                .edges
                .iter()
                .find(|e| e.i == a && e.j == b)
                .expect("link was inserted above");
            if !close(rec.d, edge.distance) {
                return Err(Error::MalformedTopology(format!("stored distance of link ({a}, {b}) is inconsistent")));
            }
            if !close(rec.c, edge.cost) {
                return Err(Error::MalformedTopology(format!("stored cost of link ({a}, {b}) is inconsistent")));
            }
        }
        if topo.comm_range > file.comm_range * (1.0 + STORED_VALUE_TOL) {
            return Err(Error::MalformedTopology("a link is longer than comm_range".into()));
        }
        topo.comm_range = file.comm_range;
        topo.seed = file.seed;
        Ok(topo)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("topology file serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: TopologyFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }
}

/// Lifetime of one node given its outgoing rates (paired with link costs).
/// Idle nodes never die, which is reported as `f64::INFINITY`.
pub fn node_lifetime(energy: f64, costs_and_rates: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let drain: f64 = costs_and_rates.into_iter().map(|(c, r)| c * r).sum();
    if drain > 0.0 {
        energy / drain
    } else {
        f64::INFINITY
    }
}

/// Network lifetime: the first sensor to drain its battery. `rates[i]` lists
/// the outgoing rate of node `i` to each neighbour, in neighbour order.
pub fn network_lifetime(topo: &Topology, rates: &[Vec<f64>]) -> f64 {
    (1..topo.node_count())
        .map(|i| {
            let pairs = topo.neighbors(i).iter().zip(&rates[i]).map(|(n, &r)| (n.cost, r));
            node_lifetime(topo.node(i).energy, pairs)
        })
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeRecord {
    pub id: usize,
    pub x: f64,
    pub y: f64,
    /// `null` for the sink.
    pub e: Option<f64>,
    pub g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeRecord {
    pub i: usize,
    pub j: usize,
    pub d: f64,
    pub c: f64,
}

/// On-disk topology document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyFile {
    pub alpha: f64,
    pub beta: f64,
    pub radius: f64,
    pub comm_range: f64,
    pub seed: Option<u64>,
    pub nodes: Vec<NodeRecord>,
    pub edges: Vec<EdgeRecord>,
}

fn close(stored: f64, computed: f64) -> bool {
    (stored - computed).abs() <= STORED_VALUE_TOL * computed.abs().max(1.0)
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{name} must be positive and finite, got {v}")))
    }
}

fn non_negative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!("{name} must be non-negative and finite, got {v}")))
    }
}

fn sample_disk(rng: &mut ChaCha8Rng, radius: f64) -> Point {
    let r = radius * rng.gen::<f64>().sqrt();
    let theta = std::f64::consts::TAU * rng.gen::<f64>();
    Point::new(r * theta.cos(), r * theta.sin())
}

fn balance_sink(nodes: &mut [SensorNode]) {
    let total: f64 = nodes.iter().skip(1).map(|n| n.gen_rate).sum();
    if let Some(sink) = nodes.first_mut() {
        sink.gen_rate = -total;
        sink.energy = f64::INFINITY;
    }
}

fn unit_disk_links(nodes: &[SensorNode], comm_range: f64) -> Vec<(usize, usize)> {
    let mut links = Vec::new();
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            if nodes[a].position.distance(&nodes[b].position) <= comm_range {
                links.push((a, b));
            }
        }
    }
    links
}

/// Adjacency lists of `(neighbour, edge index)`, sorted by neighbour id.
fn build_adjacency(n: usize, links: &[(usize, usize)]) -> Vec<Vec<(usize, usize)>> {
    let mut adj = vec![Vec::new(); n];
    for (k, &(a, b)) in links.iter().enumerate() {
        adj[a].push((b, k));
        adj[b].push((a, k));
    }
    for list in &mut adj {
        list.sort_unstable();
    }
    adj
}

fn is_connected(adj: &[Vec<(usize, usize)>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut queue = VecDeque::from([SINK]);
    seen[SINK] = true;
    let mut count = 1;
    while let Some(u) = queue.pop_front() {
        for &(v, _) in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                count += 1;
                queue.push_back(v);
            }
        }
    }
    count == adj.len()
}
