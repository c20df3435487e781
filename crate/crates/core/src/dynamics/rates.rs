//! The hold-time rate chain and its matrix-exponential solution.
//!
//! `V1_N1` remembers which N=0 state it was excited from, because spontaneous
//! decay mostly returns it there. The chain therefore runs on an expanded node
//! set in which `V1_N1` is split by origin; occupancies are folded back onto
//! the catalog for output.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::params::PhysicsParams;
use crate::state::StateBin;

/// A node of the expanded chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Node {
    Bin(StateBin),
    /// `V1_N1`, excited out of the given N=0 bin.
    V1From(StateBin),
}

impl Node {
    pub fn bin(self) -> StateBin {
        match self {
            Node::Bin(b) => b,
            Node::V1From(_) => StateBin::V1N1,
        }
    }

    pub fn label(self) -> String {
        match self {
            Node::Bin(b) => b.name().to_string(),
            Node::V1From(o) => format!("V1_N1<{}>", o.name()),
        }
    }
}

const V1_ORIGINS: [StateBin; 5] =
    [StateBin::QDown, StateBin::QZero, StateBin::MMinus, StateBin::MPlus, StateBin::Qubit];

/// Occupancy over the catalog, indexed by [`StateBin::index`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Occupancy(pub [f64; 14]);

impl Occupancy {
    pub fn pure(bin: StateBin) -> Self {
        let mut o = [0.0; 14];
        o[bin.index()] = 1.0;
        Occupancy(o)
    }

    pub fn get(&self, bin: StateBin) -> f64 {
        self.0[bin.index()]
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    pub to: Node,
    pub rate: f64,
}

/// Generator of the hold dynamics, `dp/dt = Q p` with `Q[to, from]` the rate.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    nodes: Vec<Node>,
    edges: Vec<Vec<Edge>>,
}

impl RateMatrix {
    pub fn from_params(p: &PhysicsParams) -> Self {
        let mut nodes: Vec<Node> =
            StateBin::ALL.iter().filter(|&&b| b != StateBin::V1N1).map(|&b| Node::Bin(b)).collect();
        nodes.extend(V1_ORIGINS.iter().map(|&o| Node::V1From(o)));

        let bb = &p.blackbody;
        let vac = p.vacuum.gamma_vac;
        let edges = nodes
            .iter()
            .map(|&node| {
                let mut out = Vec::new();
                let mut add = |to: Node, rate: f64| {
                    if rate > 0.0 {
                        out.push(Edge { to, rate });
                    }
                };
                match node {
                    Node::Bin(StateBin::Empty) => {}
                    Node::Bin(b) if b.in_ground_rotational() => add(Node::V1From(b), bb.gamma_01),
                    Node::Bin(b) if b.in_cycling_manifold() => {
                        add(Node::Bin(StateBin::V1Other), bb.gamma_01_detect);
                        add(Node::Bin(StateBin::Sink), p.vacuum.gamma_detect_sink);
                    }
                    Node::Bin(StateBin::N3) => add(Node::Bin(StateBin::Sink), bb.gamma_n3_loss),
                    Node::Bin(StateBin::V1Other) => {
                        add(Node::Bin(StateBin::FRest), bb.gamma_10 * bb.v1_other_to_f_fraction);
                        add(Node::Bin(StateBin::N3), bb.gamma_10 * (1.0 - bb.v1_other_to_f_fraction));
                    }
                    Node::V1From(origin) => {
                        let changed = bb.gamma_10 * (1.0 - bb.v1_return_fraction);
                        add(Node::Bin(origin), bb.gamma_10 * bb.v1_return_fraction);
                        add(Node::Bin(StateBin::N3), changed * bb.v1_changed_to_n3_fraction);
                        add(Node::Bin(StateBin::N2), changed * (1.0 - bb.v1_changed_to_n3_fraction));
                    }
                    Node::Bin(_) => {}
                }
                if node != Node::Bin(StateBin::Empty) {
                    add(Node::Bin(StateBin::Empty), vac);
                }
                out
            })
            .collect();
        RateMatrix { nodes, edges }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    fn position(&self, node: Node) -> usize {
        self.nodes.iter().position(|&n| n == node).expect("node in chain")
    }

    /// Outgoing edges of `node`.
    pub fn edges(&self, node: Node) -> &[Edge] {
        &self.edges[self.position(node)]
    }

    pub fn total_rate(&self, node: Node) -> f64 {
        self.edges(node).iter().map(|e| e.rate).sum()
    }

    /// Dense generator over the expanded nodes.
    pub fn generator(&self) -> DMatrix<f64> {
        let n = self.nodes.len();
        let mut q = DMatrix::zeros(n, n);
        for (from, out) in self.edges.iter().enumerate() {
            for e in out {
                let to = self.position(e.to);
                q[(to, from)] += e.rate;
                q[(from, from)] -= e.rate;
            }
        }
        q
    }

    /// Rates folded onto the catalog, `[from][to]`, for the audit dump.
    /// `V1_N1` outflow is the one for an excitation out of `Q_DOWN`.
    pub fn catalog_rates(&self) -> Vec<(StateBin, StateBin, f64)> {
        let mut out = Vec::new();
        for (i, &node) in self.nodes.iter().enumerate() {
            let from = match node {
                Node::Bin(b) => b,
                Node::V1From(StateBin::QDown) => StateBin::V1N1,
                Node::V1From(_) => continue,
            };
            for e in &self.edges[i] {
                out.push((from, e.to.bin(), e.rate));
            }
        }
        out
    }
}

/// Solve the hold dynamics from `initial` for time `t` by matrix exponential.
///
/// Initial `V1_N1` weight is attributed to an excitation out of `Q_DOWN`.
pub fn master_rates_solve(params: &PhysicsParams, initial: &Occupancy, t: f64) -> Result<Occupancy> {
    if (initial.total() - 1.0).abs() > 1e-9 || initial.0.iter().any(|&x| x < 0.0) {
        return Err(Error::Argument(format!(
            "initial occupancy must be non-negative and sum to 1 (sum = {})",
            initial.total()
        )));
    }
    if !(t >= 0.0) {
        return Err(Error::Argument("solve time must be non-negative".into()));
    }
    let chain = RateMatrix::from_params(params);
    let p0 = DVector::from_iterator(
        chain.nodes.len(),
        chain.nodes.iter().map(|&n| match n {
            Node::Bin(b) => initial.get(b),
            Node::V1From(StateBin::QDown) => initial.get(StateBin::V1N1),
            Node::V1From(_) => 0.0,
        }),
    );
    let pt = (chain.generator() * t).exp() * p0;
    let mut out = [0.0; 14];
    for (i, &n) in chain.nodes.iter().enumerate() {
        out[n.bin().index()] += pt[i].max(0.0);
    }
    let norm: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= norm);
    Ok(Occupancy(out))
}

/// Off-resonant scattering suppression of a state detuned by `delta` from a
/// transition of linewidth `gamma`.
pub fn offres_ratio(gamma: f64, delta: f64) -> f64 {
    9.0 * (gamma / delta).powi(2)
}
