//! Quadrature on the reference cell, the mean-value decomposition and the
//! positivity point set `S_K`. Nodes live in `[-1/2, 1/2]`, weights sum to 1.

use super::basis::{scalar_derivatives, scalar_values, DgBasis, MAX_MAG, MAX_SCALAR};
use crate::error::{Error, Result};

/// Gauss-Legendre nodes and normalized weights for `n` in {1, 2, 3, 5}.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w): (Vec<f64>, Vec<f64>) = match n {
        1 => (vec![0.0], vec![2.0]),
        2 => {
            let a = 1.0 / 3f64.sqrt();
            (vec![-a, a], vec![1.0, 1.0])
        }
        3 => {
            let a = (0.6f64).sqrt();
            (vec![-a, 0.0, a], vec![5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0])
        }
        5 => {
            let a = (5.0 - 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let b = (5.0 + 2.0 * (10.0f64 / 7.0).sqrt()).sqrt() / 3.0;
            let wa = (322.0 + 13.0 * 70f64.sqrt()) / 900.0;
            let wb = (322.0 - 13.0 * 70f64.sqrt()) / 900.0;
            (vec![-b, -a, 0.0, a, b], vec![wb, wa, 128.0 / 225.0, wa, wb])
        }
        _ => panic!("no Gauss-Legendre table for n = {n}"),
    };
    (
        x.iter().map(|v| 0.5 * v).collect(),
        w.iter().map(|v| 0.5 * v).collect(),
    )
}

/// Gauss-Lobatto nodes and normalized weights for `n` in {2, 3}.
pub fn gauss_lobatto(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        2 => (vec![-0.5, 0.5], vec![0.5, 0.5]),
        3 => (vec![-0.5, 0.0, 0.5], vec![1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0]),
        _ => panic!("no Gauss-Lobatto table for n = {n}"),
    }
}

/// Cell edges with outward normals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

impl Edge {
    pub const ALL: [Edge; 4] = [Edge::Left, Edge::Right, Edge::Bottom, Edge::Top];

    pub fn index(self) -> usize {
        self as usize
    }

    /// Outward unit normal.
    pub fn normal(self) -> [f64; 2] {
        match self {
            Edge::Left => [-1.0, 0.0],
            Edge::Right => [1.0, 0.0],
            Edge::Bottom => [0.0, -1.0],
            Edge::Top => [0.0, 1.0],
        }
    }

    /// Axis of the normal: 0 for vertical edges, 1 for horizontal ones.
    pub fn axis(self) -> usize {
        match self {
            Edge::Left | Edge::Right => 0,
            Edge::Bottom | Edge::Top => 1,
        }
    }

    /// Sign of the outward normal along its axis.
    pub fn sign(self) -> f64 {
        match self {
            Edge::Left | Edge::Bottom => -1.0,
            Edge::Right | Edge::Top => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Edge::Left => "left edge",
            Edge::Right => "right edge",
            Edge::Bottom => "bottom edge",
            Edge::Top => "top edge",
        }
    }

    /// Reference coordinates of the q-th edge node given a 1D node `s`.
    fn point(self, s: f64) -> (f64, f64) {
        match self {
            Edge::Left => (-0.5, s),
            Edge::Right => (0.5, s),
            Edge::Bottom => (s, -0.5),
            Edge::Top => (s, 0.5),
        }
    }
}

/// Basis values (and physical gradients) tabulated at one reference point.
#[derive(Debug, Clone, Copy)]
pub struct PointTable {
    pub xi: f64,
    pub eta: f64,
    pub phi: [f64; MAX_SCALAR],
    pub b1: [f64; MAX_MAG],
    pub b2: [f64; MAX_MAG],
    pub dphi: [[f64; MAX_SCALAR]; 2],
    pub db1: [[f64; MAX_MAG]; 2],
    pub db2: [[f64; MAX_MAG]; 2],
}

impl PointTable {
    pub fn new(basis: &DgBasis, xi: f64, eta: f64) -> Self {
        let phi = scalar_values(xi, eta);
        let (b1, b2) = basis.mag_values(&phi);
        let (dxi, deta) = scalar_derivatives(xi, eta);
        let mut dphi = [[0.0; MAX_SCALAR]; 2];
        for a in 0..MAX_SCALAR {
            dphi[0][a] = dxi[a] / basis.dx;
            dphi[1][a] = deta[a] / basis.dy;
        }
        let (db1x, db2x) = basis.mag_values(&dphi[0]);
        let (db1y, db2y) = basis.mag_values(&dphi[1]);
        Self {
            xi,
            eta,
            phi,
            b1,
            b2,
            dphi,
            db1: [db1x, db1y],
            db2: [db2x, db2y],
        }
    }
}

#[derive(Debug, Clone)]
pub struct QuadratureSet {
    /// Gauss points per edge / per direction.
    pub q: usize,
    /// Gauss-Lobatto points per direction in the decomposition.
    pub l: usize,
    pub gauss_nodes: Vec<f64>,
    pub gauss_weights: Vec<f64>,
    pub lobatto_nodes: Vec<f64>,
    pub lobatto_weights: Vec<f64>,
    /// First Gauss-Lobatto weight, `1 / (L (L - 1))`.
    pub omega_hat1: f64,
    /// Edge Gauss points, indexed by `Edge::index()` then node.
    pub edge: [Vec<PointTable>; 4],
    /// Decomposition weights of the edge points, same layout as `edge`.
    pub edge_decomp: [Vec<f64>; 4],
    /// Interior Gauss-Lobatto line points of the decomposition.
    pub lines: Vec<PointTable>,
    pub line_decomp: Vec<f64>,
    /// Tensor Gauss rule used for the volume integral.
    pub interior: Vec<PointTable>,
    pub interior_weights: Vec<f64>,
    /// Five-point tensor rule for projection and error norms.
    pub fine: Vec<PointTable>,
    pub fine_weights: Vec<f64>,
    /// The positivity point set: edge points, line points, interior points.
    pub sk: Vec<PointTable>,
}

impl QuadratureSet {
    pub fn new(basis: &DgBasis) -> Result<Self> {
        let k = basis.k;
        if k > 2 {
            return Err(Error::UnsupportedDegree(k));
        }
        let q = k + 1;
        let l = 2usize.max((k + 4) / 2);
        let (gauss_nodes, gauss_weights) = gauss_legendre(q);
        let (lobatto_nodes, lobatto_weights) = gauss_lobatto(l);
        let omega_hat1 = 1.0 / (l * (l - 1)) as f64;
        if (lobatto_weights[0] - omega_hat1).abs() > 1e-15 {
            return Err(Error::Domain("Gauss-Lobatto end weight mismatch".into()));
        }
        let (dx, dy) = (basis.dx, basis.dy);
        let fx = dx / (dx + dy);
        let fy = dy / (dx + dy);

        let edge: [Vec<PointTable>; 4] = Edge::ALL.map(|e| {
            gauss_nodes
                .iter()
                .map(|&s| {
                    let (xi, eta) = e.point(s);
                    PointTable::new(basis, xi, eta)
                })
                .collect()
        });
        let edge_decomp: [Vec<f64>; 4] = Edge::ALL.map(|e| {
            let f = if e.axis() == 1 { fx } else { fy };
            gauss_weights.iter().map(|w| f * omega_hat1 * w).collect()
        });

        let mut lines = Vec::new();
        let mut line_decomp = Vec::new();
        for mu in 1..l - 1 {
            for (qi, &s) in gauss_nodes.iter().enumerate() {
                lines.push(PointTable::new(basis, s, lobatto_nodes[mu]));
                line_decomp.push(fx * lobatto_weights[mu] * gauss_weights[qi]);
            }
        }
        for mu in 1..l - 1 {
            for (qi, &s) in gauss_nodes.iter().enumerate() {
                lines.push(PointTable::new(basis, lobatto_nodes[mu], s));
                line_decomp.push(fy * lobatto_weights[mu] * gauss_weights[qi]);
            }
        }

        let (interior, interior_weights) = tensor(basis, &gauss_nodes, &gauss_weights);
        let (fn_, fw) = gauss_legendre(5);
        let (fine, fine_weights) = tensor(basis, &fn_, &fw);

        let mut sk: Vec<PointTable> = edge.iter().flatten().copied().collect();
        sk.extend(lines.iter().copied());
        sk.extend(interior.iter().copied());

        let set = Self {
            q,
            l,
            gauss_nodes,
            gauss_weights,
            lobatto_nodes,
            lobatto_weights,
            omega_hat1,
            edge,
            edge_decomp,
            lines,
            line_decomp,
            interior,
            interior_weights,
            fine,
            fine_weights,
            sk,
        };
        let total = set.decomposition_total();
        if (total - 1.0).abs() > 1e-14
            || set
                .edge_decomp
                .iter()
                .flatten()
                .chain(&set.line_decomp)
                .any(|w| *w <= 0.0)
        {
            return Err(Error::Domain(format!(
                "decomposition weights invalid (sum {total})"
            )));
        }
        Ok(set)
    }

    pub fn decomposition_total(&self) -> f64 {
        self.edge_decomp.iter().flatten().sum::<f64>() + self.line_decomp.iter().sum::<f64>()
    }

    /// Number of edge points in `S_K` (they come first).
    pub fn n_edge_points(&self) -> usize {
        4 * self.q
    }
}

fn tensor(basis: &DgBasis, nodes: &[f64], weights: &[f64]) -> (Vec<PointTable>, Vec<f64>) {
    let mut pts = Vec::new();
    let mut w = Vec::new();
    for (jy, &y) in nodes.iter().enumerate() {
        for (jx, &x) in nodes.iter().enumerate() {
            pts.push(PointTable::new(basis, x, y));
            w.push(weights[jx] * weights[jy]);
        }
    }
    (pts, w)
}
