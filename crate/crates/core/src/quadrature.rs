//! Gauss-Legendre rules and their tensor products.

use crate::mesh::CellGeometry;
use crate::{Error, Result};

pub const MAX_POINTS: usize = 32;

/// Points per direction used for assembly and error integrals at degree `k`.
pub fn default_order(k: usize) -> usize {
    k + 6
}

/// One-dimensional rule on `[-1, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct QuadRule1D {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl QuadRule1D {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&t, &w)| w * f(t)).sum()
    }
}

/// `(P_n(t), P_n'(t))` by the three-term recurrence.
fn legendre_with_derivative(n: usize, t: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p0, mut p1) = (1.0, t);
    for m in 2..=n {
        let m = m as f64;
        let p2 = ((2.0 * m - 1.0) * t * p1 - (m - 1.0) * p0) / m;
        p0 = p1;
        p1 = p2;
    }
    let n_f = n as f64;
    let dp = if (1.0 - t * t).abs() < 1e-300 {
        // endpoint limit P_n'(+-1) = (+-1)^(n+1) n(n+1)/2
        t.signum().powi(n as i32 + 1) * n_f * (n_f + 1.0) / 2.0
    } else {
        n_f * (p0 - t * p1) / (1.0 - t * t)
    };
    (p1, dp)
}

/// Value of the Legendre polynomial `P_n` at `t`.
pub fn legendre(n: usize, t: f64) -> f64 {
    legendre_with_derivative(n, t).0
}

/// Gauss-Legendre rule with `n` nodes; exact for degree `2n - 1`.
pub fn gauss_legendre(n: usize) -> Result<QuadRule1D> {
    if n == 0 || n > MAX_POINTS {
        return Err(Error::QuadratureOrder(n));
    }
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, t);
            let step = p / dp;
            t -= step;
            if step.abs() <= 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, t);
        let w = 2.0 / ((1.0 - t * t) * dp * dp);
        nodes[i] = -t;
        nodes[n - 1 - i] = t;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Ok(QuadRule1D { nodes, weights })
}

/// Gauss-Lobatto rule with `n >= 2` nodes including both endpoints.
pub fn gauss_lobatto(n: usize) -> Result<QuadRule1D> {
    if !(2..=MAX_POINTS).contains(&n) {
        return Err(Error::QuadratureOrder(n));
    }
    let m = n - 1;
    let mf = m as f64;
    let mut nodes = vec![0.0; n];
    nodes[0] = -1.0;
    nodes[m] = 1.0;
    // interior nodes are the roots of P_m'
    for i in 1..=(m / 2) {
        let mut t = (std::f64::consts::PI * i as f64 / mf).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(m, t);
            let ddp = (2.0 * t * dp - mf * (mf + 1.0) * p) / (1.0 - t * t);
            let step = dp / ddp;
            t -= step;
            if step.abs() <= 1e-15 {
                break;
            }
        }
        nodes[i] = -t;
        nodes[m - i] = t;
    }
    if n % 2 == 1 {
        nodes[m / 2] = 0.0;
    }
    let weights = nodes
        .iter()
        .map(|&t| {
            let p = legendre(m, t);
            2.0 / (mf * (mf + 1.0) * p * p)
        })
        .collect();
    Ok(QuadRule1D { nodes, weights })
}

/// Tensor-product rule on the reference square.
#[derive(Clone, Debug)]
pub struct TensorRule {
    pub points: Vec<(f64, f64)>,
    pub weights: Vec<f64>,
}

impl TensorRule {
    pub fn new(n: usize) -> Result<Self> {
        let r = gauss_legendre(n)?;
        let mut points = Vec::with_capacity(n * n);
        let mut weights = Vec::with_capacity(n * n);
        for (&eta, &wy) in r.nodes.iter().zip(&r.weights) {
            for (&xi, &wx) in r.nodes.iter().zip(&r.weights) {
                points.push((xi, eta));
                weights.push(wx * wy);
            }
        }
        Ok(Self { points, weights })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Tensor Gauss approximation of `int_cell f`, exact for `Q(2n-1, 2n-1)`.
pub fn integrate_on_cell(geom: &CellGeometry, f: impl Fn(f64, f64) -> f64, n: usize) -> Result<f64> {
    let r = gauss_legendre(n)?;
    let det = geom.jacobian_det();
    let mut total = 0.0;
    for (&eta, &wy) in r.nodes.iter().zip(&r.weights) {
        for (&xi, &wx) in r.nodes.iter().zip(&r.weights) {
            let (x, y) = geom.map(xi, eta);
            total += wx * wy * f(x, y);
        }
    }
    Ok(total * det)
}
