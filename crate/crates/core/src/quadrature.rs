//! Collocation nodes on the unit interval and the integration matrices built on them.
//!
//! All matrices are padded with a leading zero row and column so that index 0
//! refers to the start of the step and indices `1..=M` to the collocation nodes.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdcError};

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeFamily {
    #[serde(rename = "legendre")]
    GaussLegendre,
    #[serde(rename = "lobatto")]
    GaussLobatto,
    /// Right Radau: the last node sits at 1.
    #[serde(rename = "radau")]
    GaussRadau,
    /// Left Radau: the first node sits at 0.
    #[serde(rename = "radau-left")]
    GaussRadauLeft,
}

impl NodeFamily {
    pub const ALL: [NodeFamily; 4] = [
        NodeFamily::GaussLegendre,
        NodeFamily::GaussLobatto,
        NodeFamily::GaussRadau,
        NodeFamily::GaussRadauLeft,
    ];

    pub fn min_nodes(self) -> usize {
        match self {
            NodeFamily::GaussLobatto => 2,
            _ => 1,
        }
    }

    /// Number of orthogonality conditions the nodes satisfy (`p = M + xi`).
    pub fn orthogonality_degree(self, m: usize) -> usize {
        match self {
            NodeFamily::GaussLegendre => m,
            NodeFamily::GaussRadau | NodeFamily::GaussRadauLeft => m.saturating_sub(1),
            NodeFamily::GaussLobatto => m.saturating_sub(2),
        }
    }

    /// Order of the collocation method at the step end.
    pub fn superconvergent_order(self, m: usize) -> usize {
        m + self.orthogonality_degree(m)
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeFamily::GaussLegendre => "legendre",
            NodeFamily::GaussLobatto => "lobatto",
            NodeFamily::GaussRadau => "radau",
            NodeFamily::GaussRadauLeft => "radau-left",
        }
    }
}

impl fmt::Display for NodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NodeFamily {
    type Err = SdcError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "legendre" | "gauss-legendre" | "gauss" => Ok(NodeFamily::GaussLegendre),
            "lobatto" | "gauss-lobatto" => Ok(NodeFamily::GaussLobatto),
            "radau" | "radau-right" | "gauss-radau" => Ok(NodeFamily::GaussRadau),
            "radau-left" => Ok(NodeFamily::GaussRadauLeft),
            other => Err(SdcError::Config(format!("unknown node family '{other}'"))),
        }
    }
}

/// Legendre polynomial and its first derivative at `x` in [-1, 1].
fn legendre(n: usize, x: f64) -> (f64, f64) {
    if n == 0 {
        return (1.0, 0.0);
    }
    let (mut p_prev, mut p) = (1.0, x);
    for k in 2..=n {
        let kf = k as f64;
        let next = ((2.0 * kf - 1.0) * x * p - (kf - 1.0) * p_prev) / kf;
        p_prev = p;
        p = next;
    }
    let nf = n as f64;
    let dp = if (1.0 - x * x).abs() < 1e-300 {
        // endpoint value of P_n'
        let s = if x > 0.0 { 1.0 } else { (-1.0f64).powi(n as i32 - 1) };
        s * nf * (nf + 1.0) / 2.0
    } else {
        nf * (p_prev - x * p) / (1.0 - x * x)
    };
    (p, dp)
}

fn newton<F>(mut x: f64, g: F) -> Option<f64>
where
    F: Fn(f64) -> (f64, f64),
{
    for _ in 0..NEWTON_MAX_ITER {
        let (val, der) = g(x);
        if der == 0.0 || !der.is_finite() {
            return None;
        }
        let dx = val / der;
        x -= dx;
        if dx.abs() <= NEWTON_TOL {
            // one extra polish step, harmless at convergence
            let (val, der) = g(x);
            if der != 0.0 {
                x -= val / der;
            }
            return Some(x);
        }
    }
    None
}

/// Roots on [-1, 1], ascending.
fn reference_nodes(family: NodeFamily, m: usize) -> Option<Vec<f64>> {
    let mut xs = Vec::with_capacity(m);
    match family {
        NodeFamily::GaussLegendre => {
            for i in 0..m {
                let guess = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
                xs.push(newton(guess, |x| legendre(m, x))?);
            }
        }
        NodeFamily::GaussLobatto => {
            xs.push(-1.0);
            xs.push(1.0);
            // interior nodes: roots of P'_{m-1}
            let n = m - 1;
            for i in 1..m - 1 {
                let guess = (PI * i as f64 / n as f64).cos();
                let root = newton(guess, |x| {
                    let (p, dp) = legendre(n, x);
                    let nf = n as f64;
                    let ddp = (2.0 * x * dp - nf * (nf + 1.0) * p) / (1.0 - x * x);
                    (dp, ddp)
                })?;
                xs.push(root);
            }
        }
        NodeFamily::GaussRadau | NodeFamily::GaussRadauLeft => {
            // right Radau: roots of P_m - P_{m-1}; left Radau is its mirror image
            xs.push(1.0);
            for i in 1..m {
                let guess = (2.0 * PI * i as f64 / (2 * m - 1) as f64).cos();
                let root = newton(guess, |x| {
                    let (p, dp) = legendre(m, x);
                    let (q, dq) = legendre(m - 1, x);
                    (p - q, dp - dq)
                })?;
                xs.push(root);
            }
            if family == NodeFamily::GaussRadauLeft {
                for x in xs.iter_mut() {
                    *x = -*x;
                }
            }
        }
    }
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let distinct = xs.windows(2).all(|w| w[1] - w[0] > 1e-10);
    let inside = xs.iter().all(|x| (-1.0..=1.0).contains(x));
    (distinct && inside).then_some(xs)
}

/// Canonical nodes of `family` mapped to [0, 1], ascending.
pub fn generate_nodes(family: NodeFamily, m: usize) -> Result<Vec<f64>> {
    if m < family.min_nodes() {
        return Err(SdcError::UnsupportedNodes { family, nodes: m });
    }
    let xs = reference_nodes(family, m).ok_or(SdcError::NodeConvergence { family, nodes: m })?;
    Ok(xs
        .into_iter()
        .map(|x| (0.5 * (x + 1.0)).clamp(0.0, 1.0))
        .collect())
}

/// Value of the Lagrange basis polynomial `j` of `nodes` at `s`.
pub fn lagrange_basis(nodes: &[f64], j: usize, s: f64) -> f64 {
    nodes
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != j)
        .map(|(_, &t)| (s - t) / (nodes[j] - t))
        .product()
}

/// Integrates `g` over `[a, b]` with the given Gauss-Legendre nodes/weights on [0, 1].
fn integrate_on(a: f64, b: f64, gl: &(Vec<f64>, Vec<f64>), g: impl Fn(f64) -> f64) -> f64 {
    let h = b - a;
    gl.0.iter()
        .zip(&gl.1)
        .map(|(&t, &w)| w * g(a + h * t))
        .sum::<f64>()
        * h
}

/// Gauss-Legendre nodes and weights on [0, 1].
fn gauss_legendre_unit(n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let nodes = generate_nodes(NodeFamily::GaussLegendre, n)?;
    let weights = nodes
        .iter()
        .map(|&t| {
            let x = 2.0 * t - 1.0;
            let (_, dp) = legendre(n, x);
            // standard weight on [-1, 1] halved for [0, 1]
            1.0 / ((1.0 - x * x) * dp * dp)
        })
        .collect();
    Ok((nodes, weights))
}

#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub family: NodeFamily,
    /// Collocation nodes tau_1..tau_M.
    pub nodes: Vec<f64>,
    /// Padded (M+1)x(M+1) integration matrix, entry (m, j) = int_0^{tau_m} l_j.
    pub q: DMatrix<f64>,
    /// Q * Q.
    pub qq: DMatrix<f64>,
    /// End-of-step weights (0, q_1, .., q_M).
    pub weights: DVector<f64>,
    /// weights^T * Q.
    pub weights_q: DVector<f64>,
}

impl QuadratureRule {
    pub fn new(family: NodeFamily, m: usize) -> Result<Self> {
        let nodes = generate_nodes(family, m)?;
        Self::from_nodes(family, nodes)
    }

    pub(crate) fn from_nodes(family: NodeFamily, nodes: Vec<f64>) -> Result<Self> {
        let m = nodes.len();
        // l_j has degree M-1, so ceil(M/2) points are exact; one spare costs nothing
        let gl = gauss_legendre_unit(m / 2 + 1)?;

        let mut q = DMatrix::zeros(m + 1, m + 1);
        let mut weights = DVector::zeros(m + 1);
        for j in 0..m {
            for (row, &tau) in nodes.iter().enumerate() {
                q[(row + 1, j + 1)] = integrate_on(0.0, tau, &gl, |s| lagrange_basis(&nodes, j, s));
            }
            weights[j + 1] = integrate_on(0.0, 1.0, &gl, |s| lagrange_basis(&nodes, j, s));
        }
        let qq = &q * &q;
        let weights_q = q.transpose() * &weights;
        Ok(Self {
            family,
            nodes,
            q,
            qq,
            weights,
            weights_q,
        })
    }

    /// Number of collocation nodes M.
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// tau_m with tau_0 = 0 for the step start.
    pub fn tau(&self, m: usize) -> f64 {
        if m == 0 {
            0.0
        } else {
            self.nodes[m - 1]
        }
    }

    /// Order `p` of the collocation update.
    pub fn order(&self) -> usize {
        self.family.superconvergent_order(self.num_nodes())
    }
}

/// Maximum absolute row sum.
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Shifted Legendre P_2 on [0,1] by brute-force bisection.
    fn bisect_root(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
        for _ in 0..200 {
            let c = 0.5 * (a + b);
            if f(a) * f(c) <= 0.0 {
                b = c;
            } else {
                a = c;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn legendre_two_nodes_match_bisection() {
        let p2 = |s: f64| {
            let x = 2.0 * s - 1.0;
            1.5 * x * x - 0.5
        };
        let lo = bisect_root(p2, 0.0, 0.5);
        let hi = bisect_root(p2, 0.5, 1.0);
        // frozen from the bisection oracle
        assert!((lo - 0.211_324_865_405_187_1).abs() < 1e-15);
        let nodes = generate_nodes(NodeFamily::GaussLegendre, 2).unwrap();
        assert!((nodes[0] - lo).abs() < 1e-14);
        assert!((nodes[1] - hi).abs() < 1e-14);
        assert!((nodes[0] - (0.5 - 3f64.sqrt() / 6.0)).abs() < 1e-15);
    }

    #[test]
    fn trivial_node_sets() {
        assert_eq!(generate_nodes(NodeFamily::GaussLegendre, 1).unwrap(), vec![0.5]);
        assert_eq!(generate_nodes(NodeFamily::GaussLobatto, 2).unwrap(), vec![0.0, 1.0]);
        assert_eq!(generate_nodes(NodeFamily::GaussRadau, 1).unwrap(), vec![1.0]);
        let lob3 = generate_nodes(NodeFamily::GaussLobatto, 3).unwrap();
        assert!((lob3[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn radau_right_two_nodes() {
        // roots of P_2 - P_1 on [-1,1] are 1 and -1/3
        let nodes = generate_nodes(NodeFamily::GaussRadau, 2).unwrap();
        assert!((nodes[0] - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(nodes[1], 1.0);
        let left = generate_nodes(NodeFamily::GaussRadauLeft, 2).unwrap();
        assert_eq!(left[0], 0.0);
        assert!((left[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn unsupported_counts_are_rejected() {
        assert!(matches!(
            generate_nodes(NodeFamily::GaussLobatto, 1),
            Err(SdcError::UnsupportedNodes { .. })
        ));
        assert!(generate_nodes(NodeFamily::GaussLegendre, 0).is_err());
    }

    #[test]
    fn single_node_rule() {
        let rule = QuadratureRule::new(NodeFamily::GaussLegendre, 1).unwrap();
        assert_eq!(rule.q[(0, 0)], 0.0);
        assert!((rule.q[(1, 1)] - 0.5).abs() < 1e-15);
        assert!((rule.weights[1] - 1.0).abs() < 1e-15);
        assert!((rule.weights_q[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn family_round_trips_through_str() {
        for f in NodeFamily::ALL {
            assert_eq!(f.name().parse::<NodeFamily>().unwrap(), f);
        }
        assert!("chebyshev".parse::<NodeFamily>().is_err());
    }

    #[test]
    fn structural_invariants_all_families() {
        for family in NodeFamily::ALL {
            for m in family.min_nodes()..=12 {
                let rule = QuadratureRule::new(family, m).unwrap();
                let n = &rule.nodes;
                assert!(n.windows(2).all(|w| w[0] < w[1]), "{family:?} {m}");
                match family {
                    NodeFamily::GaussLegendre => assert!(n[0] > 0.0 && n[m - 1] < 1.0),
                    NodeFamily::GaussLobatto => assert!(n[0] == 0.0 && n[m - 1] == 1.0),
                    NodeFamily::GaussRadau => assert_eq!(n[m - 1], 1.0),
                    NodeFamily::GaussRadauLeft => assert_eq!(n[0], 0.0),
                }
                for row in 1..=m {
                    let s: f64 = rule.q.row(row).iter().sum();
                    assert!((s - rule.tau(row)).abs() < 1e-12);
                }
                assert!((rule.weights.sum() - 1.0).abs() < 1e-12);
                // (1 - s) l_j(s) has degree m; the identity needs exactness that high.
                let exact_degree = m + family.orthogonality_degree(m) - 1;
                for j in (1..=m).filter(|_| exact_degree >= m) {
                    let expect = rule.weights[j] * (1.0 - rule.tau(j));
                    assert!((rule.weights_q[j] - expect).abs() < 1e-12, "{family:?} {m} {j}");
                }
                assert!(inf_norm(&rule.q) <= 1.0 + 1e-14);
                assert!(inf_norm(&rule.qq) <= 1.0 + 1e-14);
            }
        }
    }

    #[test]
    fn legendre_exactness_degree() {
        for m in 1..=12 {
            let rule = QuadratureRule::new(NodeFamily::GaussLegendre, m).unwrap();
            for r in 0..2 * m {
                let sum: f64 = (1..=m).map(|j| rule.weights[j] * rule.tau(j).powi(r as i32)).sum();
                assert!((sum - 1.0 / (r as f64 + 1.0)).abs() < 1e-12, "m={m} r={r}");
            }
        }
    }
}
