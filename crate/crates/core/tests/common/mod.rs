//! Independent dense oracles shared by the integration tests.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sdc_core::collocation::NodeState;
use sdc_core::preconditioner::build_preconditioner;
use sdc_core::problems::SecondOrderIvp;
use sdc_core::quadrature::{NodeFamily, QuadratureRule};

/// A random linear force `f = Ax x + Av v` with a step size small enough for the
/// sweep to contract.
pub struct LinearCase {
    pub family: NodeFamily,
    pub m: usize,
    pub d: usize,
    pub ax: DMatrix<f64>,
    pub av: DMatrix<f64>,
    pub dt: f64,
    pub x0: Vec<f64>,
    pub v0: Vec<f64>,
}

impl LinearCase {
    pub fn random(rng: &mut ChaCha8Rng) -> Self {
        let family = NodeFamily::ALL[rng.random_range(0..4)];
        let m = rng.random_range(family.min_nodes().max(1)..=5);
        let d = rng.random_range(1..=3);
        let ax = DMatrix::from_fn(d, d, |_, _| rng.random_range(-2.0..=2.0));
        let av = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..=1.0));
        let dt = rng.random_range(0.02..=0.2);
        let x0 = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let v0 = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self { family, m, d, ax, av, dt, x0, v0 }
    }

    pub fn seeded(seed: u64) -> Self {
        Self::random(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn rule(&self) -> QuadratureRule {
        QuadratureRule::new(self.family, self.m).unwrap()
    }

    pub fn problem(&self) -> SecondOrderIvp {
        SecondOrderIvp::linear(self.ax.clone(), self.av.clone()).unwrap()
    }

    /// A state with the initial value at node 0 and random values elsewhere.
    pub fn random_state(&self, rng: &mut ChaCha8Rng) -> NodeState {
        let mut s = NodeState::copy_initial(self.m, &self.x0, &self.v0);
        for k in self.d..s.x.len() {
            s.x[k] = rng.random_range(-1.0..=1.0);
            s.v[k] = rng.random_range(-1.0..=1.0);
        }
        s
    }
}

/// `kron(a, I_d)`.
fn kron_identity(a: &DMatrix<f64>, d: usize) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows() * d, a.ncols() * d, |r, c| {
        if r % d == c % d {
            a[(r / d, c / d)]
        } else {
            0.0
        }
    })
}

/// Dense operators of one step on the stacked vector `[X; V]`.
pub struct DenseOperators {
    /// `F`, mapping `[X; V]` to the node forces.
    pub f: DMatrix<f64>,
    /// `dt^2 QQ` over `dt Q`.
    pub q_coll: DMatrix<f64>,
    /// `dt^2 Qx` over `dt QT`.
    pub q_vv: DMatrix<f64>,
    /// `C_coll U_0`: `x0 + dt tau_m v0`, `v0` at every node.
    pub c_u0: DVector<f64>,
}

impl DenseOperators {
    pub fn new(case: &LinearCase) -> Self {
        let rule = case.rule();
        let pre = build_preconditioner(&rule);
        let (d, dt) = (case.d, case.dt);
        let n = (case.m + 1) * d;
        let mut f = DMatrix::zeros(n, 2 * n);
        for j in 0..=case.m {
            for i in 0..d {
                for k in 0..d {
                    f[(j * d + i, j * d + k)] = case.ax[(i, k)];
                    f[(j * d + i, n + j * d + k)] = case.av[(i, k)];
                }
            }
        }
        let stack = |top: &DMatrix<f64>, bottom: &DMatrix<f64>| {
            let mut s = DMatrix::zeros(2 * n, n);
            s.rows_mut(0, n).copy_from(&(kron_identity(top, d) * (dt * dt)));
            s.rows_mut(n, n).copy_from(&(kron_identity(bottom, d) * dt));
            s
        };
        let q_coll = stack(&rule.qq, &rule.q);
        let q_vv = stack(&pre.qx, &pre.qt);
        let mut c_u0 = DVector::zeros(2 * n);
        for j in 0..=case.m {
            for i in 0..d {
                c_u0[j * d + i] = case.x0[i] + dt * rule.tau(j) * case.v0[i];
                c_u0[n + j * d + i] = case.v0[i];
            }
        }
        Self { f, q_coll, q_vv, c_u0 }
    }

    pub fn dim(&self) -> usize {
        self.f.ncols()
    }

    /// `M_vv = I - Q_vv F`.
    pub fn m_vv(&self) -> DMatrix<f64> {
        DMatrix::identity(self.dim(), self.dim()) - &self.q_vv * &self.f
    }

    /// `K_sdc = M_vv^{-1} (Q_coll - Q_vv) F`.
    pub fn k_sdc(&self) -> DMatrix<f64> {
        self.m_vv().lu().solve(&((&self.q_coll - &self.q_vv) * &self.f)).unwrap()
    }

    /// `K_sdc U + M_vv^{-1} C_coll U_0`.
    pub fn sweep(&self, u: &DVector<f64>) -> DVector<f64> {
        let rhs = (&self.q_coll - &self.q_vv) * &self.f * u + &self.c_u0;
        self.m_vv().lu().solve(&rhs).unwrap()
    }

    /// The collocation solution `(I - Q_coll F)^{-1} C_coll U_0`.
    pub fn collocation(&self) -> DVector<f64> {
        let a = DMatrix::identity(self.dim(), self.dim()) - &self.q_coll * &self.f;
        a.lu().solve(&self.c_u0).unwrap()
    }
}

pub fn stacked(s: &NodeState) -> DVector<f64> {
    DVector::from_iterator(s.x.len() * 2, s.x.iter().chain(&s.v).copied())
}

pub fn unstacked(u: &DVector<f64>, nodes: usize, dim: usize) -> NodeState {
    let n = (nodes + 1) * dim;
    let mut s = NodeState::zeros(nodes, dim);
    s.x.copy_from_slice(u.rows(0, n).as_slice());
    s.v.copy_from_slice(u.rows(n, n).as_slice());
    s
}

/// Classical RK4 on `(x, v)' = (v, f(x, v))` with `n` equal steps.
pub fn rk4_reference(problem: &SecondOrderIvp, x0: &[f64], v0: &[f64], t: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = t / n as f64;
    let d = x0.len();
    let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
    let axpy = |a: &[f64], s: f64, b: &[f64]| a.iter().zip(b).map(|(p, q)| p + s * q).collect::<Vec<f64>>();
    for _ in 0..n {
        let k1x = v.clone();
        let k1v = problem.force_vec(&x, &v);
        let (x2, v2) = (axpy(&x, h / 2.0, &k1x), axpy(&v, h / 2.0, &k1v));
        let k2v = problem.force_vec(&x2, &v2);
        let k2x = v2;
        let (x3, v3) = (axpy(&x, h / 2.0, &k2x), axpy(&v, h / 2.0, &k2v));
        let k3v = problem.force_vec(&x3, &v3);
        let k3x = v3;
        let (x4, v4) = (axpy(&x, h, &k3x), axpy(&v, h, &k3v));
        let k4v = problem.force_vec(&x4, &v4);
        let k4x = v4;
        for i in 0..d {
            x[i] += h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i]);
            v[i] += h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i]);
        }
    }
    (x, v)
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

pub fn max_rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().map(|x| x.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    max_abs_diff(a, b) / scale
}
