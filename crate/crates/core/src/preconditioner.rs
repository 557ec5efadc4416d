//! Velocity-Verlet matrices used as the SDC preconditioner.
//!
//! With spacings `dtau_m = tau_m - tau_{m-1}` the Verlet pass through the nodes reads
//! `X = rhs_x + dt^2 Qx F(U)` and `V = rhs_v + dt QT F(U)`, which is lower triangular
//! and therefore solvable node by node.

use nalgebra::{DMatrix, DVector};

use crate::collocation::NodeState;
use crate::error::{Result, SdcError};
use crate::problems::SecondOrderIvp;
use crate::quadrature::QuadratureRule;

const NODE_SOLVE_TOL: f64 = 1e-13;
const NODE_SOLVE_MAX_ITER: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionerMatrices {
    /// Strictly lower triangular, row m holds dtau_1..dtau_m in columns 0..m-1.
    pub qe: DMatrix<f64>,
    /// `qe` shifted one column right.
    pub qi: DMatrix<f64>,
    pub qt: DMatrix<f64>,
    pub qx: DMatrix<f64>,
    /// Node spacings dtau_1..dtau_M.
    pub dtau: Vec<f64>,
}

impl PreconditionerMatrices {
    pub fn num_nodes(&self) -> usize {
        self.dtau.len()
    }
}

pub fn build_preconditioner(rule: &QuadratureRule) -> PreconditionerMatrices {
    let m = rule.num_nodes();
    let dtau: Vec<f64> = (1..=m).map(|i| rule.tau(i) - rule.tau(i - 1)).collect();
    let mut qe = DMatrix::zeros(m + 1, m + 1);
    let mut qi = DMatrix::zeros(m + 1, m + 1);
    for row in 1..=m {
        for col in 0..row {
            qe[(row, col)] = dtau[col];
            qi[(row, col + 1)] = dtau[col];
        }
    }
    let qt = (&qe + &qi) * 0.5;
    let qx = &qe * &qt + qe.component_mul(&qe) * 0.5;
    PreconditionerMatrices { qe, qi, qt, qx, dtau }
}

/// Solves `v = c + h f(x, v)` for the velocity at one node and returns `(v, f(x, v))`.
///
/// Velocity-free forces need one evaluation. Forces declared affine in `v` are
/// handled with one evaluation of `f(x, 0)` and a dense solve; anything else falls
/// back to fixed-point iteration.
pub(crate) fn solve_node_velocity(
    problem: &SecondOrderIvp,
    x: &[f64],
    c: &[f64],
    h: f64,
    node: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let d = problem.dim();
    if !problem.depends_on_velocity() {
        let f = problem.force_vec(x, c);
        let v = c.iter().zip(&f).map(|(c, f)| c + h * f).collect();
        return Ok((v, f));
    }
    if let Some(b) = problem.velocity_matrix() {
        let a = problem.force_vec(x, &vec![0.0; d]);
        let lhs = DMatrix::identity(d, d) - b * h;
        let rhs = DVector::from_iterator(d, c.iter().zip(&a).map(|(c, a)| c + h * a));
        let v = lhs.lu().solve(&rhs).ok_or(SdcError::NodeSolve {
            node,
            residual: f64::INFINITY,
        })?;
        let f = DVector::from_column_slice(&a) + b * &v;
        return Ok((v.as_slice().to_vec(), f.as_slice().to_vec()));
    }
    let mut v = c.to_vec();
    let mut f = vec![0.0; d];
    let mut residual = f64::INFINITY;
    for _ in 0..NODE_SOLVE_MAX_ITER {
        problem.force(x, &v, &mut f);
        residual = 0.0;
        for i in 0..d {
            let next = c[i] + h * f[i];
            residual = f64::max(residual, (next - v[i]).abs());
            v[i] = next;
        }
        if residual <= NODE_SOLVE_TOL * (1.0 + v.iter().fold(0.0, |a: f64, b| a.max(b.abs()))) {
            problem.force(x, &v, &mut f);
            return Ok((v, f));
        }
    }
    Err(SdcError::NodeSolve { node, residual })
}

/// Solves `U - dt Q_vv F(U) = rhs` node by node.
pub fn verlet_solve(
    problem: &SecondOrderIvp,
    rhs_x: &[f64],
    rhs_v: &[f64],
    dt: f64,
    matrices: &PreconditionerMatrices,
) -> Result<NodeState> {
    verlet_solve_with_forces(problem, rhs_x, rhs_v, dt, matrices, None).map(|(s, _)| s)
}

/// As [`verlet_solve`], also returning the node forces. A known `f0` skips the
/// node-0 evaluation.
pub(crate) fn verlet_solve_with_forces(
    problem: &SecondOrderIvp,
    rhs_x: &[f64],
    rhs_v: &[f64],
    dt: f64,
    matrices: &PreconditionerMatrices,
    f0: Option<&[f64]>,
) -> Result<(NodeState, Vec<f64>)> {
    let d = problem.dim();
    let m = matrices.num_nodes();
    let n = (m + 1) * d;
    if rhs_x.len() != n || rhs_v.len() != n {
        return Err(SdcError::InvalidArgument(format!(
            "right-hand side needs {n} entries, got {} and {}",
            rhs_x.len(),
            rhs_v.len()
        )));
    }
    let mut state = NodeState::zeros(m, d);
    let mut forces = vec![0.0; n];
    state.x[..d].copy_from_slice(&rhs_x[..d]);
    state.v[..d].copy_from_slice(&rhs_v[..d]);
    match f0 {
        Some(f0) => forces[..d].copy_from_slice(f0),
        None => problem.force(&rhs_x[..d], &rhs_v[..d], &mut forces[..d]),
    }
    let dt2 = dt * dt;
    let mut c = vec![0.0; d];
    for node in 1..=m {
        let (lo, hi) = (node * d, (node + 1) * d);
        for i in 0..d {
            let mut xi = rhs_x[lo + i];
            let mut ci = rhs_v[lo + i];
            for l in 0..node {
                let fl = forces[l * d + i];
                xi += dt2 * matrices.qx[(node, l)] * fl;
                ci += dt * matrices.qt[(node, l)] * fl;
            }
            state.x[lo + i] = xi;
            c[i] = ci;
        }
        let h = dt * matrices.qt[(node, node)];
        let (v, f) = solve_node_velocity(problem, &state.x[lo..hi], &c, h, node)?;
        state.v[lo..hi].copy_from_slice(&v);
        forces[lo..hi].copy_from_slice(&f);
    }
    Ok((state, forces))
}
