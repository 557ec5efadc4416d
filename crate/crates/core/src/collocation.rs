//! The collocation system `U - dt Q_coll F(U) = C_coll U_0`, its direct and Picard
//! solutions, and the end-of-step quadrature update.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SdcError};
use crate::problems::SecondOrderIvp;
use crate::quadrature::QuadratureRule;
use crate::sdc::{initial_guess_with_forces, InitialGuess, StopRule};

/// Iterates whose infinity norm exceeds this are treated as diverged.
pub const DIVERGENCE_THRESHOLD: f64 = 1e8;

/// Positions and velocities at nodes `0..=M`, node-major (`x[m * d + i]`).
#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub nodes: usize,
    pub dim: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl NodeState {
    pub fn zeros(nodes: usize, dim: usize) -> Self {
        let n = (nodes + 1) * dim;
        Self {
            nodes,
            dim,
            x: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// `(x0, v0)` replicated to every node.
    pub fn copy_initial(nodes: usize, x0: &[f64], v0: &[f64]) -> Self {
        Self {
            nodes,
            dim: x0.len(),
            x: x0.repeat(nodes + 1),
            v: v0.repeat(nodes + 1),
        }
    }

    pub fn node_x(&self, m: usize) -> &[f64] {
        &self.x[m * self.dim..(m + 1) * self.dim]
    }

    pub fn node_v(&self, m: usize) -> &[f64] {
        &self.v[m * self.dim..(m + 1) * self.dim]
    }

    pub fn inf_norm(&self) -> f64 {
        self.x.iter().chain(&self.v).fold(0.0, |a, b| a.max(b.abs()))
    }

    pub fn max_abs_diff(&self, other: &NodeState) -> f64 {
        self.x
            .iter()
            .zip(&other.x)
            .chain(self.v.iter().zip(&other.v))
            .fold(0.0, |a, (p, q)| a.max((p - q).abs()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub x_end: Vec<f64>,
    pub v_end: Vec<f64>,
    pub f_evals: u64,
    pub iterations_used: usize,
    pub final_residual: f64,
}

/// Node forces of `state`, reusing a known node-0 force if given.
pub fn eval_forces(problem: &SecondOrderIvp, state: &NodeState, f0: Option<&[f64]>) -> Vec<f64> {
    let d = state.dim;
    let mut f = vec![0.0; state.x.len()];
    for m in 0..=state.nodes {
        let out = &mut f[m * d..(m + 1) * d];
        match (m, f0) {
            (0, Some(f0)) => out.copy_from_slice(f0),
            _ => problem.force(state.node_x(m), state.node_v(m), out),
        }
    }
    f
}

/// `C_coll U_0`: positions `x0 + dt (sum_j q_mj) v0`, velocities `v0`.
pub(crate) fn free_flight(x0: &[f64], v0: &[f64], dt: f64, rule: &QuadratureRule) -> NodeState {
    let m = rule.num_nodes();
    let mut s = NodeState::copy_initial(m, x0, v0);
    let d = x0.len();
    for node in 1..=m {
        let w: f64 = rule.q.row(node).iter().sum();
        for (x, &v) in s.x[node * d..(node + 1) * d].iter_mut().zip(v0) {
            *x += dt * w * v;
        }
    }
    s
}

/// Picard map `C_coll U_0 + dt Q_coll F` given node forces.
pub(crate) fn picard_map(forces: &[f64], x0: &[f64], v0: &[f64], dt: f64, rule: &QuadratureRule) -> NodeState {
    let mut s = free_flight(x0, v0, dt, rule);
    let d = x0.len();
    let m = rule.num_nodes();
    for node in 1..=m {
        for j in 0..=m {
            let (qq, q) = (rule.qq[(node, j)], rule.q[(node, j)]);
            for i in 0..d {
                let f = forces[j * d + i];
                s.x[node * d + i] += dt * dt * qq * f;
                s.v[node * d + i] += dt * q * f;
            }
        }
    }
    s
}

pub(crate) fn residual_with_forces(
    state: &NodeState,
    forces: &[f64],
    x0: &[f64],
    v0: &[f64],
    dt: f64,
    rule: &QuadratureRule,
) -> f64 {
    state.max_abs_diff(&picard_map(forces, x0, v0, dt, rule))
}

/// `|| U - dt Q_coll F(U) - C_coll U_0 ||_inf`. Evaluates the force at every node.
pub fn collocation_residual(
    problem: &SecondOrderIvp,
    state: &NodeState,
    x0: &[f64],
    v0: &[f64],
    dt: f64,
    rule: &QuadratureRule,
) -> f64 {
    let forces = eval_forces(problem, state, None);
    residual_with_forces(state, &forces, x0, v0, dt, rule)
}

/// Dense direct solve of the collocation system for a linear force.
pub fn solve_collocation_linear(
    problem: &SecondOrderIvp,
    x0: &[f64],
    v0: &[f64],
    dt: f64,
    rule: &QuadratureRule,
) -> Result<NodeState> {
    let lin = problem.linear_parts().ok_or(SdcError::NotLinear)?;
    let d = problem.dim();
    let m = rule.num_nodes();
    let n = (m + 1) * d;
    let mut a = DMatrix::<f64>::identity(2 * n, 2 * n);
    for row in 0..=m {
        for col in 0..=m {
            let cx = dt * dt * rule.qq[(row, col)];
            let cv = dt * rule.q[(row, col)];
            if cx == 0.0 && cv == 0.0 {
                continue;
            }
            for i in 0..d {
                for k in 0..d {
                    let (ax, av) = (lin.ax[(i, k)], lin.av[(i, k)]);
                    a[(row * d + i, col * d + k)] -= cx * ax;
                    a[(row * d + i, n + col * d + k)] -= cx * av;
                    a[(n + row * d + i, col * d + k)] -= cv * ax;
                    a[(n + row * d + i, n + col * d + k)] -= cv * av;
                }
            }
        }
    }
    let rhs = free_flight(x0, v0, dt, rule);
    let b = DVector::from_iterator(2 * n, rhs.x.iter().chain(&rhs.v).copied());
    let z = a
        .lu()
        .solve(&b)
        .ok_or_else(|| SdcError::Singular(format!("collocation system at dt = {dt}")))?;
    let mut s = NodeState::zeros(m, d);
    s.x.copy_from_slice(z.rows(0, n).as_slice());
    s.v.copy_from_slice(z.rows(n, n).as_slice());
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct PicardRun {
    pub state: NodeState,
    pub forces: Vec<f64>,
    /// `|| U^{k+1} - U^k ||_inf` per iteration.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Runs up to `k` Picard iterations from the given starting value.
#[allow(clippy::too_many_arguments)]
pub fn picard_iterate(
    problem: &SecondOrderIvp,
    x0: &[f64],
    v0: &[f64],
    dt: f64,
    rule: &QuadratureRule,
    guess: InitialGuess,
    k: usize,
    stop: StopRule,
) -> Result<PicardRun> {
    let f0 = problem.force_vec(x0, v0);
    let (mut state, mut forces) = initial_guess_with_forces(guess, problem, x0, v0, &f0, dt, rule, None)?;
    let mut trace = Vec::with_capacity(k);
    let mut residual = residual_with_forces(&state, &forces, x0, v0, dt, rule);
    let mut iterations = 0;
    while iterations < k {
        if let StopRule::ResidualTol(tol) = stop {
            if residual <= tol {
                break;
            }
        }
        let next = picard_map(&forces, x0, v0, dt, rule);
        iterations += 1;
        let norm = next.inf_norm();
        if !(norm <= DIVERGENCE_THRESHOLD) {
            return Err(SdcError::Divergence { iteration: iterations, norm });
        }
        trace.push(next.max_abs_diff(&state));
        state = next;
        forces = eval_forces(problem, &state, Some(&f0));
        residual = residual_with_forces(&state, &forces, x0, v0, dt, rule);
    }
    Ok(PicardRun {
        state,
        forces,
        trace,
        iterations,
        residual,
    })
}

/// End-of-step update `x0 + dt q V_0 + dt^2 qQ F`, `v0 + dt q F` from node forces.
pub fn update_step(forces: &[f64], x0: &[f64], v0: &[f64], dt: f64, rule: &QuadratureRule) -> (Vec<f64>, Vec<f64>) {
    let d = x0.len();
    let wsum: f64 = rule.weights.iter().sum();
    let mut x: Vec<f64> = x0.iter().zip(v0).map(|(x, v)| x + dt * wsum * v).collect();
    let mut v = v0.to_vec();
    for j in 0..=rule.num_nodes() {
        let (wq, w) = (rule.weights_q[j], rule.weights[j]);
        for i in 0..d {
            let f = forces[j * d + i];
            x[i] += dt * dt * wq * f;
            v[i] += dt * w * f;
        }
    }
    (x, v)
}
