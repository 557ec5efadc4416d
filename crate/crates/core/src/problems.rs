//! Second-order initial value problems `x'' = f(x, x')` with exact-solution oracles.

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SdcError};

pub type ForceFn = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

/// Constant matrices with `f(x, v) = ax * x + av * v`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParts {
    pub ax: DMatrix<f64>,
    pub av: DMatrix<f64>,
}

/// An autonomous second-order IVP with a counted force evaluation.
pub struct SecondOrderIvp {
    dim: usize,
    force: Box<ForceFn>,
    linear: Option<LinearParts>,
    velocity_matrix: Option<DMatrix<f64>>,
    velocity_dependent: Vec<bool>,
    evals: AtomicU64,
}

impl fmt::Debug for SecondOrderIvp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SecondOrderIvp")
            .field("dim", &self.dim)
            .field("linear", &self.linear)
            .field("velocity_dependent", &self.velocity_dependent)
            .field("evals", &self.f_evals())
            .finish()
    }
}

impl SecondOrderIvp {
    /// General problem from a force closure. `velocity_dependent[i]` must be false
    /// only for components whose force ignores `v`.
    pub fn new<F>(dim: usize, velocity_dependent: Vec<bool>, force: F) -> Result<Self>
    where
        F: Fn(&[f64], &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        if dim == 0 || velocity_dependent.len() != dim {
            return Err(SdcError::InvalidArgument(format!(
                "dimension {dim} with {} velocity flags",
                velocity_dependent.len()
            )));
        }
        Ok(Self {
            dim,
            force: Box::new(force),
            linear: None,
            velocity_matrix: None,
            velocity_dependent,
            evals: AtomicU64::new(0),
        })
    }

    /// Linear force `ax * x + av * v`; velocity dependence is read off the rows of `av`.
    pub fn linear(ax: DMatrix<f64>, av: DMatrix<f64>) -> Result<Self> {
        let dim = ax.nrows();
        if ax.ncols() != dim || av.nrows() != dim || av.ncols() != dim || dim == 0 {
            return Err(SdcError::InvalidArgument(
                "force matrices must be square and of equal size".into(),
            ));
        }
        let velocity_dependent = av.row_iter().map(|r| r.iter().any(|&a| a != 0.0)).collect();
        let (fx, fv) = (ax.clone(), av.clone());
        let force = move |x: &[f64], v: &[f64], out: &mut [f64]| {
            for (i, o) in out.iter_mut().enumerate() {
                let mut acc = 0.0;
                for j in 0..x.len() {
                    acc += fx[(i, j)] * x[j] + fv[(i, j)] * v[j];
                }
                *o = acc;
            }
        };
        Ok(Self {
            dim,
            force: Box::new(force),
            velocity_matrix: Some(av.clone()),
            linear: Some(LinearParts { ax, av }),
            velocity_dependent,
            evals: AtomicU64::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn linear_parts(&self) -> Option<&LinearParts> {
        self.linear.as_ref()
    }

    /// Constant `B` when the force is known to be `a(x) + B v`.
    pub fn velocity_matrix(&self) -> Option<&DMatrix<f64>> {
        self.velocity_matrix.as_ref()
    }

    /// Declares that the force is affine in `v` with constant matrix `b`.
    pub fn with_velocity_matrix(mut self, b: DMatrix<f64>) -> Result<Self> {
        if b.nrows() != self.dim || b.ncols() != self.dim {
            return Err(SdcError::InvalidArgument("velocity matrix has wrong shape".into()));
        }
        self.velocity_matrix = Some(b);
        Ok(self)
    }

    pub fn velocity_dependent(&self) -> &[bool] {
        &self.velocity_dependent
    }

    pub fn depends_on_velocity(&self) -> bool {
        self.velocity_dependent.iter().any(|&b| b)
    }

    /// Evaluates the force and bumps the evaluation counter.
    pub fn force(&self, x: &[f64], v: &[f64], out: &mut [f64]) {
        self.evals.fetch_add(1, Ordering::Relaxed);
        (self.force)(x, v, out);
    }

    pub fn force_vec(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.force(x, v, &mut out);
        out
    }

    pub fn f_evals(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn reset_evals(&self) {
        self.evals.store(0, Ordering::Relaxed);
    }

    /// Generator of the first-order companion system `(x, v)' = A (x, v)`.
    pub fn companion_matrix(&self) -> Result<DMatrix<f64>> {
        let lin = self.linear.as_ref().ok_or(SdcError::NoExactSolution)?;
        let d = self.dim;
        let mut a = DMatrix::zeros(2 * d, 2 * d);
        for i in 0..d {
            a[(i, d + i)] = 1.0;
        }
        a.view_mut((d, 0), (d, d)).copy_from(&lin.ax);
        a.view_mut((d, d), (d, d)).copy_from(&lin.av);
        Ok(a)
    }

    /// Exact flow over time `t` via the matrix exponential of the companion system.
    pub fn exact_solution(&self, t: f64, x0: &[f64], v0: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let a = self.companion_matrix()?;
        let d = self.dim;
        let flow = (a * t).exp();
        let mut u0 = nalgebra::DVector::zeros(2 * d);
        u0.rows_mut(0, d).copy_from_slice(x0);
        u0.rows_mut(d, d).copy_from_slice(v0);
        let u = flow * u0;
        Ok((u.rows(0, d).iter().copied().collect(), u.rows(d, d).iter().copied().collect()))
    }
}

/// Damped oscillator `x'' = -kappa x - mu x'`.
pub fn make_oscillator(kappa: f64, mu: f64) -> Result<SecondOrderIvp> {
    if !(kappa >= 0.0 && mu >= 0.0) {
        return Err(SdcError::InvalidArgument(format!(
            "oscillator needs kappa >= 0 and mu >= 0, got ({kappa}, {mu})"
        )));
    }
    SecondOrderIvp::linear(
        DMatrix::from_element(1, 1, -kappa),
        DMatrix::from_element(1, 1, -mu),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PenningParams {
    pub omega_b: f64,
    pub omega_e: f64,
    pub epsilon: f64,
    pub alpha: f64,
    pub x0: [f64; 3],
    pub v0: [f64; 3],
}

impl Default for PenningParams {
    fn default() -> Self {
        Self {
            omega_b: 25.0,
            omega_e: 4.9,
            epsilon: -1.0,
            alpha: 1.0,
            x0: [10.0, 0.0, 0.0],
            v0: [100.0, 0.0, 100.0],
        }
    }
}

/// Single particle in a Penning trap: quadrupole electric field plus a uniform axial
/// magnetic field. The charge-to-mass ratio cancels out of the force.
pub fn make_penning(params: &PenningParams) -> Result<SecondOrderIvp> {
    if params.alpha == 0.0 || !params.alpha.is_finite() {
        return Err(SdcError::InvalidArgument(
            "Penning trap needs a nonzero charge-to-mass ratio".into(),
        ));
    }
    let e = -params.epsilon * params.omega_e * params.omega_e;
    let ax = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![e, e, -2.0 * e]));
    #[rustfmt::skip]
    let av = DMatrix::from_row_slice(3, 3, &[
        0.0, params.omega_b, 0.0,
        -params.omega_b, 0.0, 0.0,
        0.0, 0.0, 0.0,
    ]);
    SecondOrderIvp::linear(ax, av)
}
