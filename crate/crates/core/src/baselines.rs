//! Reference integrators: velocity-Verlet and a four-stage fourth-order Runge-Kutta
//! scheme applied to the companion first-order system.

use crate::collocation::StepResult;
use crate::error::Result;
use crate::preconditioner::solve_node_velocity;
use crate::problems::SecondOrderIvp;
use crate::sdc::march;

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineStep {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    /// Force at the new state, reusable by the next Verlet step.
    pub f: Vec<f64>,
    pub f_evals: u64,
}

/// One velocity-Verlet step. Passing the force at `(x, v)` from the previous step
/// leaves one evaluation per step.
pub fn verlet_step(problem: &SecondOrderIvp, x: &[f64], v: &[f64], f: Option<&[f64]>, dt: f64) -> Result<BaselineStep> {
    let start = problem.f_evals();
    let f = match f {
        Some(f) => f.to_vec(),
        None => problem.force_vec(x, v),
    };
    let xn: Vec<f64> = (0..x.len()).map(|i| x[i] + dt * (v[i] + 0.5 * dt * f[i])).collect();
    let c: Vec<f64> = (0..x.len()).map(|i| v[i] + 0.5 * dt * f[i]).collect();
    let (vn, fn_) = solve_node_velocity(problem, &xn, &c, 0.5 * dt, 1)?;
    Ok(BaselineStep {
        x: xn,
        v: vn,
        f: fn_,
        f_evals: problem.f_evals() - start,
    })
}

/// Classical RK4 on `(x, v)' = (v, f(x, v))`; four evaluations.
pub fn rkn4_step(problem: &SecondOrderIvp, x: &[f64], v: &[f64], dt: f64) -> BaselineStep {
    let start = problem.f_evals();
    let d = x.len();
    let shift = |a: &[f64], s: f64, b: &[f64]| -> Vec<f64> { (0..d).map(|i| a[i] + s * b[i]).collect() };
    let a1 = problem.force_vec(x, v);
    let (x2, v2) = (shift(x, 0.5 * dt, v), shift(v, 0.5 * dt, &a1));
    let a2 = problem.force_vec(&x2, &v2);
    let (x3, v3) = (shift(x, 0.5 * dt, &v2), shift(v, 0.5 * dt, &a2));
    let a3 = problem.force_vec(&x3, &v3);
    let (x4, v4) = (shift(x, dt, &v3), shift(v, dt, &a3));
    let a4 = problem.force_vec(&x4, &v4);
    let xn = (0..d).map(|i| x[i] + dt / 6.0 * (v[i] + 2.0 * v2[i] + 2.0 * v3[i] + v4[i])).collect();
    let vn = (0..d).map(|i| v[i] + dt / 6.0 * (a1[i] + 2.0 * a2[i] + 2.0 * a3[i] + a4[i])).collect();
    BaselineStep {
        x: xn,
        v: vn,
        f: a4,
        f_evals: problem.f_evals() - start,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Baseline {
    VelocityVerlet,
    Rkn4,
}

/// Steps a baseline over `[t0, t_end]`; same conventions as [`crate::sdc::march`].
#[allow(clippy::too_many_arguments)]
pub fn baseline_march<O>(
    problem: &SecondOrderIvp,
    method: Baseline,
    x0: &[f64],
    v0: &[f64],
    t0: f64,
    t_end: f64,
    dt: f64,
    observe: O,
) -> Result<(u64, bool)>
where
    O: FnMut(f64, &StepResult),
{
    let mut trailing: Option<Vec<f64>> = None;
    march(
        x0,
        v0,
        t0,
        t_end,
        dt,
        |x, v, h| {
            let s = match method {
                Baseline::VelocityVerlet => verlet_step(problem, x, v, trailing.as_deref(), h)?,
                Baseline::Rkn4 => rkn4_step(problem, x, v, h),
            };
            trailing = Some(s.f);
            Ok(StepResult {
                x_end: s.x,
                v_end: s.v,
                f_evals: s.f_evals,
                iterations_used: 0,
                final_residual: 0.0,
            })
        },
        observe,
    )
}

/// Final state and total evaluations of a baseline run.
pub fn baseline_integrate(
    problem: &SecondOrderIvp,
    method: Baseline,
    x0: &[f64],
    v0: &[f64],
    t0: f64,
    t_end: f64,
    dt: f64,
) -> Result<(Vec<f64>, Vec<f64>, u64)> {
    let mut last = (x0.to_vec(), v0.to_vec());
    let (evals, _) = baseline_march(problem, method, x0, v0, t0, t_end, dt, |_, r| {
        last = (r.x_end.clone(), r.v_end.clone());
    })?;
    Ok((last.0, last.1, evals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{make_oscillator, make_penning, PenningParams};

    fn global_slope(method: Baseline) -> f64 {
        let p = make_oscillator(1.0, 0.0).unwrap();
        let errs: Vec<f64> = (0..4)
            .map(|i| {
                let dt = 0.1 / 2f64.powi(i);
                let (x, v, _) = baseline_integrate(&p, method, &[1.0], &[0.0], 0.0, 1.0, dt).unwrap();
                f64::max((x[0] - 1f64.cos()).abs(), (v[0] + 1f64.sin()).abs())
            })
            .collect();
        (errs[2] / errs[3]).log2()
    }

    #[test]
    fn free_flight() {
        let p = make_oscillator(0.0, 0.0).unwrap();
        let s = verlet_step(&p, &[1.0], &[2.0], None, 0.5).unwrap();
        assert_eq!((s.x[0], s.v[0]), (2.0, 2.0));
        let s = rkn4_step(&p, &[1.0], &[2.0], 0.5);
        assert_eq!((s.x[0], s.v[0]), (2.0, 2.0));
        assert_eq!(s.f_evals, 4);
    }

    #[test]
    fn uniform_acceleration_is_exact() {
        let p = SecondOrderIvp::new(1, vec![false], |_, _, out| out[0] = -9.81).unwrap();
        let s = verlet_step(&p, &[1.0], &[2.0], None, 0.3).unwrap();
        assert!((s.x[0] - (1.0 + 0.6 - 9.81 * 0.045)).abs() < 1e-14);
        assert!((s.v[0] - (2.0 - 9.81 * 0.3)).abs() < 1e-14);
    }

    #[test]
    fn verlet_second_order() {
        let s = global_slope(Baseline::VelocityVerlet);
        assert!((s - 2.0).abs() < 0.1, "{s}");
    }

    #[test]
    fn rk4_fourth_order() {
        let s = global_slope(Baseline::Rkn4);
        assert!((s - 4.0).abs() < 0.15, "{s}");
    }

    #[test]
    fn verlet_reuses_trailing_force() {
        let p = make_penning(&PenningParams::default()).unwrap();
        let prm = PenningParams::default();
        let (_, _, evals) = baseline_integrate(&p, Baseline::VelocityVerlet, &prm.x0, &prm.v0, 0.0, 0.1, 0.01).unwrap();
        assert_eq!(evals, 11);
        let (_, _, evals) = baseline_integrate(&p, Baseline::Rkn4, &prm.x0, &prm.v0, 0.0, 0.1, 0.01).unwrap();
        assert_eq!(evals, 40);
    }
}
