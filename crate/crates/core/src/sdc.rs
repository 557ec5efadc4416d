//! SDC sweeps preconditioned with velocity-Verlet, single steps and time stepping.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::collocation::{
    eval_forces, free_flight, picard_map, residual_with_forces, update_step, NodeState, StepResult,
    DIVERGENCE_THRESHOLD,
};
use crate::error::{Result, SdcError};
use crate::preconditioner::{build_preconditioner, solve_node_velocity, verlet_solve_with_forces, PreconditionerMatrices};
use crate::problems::SecondOrderIvp;
use crate::quadrature::QuadratureRule;

/// How the first iterate `U^0` is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialGuess {
    CopyInitial,
    VerletSweep,
    Random(u64),
}

impl InitialGuess {
    /// Order of the starting procedure.
    pub fn k0(self) -> usize {
        match self {
            InitialGuess::VerletSweep => 2,
            InitialGuess::CopyInitial | InitialGuess::Random(_) => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Always run the configured number of iterations.
    FixedK,
    /// Stop early once the collocation residual drops below the tolerance.
    ResidualTol(f64),
}

pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-12;

/// Row differences of the collocation and Verlet matrices used by the node-to-node sweep.
#[derive(Debug, Clone)]
struct SweepCoefficients {
    /// Row sums of Q differenced: the free-flight increment per node.
    w: Vec<f64>,
    s: Vec<Vec<f64>>,
    sq: Vec<Vec<f64>>,
    sx: Vec<Vec<f64>>,
    st: Vec<Vec<f64>>,
}

impl SweepCoefficients {
    fn new(rule: &QuadratureRule, pre: &PreconditionerMatrices) -> Self {
        let m = rule.num_nodes();
        let diff = |a: &nalgebra::DMatrix<f64>| -> Vec<Vec<f64>> {
            (0..=m)
                .map(|row| {
                    (0..=m)
                        .map(|l| if row == 0 { 0.0 } else { a[(row, l)] - a[(row - 1, l)] })
                        .collect()
                })
                .collect()
        };
        let rowsum = |r: usize| rule.q.row(r).iter().sum::<f64>();
        let w = (0..=m).map(|r| if r == 0 { 0.0 } else { rowsum(r) - rowsum(r - 1) }).collect();
        Self {
            w,
            s: diff(&rule.q),
            sq: diff(&rule.qq),
            sx: diff(&pre.qx),
            st: diff(&pre.qt),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweeperConfig {
    rule: QuadratureRule,
    pre: PreconditionerMatrices,
    coeffs: SweepCoefficients,
    pub k: usize,
    pub initial_guess: InitialGuess,
    pub stop: StopRule,
}

impl SweeperConfig {
    /// Fixed `k` iterations from a copy of the initial value.
    pub fn new(rule: QuadratureRule, k: usize) -> Self {
        let pre = build_preconditioner(&rule);
        let coeffs = SweepCoefficients::new(&rule, &pre);
        Self {
            rule,
            pre,
            coeffs,
            k,
            initial_guess: InitialGuess::CopyInitial,
            stop: StopRule::FixedK,
        }
    }

    pub fn with_initial_guess(mut self, guess: InitialGuess) -> Self {
        self.initial_guess = guess;
        self
    }

    pub fn with_stop(mut self, stop: StopRule) -> Self {
        self.stop = stop;
        self
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn matrices(&self) -> &PreconditionerMatrices {
        &self.pre
    }

    pub fn k0(&self) -> usize {
        self.initial_guess.k0()
    }
}

/// Builds `U^0` and its node forces. `f0` is the known force at the step start.
#[allow(clippy::too_many_arguments)]
pub(crate) fn initial_guess_with_forces(
    guess: InitialGuess,
    problem: &SecondOrderIvp,
    x0: &[f64],
    v0: &[f64],
    f0: &[f64],
    dt: f64,
    rule: &QuadratureRule,
    matrices: Option<&PreconditionerMatrices>,
) -> Result<(NodeState, Vec<f64>)> {
    let m = rule.num_nodes();
    match guess {
        InitialGuess::CopyInitial => Ok((NodeState::copy_initial(m, x0, v0), f0.repeat(m + 1))),
        InitialGuess::VerletSweep => {
            let built;
            let pre = match matrices {
                Some(p) => p,
                None => {
                    built = build_preconditioner(rule);
                    &built
                }
            };
            let rhs = verlet_rhs(x0, v0, dt, pre);
            verlet_solve_with_forces(problem, &rhs.x, &rhs.v, dt, pre, Some(f0))
        }
        InitialGuess::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = NodeState::copy_initial(m, x0, v0);
            let d = x0.len();
            for k in d..s.x.len() {
                s.x[k] = rng.random_range(-1.0..=1.0);
                s.v[k] = rng.random_range(-1.0..=1.0);
            }
            let f = eval_forces(problem, &s, Some(f0));
            Ok((s, f))
        }
    }
}

/// `C_vv U_0`: positions `x0 + dt (sum_l QE_ml) v0`, velocities `v0`.
fn verlet_rhs(x0: &[f64], v0: &[f64], dt: f64, pre: &PreconditionerMatrices) -> NodeState {
    let m = pre.num_nodes();
    let d = x0.len();
    let mut s = NodeState::copy_initial(m, x0, v0);
    for node in 1..=m {
        let w: f64 = pre.qe.row(node).iter().sum();
        for (x, &v) in s.x[node * d..(node + 1) * d].iter_mut().zip(v0) {
            *x += dt * w * v;
        }
    }
    s
}

/// Starting iterate for one step.
pub fn initial_guess(
    strategy: InitialGuess,
    problem: &SecondOrderIvp,
    x0: &[f64],
    v0: &[f64],
    dt: f64,
    rule: &QuadratureRule,
) -> Result<NodeState> {
    let f0 = problem.force_vec(x0, v0);
    initial_guess_with_forces(strategy, problem, x0, v0, &f0, dt, rule, None).map(|(s, _)| s)
}

/// One node-to-node sweep given the previous iterate and its node forces.
pub(crate) fn sweep_with_forces(
    problem: &SecondOrderIvp,
    prev: &NodeState,
    prev_f: &[f64],
    v0: &[f64],
    dt: f64,
    config: &SweeperConfig,
) -> Result<(NodeState, Vec<f64>)> {
    let d = prev.dim;
    let m = prev.nodes;
    let c = &config.coeffs;
    let dt2 = dt * dt;
    let mut next = NodeState::zeros(m, d);
    let mut f = vec![0.0; prev_f.len()];
    next.x[..d].copy_from_slice(&prev.x[..d]);
    next.v[..d].copy_from_slice(&prev.v[..d]);
    f[..d].copy_from_slice(&prev_f[..d]);
    let mut rhs = vec![0.0; d];
    for node in 1..=m {
        let (lo, hi) = (node * d, (node + 1) * d);
        let h = dt * config.pre.qt[(node, node)];
        for i in 0..d {
            let mut xi = next.x[lo - d + i] + dt * c.w[node] * v0[i];
            let mut vi = next.v[lo - d + i] - h * prev_f[lo + i];
            for l in 0..node {
                let df = f[l * d + i] - prev_f[l * d + i];
                xi += dt2 * c.sx[node][l] * df;
                vi += dt * c.st[node][l] * df;
            }
            for l in 0..=m {
                let fl = prev_f[l * d + i];
                xi += dt2 * c.sq[node][l] * fl;
                vi += dt * c.s[node][l] * fl;
            }
            next.x[lo + i] = xi;
            rhs[i] = vi;
        }
        let (v, fv) = solve_node_velocity(problem, &next.x[lo..hi], &rhs, h, node)?;
        next.v[lo..hi].copy_from_slice(&v);
        f[lo..hi].copy_from_slice(&fv);
    }
    Ok((next, f))
}

/// One SDC sweep `U^k -> U^{k+1}`. Evaluates the force at the nodes of `prev` first.
pub fn sdc_sweep(
    problem: &SecondOrderIvp,
    prev: &NodeState,
    x0: &[f64],
    v0: &[f64],
    dt: f64,
    config: &SweeperConfig,
) -> Result<NodeState> {
    check_start(prev, x0, v0)?;
    let f = eval_forces(problem, prev, None);
    sweep_with_forces(problem, prev, &f, v0, dt, config).map(|(s, _)| s)
}

fn check_start(state: &NodeState, x0: &[f64], v0: &[f64]) -> Result<()> {
    if state.node_x(0) != x0 || state.node_v(0) != v0 {
        return Err(SdcError::InvalidArgument("node 0 must hold the initial value".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Iteration {
    Sdc,
    Picard,
}

fn run_step(
    problem: &SecondOrderIvp,
    x0: &[f64],
    v0: &[f64],
    dt: f64,
    config: &SweeperConfig,
    kind: Iteration,
) -> Result<StepResult> {
    if problem.dim() != x0.len() || x0.len() != v0.len() {
        return Err(SdcError::InvalidArgument("initial value has wrong dimension".into()));
    }
    let start = problem.f_evals();
    let rule = &config.rule;
    let f0 = problem.force_vec(x0, v0);
    let (mut state, mut f) =
        initial_guess_with_forces(config.initial_guess, problem, x0, v0, &f0, dt, rule, Some(&config.pre))?;
    let mut residual = residual_with_forces(&state, &f, x0, v0, dt, rule);
    let mut iterations = 0;
    while iterations < config.k {
        if let StopRule::ResidualTol(tol) = config.stop {
            if residual <= tol {
                break;
            }
        }
        (state, f) = match kind {
            Iteration::Sdc => sweep_with_forces(problem, &state, &f, v0, dt, config)?,
            Iteration::Picard => {
                let s = picard_map(&f, x0, v0, dt, rule);
                let fs = eval_forces(problem, &s, Some(&f0));
                (s, fs)
            }
        };
        iterations += 1;
        let norm = state.inf_norm();
        if !(norm <= DIVERGENCE_THRESHOLD) {
            return Err(SdcError::Divergence { iteration: iterations, norm });
        }
        residual = residual_with_forces(&state, &f, x0, v0, dt, rule);
    }
    let (x_end, v_end) = update_step(&f, x0, v0, dt, rule);
    Ok(StepResult {
        x_end,
        v_end,
        f_evals: problem.f_evals() - start,
        iterations_used: iterations,
        final_residual: residual,
    })
}

/// Starting value, up to `K` sweeps and the quadrature update.
pub fn sdc_step(problem: &SecondOrderIvp, x0: &[f64], v0: &[f64], dt: f64, config: &SweeperConfig) -> Result<StepResult> {
    run_step(problem, x0, v0, dt, config, Iteration::Sdc)
}

/// As [`sdc_step`] with unpreconditioned Picard iterations.
pub fn picard_step(problem: &SecondOrderIvp, x0: &[f64], v0: &[f64], dt: f64, config: &SweeperConfig) -> Result<StepResult> {
    run_step(problem, x0, v0, dt, config, Iteration::Picard)
}

/// The unconverged free-flight node values `C_coll U_0`.
pub fn collocation_rhs(x0: &[f64], v0: &[f64], dt: f64, rule: &QuadratureRule) -> NodeState {
    free_flight(x0, v0, dt, rule)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Time at the end of each step.
    pub times: Vec<f64>,
    /// Per-step results with cumulative `f_evals`.
    pub steps: Vec<StepResult>,
    pub total_f_evals: u64,
    /// True when the last step was shortened to land on `t_end`.
    pub partial_final_step: bool,
}

impl Trajectory {
    pub fn final_state(&self) -> Option<(&[f64], &[f64])> {
        self.steps.last().map(|s| (s.x_end.as_slice(), s.v_end.as_slice()))
    }
}

/// Step sizes covering `[t0, t_end]` with a shortened final step when needed.
pub fn step_schedule(t0: f64, t_end: f64, dt: f64) -> Result<(Vec<f64>, bool)> {
    if !(t_end > t0) || !(dt > 0.0) || !dt.is_finite() {
        return Err(SdcError::InvalidArgument(format!(
            "need t_end > t0 and dt > 0, got [{t0}, {t_end}] with dt = {dt}"
        )));
    }
    let span = t_end - t0;
    let ratio = span / dt;
    let full = (ratio * (1.0 + 1e-12)).floor() as usize;
    let rem = span - full as f64 * dt;
    let mut steps = vec![dt; full];
    let partial = rem > 1e-10 * dt;
    if partial {
        steps.push(rem);
    }
    Ok((steps, partial))
}

/// Generic time stepper. `step` maps `(x, v, dt)` to a step result; `observe` sees
/// each step with its end time and cumulative evaluation count applied.
pub fn march<S, O>(x0: &[f64], v0: &[f64], t0: f64, t_end: f64, dt: f64, mut step: S, mut observe: O) -> Result<(u64, bool)>
where
    S: FnMut(&[f64], &[f64], f64) -> Result<StepResult>,
    O: FnMut(f64, &StepResult),
{
    let (schedule, partial) = step_schedule(t0, t_end, dt)?;
    let (mut x, mut v) = (x0.to_vec(), v0.to_vec());
    let mut total = 0;
    let mut t = t0;
    let n = schedule.len();
    for (i, h) in schedule.into_iter().enumerate() {
        let mut r = step(&x, &v, h)?;
        total += r.f_evals;
        r.f_evals = total;
        t = if i + 1 == n { t_end } else { t + h };
        observe(t, &r);
        x.clone_from(&r.x_end);
        v.clone_from(&r.v_end);
    }
    Ok((total, partial))
}

/// Sequential SDC steps over `[t0, t_end]`.
pub fn integrate(
    problem: &SecondOrderIvp,
    x0: &[f64],
    v0: &[f64],
    t0: f64,
    t_end: f64,
    dt: f64,
    config: &SweeperConfig,
) -> Result<Trajectory> {
    let mut times = Vec::new();
    let mut steps = Vec::new();
    let (total_f_evals, partial_final_step) = march(
        x0,
        v0,
        t0,
        t_end,
        dt,
        |x, v, h| sdc_step(problem, x, v, h, config),
        |t, r| {
            times.push(t);
            steps.push(r.clone());
        },
    )?;
    Ok(Trajectory {
        times,
        steps,
        total_f_evals,
        partial_final_step,
    })
}
