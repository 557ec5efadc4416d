//! The studies behind the CLI. Each `run_*` returns an in-memory report and
//! [`run_experiment`] writes the configured one to CSV.

use std::path::Path;

use rayon::prelude::*;

use super::config::{ExperimentConfig, MethodSpec, ScanMethod};
use super::fit::{fit_line, fit_order, LineFit};
use super::output::{update_summary, Table, Value};
use crate::baselines::{baseline_march, Baseline};
use crate::error::{Result, SdcError};
use crate::problems::SecondOrderIvp;
use crate::quadrature::QuadratureRule;
use crate::sdc::{march, picard_step, sdc_step, StopRule, SweeperConfig};
use crate::stability::{scan_domain, stability_limit, Axis, ScanGrid, ScanKind, ScanResult};

fn sweeper(cfg: &ExperimentConfig, m: usize, k: usize) -> Result<SweeperConfig> {
    let rule = QuadratureRule::new(cfg.rule.family, m)?;
    let stop = if cfg.sweeper.residual_tol > 0.0 {
        StopRule::ResidualTol(cfg.sweeper.residual_tol)
    } else {
        StopRule::FixedK
    };
    Ok(SweeperConfig::new(rule, k)
        .with_initial_guess(cfg.sweeper.guess(cfg.seed))
        .with_stop(stop))
}

/// Quadrature nodes and weights per node count.
pub fn run_nodes(cfg: &ExperimentConfig) -> Result<Table> {
    let mut t = Table::new(["family", "m", "j", "tau", "weight"]);
    for &m in &cfg.rule.nodes {
        let rule = QuadratureRule::new(cfg.rule.family, m)?;
        for j in 1..=m {
            t.push(vec![
                cfg.rule.family.name().into(),
                m.into(),
                j.into(),
                rule.tau(j).into(),
                rule.weights[j].into(),
            ]);
        }
    }
    Ok(t)
}

/// Local error order after one step: `min(p+1, k+k0+2)` for positions and one less
/// for velocities, with `2k` in place of `k` when the component's force ignores `v`.
pub fn predicted_local_order(p: usize, k: usize, k0: usize, velocity_free: bool, position: bool) -> usize {
    let iter = if velocity_free { 2 * k } else { k };
    (p + 1).min(iter + k0 + 1 + usize::from(position))
}

/// Global order `min(p, k+k0)`, or `min(p, 2k+k0)` when the force ignores `v`.
pub fn predicted_global_order(p: usize, k: usize, k0: usize, velocity_free: bool) -> usize {
    let iter = if velocity_free { 2 * k } else { k };
    p.min(iter + k0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderRow {
    pub m: usize,
    pub k: usize,
    /// `x1`, `v3`, ... (1-based component index).
    pub component: String,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    pub fit: Option<LineFit>,
    pub predicted: usize,
}

impl OrderRow {
    pub fn slope(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.slope().is_some_and(|s| (s - self.predicted as f64).abs() <= tol)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub study: &'static str,
    pub tolerance: f64,
    pub rows: Vec<OrderRow>,
}

impl OrderReport {
    pub fn row(&self, m: usize, k: usize, component: &str) -> Option<&OrderRow> {
        self.rows.iter().find(|r| r.m == m && r.k == k && r.component == component)
    }

    pub fn slope(&self, m: usize, k: usize, component: &str) -> Option<f64> {
        self.row(m, k, component).and_then(OrderRow::slope)
    }

    pub fn slopes_table(&self) -> Table {
        let mut t = Table::new(["m", "k", "component", "slope", "fit_residual", "points", "predicted", "pass"]);
        for r in &self.rows {
            let (slope, res, pts) = match r.fit {
                Some(f) => (f.slope, f.residual, f.points),
                None => (f64::NAN, f64::NAN, 0),
            };
            t.push(vec![
                r.m.into(),
                r.k.into(),
                r.component.clone().into(),
                slope.into(),
                res.into(),
                pts.into(),
                r.predicted.into(),
                usize::from(r.passes(self.tolerance)).into(),
            ]);
        }
        t
    }

    pub fn errors_table(&self) -> Table {
        let mut t = Table::new(["m", "k", "component", "dt", "error"]);
        for r in &self.rows {
            for (dt, e) in r.dts.iter().zip(&r.errors) {
                t.push(vec![r.m.into(), r.k.into(), r.component.clone().into(), (*dt).into(), (*e).into()]);
            }
        }
        t
    }
}

/// Per-component rows from errors indexed `[dt][component]`, positions first.
fn order_rows(
    m: usize,
    k: usize,
    dts: &[f64],
    errs: &[(Vec<f64>, Vec<f64>)],
    problem: &SecondOrderIvp,
    fit_points: usize,
    predict: impl Fn(bool, bool) -> usize,
) -> Vec<OrderRow> {
    let d = problem.dim();
    let mut rows = Vec::new();
    for position in [true, false] {
        for i in 0..d {
            let errors: Vec<f64> = errs.iter().map(|(ex, ev)| if position { ex[i] } else { ev[i] }).collect();
            let velocity_free = !problem.velocity_dependent()[i];
            rows.push(OrderRow {
                m,
                k,
                component: format!("{}{}", if position { "x" } else { "v" }, i + 1),
                dts: dts.to_vec(),
                fit: fit_order(dts, &errors, fit_points).ok(),
                errors,
                predicted: predict(velocity_free, position),
            });
        }
    }
    rows
}

/// Absolute per-component error after a single step from the initial value.
pub fn run_local_order(cfg: &ExperimentConfig) -> Result<OrderReport> {
    let (x0, v0) = cfg.problem.initial_value();
    let dts = cfg.time.ladder(cfg.problem.period());
    let mut rows = Vec::new();
    for &m in &cfg.rule.nodes {
        for &k in &cfg.sweeper.iterations {
            let sw = sweeper(cfg, m, k)?;
            let problem = cfg.problem.build()?;
            let errs = dts
                .iter()
                .map(|&dt| {
                    let r = sdc_step(&problem, &x0, &v0, dt, &sw)?;
                    let (xe, ve) = problem.exact_solution(dt, &x0, &v0)?;
                    let ex = r.x_end.iter().zip(&xe).map(|(a, b)| (a - b).abs()).collect();
                    let ev = r.v_end.iter().zip(&ve).map(|(a, b)| (a - b).abs()).collect();
                    Ok((ex, ev))
                })
                .collect::<Result<Vec<_>>>()?;
            let p = sw.rule().order();
            rows.extend(order_rows(m, k, &dts, &errs, &problem, cfg.time.fit_points, |free, pos| {
                predicted_local_order(p, k, sw.k0(), free, pos)
            }));
        }
    }
    Ok(OrderReport {
        study: "local",
        tolerance: cfg.order_tolerance,
        rows,
    })
}

fn relative_error(a: &[f64], exact: &[f64]) -> Vec<f64> {
    a.iter().zip(exact).map(|(a, e)| (a - e).abs() / e.abs()).collect()
}

/// Relative per-component error at `t_end` after full integrations.
pub fn run_global_order(cfg: &ExperimentConfig) -> Result<OrderReport> {
    let (x0, v0) = cfg.problem.initial_value();
    let dts = cfg.time.ladder(cfg.problem.period());
    let (t0, t_end) = (cfg.time.t0, cfg.time.t_end);
    let mut jobs = Vec::new();
    for &m in &cfg.rule.nodes {
        for &k in &cfg.sweeper.iterations {
            jobs.push((m, k));
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(m, k)| {
            let sw = sweeper(cfg, m, k)?;
            let problem = cfg.problem.build()?;
            let (xe, ve) = problem.exact_solution(t_end - t0, &x0, &v0)?;
            let errs = dts
                .iter()
                .map(|&dt| {
                    let mut last = (x0.clone(), v0.clone());
                    let res = march(&x0, &v0, t0, t_end, dt, |x, v, h| sdc_step(&problem, x, v, h, &sw), |_, r| {
                        last = (r.x_end.clone(), r.v_end.clone());
                    });
                    match res {
                        Ok(_) => Ok((relative_error(&last.0, &xe), relative_error(&last.1, &ve))),
                        Err(SdcError::Divergence { .. }) => {
                            let inf = vec![f64::INFINITY; x0.len()];
                            Ok((inf.clone(), inf))
                        }
                        Err(e) => Err(e),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let p = sw.rule().order();
            Ok(order_rows(m, k, &dts, &errs, &problem, cfg.time.fit_points, |free, _| {
                predicted_global_order(p, k, sw.k0(), free)
            }))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OrderReport {
        study: "global",
        tolerance: cfg.order_tolerance,
        rows: rows.into_iter().flatten().collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkRow {
    pub method: MethodSpec,
    pub m: usize,
    pub dt: f64,
    pub f_evals: u64,
    /// Relative final position error per component; infinite when the run diverged.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkReport {
    pub rows: Vec<WorkRow>,
}

impl WorkReport {
    /// `(f_evals, error in component i)` for one method, sorted by work.
    pub fn curve(&self, method: MethodSpec, component: usize) -> Vec<(f64, f64)> {
        let mut c: Vec<(f64, f64)> = self
            .rows
            .iter()
            .filter(|r| r.method == method)
            .map(|r| (r.f_evals as f64, r.errors[component]))
            .collect();
        c.sort_by(|a, b| a.0.total_cmp(&b.0));
        c
    }

    pub fn table(&self) -> Table {
        let dim = self.rows.first().map_or(0, |r| r.errors.len());
        let mut cols = vec!["method".to_string(), "k".into(), "m".into(), "dt".into(), "f_evals".into()];
        cols.extend((1..=dim).map(|i| format!("err_x{i}")));
        let mut t = Table::new(cols);
        for r in &self.rows {
            let mut row: Vec<Value> = vec![
                r.method.label().into(),
                r.method.iterations().into(),
                r.m.into(),
                r.dt.into(),
                r.f_evals.into(),
            ];
            row.extend(r.errors.iter().map(|&e| Value::from(e)));
            t.push(row);
        }
        t
    }
}

/// Error against work for every configured method and step size.
pub fn run_work_precision(cfg: &ExperimentConfig) -> Result<WorkReport> {
    let methods = cfg.work.parsed()?;
    let (x0, v0) = cfg.problem.initial_value();
    let dts = cfg.time.ladder(cfg.problem.period());
    let (t0, t_end) = (cfg.time.t0, cfg.time.t_end);
    let m = *cfg
        .rule
        .nodes
        .first()
        .ok_or_else(|| SdcError::Config("work-precision needs a node count".into()))?;
    let mut jobs = Vec::new();
    for &method in &methods {
        for &dt in &dts {
            jobs.push((method, dt));
        }
    }
    let rows = jobs
        .par_iter()
        .map(|&(method, dt)| {
            let problem = cfg.problem.build()?;
            let (xe, _) = problem.exact_solution(t_end - t0, &x0, &v0)?;
            let mut last = x0.clone();
            let keep = |_: f64, r: &crate::collocation::StepResult| last.clone_from(&r.x_end);
            let res = match method {
                MethodSpec::Sdc(k) | MethodSpec::Picard(k) => {
                    let sw = sweeper(cfg, m, k)?;
                    let step = |x: &[f64], v: &[f64], h: f64| match method {
                        MethodSpec::Sdc(_) => sdc_step(&problem, x, v, h, &sw),
                        _ => picard_step(&problem, x, v, h, &sw),
                    };
                    march(&x0, &v0, t0, t_end, dt, step, keep)
                }
                MethodSpec::Rkn4 => baseline_march(&problem, Baseline::Rkn4, &x0, &v0, t0, t_end, dt, keep),
                MethodSpec::VelocityVerlet => {
                    baseline_march(&problem, Baseline::VelocityVerlet, &x0, &v0, t0, t_end, dt, keep)
                }
            };
            let errors = match res {
                Ok(_) => relative_error(&last, &xe)
                    .into_iter()
                    .map(|e| if e.is_finite() { e } else { f64::INFINITY })
                    .collect(),
                Err(SdcError::Divergence { .. }) => vec![f64::INFINITY; x0.len()],
                Err(e) => return Err(e),
            };
            Ok(WorkRow {
                method,
                m,
                dt,
                f_evals: problem.f_evals(),
                errors,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(WorkReport { rows })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSeries {
    pub label: String,
    pub m: usize,
    pub k: usize,
    /// `(step, |H_n - H_0| / H_0)` at the sampled steps.
    pub samples: Vec<(usize, f64)>,
    pub max_error: f64,
    /// Mean error over the second half of the run.
    pub late_mean: f64,
    /// Fit of `log10(error)` against step over the samples.
    pub log_trend: Option<LineFit>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianReport {
    pub dt: f64,
    pub steps: usize,
    pub series: Vec<HamiltonianSeries>,
}

impl HamiltonianReport {
    pub fn get(&self, label: &str, m: usize, k: usize) -> Option<&HamiltonianSeries> {
        self.series.iter().find(|s| s.label == label && s.m == m && s.k == k)
    }

    pub fn series_table(&self) -> Table {
        let mut t = Table::new(["method", "m", "k", "step", "rel_h_error"]);
        for s in &self.series {
            for &(n, e) in &s.samples {
                t.push(vec![s.label.clone().into(), s.m.into(), s.k.into(), n.into(), e.into()]);
            }
        }
        t
    }

    pub fn summary_table(&self) -> Table {
        let mut t = Table::new(["method", "m", "k", "max_error", "late_mean", "log_trend_slope", "log_trend_stderr"]);
        for s in &self.series {
            let (slope, se) = s.log_trend.map_or((f64::NAN, f64::NAN), |f| (f.slope, f.slope_stderr));
            t.push(vec![
                s.label.clone().into(),
                s.m.into(),
                s.k.into(),
                s.max_error.into(),
                s.late_mean.into(),
                slope.into(),
                se.into(),
            ]);
        }
        t
    }
}

#[allow(clippy::too_many_arguments)]
fn hamiltonian_series(
    label: &str,
    m: usize,
    k: usize,
    steps: usize,
    sample_every: usize,
    stepper: impl FnOnce(&mut dyn FnMut(f64, &crate::collocation::StepResult)) -> Result<(u64, bool)>,
    kappa: f64,
    h0: f64,
) -> Result<HamiltonianSeries> {
    let mut samples = Vec::new();
    let mut max_error: f64 = 0.0;
    let (mut late_sum, mut late_n) = (0.0, 0usize);
    let mut n = 0usize;
    let mut observe = |_: f64, r: &crate::collocation::StepResult| {
        n += 1;
        let h = 0.5 * (kappa * r.x_end[0] * r.x_end[0] + r.v_end[0] * r.v_end[0]);
        let e = (h - h0).abs() / h0;
        max_error = max_error.max(e);
        if 2 * n > steps {
            late_sum += e;
            late_n += 1;
        }
        if n.is_multiple_of(sample_every) || n == steps {
            samples.push((n, e));
        }
    };
    stepper(&mut observe)?;
    let (xs, ys): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|(_, e)| *e > 0.0 && e.is_finite())
        .map(|&(n, e)| (n as f64, e.log10()))
        .unzip();
    Ok(HamiltonianSeries {
        label: label.into(),
        m,
        k,
        samples,
        max_error,
        late_mean: late_sum / late_n.max(1) as f64,
        log_trend: fit_line(&xs, &ys).ok(),
    })
}

/// Relative energy error of the undamped oscillator over a long run.
pub fn run_hamiltonian_drift(cfg: &ExperimentConfig) -> Result<HamiltonianReport> {
    let kappa = cfg.problem.kappa;
    if cfg.problem.kind != super::config::ProblemKind::Oscillator || cfg.problem.mu != 0.0 || kappa <= 0.0 {
        return Err(SdcError::Config("energy drift needs an undamped oscillator".into()));
    }
    let dt = *cfg
        .time
        .dt
        .first()
        .ok_or_else(|| SdcError::Config("energy drift needs time.dt".into()))?;
    let steps = cfg.hamiltonian.steps;
    let every = cfg.hamiltonian.sample_every.max(1);
    let (x0, v0) = cfg.problem.initial_value();
    let h0 = 0.5 * (kappa * x0[0] * x0[0] + v0[0] * v0[0]);
    let t_end = steps as f64 * dt;
    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for &m in &cfg.rule.nodes {
        for &k in &cfg.sweeper.iterations {
            jobs.push((m, k));
        }
    }
    let mut series = jobs
        .par_iter()
        .map(|&(m, k)| {
            let sw = sweeper(cfg, m, k)?;
            let problem = cfg.problem.build()?;
            hamiltonian_series(
                "sdc",
                m,
                k,
                steps,
                every,
                |obs| march(&x0, &v0, 0.0, t_end, dt, |x, v, h| sdc_step(&problem, x, v, h, &sw), obs),
                kappa,
                h0,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    if cfg.hamiltonian.include_rkn4 {
        let problem = cfg.problem.build()?;
        series.push(hamiltonian_series(
            "rkn4",
            0,
            0,
            steps,
            every,
            |obs| baseline_march(&problem, Baseline::Rkn4, &x0, &v0, 0.0, t_end, dt, obs),
            kappa,
            h0,
        )?);
    }
    Ok(HamiltonianReport { dt, steps, series })
}

fn scan_kind(cfg: &ExperimentConfig, convergence: bool) -> Result<ScanKind> {
    let k = cfg.sweeper.iterations.first().copied().unwrap_or(50);
    Ok(match (cfg.scan.method, convergence) {
        (ScanMethod::Sdc, false) => ScanKind::SdcStability(k),
        (ScanMethod::Sdc, true) => ScanKind::SdcConvergence,
        (ScanMethod::Picard, false) => ScanKind::PicardStability(k),
        (ScanMethod::Picard, true) => ScanKind::PicardConvergence,
        (ScanMethod::Rkn4, false) => ScanKind::Rkn4,
        (ScanMethod::Collocation, false) => ScanKind::Collocation,
        (m, true) => return Err(SdcError::Config(format!("no convergence map for {m:?}"))),
    })
}

/// Stability (`convergence = false`) or convergence map, on a square grid unless
/// `scan.mu_max` stretches the damping axis.
pub fn run_scan(cfg: &ExperimentConfig, convergence: bool) -> Result<ScanResult> {
    let kind = scan_kind(cfg, convergence)?;
    let m = cfg.rule.nodes.first().copied().unwrap_or(3);
    let rule = QuadratureRule::new(cfg.rule.family, m)?;
    let mut grid = ScanGrid::square(cfg.scan.max, cfg.scan.cells)?;
    if let Some(mu_max) = cfg.scan.mu_max {
        grid.mu = Axis::new(0.0, mu_max, cfg.scan.cells)?;
    }
    Ok(scan_domain(kind, &rule, grid))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LimitsTable {
    pub nodes: Vec<usize>,
    pub iterations: Vec<usize>,
    /// `[k index][m index]`.
    pub sdc: Vec<Vec<f64>>,
    pub picard: Vec<Vec<f64>>,
}

impl LimitsTable {
    pub fn get(&self, m: usize, k: usize) -> Option<(f64, f64)> {
        let i = self.iterations.iter().position(|&x| x == k)?;
        let j = self.nodes.iter().position(|&x| x == m)?;
        Some((self.sdc[i][j], self.picard[i][j]))
    }

    pub fn table(&self) -> Table {
        let mut t = Table::new(["k", "m", "sdc", "picard"]);
        for (i, &k) in self.iterations.iter().enumerate() {
            for (j, &m) in self.nodes.iter().enumerate() {
                t.push(vec![k.into(), m.into(), self.sdc[i][j].into(), self.picard[i][j].into()]);
            }
        }
        t
    }

    /// K rows, M columns, Picard in brackets.
    pub fn layout(&self) -> String {
        let mut s = String::from("K");
        for m in &self.nodes {
            s += &format!("\tM={m}");
        }
        s.push('\n');
        for (i, k) in self.iterations.iter().enumerate() {
            s += &k.to_string();
            for j in 0..self.nodes.len() {
                s += &format!("\t{:.1} ({:.1})", self.sdc[i][j], self.picard[i][j]);
            }
            s.push('\n');
        }
        s
    }
}

/// Stability limits on the `mu = 0` axis for SDC and Picard.
pub fn run_limits(cfg: &ExperimentConfig) -> Result<LimitsTable> {
    let rules = cfg
        .rule
        .nodes
        .iter()
        .map(|&m| QuadratureRule::new(cfg.rule.family, m))
        .collect::<Result<Vec<_>>>()?;
    let row = |kind: fn(usize) -> ScanKind| -> Vec<Vec<f64>> {
        cfg.sweeper
            .iterations
            .par_iter()
            .map(|&k| rules.iter().map(|r| stability_limit(kind(k), r)).collect())
            .collect()
    };
    Ok(LimitsTable {
        nodes: cfg.rule.nodes.clone(),
        iterations: cfg.sweeper.iterations.clone(),
        sdc: row(ScanKind::SdcStability),
        picard: row(ScanKind::PicardStability),
    })
}

/// Trajectory of one SDC run using the first configured node and iteration counts.
pub fn run_integrate(cfg: &ExperimentConfig) -> Result<Table> {
    let m = cfg.rule.nodes.first().copied().unwrap_or(3);
    let k = cfg.sweeper.iterations.first().copied().unwrap_or(3);
    let dt = cfg.time.dt.first().copied().unwrap_or(0.01);
    let sw = sweeper(cfg, m, k)?;
    let problem = cfg.problem.build()?;
    let (x0, v0) = cfg.problem.initial_value();
    let d = x0.len();
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=d).map(|i| format!("x{i}")));
    cols.extend((1..=d).map(|i| format!("v{i}")));
    cols.extend(["f_evals".to_string(), "iterations".into(), "residual".into()]);
    let mut t = Table::new(cols);
    let mut first: Vec<Value> = vec![cfg.time.t0.into()];
    first.extend(x0.iter().chain(&v0).map(|&a| Value::from(a)));
    first.extend([0usize.into(), 0usize.into(), 0.0.into()]);
    t.push(first);
    march(
        &x0,
        &v0,
        cfg.time.t0,
        cfg.time.t_end,
        dt,
        |x, v, h| sdc_step(&problem, x, v, h, &sw),
        |time, r| {
            let mut row: Vec<Value> = vec![time.into()];
            row.extend(r.x_end.iter().chain(&r.v_end).map(|&a| Value::from(a)));
            row.extend([r.f_evals.into(), r.iterations_used.into(), r.final_residual.into()]);
            t.push(row);
        },
    )?;
    Ok(t)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    Ok(())
}

/// Runs the configured experiment and writes its files. Returns the paths written.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<std::path::PathBuf>> {
    use super::config::ExperimentKind as E;
    let dir = cfg.out.as_path();
    ensure_dir(dir)?;
    let name = cfg.experiment.name();
    let mut written = Vec::new();
    let mut save = |file: String, table: &Table| -> Result<()> {
        let p = dir.join(file);
        table.write_csv(&p)?;
        written.push(p);
        Ok(())
    };
    let mut summary: Vec<(String, Value)> = Vec::new();
    match cfg.experiment {
        E::Nodes => save(format!("{name}.csv"), &run_nodes(cfg)?)?,
        E::StabilityMap | E::ConvergenceMap => {
            let res = run_scan(cfg, cfg.experiment == E::ConvergenceMap)?;
            let p = dir.join(format!("{name}.csv"));
            res.write_csv(&p)?;
            written.push(p);
            let g = dir.join(format!("{name}.txt"));
            res.write_text_grid(std::fs::File::create(&g)?)?;
            written.push(g);
            let stable = res.classify(0.0).iter().filter(|&&s| s).count();
            summary.push(("kind".into(), res.kind.name().into()));
            summary.push(("stable_fraction".into(), (stable as f64 / res.rho.len() as f64).into()));
            summary.push(("failed_cells".into(), res.failures.len().into()));
        }
        E::StabilityLimits => {
            let lim = run_limits(cfg)?;
            save(format!("{name}.csv"), &lim.table())?;
            let p = dir.join(format!("{name}.txt"));
            std::fs::write(&p, lim.layout())?;
            written.push(p);
            for (i, k) in lim.iterations.iter().enumerate() {
                for (j, m) in lim.nodes.iter().enumerate() {
                    summary.push((format!("sdc_k{k}_m{m}"), lim.sdc[i][j].into()));
                    summary.push((format!("picard_k{k}_m{m}"), lim.picard[i][j].into()));
                }
            }
        }
        E::LocalOrder | E::GlobalOrder => {
            let rep = if cfg.experiment == E::LocalOrder {
                run_local_order(cfg)?
            } else {
                run_global_order(cfg)?
            };
            save(format!("{name}.csv"), &rep.errors_table())?;
            save(format!("{name}-slopes.csv"), &rep.slopes_table())?;
            for r in &rep.rows {
                summary.push((format!("slope_m{}_k{}_{}", r.m, r.k, r.component), r.slope().unwrap_or(f64::NAN).into()));
            }
        }
        E::WorkPrecision => {
            let rep = run_work_precision(cfg)?;
            save(format!("{name}.csv"), &rep.table())?;
            summary.push(("runs".into(), rep.rows.len().into()));
        }
        E::Hamiltonian => {
            let rep = run_hamiltonian_drift(cfg)?;
            save(format!("{name}.csv"), &rep.series_table())?;
            save(format!("{name}-summary.csv"), &rep.summary_table())?;
            for s in &rep.series {
                summary.push((format!("max_error_{}_m{}_k{}", s.label, s.m, s.k), s.max_error.into()));
            }
        }
        E::Integrate => {
            let t = run_integrate(cfg)?;
            if let Some(last) = t.rows.last() {
                let fe = t.column("f_evals").expect("column exists");
                summary.push(("f_evals".into(), last[fe].clone()));
            }
            save(format!("{name}.csv"), &t)?;
        }
    }
    update_summary(dir, name, &summary)?;
    written.push(dir.join("summary.csv"));
    Ok(written)
}
